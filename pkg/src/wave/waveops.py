"""Lightcone integral operators K, L, R on the staggered characteristic grid.

All quadratures are composite trapezoid rules whose limits fall on grid
nodes: with equal spacing in r and t, the points r +/- (t - s) are radial
nodes whenever s is a time node. Integrals in lambda are prefix sums of
lambda*F, even under the reflection k <-> -k-1 of node indices; the
s-integrals become cumulative sums along grid diagonals.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.core.exceptions import GridError, TailTooFat
from src.wave.fields import (
    DataPair,
    Field,
    GridSpec,
    Parity,
    SourceField,
    WeightParams,
    radial_diff,
    weighted_sup_M,
)
from src.utils.logging import get_logger

logger = get_logger("waveops")

# Largest share of the weight bound on R(F) allowed past t_infinity
DEFAULT_TAIL_TOL = 0.5


@dataclass(frozen=True)
class TruncationPolicy:
    """Replacement of s = infinity in R by t_infinity, with a tail guard."""

    t_infinity: Optional[float] = None
    tail_tol: float = DEFAULT_TAIL_TOL
    weight_hint: Optional[WeightParams] = None

    def with_hint(self, hint: Optional[WeightParams]) -> "TruncationPolicy":
        return replace(self, weight_hint=hint)

    def last_row(self, grid: GridSpec) -> int:
        if self.t_infinity is None:
            return grid.n_t - 1
        if self.t_infinity > grid.t_max + 1e-12:
            raise GridError(f"t_infinity={self.t_infinity} beyond grid t_max={grid.t_max}")
        return int(math.floor(self.t_infinity / grid.h + 1e-9))

    def horizon(self, grid: GridSpec) -> float:
        """Time of the last row R integrates over."""
        return float(grid.t[self.last_row(grid)])


def _reflect(right: np.ndarray, pad: int, parity: Parity) -> np.ndarray:
    """Prepend columns k = -pad..-1 mirrored through k -> -k-1."""
    left = right[:, :pad][:, ::-1]
    if parity == Parity.ODD:
        left = -left
    return np.concatenate([left, right], axis=1)


def _prefix(y: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid integral over rows 0..n of each column."""
    cs = np.cumsum(y, axis=0)
    return h * (cs - 0.5 * y[:1] - 0.5 * y)


def _suffix(y: np.ndarray, h: float, last: int) -> np.ndarray:
    """Trapezoid integral over rows n..last of each column (zero past last)."""
    out = np.zeros_like(y)
    if last < 0:
        return out
    body = y[: last + 1]
    cs = np.cumsum(body[::-1], axis=0)[::-1]
    out[: last + 1] = h * (cs - 0.5 * body - 0.5 * body[-1:])
    return out


def _lightcone_sums(ext: np.ndarray, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """h * sum over m <= n of X[m, i+n-m] and of X[m, i-n+m], trapezoid-weighted."""
    n_t, n_r = grid.shape
    pad = n_r + n_t
    m = np.arange(n_t)[:, None]
    n = np.arange(n_t)[:, None]
    i = np.arange(n_r)[None, :]

    c = np.arange(n_r + n_t - 1)[None, :]
    outgoing = _prefix(ext[m, c - m + pad], grid.h)[n, i + n]

    d = np.arange(-(n_t - 1), n_r)[None, :]
    incoming = _prefix(ext[m, d + m + pad], grid.h)[n, i - n + (n_t - 1)]
    return outgoing, incoming


def _future_sums(ext: np.ndarray, grid: GridSpec, last: int) -> Tuple[np.ndarray, np.ndarray]:
    """h * sum over n <= m <= last of X[m, i+m-n] and of X[m, m-n-i-1]."""
    n_t, n_r = grid.shape
    pad = n_r + n_t
    m = np.arange(n_t)[:, None]
    n = np.arange(n_t)[:, None]
    i = np.arange(n_r)[None, :]

    lo = -(n_r + n_t - 1)
    d = np.arange(lo, n_r)[None, :]
    sums = _suffix(ext[m, d + m + pad], grid.h, last)
    return sums[n, i - n - lo], sums[n, -i - n - 1 - lo]


def _lambda_source(F: SourceField) -> Tuple[np.ndarray, np.ndarray]:
    """lambda*F (odd) and its prefix integral from the first node (even) on extended columns.

    Sources vanish past the radial grid, so the prefix integral stays constant there.
    """
    grid = F.grid
    n_t, n_r = grid.shape
    pad = n_r + n_t
    g = np.zeros((n_t, n_r + pad))
    g[:, :n_r] = grid.r[None, :] * F.F
    S = cumulative_trapezoid(g, dx=grid.h, axis=1, initial=0.0)
    return _reflect(g, pad, Parity.ODD), _reflect(S, pad, Parity.EVEN)


def _check_grid(F: SourceField, grid: GridSpec) -> None:
    if F.grid != grid:
        raise GridError("Source sampled on a different grid")


def apply_K(d: DataPair, grid: GridSpec) -> Field:
    """Free radial wave with data (f, g) at t = 0."""
    if d.r.shape != (grid.n_data,) or not np.allclose(d.r, grid.r_data):
        raise GridError(f"Datum has {d.r.size} samples, grid expects {grid.n_data}")
    h = grid.h
    n = np.arange(grid.n_t)[:, None]
    i = np.arange(grid.n_r)[None, :]
    r = grid.r[None, :]

    k_out = i + n
    k_in = i - n
    sign = np.where(k_in >= 0, 1.0, -1.0)
    k_ref = np.where(k_in >= 0, k_in, -k_in - 1)
    lam_out = (k_out + 0.5) * h
    lam_in = (k_in + 0.5) * h

    f_out, df_out, g_out = d.f[k_out], d.df[k_out], d.g[k_out]
    f_in, df_in, g_in = d.f[k_ref], sign * d.df[k_ref], d.g[k_ref]

    u_f = (lam_out * f_out + lam_in * f_in) / (2.0 * r)
    ut_f = (f_out + lam_out * df_out - f_in - lam_in * df_in) / (2.0 * r)
    ur_f = (f_out + lam_out * df_out + f_in + lam_in * df_in) / (2.0 * r) - u_f / r

    Sg = cumulative_trapezoid(d.r * d.g, dx=h, initial=0.0)
    u_g = (Sg[k_out] - Sg[k_ref]) / (2.0 * r)
    ut_g = (lam_out * g_out + lam_in * g_in) / (2.0 * r)
    ur_g = (lam_out * g_out - lam_in * g_in) / (2.0 * r) - u_g / r

    return Field(grid, u_f + u_g, ur_f + ur_g, ut_f + ut_g)


def apply_L(F: SourceField, grid: GridSpec) -> Field:
    """Forward Duhamel integral over the backward light cone (zero data at t = 0)."""
    _check_grid(F, grid)
    r = grid.r[None, :]
    g, S = _lambda_source(F)

    s_out, s_in = _lightcone_sums(S, grid)
    g_out, g_in = _lightcone_sums(g, grid)

    u = (s_out - s_in) / (2.0 * r)
    u_t = (g_out + g_in) / (2.0 * r)
    u_r = (g_out - g_in) / (2.0 * r) - u / r
    return Field(grid, u, u_r, u_t)


def estimate_tail(F: SourceField, trunc: TruncationPolicy) -> float:
    """Bound on the part of R(F) cut off at t_infinity, from the hinted weight decay."""
    hint = trunc.weight_hint
    if hint is None:
        return 0.0
    sigma = hint.decay_order
    if sigma <= 2.0:
        raise TailTooFat(f"weight decay alpha+beta+gamma = {sigma:g} <= 2 is not integrable")
    m0 = weighted_sup_M(F, hint.with_order(1))
    return m0 * (1.0 + trunc.horizon(F.grid)) ** (2.0 - sigma) / (sigma - 2.0)


def tail_fraction(F: SourceField, trunc: TruncationPolicy) -> float:
    """Share of the hinted bound on R(F) that lies past t_infinity.

    The same bound integrated from s = 0 is M0 / (sigma - 2), so the share
    is (1 + t_infinity)^(2 - sigma) for any non-zero source.
    """
    tail = estimate_tail(F, trunc)
    if tail == 0.0:
        return 0.0
    return (1.0 + trunc.horizon(F.grid)) ** (2.0 - trunc.weight_hint.decay_order)


def tail_compensation(times: np.ndarray, decay: float, horizon: float) -> np.ndarray:
    """Factors restoring the energy of R lost to the cut at `horizon`.

    A source whose energy contribution at time s scales like (1 + s)^(decay - 1)
    gives R an energy (1 + t)^decay - (1 + T)^decay once cut at T. Multiplying
    by the returned factor recovers (1 + t)^decay. Times at or past the
    horizon get NaN.
    """
    if decay >= 0.0:
        raise ValueError(f"tail compensation needs a decaying series, got exponent {decay:g}")
    t = np.asarray(times, dtype=float)
    kept = ((1.0 + horizon) / (1.0 + t)) ** decay
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t < horizon, 1.0 / (1.0 - kept), np.nan)


def apply_R(F: SourceField, grid: GridSpec, trunc: Optional[TruncationPolicy] = None) -> Field:
    """Backward (final-value) Duhamel integral over s in [t, t_infinity]."""
    _check_grid(F, grid)
    trunc = trunc or TruncationPolicy()

    fraction = tail_fraction(F, trunc)
    if fraction > trunc.tail_tol:
        raise TailTooFat(
            f"{fraction:.3e} of the weight bound on R(F) lies past t={trunc.horizon(grid):g}, "
            f"above tail_tol {trunc.tail_tol:g}"
        )
    logger.debug(f"R tail share {fraction:.3e}")

    last = min(trunc.last_row(grid), F.last_active_row())
    r = grid.r[None, :]
    g, S = _lambda_source(F)

    s_out, s_in = _future_sums(S, grid, last)
    g_out, g_in = _future_sums(g, grid, last)

    u = (s_out - s_in) / (2.0 * r)
    u_t = -(g_out - g_in) / (2.0 * r)
    u_r = (g_out + g_in) / (2.0 * r) - u / r
    return Field(grid, u, u_r, u_t)


def nonlinearity(v: Field, exponent: float) -> SourceField:
    """|v_t|^exponent with its radial derivative."""
    vt = v.u_t
    a = np.abs(vt)
    F = a**exponent
    v_tr = radial_diff(vt, v.grid.h)
    with np.errstate(divide="ignore", invalid="ignore"):
        F_r = np.where(a > 0.0, exponent * a ** (exponent - 1.0) * np.sign(vt) * v_tr, 0.0)
    return SourceField(v.grid, F, F_r)


def difference_source(a: Field, b: Field, exponent: float) -> SourceField:
    """|a_t|^exponent - |b_t|^exponent."""
    if a.grid != b.grid:
        raise GridError("Difference source needs fields on one grid")
    return nonlinearity(a, exponent) - nonlinearity(b, exponent)


def pde_residual(u: Field, F: SourceField, margin: int = 1) -> Field:
    """u_tt - u_rr - (2/r) u_r - F by centred differences; zero outside the interior."""
    grid = u.grid
    h = grid.h
    w = u.u
    res = np.zeros(grid.shape)
    m = max(margin, 1)
    core = (slice(m, grid.n_t - m), slice(m, grid.n_r - m))
    r = grid.r[None, m : grid.n_r - m]

    d_tt = (w[m + 1 : grid.n_t - m + 1, m : grid.n_r - m] - 2.0 * w[core]
            + w[m - 1 : grid.n_t - m - 1, m : grid.n_r - m]) / h**2
    d_rr = (w[m : grid.n_t - m, m + 1 : grid.n_r - m + 1] - 2.0 * w[core]
            + w[m : grid.n_t - m, m - 1 : grid.n_r - m - 1]) / h**2
    d_r = (w[m : grid.n_t - m, m + 1 : grid.n_r - m + 1]
           - w[m : grid.n_t - m, m - 1 : grid.n_r - m - 1]) / (2.0 * h)

    res[core] = d_tt - d_rr - 2.0 / r * d_r - F.F[core]
    return Field(grid, res, 0.0, 0.0)


def residual_max(u: Field, F: SourceField, margin: int = 2) -> float:
    res = pde_residual(u, F, margin=margin)
    return float(np.max(np.abs(res.u)))
