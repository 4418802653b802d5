"""Sampled fields on the staggered (r, t) grid and the weighted norms used on them."""

import csv
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from src.core.exceptions import ConfigError, GridError, ProfileUnscalable, TruncationWarning
from src.utils.factory import Factory
from src.utils.logging import get_logger

logger = get_logger("fields")

ENERGY_TAIL_TOL = 1e-10
MEMBERSHIP_RTOL = 1e-10

ArrayLike = Union[float, np.ndarray]


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class GridSpec:
    """Truncated quarter-plane sampled at r_i = (i + 1/2) h, t_n = n h with h = t_max / n."""

    r_max: float
    t_max: float
    n: int
    stagger: bool = True

    def __post_init__(self):
        if not (self.r_max > 0 and self.t_max > 0):
            raise GridError(f"r_max and t_max must be positive, got {self.r_max}, {self.t_max}")
        if self.n < 8:
            raise GridError(f"Grid resolution n must be >= 8, got {self.n}")
        if not self.stagger:
            raise GridError("Unstaggered grids put a node on r = 0")
        if self.n_r < 4:
            raise GridError(f"r_max={self.r_max} leaves fewer than 4 radial nodes")

    @property
    def h(self) -> float:
        return self.t_max / self.n

    @property
    def n_t(self) -> int:
        return self.n + 1

    @property
    def n_r(self) -> int:
        return int(round(self.r_max / self.h))

    @property
    def n_data(self) -> int:
        """Radial samples of a datum; enough to read f(r + t) anywhere on the grid."""
        return self.n_r + self.n_t

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_t, self.n_r)

    @cached_property
    def r(self) -> np.ndarray:
        return _readonly((np.arange(self.n_r) + 0.5) * self.h)

    @cached_property
    def t(self) -> np.ndarray:
        return _readonly(np.arange(self.n_t) * self.h)

    @cached_property
    def r_data(self) -> np.ndarray:
        return _readonly((np.arange(self.n_data) + 0.5) * self.h)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        R, T = np.meshgrid(self.r, self.t)
        return _readonly(R), _readonly(T)

    def time_index(self, t: float) -> int:
        n = int(round(t / self.h))
        if not (0 <= n < self.n_t) or abs(n * self.h - t) > 1e-9 * max(1.0, abs(t)):
            raise GridError(f"t={t} is not a grid time (h={self.h})")
        return n

    def radius_index(self, r: float) -> int:
        i = int(round(r / self.h - 0.5))
        if not (0 <= i < self.n_r) or abs((i + 0.5) * self.h - r) > 1e-9 * max(1.0, r):
            raise GridError(f"r={r} is not a grid radius (h={self.h})")
        return i

    def nearest_time_index(self, t: float) -> int:
        return int(min(max(round(t / self.h), 0), self.n_t - 1))

    def causal_mask(self) -> np.ndarray:
        """Nodes whose backward light cone stays inside the radial grid."""
        n = np.arange(self.n_t)[:, None]
        i = np.arange(self.n_r)[None, :]
        return (i + n) <= self.n_r - 1

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[margin : self.n_t - margin, margin : self.n_r - margin] = True
        return mask


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _frozen(values: ArrayLike, shape: Tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    try:
        arr = np.broadcast_to(arr, shape).copy()
    except ValueError as e:
        raise GridError(f"{name} has shape {arr.shape}, expected {shape}") from e
    return _readonly(arr)


def radial_diff(a: np.ndarray, h: float, parity: Parity = Parity.EVEN) -> np.ndarray:
    """Centred r-derivative along the last axis, reflecting through r = 0."""
    first = a[..., :1]
    mirror = -first if parity == Parity.ODD else first
    padded = np.concatenate([mirror, a], axis=-1)
    return np.gradient(padded, h, axis=-1, edge_order=2)[..., 1:]


def time_diff(a: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(a, h, axis=0, edge_order=2)


@dataclass(frozen=True, eq=False)
class Field:
    """u, u_r, u_t sampled on every grid node; immutable once built."""

    grid: GridSpec
    u: np.ndarray
    u_r: np.ndarray
    u_t: np.ndarray
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        for name in ("u", "u_r", "u_t"):
            object.__setattr__(self, name, _frozen(getattr(self, name), self.grid.shape, name))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, 0.0, 0.0, 0.0)

    @classmethod
    def from_functions(
        cls,
        grid: GridSpec,
        u: Callable[[np.ndarray, np.ndarray], ArrayLike],
        u_r: Callable[[np.ndarray, np.ndarray], ArrayLike],
        u_t: Callable[[np.ndarray, np.ndarray], ArrayLike],
    ) -> "Field":
        R, T = grid.mesh
        return cls(grid, u(R, T), u_r(R, T), u_t(R, T))

    def _same_grid(self, other: "Field") -> None:
        if other.grid != self.grid:
            raise GridError("Fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._same_grid(other)
        return Field(self.grid, self.u + other.u, self.u_r + other.u_r, self.u_t + other.u_t)

    def __sub__(self, other: "Field") -> "Field":
        self._same_grid(other)
        return Field(self.grid, self.u - other.u, self.u_r - other.u_r, self.u_t - other.u_t)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, c * self.u, c * self.u_r, c * self.u_t)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self * -1.0

    @cached_property
    def u_rr(self) -> np.ndarray:
        return _readonly(radial_diff(self.u_r, self.grid.h, Parity.ODD))

    @cached_property
    def u_tt(self) -> np.ndarray:
        return _readonly(time_diff(self.u_t, self.grid.h))

    @cached_property
    def u_rt(self) -> np.ndarray:
        h = self.grid.h
        return _readonly(0.5 * (radial_diff(self.u_t, h) + time_diff(self.u_r, h)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.u))) if self.u.size else 0.0

    def derivative_defect(self, margin: int = 1) -> Tuple[float, float]:
        """Max mismatch of stored u_r, u_t against centred differences of u."""
        h = self.grid.h
        mask = self.grid.interior_mask(margin)
        err_r = np.abs(self.u_r - radial_diff(self.u, h))[mask]
        err_t = np.abs(self.u_t - time_diff(self.u, h))[mask]
        return float(err_r.max()), float(err_t.max())

    def to_csv(self, path: Union[str, Path], stride: int = 1) -> None:
        R, T = self.grid.mesh
        rows = (slice(None, None, stride), slice(None, None, stride))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "t", "u", "u_r", "u_t"])
            for values in zip(*(a[rows].ravel() for a in (R, T, self.u, self.u_r, self.u_t))):
                writer.writerow([repr(float(v)) for v in values])


@dataclass(frozen=True, eq=False)
class SourceField:
    """Right-hand side F and its radial derivative on the grid."""

    grid: GridSpec
    F: np.ndarray
    F_r: np.ndarray
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        for name in ("F", "F_r"):
            object.__setattr__(self, name, _frozen(getattr(self, name), self.grid.shape, name))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SourceField":
        return cls(grid, 0.0, 0.0)

    @classmethod
    def from_function(
        cls,
        grid: GridSpec,
        F: Callable[[np.ndarray, np.ndarray], ArrayLike],
        F_r: Optional[Callable[[np.ndarray, np.ndarray], ArrayLike]] = None,
    ) -> "SourceField":
        R, T = grid.mesh
        values = np.broadcast_to(np.asarray(F(R, T), dtype=float), grid.shape)
        derivative = F_r(R, T) if F_r is not None else radial_diff(values, grid.h)
        return cls(grid, values, derivative)

    def __add__(self, other: "SourceField") -> "SourceField":
        return SourceField(self.grid, self.F + other.F, self.F_r + other.F_r)

    def __sub__(self, other: "SourceField") -> "SourceField":
        return SourceField(self.grid, self.F - other.F, self.F_r - other.F_r)

    def __mul__(self, c: float) -> "SourceField":
        return SourceField(self.grid, c * self.F, c * self.F_r)

    __rmul__ = __mul__

    def last_active_row(self) -> int:
        """Index of the last time row carrying a non-zero value, -1 if none."""
        rows = np.flatnonzero(np.any(self.F != 0.0, axis=1))
        return int(rows[-1]) if rows.size else -1


@dataclass(frozen=True, eq=False)
class DataPair:
    """Datum (f, g) with derivative samples on the extended radial nodes."""

    r: np.ndarray
    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    nu: float
    eps: float

    def __post_init__(self):
        shape = np.shape(self.r)
        object.__setattr__(self, "r", _frozen(self.r, shape, "r"))
        for name in ("f", "df", "d2f", "g", "dg"):
            object.__setattr__(self, name, _frozen(getattr(self, name), shape, name))

    @classmethod
    def zeros(cls, grid: GridSpec, nu: float, eps: float = 0.0) -> "DataPair":
        return cls(grid.r_data, 0.0, 0.0, 0.0, 0.0, 0.0, nu=nu, eps=eps)

    @classmethod
    def from_trace(cls, u: Field, nu: float) -> "DataPair":
        """Extract (u, u_t)(., 0) with derivatives, zero-padded past the field grid."""
        grid = u.grid
        f, df, g = u.u[0], u.u_r[0], u.u_t[0]
        d2f = radial_diff(df, grid.h, Parity.ODD)
        dg = radial_diff(g, grid.h)
        pad = grid.n_data - grid.n_r
        arrays = [np.pad(a, (0, pad)) for a in (f, df, d2f, g, dg)]
        pair = cls(grid.r_data, *arrays, nu=nu, eps=0.0)
        return replace(pair, eps=pair.sup_weighted(nu))

    def _combine(self, other: "DataPair", sign: float) -> "DataPair":
        if other.r.shape != self.r.shape or not np.array_equal(other.r, self.r):
            raise GridError("Data pairs are sampled on different radii")
        arrays = [
            getattr(self, name) + sign * getattr(other, name)
            for name in ("f", "df", "d2f", "g", "dg")
        ]
        pair = DataPair(self.r, *arrays, nu=self.nu, eps=0.0)
        return replace(pair, eps=pair.sup_weighted(self.nu))

    def __add__(self, other: "DataPair") -> "DataPair":
        return self._combine(other, 1.0)

    def __sub__(self, other: "DataPair") -> "DataPair":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "DataPair":
        return DataPair(
            self.r, c * self.f, c * self.df, c * self.d2f, c * self.g, c * self.dg,
            nu=self.nu, eps=abs(c) * self.eps,
        )

    __rmul__ = __mul__

    def time_reflected(self) -> "DataPair":
        """Data of t -> -t: (f, g) becomes (f, -g)."""
        return DataPair(
            self.r, self.f, self.df, self.d2f, -self.g, -self.dg, nu=self.nu, eps=self.eps
        )

    @property
    def is_zero(self) -> bool:
        return not any(np.any(getattr(self, n)) for n in ("f", "df", "d2f", "g", "dg"))

    def triple_norm(self) -> np.ndarray:
        r = self.r
        return (
            np.abs(self.f)
            + (1.0 + r) * (np.abs(self.df) + np.abs(self.g))
            + r * (np.abs(self.d2f) + np.abs(self.dg))
        )

    def weighted_profile(self, nu: float) -> np.ndarray:
        return (1.0 + self.r) ** nu * self.triple_norm()

    def sup_weighted(self, nu: float) -> float:
        profile = self.weighted_profile(nu)
        return float(profile.max()) if profile.size else 0.0


@dataclass(frozen=True)
class WeightParams:
    """Exponents of the weighted source functionals M_0 (s=1) and M_1 (s=2)."""

    alpha: float
    beta: float
    gamma: float
    delta: float
    s: int = 1

    def __post_init__(self):
        if self.s not in (1, 2):
            raise ConfigError(f"Weight derivative order must be 1 or 2, got {self.s}")

    @property
    def nu(self) -> float:
        return min(self.alpha + self.beta + self.gamma - 1.0, self.delta)

    @property
    def mu(self) -> float:
        return min(self.alpha + self.beta - 1.0, self.delta)

    @property
    def decay_order(self) -> float:
        return self.alpha + self.beta + self.gamma

    def admits_L(self) -> bool:
        return self.alpha < 3 - self.s and self.delta > 1.0 and self.gamma >= 0.0

    def admits_R(self) -> bool:
        return self.alpha < 3 - self.s and self.delta > 1.0 and self.decay_order > 2.0

    def with_order(self, s: int) -> "WeightParams":
        return replace(self, s=s)


# Unit-amplitude datum families: r -> (f, f', f'', g, g')
profile_families: Factory[Tuple[np.ndarray, ...]] = Factory("profile family")


@profile_families.register("gaussian")
def _gaussian_profile(r: np.ndarray, nu: float) -> Tuple[np.ndarray, ...]:
    e = np.exp(-(r**2))
    return e, -2.0 * r * e, (4.0 * r**2 - 2.0) * e, e, -2.0 * r * e


@profile_families.register("algebraic")
def _algebraic_profile(r: np.ndarray, nu: float) -> Tuple[np.ndarray, ...]:
    a, b = nu / 2.0, (nu + 1.0) / 2.0
    s = 1.0 + r**2
    f = s**-a
    df = -2.0 * a * r * s ** (-a - 1.0)
    d2f = -2.0 * a * s ** (-a - 1.0) + 4.0 * a * (a + 1.0) * r**2 * s ** (-a - 2.0)
    g = s**-b
    dg = -2.0 * b * r * s ** (-b - 1.0)
    return f, df, d2f, g, dg


@profile_families.register("zero")
def _zero_profile(r: np.ndarray, nu: float) -> Tuple[np.ndarray, ...]:
    z = np.zeros_like(r)
    return z, z, z, z, z


def make_profile(family: str, nu: float, eps: float, grid: GridSpec) -> DataPair:
    """Even datum of the given family scaled so its Y_nu sup equals eps."""
    if nu <= 0 or eps < 0:
        raise ConfigError(f"Profile needs nu > 0 and eps >= 0, got nu={nu}, eps={eps}")
    r = grid.r_data
    try:
        unit = profile_families.create(family, r, nu)
    except KeyError as e:
        raise ConfigError(f"Unknown profile family {family!r}: {str(e)}") from e

    unit_pair = DataPair(r, *unit, nu=nu, eps=0.0)
    if eps == 0.0 or unit_pair.is_zero:
        return DataPair.zeros(grid, nu, eps)

    unit_sup = unit_pair.sup_weighted(nu)
    if not math.isfinite(unit_sup) or unit_sup <= 0.0:
        raise ProfileUnscalable(f"{family} profile has Y_{nu} sup {unit_sup}")
    c = eps / unit_sup
    return DataPair(r, *(c * a for a in unit), nu=nu, eps=eps)


def check_Y_membership(d: DataPair, nu: float, eps: float) -> Tuple[bool, float]:
    sup = d.sup_weighted(nu)
    return sup <= eps * (1.0 + MEMBERSHIP_RTOL), sup


def bracket_field(u: Field, s: int) -> np.ndarray:
    """[u]_s at every node."""
    R, _ = u.grid.mesh
    first = np.abs(u.u_r) + np.abs(u.u_t)
    if s == 1:
        return np.abs(u.u) + R * first
    if s == 2:
        second = np.abs(u.u_rr) + np.abs(u.u_rt) + np.abs(u.u_tt)
        return np.abs(u.u) + (1.0 + R) * first + R * second
    raise ValueError(f"Bracket order must be 1 or 2, got {s}")


def bracket_norm(u: Field, s: int, r: float, t: float) -> float:
    n, i = u.grid.time_index(t), u.grid.radius_index(r)
    return float(bracket_field(u, s)[n, i])


def _x_weight(grid: GridSpec, nu: float) -> np.ndarray:
    R, T = grid.mesh
    return (1.0 + np.abs(R - T)) ** nu


def _z_weight(grid: GridSpec, nu: float) -> np.ndarray:
    # X-weight times a factor <= 1 for nu <= 1 and >= 1 for nu >= 1
    R, T = grid.mesh
    ratio = (1.0 + np.abs(R - T)) / (1.0 + R + T)
    return _x_weight(grid, nu) * ratio ** (1.0 - nu)


def norm_X(u: Field, s: int, nu: float) -> float:
    return float(np.max(bracket_field(u, s) * _x_weight(u.grid, nu)))


def norm_Z(u: Field, s: int, nu: float) -> float:
    return float(np.max(bracket_field(u, s) * _z_weight(u.grid, nu)))


def energy_norm(u: Field, t: float, tail_tol: Optional[float] = ENERGY_TAIL_TOL) -> float:
    """Radial energy norm sqrt(2 pi int (u_t^2 + u_r^2) r^2 dr) at a grid time."""
    grid = u.grid
    n = grid.time_index(t)
    r = np.concatenate(([0.0], grid.r))
    density = np.concatenate(([0.0], (u.u_t[n] ** 2 + u.u_r[n] ** 2) * grid.r**2))
    if tail_tol is not None and density[-1] > tail_tol:
        logger.warning(f"energy density {density[-1]:.3e} at r_max exceeds {tail_tol:.1e} (t={t})")
        warnings.warn(
            f"Energy integrand {density[-1]:.3e} at r_max={grid.r[-1]:g} exceeds {tail_tol:g}",
            TruncationWarning,
            stacklevel=2,
        )
    return math.sqrt(2.0 * math.pi * trapezoid(density, r))


def energy_series(u: Field, times: Iterable[float]) -> np.ndarray:
    return np.array([energy_norm(u, t, tail_tol=None) for t in times])


def weighted_sup_M(F: SourceField, w: WeightParams) -> float:
    """M_0 (s=1) or M_1 = M_0 + derivative term (s=2) as a discrete sup."""
    R, T = F.grid.mesh
    outer = (1.0 + R + T) ** w.gamma * (1.0 + np.abs(R - T)) ** w.delta
    m = float(np.max(np.abs(F.F) * R**w.alpha * (1.0 + R) ** w.beta * outer))
    if w.s == 2:
        m += float(
            np.max(np.abs(F.F_r) * R ** (w.alpha + 1.0) * (1.0 + R) ** (w.beta - 1.0) * outer)
        )
    return m
