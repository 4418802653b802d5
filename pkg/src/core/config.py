import tomllib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigError


class ExponentsConfig(BaseModel):
    """Nonlinearity exponents and optional kappa override (p = 2 only)"""

    p: float = Field(gt=1.0, default=1.8)
    q: float = Field(gt=1.0, default=4.0)
    kappa1: Optional[float] = Field(gt=0.0, default=None)
    kappa2: Optional[float] = Field(gt=0.0, default=None)

    @model_validator(mode="after")
    def check_ordering(self):
        if self.q < self.p:
            raise ValueError(f"q must be >= p, got p={self.p}, q={self.q}")
        if (self.kappa1 is None) != (self.kappa2 is None):
            raise ValueError("kappa1 and kappa2 must be overridden together")
        return self

    @property
    def kappa_override(self) -> Optional[Tuple[float, float]]:
        if self.kappa1 is None:
            return None
        return (self.kappa1, self.kappa2)


class DataConfig(BaseModel):
    """Datum family, amplitudes and decay indices"""

    eps: float = Field(ge=0.0, default=1e-2)
    eps_list: List[float] = Field(default_factory=lambda: [4e-2, 2e-2, 1e-2, 5e-3])
    family: str = Field(default="gaussian", pattern="^(gaussian|algebraic|zero)$")
    nu1: Optional[float] = Field(gt=0.0, default=None)
    nu2: Optional[float] = Field(gt=0.0, default=None)
    eps0_estimate: Optional[float] = Field(gt=0.0, default=None)

    @field_validator("eps_list")
    def sort_descending(cls, v):
        if any(e <= 0 for e in v):
            raise ValueError("eps_list entries must be positive")
        return sorted(v, reverse=True)


class GridConfig(BaseModel):
    r_max: float = Field(gt=0.0, default=100.0)
    t_max: float = Field(gt=0.0, default=100.0)
    n: int = Field(ge=8, default=512)


class TruncationConfig(BaseModel):
    t_infinity: Optional[float] = Field(gt=0.0, default=None)
    # Share of the weight bound on R(F) allowed past t_infinity
    tail_tol: float = Field(gt=0.0, le=1.0, default=0.5)


class SolverConfig(BaseModel):
    """Picard iteration controls"""

    # Relative to the anchor's distance from zero
    tol: float = Field(gt=0.0, default=1e-8)
    max_iters: int = Field(ge=1, le=10000, default=50)
    ratio_bound: float = Field(gt=0.0, lt=1.0, default=0.5)
    divergence_ratio: float = Field(gt=0.0, default=0.9)
    left_domain_factor: float = Field(gt=1.0, default=10.0)


class OutputConfig(BaseModel):
    # Falls back to settings.output_dir
    directory: Optional[str] = None
    snapshot_stride: int = Field(ge=1, default=4)
    write_fields: bool = True


class RatesConfig(BaseModel):
    """Decay fitting window and acceptance margins"""

    window_start: float = Field(ge=0.0, default=10.0)
    window_end: Optional[float] = Field(gt=0.0, default=None)
    sample_start: float = Field(gt=0.0, default=5.0)
    sample_factor: float = Field(gt=1.0, default=1.5)
    decay_margin: float = Field(gt=0.0, default=0.15)
    scaling_tol: float = Field(gt=0.0, default=0.15)
    # Undo the energy lost to cutting R at t_infinity before fitting
    tail_compensation: bool = True


class VerifyConfig(BaseModel):
    """Invariant suite controls"""

    n: int = Field(ge=8, default=64)
    t_max: float = Field(gt=0.0, default=6.0)
    eps: float = Field(gt=0.0, default=1e-3)
    samples: int = Field(ge=1, default=200)
    seed: int = 0
    min_order: float = Field(gt=0.0, default=1.8)


class Settings(BaseSettings):
    # Logging Configuration
    log_level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    output_dir: str = "runs"

    @field_validator("log_level", mode="before")
    def uppercase_log_level(cls, v):
        return str(v).upper()

    model_config = SettingsConfigDict(
        env_prefix="RADWAVE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


class RunConfig(BaseSettings):
    """Configuration of one CLI run, layered CLI > file > environment > defaults"""

    exponents: ExponentsConfig = Field(default_factory=ExponentsConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    truncation: TruncationConfig = Field(default_factory=TruncationConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    rates: RatesConfig = Field(default_factory=RatesConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)

    @model_validator(mode="after")
    def check_truncation(self):
        t_inf = self.truncation.t_infinity
        if t_inf is not None and t_inf > self.grid.t_max:
            raise ValueError(f"t_infinity={t_inf} exceeds grid t_max={self.grid.t_max}")
        return self

    model_config = SettingsConfigDict(
        env_prefix="RADWAVE_RUN_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    ) -> "RunConfig":
        """Build a config from an optional TOML file plus section overrides"""
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    data = tomllib.load(fh)
            except (OSError, tomllib.TOMLDecodeError) as e:
                raise ConfigError(f"Cannot read config file {path}: {str(e)}") from e

        for section, values in (overrides or {}).items():
            merged = dict(data.get(section, {}))
            merged.update({k: v for k, v in values.items() if v is not None})
            data[section] = merged

        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {str(e)}") from e

    def fit_window(self) -> Tuple[float, float]:
        """Decay fitting window, defaulting its end to 0.8 t_max"""
        end = self.rates.window_end or 0.8 * self.grid.t_max
        return (self.rates.window_start, end)

    def to_grid(self):
        from src.wave.fields import GridSpec

        return GridSpec(r_max=self.grid.r_max, t_max=self.grid.t_max, n=self.grid.n)

    def to_truncation(self):
        from src.wave.waveops import TruncationPolicy

        return TruncationPolicy(
            t_infinity=self.truncation.t_infinity, tail_tol=self.truncation.tail_tol
        )

    def to_solver(self) -> SolverConfig:
        return self.solver

    def output_root(self) -> Path:
        return Path(self.output.directory or settings.output_dir)

    def to_ladder(self):
        from src.wave.params import ladder_for

        return ladder_for(self.exponents.p, self.exponents.q, self.exponents.kappa_override)


# Create a global settings instance
settings = Settings()
