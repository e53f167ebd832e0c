"""Flat key=value configuration files for the pipeline and the simulator.

Unknown keys are errors so typos fail fast. Values are typed per key; lists
use commas, matrices use semicolon-separated rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from pathlib import Path

from .errors import ValidationError

DEFAULT_ALPHA_TOTAL = 1.0 / 370.4


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{line_no}: expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in out:
                raise ValidationError(f"{path}:{line_no}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _as_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"key {key!r}: expected a number, got {text!r}") from None


def _as_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"key {key!r}: expected an integer, got {text!r}") from None


def _as_date(key: str, text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"key {key!r}: expected an ISO date, got {text!r}") from None


def _as_bool(key: str, text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValidationError(f"key {key!r}: expected true/false, got {text!r}")


def _as_float_list(key: str, text: str) -> tuple[float, ...]:
    return tuple(_as_float(key, p) for p in text.split(",") if p.strip())


def _as_str_list(key: str, text: str) -> tuple[str, ...]:
    items = tuple(p.strip() for p in text.split(",") if p.strip())
    if not items:
        raise ValidationError(f"key {key!r}: expected a comma-separated list")
    return items


def _as_matrix(key: str, text: str) -> tuple[tuple[float, ...], ...]:
    rows = tuple(_as_float_list(key, r) for r in text.split(";") if r.strip())
    if not rows:
        raise ValidationError(f"key {key!r}: expected semicolon-separated rows")
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"key {key!r}: rows have unequal lengths")
    return rows


@dataclass(frozen=True)
class PipelineConfig:
    """Everything cmd_train needs; defaults mirror standard practice for daily profiles."""

    data_csv: str
    response: str
    covariates: tuple[str, ...]
    phase1_end: date
    domain: tuple[float, float] = (0.0, 24.0)
    n_grid: int = 24
    aggregator: str = "median"
    n_basis: int = 30
    order: int = 4
    variance_threshold: float = 0.95
    alpha_total: float = DEFAULT_ALPHA_TOTAL
    min_obs: int = 4
    exclusion_list: str | None = None
    lambda_grid: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.variance_threshold <= 1.0:
            raise ValidationError(
                f"variance_threshold must be in (0, 1], got {self.variance_threshold}")
        if not 0.0 < self.alpha_total < 1.0:
            raise ValidationError(f"alpha_total must be in (0, 1), got {self.alpha_total}")
        if self.min_obs < 1:
            raise ValidationError(f"min_obs must be >= 1, got {self.min_obs}")
        if self.n_basis < self.order:
            raise ValidationError(f"n_basis ({self.n_basis}) must be >= order ({self.order})")
        if self.response in self.covariates:
            raise ValidationError(f"response {self.response!r} also listed as covariate")
        if any(l <= 0 for l in self.lambda_grid):
            raise ValidationError("lambda_grid entries must be positive")

    def snapshot(self) -> dict:
        """JSON-able snapshot; path-valued keys keep basenames only so the
        serialized model is byte-identical across directories."""
        return {
            "data_csv": Path(self.data_csv).name,
            "response": self.response,
            "covariates": list(self.covariates),
            "phase1_end": self.phase1_end.isoformat(),
            "domain": list(self.domain),
            "n_grid": self.n_grid,
            "aggregator": self.aggregator,
            "n_basis": self.n_basis,
            "order": self.order,
            "variance_threshold": self.variance_threshold,
            "alpha_total": self.alpha_total,
            "min_obs": self.min_obs,
            "exclusion_list": Path(self.exclusion_list).name if self.exclusion_list else None,
            "lambda_grid": list(self.lambda_grid),
            "seed": self.seed,
        }


_PIPELINE_PARSERS = {
    "data_csv": lambda k, v: v,
    "response": lambda k, v: v,
    "covariates": _as_str_list,
    "phase1_end": _as_date,
    "domain": lambda k, v: tuple(_as_float_list(k, v)),
    "n_grid": _as_int,
    "aggregator": lambda k, v: v,
    "n_basis": _as_int,
    "order": _as_int,
    "variance_threshold": _as_float,
    "alpha_total": _as_float,
    "min_obs": _as_int,
    "exclusion_list": lambda k, v: v,
    "lambda_grid": _as_float_list,
    "seed": _as_int,
}

_PIPELINE_REQUIRED = ("data_csv", "response", "covariates", "phase1_end")


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    raw = parse_kv_file(path)
    unknown = sorted(set(raw) - set(_PIPELINE_PARSERS))
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    missing = [k for k in _PIPELINE_REQUIRED if k not in raw]
    if missing:
        raise ValidationError(f"missing required config keys: {missing}")
    kwargs = {k: _PIPELINE_PARSERS[k](k, v) for k, v in raw.items()}
    base = Path(path).resolve().parent
    for key in ("data_csv", "exclusion_list"):
        if key in kwargs and kwargs[key]:
            p = Path(kwargs[key])
            kwargs[key] = str(p if p.is_absolute() else base / p)
    if "domain" in kwargs and len(kwargs["domain"]) != 2:
        raise ValidationError("domain must be 'lo, hi'")
    return PipelineConfig(**kwargs)


@dataclass(frozen=True)
class SimulationConfig:
    """Synthetic two-covariate generator with known component structure."""

    n_days: int = 160
    covariates: tuple[str, ...] = ("temperature", "humidity")
    response: str = "frequency"
    domain: tuple[float, float] = (0.0, 24.0)
    n_grid: int = 24
    covariate_eigenvalues: tuple[float, ...] = (3.0, 1.0)
    coupling: tuple[tuple[float, ...], ...] = ((1.0, 0.4), (-0.5, 0.8))
    residual_eigenvalues: tuple[float, ...] = (0.12, 0.03)
    observation_noise_sd: float = 0.02
    missing_prob: float = 0.0
    day_dropout_prob: float = 0.0
    shift_day: int = -1
    shift_sd: float = 0.0
    start_date: date = date(2021, 1, 1)

    def __post_init__(self):
        if self.n_days < 2:
            raise ValidationError(f"n_days must be >= 2, got {self.n_days}")
        if self.n_grid < 4:
            raise ValidationError(f"n_grid must be >= 4, got {self.n_grid}")
        if not 0.0 <= self.missing_prob < 1.0:
            raise ValidationError(f"missing_prob must be in [0, 1), got {self.missing_prob}")
        if not 0.0 <= self.day_dropout_prob < 1.0:
            raise ValidationError(
                f"day_dropout_prob must be in [0, 1), got {self.day_dropout_prob}")
        if len(self.coupling) != len(self.covariate_eigenvalues):
            raise ValidationError("coupling rows must match covariate_eigenvalues length")
        if any(v <= 0 for v in self.covariate_eigenvalues):
            raise ValidationError("covariate_eigenvalues must be positive")
        if any(v <= 0 for v in self.residual_eigenvalues):
            raise ValidationError("residual_eigenvalues must be positive")
        if self.response in self.covariates:
            raise ValidationError(f"response {self.response!r} also listed as covariate")


_SIM_PARSERS = {
    "n_days": _as_int,
    "covariates": _as_str_list,
    "response": lambda k, v: v,
    "domain": lambda k, v: tuple(_as_float_list(k, v)),
    "n_grid": _as_int,
    "covariate_eigenvalues": _as_float_list,
    "coupling": _as_matrix,
    "residual_eigenvalues": _as_float_list,
    "observation_noise_sd": _as_float,
    "missing_prob": _as_float,
    "day_dropout_prob": _as_float,
    "shift_day": _as_int,
    "shift_sd": _as_float,
    "start_date": _as_date,
}


def load_simulation_config(path: str | Path) -> SimulationConfig:
    raw = parse_kv_file(path)
    unknown = sorted(set(raw) - set(_SIM_PARSERS))
    if unknown:
        raise ValidationError(f"unknown simulation config keys: {unknown}")
    kwargs = {k: _SIM_PARSERS[k](k, v) for k, v in raw.items()}
    if "domain" in kwargs and len(kwargs["domain"]) != 2:
        raise ValidationError("domain must be 'lo, hi'")
    return SimulationConfig(**kwargs)
