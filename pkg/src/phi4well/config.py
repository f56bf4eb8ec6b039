"""Experiment configuration: a flat dotted-key text format, validated hard.

The file format is intentionally minimal: one ``key = value`` pair per
line, ``#`` comments, dotted keys for grouping (``grid.R = 2.5``).  Unknown
keys are errors so typos cannot silently fall back to defaults.  The
interval length accepts three mutually exclusive forms: an absolute value,
a fraction of the critical length, or the exponential regime e^{alpha beta}
with alpha below the surface tension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .interfaces import C_W_QUARTIC, CrossingConfig, default_crossing_config

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "config_with_overrides",
    "load_config",
    "parse_config_text",
    "resolve_crossing",
    "resolve_ell",
]

EXPERIMENT_NAMES = (
    "gap-scan",
    "semiclassical-report",
    "riccati",
    "hitting-time",
    "first-transition",
    "count-subcritical",
    "poisson-supercritical",
    "ldp-rate",
    "sampler-crosscheck",
)


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment run needs, resolvable without hidden state."""

    potential: str = "quartic"
    betas: Tuple[float, ...] = (5.0,)
    grid_r: float = 2.5
    grid_n: Optional[int] = None  # None: sized automatically per beta
    grid_levels: int = 2
    truncation: int = 8
    dt: float = 0.005
    ell_mode: str = "fraction"  # absolute | fraction | exponential
    ell_value: float = 0.05
    rho1: float = 0.2
    rho2: float = 0.6
    t_sep: Optional[float] = None  # None: max(10 beta, 20)
    replicas: int = 2000
    seed: int = 0
    out_dir: str = "reports"

    def __post_init__(self) -> None:
        if self.potential != "quartic":
            raise ConfigError(f"potential: unknown selector {self.potential!r}")
        if not self.betas or any(b <= 0 for b in self.betas):
            raise ConfigError("beta: need a nonempty list of positive values")
        if self.grid_r <= 1.0:
            raise ConfigError("grid.R: must exceed the well location 1")
        if self.grid_n is not None and (self.grid_n < 7 or self.grid_n % 2 == 0):
            raise ConfigError("grid.n: must be odd and >= 7")
        if self.grid_levels < 2:
            raise ConfigError("grid.levels: need >= 2 for extrapolation")
        if self.truncation < 2:
            raise ConfigError("truncation: need at least two modes for a gap")
        if self.dt <= 0:
            raise ConfigError("dt: must be positive")
        if self.ell_mode not in ("absolute", "fraction", "exponential"):
            raise ConfigError(f"ell: unknown mode {self.ell_mode!r}")
        if self.ell_mode == "exponential":
            if not 0.0 <= self.ell_value < C_W_QUARTIC:
                raise ConfigError("ell.alpha: need 0 <= alpha < C_W = 4/3")
        elif self.ell_value <= 0:
            raise ConfigError(f"ell.{self.ell_mode}: must be positive")
        if not 0.0 < self.rho1 < self.rho2 < 1.0:
            raise ConfigError("crossing.rho1/rho2: need 0 < rho1 < rho2 < 1")
        if self.t_sep is not None and self.t_sep <= 0:
            raise ConfigError("crossing.t_sep: must be positive")
        if self.replicas < 1:
            raise ConfigError("replicas: need at least one")
        if self.seed < 0:
            raise ConfigError("seed: must be nonnegative")


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def _parse_beta_list(raw: str) -> Tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"beta: expected comma-separated numbers, got {raw!r}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat key-value format into a validated config."""
    fields = {}

    def put(field, value):
        if field in fields:
            raise ConfigError(f"duplicate assignment to {field}")
        fields[field] = value

    ell_keys = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key == "potential":
            put("potential", raw)
        elif key == "beta":
            put("betas", _parse_beta_list(raw))
        elif key == "grid.R":
            put("grid_r", _parse_float(key, raw))
        elif key == "grid.n":
            put("grid_n", _parse_int(key, raw))
        elif key == "grid.levels":
            put("grid_levels", _parse_int(key, raw))
        elif key == "truncation":
            put("truncation", _parse_int(key, raw))
        elif key == "dt":
            put("dt", _parse_float(key, raw))
        elif key in ("ell.absolute", "ell.fraction", "ell.alpha"):
            mode = {"ell.absolute": "absolute", "ell.fraction": "fraction",
                    "ell.alpha": "exponential"}[key]
            ell_keys.append((mode, key, _parse_float(key, raw)))
        elif key == "crossing.rho1":
            put("rho1", _parse_float(key, raw))
        elif key == "crossing.rho2":
            put("rho2", _parse_float(key, raw))
        elif key == "crossing.t_sep":
            put("t_sep", _parse_float(key, raw))
        elif key == "replicas":
            put("replicas", _parse_int(key, raw))
        elif key == "seed":
            put("seed", _parse_int(key, raw))
        elif key == "out":
            put("out_dir", raw)
        else:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
    if len(ell_keys) > 1:
        names = ", ".join(k for _, k, _ in ell_keys)
        raise ConfigError(f"ell: set exactly one of ell.absolute/fraction/alpha (got {names})")
    if ell_keys:
        fields["ell_mode"], fields["ell_value"] = ell_keys[0][0], ell_keys[0][2]
    return ExperimentConfig(**fields)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def config_with_overrides(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    replicas: Optional[int] = None,
) -> ExperimentConfig:
    """Apply command-line overrides on top of a parsed config."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out_dir is not None:
        updates["out_dir"] = out_dir
    if replicas is not None:
        updates["replicas"] = replicas
    return replace(cfg, **updates) if updates else cfg


def resolve_ell(cfg: ExperimentConfig, beta: float, lbar: float) -> float:
    """Interval length for one beta: absolute, fraction of lbar, or e^{alpha beta}."""
    if cfg.ell_mode == "absolute":
        return cfg.ell_value
    if cfg.ell_mode == "fraction":
        return cfg.ell_value * lbar
    return math.exp(cfg.ell_value * beta)


def resolve_crossing(cfg: ExperimentConfig, beta: float, ell: float) -> CrossingConfig:
    """Crossing thresholds for one beta, with the separation default filled in."""
    if cfg.t_sep is None:
        base = default_crossing_config(beta, ell)
        return CrossingConfig(rho1=cfg.rho1, rho2=cfg.rho2, t_sep=base.t_sep, ell=ell)
    return CrossingConfig(rho1=cfg.rho1, rho2=cfg.rho2, t_sep=cfg.t_sep, ell=ell)
