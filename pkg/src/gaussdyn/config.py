"""Flat ``section.key = value`` run configuration.

Example::

    # thermal-like bath, vacuum start
    oscillator.m = 1
    oscillator.omega = 1
    environment.kind = gibbs
    environment.lambda = 0.2
    environment.d_xx = 0.11
    environment.d_xpy = 0.1
    initial.preset = vacuum
    time.t_max = 100
    time.n_samples = 2000

A config with no ``sweep.*`` keys is a single run; ``sweep.param`` makes
it a 1-D sweep and ``sweep.param2`` a 2-D sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NonFiniteInputError
from .model import (DEFAULT_TOL, DIFFUSION_FIELDS, PRESET_NAMES, UPPER_KEYS, CovarianceMatrix,
                    EnvironmentSpec, OscillatorSpec, gibbs_environment, preset_covariance,
                    symmetric_environment)

ENV_KINDS = {
    "general": DIFFUSION_FIELDS,
    "symmetric": ("d_xx", "d_xpx", "d_pxpx", "d_xy", "d_xpy", "d_pxpy"),
    "gibbs": ("d_xx", "d_xy", "d_xpy"),
}

SWEEP_OUTPUTS = ("S_infinity", "E_infinity", "classification", "crossings")
DEFAULT_OUTPUTS = ("S_infinity", "E_infinity")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

_STATIC_KEYS = {
    "oscillator.m", "oscillator.omega", "environment.kind", "environment.lambda",
    "validation.complete_positivity", "validation.tol", "initial.preset",
    "allow_unphysical", "time.t_max", "time.n_samples",
    "sweep.param", "sweep.lo", "sweep.hi", "sweep.n_points",
    "sweep.param2", "sweep.lo2", "sweep.hi2", "sweep.n_points2",
    "sweep.outputs", "output.path", "output.format",
}
KNOWN_KEYS = (_STATIC_KEYS
              | {f"environment.{f}" for f in DIFFUSION_FIELDS}
              | {f"initial.{k}" for k in UPPER_KEYS})


def parse_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Later keys win."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def load(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text)


def parse_assignments(items) -> dict[str, str]:
    """``["a.b=1", "c=2"]`` from ``--set`` options into a mapping."""
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        out[key] = value
    return out


def _float(mapping, key, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        value = float(mapping[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {mapping[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {mapping[key]!r}")
    return value


def _int(mapping, key, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return int(mapping[key])
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {mapping[key]!r}") from None


def _bool(mapping, key, default):
    if key not in mapping:
        return default
    text = mapping[key].strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(f"{key}: not a boolean: {mapping[key]!r}")


@dataclass(frozen=True)
class SweepAxis:
    param: str
    lo: float
    hi: float
    n_points: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)


@dataclass(frozen=True)
class RunConfig:
    oscillator: OscillatorSpec
    env_kind: str
    env_values: tuple[tuple[str, float], ...]
    initial: CovarianceMatrix
    initial_label: str = "vacuum"
    t_max: float | None = None
    n_samples: int = 2000
    sweep: tuple[SweepAxis, ...] = ()
    outputs: tuple[str, ...] = DEFAULT_OUTPUTS
    output_path: str | None = None
    output_format: str = "csv"
    allow_unphysical: bool = False
    complete_positivity: bool = True
    tol: float = DEFAULT_TOL
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def mode(self) -> str:
        return ("single", "sweep-1d", "sweep-2d")[len(self.sweep)]

    @property
    def has_time(self) -> bool:
        return self.t_max is not None

    def environment(self) -> EnvironmentSpec:
        v = dict(self.env_values)
        lam = v["lambda"]
        if self.env_kind == "gibbs":
            return gibbs_environment(self.oscillator, lam, v["d_xx"], v["d_xy"], v["d_xpy"])
        if self.env_kind == "symmetric":
            return symmetric_environment(lam, v["d_xx"], v["d_xpx"], v["d_pxpx"],
                                         v["d_xy"], v["d_xpy"], v["d_pxpy"])
        return EnvironmentSpec(lam=lam, **{k: v[k] for k in DIFFUSION_FIELDS})

    def sweepable(self) -> tuple[str, ...]:
        return (("oscillator.m", "oscillator.omega", "environment.lambda")
                + tuple(f"environment.{k}" for k in ENV_KINDS[self.env_kind]))

    def with_param(self, key: str, value: float) -> "RunConfig":
        """Copy with one whitelisted numeric parameter replaced."""
        if key == "oscillator.m":
            return replace(self, oscillator=OscillatorSpec(value, self.oscillator.omega))
        if key == "oscillator.omega":
            return replace(self, oscillator=OscillatorSpec(self.oscillator.m, value))
        if key not in self.sweepable():
            raise ConfigError(f"{key} cannot be swept for environment.kind={self.env_kind}")
        name = key.split(".", 1)[1]
        values = tuple((k, value if k == name else v) for k, v in self.env_values)
        return replace(self, env_values=values)


def from_mapping(mapping: dict[str, str]) -> RunConfig:
    """Validate a flat mapping and build a :class:`RunConfig`.

    Raises :class:`ConfigError` for unknown keys, malformed values, keys
    that do not belong to the chosen environment kind, and sweep
    parameters outside the whitelist.
    """
    unknown = sorted(set(mapping) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    try:
        osc = OscillatorSpec(_float(mapping, "oscillator.m", 1.0),
                             _float(mapping, "oscillator.omega", 1.0))
    except (ValueError, NonFiniteInputError) as exc:
        raise ConfigError(f"oscillator: {exc}") from None

    kind = mapping.get("environment.kind", "general").strip()
    if kind not in ENV_KINDS:
        raise ConfigError(f"environment.kind must be one of {sorted(ENV_KINDS)}, got {kind!r}")
    allowed = ENV_KINDS[kind]
    stray = [f for f in DIFFUSION_FIELDS
             if f"environment.{f}" in mapping and f not in allowed]
    if stray:
        raise ConfigError(f"environment.kind={kind} does not take: {', '.join(stray)}")
    env_values = (("lambda", _float(mapping, "environment.lambda")),) + tuple(
        (f, _float(mapping, f"environment.{f}", 0.0)) for f in allowed)

    entry_keys = [k for k in UPPER_KEYS if f"initial.{k}" in mapping]
    if "initial.preset" in mapping and entry_keys:
        raise ConfigError("give either initial.preset or initial.<entry> values, not both")
    if entry_keys:
        try:
            initial = CovarianceMatrix.from_upper(
                {k: _float(mapping, f"initial.{k}") for k in entry_keys})
        except (ValueError, NonFiniteInputError) as exc:
            raise ConfigError(f"initial covariance: {exc}") from None
        label = "custom"
    else:
        label = mapping.get("initial.preset", "vacuum").strip()
        if label not in PRESET_NAMES:
            raise ConfigError(f"initial.preset must be one of {PRESET_NAMES}, got {label!r}")
        initial = preset_covariance(label)

    t_max = None
    n_samples = _int(mapping, "time.n_samples", 2000)
    if "time.t_max" in mapping:
        t_max = _float(mapping, "time.t_max")
        if t_max <= 0:
            raise ConfigError("time.t_max must be positive")
        if n_samples < 2:
            raise ConfigError("time.n_samples must be at least 2")

    cfg = RunConfig(
        oscillator=osc, env_kind=kind, env_values=env_values, initial=initial,
        initial_label=label, t_max=t_max, n_samples=n_samples,
        output_path=mapping.get("output.path"),
        output_format=mapping.get("output.format", "csv").strip(),
        allow_unphysical=_bool(mapping, "allow_unphysical", False),
        complete_positivity=_bool(mapping, "validation.complete_positivity", True),
        tol=_float(mapping, "validation.tol", DEFAULT_TOL),
        source=dict(mapping),
    )
    if cfg.output_format != "csv":
        raise ConfigError(f"output.format must be csv, got {cfg.output_format!r}")
    if cfg.tol < 0:
        raise ConfigError("validation.tol must be non-negative")

    axes = []
    for suffix in ("", "2"):
        if f"sweep.param{suffix}" not in mapping:
            continue
        param = mapping[f"sweep.param{suffix}"].strip()
        if param not in cfg.sweepable():
            raise ConfigError(f"sweep.param{suffix}={param!r} not sweepable; "
                              f"choose from {', '.join(cfg.sweepable())}")
        n = _int(mapping, f"sweep.n_points{suffix}")
        if n < 0:
            raise ConfigError(f"sweep.n_points{suffix} must be non-negative")
        axes.append(SweepAxis(param, _float(mapping, f"sweep.lo{suffix}"),
                              _float(mapping, f"sweep.hi{suffix}"), n))
    if "sweep.param2" in mapping and "sweep.param" not in mapping:
        raise ConfigError("sweep.param2 given without sweep.param")
    if len(axes) == 2 and axes[0].param == axes[1].param:
        raise ConfigError("the two sweep axes must differ")
    orphans = [k for k in mapping if k.startswith("sweep.") and k != "sweep.outputs"
               and not axes]
    if orphans:
        raise ConfigError(f"sweep keys without sweep.param: {', '.join(sorted(orphans))}")

    outputs = DEFAULT_OUTPUTS
    if "sweep.outputs" in mapping:
        outputs = tuple(o.strip() for o in mapping["sweep.outputs"].split(",") if o.strip())
        bad = [o for o in outputs if o not in SWEEP_OUTPUTS]
        if bad:
            raise ConfigError(f"unknown sweep outputs {bad}; choose from {SWEEP_OUTPUTS}")
    if ({"classification", "crossings"} & set(outputs)) and t_max is None:
        raise ConfigError("classification/crossings outputs need time.t_max")
    return replace(cfg, sweep=tuple(axes), outputs=outputs)
