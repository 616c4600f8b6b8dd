"""Run configuration: method names, defaults and ``key = value`` config files."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

# method name -> (steps k, order); None marks the one-step starter used on its own
METHODS = {
    "ssprk2-only": (None, 2),
    "msv-32": (3, 2),
    "msv-42": (4, 2),
    "msv-52": (5, 2),
    "msv-62": (6, 2),
    "msv-43": (4, 3),
    "msv-53": (5, 3),
}

# per-problem defaults for the grid and final time
PROBLEM_DEFAULTS = {
    "advection": {"n_cells": 128, "t_final": 5.0},
    "burgers": {"n_cells": 256, "t_final": 0.8},
    "blastwave": {"n_cells": 512, "t_final": 0.04},
}

_ALIAS = re.compile(r"^(?:ssp)?msv-?(\d)(\d)$", re.IGNORECASE)


def parse_method(name: str):
    """Return the canonical method name and its ``(k, order)``."""
    key = name.strip().lower()
    m = _ALIAS.match(key)
    if m:
        key = f"msv-{m.group(1)}{m.group(2)}"
    if key not in METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return key, METHODS[key]


@dataclass(frozen=True)
class RunConfig:
    problem: str = "advection"
    method: str = "msv-32"
    n_cells: int = 128
    t_final: float = 5.0
    h1: float = 0.1
    gamma: float = 0.9
    cfl_fe: float = 0.5
    enforce_conditions: bool = True
    out: str | None = None
    seed: int | None = None
    reconstruction: str | None = None
    rho: float | None = None
    rho_fe: float | None = None
    retry_cap: int = 20
    record_tv: bool = True
    snapshot: bool = False
    t0: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        name, _ = parse_method(self.method)
        object.__setattr__(self, "method", name)
        if not self.t_final > self.t0:
            raise ConfigError("t_final must exceed the start time")
        if self.n_cells < 1:
            raise ConfigError("cells must be positive")
        if not (0 < self.gamma <= 1):
            raise ConfigError("gamma must lie in (0, 1]")
        if not self.cfl_fe > 0 or not self.h1 > 0:
            raise ConfigError("cfl-fe and h1 must be positive")
        if self.reconstruction not in (None, "mc", "weno5"):
            raise ConfigError(f"unknown reconstruction {self.reconstruction!r}")

    @property
    def k(self):
        return METHODS[self.method][0]

    @property
    def order(self):
        return METHODS[self.method][1]

    @property
    def spatial_scheme(self) -> str:
        """MC for second order and for the blast wave, WENO5 otherwise."""
        if self.reconstruction:
            return self.reconstruction
        if self.problem == "blastwave" or self.order == 2 or self.k is None:
            return "mc"
        return "weno5"

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


# config-file / flag spelling -> RunConfig field
_KEYS = {
    "problem": "problem",
    "method": "method",
    "cells": "n_cells",
    "n_cells": "n_cells",
    "tfinal": "t_final",
    "t_final": "t_final",
    "h1": "h1",
    "gamma": "gamma",
    "cfl-fe": "cfl_fe",
    "cfl_fe": "cfl_fe",
    "conditions": "enforce_conditions",
    "enforce_conditions": "enforce_conditions",
    "out": "out",
    "seed": "seed",
    "reconstruction": "reconstruction",
    "rho": "rho",
    "rho-fe": "rho_fe",
    "rho_fe": "rho_fe",
    "retry-cap": "retry_cap",
    "retry_cap": "retry_cap",
    "snapshot": "snapshot",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name, text):
    types = {f.name: f.type for f in fields(RunConfig)}
    kind = types[name]
    text = text.strip()
    try:
        if kind in ("int", "int | None"):
            return None if text.lower() == "none" else int(text)
        if kind in ("float", "float | None"):
            return None if text.lower() == "none" else float(text)
        if kind == "bool":
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return None if text.lower() == "none" else text


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.lower() not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name = _KEYS[key.lower()]
        values[name] = _coerce(name, value)
    return values


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def build_config(file_values: dict | None = None, **overrides) -> RunConfig:
    """Merge file values with overrides (``None`` overrides are ignored)."""
    values = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key, default in PROBLEM_DEFAULTS.get(values.get("problem", "advection"), {}).items():
        values.setdefault(key, default)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
