"""Run configuration: TOML parsing and object construction."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .characteristics import CoefficientSet
from .driver import LevyMeasureSpec, MarkDistribution
from .exceptions import ConfigError
from .expressions import compile_expression
from .presets import PRESET_NAMES, get_preset
from .solver import InitialCondition

__all__ = ["RunConfig", "load_config", "parse_seed"]

_PROBLEM_KEYS = {"preset", "a", "b", "c", "A", "B", "C", "alpha", "beta", "sigma", "u0"}
_DRIVER_KEYS = {"kind", "intensity", "mark", "alpha", "scale", "truncation_epsilon",
                "brownian", "T", "seed"}
_NUMERICS_KEYS = {"dt", "substeps", "grid_min", "grid_max", "grid_points",
                  "table_min", "table_max", "table_points", "small_jump_mode",
                  "times", "inversion_tol"}
_OUTPUT_KEYS = {"dir", "figures"}
_COEFF_NAMES = ("a", "b", "c", "A", "B", "C", "alpha", "beta", "sigma")


def parse_seed(value) -> int:
    """Accept seeds as integers or decimal/hex strings."""
    if isinstance(value, bool):
        raise ConfigError("seed must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 0)
        except ValueError as exc:
            raise ConfigError(f"cannot parse seed {value!r}") from exc
    raise ConfigError(f"cannot parse seed {value!r}")


def _check_keys(section: str, table: dict, allowed: set[str]):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


@dataclass
class RunConfig:
    problem: dict = field(default_factory=dict)
    driver: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_keys("problem", self.problem, _PROBLEM_KEYS)
        _check_keys("driver", self.driver, _DRIVER_KEYS)
        _check_keys("numerics", self.numerics, _NUMERICS_KEYS)
        _check_keys("output", self.output, _OUTPUT_KEYS)
        preset_name = self.problem.get("preset")
        if preset_name is not None and preset_name not in PRESET_NAMES:
            raise ConfigError(
                f"unknown preset {preset_name!r}; choose from {', '.join(PRESET_NAMES)}")
        self._preset = get_preset(preset_name) if preset_name else None
        if self._preset is None and not any(k in self.problem for k in _COEFF_NAMES):
            raise ConfigError("the [problem] block needs a preset or coefficient expressions")
        if self._preset is not None:
            for key, val in self._preset.driver_defaults.items():
                self.driver.setdefault(key, val)
            for key, val in self._preset.numerics_defaults.items():
                self.numerics.setdefault(key, val)
        mode = self.numerics.get("small_jump_mode", "drop")
        if mode not in ("drop", "gaussian_substitute"):
            raise ConfigError(f"unknown small_jump_mode {mode!r}")

    @property
    def preset(self):
        return self._preset

    def build_coeffs(self) -> CoefficientSet:
        overrides = {k: compile_expression(self.problem[k])
                     for k in _COEFF_NAMES if k in self.problem}
        if not overrides and self._preset is not None:
            return self._preset.coeffs
        base = {}
        if self._preset is not None:
            raise ConfigError("mixing a preset with coefficient expressions is not supported")
        return CoefficientSet.from_scalar(**{**base, **overrides})

    def build_u0(self) -> InitialCondition:
        if "u0" in self.problem:
            return InitialCondition(compile_expression(self.problem["u0"]))
        if self._preset is not None:
            return InitialCondition(self._preset.u0)
        return InitialCondition(lambda x: 1.0 / (1.0 + x ** 2))

    def measure_spec(self) -> LevyMeasureSpec | None:
        kind = self.driver.get("kind", "none")
        if kind == "none":
            return None
        if kind == "finite_activity":
            mark = self.driver.get("mark", ("uniform", -1.0, 1.0))
            dist = MarkDistribution(kind=str(mark[0]),
                                    params=tuple(float(v) for v in mark[1:]))
            return LevyMeasureSpec(kind="finite_activity",
                                   intensity=float(self.driver.get("intensity", 1.0)),
                                   mark_distribution=dist)
        if kind == "alpha_stable":
            return LevyMeasureSpec(
                kind="alpha_stable",
                alpha=float(self.driver.get("alpha", 1.75)),
                scale=float(self.driver.get("scale", 0.1)),
                truncation_epsilon=float(self.driver.get("truncation_epsilon", 0.01)),
            )
        raise ConfigError(f"unknown driver kind {kind!r}")

    # Numeric accessors with documented defaults.
    @property
    def horizon(self) -> float:
        return float(self.driver.get("T", 1.0))

    @property
    def seed(self) -> int:
        return parse_seed(self.driver.get("seed", 0))

    @property
    def dt(self) -> float:
        return float(self.numerics.get("dt", 1e-3))

    @property
    def substeps(self) -> int:
        return int(self.numerics.get("substeps", 32))

    @property
    def times(self) -> list[float]:
        ts = self.numerics.get("times")
        if ts is None:
            return [self.horizon]
        return [float(t) for t in ts]

    def grid(self) -> np.ndarray:
        box = self._preset.grid_box if self._preset else (-3.0, 3.0)
        lo = float(self.numerics.get("grid_min", box[0]))
        hi = float(self.numerics.get("grid_max", box[1]))
        n = int(self.numerics.get("grid_points", 201))
        return np.linspace(lo, hi, n)

    def table_grid(self) -> np.ndarray:
        box = self._preset.table_box if self._preset else (-8.0, 8.0)
        lo = float(self.numerics.get("table_min", box[0]))
        hi = float(self.numerics.get("table_max", box[1]))
        n = int(self.numerics.get("table_points",
                                  self._preset.table_points if self._preset else 201))
        return np.linspace(lo, hi, n)


def load_config(path: str) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    _check_keys("<top level>", raw, {"problem", "driver", "numerics", "output"})
    return RunConfig(problem=raw.get("problem", {}), driver=raw.get("driver", {}),
                     numerics=raw.get("numerics", {}), output=raw.get("output", {}))
