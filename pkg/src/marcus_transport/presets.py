"""Named coefficient presets used by the CLI and the validation suite."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .characteristics import CoefficientSet

__all__ = ["Preset", "get_preset", "PRESET_NAMES"]


def _u0_cauchy(x):
    return 1.0 / (1.0 + x ** 2)


@dataclass(frozen=True)
class Preset:
    name: str
    coeffs: CoefficientSet
    u0: callable = _u0_cauchy
    # Defaults merged into the CLI driver/numerics blocks when keys are absent.
    driver_defaults: dict = dc_field(default_factory=dict)
    numerics_defaults: dict = dc_field(default_factory=dict)
    # Oracle wiring: kind plus keyword overrides for OracleSpec.
    oracle_kind: str | None = None
    oracle_kwargs: dict = dc_field(default_factory=dict)
    grid_box: tuple[float, float] = (-3.0, 3.0)
    table_box: tuple[float, float] = (-8.0, 8.0)
    table_points: int = 201


_SQRT1P = lambda x: np.sqrt(x ** 2 + 1.0)


def _build(name: str) -> Preset:
    if name == "zero":
        return Preset(name=name, coeffs=CoefficientSet.from_scalar(),
                      oracle_kind="deterministic",
                      driver_defaults={"kind": "none", "brownian": False})
    if name == "drift":
        return Preset(name=name,
                      coeffs=CoefficientSet.from_scalar(a=lambda x: np.ones_like(x)),
                      oracle_kind="deterministic",
                      driver_defaults={"kind": "none", "brownian": False})
    if name == "deterministic":
        coeffs = CoefficientSet.from_scalar(
            a=lambda x: 0.3 * np.sin(x),
            b=lambda x: 0.2 * np.cos(x),
            c=lambda x: 0.1 / (1.0 + x ** 2),
        )
        return Preset(name=name, coeffs=coeffs, oracle_kind="deterministic",
                      driver_defaults={"kind": "none", "brownian": False},
                      grid_box=(-2.0, 2.0), table_box=(-4.0, 4.0),
                      table_points=801)
    if name == "sinh":
        coeffs = CoefficientSet.from_scalar(alpha=_SQRT1P)
        return Preset(name=name, coeffs=coeffs, oracle_kind="sinh",
                      oracle_kwargs={"brownian_weight": 0.0},
                      driver_defaults={"kind": "finite_activity", "intensity": 1.0,
                                       "mark": ("uniform", -1.0, 1.0),
                                       "brownian": False},
                      grid_box=(-3.0, 3.0), table_box=(-30.0, 30.0))
    if name == "sinh-brownian":
        # Same H-transform closed form with the Brownian channel entering the
        # effective driver with weight 0.3: A = 0.3 * alpha.
        w = 0.3
        coeffs = CoefficientSet.from_scalar(alpha=_SQRT1P,
                                            A=lambda x: w * _SQRT1P(x))
        return Preset(name=name, coeffs=coeffs, oracle_kind="sinh",
                      oracle_kwargs={"brownian_weight": w},
                      driver_defaults={"kind": "finite_activity", "intensity": 1.0,
                                       "mark": ("uniform", -1.0, 1.0),
                                       "brownian": True},
                      grid_box=(-3.0, 3.0), table_box=(-40.0, 40.0),
                      table_points=2001)
    if name == "linear-jump":
        coeffs = CoefficientSet.from_scalar(alpha=lambda x: x)
        return Preset(name=name, coeffs=coeffs,
                      driver_defaults={"kind": "finite_activity", "intensity": 1.0,
                                       "mark": ("uniform", -0.5, 0.5),
                                       "brownian": False},
                      grid_box=(-3.0, 3.0), table_box=(-6.0, 6.0))
    if name == "linear-brownian":
        coeffs = CoefficientSet.from_scalar(A=lambda x: x,
                                            A_prime=lambda x: np.ones_like(x))
        return Preset(name=name, coeffs=coeffs,
                      driver_defaults={"kind": "none", "brownian": True},
                      grid_box=(0.5, 2.0), table_box=(0.1, 5.0))
    if name == "fig1":
        coeffs = CoefficientSet.from_scalar(alpha=_SQRT1P)
        return Preset(name=name, coeffs=coeffs, u0=_u0_cauchy,
                      oracle_kind="sinh", oracle_kwargs={"brownian_weight": 0.0},
                      driver_defaults={"kind": "alpha_stable", "alpha": 1.75,
                                       "scale": 0.1, "brownian": False,
                                       "T": 100.0, "truncation_epsilon": 0.02},
                      numerics_defaults={"dt": 0.1, "substeps": 16,
                                         "times": [float(t) for t in range(0, 101, 10)]},
                      grid_box=(-10.0, 10.0), table_box=(-50.0, 50.0))
    raise ValueError(f"unknown preset {name!r}")


PRESET_NAMES = ("zero", "drift", "deterministic", "sinh", "sinh-brownian",
                "linear-jump", "linear-brownian", "fig1")


def get_preset(name: str) -> Preset:
    return _build(name)
