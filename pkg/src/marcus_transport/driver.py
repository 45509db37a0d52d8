"""Driving-noise generation.

A realization of the driving noise consists of Brownian increments on a time
grid plus an ordered list of discrete jump events.  Finite-activity jump
measures produce all jumps as events; symmetric alpha-stable measures are
truncated at a cutoff ``epsilon``, with jumps above the cutoff sampled as
events and the remainder either dropped or replaced by a Gaussian substitute
with matched second moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

__all__ = [
    "MarkDistribution",
    "LevyMeasureSpec",
    "JumpEvent",
    "DriverRealization",
    "rng_streams",
    "sample_brownian",
    "sample_compound_poisson",
    "sample_stable_path",
    "sample_stable_events",
    "decompose_events",
    "stable_levy_density_constant",
    "stable_tail_intensity",
    "stable_small_jump_variance",
    "build_grid",
    "make_realization",
    "brownian_path",
    "jump_path_value",
]


@dataclass(frozen=True)
class MarkDistribution:
    """Sampler spec for the jump marks of a finite-activity measure.

    kinds: ``uniform`` (params: low, high), ``normal`` (params: mean, std),
    ``constant`` (params: value).  Coordinates are sampled i.i.d. for m > 1.
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        expected = {"uniform": 2, "normal": 2, "constant": 1}
        if self.kind not in expected:
            raise ValueError(f"unknown mark distribution kind {self.kind!r}")
        if len(self.params) != expected[self.kind]:
            raise ValueError(
                f"{self.kind} marks need {expected[self.kind]} parameters, "
                f"got {len(self.params)}"
            )

    def sample(self, rng: np.random.Generator, n: int, m: int = 1) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size=(n, m))
        if self.kind == "normal":
            mu, sd = self.params
            return rng.normal(mu, sd, size=(n, m))
        value = self.params[0]
        return np.full((n, m), value)


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Jump-measure specification.

    ``finite_activity``: compound Poisson with the given event rate and mark
    distribution.  ``alpha_stable``: symmetric alpha-stable coordinates with
    characteristic function exp(-scale*|lambda|**alpha) at unit time, handled
    by truncation at ``truncation_epsilon``.  ``custom_tabulated``: symmetric
    density given on positive nodes, used for compensator quadrature and
    event sampling above the cutoff.
    """

    kind: str
    intensity: float = 0.0
    mark_distribution: MarkDistribution | None = None
    alpha: float = 0.0
    scale: float = 0.0
    truncation_epsilon: float = 0.0
    density_nodes: tuple[float, ...] = ()
    density_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("finite_activity", "alpha_stable", "custom_tabulated"):
            raise ValueError(f"unknown Levy measure kind {self.kind!r}")
        if not 0.0 <= self.truncation_epsilon < 1.0:
            raise ValueError("truncation_epsilon must lie in [0, 1)")
        if self.kind == "finite_activity":
            if self.intensity < 0:
                raise ValueError("intensity must be nonnegative")
            if self.truncation_epsilon != 0.0:
                raise ValueError("finite-activity measures take truncation_epsilon = 0")
            if self.intensity > 0 and self.mark_distribution is None:
                raise ValueError("finite-activity measure needs a mark distribution")
        elif self.kind == "alpha_stable":
            if not 0.0 < self.alpha <= 2.0:
                raise ValueError("alpha must lie in (0, 2]")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
        else:
            if len(self.density_nodes) != len(self.density_values) or len(self.density_nodes) < 2:
                raise ValueError("tabulated density needs matching node/value arrays")

    def density(self, z: np.ndarray) -> np.ndarray:
        """Levy density evaluated at |z| > 0 (symmetric, one coordinate)."""
        z = np.abs(np.asarray(z, dtype=float))
        if self.kind == "alpha_stable":
            k = stable_levy_density_constant(self.alpha, self.scale)
            return k * z ** (-1.0 - self.alpha)
        if self.kind == "custom_tabulated":
            return np.interp(z, np.asarray(self.density_nodes), np.asarray(self.density_values),
                             left=0.0, right=0.0)
        raise ValueError("finite-activity measures have no density in this representation")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    mark: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mark", np.atleast_1d(np.asarray(self.mark, dtype=float)))
        if not np.any(self.mark != 0.0):
            raise ValueError("jump mark must be nonzero")


@dataclass
class DriverRealization:
    """One realized driving path on a fixed time grid."""

    horizon: float
    grid: np.ndarray
    brownian_increments: np.ndarray  # (len(grid)-1, m)
    jump_events: list[JumpEvent]
    seed: int
    realization_index: int = 0
    small_jump_mode: str = "drop"  # drop | gaussian_substitute
    # Gaussian substitute increments for truncated small jumps, (len(grid)-1, m).
    small_jump_increments: np.ndarray | None = None
    truncation_epsilon: float = 0.0
    substitute_variance: float = 0.0  # per unit time, per coordinate

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 1:
            raise ValueError("grid must be a 1d array of time points")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.brownian_increments = np.atleast_2d(np.asarray(self.brownian_increments, dtype=float))
        if self.brownian_increments.shape[0] != len(self.grid) - 1 and len(self.grid) > 1:
            raise ValueError("need exactly len(grid)-1 Brownian increments")
        times = [ev.time for ev in self.jump_events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("jump event times must be strictly increasing")

    @property
    def m(self) -> int:
        return self.brownian_increments.shape[1] if self.brownian_increments.size else 1


def rng_streams(seed: int, realization_index: int = 0) -> dict[str, np.random.Generator]:
    """Independent, reproducible sub-streams for one realization.

    The stream layout is fixed so a realization is bit-identical no matter
    how many workers run concurrently.
    """
    root = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(realization_index),))
    children = root.spawn(3)
    return {
        "brownian": np.random.default_rng(children[0]),
        "jump_times": np.random.default_rng(children[1]),
        "jump_marks": np.random.default_rng(children[2]),
    }


def sample_brownian(grid: Sequence[float], m: int, rng: np.random.Generator) -> np.ndarray:
    """Per-interval N(0, dt*I_m) increments on a strictly increasing grid."""
    grid = np.asarray(grid, dtype=float)
    if m < 1:
        raise ValueError("dimension m must be >= 1")
    dt = np.diff(grid)
    if np.any(dt <= 0):
        raise ValueError("grid must be strictly increasing")
    if len(dt) == 0:
        return np.empty((0, m))
    return rng.normal(size=(len(dt), m)) * np.sqrt(dt)[:, None]


def sample_compound_poisson(
    spec: LevyMeasureSpec, horizon: float, rng_times: np.random.Generator,
    rng_marks: np.random.Generator | None = None, m: int = 1,
) -> list[JumpEvent]:
    """Compound-Poisson events on (0, T]: Poisson count, uniform sorted times."""
    if spec.kind != "finite_activity":
        raise ValueError("sample_compound_poisson needs a finite-activity spec")
    if rng_marks is None:
        rng_marks = rng_times
    if spec.intensity == 0.0:
        return []
    count = rng_times.poisson(spec.intensity * horizon)
    if count == 0:
        return []
    times = np.sort(rng_times.uniform(0.0, horizon, size=count))
    # Ties are a probability-zero event; re-draw to keep event times unique.
    while len(np.unique(times)) < len(times):
        times = np.sort(rng_times.uniform(0.0, horizon, size=count))
    times = np.where(times == 0.0, np.nextafter(0.0, horizon), times)
    marks = spec.mark_distribution.sample(rng_marks, count, m)
    keep = np.any(marks != 0.0, axis=1)
    return [JumpEvent(float(t), z) for t, z in zip(times[keep], marks[keep])]


def _cms_standard(alpha: float, rng: np.random.Generator, size) -> np.ndarray:
    """Chambers-Mallows-Stuck variates, symmetric, cf exp(-|lambda|**alpha)."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    e = rng.exponential(1.0, size=size)
    if alpha == 1.0:
        return np.tan(u)
    return (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha))


def sample_stable_path(
    alpha: float, scale: float, grid: Sequence[float], rng: np.random.Generator, m: int = 1,
) -> np.ndarray:
    """Per-interval increments of Z with E exp(i*lambda*Z_1) = exp(-scale*|lambda|**alpha).

    The increment over an interval of length dt is (scale*dt)**(1/alpha) times
    a standard CMS variate, so increments are independent and self-similar.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0, 2]")
    if scale <= 0:
        raise ValueError("scale must be positive")
    grid = np.asarray(grid, dtype=float)
    dt = np.diff(grid)
    if np.any(dt <= 0):
        raise ValueError("grid must be strictly increasing")
    if len(dt) == 0:
        return np.empty((0, m))
    x = _cms_standard(alpha, rng, (len(dt), m))
    return (scale * dt[:, None]) ** (1.0 / alpha) * x


def stable_levy_density_constant(alpha: float, scale: float) -> float:
    """K such that nu(dz) = K |z|^(-1-alpha) dz gives cf exponent scale*|lambda|**alpha."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("the Levy density exists for alpha in (0, 2)")
    if alpha == 1.0:
        return scale / np.pi
    return scale * alpha * (1.0 - alpha) / (2.0 * gamma_fn(2.0 - alpha) * math.cos(np.pi * alpha / 2.0))


def stable_tail_intensity(alpha: float, scale: float, eps: float) -> float:
    """Event rate of jumps with |z| > eps for the symmetric stable measure."""
    if eps <= 0:
        raise ValueError("the stable measure has infinite activity; eps must be positive")
    k = stable_levy_density_constant(alpha, scale)
    return 2.0 * k * eps ** (-alpha) / alpha


def stable_small_jump_variance(alpha: float, scale: float, eps: float) -> float:
    """Second moment per unit time of the jumps with |z| <= eps."""
    if eps <= 0:
        return 0.0
    k = stable_levy_density_constant(alpha, scale)
    return 2.0 * k * eps ** (2.0 - alpha) / (2.0 - alpha)


def sample_stable_events(
    spec: LevyMeasureSpec, horizon: float, rng_times: np.random.Generator,
    rng_marks: np.random.Generator | None = None, m: int = 1,
) -> list[JumpEvent]:
    """Jumps with |z| > truncation_epsilon of a truncated stable driver.

    Mark moduli follow the restricted measure (Pareto tail eps*U**(-1/alpha))
    with independent signs; coordinates are i.i.d.
    """
    if spec.kind != "alpha_stable":
        raise ValueError("sample_stable_events needs an alpha_stable spec")
    eps = spec.truncation_epsilon
    if eps == 0.0:
        raise ValueError("infinite-activity driver: set truncation_epsilon > 0")
    if rng_marks is None:
        rng_marks = rng_times
    rate = stable_tail_intensity(spec.alpha, spec.scale, eps)
    count = rng_times.poisson(rate * horizon)
    if count == 0:
        return []
    times = np.sort(rng_times.uniform(0.0, horizon, size=count))
    while len(np.unique(times)) < len(times):
        times = np.sort(rng_times.uniform(0.0, horizon, size=count))
    times = np.where(times == 0.0, np.nextafter(0.0, horizon), times)
    u = rng_marks.uniform(size=(count, m))
    moduli = eps * u ** (-1.0 / spec.alpha)
    signs = rng_marks.choice([-1.0, 1.0], size=(count, m))
    return [JumpEvent(float(t), z) for t, z in zip(times, moduli * signs)]


def decompose_events(
    events: Sequence[JumpEvent], threshold: float = 1.0,
) -> tuple[list[JumpEvent], list[JumpEvent]]:
    """Partition events into small (|z| <= threshold) and large jumps."""
    small = [ev for ev in events if np.linalg.norm(ev.mark) <= threshold]
    large = [ev for ev in events if np.linalg.norm(ev.mark) > threshold]
    return small, large


def build_grid(horizon: float, dt: float, extra_times: Sequence[float] = ()) -> np.ndarray:
    """Uniform grid of step dt on [0, T] merged with extra time points."""
    if horizon <= 0 or dt <= 0:
        raise ValueError("horizon and dt must be positive")
    n = int(round(horizon / dt))
    base = np.linspace(0.0, horizon, max(n, 1) + 1)
    extras = np.asarray([t for t in extra_times if 0.0 <= t <= horizon], dtype=float)
    grid = np.union1d(base, extras)
    # Collapse points closer than a relative tolerance to keep steps well-sized.
    keep = np.concatenate([[True], np.diff(grid) > 1e-12 * max(1.0, horizon)])
    return grid[keep]


def make_realization(
    spec: LevyMeasureSpec | None,
    horizon: float,
    dt: float,
    seed: int,
    realization_index: int = 0,
    m: int = 1,
    with_brownian: bool = True,
    output_times: Sequence[float] = (),
    small_jump_mode: str = "drop",
) -> DriverRealization:
    """Sample a full driver realization with event times inserted into the grid."""
    if small_jump_mode not in ("drop", "gaussian_substitute"):
        raise ValueError(f"unknown small_jump_mode {small_jump_mode!r}")
    streams = rng_streams(seed, realization_index)
    events: list[JumpEvent] = []
    substitute_variance = 0.0
    eps = 0.0
    if spec is not None:
        if spec.kind == "finite_activity":
            events = sample_compound_poisson(spec, horizon, streams["jump_times"],
                                             streams["jump_marks"], m)
        elif spec.kind == "alpha_stable":
            events = sample_stable_events(spec, horizon, streams["jump_times"],
                                          streams["jump_marks"], m)
            eps = spec.truncation_epsilon
            if small_jump_mode == "gaussian_substitute":
                substitute_variance = stable_small_jump_variance(spec.alpha, spec.scale, eps)
        else:
            raise ValueError("event sampling for tabulated measures is not implemented")
    grid = build_grid(horizon, dt, list(output_times) + [ev.time for ev in events])
    # Snap event times onto the merged grid (insertion can shift them by the
    # dedup tolerance).
    snapped = []
    for ev in events:
        i = int(np.argmin(np.abs(grid - ev.time)))
        snapped.append(JumpEvent(float(grid[i]), ev.mark))
    if with_brownian:
        dw = sample_brownian(grid, m, streams["brownian"])
    else:
        dw = np.zeros((len(grid) - 1, m))
    small_inc = None
    if substitute_variance > 0.0:
        sub_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(seed),
                                   spawn_key=(int(realization_index), 3)))
        small_inc = sub_rng.normal(size=(len(grid) - 1, m)) * np.sqrt(
            substitute_variance * np.diff(grid))[:, None]
    return DriverRealization(
        horizon=horizon, grid=grid, brownian_increments=dw, jump_events=snapped,
        seed=seed, realization_index=realization_index, small_jump_mode=small_jump_mode,
        small_jump_increments=small_inc, truncation_epsilon=eps,
        substitute_variance=substitute_variance,
    )


def coarsen_driver(driver: DriverRealization, coarse_dt: float) -> DriverRealization:
    """Restrict a realization to a coarser grid by summing increments.

    The coarse grid keeps all event times and the endpoints, so the driver is
    the same path observed at fewer points (common-random-number refinement).
    """
    coarse = build_grid(driver.horizon, coarse_dt, [ev.time for ev in driver.jump_events])
    idx = np.searchsorted(driver.grid, coarse)
    if not np.allclose(driver.grid[idx], coarse, atol=1e-10):
        raise ValueError("coarse grid is not a subset of the fine grid")
    dw = np.add.reduceat(driver.brownian_increments, idx[:-1], axis=0)
    small = None
    if driver.small_jump_increments is not None:
        small = np.add.reduceat(driver.small_jump_increments, idx[:-1], axis=0)
    out = replace(driver)
    out.grid = coarse
    out.brownian_increments = dw
    out.small_jump_increments = small
    return out


def brownian_path(driver: DriverRealization) -> np.ndarray:
    """Cumulative Brownian path W at the grid points, shape (len(grid), m)."""
    w = np.vstack([np.zeros((1, driver.m)), np.cumsum(driver.brownian_increments, axis=0)])
    return w


def jump_path_value(driver: DriverRealization, t: float) -> np.ndarray:
    """Sum of jump marks with event time <= t, shape (m,)."""
    total = np.zeros(driver.m)
    for ev in driver.jump_events:
        if ev.time <= t + 1e-12:
            total += ev.mark
    return total
