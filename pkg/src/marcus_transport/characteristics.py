"""Characteristics system integration.

The (d+2)-dimensional state (x, xi, zeta) follows a canonical jump SDE: a
Stratonovich-consistent Heun step between events, the structured jump
exponential at each event, and an optional compensator drift when truncated
small jumps are resolved as events.

All coefficient callables are batched: positions have shape (k, d) and the
outputs follow the shapes documented on :class:`CoefficientSet`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .driver import DriverRealization, LevyMeasureSpec
from .exceptions import DivergenceError, QuadratureError
from .expmap import structured_jump_factors

__all__ = [
    "CoefficientSet",
    "CharacteristicState",
    "FlowSolution",
    "step_continuous",
    "apply_jump",
    "small_jump_compensator",
    "integrate_path",
    "xi_closed_form_check",
]


def _zeros_vec(k, d):
    return np.zeros((k, d))


@dataclass(frozen=True)
class CoefficientSet:
    """The nine coefficient functions of the transport equation.

    Batched shapes for input x of shape (k, d):

    ==========  ============
    a           (k, d)
    b, c        (k,)
    A, alpha    (k, d, m)
    B, C        (k, m)
    beta, sigma (k, m)
    ==========  ============

    ``A_jacobian`` (optional) returns (k, d, m, d): derivative of column j of
    A with respect to x; only used by the Ito-form cross check.
    """

    d: int
    m: int
    a: Callable = None
    b: Callable = None
    c: Callable = None
    A: Callable = None
    B: Callable = None
    C: Callable = None
    alpha: Callable = None
    beta: Callable = None
    sigma: Callable = None
    A_jacobian: Callable = None
    smoothness_declared: bool = True

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("dimensions d and m must be >= 1")
        d, m = self.d, self.m
        defaults = {
            "a": lambda x: np.zeros_like(x),
            "b": lambda x: np.zeros(x.shape[0]),
            "c": lambda x: np.zeros(x.shape[0]),
            "A": lambda x: np.zeros((x.shape[0], d, m)),
            "B": lambda x: np.zeros((x.shape[0], m)),
            "C": lambda x: np.zeros((x.shape[0], m)),
            "alpha": lambda x: np.zeros((x.shape[0], d, m)),
            "beta": lambda x: np.zeros((x.shape[0], m)),
            "sigma": lambda x: np.zeros((x.shape[0], m)),
        }
        zero = frozenset(name for name in defaults if getattr(self, name) is None)
        object.__setattr__(self, "_zero", zero)
        for name, fn in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, fn)

    def is_zero(self, name: str) -> bool:
        """True when the named coefficient was left at its zero default."""
        return name in self._zero

    @classmethod
    def from_scalar(cls, a=None, b=None, c=None, A=None, B=None, C=None,
                    alpha=None, beta=None, sigma=None, A_prime=None) -> "CoefficientSet":
        """Build a d = m = 1 coefficient set from scalar vectorized functions."""

        def vec(fn):
            return None if fn is None else (lambda x: np.asarray(fn(x[:, 0]), dtype=float))

        def mat(fn):
            return None if fn is None else (
                lambda x: np.asarray(fn(x[:, 0]), dtype=float)[:, None, None])

        def row(fn):
            return None if fn is None else (
                lambda x: np.asarray(fn(x[:, 0]), dtype=float)[:, None])

        def col(fn):
            return None if fn is None else (
                lambda x: np.asarray(fn(x[:, 0]), dtype=float)[:, None])

        jac = None
        if A_prime is not None:
            jac = lambda x: np.asarray(A_prime(x[:, 0]), dtype=float)[:, None, None, None]
        return cls(d=1, m=1,
                   a=None if a is None else (lambda x: np.asarray(a(x[:, 0]), dtype=float)[:, None]),
                   b=vec(b), c=vec(c), A=mat(A), B=row(B), C=row(C),
                   alpha=mat(alpha), beta=col(beta), sigma=col(sigma), A_jacobian=jac)


@dataclass
class CharacteristicState:
    x: np.ndarray
    xi: float
    zeta: float
    t: float

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if self.xi <= 0:
            raise ValueError("xi must stay positive")


def _drift(coeffs: CoefficientSet, x, xi):
    # Zero-default coefficients contribute scalar zeros (broadcast later).
    fx = -coeffs.a(x) if not coeffs.is_zero("a") else 0.0
    fxi = -xi * coeffs.b(x) if not coeffs.is_zero("b") else 0.0
    fzeta = -xi * coeffs.c(x) if not coeffs.is_zero("c") else 0.0
    return fx, fxi, fzeta


def _noise(coeffs: CoefficientSet, x, xi, dW, dV=None):
    gx = gxi = gzeta = 0.0
    if not coeffs.is_zero("A"):
        gx = -(coeffs.A(x) @ dW)
    if not coeffs.is_zero("B"):
        gxi = -xi * (coeffs.B(x) @ dW)
    if not coeffs.is_zero("C"):
        gzeta = -xi * (coeffs.C(x) @ dW)
    if dV is not None:
        if not coeffs.is_zero("alpha"):
            gx = gx - coeffs.alpha(x) @ dV
        if not coeffs.is_zero("beta"):
            gxi = gxi - xi * (coeffs.beta(x) @ dV)
        if not coeffs.is_zero("sigma"):
            gzeta = gzeta - xi * (coeffs.sigma(x) @ dV)
    return gx, gxi, gzeta


def _heun_step(coeffs: CoefficientSet, x, xi, zeta, dt, dW, dV=None):
    """One Heun predictor-corrector step of the continuous Stratonovich part."""
    fx, fxi, fzeta = _drift(coeffs, x, xi)
    gx, gxi, gzeta = _noise(coeffs, x, xi, dW, dV)
    xp = x + fx * dt + gx
    xip = xi + fxi * dt + gxi
    zp = zeta + fzeta * dt + gzeta
    fxp, fxip, fzp = _drift(coeffs, xp, xip)
    gxp, gxip, gzp = _noise(coeffs, xp, xip, dW, dV)
    x1 = x + 0.5 * ((fx + fxp) * dt + gx + gxp)
    xi1 = xi + 0.5 * ((fxi + fxip) * dt + gxi + gxip)
    z1 = zeta + 0.5 * ((fzeta + fzp) * dt + gzeta + gzp)
    return x1, xi1, z1


def step_continuous(state: CharacteristicState, coeffs: CoefficientSet, dt: float,
                    dW) -> CharacteristicState:
    """Advance one continuous step; raises on non-finite results."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    dW = np.atleast_1d(np.asarray(dW, dtype=float))
    x = state.x[None, :]
    x1, xi1, z1 = _heun_step(coeffs, x, np.array([state.xi]), np.array([state.zeta]), dt, dW)
    if not (np.all(np.isfinite(x1)) and np.isfinite(xi1[0]) and np.isfinite(z1[0])):
        raise DivergenceError(
            f"non-finite state after continuous step from t={state.t} (x={state.x})")
    return CharacteristicState(x=x1[0], xi=float(xi1[0]), zeta=float(z1[0]), t=state.t + dt)


def apply_jump(state: CharacteristicState, coeffs: CoefficientSet, z,
               substeps: int = 32) -> CharacteristicState:
    """Apply one Marcus jump via the structured exponential map; time unchanged."""
    x_new, e_factor, i_inc = structured_jump_factors(coeffs, state.x[None, :], z, substeps)
    return CharacteristicState(
        x=x_new[0],
        xi=state.xi * float(e_factor[0]),
        zeta=state.zeta - state.xi * float(i_inc[0]),
        t=state.t,
    )


def _band_nodes(eps: float, n_nodes: int):
    """Gauss-Legendre nodes and weights on [eps, 1], mirrored to [-1, -eps]."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * (1.0 - eps)
    mid = 0.5 * (1.0 + eps)
    pos = half * nodes + mid
    w = half * weights
    return np.concatenate([-pos[::-1], pos]), np.concatenate([w[::-1], w])


def _compensator_batch(coeffs: CoefficientSet, x, xi, zeta, spec: LevyMeasureSpec,
                       nodes, weights, substeps: int):
    """Marcus compensator integrand integrated over the given z nodes, (k, d+2)."""
    k, d = x.shape
    out = np.zeros((k, d + 2))
    dens = spec.density(np.abs(nodes))
    for z, w, nu in zip(nodes, weights, dens):
        if nu == 0.0:
            continue
        zz = np.array([z])
        x_new, e_factor, i_inc = structured_jump_factors(coeffs, x, zz, substeps)
        lin_x = -coeffs.alpha(x)[:, :, 0] * z
        lin_xi = -xi * coeffs.beta(x)[:, 0] * z
        lin_zeta = -xi * coeffs.sigma(x)[:, 0] * z
        out[:, :d] += w * nu * (x_new - x - lin_x)
        out[:, d] += w * nu * (xi * (e_factor - 1.0) - lin_xi)
        out[:, d + 1] += w * nu * (-xi * i_inc - lin_zeta)
    return out


def small_jump_compensator(coeffs: CoefficientSet, state: CharacteristicState,
                           spec: LevyMeasureSpec, n_nodes: int = 32,
                           substeps: int = 16, tol: float = 1e-6) -> np.ndarray:
    """Compensator drift int_{eps<|z|<=1} (e^{Sigma z}(X) - X - Sigma(X) z) nu(dz).

    Only one jump coordinate (m = 1) is supported.  The quadrature is checked
    by node doubling; disagreement beyond ``tol`` raises QuadratureError.
    """
    if coeffs.m != 1:
        raise ValueError("compensator quadrature supports m = 1 only")
    eps = spec.truncation_epsilon
    if eps >= 1.0:
        return np.zeros(coeffs.d + 2)
    if spec.kind == "finite_activity":
        return np.zeros(coeffs.d + 2)
    x = state.x[None, :]
    xi = np.array([state.xi])
    zeta = np.array([state.zeta])
    nodes, weights = _band_nodes(eps, n_nodes)
    coarse = _compensator_batch(coeffs, x, xi, zeta, spec, nodes, weights, substeps)[0]
    nodes2, weights2 = _band_nodes(eps, 2 * n_nodes)
    fine = _compensator_batch(coeffs, x, xi, zeta, spec, nodes2, weights2, substeps)[0]
    scale = max(1.0, float(np.max(np.abs(fine))))
    if np.max(np.abs(fine - coarse)) > tol * scale:
        raise QuadratureError(
            f"compensator quadrature did not converge at {n_nodes} nodes "
            f"(residual {np.max(np.abs(fine - coarse)):.3e})")
    return fine


@dataclass
class FlowSolution:
    """Forward characteristics from a grid of initial points.

    ``E`` and ``I`` are the per-trajectory accumulators with
    xi_{0,t} = xi0 * E_t and zeta_{0,t} = zeta0 - xi0 * I_t.
    """

    initial_grid: np.ndarray        # (k, d)
    times: np.ndarray               # (nt,)
    x: np.ndarray                   # (k, nt, d)
    E: np.ndarray                   # (k, nt)
    I: np.ndarray                   # (k, nt)
    diverged: np.ndarray            # (k,) bool
    non_monotone: np.ndarray        # (nt,) bool, meaningful for d = 1
    coeffs: CoefficientSet = None
    driver: DriverRealization = None
    scheme: dict = field(default_factory=dict)
    path: np.ndarray | None = None        # (k, len(path_grid), d) when kept
    path_grid: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.initial_grid.shape[1]


def integrate_path(
    coeffs: CoefficientSet,
    driver: DriverRealization,
    x0_grid,
    output_times: Sequence[float],
    substeps: int = 32,
    compensate_small_jumps: bool = False,
    small_jump_spec: LevyMeasureSpec | None = None,
    domain_box: tuple[float, float] | None = None,
    keep_path: bool = False,
) -> FlowSolution:
    """Integrate the characteristics along one driver realization.

    The driver grid must contain every requested output time (event times are
    already grid points by construction).  Trajectories that diverge or leave
    ``domain_box`` are frozen and flagged, not dropped.
    """
    x = np.asarray(x0_grid, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != coeffs.d:
        raise ValueError(f"initial points have dimension {x.shape[1]}, expected {coeffs.d}")
    k = x.shape[0]
    grid = driver.grid
    output_times = np.asarray(output_times, dtype=float)
    out_idx = np.searchsorted(grid, output_times)
    out_idx = np.clip(out_idx, 0, len(grid) - 1)
    if not np.allclose(grid[out_idx], output_times, atol=1e-9):
        raise ValueError("every output time must be a grid point of the driver")

    events_at = {}
    for ev in driver.jump_events:
        i = int(np.argmin(np.abs(grid - ev.time)))
        if abs(grid[i] - ev.time) > 1e-9:
            raise ValueError(f"jump event at t={ev.time} is not a grid point")
        events_at.setdefault(i, []).append(ev.mark)

    if compensate_small_jumps and small_jump_spec is None:
        raise ValueError("compensate_small_jumps requires a small_jump_spec")
    comp_nodes = comp_weights = None
    if compensate_small_jumps and small_jump_spec.truncation_epsilon < 1.0:
        comp_nodes, comp_weights = _band_nodes(small_jump_spec.truncation_epsilon, 32)

    xi = np.ones(k)
    zeta = np.zeros(k)
    alive = np.ones(k, dtype=bool)

    nt = len(output_times)
    xs_out = np.full((k, nt, coeffs.d), np.nan)
    e_out = np.full((k, nt), np.nan)
    i_out = np.full((k, nt), np.nan)
    non_monotone = np.zeros(nt, dtype=bool)
    path = np.full((k, len(grid), coeffs.d), np.nan) if keep_path else None

    want = {int(i): j for j, i in enumerate(out_idx)}

    def freeze_bad(x1, xi1, z1):
        # Single reduction: any non-finite component poisons the sum.
        bad = ~np.isfinite(x1.sum(axis=1) + xi1 + z1) | (xi1 <= 0.0)
        if domain_box is not None:
            lo, hi = domain_box
            bad |= np.any((x1 < lo) | (x1 > hi), axis=1)
        return bad

    def record(idx_grid):
        j = want.get(idx_grid)
        if j is None:
            return
        xs_out[alive, j] = x[alive]
        e_out[alive, j] = xi[alive]
        i_out[alive, j] = -zeta[alive]
        if coeffs.d == 1 and np.sum(alive) > 1:
            vals = x[alive, 0]
            if np.any(np.diff(vals) <= 0):
                non_monotone[j] = True

    # Event exactly at t=0 is not possible (events live in (0, T]).
    if path is not None:
        path[:, 0] = x
    record(0)

    for i in range(len(grid) - 1):
        dt = grid[i + 1] - grid[i]
        dW = driver.brownian_increments[i]
        dV = None
        if driver.small_jump_increments is not None:
            dV = driver.small_jump_increments[i]
        x1, xi1, z1 = _heun_step(coeffs, x, xi, zeta, dt, dW, dV)
        if compensate_small_jumps and comp_nodes is not None:
            comp = _compensator_batch(coeffs, x, xi, zeta, small_jump_spec,
                                      comp_nodes, comp_weights, max(substeps // 2, 4))
            x1 = x1 + comp[:, :coeffs.d] * dt
            xi1 = xi1 + comp[:, coeffs.d] * dt
            z1 = z1 + comp[:, coeffs.d + 1] * dt
        for mark in events_at.get(i + 1, ()):
            xj, e_factor, i_inc = structured_jump_factors(coeffs, x1, mark, substeps)
            x1, xi1, z1 = xj, xi1 * e_factor, z1 - xi1 * i_inc
        # Divergence is checked on a short cadence: non-finite values propagate
        # on their own, so only event/output steps (and every step when a
        # domain box is set, to freeze escapees promptly) need the full check.
        must_check = (domain_box is not None or (i + 1) in want
                      or (i + 1) in events_at or i % 16 == 15
                      or i == len(grid) - 2)
        if not must_check:
            x, xi, zeta = x1, xi1, z1
            if path is not None:
                path[:, i + 1] = x
            continue
        bad = freeze_bad(x1, xi1, z1)
        if not bad.any() and alive.all():
            x, xi, zeta = x1, xi1, z1
        else:
            newly_bad = bad & alive
            alive &= ~bad
            x = np.where(alive[:, None], x1, x)
            xi = np.where(alive, xi1, xi)
            zeta = np.where(alive, z1, zeta)
            if np.any(newly_bad):
                x[newly_bad] = np.nan
                xi[newly_bad] = np.nan
                zeta[newly_bad] = np.nan
        if path is not None:
            path[:, i + 1] = x
        record(i + 1)

    return FlowSolution(
        initial_grid=x0_grid if np.asarray(x0_grid).ndim == 2 else np.asarray(x0_grid, dtype=float)[:, None],
        times=output_times, x=xs_out, E=e_out, I=i_out,
        diverged=~alive, non_monotone=non_monotone,
        coeffs=coeffs, driver=driver,
        scheme={"substeps": substeps, "seed": driver.seed,
                "small_jump_mode": driver.small_jump_mode,
                "compensated": compensate_small_jumps},
        path=path, path_grid=grid if keep_path else None,
    )


def xi_closed_form_check(flow: FlowSolution, coeffs: CoefficientSet | None = None,
                         driver: DriverRealization | None = None) -> float:
    """Max relative discrepancy between the integrated xi and its exponential form.

    Replays exp(-int b dr - int B o dW - int beta along jumps) with the same
    trapezoid/predictor quadrature on the stored x trajectory and compares
    against the stored accumulator E at the output times.
    """
    coeffs = coeffs or flow.coeffs
    driver = driver or flow.driver
    if flow.path is None:
        raise ValueError("flow must be integrated with keep_path=True")
    grid = flow.path_grid
    k = flow.path.shape[0]
    substeps = flow.scheme.get("substeps", 32)

    events_at = {}
    for ev in driver.jump_events:
        i = int(np.argmin(np.abs(grid - ev.time)))
        events_at.setdefault(i, []).append(ev.mark)

    log_xi = np.zeros(k)
    out_idx = np.searchsorted(grid, flow.times)
    want = {int(i): j for j, i in enumerate(out_idx)}
    worst = 0.0

    def compare(idx_grid):
        nonlocal worst
        j = want.get(idx_grid)
        if j is None:
            return
        ref = flow.E[:, j]
        ok = np.isfinite(ref)
        if np.any(ok):
            rel = np.abs(np.exp(log_xi[ok]) / ref[ok] - 1.0)
            worst = max(worst, float(np.max(rel)))

    compare(0)
    for i in range(len(grid) - 1):
        dt = grid[i + 1] - grid[i]
        dW = driver.brownian_increments[i]
        dV = (driver.small_jump_increments[i]
              if driver.small_jump_increments is not None else None)
        x0 = flow.path[:, i]
        # Same predictor as the Heun step for the x block.
        gx = -np.einsum("kdm,m->kd", coeffs.A(x0), dW)
        if dV is not None:
            gx = gx - np.einsum("kdm,m->kd", coeffs.alpha(x0), dV)
        xp = x0 - coeffs.a(x0) * dt + gx
        log_xi -= 0.5 * (coeffs.b(x0) + coeffs.b(xp)) * dt
        log_xi -= 0.5 * (coeffs.B(x0) + coeffs.B(xp)) @ dW
        if dV is not None:
            log_xi -= 0.5 * (coeffs.beta(x0) + coeffs.beta(xp)) @ dV
        marks = events_at.get(i + 1, ())
        if marks:
            x_pre, _, _ = _heun_step(coeffs, x0, np.ones(k), np.zeros(k), dt, dW, dV)
            for mark in marks:
                x_pre, e_factor, _ = structured_jump_factors(coeffs, x_pre, mark, substeps)
                with np.errstate(invalid="ignore"):
                    log_xi += np.log(e_factor)
        compare(i + 1)
    return worst
