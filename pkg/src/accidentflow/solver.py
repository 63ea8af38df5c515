"""Lax-Friedrichs evolution of the LWR density with space-dependent capacity.

Between accidents the density follows

    rho_t + (a(x) f(rho))_x = 0,   f(rho) = rho (1 - rho),

on a periodic road. The update is

    rho_i <- (rho_{i+1} + rho_{i-1}) / 2 - lam/2 (a_{i+1} f(rho_{i+1}) - a_{i-1} f(rho_{i-1}))

with lam = dt/dx and the step chosen from lam * sup|a| * sup|f'| <= 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import (AccidentParams, CapacityField, Mollifier, RoadProfile, StepFunction,
                       mollify, total_capacity)
from .grid import Grid, cell_means, step_cell_means

log = logging.getLogger(__name__)

# sup |f| and sup |f'| on [0, 1]
FLUX_SUP = 0.25
FLUX_DERIV_SUP = 1.0
RANGE_TOL = 1e-9


class InvariantViolation(RuntimeError):
    """A runtime check on the numerical solution failed."""


def lwr_flux(rho):
    return rho * (1.0 - rho)


def lwr_flux_deriv(rho):
    return 1.0 - 2.0 * rho


def cfl_timestep(capacity: CapacityField, grid: Grid, cfl_factor: float = 1.0) -> float:
    if not 0.0 < cfl_factor <= 1.0:
        raise ValueError(f"cfl_factor must lie in (0, 1], got {cfl_factor}")
    if capacity.sup == 0.0:
        raise ValueError("capacity vanishes identically")
    return cfl_factor * grid.dx / (capacity.sup * FLUX_DERIV_SUP)


def lxf_step(rho: np.ndarray, a: np.ndarray, lam: float) -> np.ndarray:
    """One periodic Lax-Friedrichs step."""
    g = a * (rho * (1.0 - rho))
    new = np.empty_like(rho)
    new[1:-1] = 0.5 * (rho[2:] + rho[:-2]) - 0.5 * lam * (g[2:] - g[:-2])
    new[0] = 0.5 * (rho[1] + rho[-1]) - 0.5 * lam * (g[1] - g[-1])
    new[-1] = 0.5 * (rho[0] + rho[-2]) - 0.5 * lam * (g[0] - g[-2])
    return new


def total_variation(rho) -> float:
    """Periodic total variation, including the wrap-around jump."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho - np.roll(rho, 1))))


def mass(rho, dx: float) -> float:
    return float(np.sum(rho) * dx)


@dataclass(frozen=True, eq=False)
class ModelState:
    """PDP state: accident slots, density cell means and time.

    Inactive slots carry ``drop == 0``; slots are never removed so that slot
    indices stay stable over a path.
    """

    accidents: tuple
    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "accidents", tuple(self.accidents))

    @property
    def active(self) -> tuple:
        return tuple(acc for acc in self.accidents if acc.active)

    def replace(self, **changes) -> "ModelState":
        kw = dict(accidents=self.accidents, rho=self.rho, time=self.time)
        kw.update(changes)
        return ModelState(**kw)


@dataclass(frozen=True)
class Dynamics:
    """Everything the deterministic flow needs besides the state itself."""

    grid: Grid
    road: RoadProfile
    mollifier: Mollifier = field(default_factory=Mollifier)
    cfl_factor: float = 1.0

    def capacity(self, accidents) -> CapacityField:
        active = tuple(acc for acc in accidents if acc.active)
        return total_capacity(self.road, active, self.mollifier, self.grid)

    def timestep(self, capacity: CapacityField) -> float:
        return cfl_timestep(capacity, self.grid, self.cfl_factor)


@dataclass
class Diagnostics:
    """Per-step checks of conservation and the L-infinity / TV growth bounds.

    The L-infinity budget grows by dt * sup|f| * sup|a'| per step and the
    total variation may grow by at most

        dt * sup|a'| * sup|f'| * TV + dt * 3/2 * sup|f| * ||a''||_1

    with the discrete norms of the capacity in force during that step.
    """

    strict: bool = False
    tol: float = 1e-12
    steps: int = 0
    initial_mass: float | None = None
    last_mass: float | None = None
    max_step_drift: float = 0.0
    linf_budget: float | None = None
    linf_violations: int = 0
    tv_violations: int = 0
    max_tv_ratio: float = 0.0
    out_of_range: int = 0
    tv_history: list = field(default_factory=list)
    record_tv: bool = False

    @property
    def total_drift(self) -> float:
        if self.initial_mass is None or self.initial_mass == 0.0:
            return 0.0
        return abs(self.last_mass - self.initial_mass) / abs(self.initial_mass)

    @property
    def valid(self) -> bool:
        return not (self.linf_violations or self.tv_violations or self.out_of_range)

    def start(self, rho, dx):
        if self.initial_mass is None:
            self.initial_mass = mass(rho, dx)
            self.last_mass = self.initial_mass
            self.linf_budget = float(np.max(np.abs(rho)))

    def check(self, old, new, dt, capacity: CapacityField, dx):
        self.steps += 1
        m = mass(new, dx)
        ref = max(abs(self.last_mass), 1e-300)
        self.max_step_drift = max(self.max_step_drift, abs(m - self.last_mass) / ref)
        self.last_mass = m

        self.linf_budget += dt * FLUX_SUP * capacity.sup_deriv
        linf = float(np.max(np.abs(new)))
        if linf > self.linf_budget * (1 + self.tol) + self.tol:
            self.linf_violations += 1
            self._fail(f"L-infinity bound exceeded: {linf} > {self.linf_budget}")

        tv_old = total_variation(old)
        tv_new = total_variation(new)
        bound = ((1.0 + dt * capacity.sup_deriv * FLUX_DERIV_SUP) * tv_old
                 + dt * 1.5 * FLUX_SUP * capacity.l1_second)
        if bound > 0.0:
            self.max_tv_ratio = max(self.max_tv_ratio, tv_new / bound)
        if tv_new > bound * (1 + self.tol) + self.tol:
            self.tv_violations += 1
            self._fail(f"TV growth bound exceeded: {tv_new} > {bound}")
        if self.record_tv:
            self.tv_history.append(tv_new)

        lo, hi = float(np.min(new)), float(np.max(new))
        if lo < -RANGE_TOL or hi > 1.0 + RANGE_TOL:
            self.out_of_range += 1
            log.warning("density left [0, 1]: min %.3g max %.3g", lo, hi)
            self._fail("density left [0, 1]")

    def _fail(self, msg):
        if self.strict:
            raise InvariantViolation(msg)


def evolve(state: ModelState, t_target: float, dynamics: Dynamics,
           diagnostics: Diagnostics | None = None) -> ModelState:
    """Advance the density to ``t_target`` with frozen accidents.

    Uses full CFL steps and one shorter final step so that the returned time
    is exactly ``t_target``.
    """
    if t_target < state.time:
        raise ValueError(f"cannot evolve backwards from {state.time} to {t_target}")
    if t_target == state.time:
        return state
    grid = dynamics.grid
    capacity = dynamics.capacity(state.accidents)
    dt = dynamics.timestep(capacity)
    a = capacity.values
    rho = np.array(state.rho)
    if diagnostics is not None:
        diagnostics.start(rho, grid.dx)
    t = state.time
    while t < t_target:
        h = t_target - t
        if h > dt * (1.0 + 1e-12):
            h = dt
        new = lxf_step(rho, a, h / grid.dx)
        if diagnostics is not None:
            diagnostics.check(rho, new, h, capacity, grid.dx)
        rho = new
        t = t_target if h == t_target - t else t + h
    return state.replace(rho=rho, time=t_target)


def linf_bound(rho0, t: float, capacity: CapacityField) -> float:
    """sup|rho(t)| <= sup|rho0| + t sup|a'| sup|f|."""
    return float(np.max(np.abs(rho0))) + t * capacity.sup_deriv * FLUX_SUP


def tv_bound(tv0: float, t: float, capacity: CapacityField) -> float:
    """Gronwall-type bound on TV(rho(t)) from the per-step growth estimate."""
    k = capacity.sup_deriv * FLUX_DERIV_SUP
    src = 1.5 * FLUX_SUP * capacity.l1_second
    if k == 0.0:
        return tv0 + src * t
    if k * t > 700.0:
        return math.inf
    growth = math.exp(k * t)
    return growth * tv0 + src / k * (growth - 1.0)


def tv_lipschitz_constant(tv0: float, horizon: float, capacity: CapacityField) -> float:
    """Bound on the per-unit-time increase of TV over [0, horizon]."""
    k = capacity.sup_deriv * FLUX_DERIV_SUP
    return tv_bound(tv0, horizon, capacity) * k + 1.5 * FLUX_SUP * capacity.l1_second


@dataclass(frozen=True)
class InitialProfile:
    """Piecewise constant initial density on [-L, L), optionally mollified."""

    breakpoints: tuple
    values: tuple
    mollifier: Mollifier = field(default_factory=Mollifier)

    @classmethod
    def constant(cls, value: float, half_length: float) -> "InitialProfile":
        return cls((-half_length, half_length), (value,))

    def cell_means(self, grid: Grid) -> np.ndarray:
        if not self.mollifier.smooth:
            return step_cell_means(self.breakpoints, self.values, grid)
        step = StepFunction(tuple(self.breakpoints), tuple(self.values))
        return cell_means(lambda x: mollify(step, self.mollifier, x), grid)


def self_convergence(dynamics: Dynamics, profile: InitialProfile, horizon: float,
                     levels: int = 4):
    """L1 differences between successive refinements, projected to the coarser grid.

    Returns rows ``(dx, diff, order)`` where ``diff`` compares the solution on
    ``dx`` with the one on ``dx/2`` and ``order`` is log2 of the ratio of
    consecutive differences (nan when undefined).
    """
    if levels < 3:
        raise ValueError("need at least three refinement levels")
    sols = []
    grid = dynamics.grid
    for _ in range(levels):
        dyn = Dynamics(grid, dynamics.road, dynamics.mollifier, dynamics.cfl_factor)
        state = ModelState((), profile.cell_means(grid), 0.0)
        sols.append((grid, evolve(state, horizon, dyn).rho))
        grid = grid.refined(2)
    diffs = []
    for (g0, u0), (_, u1) in zip(sols, sols[1:]):
        proj = 0.5 * (u1[0::2] + u1[1::2])
        diffs.append((g0.dx, float(np.sum(np.abs(u0 - proj)) * g0.dx)))
    rows = []
    for k, (dx, d) in enumerate(diffs):
        if k + 1 < len(diffs) and d > 0.0 and diffs[k + 1][1] > 0.0:
            order = math.log2(d / diffs[k + 1][1])
        else:
            order = float("nan")
        rows.append((dx, d, order))
    return rows


def initial_state(rho0, accidents=()) -> ModelState:
    return ModelState(tuple(accidents), np.asarray(rho0, dtype=float), 0.0)


__all__ = [
    "AccidentParams", "Diagnostics", "Dynamics", "InitialProfile", "InvariantViolation",
    "ModelState", "self_convergence",
    "cfl_timestep", "evolve", "initial_state", "linf_bound", "lwr_flux",
    "lwr_flux_deriv", "lxf_step", "mass", "total_variation", "tv_bound",
    "tv_lipschitz_constant",
]
