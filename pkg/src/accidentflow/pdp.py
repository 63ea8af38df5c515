"""Jump times and whole paths of the piecewise deterministic accident process.

Two engines produce the next jump time from a state:

* ``approx_next_jump`` walks along the deterministic flow in adaptive steps
  dt = min(dt_ref, acceptance / psi, T - t) and accepts a jump at the end of
  a step with probability dt * psi evaluated at its start. This is the
  default engine.
* ``exact_next_jump`` thins a homogeneous Poisson stream of rate
  ``bound >= psi`` along the flow. It needs a valid dominating bound and is
  mainly used for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .measures import CapDist, RateParams, SizeDist, rate, sample_jump
from .solver import (Diagnostics, Dynamics, ModelState, evolve, total_variation,
                     tv_bound)
from .capacity import AccidentParams

_TIME_EPS = 1e-12
# refuse automatic thinning bounds that would need more candidates than this
MAX_CANDIDATES = 1e7


class BoundViolation(RuntimeError):
    """The jump rate exceeded the dominating bound used for thinning."""


@dataclass(frozen=True, eq=False)
class PathConfig:
    dynamics: Dynamics
    rho0: np.ndarray
    horizon: float
    rates: RateParams
    size_dist: SizeDist
    cap_dist: CapDist
    beta: float = 0.0
    dt_ref: float = 0.05
    acceptance: float = 1.0
    engine: str = "approx"
    bound: float | None = None
    snapshot_times: tuple = ()
    accidents: tuple = ()

    def __post_init__(self):
        if self.horizon < 0.0:
            raise ValueError("horizon must be nonnegative")
        if not self.dt_ref > 0.0:
            raise ValueError("dt_ref must be positive")
        if not 0.0 < self.acceptance <= 1.0:
            raise ValueError("acceptance ratio must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.engine not in ("approx", "exact"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.bound is not None and not self.bound > 0.0:
            raise ValueError("thinning bound must be positive")
        rho0 = np.asarray(self.rho0, dtype=float)
        if rho0.shape != (self.dynamics.grid.n_cells,):
            raise ValueError("initial density does not match the grid")
        object.__setattr__(self, "rho0", rho0)

    def initial_state(self) -> ModelState:
        return ModelState(tuple(self.accidents), self.rho0, 0.0)

    def psi(self, state: ModelState) -> float:
        return rate(state, self.dynamics.capacity(state.accidents), self.rates)


class NextJump(NamedTuple):
    time: float
    state: ModelState  # state at ``time`` before the kernel is applied
    censored: bool


class ApproxFlow:
    """Deterministic step sequence of the adaptive algorithm from one state.

    Until a jump is accepted the sequence of states, step sizes and rates does
    not depend on the random draws, so it can be computed once and shared by
    many independent first-jump samples.
    """

    def __init__(self, start: ModelState, cfg: PathConfig,
                 diagnostics: Diagnostics | None = None):
        self.cfg = cfg
        self.diagnostics = diagnostics
        self.states = [start]
        self.steps: list[float] = []
        self.rates: list[float] = []

    def step(self, k: int):
        """Return ``(t_k, dt_k, psi_k)``; ``dt_k == 0`` means the horizon is reached."""
        while len(self.steps) <= k:
            self._extend()
        return self.states[k].time, self.steps[k], self.rates[k]

    def state_after(self, k: int) -> ModelState:
        self.step(k)
        return self.states[k + 1]

    def _extend(self):
        cfg = self.cfg
        y = self.states[-1]
        psi = cfg.psi(y)
        remaining = cfg.horizon - y.time
        if remaining <= _TIME_EPS * max(1.0, cfg.horizon):
            self.steps.append(0.0)
            self.rates.append(psi)
            self.states.append(y)
            return
        dt = min(cfg.dt_ref, remaining)
        if psi > 0.0:
            dt = min(dt, cfg.acceptance / psi)
        t_next = y.time + dt
        if remaining - dt <= _TIME_EPS * max(1.0, cfg.horizon):
            t_next = cfg.horizon
            dt = remaining
        self.steps.append(dt)
        self.rates.append(psi)
        self.states.append(evolve(y, t_next, cfg.dynamics, self.diagnostics))


def approx_next_jump(state: ModelState, cfg: PathConfig, rng: np.random.Generator,
                     flow: ApproxFlow | None = None) -> NextJump:
    if flow is None:
        flow = ApproxFlow(state, cfg)
    elif flow.states[0] is not state:
        raise ValueError("flow was built from a different state")
    k = 0
    while True:
        t, dt, psi = flow.step(k)
        if dt == 0.0:
            return NextJump(cfg.horizon, flow.states[k], True)
        if rng.random() <= dt * psi:
            return NextJump(t + dt, flow.state_after(k), False)
        k += 1


def growth_rate_bound(state: ModelState, cfg: PathConfig, horizon_left: float) -> float:
    """Upper bound on psi along the flow for ``horizon_left`` time units.

    Uses C_F <= sup|a| sup|v| ||rho||_1 with v(rho) = 1 - rho, D+ <= TV, and
    the Gronwall bound on TV(rho(t)). It is very pessimistic for sharp
    capacities.
    """
    dyn = cfg.dynamics
    cap = dyn.capacity(state.accidents)
    rho = state.rho
    l1 = float(np.sum(np.abs(rho)) * dyn.grid.dx)
    v_sup = max(1.0, float(np.max(np.abs(1.0 - rho))))
    tv = tv_bound(total_variation(rho), max(horizon_left, 0.0), cap)
    n_active = len(state.active)
    return (cfg.rates.flux * cap.sup * v_sup * l1 + cfg.rates.upjump * tv
            + cfg.rates.resolve * n_active)


def exact_next_jump(state: ModelState, cfg: PathConfig, rng: np.random.Generator,
                    bound: float | None = None,
                    diagnostics: Diagnostics | None = None) -> NextJump:
    """Thinning: candidates at rate ``bound``, each kept with probability psi / bound."""
    if bound is None:
        bound = cfg.bound
    if bound is None:
        bound = growth_rate_bound(state, cfg, cfg.horizon - state.time)
        if not bound * (cfg.horizon - state.time) <= MAX_CANDIDATES:
            raise ValueError(f"automatic thinning bound {bound:.3g} is unusable; "
                             "supply engine.bound or use a smooth capacity")
    if not bound > 0.0:
        return NextJump(cfg.horizon, evolve(state, max(cfg.horizon, state.time),
                                            cfg.dynamics, diagnostics), True)
    y = state
    s = state.time
    while True:
        s += rng.exponential(1.0 / bound)
        if s >= cfg.horizon:
            return NextJump(cfg.horizon, evolve(y, cfg.horizon, cfg.dynamics, diagnostics), True)
        y = evolve(y, s, cfg.dynamics, diagnostics)
        psi = cfg.psi(y)
        if psi > bound * (1.0 + 1e-12):
            raise BoundViolation(f"rate {psi} exceeds thinning bound {bound} at t={s}")
        if rng.random() <= psi / bound:
            return NextJump(s, y, False)


def next_jump(state: ModelState, cfg: PathConfig, rng: np.random.Generator,
              diagnostics: Diagnostics | None = None) -> NextJump:
    if cfg.engine == "exact":
        return exact_next_jump(state, cfg, rng, diagnostics=diagnostics)
    return approx_next_jump(state, cfg, rng, ApproxFlow(state, cfg, diagnostics))


@dataclass(frozen=True, eq=False)
class JumpRecord:
    time: float
    kind: str
    slot: int
    params: AccidentParams
    accidents: tuple  # slot list after the jump


@dataclass(eq=False)
class PathResult:
    initial: ModelState
    jumps: list = field(default_factory=list)
    post_states: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final: ModelState | None = None
    diagnostics: Diagnostics | None = None

    def segment_start(self, t: float) -> ModelState:
        """Post-jump state of the last jump at or before ``t``."""
        start = self.initial
        for rec, post in zip(self.jumps, self.post_states):
            if rec.time <= t:
                start = post
        return start


def simulate_path(cfg: PathConfig, rng: np.random.Generator,
                  diagnostics: Diagnostics | None = None) -> PathResult:
    """Alternate jump-time search and kernel draws until the horizon.

    Snapshots at requested times are obtained by evolving the post-jump state
    of the current segment, so X(t) = flow_{t - T_n}(Y_n) on [T_n, T_{n+1}).
    """
    dyn = cfg.dynamics
    state = cfg.initial_state()
    result = PathResult(initial=state, diagnostics=diagnostics)
    pending = sorted(t for t in cfg.snapshot_times if 0.0 <= t <= cfg.horizon)
    segment = state

    def flush(until: float, inclusive: bool):
        while pending and (pending[0] < until or (inclusive and pending[0] <= until)):
            ts = pending.pop(0)
            result.snapshots[ts] = evolve(segment, ts, dyn).rho

    while state.time < cfg.horizon:
        nj = next_jump(state, cfg, rng, diagnostics)
        if nj.censored:
            flush(cfg.horizon, inclusive=True)
            state = nj.state
            break
        flush(nj.time, inclusive=False)
        cap = dyn.capacity(nj.state.accidents)
        post, event = sample_jump(nj.state, cap, cfg.beta, cfg.rates, cfg.size_dist,
                                  cfg.cap_dist, rng, dyn.grid)
        result.jumps.append(JumpRecord(nj.time, event.kind, event.slot, event.params,
                                       post.accidents))
        result.post_states.append(post)
        state = segment = post
    flush(cfg.horizon, inclusive=True)
    result.final = state
    return result
