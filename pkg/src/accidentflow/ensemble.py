"""Independent random streams per path and (optionally parallel) ensembles.

Path ``i`` of a run with master seed ``s`` always draws from a Philox stream
keyed by ``SeedSequence(s, spawn_key=(i,))``, so results do not depend on the
number of workers or on scheduling order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measures import sample_jump
from .solver import Diagnostics
from .pdp import (ApproxFlow, BoundViolation, PathConfig, PathResult, approx_next_jump,
                  exact_next_jump, simulate_path)


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _blocks(n: int, workers: int):
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [range(bounds[k], bounds[k + 1]) for k in range(workers) if bounds[k] < bounds[k + 1]]


def _map_blocks(func, cfg, seed, n, workers):
    workers = max(1, min(int(workers), n)) if n else 1
    blocks = _blocks(n, workers)
    if workers == 1:
        parts = [func(cfg, seed, blk) for blk in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, [cfg] * len(blocks), [seed] * len(blocks), blocks))
    # blocks are contiguous and returned in submission order
    return [item for part in parts for item in part]


@dataclass(frozen=True, eq=False)
class FirstJumpSamples:
    times: np.ndarray  # +inf where censored
    positions: np.ndarray  # nan where censored
    censored: np.ndarray
    discarded: int = 0

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def observed_times(self) -> np.ndarray:
        return self.times[~self.censored]

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored)) if self.n else 0.0


def _first_jump_block(cfg: PathConfig, seed: int, indices):
    start = cfg.initial_state()
    flow = ApproxFlow(start, cfg) if cfg.engine == "approx" else None
    dyn = cfg.dynamics
    out = []
    for i in indices:
        rng = path_rng(seed, i)
        try:
            if flow is not None:
                nj = approx_next_jump(start, cfg, rng, flow)
            else:
                nj = exact_next_jump(start, cfg, rng)
        except BoundViolation:
            out.append((np.nan, np.nan, False, True))
            continue
        if nj.censored:
            out.append((np.inf, np.nan, True, False))
            continue
        cap = dyn.capacity(nj.state.accidents)
        _, event = sample_jump(nj.state, cap, cfg.beta, cfg.rates, cfg.size_dist,
                               cfg.cap_dist, rng, dyn.grid)
        pos = event.params.position if event.kind == "accident" else np.nan
        out.append((nj.time, pos, False, False))
    return out


def first_jump_samples(cfg: PathConfig, n: int, seed: int, workers: int = 1) -> FirstJumpSamples:
    """First jump time and, if it is an accident, its position for ``n`` paths."""
    rows = _map_blocks(_first_jump_block, cfg, seed, n, workers)
    discarded = sum(1 for r in rows if r[3])
    rows = [r for r in rows if not r[3]]
    times = np.array([r[0] for r in rows], dtype=float)
    positions = np.array([r[1] for r in rows], dtype=float)
    censored = np.array([r[2] for r in rows], dtype=bool)
    return FirstJumpSamples(times, positions, censored, discarded)


def _path_block(cfg: PathConfig, seed: int, indices):
    out = []
    for i in indices:
        try:
            out.append((i, simulate_path(cfg, path_rng(seed, i), Diagnostics())))
        except BoundViolation as exc:
            out.append((i, exc))
    return out


def simulate_ensemble(cfg: PathConfig, n: int, seed: int, workers: int = 1):
    """List of ``(index, PathResult | BoundViolation)`` ordered by path index."""
    return _map_blocks(_path_block, cfg, seed, n, workers)


__all__ = ["FirstJumpSamples", "PathResult", "first_jump_samples", "path_rng",
           "simulate_ensemble"]
