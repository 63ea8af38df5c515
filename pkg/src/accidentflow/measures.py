"""Position, size and severity measures, the jump rate, and the jump kernel.

Accident positions are drawn from the mixture

    beta * mu_F + (1 - beta) * mu_D

where mu_F has density proportional to the local flux a(x) f(rho) (uniform
within each cell) and mu_D is the normalized positive part of the discrete
derivative of rho: atoms (rho_i - rho_{i-1})_+ at the cell interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capacity import AccidentParams, CapacityField
from .grid import Grid
from .solver import ModelState, lwr_flux


class ZeroFlux(ValueError):
    """The total flux vanishes, so the flux-based position measure is undefined."""


class DegenerateState(ValueError):
    """Neither the flux part nor the up-jump part of the position measure exists."""


class NoEvent(ValueError):
    """No accident can occur and none can be resolved."""


@dataclass(frozen=True)
class RateParams:
    flux: float
    upjump: float
    resolve: float

    def __post_init__(self):
        for name in ("flux", "upjump", "resolve"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"rate {name} must be positive")


@dataclass(frozen=True)
class SizeDist:
    """Uniform distribution of accident sizes on [low, high]."""

    low: float
    high: float

    def __post_init__(self):
        if not 0.0 < self.low <= self.high:
            raise ValueError("need 0 < size low <= high")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class CapDist:
    """Finite distribution of capacity drops."""

    values: tuple
    weights: tuple
    max_drop: float = 0.999

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("capacity drops and weights must have equal nonzero length")
        if not self.max_drop < 1.0:
            raise ValueError("max_drop must be < 1")
        if any(not 0.0 < v <= self.max_drop for v in self.values):
            raise ValueError(f"capacity drops must lie in (0, {self.max_drop}]")
        if any(w < 0.0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("capacity drop weights must be nonnegative and sum to 1")

    def sample(self, rng: np.random.Generator) -> float:
        k = np.searchsorted(np.cumsum(self.weights), rng.random(), side="right")
        return self.values[min(k, len(self.values) - 1)]


def flux_measure(rho, capacity: CapacityField):
    """Cell weights of the flux measure (a density, uniform per cell) and C_F."""
    flux = capacity.values * lwr_flux(np.asarray(rho))
    total = float(np.sum(flux) * capacity.dx)
    if total <= 0.0:
        raise ZeroFlux("total flux is zero")
    return flux / total, total


def total_flux(rho, capacity: CapacityField) -> float:
    """C_F, or 0 when the flux vanishes."""
    try:
        return flux_measure(rho, capacity)[1]
    except ZeroFlux:
        return 0.0


def upjump_measure(rho):
    """Atoms (rho_i - rho_{i-1})_+ at interface i - 1/2 (index 0 is the wrap) and their sum."""
    rho = np.asarray(rho)
    atoms = np.maximum(rho - np.roll(rho, 1), 0.0)
    return atoms, float(np.sum(atoms))


@dataclass(frozen=True, eq=False)
class PositionMeasure:
    """Mixture of a cellwise-uniform flux part and interface atoms.

    ``beta`` is the effective weight of the flux part after degenerate parts
    have been folded into the other one.
    """

    grid: Grid
    beta: float
    cell_probs: np.ndarray | None
    atom_probs: np.ndarray | None

    def flux_mass(self, lo: float, hi: float) -> float:
        """Mass the flux part assigns to [lo, hi), before mixing."""
        if self.cell_probs is None:
            return 0.0
        left = self.grid.interfaces
        overlap = np.clip(np.minimum(left + self.grid.dx, hi) - np.maximum(left, lo), 0.0, None)
        return float(np.sum(self.cell_probs * overlap / self.grid.dx))

    def upjump_mass(self, lo: float, hi: float) -> float:
        if self.atom_probs is None:
            return 0.0
        x = self.grid.interfaces
        return float(np.sum(self.atom_probs[(x >= lo) & (x < hi)]))

    def mass(self, lo: float, hi: float) -> float:
        return self.beta * self.flux_mass(lo, hi) + (1.0 - self.beta) * self.upjump_mass(lo, hi)


def position_measure(rho, capacity: CapacityField, beta: float, grid: Grid) -> PositionMeasure:
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    try:
        weights, _ = flux_measure(rho, capacity)
        cell_probs = weights * capacity.dx
    except ZeroFlux:
        cell_probs = None
    atoms, up = upjump_measure(rho)
    atom_probs = atoms / up if up > 0.0 else None

    if cell_probs is None and atom_probs is None:
        raise DegenerateState("no flux and no increasing part in the density")
    if atom_probs is None:
        beta = 1.0
    elif cell_probs is None:
        beta = 0.0
    return PositionMeasure(grid, float(beta), cell_probs, atom_probs)


def _pick(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(probs) - 1))


def sample_position(measure: PositionMeasure, rng: np.random.Generator) -> float:
    """Composition sampling: choose the component, then a cell or an interface."""
    grid = measure.grid
    if rng.random() < measure.beta:
        i = _pick(measure.cell_probs, rng.random())
        return float(grid.interfaces[i] + grid.dx * rng.random())
    i = _pick(measure.atom_probs, rng.random())
    return float(grid.interfaces[i])


def active_count(accidents) -> int:
    return sum(1 for acc in accidents if acc.drop > 0.0)


def first_free_slot(accidents) -> int:
    """Smallest 1-based slot index whose drop is zero (one past the end if all are used)."""
    for i, acc in enumerate(accidents, start=1):
        if acc.drop == 0.0:
            return i
    return len(accidents) + 1


def accident_rate(rho, capacity: CapacityField, rates: RateParams) -> float:
    """Intensity of new accidents: flux part plus up-jump part."""
    _, up = upjump_measure(rho)
    return rates.flux * total_flux(rho, capacity) + rates.upjump * up


def rate(state: ModelState, capacity: CapacityField, rates: RateParams) -> float:
    """Total jump intensity including resolution of the active accidents."""
    return (accident_rate(state.rho, capacity, rates)
            + rates.resolve * active_count(state.accidents))


@dataclass(frozen=True)
class JumpEvent:
    kind: str  # "accident" or "resolution"
    slot: int  # 1-based
    params: AccidentParams


def sample_jump(state: ModelState, capacity: CapacityField, beta: float, rates: RateParams,
                size_dist: SizeDist, cap_dist: CapDist, rng: np.random.Generator,
                grid: Grid):
    """Draw the post-jump state. Returns ``(new_state, JumpEvent)``.

    A new accident goes to the first free slot with probability
    lam_A / (lam_R N + lam_A); otherwise a uniformly chosen active accident is
    resolved by zeroing its drop. The density is carried over untouched.
    """
    lam_a = accident_rate(state.rho, capacity, rates)
    active = [i for i, acc in enumerate(state.accidents) if acc.active]
    lam_r = rates.resolve * len(active)
    if lam_a + lam_r <= 0.0:
        raise NoEvent("zero accident rate and no active accidents")

    slots = list(state.accidents)
    if rng.random() * (lam_r + lam_a) < lam_a:
        measure = position_measure(state.rho, capacity, beta, grid)
        acc = AccidentParams(sample_position(measure, rng), size_dist.sample(rng),
                             cap_dist.sample(rng))
        slot = first_free_slot(slots)
        if slot > len(slots):
            slots.append(acc)
        else:
            slots[slot - 1] = acc
        event = JumpEvent("accident", slot, acc)
    else:
        k = active[int(rng.integers(len(active)))]
        old = slots[k]
        slots[k] = AccidentParams(old.position, old.size, 0.0)
        event = JumpEvent("resolution", k + 1, old)
    return ModelState(tuple(slots), state.rho, state.time), event
