"""Space-dependent road capacity a(x) built from a road profile and accidents.

The capacity multiplies the LWR flux, F(x, rho) = a(x) f(rho), where

    a(x) = c_road(x) * prod_i c_a(x, p_i, s_i, c_i)

``c_road`` is piecewise constant and each accident factor is ``1 - c`` on the
interval ``[p - s/2, p + s/2)`` (taken modulo the periodic road) and 1
elsewhere. Both can optionally be convolved with a compactly supported bump
kernel so that a(x) is smooth.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

# Composite Gauss-Legendre rule for bump-kernel integrals: a single panel loses
# accuracy near the flat ends of the kernel, four panels of 32 nodes reach ~1e-13.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_PANELS = 4


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def _bump_integral(lo, hi):
    # integral of the unnormalized bump over [lo, hi] with -1 <= lo <= hi <= 1
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = (hi - lo) / _GL_PANELS
    total = np.zeros(np.broadcast(lo, hi).shape)
    for k in range(_GL_PANELS):
        mid = lo + (k + 0.5) * width
        pts = mid[..., None] + 0.5 * width[..., None] * _GL_NODES
        total = total + 0.5 * width * np.sum(_GL_WEIGHTS * _bump(pts), axis=-1)
    return total


_BUMP_MASS = float(_bump_integral(np.array(-1.0), np.array(1.0)))


def bump_cdf(u):
    """Cumulative mass of the unit bump kernel on ``(-inf, u]``."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    # integrate from the nearer end so K(-u) = 1 - K(u) holds to roundoff
    left = _bump_integral(np.full_like(u, -1.0), np.minimum(u, 0.0)) / _BUMP_MASS
    right = _bump_integral(np.maximum(u, 0.0), np.full_like(u, 1.0)) / _BUMP_MASS
    return np.where(u <= 0.0, left, 1.0 - right)


def bump_density(x, epsilon: float):
    """Normalized bump kernel M_eps with support [-eps, eps]."""
    return _bump(np.asarray(x, dtype=float) / epsilon) / (_BUMP_MASS * epsilon)


@dataclass(frozen=True)
class Mollifier:
    """Smoothing applied to step functions; ``mode`` is ``"sharp"`` or ``"smooth"``."""

    mode: str = "sharp"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.mode not in ("sharp", "smooth"):
            raise ValueError(f"unknown mollifier mode {self.mode!r}")
        if self.mode == "smooth" and not self.epsilon > 0.0:
            raise ValueError("smooth mollifier needs epsilon > 0")

    @property
    def smooth(self) -> bool:
        return self.mode == "smooth"


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on the periodic interval [x_0, x_M)."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if len(self.values) != len(b) - 1 or len(b) < 2:
            raise ValueError("need len(values) == len(breakpoints) - 1 >= 1")
        if np.any(np.diff(b) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def period(self) -> float:
        return self.breakpoints[-1] - self.breakpoints[0]

    def wrap(self, x):
        x0 = self.breakpoints[0]
        return x0 + np.mod(np.asarray(x, dtype=float) - x0, self.period)

    def __call__(self, x):
        b = np.asarray(self.breakpoints, dtype=float)
        idx = np.searchsorted(b, self.wrap(x), side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]

    def mollified(self, x, epsilon: float):
        """Convolution with the bump kernel of half-width ``epsilon``, periodic."""
        if epsilon >= self.period:
            raise ValueError("mollifier support must be shorter than the period")
        x = self.wrap(x)
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        out = np.zeros(x.shape)
        for shift in (-self.period, 0.0, self.period):
            lo = b[:-1] + shift
            hi = b[1:] + shift
            for m in range(len(v)):
                near = (x + epsilon > lo[m]) & (x - epsilon < hi[m])
                if not np.any(near):
                    continue
                xs = x[near]
                w = bump_cdf((xs - lo[m]) / epsilon) - bump_cdf((xs - hi[m]) / epsilon)
                out[near] += v[m] * w
        return out


def mollify(step: StepFunction, mollifier: Mollifier, x):
    """Evaluate ``step`` at ``x``, smoothed according to ``mollifier``."""
    if mollifier.smooth:
        return step.mollified(x, mollifier.epsilon)
    return step(x)


@dataclass(frozen=True)
class RoadProfile:
    breakpoints: tuple
    values: tuple
    floor: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.floor > 0.0:
            raise ValueError("capacity floor must be positive")
        if min(self.values) < self.floor:
            raise ValueError(f"road capacities must be >= floor {self.floor}")
        if self.values[0] != self.values[-1]:
            raise ValueError("first and last road segments must have equal capacity")
        if abs(self.breakpoints[0] + self.breakpoints[-1]) > 1e-12:
            raise ValueError("road must span [-L, L]")
        StepFunction(self.breakpoints, self.values)

    @property
    def half_length(self) -> float:
        return self.breakpoints[-1]

    def step(self) -> StepFunction:
        return StepFunction(self.breakpoints, self.values)


@dataclass(frozen=True)
class AccidentParams:
    """One accident slot; ``drop == 0`` marks an inactive slot."""

    position: float
    size: float
    drop: float

    def __post_init__(self):
        if not 0.0 <= self.drop < 1.0:
            raise ValueError(f"capacity drop must lie in [0, 1), got {self.drop}")
        if self.drop > 0.0 and not self.size > 0.0:
            raise ValueError("active accident needs a positive size")

    @property
    def active(self) -> bool:
        return self.drop > 0.0

    def factor(self, half_length: float) -> StepFunction:
        """Accident factor ``1 - c`` on the affected interval, wrapped onto [-L, L)."""
        L = half_length
        keep = 1.0 - self.drop
        if self.size >= 2 * L:
            return StepFunction((-L, L), (keep,))
        lo = -L + (self.position - 0.5 * self.size + L) % (2 * L)
        hi = lo + self.size
        if hi <= L:
            pts = [(-L, 1.0), (lo, keep), (hi, 1.0)]
        else:
            pts = [(-L, keep), (hi - 2 * L, 1.0), (lo, keep)]
        # drop zero-length segments
        bps, vals = [], []
        for (x, v), nxt in zip(pts, [p[0] for p in pts[1:]] + [L]):
            if nxt > x:
                bps.append(x)
                vals.append(v)
        return StepFunction(tuple(bps) + (L,), tuple(vals))


@dataclass(frozen=True, eq=False)
class CapacityField:
    """Capacity values at cell centers with discrete derivative norms.

    ``sup_deriv`` is the largest one-sided difference quotient, which bounds
    the centered one as well. ``l1_second`` is sum |a_{i+1} - 2 a_i + a_{i-1}| / dx.
    """

    values: np.ndarray
    dx: float
    sup: float = field(init=False)
    sup_deriv: float = field(init=False)
    l1_deriv: float = field(init=False)
    l1_second: float = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.values, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "values", a)
        if np.any(a <= 0.0):
            raise ValueError("capacity must stay strictly positive")
        da = np.roll(a, -1) - a
        d2a = np.roll(a, -1) - 2 * a + np.roll(a, 1)
        object.__setattr__(self, "sup", float(np.max(np.abs(a))))
        object.__setattr__(self, "sup_deriv", float(np.max(np.abs(da))) / self.dx)
        object.__setattr__(self, "l1_deriv", float(np.sum(np.abs(da))))
        object.__setattr__(self, "l1_second", float(np.sum(np.abs(d2a))) / self.dx)


def capacity_at(road: RoadProfile, accidents, mollifier: Mollifier, x):
    """Continuous capacity a(x) at arbitrary road coordinates."""
    x = np.asarray(x, dtype=float)
    out = mollify(road.step(), mollifier, x)
    for acc in accidents:
        if acc.active:
            out = out * mollify(acc.factor(road.half_length), mollifier, x)
    return out


@functools.lru_cache(maxsize=256)
def total_capacity(road: RoadProfile, accidents: tuple, mollifier: Mollifier,
                   grid: Grid) -> CapacityField:
    """Capacity field on the cell centers of ``grid`` for the active accidents."""
    if abs(grid.half_length - road.half_length) > 1e-12:
        raise ValueError("grid and road disagree on the domain length")
    values = capacity_at(road, tuple(accidents), mollifier, grid.centers)
    return CapacityField(values, grid.dx)
