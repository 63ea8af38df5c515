"""First-jump law along the deterministic flow, ECDFs, KS distance, histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pdp import PathConfig
from .solver import lxf_step


class EmptySample(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CdfTable:
    """Piecewise linear CDF on a nondecreasing time grid.

    A repeated knot ``t`` encodes a jump at ``t``; the table is right-continuous.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or len(t) < 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) < 0.0):
            raise ValueError("times must be nondecreasing")
        if np.any(np.diff(v) < 0.0) or v[0] < 0.0 or v[-1] > 1.0:
            raise ValueError("CDF values must be nondecreasing within [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def _interp(self, t, k):
        # linear on [times[k], times[k+1]] for valid k, flat outside the table
        t = np.asarray(t, dtype=float)
        n = len(self.times)
        out = np.where(k < 0, 0.0, self.values[-1])
        inner = (k >= 0) & (k < n - 1)
        kk = k[inner]
        t0, t1 = self.times[kk], self.times[kk + 1]
        v0, v1 = self.values[kk], self.values[kk + 1]
        frac = (t[inner] - t0) / (t1 - t0)
        out = np.array(out, dtype=float)
        out[inner] = v0 + frac * (v1 - v0)
        return out

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right") - 1
        if np.ndim(t) == 0:
            return float(self._interp(t[None], np.atleast_1d(k))[0])
        return self._interp(t, k)

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="left") - 1
        if np.ndim(t) == 0:
            return float(self._interp(t[None], np.atleast_1d(k))[0])
        return self._interp(t, k)

    def inverse(self, u):
        """Generalized inverse on [0, F(t_max)]; larger u map to +inf (censored)."""
        u = np.asarray(u, dtype=float)
        # first knot where the table reaches u, interpolated linearly within the cell
        k = np.searchsorted(self.values, u, side="left")
        out = np.full(u.shape, np.inf)
        ok = k < len(self.values)
        k = np.clip(k[ok], 1, len(self.values) - 1)
        v0, v1 = self.values[k - 1], self.values[k]
        t0, t1 = self.times[k - 1], self.times[k]
        frac = np.where(v1 > v0, (u[ok] - v0) / np.where(v1 > v0, v1 - v0, 1.0), 1.0)
        out[ok] = t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)
        return out


@dataclass(frozen=True, eq=False)
class FirstJumpLaw:
    """Rate, integrated rate, CDF and pdf of the first jump on the PDE time grid."""

    times: np.ndarray
    rates: np.ndarray
    integral: np.ndarray

    @property
    def cdf(self) -> CdfTable:
        return CdfTable(self.times, -np.expm1(-self.integral))

    @property
    def pdf(self) -> np.ndarray:
        return self.rates * np.exp(-self.integral)

    @property
    def survival(self) -> float:
        return float(np.exp(-self.integral[-1]))


def first_jump_law(cfg: PathConfig) -> FirstJumpLaw:
    """Integrate psi along the flow from the initial state with the left rectangle rule.

    The quadrature nodes are the CFL time levels of the solver:
    I_k = I_{k-1} + dt_k * psi(t_{k-1}), F(t_k) = 1 - exp(-I_k).
    """
    dyn = cfg.dynamics
    state = cfg.initial_state()
    cap = dyn.capacity(state.accidents)
    dt = dyn.timestep(cap)
    a = cap.values
    dx = dyn.grid.dx
    rho = np.array(state.rho)
    t = 0.0
    times, rates, integral = [0.0], [cfg.psi(state)], [0.0]
    while t < cfg.horizon:
        h = cfg.horizon - t
        if h > dt * (1.0 + 1e-12):
            h = dt
        rho = lxf_step(rho, a, h / dx)
        t = cfg.horizon if h == cfg.horizon - t else t + h
        integral.append(integral[-1] + h * rates[-1])
        rates.append(cfg.psi(state.replace(rho=rho, time=t)))
        times.append(t)
    return FirstJumpLaw(np.array(times), np.array(rates), np.array(integral))


def analytic_first_jump_cdf(cfg: PathConfig) -> CdfTable:
    return first_jump_law(cfg).cdf


def analytic_first_jump_pdf(cfg: PathConfig):
    """``(times, g)`` with g(t_k) = psi(t_k) exp(-I_k)."""
    law = first_jump_law(cfg)
    return law.times, law.pdf


@dataclass(frozen=True, eq=False)
class Ecdf:
    """Right-continuous ECDF; ``n_total`` may exceed the sample count for censored data."""

    points: np.ndarray
    n_total: int

    @property
    def heights(self) -> np.ndarray:
        return np.arange(1, len(self.points) + 1) / self.n_total

    def __call__(self, t):
        return np.searchsorted(self.points, t, side="right") / self.n_total

    def left_limit(self, t):
        return np.searchsorted(self.points, t, side="left") / self.n_total


def ecdf(samples, n_total: int | None = None) -> Ecdf:
    pts = np.sort(np.asarray(samples, dtype=float).ravel())
    if pts.size == 0:
        raise EmptySample("ECDF of an empty sample")
    n = pts.size if n_total is None else int(n_total)
    if n < pts.size:
        raise ValueError("n_total smaller than the number of samples")
    return Ecdf(pts, n)


def ks_distance(empirical: Ecdf, cdf) -> float:
    """sup_t |ECDF(t) - F(t)| for a piecewise linear table or a continuous callable.

    Between sample points and table knots the difference is monotone, so both
    one-sided limits at those points give the exact supremum.
    """
    left = getattr(cdf, "left_limit", cdf)
    x = empirical.points
    if isinstance(cdf, CdfTable):
        x = np.concatenate([x, cdf.times])
    d = max(np.max(np.abs(empirical(x) - cdf(x))),
            np.max(np.abs(empirical.left_limit(x) - left(x))))
    return float(d)


def ks_critical_value(n: int, alpha: float = 0.05) -> float:
    """Asymptotic one-sample KS critical value sqrt(-ln(alpha/2) / 2) / sqrt(n)."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


def histogram(samples, edges):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySample("histogram of an empty sample")
    counts, _ = np.histogram(samples, bins=np.asarray(edges, dtype=float))
    return counts


def exponential_table(rate: float, horizon: float, n: int = 2001) -> CdfTable:
    t = np.linspace(0.0, horizon, n)
    return CdfTable(t, -np.expm1(-rate * t))


def ks_two_sample(a, b) -> float:
    """sup_t |ECDF_a(t) - ECDF_b(t)|."""
    ea, eb = ecdf(a), ecdf(b)
    pts = np.concatenate([ea.points, eb.points])
    return float(np.max(np.abs(ea(pts) - eb(pts))))
