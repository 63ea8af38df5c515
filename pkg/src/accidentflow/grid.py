"""Uniform periodic grid on [-L, L]."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    half_length: float
    n_cells: int

    def __post_init__(self):
        if not self.half_length > 0.0:
            raise ValueError("half_length must be positive")
        if int(self.n_cells) != self.n_cells or self.n_cells < 3:
            raise ValueError("need an integer cell count >= 3")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_cells

    @functools.cached_property
    def interfaces(self) -> np.ndarray:
        """x_{i-1/2} for i = 0..N-1; index 0 is the wrap interface at -L."""
        x = -self.half_length + self.dx * np.arange(self.n_cells)
        x.setflags(write=False)
        return x

    @functools.cached_property
    def centers(self) -> np.ndarray:
        x = -self.half_length + self.dx * (np.arange(self.n_cells) + 0.5)
        x.setflags(write=False)
        return x

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.half_length, self.n_cells * factor)


def cell_means(func, grid: Grid, order: int = 8) -> np.ndarray:
    """Cell averages (1/dx) * integral of ``func`` over each cell, by Gauss-Legendre."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    pts = grid.centers[:, None] + 0.5 * grid.dx * nodes
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    return 0.5 * vals @ weights


def step_cell_means(breakpoints, values, grid: Grid) -> np.ndarray:
    """Exact cell averages of a piecewise constant function on [-L, L)."""
    b = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    # cumulative integral at breakpoints, then linear interpolation is exact
    cum = np.concatenate([[0.0], np.cumsum(v * np.diff(b))])
    edges = np.concatenate([grid.interfaces, [grid.half_length]])
    primitive = np.interp(edges, b, cum)
    means = np.diff(primitive) / grid.dx
    # cells inside one segment take the value itself, free of cancellation error
    seg = np.clip(np.searchsorted(b, edges, side="right") - 1, 0, len(v) - 1)
    inside = (seg[:-1] == seg[1:]) | (edges[1:] == b[np.minimum(seg[:-1] + 1, len(b) - 1)])
    means[inside] = v[seg[:-1][inside]]
    return means
