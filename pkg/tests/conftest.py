from pathlib import Path

import numpy as np
import pytest

from accidentflow.capacity import Mollifier, RoadProfile
from accidentflow.config import load_config
from accidentflow.grid import Grid
from accidentflow.measures import CapDist, RateParams, SizeDist
from accidentflow.pdp import PathConfig
from accidentflow.solver import Dynamics

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

_acceptance_lines = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""
    def _report(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS


@pytest.fixture(scope="session")
def bottleneck():
    return load_config(CONFIGS / "bottleneck.yaml")


@pytest.fixture(scope="session")
def constant_rate():
    return load_config(CONFIGS / "constant_rate.yaml")


@pytest.fixture(scope="session")
def smooth_convergence():
    return load_config(CONFIGS / "smooth_convergence.yaml")


def uniform_path_config(n_cells=20, rho=0.5, flux=2.0, horizon=10.0, **kw):
    """Uniform unit road, constant density: psi = flux * 2L * f(rho) until the first jump."""
    grid = Grid(1.0, n_cells)
    dyn = Dynamics(grid, RoadProfile((-1.0, 1.0), (1.0,)), Mollifier())
    return PathConfig(dyn, np.full(n_cells, rho), horizon, RateParams(flux, 0.1, 0.5),
                      SizeDist(0.2, 1.0), CapDist((0.5, 0.99), (0.5, 0.5)), **kw)
