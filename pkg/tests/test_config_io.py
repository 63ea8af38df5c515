import numpy as np
import pytest

from accidentflow import io
from accidentflow.capacity import AccidentParams
from accidentflow.config import ConfigError, SimConfig, dump_config, load_config, parse_config
from accidentflow.pdp import JumpRecord, PathResult
from accidentflow.solver import ModelState

MINIMAL = """\
seed: 3
domain:
  half_length: 1
  cells: 10
time:
  horizon: 2
road:
  breakpoints: [-1, 1]
  values: [1]
"""


def test_bottleneck_values(bottleneck):
    cfg = bottleneck
    assert cfg.cells == 1000 and cfg.half_length == 10.0
    assert cfg.grid().dx == pytest.approx(1 / 50)
    assert cfg.rate_flux == 1 / 105 and cfg.dt_ref == 1 / 20
    pcfg = cfg.path_config()
    assert pcfg.dynamics.timestep(pcfg.dynamics.capacity(())) == pytest.approx(1 / 350)
    np.testing.assert_array_equal(pcfg.rho0, 0.4)


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == 3 and cfg.beta == 0.0 and cfg.engine == "approx"
    assert cfg.initial_breakpoints == (-1.0, 1.0)


def test_dump_parse_roundtrip(bottleneck, constant_rate, smooth_convergence):
    for cfg in (bottleneck, constant_rate, smooth_convergence):
        assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text, line, fragment", [
    (MINIMAL.replace("horizon: 2", "horizon: 2\n  acceptance: 0"), 7, "acceptance"),
    (MINIMAL.replace("horizon: 2", "horizn: 2"), 6, "unknown key 'time.horizn'"),
    (MINIMAL + "beta: 1.5\n", 10, "beta"),
    (MINIMAL.replace("cells: 10", "cells: ten"), 4, "cells"),
    (MINIMAL + "rates:\n  flux: 0\n", 10, "rate flux"),
    (MINIMAL.replace("breakpoints: [-1, 1]", "breakpoints: [-1, 0, 1]").replace(
        "values: [1]", "values: [1, 2]"), 7, "equal capacity"),
    (MINIMAL + "extra: 1\n", 10, "unknown key 'extra'"),
    (MINIMAL.replace("domain:", "domain:\n  cfl_factor: 1.2"), 3, "cfl_factor"),
])
def test_config_errors_carry_lines(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.yaml")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"cfg.yaml:{line}:")


def test_fraction_strings():
    cfg = parse_config(MINIMAL + "rates:\n  flux: 1/105\n")
    assert cfg.rate_flux == 1 / 105
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "rates:\n  flux: 1/0\n")


def test_overrides_revalidate(bottleneck):
    assert bottleneck.with_overrides(beta=0.5, seed=None).beta == 0.5
    with pytest.raises(ConfigError):
        bottleneck.with_overrides(beta=-0.1)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_table_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.random(100) * 1e-7
    y = rng.standard_normal(100) * 1e12
    path = io.write_table(tmp_path / "t.csv", ("x", "y"), zip(x, y))
    cols = io.read_columns(path)
    assert cols["x"].tobytes() == x.tobytes() and cols["y"].tobytes() == y.tobytes()


def test_jump_csv_roundtrip(tmp_path):
    acc = AccidentParams(0.1 + 0.2, 0.7, 0.99)
    rec = [JumpRecord(1 / 3, "accident", 1, acc, (acc,)),
           JumpRecord(2 / 3, "resolution", 1, acc, (AccidentParams(acc.position, acc.size, 0.0),))]
    res = PathResult(initial=ModelState((), np.zeros(2)), jumps=rec)
    path = io.write_jumps(tmp_path / "j.csv", [(4, res)])
    rows = io.read_jumps(path)
    assert rows == [(4, 1 / 3, "accident", 1, 0.1 + 0.2, 0.7, 0.99),
                    (4, 2 / 3, "resolution", 1, 0.1 + 0.2, 0.7, 0.99)]


def test_bad_jump_header(tmp_path):
    path = io.write_table(tmp_path / "j.csv", ("a", "b"), [(1, 2)])
    with pytest.raises(ValueError):
        io.read_jumps(path)


def test_snapshot_and_histogram_roundtrip(tmp_path):
    x, rho = np.linspace(-1, 1, 7), np.linspace(0, 1, 7) ** 3
    cols = io.read_columns(io.write_snapshot(tmp_path / "s.csv", x, rho))
    assert cols["x_center"].tobytes() == x.tobytes() and cols["rho"].tobytes() == rho.tobytes()
    edges = np.array([0.0, 0.5, 1.0])
    cols = io.read_columns(io.write_histogram(tmp_path / "h.csv", edges, [3, 4]))
    np.testing.assert_array_equal(cols["count"], [3, 4])
    np.testing.assert_array_equal(cols["bin_left"], [0.0, 0.5])


def test_default_config_is_valid():
    SimConfig().validate()
