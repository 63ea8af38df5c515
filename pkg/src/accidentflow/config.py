"""YAML experiment configuration with strict, line-aware validation.

Every number may also be given as a fraction string such as ``"1/105"``.
Unknown keys are rejected, since a misspelled rate constant would otherwise be
silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import yaml

from .capacity import Mollifier, RoadProfile
from .grid import Grid
from .measures import CapDist, RateParams, SizeDist
from .pdp import PathConfig
from .solver import Dynamics, InitialProfile


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


SCHEMA = {
    "seed": None,
    "beta": None,
    "domain": {"half_length": None, "cells": None, "cfl_factor": None},
    "time": {"horizon": None, "dt_ref": None, "acceptance": None, "snapshots": None},
    "road": {"breakpoints": None, "values": None, "floor": None},
    "mollifier": {"mode": None, "epsilon": None},
    "initial": {"constant": None, "breakpoints": None, "values": None, "mollify": None},
    "rates": {"flux": None, "upjump": None, "resolve": None},
    "accidents": {"size_min": None, "size_max": None, "drops": None, "drop_weights": None,
                  "max_drop": None},
    "engine": {"kind": None, "bound": None},
    "run": {"samples": None, "paths": None, "workers": None, "position_bins": None,
            "time_bins": None},
    "convergence": {"levels": None, "horizon": None, "cells": None},
    "output": {"dir": None},
}


@dataclass(frozen=True)
class SimConfig:
    half_length: float = 10.0
    cells: int = 1000
    cfl_factor: float = 1.0
    horizon: float = 60.0
    dt_ref: float = 0.05
    acceptance: float = 1.0
    snapshots: tuple = ()
    road_breakpoints: tuple = (-10.0, 10.0)
    road_values: tuple = (1.0,)
    road_floor: float = 1e-3
    mollifier_mode: str = "sharp"
    mollifier_epsilon: float = 0.0
    initial_breakpoints: tuple | None = None
    initial_values: tuple = (0.4,)
    initial_mollify: bool = False
    rate_flux: float = 1.0 / 105.0
    rate_upjump: float = 0.1
    rate_resolve: float = 0.5
    beta: float = 0.0
    size_min: float = 0.2
    size_max: float = 1.0
    drops: tuple = (0.5, 0.99)
    drop_weights: tuple = (0.5, 0.5)
    max_drop: float = 0.99
    engine: str = "approx"
    bound: float | None = None
    seed: int = 0
    samples: int = 10000
    paths: int = 1
    workers: int = 1
    position_bins: int = 40
    time_bins: int = 60
    convergence_levels: int = 4
    convergence_horizon: float = 1.0
    convergence_cells: int | None = None
    output_dir: str = "out"
    lines: dict = field(default=None, compare=False, repr=False)
    source: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.initial_breakpoints is None:
            object.__setattr__(self, "initial_breakpoints",
                               (-self.half_length, self.half_length))

    # -- derived objects -------------------------------------------------
    def grid(self, cells: int | None = None) -> Grid:
        return Grid(self.half_length, cells or self.cells)

    def mollifier(self) -> Mollifier:
        return Mollifier(self.mollifier_mode, self.mollifier_epsilon)

    def road(self) -> RoadProfile:
        return RoadProfile(self.road_breakpoints, self.road_values, self.road_floor)

    def dynamics(self, cells: int | None = None) -> Dynamics:
        return Dynamics(self.grid(cells), self.road(), self.mollifier(), self.cfl_factor)

    def initial_profile(self) -> InitialProfile:
        bps = self.initial_breakpoints
        moll = self.mollifier() if self.initial_mollify else Mollifier()
        return InitialProfile(tuple(bps), tuple(self.initial_values), moll)

    def path_config(self) -> PathConfig:
        dyn = self.dynamics()
        return PathConfig(
            dynamics=dyn,
            rho0=self.initial_profile().cell_means(dyn.grid),
            horizon=self.horizon,
            rates=RateParams(self.rate_flux, self.rate_upjump, self.rate_resolve),
            size_dist=SizeDist(self.size_min, self.size_max),
            cap_dist=CapDist(self.drops, self.drop_weights, self.max_drop),
            beta=self.beta,
            dt_ref=self.dt_ref,
            acceptance=self.acceptance,
            engine=self.engine,
            bound=self.bound,
            snapshot_times=tuple(self.snapshots),
        )

    def with_overrides(self, **kw) -> "SimConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        new = replace(self, **kw)
        new.validate()
        return new

    # -- validation ------------------------------------------------------
    def _err(self, msg, *path):
        line = None
        if self.lines:
            for k in range(len(path), 0, -1):
                line = self.lines.get(tuple(path[:k]))
                if line is not None:
                    break
        raise ConfigError(msg, line, self.source)

    def validate(self):
        """Build every derived object once so invalid input fails before any work."""
        checks = [
            (("domain",), lambda: self.grid()),
            (("domain", "cfl_factor"), self._check_cfl),
            (("mollifier",), self.mollifier),
            (("road",), self.road),
            (("road",), self._check_road_domain),
            (("initial",), self._check_initial),
            (("rates",), lambda: RateParams(self.rate_flux, self.rate_upjump, self.rate_resolve)),
            (("accidents",), lambda: SizeDist(self.size_min, self.size_max)),
            (("accidents",), lambda: CapDist(self.drops, self.drop_weights, self.max_drop)),
            (("time",), self._check_time),
            (("beta",), self._check_beta),
            (("engine",), self._check_engine),
            (("run",), self._check_run),
            (("convergence",), self._check_convergence),
        ]
        for path, check in checks:
            try:
                check()
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                self._err(str(exc), *path)
        return self

    def _check_cfl(self):
        if not 0.0 < self.cfl_factor <= 1.0:
            self._err(f"cfl_factor must lie in (0, 1] for a stable scheme, got {self.cfl_factor}",
                      "domain", "cfl_factor")

    def _check_road_domain(self):
        if abs(self.road_breakpoints[-1] - self.half_length) > 1e-12:
            self._err("road breakpoints must span [-half_length, half_length]", "road", "breakpoints")

    def _check_initial(self):
        b = self.initial_breakpoints
        if len(b) != len(self.initial_values) + 1:
            self._err("initial breakpoints/values length mismatch", "initial")
        if abs(b[0] + self.half_length) > 1e-12 or abs(b[-1] - self.half_length) > 1e-12:
            self._err("initial breakpoints must span [-half_length, half_length]", "initial")
        if any(not 0.0 <= v <= 1.0 for v in self.initial_values):
            self._err("initial density must lie in [0, 1]", "initial")
        self.initial_profile().cell_means(self.grid())

    def _check_time(self):
        if self.horizon < 0.0:
            self._err("horizon must be nonnegative", "time", "horizon")
        if not self.dt_ref > 0.0:
            self._err("dt_ref must be positive", "time", "dt_ref")
        if not 0.0 < self.acceptance <= 1.0:
            self._err(f"acceptance ratio must lie in (0, 1], got {self.acceptance}",
                      "time", "acceptance")
        if any(t < 0.0 for t in self.snapshots):
            self._err("snapshot times must be nonnegative", "time", "snapshots")

    def _check_beta(self):
        if not 0.0 <= self.beta <= 1.0:
            self._err(f"beta must lie in [0, 1], got {self.beta}", "beta")

    def _check_engine(self):
        if self.engine not in ("approx", "exact"):
            self._err(f"engine kind must be 'approx' or 'exact', got {self.engine!r}",
                      "engine", "kind")
        if self.bound is not None and not self.bound > 0.0:
            self._err("thinning bound must be positive", "engine", "bound")

    def _check_run(self):
        for name in ("samples", "paths", "workers", "position_bins", "time_bins"):
            if getattr(self, name) < 1:
                self._err(f"{name} must be >= 1", "run", name)

    def _check_convergence(self):
        if self.convergence_levels < 3:
            self._err("convergence needs at least 3 levels", "convergence", "levels")
        if not self.convergence_horizon > 0.0:
            self._err("convergence horizon must be positive", "convergence", "horizon")


# -- parsing -----------------------------------------------------------------

def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = (*path, key_node.value)
            out[key] = key_node.start_mark.line + 1
            _line_map(value_node, key, out)
    return out


def _number(value, where, err, integer=False):
    key = ".".join(map(str, where))
    if isinstance(value, bool):
        err(f"{key}: expected a number, got {value!r}", *where)
    if isinstance(value, str):
        try:
            value = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            err(f"{key}: expected a number or fraction, got {value!r}", *where)
    if not isinstance(value, (int, float)):
        err(f"{key}: expected a number, got {value!r}", *where)
    if integer:
        if float(value) != int(value):
            err(f"{key}: expected an integer, got {value!r}", *where)
        return int(value)
    return float(value)


def _numbers(value, where, err):
    if not isinstance(value, list):
        err(f"expected a list of numbers, got {value!r}", *where)
    return tuple(_number(v, where, err) for v in value)


def parse_config(text: str, source: str | None = None) -> SimConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    lines = _line_map(node) if node is not None else {}
    raw = raw or {}
    stub = SimConfig(lines=lines, source=source)
    err = stub._err
    if not isinstance(raw, dict):
        err("top level must be a mapping")

    def walk(d, schema, path):
        for key, value in d.items():
            if key not in schema:
                err(f"unknown key {'.'.join(map(str, (*path, key)))!r}", *path, key)
            if schema[key] is not None:
                if not isinstance(value, dict):
                    err(f"section {key!r} must be a mapping", *path, key)
                walk(value, schema[key], (*path, key))

    walk(raw, SCHEMA, ())

    kw = {}

    def get(section, key, target, kind="num"):
        src = raw.get(section, {}) if key is not None else raw
        name = key if key is not None else section
        if name not in src:
            return
        value = src[name]
        where = (section, key) if key is not None else (section,)
        if kind == "num":
            kw[target] = _number(value, where, err)
        elif kind == "int":
            kw[target] = _number(value, where, err, integer=True)
        elif kind == "opt":
            kw[target] = None if value is None else _number(value, where, err)
        elif kind == "list":
            kw[target] = _numbers(value, where, err)
        elif kind == "str":
            if not isinstance(value, str):
                err(f"expected a string, got {value!r}", *where)
            kw[target] = value
        elif kind == "bool":
            if not isinstance(value, bool):
                err(f"expected true/false, got {value!r}", *where)
            kw[target] = value

    get("seed", None, "seed", "int")
    get("beta", None, "beta")
    get("domain", "half_length", "half_length")
    get("domain", "cells", "cells", "int")
    get("domain", "cfl_factor", "cfl_factor")
    get("time", "horizon", "horizon")
    get("time", "dt_ref", "dt_ref")
    get("time", "acceptance", "acceptance")
    get("time", "snapshots", "snapshots", "list")
    get("road", "breakpoints", "road_breakpoints", "list")
    get("road", "values", "road_values", "list")
    get("road", "floor", "road_floor")
    get("mollifier", "mode", "mollifier_mode", "str")
    get("mollifier", "epsilon", "mollifier_epsilon")
    get("initial", "breakpoints", "initial_breakpoints", "list")
    get("initial", "values", "initial_values", "list")
    get("initial", "mollify", "initial_mollify", "bool")
    init = raw.get("initial", {})
    if "constant" in init:
        if "values" in init or "breakpoints" in init:
            err("give either initial.constant or initial.breakpoints/values", "initial")
        kw["initial_values"] = (_number(init["constant"], ("initial", "constant"), err),)
        kw["initial_breakpoints"] = None
    get("rates", "flux", "rate_flux")
    get("rates", "upjump", "rate_upjump")
    get("rates", "resolve", "rate_resolve")
    get("accidents", "size_min", "size_min")
    get("accidents", "size_max", "size_max")
    get("accidents", "drops", "drops", "list")
    get("accidents", "drop_weights", "drop_weights", "list")
    get("accidents", "max_drop", "max_drop")
    get("engine", "kind", "engine", "str")
    get("engine", "bound", "bound", "opt")
    for name in ("samples", "paths", "workers", "position_bins", "time_bins"):
        get("run", name, name, "int")
    get("convergence", "levels", "convergence_levels", "int")
    get("convergence", "horizon", "convergence_horizon")
    get("convergence", "cells", "convergence_cells", "int")
    get("output", "dir", "output_dir", "str")

    if "road_breakpoints" in kw and "half_length" not in kw:
        kw["half_length"] = kw["road_breakpoints"][-1]
    cfg = SimConfig(**kw, lines=lines, source=source)
    return cfg.validate()


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def dump_config(cfg: SimConfig) -> str:
    """YAML text that parses back to an equal configuration."""
    data = {
        "seed": cfg.seed,
        "beta": cfg.beta,
        "domain": {"half_length": cfg.half_length, "cells": cfg.cells,
                   "cfl_factor": cfg.cfl_factor},
        "time": {"horizon": cfg.horizon, "dt_ref": cfg.dt_ref, "acceptance": cfg.acceptance,
                 "snapshots": list(cfg.snapshots)},
        "road": {"breakpoints": list(cfg.road_breakpoints), "values": list(cfg.road_values),
                 "floor": cfg.road_floor},
        "mollifier": {"mode": cfg.mollifier_mode, "epsilon": cfg.mollifier_epsilon},
        "initial": {"values": list(cfg.initial_values), "mollify": cfg.initial_mollify,
                    "breakpoints": list(cfg.initial_breakpoints)},
        "rates": {"flux": cfg.rate_flux, "upjump": cfg.rate_upjump, "resolve": cfg.rate_resolve},
        "accidents": {"size_min": cfg.size_min, "size_max": cfg.size_max,
                      "drops": list(cfg.drops), "drop_weights": list(cfg.drop_weights),
                      "max_drop": cfg.max_drop},
        "engine": {"kind": cfg.engine, "bound": cfg.bound},
        "run": {"samples": cfg.samples, "paths": cfg.paths, "workers": cfg.workers,
                "position_bins": cfg.position_bins, "time_bins": cfg.time_bins},
        "convergence": {"levels": cfg.convergence_levels, "horizon": cfg.convergence_horizon,
                        "cells": cfg.convergence_cells},
        "output": {"dir": cfg.output_dir},
    }
    if data["convergence"]["cells"] is None:
        del data["convergence"]["cells"]
    return yaml.safe_dump(data, sort_keys=False)
