"""Command line entry point: ``accidentflow {simulate,first-jump,positions,convergence}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, SimConfig, load_config
from .ensemble import first_jump_samples, simulate_ensemble
from .pdp import BoundViolation
from .solver import InvariantViolation, self_convergence
from .stats import ecdf, first_jump_law, histogram, ks_critical_value, ks_distance

log = logging.getLogger("accidentflow")

LOW_SAMPLE = 100
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: SimConfig, out: Path) -> int:
    pcfg = cfg.path_config()
    results = simulate_ensemble(pcfg, cfg.paths, cfg.seed, cfg.workers)
    grid = pcfg.dynamics.grid
    kept, summary = [], []
    for pid, res in results:
        if isinstance(res, BoundViolation):
            log.warning("path %d discarded: %s", pid, res)
            summary.append({"path_id": pid, "discarded": True, "reason": str(res)})
            continue
        kept.append((pid, res))
        for t, rho in sorted(res.snapshots.items()):
            io.write_snapshot(out / "snapshots" / f"path{pid:05d}_t{t!r}.csv", grid.centers, rho)
        d = res.diagnostics
        summary.append({
            "path_id": pid, "discarded": False, "jumps": len(res.jumps),
            "accidents": sum(1 for j in res.jumps if j.kind == "accident"),
            "steps": d.steps, "mass_drift": d.total_drift, "max_step_drift": d.max_step_drift,
            "linf_violations": d.linf_violations, "tv_violations": d.tv_violations,
            "out_of_range": d.out_of_range, "valid": d.valid,
        })
    io.write_jumps(out / "jumps.csv", kept)
    _write_json(out / "summary.json", {"seed": cfg.seed, "paths": summary})
    invalid = [s["path_id"] for s in summary if not s["discarded"] and not s["valid"]]
    print(f"wrote {sum(len(r.jumps) for _, r in kept)} jumps from {len(kept)} path(s) to {out}")
    if invalid:
        print(f"invariant checks failed on paths {invalid}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _first_jumps(cfg: SimConfig):
    pcfg = cfg.path_config()
    samples = first_jump_samples(pcfg, cfg.samples, cfg.seed, cfg.workers)
    if samples.discarded:
        log.warning("%d samples discarded after thinning-bound violations", samples.discarded)
    return pcfg, samples


def cmd_first_jump(cfg: SimConfig, out: Path) -> int:
    pcfg, samples = _first_jumps(cfg)
    law = first_jump_law(pcfg)
    io.write_table(out / "first_jump_samples.csv", ("index", "time", "censored"),
                   zip(range(samples.n), samples.times, samples.censored))
    io.write_series(out / "cdf.csv", law.times, law.cdf.values)
    io.write_series(out / "pdf.csv", law.times, law.pdf)
    summary = {"samples": samples.n, "censored": int(samples.censored.sum()),
               "censored_fraction": samples.censored_fraction,
               "discarded": samples.discarded, "beta": cfg.beta, "seed": cfg.seed,
               "analytic_survival_at_horizon": law.survival}
    observed = samples.observed_times
    if observed.size:
        emp = ecdf(observed, samples.n)
        io.write_series(out / "ecdf.csv", emp.points, emp.heights)
        edges = np.linspace(0.0, pcfg.horizon, cfg.time_bins + 1)
        io.write_histogram(out / "time_histogram.csv", edges, histogram(observed, edges))
        ks = ks_distance(emp, law.cdf)
        summary.update(ks=ks, ks_critical_5pct=ks_critical_value(samples.n),
                       low_sample=samples.n < LOW_SAMPLE)
        flag = " (low sample)" if samples.n < LOW_SAMPLE else ""
        print(f"KS distance {ks:.6f} over {samples.n} samples, "
              f"{summary['censored']} censored{flag}")
    else:
        summary.update(ks=None, low_sample=True)
        print(f"all {samples.n} samples censored at T={pcfg.horizon}")
    _write_json(out / "first_jump_summary.json", summary)
    return EXIT_OK


def cmd_positions(cfg: SimConfig, out: Path) -> int:
    pcfg, samples = _first_jumps(cfg)
    pos = samples.positions[~samples.censored]
    io.write_table(out / "positions.csv", ("index", "position"),
                   ((i, p) for i, p in enumerate(samples.positions) if not np.isnan(p)))
    L = pcfg.dynamics.grid.half_length
    edges = np.linspace(-L, L, cfg.position_bins + 1)
    if pos.size:
        io.write_histogram(out / "position_histogram.csv", edges, histogram(pos, edges))
    print(f"{pos.size} first-accident positions, {int(samples.censored.sum())} censored")
    return EXIT_OK


def cmd_convergence(cfg: SimConfig, out: Path) -> int:
    dyn = cfg.dynamics(cfg.convergence_cells or cfg.cells)
    rows = self_convergence(dyn, cfg.initial_profile(), cfg.convergence_horizon,
                            cfg.convergence_levels)
    io.write_table(out / "convergence.csv", ("dx", "l1_diff", "order"), rows)
    for dx, d, order in rows:
        print(f"dx={dx:.6g}  L1 diff={d:.6e}  order={order:.3f}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "first-jump": cmd_first_jump,
    "positions": cmd_positions,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accidentflow",
        description="Random traffic accidents on a periodic LWR road.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the file)")
        p.add_argument("--samples", type=int,
                       help="sample count; number of paths for 'simulate'")
        p.add_argument("--beta", type=float, help="flux weight of the position mixture")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = dict(seed=args.seed, beta=args.beta, workers=args.workers)
        if args.samples is not None:
            overrides["paths" if args.command == "simulate" else "samples"] = args.samples
        cfg = cfg.with_overrides(**overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output_dir)
    try:
        return COMMANDS[args.command](cfg, out)
    except (InvariantViolation, BoundViolation, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
