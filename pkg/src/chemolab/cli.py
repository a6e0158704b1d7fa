"""Command-line driver: classify | run | sweep | estimate-cgn.

Outputs land in --out, else $CHEMOLAB_OUT, else ./out.  Exit codes for
`run`: 0 bounded, 2 blowup, 3 inconclusive, 4 I/O failure; invalid configs
exit 1 with the offending section/field on stderr.  Identical configs
(including seeds) produce byte-identical diagnostics CSVs, and sweep rows
are written in input order regardless of the process parallelism.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from multiprocessing import get_context

import numpy as np

from . import diagnostics, stepping
from .config import ExperimentConfig, apply_override, build_config, load_config
from .errors import ChemolabError, ConfigError
from .fields import integrate, write_snapshot
from .gn import GNInstance, estimate_cgn
from .kinetics import classify, format_source_spec
from .stepping import make_initial, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_INCONCLUSIVE = 3
EXIT_IO = 4

VERDICT_EXIT_CODES = {
    stepping.VERDICT_BOUNDED: EXIT_OK,
    stepping.VERDICT_BLOWUP: EXIT_BLOWUP,
    stepping.VERDICT_INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


def _out_dir(args) -> str:
    out = args.out or os.environ.get("CHEMOLAB_OUT") or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _initial_state(cfg: ExperimentConfig, seed_override=None):
    p = dict(cfg.initial_params)
    if seed_override is not None:
        p["seed"] = seed_override
    return make_initial(cfg.initial_kind, cfg.grid, cfg.tau, **p)


def _resolve_cgn(cfg: ExperimentConfig, seed):
    """(c_gn value, estimator floor or None)."""
    inst = GNInstance(cfg.grid)
    if cfg.c_gn == "estimate":
        lb, _ = estimate_cgn(inst, budget=cfg.cgn_budget, seed=seed or 0)
        return lb, lb
    return float(cfg.c_gn), None


def _classify_config(cfg: ExperimentConfig, seed):
    c_gn, floor = _resolve_cgn(cfg, seed)
    if cfg.u0_mass_override is not None:
        u0_mass = cfg.u0_mass_override
    else:
        u0_mass = integrate(_initial_state(cfg, seed).u)
    report = classify(cfg.source, cfg.chi, c_gn, u0_mass, cfg.grid.area)
    return report, floor


def cmd_classify(cfg: ExperimentConfig, out: str, seed=None) -> int:
    report, floor = _classify_config(cfg, seed)
    lines = [f"source: {format_source_spec(cfg.source)}",
             f"chi: {cfg.chi!r}"]
    lines += report.lines()
    if floor is not None:
        lines.append(f"c_gn_estimated_floor: {floor!r}")
        # reported mode: how the verdict moves across a c_gn interval
        hi = classify(cfg.source, cfg.chi, 2.0 * floor,
                      report.M if math.isfinite(report.M) else 0.0, cfg.grid.area)
        lines.append(f"regime_at_2x_c_gn: {hi.regime}")
    text = "\n".join(lines) + "\n"
    label = report.regime + (f" ({report.reason})" if report.reason else "")
    print(f"regime: {label}")
    for ln in lines[1:]:
        print(ln)
    try:
        with open(os.path.join(out, "regime_report.txt"), "w") as fh:
            fh.write(text)
    except OSError as e:
        print(f"error: cannot write report: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _execute_run(cfg: ExperimentConfig, out: str, seed=None):
    """Run one simulation into `out`; returns (result, report, summary_lines)."""
    state = _initial_state(cfg, seed)
    opts = cfg.stepper_options()
    rp = cfg.run_params
    snap_dir = os.path.join(out, "snapshots")
    on_snapshot = None
    if rp["snapshot_every"] > 0:
        os.makedirs(snap_dir, exist_ok=True)

        def on_snapshot(s):
            tag = f"{s.step_count:08d}"
            write_snapshot(s.u, s.t, os.path.join(snap_dir, f"u_{tag}.snap"))
            write_snapshot(s.v, s.t, os.path.join(snap_dir, f"v_{tag}.snap"))

    t0 = time.perf_counter()
    result = run(state, opts, record_every=rp["record_every"],
                 snapshot_every=rp["snapshot_every"], on_snapshot=on_snapshot)
    wall = time.perf_counter() - t0

    try:
        report, _ = _classify_config(cfg, seed)
    except ChemolabError:
        report = None
    summary = diagnostics.check_bounds(result.records,
                                       report=report if report else None)
    lines = [result.verdict]
    lines.append(f"status: {result.state.status}")
    lines.append(f"t_final: {result.state.t!r}")
    lines.append(f"steps: {result.state.step_count}")
    lines.append(f"wall_seconds: {wall:.3f}")
    lines.append(f"config_hash: {cfg.hash}")
    if report is not None:
        lines.append(f"regime: {report.regime}")
        lines.append(f"M: {report.M!r}")
        lines.append(f"gap: {report.gap!r}")
    for name, val in summary.maxima.items():
        lines.append(f"max_{name}: {val!r}")
    return result, report, lines


def cmd_run(cfg: ExperimentConfig, out: str, seed=None) -> int:
    result, _, lines = _execute_run(cfg, out, seed)
    try:
        diagnostics.write_csv(result.records, os.path.join(out, "diagnostics.csv"))
        with open(os.path.join(out, "verdict.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        print(f"error: cannot write outputs: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"verdict: {result.verdict} after {result.state.step_count} steps "
          f"(t = {result.state.t:g})")
    return VERDICT_EXIT_CODES[result.verdict]


def _sweep_worker(job):
    idx, value, raw, base_dir, out_dir, parameter, seed = job
    overridden = apply_override(raw, parameter, value)
    row = {"sweep_value": value, "regime": "", "verdict": "failed",
           "max_u_linf": math.nan, "max_u_l1": math.nan,
           "M": math.nan, "gap": math.nan}
    try:
        cfg = build_config(overridden, base_dir=base_dir)
        run_dir = os.path.join(out_dir, f"sweep_{idx:03d}")
        os.makedirs(run_dir, exist_ok=True)
        result, report, lines = _execute_run(cfg, run_dir, seed)
        diagnostics.write_csv(result.records,
                              os.path.join(run_dir, "diagnostics.csv"))
        with open(os.path.join(run_dir, "verdict.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        summary = diagnostics.check_bounds(result.records)
        row["verdict"] = result.verdict
        row["max_u_linf"] = summary.maxima["u_linf"]
        row["max_u_l1"] = summary.maxima["u_l1"]
        if report is not None:
            row["regime"] = report.regime
            row["M"] = report.M
            row["gap"] = report.gap
    except ChemolabError as e:
        row["error"] = str(e)
    return idx, row


PHASE_COLUMNS = ("sweep_value", "regime", "verdict", "max_u_linf",
                 "max_u_l1", "M", "gap")


def cmd_sweep(cfg: ExperimentConfig, out: str, raw: dict, base_dir,
              seed=None, parallel_override=None) -> int:
    if cfg.sweep is None:
        print("error: config has no [sweep] section", file=sys.stderr)
        return EXIT_CONFIG
    parameter = cfg.sweep["parameter"]
    values = cfg.sweep["values"]
    parallel = parallel_override or cfg.sweep["parallel"]
    jobs = [(i, v, raw, base_dir, out, parameter, seed)
            for i, v in enumerate(values)]
    if parallel > 1 and len(jobs) > 1:
        with get_context("spawn").Pool(min(parallel, len(jobs))) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    try:
        with open(os.path.join(out, "phase.csv"), "w", newline="") as fh:
            fh.write(",".join(PHASE_COLUMNS) + "\n")
            for _, row in results:
                cells = []
                for col in PHASE_COLUMNS:
                    v = row[col]
                    cells.append(repr(float(v)) if isinstance(v, float) else str(v))
                fh.write(",".join(cells) + "\n")
    except OSError as e:
        print(f"error: cannot write phase table: {e}", file=sys.stderr)
        return EXIT_IO
    for _, row in results:
        print(f"{parameter} = {row['sweep_value']:g}: {row['verdict']}"
              + (f" [{row['regime']}]" if row["regime"] else ""))
    return EXIT_OK


def cmd_estimate_cgn(cfg: ExperimentConfig, out: str, seed=None) -> int:
    inst = GNInstance(cfg.grid)
    lb, best = estimate_cgn(inst, budget=cfg.cgn_budget, seed=seed or 0)
    print(f"lower_bound: {lb!r}")
    print(f"best_trial: kind={best.kind} eval={best.eval_index} "
          f"cx={best.cx!r} cy={best.cy!r} width={best.width!r}")
    try:
        with open(os.path.join(out, "cgn_estimate.txt"), "w") as fh:
            fh.write(f"lower_bound: {lb!r}\n")
            fh.write(f"kind: {best.kind}\ncx: {best.cx!r}\ncy: {best.cy!r}\n"
                     f"width: {best.width!r}\neval_index: {best.eval_index}\n")
    except OSError as e:
        print(f"error: cannot write estimate: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chemolab",
        description="Chemotaxis-growth laboratory: source classification, "
                    "bound-checked simulation, parameter sweeps.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("classify", "run", "sweep", "estimate-cgn"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory "
                       "(default $CHEMOLAB_OUT or ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--parallel", type=int, default=None,
                       help="worker processes (used by sweep)")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = _out_dir(args)
        if args.command == "classify":
            return cmd_classify(cfg, out, seed=args.seed)
        if args.command == "run":
            return cmd_run(cfg, out, seed=args.seed)
        if args.command == "sweep":
            from .config import read_raw
            raw = read_raw(args.config)
            base = os.path.dirname(os.path.abspath(args.config))
            return cmd_sweep(cfg, out, raw, base, seed=args.seed,
                             parallel_override=args.parallel)
        if args.command == "estimate-cgn":
            return cmd_estimate_cgn(cfg, out, seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError("unreachable")


def entrypoint():
    sys.exit(main())
