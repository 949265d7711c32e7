"""``bilayer`` command: simulate, sweep-eps, refine and check.

Exit codes: 0 success, 1 configuration/runtime/usage error, 2 a monitored
invariant failed.
"""

import argparse
import logging
import sys

import numpy as np

from .exceptions import BilayerError
from .harness.acceptance import CRITERIA, run_acceptance
from .harness.scenarios import run_scenario
from .harness.studies import eps_sweep, refinement_study
from .io import fmt, load_config, output_dir, write_series, write_snapshot
from .model import pressures

EXIT_OK, EXIT_ERROR, EXIT_INVARIANT = 0, 1, 2

logger = logging.getLogger("bilayer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers; got {text!r}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers; got {text!r}")


def build_parser():
    p = _Parser(prog="bilayer", description="Two-layer thin-film simulator.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run one configured scenario")
    sim.add_argument("--config", required=True, help="JSON configuration file")
    sim.add_argument("--out", help="output directory (default: $BILAYER_OUT or output.dir)")

    sw = sub.add_parser("sweep-eps", help="final-state distances over decreasing eps")
    sw.add_argument("--config", required=True)
    sw.add_argument("--eps", required=True, type=_float_list, help="e.g. 1e-2,1e-3,1e-4")
    sw.add_argument("--dt", type=float, help="fixed step (default: solver.dt_init)")
    sw.add_argument("--jobs", type=int, default=1, help="parallel members")
    sw.add_argument("--out")

    rf = sub.add_parser("refine", help="observed spatial and temporal orders")
    rf.add_argument("--config", required=True)
    rf.add_argument("--levels", required=True, type=int)

    ck = sub.add_parser("check", help="run the acceptance suite")
    ck.add_argument("--criteria", type=_int_list, help="subset, e.g. 1,4,5")
    return p


def _simulate(args):
    cfg = load_config(args.config)
    s, out = cfg.scenario, output_dir(args.out, cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    every = cfg.output.snapshot_every
    count = {"steps": 0, "snaps": 0}

    def snapshot(t, state):
        p = pressures(state, s.params, s.pot, s.grid)
        write_snapshot(out / f"snapshot_{count['snaps']:06d}.csv", t, state, p, s.grid,
                       s.model.tag, cfg.config_hash)
        count["snaps"] += 1

    snapshot(0.0, s.initial_state())

    def sink(t, state, record):
        count["steps"] += 1
        if every and count["steps"] % every == 0:
            snapshot(t, state)

    report = run_scenario(s, out=sink)
    if not (every and count["steps"] % every == 0):
        snapshot(report.summary.t, report.final)
    write_series(report.records, out / cfg.output.csv, cfg.config_hash)
    print(f"{s.name}: {report.summary.n_steps} steps to t={fmt(report.summary.t)} "
          f"({report.summary.n_rejected} rejected); output in {out}")
    for name, ok in report.checks.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}: {report.details[name]}")
    if not report.passed:
        print(f"invariant failure: {', '.join(report.failures())}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _sweep(args):
    cfg = load_config(args.config)
    res = eps_sweep(cfg.scenario, args.eps, dt=args.dt, n_jobs=args.jobs)
    print("eps_i,eps_i+1,distance")
    rows = [f"{fmt(a)},{fmt(b)},{fmt(d)}" for a, b, d in zip(res.eps[:-1], res.eps[1:], res.distances)]
    print("\n".join(rows))
    if args.out:
        out = output_dir(args.out, cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eps_sweep.csv").write_text(f"# config_hash={cfg.config_hash}\n"
                                           "eps_i,eps_i+1,distance\n" + "\n".join(rows) + "\n")
    if not res.decreasing(0.1):
        print("invariant failure: eps-convergence distances not decreasing", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _refine(args):
    cfg = load_config(args.config)
    res = refinement_study(cfg.scenario, args.levels)
    print("n_cells,spatial_error")
    for n, e in zip(res.n_cells[:-1], res.spatial_errors):
        print(f"{n},{fmt(e)}")
    print("dt,temporal_error")
    for dt, e in zip(res.dts[:-1], res.temporal_errors):
        print(f"{fmt(dt)},{fmt(e)}")
    if not res.applicable:
        print("orders: not applicable (errors vanish)")
        return EXIT_OK
    print(f"spatial order {res.spatial_order:.3f}, temporal order {res.temporal_order:.3f}")
    if res.spatial_order < 1.8 or res.temporal_order < 0.9:
        print("invariant failure: observed order below expectation", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _check(args):
    numbers = args.criteria
    known = {c[0] for c in CRITERIA}
    if numbers is not None and not set(numbers) <= known:
        print(f"bilayer: error: unknown criteria {sorted(set(numbers) - known)}", file=sys.stderr)
        return EXIT_ERROR
    results = run_acceptance(numbers, echo=lambda line: print(line, flush=True))
    failed = [r for r in results if not r.passed]
    if failed:
        print("failing criteria: " + ", ".join(f"{r.number} ({r.name})" for r in failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


COMMANDS = {"simulate": _simulate, "sweep-eps": _sweep, "refine": _refine, "check": _check}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(over="ignore"):
            return COMMANDS[args.command](args)
    except BilayerError as exc:
        print(f"bilayer: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
