"""Command line driver: parameter sweeps to CSV, closed-form analysis, figures, verify.

Exit codes: 0 success, 1 verification failure, 2 parameter error, 3 I/O or
input-format error.  All commands are deterministic functions of their flags
and the base seed; floats are written with 10 significant digits.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from . import bounds, spectral, verification
from .core import OutOfRangeError, ParameterError, SplitParams
from .plotting import CSV_HEADER, CsvFormatError, render_fullness_figure
from .simulate import RunConfig, run_monte_carlo
from .strategies import StrategyKind

EXIT_OK, EXIT_VERIFY, EXIT_PARAM, EXIT_IO = 0, 1, 2, 3

_STRATEGIES = {
    "even": StrategyKind.EVEN,
    "deferred": StrategyKind.DEFERRED_EVEN,
    "deferred_even": StrategyKind.DEFERRED_EVEN,
    "uneven1": StrategyKind.UNEVEN_REGIME1,
    "uneven2": StrategyKind.UNEVEN_REGIME2,
    "recommended": StrategyKind.RECOMMENDED,
}


def _fmt(x) -> str:
    return "%.10g" % x


def _parse_batch_values(args) -> list:
    if args.batch is not None and args.batch_range is not None:
        raise ParameterError("give either --batch or --batch-range, not both")
    if args.batch is not None:
        return [args.batch]
    if args.batch_range is None:
        raise ParameterError("one of --batch or --batch-range is required")
    parts = args.batch_range.split(":")
    if len(parts) not in (2, 3):
        raise ParameterError(f"--batch-range must be lo:hi[:step], got {args.batch_range!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise ParameterError(f"--batch-range must be integers, got {args.batch_range!r}") from None
    if lo < 1 or hi < lo or step < 1:
        raise ParameterError(f"bad --batch-range {args.batch_range!r}")
    return list(range(lo, hi + 1, step))


def _sweep_point(job):
    strategy, B, r, insertions, runs, seed, seeding = job
    cfg = RunConfig(strategy, SplitParams(B, r), insertions, runs=runs,
                    base_seed=seed, seeding=seeding)
    s = run_monte_carlo(cfg)
    return r, s.mean_fullness, s.min_fullness, s.max_fullness


def cmd_simulate(args) -> int:
    strategy = _STRATEGIES[args.strategy]
    seeding = None if args.seeding == "auto" else args.seeding
    r_values = _parse_batch_values(args)
    jobs = [(strategy, args.block_size, r, args.insertions, args.runs, args.seed, seeding)
            for r in r_values]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs, chunksize=4))
    else:
        rows = []
        for i, job in enumerate(jobs):
            rows.append(_sweep_point(job))
            if args.progress and (i + 1) % 10 == 0:
                print(f"  {i + 1}/{len(jobs)} sweep points done", file=sys.stderr)
    rows.sort(key=lambda t: t[0])  # emitted in r order regardless of completion order
    with open(args.out, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r, mean, lo, hi in rows:
            fh.write(f"{r},{_fmt(mean)},{_fmt(lo)},{_fmt(hi)}\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        render_fullness_figure([args.out], args.block_size, args.plot,
                               overlay=args.overlay, titles=[args.strategy])
        print(f"wrote figure to {args.plot}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    B = args.block_size
    r_values = _parse_batch_values(args)
    spectral_ok = B % 2 == 1
    if args.dump_matrix:
        if len(r_values) != 1:
            raise ParameterError("--dump-matrix needs a single --batch value")
        if not (spectral_ok and 2 * r_values[0] < B):
            raise ParameterError("--dump-matrix requires odd B and r < B/2")
        spectral.dump_matrix_csv(spectral.build_matrix(SplitParams(B, r_values[0])),
                                 args.dump_matrix)
        print(f"wrote transition matrix to {args.dump_matrix}")
    with open(args.out, "w", newline="") as fh:
        fh.write("r,predicted_fullness,table_bound,deferred_closed_form\n")
        for r in r_values:
            predicted = ""
            if spectral_ok and 2 * r < B:
                predicted = _fmt(spectral.predicted_fullness(SplitParams(B, r)))
            bound = _fmt(bounds.guaranteed_fill(B, r).fill)
            try:
                deferred = _fmt(bounds.deferred_even_fill(B, r).fill)
            except OutOfRangeError:
                deferred = ""
            fh.write(f"{r},{predicted},{bound},{deferred}\n")
    print(f"wrote {len(r_values)} rows to {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    render_fullness_figure(args.csv, args.block_size, args.out,
                           overlay=args.overlay, titles=args.title)
    print(f"wrote figure to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ok = verification.run_verification(args.level)
    return EXIT_OK if ok else EXIT_VERIFY


def _add_common_sim_flags(p):
    p.add_argument("--block-size", type=int, required=True, metavar="B",
                   help="block capacity in keys")
    p.add_argument("--batch", type=int, metavar="R", help="single batch size")
    p.add_argument("--batch-range", metavar="LO:HI[:STEP]",
                   help="inclusive range of batch sizes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockfill",
                                 description="Block-splitting fullness: simulation, "
                                             "prediction, bounds, figures.")
    ap.add_argument("--config", metavar="PATH",
                    help="JSON file of defaults; explicit flags override it")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="Monte Carlo sweep to CSV")
    _add_common_sim_flags(ps)
    ps.add_argument("--strategy", choices=sorted(_STRATEGIES), default="even")
    ps.add_argument("--insertions", type=int, default=200_000, metavar="N")
    ps.add_argument("--runs", type=int, default=10, metavar="K")
    ps.add_argument("--seed", type=int, default=0, metavar="S",
                    help="base seed; run k uses S + k")
    ps.add_argument("--seeding", choices=("auto", "empty", "dummy", "paper"), default="auto",
                    help="auto: sentinel key for even splitting, key-less start otherwise")
    ps.add_argument("--out", required=True, metavar="PATH")
    ps.add_argument("--jobs", type=int, default=1, help="sweep points run in parallel")
    ps.add_argument("--plot", metavar="PATH", help="also render the sweep figure")
    ps.add_argument("--overlay", choices=("none", "lemma61", "table1"), default="none")
    ps.add_argument("--progress", action="store_true")
    ps.set_defaults(func=cmd_simulate)

    pa = sub.add_parser("analyze", help="closed forms and bounds to CSV")
    _add_common_sim_flags(pa)
    pa.add_argument("--out", required=True, metavar="PATH")
    pa.add_argument("--dump-matrix", metavar="PATH",
                    help="also dump the size-indexed transition matrix (single --batch)")
    pa.set_defaults(func=cmd_analyze)

    pp = sub.add_parser("plot", help="render sweep CSVs as one figure")
    pp.add_argument("csv", nargs="+", metavar="CSV")
    pp.add_argument("--block-size", type=int, required=True, metavar="B")
    pp.add_argument("--out", required=True, metavar="PATH")
    pp.add_argument("--overlay", choices=("none", "lemma61", "table1"), default="none")
    pp.add_argument("--title", action="append", metavar="T",
                    help="panel title, repeatable per CSV")
    pp.set_defaults(func=cmd_plot)

    pv = sub.add_parser("verify", help="run the named self-checks")
    pv.add_argument("--level", choices=("quick", "full"), default="quick")
    pv.set_defaults(func=cmd_verify)
    return ap


def _apply_config(ap: argparse.ArgumentParser, args, argv):
    if not args.config:
        return args
    with open(args.config) as fh:
        try:
            conf = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CsvFormatError(f"{args.config}: invalid JSON config: {exc}") from None
    if not isinstance(conf, dict):
        raise ParameterError(f"{args.config}: config must be a JSON object")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in conf.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ParameterError(f"{args.config}: unknown config key {key!r}")
        if attr not in explicit:
            setattr(args, attr, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        args = _apply_config(ap, args, argv)
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
