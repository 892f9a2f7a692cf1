"""Command-line interface: ``polyclinch <command> [options]``.

Exit codes: 0 success, 1 a check failed, 2 a check was skipped because its
premise did not hold, 64 bad usage, 65 invalid instance or refused
configuration, 66 unreadable input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction

from . import __version__
from .auction import run_pca
from .generate import GenParams, generate_instance, random_suite
from .market import (
    ConfigurationError,
    InstanceError,
    parse_instance,
    preprocess,
    serialize_instance,
    validate,
)
from .optimum import liquid_welfare, optimal_lw_allocation, social_welfare
from .polymatroid import EnumerationError
from .rational import format_rat, is_multiple, parse_rat
from .single_sample import DistributionSpec, estimate_expectations, run_mechanism
from .verify import check_dsic, check_efficiency, check_trace, reproduce_examples

EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _rational(text: str) -> Fraction:
    try:
        value = parse_rat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if not isinstance(value, Fraction):
        raise argparse.ArgumentTypeError("must be finite")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polyclinch", description="Clinching auctions for two-sided markets with polymatroid supply.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, instance=True):
        if instance:
            p.add_argument("--instance", required=True, help="instance JSON file")
            p.add_argument("--epsilon", type=_rational, help="override the clock step (must divide every bid)")
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "tsv"), default="json")

    p = sub.add_parser("run", help="run the clinching auction")
    common(p)
    p.add_argument("--trace", help="write the event trace as JSON lines")

    p = sub.add_parser("opt", help="optimal liquid-welfare allocation")
    common(p)

    p = sub.add_parser("single-sample", help="run the single-sample mechanism or estimate its expectations")
    common(p)
    p.add_argument("--distribution", help="JSON: seller id -> list of values or [value, weight] pairs")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-trial", action="store_true", help="include every trial in the report")

    p = sub.add_parser("verify", help="run the auction and check every guarantee on its trace")
    common(p)
    p.add_argument("--dsic", choices=("none", "pca", "single_sample"), default="none")
    p.add_argument("--grid-step", type=_rational, help="bid deviation step (default epsilon)")

    p = sub.add_parser("gen", help="generate a random instance")
    common(p, instance=False)
    p.add_argument("--buyers", type=int, default=3)
    p.add_argument("--sellers", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=_rational, default=Fraction(1, 2))
    p.add_argument("--max-ticks", type=int, default=5)
    p.add_argument("--capacity", choices=("table", "rank"), default="table")
    p.add_argument("--allow-zero", action="store_true", help="allow sellers with zero capacity")
    p.add_argument("--samples", action="store_true", help="give every seller a sample")

    p = sub.add_parser("reproduce", help="check the pinned closed-form examples")
    common(p, instance=False)

    p = sub.add_parser("sweep", help="welfare metrics over many instances")
    common(p, instance=False)
    p.add_argument("--instances", nargs="*", default=[], help="instance files (default: generate)")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--capacity", choices=("table", "rank"), default="table")
    return parser


# ---------------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc.strerror}") from None


def _load(path: str, epsilon=None):
    try:
        inst = parse_instance(_read(path))
    except InstanceError as exc:
        raise DataError(f"{path}: {exc}") from None
    if epsilon is not None:
        values = [b.bid for b in inst.buyers] + [s.bid for s in inst.sellers]
        values += [s.sample for s in inst.sellers if s.sample is not None]
        if not epsilon > 0 or not all(is_multiple(v, epsilon) for v in values):
            raise DataError(f"epsilon {format_rat(epsilon)} does not divide every bid of {path}")
        inst = replace(inst, epsilon=epsilon)
    report = validate(inst)
    if not report.ok:
        who, msg = report.first()
        raise DataError(f"{path}: invalid instance: {who}: {msg}")
    return inst


def _emit(args, payload, rows=None) -> None:
    if args.format == "tsv" and rows is not None:
        text = "\n".join("\t".join(str(c) for c in row) for row in rows) + "\n"
    elif isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _metrics_row(name, lw, sw, opt):
    ratio = lambda a: format_rat(a / opt) if opt else "nan"
    return [name, format_rat(lw), format_rat(opt), format_rat(sw), ratio(lw), ratio(sw)]


METRIC_HEADER = ["instance", "lw_pca", "lw_opt", "sw_pca", "lw_ratio", "sw_ratio"]


def cmd_run(args) -> int:
    inst = _load(args.instance, args.epsilon)
    pm = preprocess(inst)
    alloc, trace = run_pca(pm)
    lw, sw = liquid_welfare(pm, alloc.x_pre), social_welfare(pm, alloc.x_pre)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(trace.to_jsonl(pm))
    payload = {
        "epsilon": format_rat(pm.epsilon),
        "allocation": alloc.to_dict(),
        "lw": format_rat(lw),
        "sw": format_rat(sw),
        "iterations": trace.final.iteration,
    }
    rows = [["instance", "lw", "sw", "iterations"], [args.instance, format_rat(lw), format_rat(sw), trace.final.iteration]]
    _emit(args, payload, rows)
    return 0


def cmd_opt(args) -> int:
    inst = _load(args.instance, args.epsilon)
    pm = preprocess(inst)
    opt = optimal_lw_allocation(pm)
    payload = {
        "x_star": {b.id: format_rat(x) for b, x in zip(pm.buyers, opt.x_star)},
        "order": [pm.buyers[i].id for i in opt.order],
        "lw_opt": format_rat(opt.lw_opt),
    }
    rows = [["buyer", "x_star"]] + [[b.id, format_rat(x)] for b, x in zip(pm.buyers, opt.x_star)]
    _emit(args, payload, rows)
    return 0


def _distribution(path: str) -> DistributionSpec:
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc.msg} at line {exc.lineno}") from None
    support = {}
    for sid, entries in doc.items():
        pairs = []
        for entry in entries:
            if isinstance(entry, list):
                pairs.append((Fraction(entry[0]), Fraction(entry[1])))
            else:
                pairs.append((Fraction(entry), Fraction(1)))
        support[sid] = tuple(pairs)
    return DistributionSpec(support)


def cmd_single_sample(args) -> int:
    inst = _load(args.instance, args.epsilon)
    if args.distribution:
        if args.trials < 1:
            raise UsageError("--trials must be at least 1")
        try:
            report = estimate_expectations(inst, _distribution(args.distribution), args.trials, args.seed, args.per_trial)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        rows = [list(k for k in report if k != "per_trial"), [report[k] for k in report if k != "per_trial"]]
        _emit(args, report, rows)
        return 0
    try:
        out = run_mechanism(inst)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    payload = {"kept": list(out.kept), "allocation": out.allocation.to_dict(), "lw": format_rat(out.lw), "sw": format_rat(out.sw)}
    rows = [["instance", "kept", "lw", "sw"], [args.instance, ",".join(out.kept), format_rat(out.lw), format_rat(out.sw)]]
    _emit(args, payload, rows)
    return 0


def cmd_verify(args) -> int:
    inst = _load(args.instance, args.epsilon)
    pm = preprocess(inst)
    alloc, trace = run_pca(pm)
    opt = optimal_lw_allocation(pm)
    report = check_trace(pm, trace, alloc, opt)
    report.merge(check_efficiency(pm, alloc, opt))
    if args.dsic != "none":
        step = args.grid_step if args.grid_step is not None else inst.epsilon
        try:
            report.merge(check_dsic(inst, step, args.dsic))
        except ValueError as exc:
            raise DataError(str(exc)) from None
    payload = report.to_dict()
    rows = [["check", "status"]] + [[k, v["status"]] for k, v in payload["checks"].items()]
    _emit(args, payload, rows)
    return report.exit_code


def cmd_gen(args) -> int:
    if args.buyers < 1 or args.sellers < 0:
        raise UsageError("--buyers must be positive and --sellers nonnegative")
    params = GenParams(
        buyers=args.buyers,
        sellers=args.sellers,
        epsilon=args.epsilon,
        max_ticks=args.max_ticks,
        capacity=args.capacity,
        allow_zero=args.allow_zero,
        samples=args.samples,
    )
    inst = generate_instance(params, args.seed)
    _emit(args, serialize_instance(inst))
    return 0


def cmd_reproduce(args) -> int:
    report = reproduce_examples()
    payload = report.to_dict()
    rows = [["check", "status"]] + [[k, v["status"]] for k, v in payload["checks"].items()]
    _emit(args, payload, rows)
    return report.exit_code


def cmd_sweep(args) -> int:
    if args.instances:
        named = [(path, _load(path)) for path in args.instances]
    else:
        suite = random_suite(args.count, args.seed, capacity=args.capacity)
        named = [(f"gen-{args.seed}-{k}", inst) for k, inst in enumerate(suite)]
    rows = [METRIC_HEADER + ["checks"]]
    records = []
    worst = 0
    for name, inst in named:
        pm = preprocess(inst)
        alloc, trace = run_pca(pm)
        opt = optimal_lw_allocation(pm)
        report = check_trace(pm, trace, alloc, opt)
        report.merge(check_efficiency(pm, alloc, opt))
        lw, sw = liquid_welfare(pm, alloc.x_pre), social_welfare(pm, alloc.x_pre)
        status = "pass" if report.exit_code == 0 else ("fail" if report.exit_code == 1 else "skipped")
        rows.append(_metrics_row(name, lw, sw, opt.lw_opt) + [status])
        records.append(dict(zip(rows[0], rows[-1])))
        if worst != 1 and report.exit_code:
            worst = report.exit_code
    _emit(args, {"instances": records}, rows)
    return worst


COMMANDS = {
    "run": cmd_run,
    "opt": cmd_opt,
    "single-sample": cmd_single_sample,
    "verify": cmd_verify,
    "gen": cmd_gen,
    "reproduce": cmd_reproduce,
    "sweep": cmd_sweep,
}


def dispatch(args) -> int:
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"polyclinch: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (DataError, ConfigurationError, EnumerationError) as exc:
        print(f"polyclinch: {exc}", file=sys.stderr)
        return EX_DATAERR
    except FileNotFoundError as exc:
        print(f"polyclinch: {exc}", file=sys.stderr)
        return EX_NOINPUT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
