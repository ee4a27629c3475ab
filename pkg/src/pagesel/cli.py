"""Command line driver.

Exit codes: 0 success, 1 usage error, 2 input/analysis/capacity error,
3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import solve
from .errors import PageselError
from .frg import build_frg
from .generate import GenSpec, generate
from .ir import IRError, format_program
from .partition import exhaustive_partition, greedy_partition, residual_cost, saved_weight
from .report import dumps, merge_reports, optimize, without_timings
from .validation import PRESETS, check_program, read_assignment, unoptimized
from .vm import differential, layout

EXIT_OK, EXIT_USAGE, EXIT_ERROR, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _range(text: str) -> tuple:
    lo, _, hi = text.partition("-")
    try:
        lo = int(lo)
        hi = int(hi) if hi else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _config_flags(p):
    g = p.add_argument_group("target")
    g.add_argument("--preset", choices=sorted(PRESETS), help="page geometry preset")
    g.add_argument("--pages", type=int, help="override page count")
    g.add_argument("--page-size", type=int, help="override page size (words)")
    g.add_argument("--psi-cost", type=int, help="words per PSI")
    g.add_argument("--prevalue", help="FRG weight per avoided PSI site (default: psi cost)")
    g.add_argument("--allow-psi", action="store_true", help="accept psi lines in the input")


def _load(args, allow_psi=None):
    geometry = dict(PRESETS[args.preset]) if args.preset else {}
    if args.pages is not None:
        geometry["page_count"] = args.pages
    if args.page_size is not None:
        geometry["page_size"] = args.page_size
    text = Path(args.file).read_text()
    return check_program(text, allow_psi=args.allow_psi if allow_psi is None else allow_psi,
                         psi_cost=args.psi_cost, prevalue=args.prevalue, **geometry)


def _fmt(s) -> str:
    return "{" + ", ".join(sorted(s)) + "}"


def cmd_analyze(args, out):
    p = unoptimized(_load(args))
    d = solve(p)
    gen, kill, in_, out_ = d.gen, d.kill, d.in_, d.out
    vop = d.vop_table()
    print(f"# iterations {d.iterations}", file=out)
    for f in p.functions:
        print(f"func {f.id}:", file=out)
        for b in f.blocks:
            key = (f.id, b.id)
            print(f"  {b.id}: gen={_fmt(gen[key])} kill={_fmt(kill[key])} "
                  f"in={_fmt(in_[key])} out={_fmt(out_[key])}", file=out)
            for k, ins in enumerate(b.instrs):
                before, after = vop[(f.id, b.id, k)]
                print(f"    {k}: {str(ins):<14} before={_fmt(before)} after={_fmt(after)}",
                      file=out)
    return EXIT_OK


def cmd_frg(args, out):
    p = unoptimized(_load(args))
    frg = build_frg(p, solve(p))
    for g, h, w in frg.edges():
        print(f"{g} {h} {w}", file=out)
    print(f"total {frg.total_weight}", file=out)
    return EXIT_OK


def cmd_partition(args, out):
    p = unoptimized(_load(args))
    d = solve(p)
    frg = build_frg(p, d)
    if args.exhaustive:
        a = exhaustive_partition(frg, p, args.objective, d=d)
    else:
        a = greedy_partition(frg, p, args.conservative_size)
    for f in p.function_ids:
        print(f"{f} {a.func_page[f]}", file=out)
    print(f"residual {residual_cost(frg, a)}", file=out)
    print(f"saved {saved_weight(frg, a)}", file=out)
    print(f"total {frg.total_weight}", file=out)
    return EXIT_OK


def _pipeline(args, p):
    params = {"conservative_size": args.conservative_size}
    if getattr(args, "exhaustive", False):
        params.update(partitioner="exhaustive", objective=args.objective)
    return optimize(p, name=Path(args.file).stem, **params)


def cmd_optimize(args, out):
    p = unoptimized(_load(args))
    res = _pipeline(args, p)
    fp = res.optimized.assignment.func_page
    text = format_program(res.optimized.program,
                          comments=[f"funcpage {f} {fp[f]}" for f in p.function_ids])
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)
    report = res.report if not args.no_timings else without_timings(res.report)
    if args.report:
        Path(args.report).write_text(dumps(report))
    r = res.report
    print(f"# s_naive={r['s_naive']} s_opt={r['s_opt']} psi_naive={r['psi_naive']} "
          f"psi_opt={r['psi_opt']} ratio={r['ratio']:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args, out):
    p = _load(args)
    base = unoptimized(p)
    override = None
    if args.assignment:
        override = read_assignment(Path(args.assignment).read_text(), base)
    if p.psi_count:
        if override is None:
            print("verify: an input with psi lines needs --assignment", file=sys.stderr)
            return EXIT_USAGE
        res = _pipeline(args, base)
        opt_img = layout(p, override)
    else:
        res = _pipeline(args, base)
        opt_img = layout(res.optimized, override)
    naive_img = layout(res.naive)
    seeds = range(args.seed, args.seed + args.seeds)
    tally = differential(naive_img, opt_img, seeds, args.steps)
    for name, seed, fault in tally["faults"][:10]:
        print(f"FAULT {name} seed={seed} at {':'.join(map(str, fault.position))} "
              f"psr={fault.psr} expected={fault.expected}", file=out)
    print(f"runs {tally['runs']}", file=out)
    print(f"faults {len(tally['faults'])}", file=out)
    print(f"diverged {len(tally['diverged'])}", file=out)
    ok = not tally["faults"] and not tally["diverged"]
    print("OK" if ok else "FAILED", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_gen(args, out):
    spec = GenSpec(seed=args.seed, funcs=args.funcs, blocks=args.blocks, pages=args.pages,
                   call_density=args.call_density, goto_density=args.goto_density,
                   cluster_factor=args.cluster, recursion=args.recursion,
                   acyclic=args.acyclic, psi_cost=args.psi_cost, page_size=args.page_size)
    if args.output is None:
        for k in range(args.count):
            out.write(generate(spec, args.first + k))
        return EXIT_OK
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(args.first + args.count - 1)))
    for k in range(args.first, args.first + args.count):
        (outdir / f"prog_{k:0{width}d}.ir").write_text(generate(spec, k))
    return EXIT_OK


def cmd_report(args, out):
    reports = [json.loads(Path(f).read_text()) for f in args.reports]
    for r in reports:
        if r.get("schema") != 1:
            print(f"unsupported report schema {r.get('schema')!r}", file=sys.stderr)
            return EXIT_ERROR
    text = dumps(merge_reports(reports))
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pagesel", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="dump Gen/Kill/In/Out per block and VOP per instruction")
    p.add_argument("file")
    _config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("frg", help="print nonzero function relation graph edges")
    p.add_argument("file")
    _config_flags(p)
    p.set_defaults(func=cmd_frg)

    p = sub.add_parser("partition", help="print the function-to-page assignment")
    p.add_argument("file")
    p.add_argument("--exhaustive", action="store_true", help="brute-force optimum (small inputs)")
    p.add_argument("--objective", choices=("residual", "psi"), default="residual")
    p.add_argument("--conservative-size", action="store_true",
                   help="do not credit pages with the PSI words functions may save")
    _config_flags(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("optimize", help="assign pages and insert PSIs")
    p.add_argument("file")
    p.add_argument("-o", "--output", help="optimized IR (default stdout)")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--no-timings", action="store_true", help="omit timings from the report")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--objective", choices=("residual", "psi"), default="residual")
    p.add_argument("--conservative-size", action="store_true")
    _config_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="run naive and optimized images on the paged machine")
    p.add_argument("file")
    p.add_argument("--seeds", type=int, default=100, help="number of decision streams")
    p.add_argument("--seed", type=int, default=0, help="first decision stream seed")
    p.add_argument("--steps", type=int, default=100_000, help="step bound per run")
    p.add_argument("--assignment", help="lay the optimized program out with this FuncPage file")
    p.add_argument("--conservative-size", action="store_true")
    _config_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "gen", help="generate random programs",
        description="Generate seeded random IR programs. Calls stay inside the caller's "
                    "cluster with probability --cluster and favour two shared callees per "
                    "cluster so VOP sets with several functions arise. Defaults: "
                    "--call-density 0.3, --goto-density 0.4, --cluster 0.7, --recursion 0.")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--first", type=int, default=0, help="index of the first program")
    p.add_argument("--funcs", type=_range, default=(4, 16))
    p.add_argument("--blocks", type=_range, default=(1, 6))
    p.add_argument("--pages", type=_range, default=(2, 4))
    p.add_argument("--page-size", type=int)
    p.add_argument("--psi-cost", type=int, default=1)
    p.add_argument("--call-density", type=float, default=0.3)
    p.add_argument("--goto-density", type=float, default=0.4)
    p.add_argument("--cluster", type=float, default=0.7)
    p.add_argument("--recursion", type=float, default=0.0)
    p.add_argument("--acyclic", action="store_true")
    p.add_argument("-o", "--output", help="directory for prog_NNN.ir files (default stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("report", help="merge per-program reports into a corpus summary")
    p.add_argument("reports", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args, out)
    except (IRError, PageselError) as e:
        print(f"pagesel: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, TypeError) as e:
        print(f"pagesel: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"pagesel: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
