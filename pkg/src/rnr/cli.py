"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input error, 3 infeasible.
"""
from __future__ import annotations

import argparse
import logging
import shlex
import sys
from pathlib import Path

from . import __version__
from .asp_bridge import emit_program
from .graph_core import (
    DirectedGraph,
    GraphFormatError,
    WeightedHypothesis,
    as_hypothesis,
    parse_graph,
    scc_decompose,
    write_graph,
)
from .meta import EnrichmentPolicy, meta_solve
from .objective import DensityBand
from .simbench import edgebreak_csv, run_edgebreak, run_var, var_csv
from .solver import InfeasibleError, OptMode, SolutionSet, SolverConfig, solve
from .undersampling import DEFAULT_MAX_U, undersample

log = logging.getLogger("rnr")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_graph(path: str):
    if path == "-":
        data = sys.stdin.buffer.read()
        try:
            return parse_graph(data)
        except (GraphFormatError, ValueError) as exc:
            raise InputError(f"<stdin>: {exc}") from exc
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {path}")
    try:
        return parse_graph(p.read_bytes())
    except (GraphFormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_solver_flags(p: argparse.ArgumentParser, max_u_default=DEFAULT_MAX_U):
    p.add_argument("--max-u", type=int, default=max_u_default, help="largest undersampling rate")
    p.add_argument("--opt-mode", default="optN", help="opt | optN[,b] | enum,b")
    p.add_argument("-n", dest="cap", type=int, default=0, help="solution cap (0 = all)")
    p.add_argument("--scc", default=None, help="'auto' (from the input's directed part) or a graph file")
    p.add_argument("--density-band", default=None, metavar="MIN:MAX")
    p.add_argument("--density-preset", choices=["matched"], default=None)
    p.add_argument("--strict-density", action="store_true", help="treat band violations as infeasible")
    p.add_argument("--priority", choices=["lex", "flat"], default="lex")
    p.add_argument("--workers", type=int, default=1)


def _solver_config(args, hyp: WeightedHypothesis) -> SolverConfig:
    try:
        mode = OptMode.parse(args.opt_mode, args.cap)
    except ValueError as exc:
        raise UsageError(f"--opt-mode: {exc}") from exc
    band = None
    if args.density_band and args.density_preset:
        raise UsageError("--density-band and --density-preset are exclusive")
    try:
        if args.density_band:
            band = DensityBand.parse(args.density_band)
            band.check(hyp.n)
        elif args.density_preset == "matched":
            band = DensityBand.matched(hyp)
    except ValueError as exc:
        raise UsageError(f"density band: {exc}") from exc
    scc = None
    if args.scc == "auto":
        scc = scc_decompose(DirectedGraph(hyp.n, hyp.graph.directed))
    elif args.scc:
        g = _read_graph(args.scc)
        if isinstance(g, WeightedHypothesis):
            g = DirectedGraph(g.n, g.graph.directed)
        if g.n != hyp.n:
            raise InputError("--scc graph has a different node count")
        scc = scc_decompose(g)
    try:
        return SolverConfig(
            max_u=args.max_u,
            mode=mode,
            band=band,
            priority=args.priority,
            scc_constraint=scc,
            workers=args.workers,
            strict_density=args.strict_density,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def format_solutions(sols: SolutionSet) -> str:
    """Solution blocks in graph text format, each under a ``--- solution`` separator."""
    opt = str(sols.optimum) if sols.optimum is not None else "none"
    parts = [
        f"# solutions={len(sols)} optimum={opt} complete={'true' if sols.complete else 'false'}\n"
    ]
    for s in sols.solutions:
        parts.append(f"--- solution u={s.u} cost={s.cost}\n")
        parts.append(write_graph(s.graph))
    return "".join(parts)


def parse_solutions(text: str) -> list[tuple[DirectedGraph, int, str]]:
    """Inverse of :func:`format_solutions` (graph, rate, cost text)."""
    blocks = []
    current = None
    for line in text.splitlines(keepends=True):
        if line.startswith("--- solution"):
            if current:
                blocks.append(current)
            fields = dict(tok.split("=", 1) for tok in line.split()[2:])
            current = [int(fields["u"]), fields["cost"], []]
        elif current is not None:
            current[2].append(line)
    if current:
        blocks.append(current)
    return [(parse_graph("".join(lines)), u, c) for u, c, lines in blocks]


# --------------------------------------------------------------------------
# subcommands

def cmd_undersample(args):
    g = _read_graph(args.input)
    if not isinstance(g, DirectedGraph):
        raise InputError("undersample expects a plain directed graph (d lines only)")
    if args.u < 1:
        raise UsageError("--u must be >= 1")
    _write(write_graph(undersample(g, args.u)), args.output)


def cmd_solve(args):
    hyp = as_hypothesis(_read_graph(args.input))
    cfg = _solver_config(args, hyp)
    log.info("solving n=%d max_u=%d mode=%s cap=%d", hyp.n, cfg.max_u, cfg.mode, cfg.mode.cap)
    sols = solve(hyp, cfg)
    log.info("found %d solutions, optimum %s", len(sols), sols.optimum)
    _write(format_solutions(sols), args.output)


def cmd_emit_asp(args):
    hyp = as_hypothesis(_read_graph(args.input))
    cfg = _solver_config(args, hyp)
    _write(emit_program(hyp, cfg).text, args.output)


def cmd_meta_solve(args):
    g = _read_graph(args.input)
    if not isinstance(g, DirectedGraph):
        raise InputError("meta-solve expects a first-order directed graph (d lines only)")
    try:
        policy = EnrichmentPolicy.parse(args.policy)
    except ValueError as exc:
        raise UsageError(f"--policy: {exc}") from exc
    cfg = _solver_config(args, as_hypothesis(g))
    _write(format_solutions(meta_solve(g, policy, cfg)), args.output)


def _bench_config(args) -> SolverConfig:
    max_u = args.max_u if args.max_u else max(args.u)
    try:
        return SolverConfig(
            max_u=max_u,
            mode=OptMode.parse(args.opt_mode, args.cap),
            priority=args.priority,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_bench_edgebreak(args):
    cfg = _bench_config(args)
    results, skipped = run_edgebreak(
        args.n, args.density, args.u, args.trials, args.seed, cfg, workers=args.trial_workers
    )
    if skipped:
        log.warning("skipped %d trials with empty undersampled graphs: %s", len(skipped), skipped)
    _write(edgebreak_csv(results), args.out)


def cmd_bench_var(args):
    cfg = _bench_config(args)
    results = run_var(
        args.n, args.density, args.u, args.trials, args.seed, args.noise, args.length,
        cfg, shortcut=args.shortcut, workers=args.trial_workers,
        threshold_d=args.threshold_d, threshold_b=args.threshold_b,
        adaptive_w_max=args.adaptive,
    )
    _write(var_csv(results), args.out)


def cmd_batch(args):
    p = Path(args.file)
    if not p.is_file():
        raise InputError(f"batch file not found: {args.file}")
    runs = parse_batch(p.read_text(encoding="utf-8"))
    # validate every stanza before running any
    parsed = [build_parser().parse_args(argv) for argv in runs]
    produced = set()  # files written by earlier stanzas count as present
    for ns in parsed:
        for attr in ("input", "scc"):
            val = getattr(ns, attr, None)
            if val and val not in ("auto", "-") and val not in produced and not Path(val).is_file():
                raise InputError(f"batch: input file not found: {val}")
        for attr in ("output", "out"):
            if getattr(ns, attr, None):
                produced.add(getattr(ns, attr))
    for ns in parsed:
        log.info("batch run: %s", ns.command)
        ns.func(ns)


def parse_batch(text: str) -> list[list[str]]:
    """Stanzas separated by blank lines; ``command = <sub>`` plus ``flag = value`` lines.

    A flag given without ``=`` is a switch; ``#`` starts a comment.
    """
    runs = []
    stanza: list[str] = []

    def flush():
        if not stanza:
            return
        cmd = None
        argv = []
        for line in stanza:
            key, sep, val = (s.strip() for s in line.partition("="))
            if key == "command":
                cmd = val
                continue
            flag = key if key.startswith("-") else f"--{key}"
            argv.append(flag)
            if sep:
                argv.extend(shlex.split(val))
        if cmd is None:
            raise UsageError("batch stanza without a 'command = ...' line")
        runs.append([cmd, *argv])
        stanza.clear()

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not raw.strip():
            flush()
        elif line:
            stanza.append(line)
    flush()
    return runs


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnr", description="Causal graphs at the causal timescale from undersampled observations.")
    parser.add_argument("--version", action="version", version=f"rnr {__version__}")
    parser.add_argument("--log", default="warning", metavar="LEVEL", help="diagnostic log level")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("undersample", help="undersample a causal graph at rate u")
    p.add_argument("--input", required=True)
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_undersample)

    p = sub.add_parser("solve", help="recover causal-timescale graphs from an observed graph")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("emit-asp", help="write the equivalent ASP program")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_emit_asp)

    p = sub.add_parser("meta-solve", help="enrich a first-order method's graph and solve")
    p.add_argument("--input", required=True)
    p.add_argument("--policy", default="10:2:5:10", metavar="WB:WT:WD:WA")
    p.add_argument("--output", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_meta_solve)

    for name, func in (("bench-edgebreak", cmd_bench_edgebreak), ("bench-var", cmd_bench_var)):
        p = sub.add_parser(name)
        p.add_argument("--n", type=int, default=5 if name == "bench-edgebreak" else 8)
        p.add_argument("--density", type=float, default=0.25)
        p.add_argument("--u", type=_int_list, default=[2, 3], help="rates, comma separated")
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--noise", type=float, default=1.0)
        p.add_argument("--length", type=int, default=5000)
        p.add_argument("--out", default=None)
        p.add_argument("--max-u", type=int, default=0, help="default: largest --u")
        p.add_argument("--opt-mode", default="optN")
        p.add_argument("-n", dest="cap", type=int, default=0)
        p.add_argument("--priority", choices=["lex", "flat"], default="lex")
        p.add_argument("--workers", type=int, default=1, help="solver workers")
        p.add_argument("--trial-workers", type=int, default=1)
        if name == "bench-var":
            p.add_argument("--shortcut", action="store_true", help="use the exact undersampled graph")
            p.add_argument("--threshold-d", type=float, default=0.1)
            p.add_argument("--threshold-b", type=float, default=0.2)
            p.add_argument("--adaptive", type=int, default=0, metavar="W_MAX",
                           help="adaptive weights up to W_MAX (0 = uniform)")
        p.set_defaults(func=func)

    p = sub.add_parser("batch", help="run stanzas from a key-value batch file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        level = getattr(logging, str(args.log).upper(), None)
        if not isinstance(level, int):
            raise UsageError(f"unknown log level {args.log!r}")
        logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"rnr: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"rnr: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
