"""Emit the search problem as an ASP program and read answer sets back.

The emitted text is plain ASP-Core-2 for the gringo/clasp pair. Running
it with ``--opt-mode=optN -n 0`` should give the same models as
:func:`rnr.solver.solve` in ``optN`` mode.
"""
from __future__ import annotations

import re
import shutil
import subprocess
from dataclasses import dataclass, field

from .graph_core import DirectedGraph, as_hypothesis
from .objective import FLAT, LEX, CostVector, DensityBand
from .solver import Solution, SolutionSet, SolverConfig, _canonical

# priority levels of the weak constraints under the lex scheme
LEVELS_LEX = {"density": 3, "bidirected": 2, "directed": 1}
LEVELS_FLAT = {"density": 1, "bidirected": 1, "directed": 1}

SUGGESTED_FLAGS = "--opt-mode=optN -n 0"


class AnswerSetParseError(ValueError):
    pass


@dataclass(frozen=True)
class AspProgram:
    text: str
    n: int
    max_u: int
    atom_map: dict = field(default_factory=dict)

    def __str__(self):
        return self.text


_DEFINED = """\
% predicates that may have no facts
#defined hdirected/2.
#defined hbidirected/2.
#defined wpd/3.
#defined wpb/3.
"""

_RULES = """\
% rate: exactly one undersampling rate per model
1 {{u(1..{max_u})}} 1.

% candidate causal-timescale graph: any subset of node pairs
{{ edge1(X,Y) : node(X), node(Y) }}.

% walks of each length up to the chosen rate
directed(X,Y,1) :- edge1(X,Y).
directed(X,Y,L+1) :- directed(X,Z,L), edge1(Z,Y), u(U), L < U.

% undersampled graph
gdirected(X,Y) :- directed(X,Y,U), u(U).
gbidirected(X,Y) :- directed(Z,X,L), directed(Z,Y,L), u(U), L < U, X < Y.
"""

_SCC_CONSTRAINT = """\
% SCCs must stay connected along the given condensation DAG
:- edge1(X, Y), scc(X, K), scc(Y, L), K != L,
   sccsize(L, Z), Z > 1, not dag(K,L).
"""

_WEAK = """\
% weighted disagreement with the observed graph
edgecount(C) :- C = #count {{ X,Y : edge1(X,Y) }}.
:~ edgecount(C), dmax(M), C > M. [C-M@{density},density]
:~ edgecount(C), dmin(M), C < M. [M-C@{density},density]
:~ hbidirected(X,Y), not gbidirected(X,Y), wpb(X,Y,W). [W@{bidirected},X,Y,bomit]
:~ gbidirected(X,Y), not hbidirected(X,Y), wab(X,Y,W). [W@{bidirected},X,Y,bcommit]
:~ hdirected(X,Y), not gdirected(X,Y), wpd(X,Y,W). [W@{directed},X,Y,domit]
:~ gdirected(X,Y), not hdirected(X,Y), wad(X,Y,W). [W@{directed},X,Y,dcommit]
"""

_STRICT = """\
:- edgecount(C), dmax(M), C > M.
:- edgecount(C), dmin(M), C < M.
"""

_SHOW = """\
#show edge1/2.
#show u/1.
"""


def emit_program(hyp, cfg: SolverConfig | None = None) -> AspProgram:
    hyp = as_hypothesis(hyp)
    cfg = cfg or SolverConfig()
    g = hyp.graph
    n = g.n
    band = cfg.band or DensityBand.inactive(n)
    levels = LEVELS_FLAT if cfg.priority == FLAT else LEVELS_LEX
    out = [
        f"% run: clingo <this file> {SUGGESTED_FLAGS}",
        "",
        "% observed graph",
        f"node(1..{n}).",
    ]
    out += [f"hdirected({i},{j})." for i, j in g.directed_edges()]
    out += [f"hbidirected({i},{j})." for i, j in g.bidirected_edges()]

    out += ["", "% presence weights"]
    out += [f"wpd({i},{j},{w})." for (i, j), w in hyp.directed_weights().items()]
    out += [f"wpb({i},{j},{w})." for (i, j), w in hyp.bidirected_weights().items()]
    out += ["", "% absence weights"]
    absence = hyp.global_absence()
    if absence is not None:
        out.append(f"wad(X,Y,{absence[0]}) :- node(X), node(Y).")
        out.append(f"wab(X,Y,{absence[1]}) :- node(X), node(Y), X < Y.")
    else:
        for i in range(n):
            for j in range(n):
                if not g.directed[i, j]:
                    out.append(f"wad({i + 1},{j + 1},{int(hyp.absence_d[i, j])}).")
        bm = g.bidirected_matrix
        for i in range(n):
            for j in range(i + 1, n):
                if not bm[i, j]:
                    out.append(f"wab({i + 1},{j + 1},{int(hyp.absence_b[i, j])}).")
    out += ["", "% density band", f"dmin({band.d_min}).", f"dmax({band.d_max})."]

    scc = cfg.scc_constraint
    if scc is not None:
        out += ["", "% strongly connected components of the causal graph"]
        out += [f"scc({v},{k})." for v, k in enumerate(scc.assignment, start=1)]
        out += [f"sccsize({k},{z})." for k, z in sorted(scc.sizes.items())]
        out += [f"dag({k},{l})." for k, l in sorted(scc.condensation)]

    text = "\n".join(out) + "\n\n" + _DEFINED + "\n" + _RULES.format(max_u=cfg.max_u)
    if scc is not None:
        text += "\n" + _SCC_CONSTRAINT
    text += "\n" + _WEAK.format(**levels)
    if cfg.strict_density:
        text += _STRICT
    text += "\n" + _SHOW
    atom_map = {
        "edge1": "directed edge i->j of the causal-timescale graph",
        "u": "undersampling rate",
    }
    return AspProgram(text, n, cfg.max_u, atom_map)


_ATOM = re.compile(r"^([a-z_][A-Za-z0-9_']*)(?:\(([^()]*)\))?$")


def _parse_atom(tok: str, lineno: int):
    m = _ATOM.match(tok)
    if not m:
        raise AnswerSetParseError(f"line {lineno}: cannot parse atom {tok!r}")
    name, args = m.group(1), m.group(2)
    try:
        vals = tuple(int(a) for a in args.split(",")) if args else ()
    except ValueError:
        raise AnswerSetParseError(f"line {lineno}: non-integer argument in {tok!r}") from None
    return name, vals


def parse_answer_sets(
    text: str,
    n: int,
    priority: str = LEX,
    optimal_only: bool = True,
) -> SolutionSet:
    """Read clingo's text output into a :class:`SolutionSet`.

    Each ``Answer:`` line is followed by the model's atoms and, for
    optimisation runs, an ``Optimization:`` line listing level costs from
    highest priority down. Lex runs map up to three levels onto
    (density, bidirected, directed), right-aligned; a flat run's single
    value is stored as the directed component. During optimisation clingo
    also prints improving non-optimal models; ``optimal_only`` drops them.
    """
    lines = text.splitlines()
    models = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("Answer:"):
            if i + 1 >= len(lines):
                raise AnswerSetParseError(f"line {i + 1}: answer without a model line")
            atoms_line = lines[i + 1].strip()
            edges = []
            rates = []
            for tok in atoms_line.split():
                name, vals = _parse_atom(tok, i + 2)
                if name == "edge1" and len(vals) == 2:
                    a, b = vals
                    if not (1 <= a <= n and 1 <= b <= n):
                        raise AnswerSetParseError(f"line {i + 2}: {tok} outside nodes 1..{n}")
                    edges.append((a, b))
                elif name == "u" and len(vals) == 1:
                    if vals[0] < 1:
                        raise AnswerSetParseError(f"line {i + 2}: invalid rate {tok}")
                    rates.append(vals[0])
                else:
                    raise AnswerSetParseError(f"line {i + 2}: unexpected atom {tok}")
            if len(rates) != 1:
                raise AnswerSetParseError(f"line {i + 2}: model needs exactly one u/1 atom")
            costs = CostVector()
            j = i + 2
            if j < len(lines) and lines[j].strip().startswith("Optimization:"):
                try:
                    vals = [int(v) for v in lines[j].split(":", 1)[1].split()]
                except ValueError:
                    raise AnswerSetParseError(f"line {j + 1}: bad optimization line") from None
                if priority == FLAT:
                    if len(vals) > 1:
                        raise AnswerSetParseError(f"line {j + 1}: flat run has one level")
                    costs = CostVector(0, 0, vals[0] if vals else 0)
                else:
                    if len(vals) > 3:
                        raise AnswerSetParseError(f"line {j + 1}: more than three levels")
                    costs = CostVector(*([0] * (3 - len(vals)) + vals))
                j += 1
            models.append(Solution(DirectedGraph.from_edges(n, edges), rates[0], costs))
            i = j
            continue
        i += 1

    complete = not re.search(r"Models\s*:\s*\d+\+", text)
    if not models:
        return SolutionSet.empty(n, complete)
    if optimal_only:
        best = min(m.cost.key(priority) for m in models)
        models = [m for m in models if m.cost.key(priority) == best]
    unique = {}
    for m in models:
        unique.setdefault((m.graph, m.u), m)
    return _canonical(unique.values(), None, complete, priority)


def find_clingo() -> str | None:
    return shutil.which("clingo")


def run_clingo(program: AspProgram, binary: str | None = None, extra=("--opt-mode=optN", "-n", "0")) -> str:
    """Run an external clingo binary on ``program`` and return its stdout."""
    binary = binary or find_clingo()
    if binary is None:
        raise FileNotFoundError("clingo binary not found on PATH")
    proc = subprocess.run(
        [binary, *extra], input=program.text, capture_output=True, text=True, check=False
    )
    # clingo exit codes encode SAT/UNSAT/optimum bits; 1 and 65+ are real errors
    if proc.returncode in (1,) or proc.returncode >= 65:
        raise RuntimeError(f"clingo failed ({proc.returncode}): {proc.stderr.strip()}")
    return proc.stdout
