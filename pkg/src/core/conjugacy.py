"""Level-wise conjugacy in the full automorphism group of the tree.

Two level-n tables are conjugate iff their canonical representatives are; the
canonical representative of ``(t_1, ..., t_d)σ`` keeps one nontrivial section per
cycle of σ, the cyclic section product, placed at the smallest letter of the cycle
and canonicalized recursively. Certificates ``w`` always satisfy ``w·h·w^-1 = g``.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms import bipartite

from src.core.errors import ArgumentError, UnsupportedInputError
from src.core.reports import CertificateModel, MatchingNode, SquareConditionEntry, SquareConditionReport
from src.core.wreath_core import (
    Element,
    LevelPermutation,
    Permutation,
    RecursionMachine,
    restrict,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CycleDecomposition:
    """Cycles of a root permutation, fixed points included"""
    cycles: Tuple[Tuple[int, ...], ...]

    @classmethod
    def of(cls, perm: Permutation) -> "CycleDecomposition":
        return cls(tuple(perm.cycles(include_fixed=True)))

    @property
    def leaders(self) -> List[int]:
        return [c[0] for c in self.cycles]

    def cycle_type(self) -> Tuple[int, ...]:
        return tuple(sorted(len(c) for c in self.cycles))


@dataclass
class ConjugacyCertificate:
    level: int
    conjugator: LevelPermutation
    nodes: List[Tuple[Tuple[int, ...], Tuple[int, ...]]] = field(default_factory=list)

    def verify(self, g: LevelPermutation, h: LevelPermutation) -> bool:
        return h.conjugate(self.conjugator) == g

    def to_model(self) -> CertificateModel:
        return CertificateModel(
            level=self.level,
            degree=self.conjugator.degree,
            conjugator=[int(x) for x in self.conjugator.images],
            nodes=[MatchingNode(path=list(path), mu=list(mu)) for path, mu in self.nodes],
        )


_Solution = Tuple[LevelPermutation, List[Tuple[Tuple[int, ...], Tuple[int, ...]]]]


class ConjugacySolver:
    """Canonical forms and recursive conjugator search with per-solver memo tables"""

    def __init__(self):
        self._canon: Dict[Tuple[int, int, bytes], Tuple[LevelPermutation, LevelPermutation]] = {}
        self._solved: Dict[Tuple[int, bytes, bytes], Optional[_Solution]] = {}

    def canonical(self, t: LevelPermutation) -> Tuple[LevelPermutation, LevelPermutation]:
        """(C, V) with C canonical and V·C·V^-1 = t, V of trivial root"""
        key = (t.degree, t.level, t.key())
        cached = self._canon.get(key)
        if cached is not None:
            return cached
        if t.level == 0:
            result = (t, t)
            self._canon[key] = result
            return result

        d = t.degree
        sigma = t.root()
        sections = t.sections()
        identity = LevelPermutation.identity(d, t.level - 1)
        v = [identity] * d
        canon_sections = [identity] * d
        deep = [identity] * d
        for cycle in sigma.cycles(include_fixed=True):
            cyclic = identity
            for x in cycle:
                cyclic = cyclic * sections[x - 1]
            # v_{x1} = 1, v_{x(k+1)} = t_{xk}^-1 v_{xk} c_{xk} with c = cyclic at the leader only
            v[cycle[0] - 1] = identity
            for k in range(len(cycle) - 1):
                c = cyclic if k == 0 else identity
                x = cycle[k]
                v[cycle[k + 1] - 1] = sections[x - 1].inverse() * v[x - 1] * c
            inner_c, inner_v = self.canonical(cyclic)
            canon_sections[cycle[0] - 1] = inner_c
            for x in cycle:
                deep[x - 1] = inner_v
        identity_root = Permutation.identity(d)
        shallow = LevelPermutation.from_wreath(v, identity_root)
        block = LevelPermutation.from_wreath(deep, identity_root)
        result = (LevelPermutation.from_wreath(canon_sections, sigma), shallow * block)
        self._canon[key] = result
        return result

    def solve_canonical(self, c: LevelPermutation, d: LevelPermutation) -> Optional[_Solution]:
        """u with u·d·u^-1 = c for canonical c, d, plus the matchings used"""
        key = (c.level, c.key(), d.key())
        if key in self._solved:
            return self._solved[key]
        result = self._solve(c, d)
        self._solved[key] = result
        return result

    def _solve(self, c: LevelPermutation, d: LevelPermutation) -> Optional[_Solution]:
        degree = c.degree
        if c.level == 0:
            return LevelPermutation.identity(degree, 0), []
        sigma = CycleDecomposition.of(c.root())
        tau = CycleDecomposition.of(d.root())
        if sigma.cycle_type() != tau.cycle_type():
            return None
        c_sections = c.sections()
        d_sections = d.sections()

        edges: Dict[Tuple[int, int], _Solution] = {}
        graphs: Dict[int, nx.Graph] = {}
        for i, left in enumerate(sigma.cycles):
            graph = graphs.setdefault(len(left), nx.Graph())
            graph.add_node(("L", i), bipartite=0)
            for j, right in enumerate(tau.cycles):
                if len(right) != len(left):
                    continue
                graph.add_node(("R", j), bipartite=1)
                found = self.solve_canonical(c_sections[left[0] - 1], d_sections[right[0] - 1])
                if found is not None:
                    edges[(i, j)] = found
                    graph.add_edge(("L", i), ("R", j))
        for graph in graphs.values():
            if not _has_perfect_matching(graph):
                return None

        # lexicographically smallest mu: leaders in increasing order, each to the smallest feasible leader
        assignment: Dict[int, int] = {}
        for length, graph in graphs.items():
            residual = graph.copy()
            lefts = sorted(i for kind, i in residual.nodes if kind == "L")
            for i in lefts:
                options = sorted(j for _, j in residual.neighbors(("L", i)))
                for j in options:
                    trial = residual.copy()
                    trial.remove_nodes_from([("L", i), ("R", j)])
                    if _has_perfect_matching(trial):
                        assignment[i] = j
                        residual = trial
                        break
                else:
                    return None

        mu_images = [0] * degree
        w_sections: List[Optional[LevelPermutation]] = [None] * degree
        nodes: List[Tuple[Tuple[int, ...], Tuple[int, ...]]] = []
        for i, left in enumerate(sigma.cycles):
            right = tau.cycles[assignment[i]]
            u, inner_nodes = edges[(i, assignment[i])]
            for x, y in zip(left, right):
                mu_images[x - 1] = y
            w_sections[left[0] - 1] = u
            for k in range(len(left) - 1):
                x = left[k]
                w_sections[left[k + 1] - 1] = (
                    c_sections[x - 1].inverse() * w_sections[x - 1] * d_sections[mu_images[x - 1] - 1]
                )
            for path, mu in inner_nodes:
                nodes.append(((left[0],) + path, mu))
        mu = Permutation(tuple(mu_images))
        nodes.insert(0, ((), mu.images))
        w = LevelPermutation.from_wreath(w_sections, mu)
        return w, nodes

    def find(self, g: LevelPermutation, h: LevelPermutation) -> Optional[ConjugacyCertificate]:
        if (g.degree, g.level) != (h.degree, h.level):
            raise ArgumentError("tables on different levels cannot be compared")
        cg, vg = self.canonical(g)
        ch, vh = self.canonical(h)
        solved = self.solve_canonical(cg, ch)
        if solved is None:
            return None
        u, nodes = solved
        w = vg * u * vh.inverse()
        return ConjugacyCertificate(g.level, w, nodes)


def _has_perfect_matching(graph: nx.Graph) -> bool:
    lefts = {n for n, side in graph.nodes(data="bipartite") if side == 0}
    if len(lefts) * 2 != graph.number_of_nodes():
        return False
    if not lefts:
        return True
    matching = bipartite.hopcroft_karp_matching(graph, top_nodes=lefts)
    return len(matching) == graph.number_of_nodes()


def find_conjugator(g: LevelPermutation, h: LevelPermutation) -> Optional[ConjugacyCertificate]:
    """Certificate w with w·h·w^-1 = g, or None when the tables are not conjugate"""
    return ConjugacySolver().find(g, h)


def conjugate_in_wn(g: Element, h: Element, n: int, level_cap: Optional[int] = None) -> Optional[ConjugacyCertificate]:
    if g.degree != h.degree:
        raise ArgumentError(f"degree mismatch: {g.degree} vs {h.degree}")
    certificate = find_conjugator(restrict(g, n, level_cap), restrict(h, n, level_cap))
    logger.debug("conjugacy at level %d: %s", n, "found" if certificate else "none")
    return certificate


def canonical_representative(g: Element, n: int, level_cap: Optional[int] = None) -> LevelPermutation:
    if n < 1:
        raise ArgumentError("canonical representatives need n >= 1")
    canon, _ = ConjugacySolver().canonical(restrict(g, n, level_cap))
    return canon


def is_odometer(e: Element, n: int, level_cap: Optional[int] = None) -> bool:
    """Single cycle through all d^n vertices"""
    if n < 1:
        raise ArgumentError("odometer check needs n >= 1")
    return restrict(e, n, level_cap).order() == e.degree ** n


def brute_force_conjugator(
    g: LevelPermutation, h: LevelPermutation, candidates: Sequence[LevelPermutation]
) -> Optional[LevelPermutation]:
    """First candidate w with w·h·w^-1 = g, checked over all candidates at once"""
    if not candidates:
        return None
    stack = np.stack([w.images for w in candidates])
    # w·h = g·w  <=>  h[w[i]] = w[g[i]] for every vertex i
    hits = np.flatnonzero((h.images[stack] == stack[:, g.images]).all(axis=1))
    return candidates[int(hits[0])] if hits.size else None


# Recursion systems over adjoined symbols.

Token = Tuple[str, int]


@dataclass(frozen=True)
class SymbolRecursion:
    name: str
    root: Permutation
    sections: Tuple[Tuple[Token, ...], ...]


@dataclass(frozen=True)
class RecursionSystem:
    """g_i ~ (h_i1, ..., h_id)σ_i where every h is a word over the symbols"""
    degree: int
    symbols: Tuple[SymbolRecursion, ...] = ()

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.symbols]


_SYSTEM_LINE = re.compile(r"^\s*(\S+)\s*~\s*\(([^)]*)\)\s*(.*)$")


def parse_system(text: str, degree: int) -> RecursionSystem:
    """Lines such as ``a ~ (a, b)(1 2)``; sections are words, ``1`` is empty"""
    symbols = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _SYSTEM_LINE.match(line)
        if not match:
            raise ArgumentError(f"line {lineno}: expected 'name ~ (w1, ..., wd)perm'")
        name, body, perm = match.groups()
        parts = [p.strip() for p in body.split(",")]
        if len(parts) != degree:
            raise ArgumentError(f"line {lineno}: {name} needs {degree} sections, got {len(parts)}")
        sections = tuple(_parse_tokens(p) for p in parts)
        symbols.append(SymbolRecursion(name, Permutation.parse(degree, perm), sections))
    return RecursionSystem(degree, tuple(symbols))


def _parse_tokens(word: str) -> Tuple[Token, ...]:
    tokens: List[Token] = []
    for tok in word.split():
        if tok == "1":
            continue
        name, _, exponent = tok.partition("^")
        try:
            k = int(exponent) if exponent else 1
        except ValueError:
            raise ArgumentError(f"bad exponent in {tok!r}")
        tokens.extend([(name, 1 if k > 0 else -1)] * abs(k))
    return tuple(tokens)


def free_reduce(word: Iterable[Token]) -> List[Token]:
    out: List[Token] = []
    for tok in word:
        if out and out[-1][0] == tok[0] and out[-1][1] == -tok[1]:
            out.pop()
        else:
            out.append(tok)
    return out


def cyclically_reduce(word: Iterable[Token]) -> List[Token]:
    out = free_reduce(word)
    while len(out) >= 2 and out[0][0] == out[-1][0] and out[0][1] == -out[-1][1]:
        out = out[1:-1]
    return out


def check_square_condition(system: RecursionSystem) -> SquareConditionReport:
    """Every cyclic section product must reduce cyclically to a power of one symbol"""
    names = set(system.names)
    entries = []
    for sym in system.symbols:
        for word in sym.sections:
            for name, _ in word:
                if name not in names:
                    raise UnsupportedInputError(f"{sym.name}: section mentions constant {name!r}")
        for cycle in sym.root.cycles(include_fixed=True):
            product: List[Token] = []
            for x in cycle:
                product.extend(sym.sections[x - 1])
            reduced = cyclically_reduce(product)
            if not reduced:
                entries.append(SquareConditionEntry(symbol=sym.name, cycle=list(cycle), power_of=None, exponent=0))
                continue
            heads = {tok for tok in reduced}
            if len(heads) != 1:
                text = " ".join(n if e > 0 else f"{n}^-1" for n, e in reduced)
                return SquareConditionReport(
                    holds=False,
                    entries=entries,
                    violation=f"{sym.name}: cycle {cycle} gives {text}, not a power of one symbol",
                )
            name, sign = reduced[0]
            entries.append(
                SquareConditionEntry(symbol=sym.name, cycle=list(cycle), power_of=name, exponent=sign * len(reduced))
            )
    return SquareConditionReport(holds=True, entries=entries)


def canonical_solutions(system: RecursionSystem) -> RecursionMachine:
    """Machine with one state per symbol: the cyclic power at each cycle's smallest letter"""
    report = check_square_condition(system)
    if not report.holds:
        raise ArgumentError(report.violation or "square condition fails")
    rows = {s.name: [None] * system.degree for s in system.symbols}
    for entry in report.entries:
        if entry.exponent not in (0, 1):
            raise UnsupportedInputError(
                f"{entry.symbol}: power {entry.power_of}^{entry.exponent} cannot be a single state"
            )
        if entry.exponent == 1:
            rows[entry.symbol][entry.cycle[0] - 1] = entry.power_of
    return RecursionMachine.from_recursions(
        system.degree, [(s.name, s.root, rows[s.name]) for s in system.symbols]
    )


def evaluate_system(
    system: RecursionSystem, assignment: Dict[str, LevelPermutation]
) -> Dict[str, LevelPermutation]:
    """For every symbol, the table of (phi(h_1), ..., phi(h_d))σ one level below the assignment"""
    level = next(iter(assignment.values())).level
    if level < 1:
        raise ArgumentError("evaluation needs assignments of level >= 1")
    identity = LevelPermutation.identity(system.degree, level - 1)
    out = {}
    for sym in system.symbols:
        sections = []
        for word in sym.sections:
            value = identity
            for name, sign in word:
                if name not in assignment:
                    raise UnsupportedInputError(f"no value for {name!r}")
                t = assignment[name].restrict_to(level - 1)
                value = value * (t if sign > 0 else t.inverse())
            sections.append(value)
        out[sym.name] = LevelPermutation.from_wreath(sections, sym.root)
    return out


def satisfies_system(system: RecursionSystem, assignment: Dict[str, LevelPermutation]) -> bool:
    """phi(g_i) is W_n-conjugate to its evaluated recursion for every symbol"""
    solver = ConjugacySolver()
    evaluated = evaluate_system(system, assignment)
    return all(solver.find(assignment[name], table) is not None for name, table in evaluated.items())
