"""Ramification portraits of cubic polynomials and their model generators.

Portrait DSL, one statement per line, ``#`` starts a comment::

    critical c1 deg=2
    map c1 -> p1

The point at infinity is implicit (critical, fixed, three incoming edges).
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from src.core.errors import ArgumentError, DomainViolation, PortraitParseError
from src.core.reports import PortraitModel, PortraitVertex
from src.core.wreath_core import Permutation, RecursionMachine

logger = logging.getLogger(__name__)

INFINITY = "∞"
DEGREE = 3
Y_CASES = ("2a", "2b", "3a", "3b")

_NAME = r"[A-Za-z0-9_][A-Za-z0-9_.']*"


class LineKind(Enum):
    """Statement kinds of the portrait DSL"""
    CRITICAL = "critical"
    MAP = "map"
    BLANK = "blank"


class Role(Enum):
    """Which critical value a generator family hangs off"""
    A = "a"
    B = "b"

    @property
    def root(self) -> Permutation:
        return Permutation.from_cycles(DEGREE, [(1, 2)] if self is Role.A else [(2, 3)])

    @property
    def slot(self) -> int:
        """Letter carrying the section of the critical-value generator"""
        return 1 if self is Role.A else 3


_LINE_PATTERNS = {
    LineKind.CRITICAL: re.compile(rf"^\s*critical\s+({_NAME})\s+deg\s*=\s*(\S+)\s*$"),
    LineKind.MAP: re.compile(rf"^\s*map\s+({_NAME})\s*->\s*(\S+)\s*$"),
}


@dataclass
class Portrait:
    """Finite part of a cubic ramification portrait"""
    image: Dict[str, str]
    critical: Tuple[str, str]

    @property
    def vertices(self) -> List[str]:
        return sorted(self.image)

    def deg(self, v: str) -> int:
        return 2 if v in self.critical else 1

    def preimages(self, v: str) -> List[str]:
        return sorted(u for u, w in self.image.items() if w == v)

    def multiplicity(self, v: str) -> int:
        return sum(self.deg(u) for u in self.preimages(v))

    def postcritical(self) -> Set[str]:
        out: Set[str] = set()
        for c in self.critical:
            v = self.image[c]
            while v not in out:
                out.add(v)
                v = self.image[v]
        return out

    def is_periodic(self, v: str) -> bool:
        w = self.image[v]
        for _ in range(len(self.image)):
            if w == v:
                return True
            w = self.image[w]
        return False


def _structure_errors(image: Dict[str, str], critical: Sequence[str]) -> Optional[Tuple[str, Optional[str]]]:
    """First structural problem as (message, offending vertex)"""
    if len(critical) != 2:
        return f"a cubic portrait needs exactly 2 finite critical points, got {len(critical)}", None
    if critical[0] == critical[1]:
        return f"critical point {critical[0]} declared twice", critical[1]
    for c in critical:
        if c not in image:
            return f"critical point {c} has no map edge", c
    for v, w in image.items():
        if w not in image:
            return f"unknown vertex {w}", v
    if image[critical[0]] == image[critical[1]]:
        return f"critical points {critical[0]} and {critical[1]} share the image {image[critical[0]]}", critical[1]
    portrait = Portrait(image, (critical[0], critical[1]))
    post = portrait.postcritical()
    for v in portrait.vertices:
        if v not in critical and v not in post:
            return f"vertex {v} is neither critical nor postcritical", v
        if portrait.multiplicity(v) > 3:
            return f"vertex {v} has {portrait.multiplicity(v)} incoming edges", v
    return None


def make_portrait(critical: Sequence[str], image: Dict[str, str]) -> Portrait:
    """Build a portrait from a map, raising PortraitParseError on structural problems"""
    problem = _structure_errors(image, list(critical))
    if problem:
        raise PortraitParseError(problem[0])
    return Portrait(dict(image), (critical[0], critical[1]))


def parse_portrait(text: str) -> Portrait:
    criticals: List[str] = []
    image: Dict[str, str] = {}
    where: Dict[str, Tuple[int, int]] = {}
    targets: List[Tuple[str, int, int]] = []
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        last = lineno
        kind, match = LineKind.BLANK, None
        if line.strip():
            for candidate, pattern in _LINE_PATTERNS.items():
                match = pattern.match(line)
                if match:
                    kind = candidate
                    break
            else:
                column = len(line) - len(line.lstrip()) + 1
                raise PortraitParseError(f"cannot parse {line.strip()!r}", lineno, column)
        if kind is LineKind.CRITICAL:
            name, deg = match.group(1), match.group(2)
            if deg != "2":
                raise PortraitParseError(f"finite critical points have deg=2, got deg={deg}", lineno, match.start(2) + 1)
            if name in criticals:
                raise PortraitParseError(f"critical point {name} declared twice", lineno, match.start(1) + 1)
            criticals.append(name)
            where.setdefault(name, (lineno, match.start(1) + 1))
        elif kind is LineKind.MAP:
            source, target = match.group(1), match.group(2)
            if source in image:
                raise PortraitParseError(f"vertex {source} already has an outgoing edge", lineno, match.start(1) + 1)
            if not re.fullmatch(_NAME, target):
                raise PortraitParseError(f"bad vertex name {target!r}", lineno, match.start(2) + 1)
            image[source] = target
            where[source] = (lineno, match.start(1) + 1)
            targets.append((target, lineno, match.start(2) + 1))
    for target, lineno, column in targets:
        if target not in image and target not in criticals:
            raise PortraitParseError(f"unknown vertex {target}", lineno, column)
    problem = _structure_errors(image, criticals)
    if problem:
        message, vertex = problem
        lineno, column = where.get(vertex, (last, None)) if vertex else (last, None)
        raise PortraitParseError(message, lineno, column)
    portrait = Portrait(image, (criticals[0], criticals[1]))
    logger.debug("parsed portrait with %d vertices", len(image))
    return portrait


def to_dsl(p: Portrait) -> str:
    lines = [f"critical {c} deg=2" for c in sorted(p.critical)]
    lines += [f"map {v} -> {p.image[v]}" for v in p.vertices]
    return "\n".join(lines) + "\n"


class YViolation(BaseModel):
    vertex: str
    multiplicity: int
    reason: str


class YReport(BaseModel):
    """Outcome of checking that infinity is the only vertex with three incoming edges"""
    valid: bool
    violations: List[YViolation] = Field(default_factory=list)
    cases: Dict[str, str] = Field(default_factory=dict)


def classify_portrait(p: Portrait) -> Dict[str, str]:
    """First-level shape (1a ... 3c) of the generator of every postcritical vertex"""
    post = p.postcritical()
    cases = {INFINITY: "1b"}
    for v in sorted(post):
        pre = p.preimages(v)
        crit = [u for u in pre if u in p.critical]
        plain = [u for u in pre if u not in p.critical]
        if crit:
            in_post = crit[0] in post
            if plain:
                cases[v] = "2d" if in_post else "2c"
            else:
                cases[v] = "2b" if in_post else "2a"
        else:
            cases[v] = {1: "3a", 2: "3b", 3: "3c"}[len(plain)]
    return cases


def validate_Y(p: Portrait) -> YReport:
    violations = []
    for v in p.vertices:
        mult = p.multiplicity(v)
        if mult > 2:
            violations.append(YViolation(vertex=v, multiplicity=mult, reason="three incoming edges"))
    for c in sorted(p.critical):
        value = p.image[c]
        if p.is_periodic(value) and not p.is_periodic(c):
            violations.append(
                YViolation(
                    vertex=value,
                    multiplicity=p.multiplicity(value),
                    reason=f"image of {c} is periodic but {c} is not",
                )
            )
    return YReport(valid=not violations, violations=violations, cases=classify_portrait(p))


@dataclass
class ModelGenerators:
    """Model generators a, b, c_1..c_r inside a recursion machine"""
    machine: RecursionMachine
    a: str
    b: str
    cs: List[str] = field(default_factory=list)
    labels: Dict[str, str] = field(default_factory=dict)  # portrait vertex -> state name

    @property
    def names(self) -> List[str]:
        return [self.a, self.b] + list(self.cs)

    @property
    def r(self) -> int:
        return len(self.cs)


def check_model_conditions(gens: ModelGenerators) -> List[str]:
    """Violated conditions among root shapes and Y1-Y4; empty when all hold"""
    m = gens.machine
    problems = []
    names = gens.names
    if len(set(names)) != len(names):
        problems.append("generator names repeat")
        return problems
    idx = {n: m.index(n) for n in names}
    generator_ids = set(idx.values())
    a, b = m.states[idx[gens.a]], m.states[idx[gens.b]]
    if a.root != Role.A.root or any(c is not None for c in a.children[1:]):
        problems.append(f"{gens.a} is not of the form (x,1,1)(1 2)")
    if b.root != Role.B.root or any(c is not None for c in b.children[:2]):
        problems.append(f"{gens.b} is not of the form (1,1,y)(2 3)")
    for c in gens.cs:
        if not m.states[idx[c]].root.is_identity():
            problems.append(f"{c} has a nontrivial root permutation")
    occurrences: Dict[int, int] = {}
    for n in names:
        for child in m.states[idx[n]].children:
            if child is None:
                continue
            if child not in generator_ids:
                problems.append(f"Y1: {n} has section {m.states[child].name} outside the generators")
            occurrences[child] = occurrences.get(child, 0) + 1
    for n in names:
        count = occurrences.get(idx[n], 0)
        if count != 1:
            problems.append(f"Y2: {n} occurs {count} times among the sections")
    for c in gens.cs:
        if all(child is not None for child in m.states[idx[c]].children):
            problems.append(f"Y3: {c} has no trivial section")
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(m.states)))
    for i, s in enumerate(m.states):
        graph.add_edges_from((i, child) for child in s.children if child is not None)
    for c in gens.cs:
        if not (nx.has_path(graph, idx[c], idx[gens.a]) or nx.has_path(graph, idx[c], idx[gens.b])):
            problems.append(f"Y4: no section of {c} equals {gens.a} or {gens.b}")
    return problems


def assert_model_conditions(gens: ModelGenerators) -> ModelGenerators:
    problems = check_model_conditions(gens)
    if problems:
        raise DomainViolation("; ".join(problems), problems)
    return gens


def synthesize_model(p: Portrait) -> ModelGenerators:
    """One state per finite postcritical vertex, sections given by postcritical preimages"""
    report = validate_Y(p)
    if not report.valid:
        raise DomainViolation(
            "portrait violates (Y): " + ", ".join(v.vertex for v in report.violations),
            [v.model_dump() for v in report.violations],
        )
    post = p.postcritical()
    first, second = sorted(p.critical)
    value_a, value_b = p.image[first], p.image[second]
    others = sorted(v for v in post if v not in (value_a, value_b))
    labels = {value_a: "a", value_b: "b"}
    labels.update({v: f"c{i}" for i, v in enumerate(others, start=1)})

    rows = []
    for v in [value_a, value_b] + others:
        q = [labels[u] for u in p.preimages(v) if u in post]
        children: List[Optional[str]] = [None, None, None]
        if v == value_a:
            root = Role.A.root
            if q:
                children[0] = q[0]
        elif v == value_b:
            root = Role.B.root
            if q:
                children[2] = q[0]
        else:
            root = Permutation.identity(DEGREE)
            for slot, name in enumerate(q[:2]):
                children[slot] = name
        rows.append((labels[v], root, children))
    machine = RecursionMachine.from_recursions(DEGREE, rows)
    gens = ModelGenerators(machine, "a", "b", [labels[v] for v in others], labels)
    return assert_model_conditions(gens)


@dataclass
class OrbitFamily:
    """Generators x_1..x_{s+m} of one critical orbit in a disjoint-orbit portrait"""
    role: Role
    s: int
    m: int
    machine: RecursionMachine

    @property
    def names(self) -> List[str]:
        return self.machine.names


def family_names(s: int, m: int, role: Role) -> List[str]:
    if s + m == 1:
        return [role.value]
    return [f"{role.value}{j}" for j in range(1, s + m + 1)]


def disjoint_orbit_family(s: int, m: int, role: Role) -> OrbitFamily:
    if m < 1:
        raise ArgumentError(f"period must be at least 1, got {m}")
    if s < 0:
        raise ArgumentError(f"preperiod must be non-negative, got {s}")
    role = Role(role)
    names = family_names(s, m, role)
    total = s + m
    identity = Permutation.identity(DEGREE)
    rows = []
    for j in range(1, total + 1):
        children: List[Optional[str]] = [None, None, None]
        root = identity
        if j == 1:
            root = role.root
            if s == 0:
                children[role.slot - 1] = names[total - 1]
        elif s > 0 and j == s + 1:
            children[0] = names[s - 1]
            children[1] = names[total - 1]
        else:
            children[0] = names[j - 2]
        rows.append((names[j - 1], root, children))
    return OrbitFamily(role, s, m, RecursionMachine.from_recursions(DEGREE, rows))


def critical_orbit(p: Portrait, c: str) -> Tuple[List[str], int, int]:
    """Orbit of the critical value of c as (points, preperiod s, period m)"""
    if c not in p.critical:
        raise ArgumentError(f"{c} is not a critical point")
    orbit: List[str] = []
    v = p.image[c]
    while v not in orbit:
        orbit.append(v)
        v = p.image[v]
    s = orbit.index(v)
    return orbit, s, len(orbit) - s


def has_disjoint_orbits(p: Portrait) -> bool:
    first, second = p.critical
    one = {first, *critical_orbit(p, first)[0]}
    two = {second, *critical_orbit(p, second)[0]}
    return not one & two


def family_parameters(p: Portrait) -> List[Tuple[int, int]]:
    """(s, m) of each critical orbit, role a first"""
    return [critical_orbit(p, c)[1:] for c in sorted(p.critical)]


def family_portrait(pairs: Sequence[Tuple[int, int]]) -> Portrait:
    """Disjoint-orbit portrait; critical points c1, c2 and orbit points p1.. and q1.."""
    if len(pairs) != 2:
        raise ArgumentError("need exactly two (s, m) pairs")
    image: Dict[str, str] = {}
    for crit, prefix, (s, m) in zip(("c1", "c2"), ("p", "q"), pairs):
        if m < 1 or s < 0:
            raise ArgumentError(f"bad orbit parameters {(s, m)}")
        total = s + m
        points = [f"{prefix}{j}" for j in range(1, total + 1)]
        if s == 0:
            points[total - 1] = crit
        else:
            image[crit] = points[0]
        for j in range(total):
            image[points[j]] = points[j + 1] if j + 1 < total else points[s]
        if s == 0:
            image[crit] = points[0] if total > 1 else crit
    return make_portrait(("c1", "c2"), image)


def to_graph(p: Portrait) -> nx.MultiDiGraph:
    graph = nx.MultiDiGraph()
    for v in p.vertices:
        graph.add_node(v, deg=p.deg(v))
    for v in p.vertices:
        for _ in range(p.deg(v)):
            graph.add_edge(v, p.image[v])
    return graph


def portraits_isomorphic(p: Portrait, q: Portrait) -> bool:
    return nx.is_isomorphic(to_graph(p), to_graph(q), node_match=lambda x, y: x["deg"] == y["deg"])


def export_dot(p: Portrait) -> str:
    """Graphviz digraph; the DSL text rides along as ``// portrait:`` comments"""
    lines = [f"// portrait: {line}" for line in to_dsl(p).splitlines()]
    lines.append("digraph portrait {")
    for v in p.vertices:
        shape = "doublecircle" if v in p.critical else "circle"
        lines.append(f'  "{v}" [shape={shape}];')
    lines.append(f'  "{INFINITY}" [shape=doublecircle];')
    for v in p.vertices:
        for _ in range(p.deg(v)):
            lines.append(f'  "{v}" -> "{p.image[v]}";')
    for _ in range(3):
        lines.append(f'  "{INFINITY}" -> "{INFINITY}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def portrait_from_dot(text: str) -> Portrait:
    prefix = "// portrait:"
    body = "\n".join(line[len(prefix):].strip() for line in text.splitlines() if line.startswith(prefix))
    return parse_portrait(body)


def export_json(p: Portrait) -> PortraitModel:
    return PortraitModel(
        vertices=[PortraitVertex(name=v, deg=p.deg(v), image=p.image[v]) for v in p.vertices]
    )


def enumerate_portraits(max_vertices: int) -> Iterator[Portrait]:
    """Every Y-portrait on vertices v0..v(k-1), k <= max_vertices, with v0 and v1 critical"""
    if max_vertices > 6:
        raise ArgumentError("exhaustive enumeration is limited to 6 vertices")
    for k in range(2, max_vertices + 1):
        names = [f"v{i}" for i in range(k)]
        for targets in _maps(k):
            image = {names[i]: names[t] for i, t in enumerate(targets)}
            if _structure_errors(image, names[:2]) is not None:
                continue
            p = Portrait(image, (names[0], names[1]))
            if validate_Y(p).valid:
                yield p


def _maps(k: int) -> Iterator[Tuple[int, ...]]:
    total = k ** k
    for code in range(total):
        digits = []
        for _ in range(k):
            code, d = divmod(code, k)
            digits.append(d)
        yield tuple(digits)


def random_portrait(rng: np.random.Generator, max_postcritical: int = 8, attempts: int = 1000) -> Portrait:
    """Seeded random Y-portrait grown along the two critical orbits"""
    if not 1 <= max_postcritical <= 8:
        raise ArgumentError("max_postcritical must be between 1 and 8")
    for _ in range(attempts):
        names = ["v0", "v1"]
        image: Dict[str, str] = {}
        for c in ("v0", "v1"):
            v = c
            while v not in image:
                fresh = len(names) < max_postcritical + 2 and rng.random() < 0.6
                if fresh:
                    target = f"v{len(names)}"
                    names.append(target)
                else:
                    target = names[int(rng.integers(len(names)))]
                image[v] = target
                v = target
        if _structure_errors(image, ["v0", "v1"]) is not None:
            continue
        p = Portrait(image, ("v0", "v1"))
        if len(p.postcritical()) <= max_postcritical and validate_Y(p).valid:
            return p
    raise ArgumentError("no Y-portrait found; raise attempts")
