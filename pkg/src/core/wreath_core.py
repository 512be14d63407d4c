"""Tree automorphisms given by finite wreath recursions.

Conventions used throughout the package:

* letters are 1..d, vertices are tuples of letters, the root is ``()``;
* actions are on the right, so in a product ``g*h`` the factor ``g`` acts first;
* a level-n table lists the image index of every vertex of X^n, vertices being
  indexed lexicographically with the first letter most significant.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from config.settings import get_level_cap
from src.core.errors import ArgumentError, check_level

logger = logging.getLogger(__name__)

Vertex = Tuple[int, ...]
ChildRef = Optional[int]  # None is the identity

_CYCLE_RE = re.compile(r"\(([^()]*)\)")


@dataclass(frozen=True)
class Permutation:
    """Bijection of {1..d} stored as its one-line image table"""
    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ArgumentError(f"not a permutation of 1..{len(images)}: {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(tuple(range(1, degree + 1)))

    @classmethod
    def from_cycles(cls, degree: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        images = list(range(1, degree + 1))
        seen = set()
        for cycle in cycles:
            cycle = [int(x) for x in cycle]
            for x in cycle:
                if not 1 <= x <= degree:
                    raise ArgumentError(f"letter {x} out of range 1..{degree}")
                if x in seen:
                    raise ArgumentError(f"letter {x} appears in two cycles")
                seen.add(x)
            for x, y in zip(cycle, cycle[1:] + cycle[:1]):
                images[x - 1] = y
        return cls(tuple(images))

    @classmethod
    def parse(cls, degree: int, text: str) -> "Permutation":
        """Parse cycle notation such as ``(1 2)(3 4)``; ``()`` or empty is the identity"""
        stripped = text.strip()
        if _CYCLE_RE.sub("", stripped).strip():
            raise ArgumentError(f"could not parse permutation {text!r}")
        cycles = []
        for body in _CYCLE_RE.findall(stripped):
            letters = [tok for tok in re.split(r"[\s,]+", body.strip()) if tok]
            try:
                cycles.append([int(tok) for tok in letters])
            except ValueError:
                raise ArgumentError(f"could not parse permutation {text!r}")
        return cls.from_cycles(degree, cycles)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, x: int) -> int:
        if not 1 <= x <= self.degree:
            raise ArgumentError(f"letter {x} out of range 1..{self.degree}")
        return self.images[x - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        if other.degree != self.degree:
            raise ArgumentError("degree mismatch")
        return Permutation(tuple(other.images[x - 1] for x in self.images))

    def inverse(self) -> "Permutation":
        inv = [0] * self.degree
        for x, y in enumerate(self.images, start=1):
            inv[y - 1] = x
        return Permutation(tuple(inv))

    def __pow__(self, k: int) -> "Permutation":
        base = self if k >= 0 else self.inverse()
        result = Permutation.identity(self.degree)
        for _ in range(abs(k)):
            result = result * base
        return result

    def is_identity(self) -> bool:
        return all(x == i for i, x in enumerate(self.images, start=1))

    def cycles(self, include_fixed: bool = True) -> List[Tuple[int, ...]]:
        """Disjoint cycles, each starting at its smallest letter, sorted by that letter"""
        seen = set()
        out = []
        for start in range(1, self.degree + 1):
            if start in seen:
                continue
            cycle = [start]
            seen.add(start)
            x = self.images[start - 1]
            while x != start:
                cycle.append(x)
                seen.add(x)
                x = self.images[x - 1]
            if include_fixed or len(cycle) > 1:
                out.append(tuple(cycle))
        return out

    def cycle_type(self) -> Tuple[int, ...]:
        return tuple(sorted(len(c) for c in self.cycles()))

    def sign(self) -> int:
        transpositions = sum(len(c) - 1 for c in self.cycles())
        return -1 if transpositions % 2 else 1

    def order(self) -> int:
        return math.lcm(*(len(c) for c in self.cycles())) if self.degree else 1

    def __str__(self) -> str:
        moved = self.cycles(include_fixed=False)
        if not moved:
            return "()"
        return "".join("(" + " ".join(str(x) for x in c) + ")" for c in moved)


@dataclass(frozen=True)
class State:
    name: str
    root: Permutation
    children: Tuple[ChildRef, ...]


@dataclass(frozen=True)
class RecursionMachine:
    """Finite table of wreath recursions; children are state indices or None"""
    degree: int
    states: Tuple[State, ...]
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree < 1:
            raise ArgumentError(f"degree must be positive, got {self.degree}")
        names = [s.name for s in self.states]
        if len(set(names)) != len(names):
            raise ArgumentError(f"duplicate state names in {names}")
        for s in self.states:
            if s.root.degree != self.degree or len(s.children) != self.degree:
                raise ArgumentError(f"state {s.name} does not have degree {self.degree}")
            for child in s.children:
                if child is not None and not 0 <= child < len(self.states):
                    raise ArgumentError(f"state {s.name} has dangling child {child}")
        object.__setattr__(self, "_hash", hash((self.degree, self.states)))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def from_recursions(
        cls, degree: int, recursions: Sequence[Tuple[str, Permutation, Sequence[Optional[str]]]]
    ) -> "RecursionMachine":
        """Build from ``(name, root, child names)`` rows; ``None``, ``"1"`` or ``"id"`` is the identity"""
        index = {name: i for i, (name, _, _) in enumerate(recursions)}
        states = []
        for name, root, children in recursions:
            refs = []
            for child in children:
                if child is None or child in ("1", "id"):
                    refs.append(None)
                elif child in index:
                    refs.append(index[child])
                else:
                    raise ArgumentError(f"state {name} refers to unknown state {child!r}")
            states.append(State(name, root, tuple(refs)))
        return cls(degree, tuple(states))

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.states]

    def index(self, name: str) -> int:
        for i, s in enumerate(self.states):
            if s.name == name:
                return i
        raise ArgumentError(f"unknown state {name!r}")

    def element(self, name: str) -> "Element":
        return Element(self, ((self.index(name), 1),))

    def identity(self) -> "Element":
        return Element(self, ())


def join_machines(*machines: RecursionMachine) -> Tuple[RecursionMachine, List[int]]:
    """Disjoint union of machines; clashing names get primes appended.

    Returns the union and the index offset of each input machine.
    """
    degree = machines[0].degree
    if any(m.degree != degree for m in machines):
        raise ArgumentError("cannot join machines of different degree")
    states: List[State] = []
    offsets = []
    used = set()
    for m in machines:
        offset = len(states)
        offsets.append(offset)
        for s in m.states:
            name = s.name
            while name in used:
                name += "'"
            used.add(name)
            children = tuple(None if c is None else c + offset for c in s.children)
            states.append(State(name, s.root, children))
    return RecursionMachine(degree, tuple(states)), offsets


@dataclass(frozen=True)
class Element:
    """Unreduced signed word over the states of a machine"""
    machine: RecursionMachine
    word: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        for idx, exp in self.word:
            if exp not in (1, -1) or not 0 <= idx < len(self.machine.states):
                raise ArgumentError(f"bad word factor {(idx, exp)}")

    @property
    def degree(self) -> int:
        return self.machine.degree

    def __mul__(self, other: "Element") -> "Element":
        if other.machine != self.machine:
            left, right = rebase_all(self, other)
            return Element(left.machine, left.word + right.word)
        return Element(self.machine, self.word + other.word)

    def inverse(self) -> "Element":
        return Element(self.machine, tuple((i, -e) for i, e in reversed(self.word)))

    def __pow__(self, k: int) -> "Element":
        base = self if k >= 0 else self.inverse()
        return Element(self.machine, base.word * abs(k))

    def root(self) -> Permutation:
        result = Permutation.identity(self.degree)
        for idx, exp in self.word:
            r = self.machine.states[idx].root
            result = result * (r if exp > 0 else r.inverse())
        return result

    def __str__(self) -> str:
        if not self.word:
            return "1"
        names = self.machine.names
        return " ".join(names[i] if e > 0 else f"{names[i]}^-1" for i, e in self.word)


def rebase(e: Element, machine: RecursionMachine, offset: int) -> Element:
    return Element(machine, tuple((i + offset, x) for i, x in e.word))


def rebase_all(*elements: Element) -> List[Element]:
    """Move elements onto one machine, joining distinct machines once each"""
    distinct: List[RecursionMachine] = []
    for e in elements:
        if e.machine not in distinct:
            distinct.append(e.machine)
    if len(distinct) == 1:
        return list(elements)
    joined, offsets = join_machines(*distinct)
    return [rebase(e, joined, offsets[distinct.index(e.machine)]) for e in elements]


def product(*elements: Element) -> Element:
    moved = rebase_all(*elements)
    word: Tuple[Tuple[int, int], ...] = ()
    for e in moved:
        word += e.word
    return Element(moved[0].machine, word)


def commutator(e: Element, f: Element) -> Element:
    """[e, f] = e^-1 f^-1 e f"""
    return product(e.inverse(), f.inverse(), e, f)


def parse_word(machine: RecursionMachine, text: str) -> Element:
    """Parse tokens ``name``, ``name^-1`` or ``name^k`` separated by spaces or ``*``"""
    word: List[Tuple[int, int]] = []
    for token in re.split(r"[\s*]+", text.strip()):
        if not token or token == "1":
            continue
        name, _, exponent = token.partition("^")
        try:
            k = int(exponent) if exponent else 1
        except ValueError:
            raise ArgumentError(f"bad exponent in {token!r}")
        idx = machine.index(name)
        word.extend([(idx, 1 if k > 0 else -1)] * abs(k))
    return Element(machine, tuple(word))


def format_word(e: Element) -> List[str]:
    names = e.machine.names
    return [names[i] if x > 0 else f"{names[i]}^-1" for i, x in e.word]


def state_section(machine: RecursionMachine, state: Optional[int], x: int) -> ChildRef:
    """Child reference of a single state at letter x"""
    if not 1 <= x <= machine.degree:
        raise ArgumentError(f"letter {x} out of range 1..{machine.degree}")
    if state is None:
        return None
    return machine.states[state].children[x - 1]


def _check_vertex(v: Sequence[int], degree: int) -> Vertex:
    v = tuple(int(x) for x in v)
    for x in v:
        if not 1 <= x <= degree:
            raise ArgumentError(f"letter {x} out of range 1..{degree}")
    return v


def apply(e: Element, v: Sequence[int]) -> Vertex:
    """Image v·e of a vertex"""
    machine = e.machine
    v = _check_vertex(v, machine.degree)
    for idx, exp in e.word:
        out = []
        state: ChildRef = idx
        for x in v:
            if state is None:
                out.append(x)
                continue
            s = machine.states[state]
            if exp > 0:
                out.append(s.root(x))
                state = s.children[x - 1]
            else:
                z = s.root.inverse()(x)
                out.append(z)
                state = s.children[z - 1]
        v = tuple(out)
    return v


def _letter_section(e: Element, x: int) -> Element:
    machine = e.machine
    word = []
    y = x
    for idx, exp in e.word:
        s = machine.states[idx]
        if exp > 0:
            child = s.children[y - 1]
            y = s.root(y)
        else:
            y = s.root.inverse()(y)
            child = s.children[y - 1]
        if child is not None:
            word.append((child, exp))
    return Element(machine, tuple(word))


def section(e: Element, v: Sequence[int]) -> Element:
    """Word for the section e|_v, accumulated left to right along the word"""
    v = _check_vertex(v, e.degree)
    for x in v:
        e = _letter_section(e, x)
    return e


class LevelPermutation:
    """Action of a tree automorphism on X^n as an explicit image table"""

    __slots__ = ("level", "degree", "images")

    def __init__(self, level: int, degree: int, images):
        arr = np.asarray(images, dtype=np.int64)
        if arr.shape != (degree ** level,):
            raise ArgumentError(f"table of size {arr.shape} is not of size {degree}^{level}")
        arr = arr.copy() if arr.flags.writeable else arr
        arr.flags.writeable = False
        self.level = level
        self.degree = degree
        self.images = arr

    @classmethod
    def identity(cls, degree: int, level: int) -> "LevelPermutation":
        return cls(level, degree, np.arange(degree ** level, dtype=np.int64))

    @classmethod
    def from_permutation(cls, perm: Permutation) -> "LevelPermutation":
        return cls(1, perm.degree, np.array(perm.images, dtype=np.int64) - 1)

    @classmethod
    def from_wreath(cls, sections: Sequence["LevelPermutation"], root: Permutation) -> "LevelPermutation":
        """Table of (s_1, ..., s_d)·root one level deeper than the sections"""
        degree = root.degree
        if len(sections) != degree:
            raise ArgumentError(f"need {degree} sections, got {len(sections)}")
        level = sections[0].level
        if any(s.level != level or s.degree != degree for s in sections):
            raise ArgumentError("sections must share level and degree")
        block = degree ** level
        images = np.empty(degree * block, dtype=np.int64)
        for x in range(degree):
            images[x * block:(x + 1) * block] = (root.images[x] - 1) * block + sections[x].images
        return cls(level + 1, degree, images)

    @property
    def size(self) -> int:
        return self.images.shape[0]

    def key(self) -> bytes:
        return self.images.tobytes()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LevelPermutation)
            and other.degree == self.degree
            and other.level == self.level
            and bool(np.array_equal(self.images, other.images))
        )

    def __hash__(self) -> int:
        return hash((self.degree, self.level, self.key()))

    def __repr__(self) -> str:
        return f"LevelPermutation(level={self.level}, degree={self.degree})"

    def _check_compatible(self, other: "LevelPermutation") -> None:
        if other.degree != self.degree or other.level != self.level:
            raise ArgumentError(
                f"level tables differ: {self.degree}^{self.level} vs {other.degree}^{other.level}"
            )

    def __mul__(self, other: "LevelPermutation") -> "LevelPermutation":
        self._check_compatible(other)
        return LevelPermutation(self.level, self.degree, other.images[self.images])

    def inverse(self) -> "LevelPermutation":
        inv = np.empty_like(self.images)
        inv[self.images] = np.arange(self.size, dtype=np.int64)
        return LevelPermutation(self.level, self.degree, inv)

    def conjugate(self, w: "LevelPermutation") -> "LevelPermutation":
        """w·self·w^-1"""
        return w * self * w.inverse()

    def __pow__(self, k: int) -> "LevelPermutation":
        base = self if k >= 0 else self.inverse()
        result = LevelPermutation.identity(self.degree, self.level)
        for _ in range(abs(k)):
            result = result * base
        return result

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.images, np.arange(self.size)))

    def root(self) -> Permutation:
        if self.level == 0:
            return Permutation.identity(self.degree)
        block = self.degree ** (self.level - 1)
        return Permutation(tuple(int(self.images[x * block] // block) + 1 for x in range(self.degree)))

    def section(self, x: int) -> "LevelPermutation":
        """Section at letter x as a table one level up"""
        if self.level == 0:
            raise ArgumentError("level-0 tables have no sections")
        if not 1 <= x <= self.degree:
            raise ArgumentError(f"letter {x} out of range 1..{self.degree}")
        block = self.degree ** (self.level - 1)
        return LevelPermutation(self.level - 1, self.degree, self.images[(x - 1) * block:x * block] % block)

    def sections(self) -> List["LevelPermutation"]:
        return [self.section(x) for x in range(1, self.degree + 1)]

    def restrict_to(self, k: int) -> "LevelPermutation":
        if not 0 <= k <= self.level:
            raise ArgumentError(f"cannot restrict level {self.level} table to level {k}")
        step = self.degree ** (self.level - k)
        return LevelPermutation(k, self.degree, self.images[::step] // step)

    def apply(self, v: Sequence[int]) -> Vertex:
        v = _check_vertex(v, self.degree)
        if len(v) != self.level:
            raise ArgumentError(f"vertex {v} is not on level {self.level}")
        return vertex_letters(int(self.images[vertex_index(v, self.degree)]), self.degree, self.level)

    def cycles(self) -> List[List[int]]:
        seen = np.zeros(self.size, dtype=bool)
        out = []
        images = self.images
        for start in range(self.size):
            if seen[start]:
                continue
            cycle = [start]
            seen[start] = True
            x = int(images[start])
            while x != start:
                cycle.append(x)
                seen[x] = True
                x = int(images[x])
            out.append(cycle)
        return out

    def order(self) -> int:
        return math.lcm(*(len(c) for c in self.cycles()))

    def sign_profile(self) -> Tuple[int, ...]:
        """Products of local root signs on levels 0..level-1"""
        profile = []
        for k in range(self.level):
            deeper = self.restrict_to(k + 1).images.reshape(-1, self.degree) % self.degree
            sign = 1
            for row in deeper:
                sign *= Permutation(tuple(int(y) + 1 for y in row)).sign()
            profile.append(sign)
        return tuple(profile)

    def is_even_everywhere(self) -> bool:
        """Every local permutation even: membership in the iterated wreath power of A_d"""
        for k in range(self.level):
            deeper = self.restrict_to(k + 1).images.reshape(-1, self.degree) % self.degree
            for row in deeper:
                if Permutation(tuple(int(y) + 1 for y in row)).sign() < 0:
                    return False
        return True


def vertex_index(v: Sequence[int], degree: int) -> int:
    idx = 0
    for x in v:
        idx = idx * degree + (x - 1)
    return idx


def vertex_letters(index: int, degree: int, level: int) -> Vertex:
    letters = []
    for _ in range(level):
        index, r = divmod(index, degree)
        letters.append(r + 1)
    return tuple(reversed(letters))


@lru_cache(maxsize=8192)
def _state_table(machine: RecursionMachine, state: int, level: int) -> LevelPermutation:
    if level == 0:
        return LevelPermutation.identity(machine.degree, 0)
    s = machine.states[state]
    identity = LevelPermutation.identity(machine.degree, level - 1)
    children = [identity if c is None else _state_table(machine, c, level - 1) for c in s.children]
    return LevelPermutation.from_wreath(children, s.root)


@lru_cache(maxsize=8192)
def _state_inverse(machine: RecursionMachine, state: int, level: int) -> LevelPermutation:
    return _state_table(machine, state, level).inverse()


def restrict(e: Element, n: int, level_cap: Optional[int] = None) -> LevelPermutation:
    """Image table of e on X^n"""
    check_level(n, get_level_cap() if level_cap is None else level_cap)
    images = np.arange(e.degree ** n, dtype=np.int64)
    for idx, exp in e.word:
        table = _state_table(e.machine, idx, n) if exp > 0 else _state_inverse(e.machine, idx, n)
        images = table.images[images]
    return LevelPermutation(n, e.degree, images)


def order_at_level(e: Element, n: int, level_cap: Optional[int] = None) -> int:
    return restrict(e, n, level_cap).order()


def eq_at_level(e1: Element, e2: Element, n: int, level_cap: Optional[int] = None) -> bool:
    if e1.degree != e2.degree:
        raise ArgumentError(f"degree mismatch: {e1.degree} vs {e2.degree}")
    return restrict(e1, n, level_cap) == restrict(e2, n, level_cap)


def cyclic_section_product(e: Element, cycle: Sequence[int]) -> Element:
    """Product of sections along a root cycle, starting at its smallest letter"""
    cycle = _check_vertex(cycle, e.degree)
    if not cycle or len(set(cycle)) != len(cycle):
        raise ArgumentError(f"malformed cycle {cycle}")
    root = e.root()
    for x, y in zip(cycle, cycle[1:] + cycle[:1]):
        if root(x) != y:
            raise ArgumentError(f"{cycle} is not a cycle of the root permutation {root}")
    start = cycle.index(min(cycle))
    ordered = cycle[start:] + cycle[:start]
    return product(*(section(e, (x,)) for x in ordered))


@lru_cache(maxsize=8192)
def _state_signs(machine: RecursionMachine, state: int, depth: int) -> Tuple[int, ...]:
    s = machine.states[state]
    profile = [s.root.sign()]
    if depth > 0:
        deeper = [1] * depth
        for child in s.children:
            if child is None:
                continue
            for k, sign in enumerate(_state_signs(machine, child, depth - 1)):
                deeper[k] *= sign
        profile.extend(deeper)
    return tuple(profile)


def sign_profile(e: Element, depth: int, level_cap: Optional[int] = None) -> Tuple[int, ...]:
    """(Y_0(e), ..., Y_depth(e)) where Y_n is the product of root signs of all level-n sections"""
    check_level(depth, get_level_cap() if level_cap is None else level_cap, "depth")
    profile = [1] * (depth + 1)
    for idx, _ in e.word:
        for k, sign in enumerate(_state_signs(e.machine, idx, depth)):
            profile[k] *= sign
    return tuple(profile)


def wreath_literal(degree: int, root: Permutation, children: Sequence[Optional[str]] = (), name: str = "t") -> Element:
    """One-state machine for a literal like (1,1,1)(1 2 3); children may be None or the state itself"""
    children = list(children) or [None] * degree
    if any(c is not None and c != name for c in children):
        raise ArgumentError("a literal may only refer to itself")
    machine = RecursionMachine.from_recursions(degree, [(name, root, children)])
    return machine.element(name)


def standard_odometer(degree: int) -> Element:
    """(1, ..., 1, o)(1 2 ... d)"""
    root = Permutation.from_cycles(degree, [list(range(1, degree + 1))])
    return wreath_literal(degree, root, [None] * (degree - 1) + ["o"], name="o")


class StateSpec(BaseModel):
    name: str
    root_perm: List[int]
    children: List[str]


class MachineSpec(BaseModel):
    """JSON form of a recursion machine; children are state names or "id"."""
    degree: int = Field(ge=1)
    states: List[StateSpec]

    def to_machine(self) -> RecursionMachine:
        rows = [(s.name, Permutation(tuple(s.root_perm)), s.children) for s in self.states]
        return RecursionMachine.from_recursions(self.degree, rows)

    @classmethod
    def from_machine(cls, machine: RecursionMachine) -> "MachineSpec":
        names = machine.names
        return cls(
            degree=machine.degree,
            states=[
                StateSpec(
                    name=s.name,
                    root_perm=list(s.root.images),
                    children=["id" if c is None else names[c] for c in s.children],
                )
                for s in machine.states
            ],
        )

