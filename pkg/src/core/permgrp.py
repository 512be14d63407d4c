"""Permutation groups on the d^n vertices of a level.

Stabilizer chains are built with the Schreier-Sims algorithm. A randomized
product-replacement phase may run first; it only ever stops early when the
chain order reaches a known upper bound, otherwise the deterministic pass that
sifts every Schreier generator completes the chain.
"""
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from config.settings import get_group_level_cap
from src.core.errors import ArgumentError, check_level
from src.core.wreath_core import LevelPermutation, Permutation

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class PermGroup:
    """Group generated by level-n tables of a common degree"""
    degree: int
    level: int
    generators: List[LevelPermutation] = field(default_factory=list)

    def __post_init__(self):
        for g in self.generators:
            if g.degree != self.degree or g.level != self.level:
                raise ArgumentError(
                    f"generator on {g.degree}^{g.level} points in a group on {self.degree}^{self.level}"
                )

    @property
    def points(self) -> int:
        return self.degree ** self.level

    def identity(self) -> LevelPermutation:
        return LevelPermutation.identity(self.degree, self.level)


@dataclass
class ChainStats:
    sifts: int = 0
    schreier_generators: int = 0
    random_rounds: int = 0


@dataclass
class _ChainLevel:
    base_point: int
    generators: List[np.ndarray] = field(default_factory=list)
    transversal: Dict[int, np.ndarray] = field(default_factory=dict)
    inverses: Dict[int, np.ndarray] = field(default_factory=dict)
    checked: Set[Tuple[int, int]] = field(default_factory=set)


class StabilizerChain:
    """Base and strong generating set; ``b·u = p`` for the representative u of orbit point p"""

    def __init__(self, degree: int, level: int, base: Sequence[int] = ()):
        self.degree = degree
        self.level = level
        self.points = degree ** level
        self._identity = np.arange(self.points, dtype=np.int64)
        self.levels: List[_ChainLevel] = []
        self.stats = ChainStats()
        self.generators: List[LevelPermutation] = []
        for point in base:
            if not 0 <= point < self.points:
                raise ArgumentError(f"base point {point} out of range")
            self._new_level(int(point))

    def _is_identity(self, p: np.ndarray) -> bool:
        return bool(np.array_equal(p, self._identity))

    def _new_level(self, point: int) -> _ChainLevel:
        lvl = _ChainLevel(point)
        lvl.transversal[point] = self._identity
        lvl.inverses[point] = self._identity
        self.levels.append(lvl)
        return lvl

    @property
    def base(self) -> List[int]:
        return [lvl.base_point for lvl in self.levels]

    def order(self) -> int:
        return math.prod(len(lvl.transversal) for lvl in self.levels)

    def _extend_orbit(self, lvl: _ChainLevel) -> None:
        queue = deque(lvl.transversal)
        while queue:
            pt = queue.popleft()
            u = lvl.transversal[pt]
            for s in lvl.generators:
                img = int(s[pt])
                if img in lvl.transversal:
                    continue
                rep = s[u]
                inv = np.empty_like(rep)
                inv[rep] = self._identity
                lvl.transversal[img] = rep
                lvl.inverses[img] = inv
                queue.append(img)

    def _add_generator(self, h: np.ndarray, first: int, last: int) -> None:
        """Add h to levels first..last, opening a new level at its first moved point"""
        for k in range(first, last + 1):
            if k == len(self.levels):
                moved = np.flatnonzero(h != self._identity)
                self._new_level(int(moved[0]))
            self.levels[k].generators.append(h)
            self._extend_orbit(self.levels[k])

    def sift(self, p: np.ndarray, start: int = 0) -> Tuple[np.ndarray, int]:
        """Strip p through levels start..; returns the residue and the level it stopped at"""
        self.stats.sifts += 1
        for k in range(start, len(self.levels)):
            lvl = self.levels[k]
            inv = lvl.inverses.get(int(p[lvl.base_point]))
            if inv is None:
                return p, k
            p = inv[p]
        return p, len(self.levels)

    def insert(self, p: np.ndarray) -> bool:
        """Sift p from the top and store a nontrivial residue; True if the chain grew"""
        residue, stop = self.sift(p, 0)
        if self._is_identity(residue):
            return False
        self._add_generator(residue, 0, stop)
        return True

    def complete(self) -> None:
        """Sift all Schreier generators bottom-up until every one strips to the identity"""
        i = len(self.levels) - 1
        while i >= 0:
            lvl = self.levels[i]
            grown_at = None
            for pt in list(lvl.transversal):
                u = lvl.transversal[pt]
                for gi, s in enumerate(lvl.generators):
                    if (pt, gi) in lvl.checked:
                        continue
                    lvl.checked.add((pt, gi))
                    schreier = lvl.inverses[int(s[pt])][s[u]]
                    if self._is_identity(schreier):
                        continue
                    self.stats.schreier_generators += 1
                    residue, stop = self.sift(schreier, i + 1)
                    if self._is_identity(residue):
                        continue
                    self._add_generator(residue, i + 1, stop)
                    grown_at = stop
                    break
                if grown_at is not None:
                    break
            if grown_at is None:
                i -= 1
            else:
                i = min(grown_at, len(self.levels) - 1)

    def random_phase(self, rng: np.random.Generator, target_order: int, patience: int = 40) -> bool:
        """Product replacement; True once the order reaches target_order"""
        gens = [g.images for g in self.generators if not g.is_identity()]
        if not gens:
            return self.order() == target_order
        slots = gens + [self._identity] * max(0, 10 - len(gens))
        accu = self._identity

        def stir() -> np.ndarray:
            nonlocal accu
            i, j = rng.choice(len(slots), size=2, replace=False) if len(slots) > 1 else (0, 0)
            q = slots[j]
            if rng.integers(2):
                inv = np.empty_like(q)
                inv[q] = self._identity
                q = inv
            slots[i] = q[slots[i]]
            accu = slots[i][accu]
            return accu

        for _ in range(30):
            stir()
        quiet = 0
        while quiet < patience:
            self.stats.random_rounds += 1
            if self.insert(stir()):
                quiet = 0
                if self.order() == target_order:
                    return True
            else:
                quiet += 1
        return self.order() == target_order

    def contains_images(self, p: np.ndarray) -> bool:
        residue, _ = self.sift(p, 0)
        return self._is_identity(residue)

    def __repr__(self) -> str:
        return f"StabilizerChain(points={self.points}, base_length={len(self.levels)}, order={self.order()})"


def build_chain(
    group: PermGroup,
    seed: SeedLike = 0,
    base: Optional[Sequence[int]] = None,
    known_order: Optional[int] = None,
) -> StabilizerChain:
    """Verified stabilizer chain of ``group``.

    ``base`` fixes a prefix of the base. With ``known_order`` (an upper bound on
    the group order, e.g. the order of a known supergroup) a seeded random phase
    may certify the chain early; otherwise the deterministic pass runs.
    """
    chain = StabilizerChain(group.degree, group.level, base or ())
    chain.generators = list(group.generators)
    for g in group.generators:
        chain.insert(g.images)
    certified = False
    if known_order is not None:
        certified = chain.random_phase(as_rng(seed), known_order)
    if not certified:
        chain.complete()
    logger.debug(
        "chain on %d points: base length %d, order %d, %d sifts",
        chain.points, len(chain.levels), chain.order(), chain.stats.sifts,
    )
    return chain


def _check_table(chain: StabilizerChain, p: LevelPermutation) -> None:
    if p.degree != chain.degree or p.level != chain.level:
        raise ArgumentError(
            f"table on {p.degree}^{p.level} points tested against a chain on {chain.degree}^{chain.level}"
        )


def contains(chain: StabilizerChain, p: LevelPermutation) -> bool:
    _check_table(chain, p)
    return chain.contains_images(p.images)


def sift_residue(chain: StabilizerChain, p: LevelPermutation) -> LevelPermutation:
    _check_table(chain, p)
    residue, _ = chain.sift(p.images, 0)
    return LevelPermutation(chain.level, chain.degree, residue)


def is_subgroup(group: PermGroup, chain: StabilizerChain) -> bool:
    return all(contains(chain, g) for g in group.generators)


def equal_groups(g1: PermGroup, g2: PermGroup, seed: SeedLike = 0) -> bool:
    """Level-wise group equality: containment of generators, then orders"""
    if (g1.degree, g1.level) != (g2.degree, g2.level):
        raise ArgumentError("groups act on different point sets")
    chain2 = build_chain(g2, seed)
    if not is_subgroup(g1, chain2):
        return False
    chain1 = build_chain(g1, seed, known_order=chain2.order())
    return chain1.order() == chain2.order()


def _commutator(x: np.ndarray, y: np.ndarray, identity: np.ndarray) -> np.ndarray:
    xi = np.empty_like(x)
    xi[x] = identity
    yi = np.empty_like(y)
    yi[y] = identity
    # x^-1 y^-1 x y with x^-1 acting first
    return y[x[yi[xi]]]


def derived_subgroup(group: PermGroup) -> PermGroup:
    """Normal closure of the generator commutators, grown until no conjugate is new"""
    identity = np.arange(group.points, dtype=np.int64)
    gens = [g.images for g in group.generators]
    chain = StabilizerChain(group.degree, group.level)
    members: List[np.ndarray] = []
    for x, y in itertools.combinations(gens, 2):
        c = _commutator(x, y, identity)
        if chain.insert(c):
            members.append(c)
    chain.complete()
    queue = deque(members)
    while queue:
        h = queue.popleft()
        for g in gens:
            gi = np.empty_like(g)
            gi[g] = identity
            conj = g[h[gi]]  # g^-1 h g
            if not chain.contains_images(conj):
                chain.insert(conj)
                chain.complete()
                members.append(conj)
                queue.append(conj)
    logger.debug("derived subgroup on %d points: %d generators, order %d", group.points, len(members), chain.order())
    return PermGroup(group.degree, group.level, [LevelPermutation(group.level, group.degree, m) for m in members])


def is_transitive(group: PermGroup) -> bool:
    seen = np.zeros(group.points, dtype=bool)
    seen[0] = True
    frontier = np.array([0], dtype=np.int64)
    while frontier.size:
        images = np.concatenate([g.images[frontier] for g in group.generators]) if group.generators else frontier[:0]
        fresh = np.unique(images[~seen[images]])
        seen[fresh] = True
        frontier = fresh
    return bool(seen.all())


def uniform_sample(chain: StabilizerChain, seed: SeedLike = 0) -> LevelPermutation:
    """Product of one uniformly chosen coset representative per level, deepest first"""
    rng = as_rng(seed)
    result = chain._identity
    for lvl in reversed(chain.levels):
        points = list(lvl.transversal)
        u = lvl.transversal[points[int(rng.integers(len(points)))]]
        result = u[result]
    return LevelPermutation(chain.level, chain.degree, result)


def elements(chain: StabilizerChain) -> Iterator[LevelPermutation]:
    """Every group element once; only sensible for small groups"""
    reps = [list(lvl.transversal.values()) for lvl in reversed(chain.levels)]
    for choice in itertools.product(*reps):
        result = chain._identity
        for u in choice:
            result = u[result]
        yield LevelPermutation(chain.level, chain.degree, result)


def lift_on_points(
    chain: StabilizerChain, target: LevelPermutation, points: Sequence[int]
) -> Optional[LevelPermutation]:
    """Group element agreeing with ``target`` on ``points``.

    The chain must have been built with ``points`` as its base prefix; returns
    None when no member matches.
    """
    _check_table(chain, target)
    if chain.base[:len(points)] != list(points):
        raise ArgumentError("chain base does not start with the requested points")
    p = target.images
    reps = []
    for lvl in chain.levels[:len(points)]:
        pt = int(p[lvl.base_point])
        inv = lvl.inverses.get(pt)
        if inv is None:
            return None
        reps.append(lvl.transversal[pt])
        p = inv[p]
    result = chain._identity
    for u in reversed(reps):
        result = u[result]
    return LevelPermutation(chain.level, chain.degree, result)


def level_generator(level: int, degree: int, depth: int, root: Permutation) -> LevelPermutation:
    """Table acting as ``root`` below the vertex 1...1 of length ``depth``, trivially elsewhere"""
    g = LevelPermutation.from_wreath(
        [LevelPermutation.identity(degree, level - depth - 1)] * degree, root
    )
    identity_root = Permutation.identity(degree)
    for k in range(depth):
        rest = LevelPermutation.identity(degree, g.level)
        g = LevelPermutation.from_wreath([g] + [rest] * (degree - 1), identity_root)
    return g


def wn_order(n: int, degree: int = 3) -> int:
    """|W_n| = (d!)^((d^n - 1)/(d - 1))"""
    vertices = sum(degree ** k for k in range(n))
    return math.factorial(degree) ** vertices


def wn_generators(n: int, degree: int = 3, level_cap: Optional[int] = None) -> PermGroup:
    """Adjacent transpositions at the root and below each vertex 1...1"""
    check_level(n, get_group_level_cap() if level_cap is None else level_cap)
    if n < 1:
        raise ArgumentError("W_n generators need n >= 1")
    roots = [Permutation.from_cycles(degree, [(x, x + 1)]) for x in range(1, degree)]
    gens = [level_generator(n, degree, k, r) for k in range(n) for r in roots]
    return PermGroup(degree, n, gens)
