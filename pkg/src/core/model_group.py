"""Model groups G = <<a, b, c_1, ..., c_r>> and the constructions their proofs rely on.

Level groups G_n, their derived subgroups and section lifts are computed on the
d^n points of a level. The constructive results (order-two corrections,
torsion elements, generator multipliers) are finite recursion machines, so
every returned object is a genuine Element that can be restricted to any level.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from config.settings import get_group_level_cap, get_level_cap
from src.core.conjugacy import ConjugacySolver
from src.core.errors import ArgumentError, ProcedureFailure, ResourceCapError, check_level
from src.core.permgrp import (
    PermGroup,
    StabilizerChain,
    build_chain,
    contains,
    derived_subgroup,
    lift_on_points,
)
from src.core.portrait import (
    DEGREE,
    ModelGenerators,
    OrbitFamily,
    Portrait,
    Role,
    assert_model_conditions,
    disjoint_orbit_family,
    parse_portrait,
    synthesize_model,
)
from src.core.wreath_core import (
    Element,
    LevelPermutation,
    Permutation,
    RecursionMachine,
    commutator,
    join_machines,
    product,
    restrict,
)

logger = logging.getLogger(__name__)

Word = Tuple[Tuple[str, int], ...]

ROTATION = Permutation.from_cycles(DEGREE, [(1, 2, 3)])
ROTATION_INVERSE = ROTATION.inverse()


def invert(word: Word) -> Word:
    return tuple((name, -exp) for name, exp in reversed(word))


def word_of(e: Element) -> Word:
    names = e.machine.names
    return tuple((names[i], exp) for i, exp in e.word)


def element_of(machine: RecursionMachine, word: Word) -> Element:
    index = {name: i for i, name in enumerate(machine.names)}
    try:
        return Element(machine, tuple((index[name], exp) for name, exp in word))
    except KeyError as e:
        raise ArgumentError(f"unknown state {e.args[0]!r}")


class MachineBuilder:
    """Grows a recursion machine state by state on top of an existing one"""

    def __init__(self, base: RecursionMachine):
        self.degree = base.degree
        names = base.names
        self._rows: Dict[str, Tuple[Permutation, List[Optional[str]]]] = {
            s.name: (s.root, [None if c is None else names[c] for c in s.children]) for s in base.states
        }
        self._lifts: Dict[Tuple[int, str], str] = {}

    def fresh(self, stem: str) -> str:
        name = stem
        while name in self._rows:
            name += "'"
        return name

    def add(self, name: str, root: Permutation, children: Sequence[Optional[str]]) -> str:
        if name in self._rows:
            raise ArgumentError(f"state {name!r} already defined")
        self._rows[name] = (root, list(children))
        return name

    def lift(self, slot: int, word: Word) -> Word:
        """Word for (1, .., w, .., 1) with w at ``slot``; lifting is a homomorphism"""
        out = []
        for name, exp in word:
            key = (slot, name)
            if key not in self._lifts:
                children: List[Optional[str]] = [None] * self.degree
                children[slot - 1] = name
                self._lifts[key] = self.add(self.fresh(f"{name}@{slot}"), Permutation.identity(self.degree), children)
            out.append((self._lifts[key], exp))
        return tuple(out)

    def build(self) -> RecursionMachine:
        return RecursionMachine.from_recursions(
            self.degree, [(name, root, children) for name, (root, children) in self._rows.items()]
        )


def padded_sections(sections: Dict[int, LevelPermutation], degree: int, level: int) -> Dict[int, LevelPermutation]:
    """Fill identity sections until all but one letter are prescribed, which pins the root"""
    out = dict(sections)
    for x in range(1, degree + 1):
        if len(out) >= degree - 1:
            break
        out.setdefault(x, LevelPermutation.identity(degree, level - 1))
    return out


def section_points(degree: int, level: int, positions: Sequence[int]) -> List[int]:
    """Base prefix covering the blocks below ``positions``"""
    if len(set(positions)) < degree - 1:
        raise ArgumentError(f"need at least {degree - 1} prescribed sections, got {sorted(positions)}")
    block = degree ** (level - 1)
    return [(p - 1) * block + j for p in sorted(positions) for j in range(block)]


def wreath_table(sections: Dict[int, LevelPermutation], degree: int, level: int) -> LevelPermutation:
    """Level table with the given first-level sections, identity sections elsewhere and trivial root"""
    identity = LevelPermutation.identity(degree, level - 1)
    rows = []
    for x in range(1, degree + 1):
        s = sections.get(x, identity)
        if s.level != level - 1 or s.degree != degree:
            raise ArgumentError(f"section at {x} is not a level-{level - 1} table")
        rows.append(s)
    return LevelPermutation.from_wreath(rows, Permutation.identity(degree))


def lift_in_chain(
    chain: StabilizerChain, sections: Dict[int, LevelPermutation]
) -> Optional[LevelPermutation]:
    """Member of the chain's group with the prescribed sections and trivial root, or None"""
    points = section_points(chain.degree, chain.level, list(sections))
    target = wreath_table(sections, chain.degree, chain.level)
    return lift_on_points(chain, target, points)


def section_chain(group: PermGroup, positions: Sequence[int], seed: int = 0) -> StabilizerChain:
    return build_chain(group, seed, base=section_points(group.degree, group.level, positions))


@dataclass
class TorsionElement:
    element: Element
    level: int
    order: int


class ModelGroup:
    """Model group with cached level groups, derived subgroups and lifting chains"""

    def __init__(self, gens: ModelGenerators, level_cap: Optional[int] = None):
        self.gens = assert_model_conditions(gens)
        self.level_cap = level_cap
        self.portrait: Optional[Portrait] = None
        self.families: List[OrbitFamily] = []
        self._chains: Dict[int, StabilizerChain] = {}
        self._derived: Dict[int, Tuple[PermGroup, StabilizerChain]] = {}
        self._lift_chains: Dict[Tuple[int, Tuple[int, ...]], StabilizerChain] = {}
        self._correction: Optional[Tuple[RecursionMachine, Dict[str, Tuple[str, str]]]] = None

    @classmethod
    def from_portrait(cls, portrait: Union[str, Portrait], level_cap: Optional[int] = None) -> "ModelGroup":
        p = parse_portrait(portrait) if isinstance(portrait, str) else portrait
        group = cls(synthesize_model(p), level_cap)
        group.portrait = p
        return group

    @classmethod
    def from_families(cls, pairs: Sequence[Tuple[int, int]], level_cap: Optional[int] = None) -> "ModelGroup":
        """Disjoint-orbit model group: first pair on role a, second on role b"""
        if len(pairs) != 2:
            raise ArgumentError("need exactly two (s, m) pairs")
        (s1, m1), (s2, m2) = pairs
        fa = disjoint_orbit_family(s1, m1, Role.A)
        fb = disjoint_orbit_family(s2, m2, Role.B)
        machine, _ = join_machines(fa.machine, fb.machine)
        names_a, names_b = fa.names, fb.names
        gens = ModelGenerators(machine, names_a[0], names_b[0], names_a[1:] + names_b[1:])
        group = cls(gens, level_cap)
        group.families = [fa, fb]
        return group

    @property
    def machine(self) -> RecursionMachine:
        return self.gens.machine

    @property
    def r(self) -> int:
        return self.gens.r

    @property
    def group_cap(self) -> int:
        return get_group_level_cap() if self.level_cap is None else self.level_cap

    def element(self, name: str) -> Element:
        return self.machine.element(name)

    def generator_elements(self) -> List[Element]:
        return [self.element(n) for n in self.gens.names]

    def odometer(self) -> Element:
        """a·b·c_1⋯c_r"""
        return product(*self.generator_elements())

    def rotation(self) -> Element:
        """[a, b] = (1,1,1)(1 2 3)"""
        return commutator(self.element(self.gens.a), self.element(self.gens.b))

    def generator_tables(self, n: int) -> List[LevelPermutation]:
        return [restrict(e, n) for e in self.generator_elements()]

    def level_group(self, n: int) -> PermGroup:
        check_level(n, self.group_cap)
        return PermGroup(DEGREE, n, self.generator_tables(n))

    def chain(self, n: int) -> StabilizerChain:
        if n not in self._chains:
            self._chains[n] = build_chain(self.level_group(n), seed=0)
            logger.debug("G_%d has order %d", n, self._chains[n].order())
        return self._chains[n]

    def order(self, n: int) -> int:
        return self.chain(n).order()

    def contains(self, n: int, table: LevelPermutation) -> bool:
        return contains(self.chain(n), table)

    def derived(self, n: int) -> Tuple[PermGroup, StabilizerChain]:
        if n not in self._derived:
            group = derived_subgroup(self.level_group(n))
            self._derived[n] = (group, build_chain(group, seed=0))
        return self._derived[n]

    def lift_sections(self, n: int, sections: Dict[int, LevelPermutation]) -> Optional[LevelPermutation]:
        """Member of G_n with the given sections and trivial root, or None if there is none"""
        if n < 1:
            raise ArgumentError("sections live one level below n >= 1")
        sections = padded_sections(sections, DEGREE, n)
        key = (n, tuple(sorted(sections)))
        if key not in self._lift_chains:
            self._lift_chains[key] = section_chain(self.level_group(n), list(sections))
        return lift_in_chain(self._lift_chains[key], sections)

    def _require_lift(self, n: int, sections: Dict[int, LevelPermutation]) -> LevelPermutation:
        lifted = self.lift_sections(n, sections)
        if lifted is None:
            raise ProcedureFailure(
                f"G_{n} has no element with sections at {sorted(sections)} as prescribed",
                {"level": n, "positions": sorted(sections)},
            )
        return lifted

    def _section_name(self, gen: str, slot: int) -> Optional[str]:
        state = self.machine.states[self.machine.index(gen)]
        child = state.children[slot - 1]
        return None if child is None else self.machine.names[child]

    def _occurrence(self, name: str) -> Tuple[str, int]:
        for owner in self.gens.names:
            for slot in range(1, DEGREE + 1):
                if self._section_name(owner, slot) == name:
                    return owner, slot
        raise ArgumentError(f"{name} is not a section of any generator")

    def self_replication_witness(self, name: str) -> Element:
        """Element of G of the form (ℓ, *, 1) for the generator ℓ = ``name``"""
        ell = self.element(name)
        a, b = self.element(self.gens.a), self.element(self.gens.b)
        t = self.rotation()
        owner, slot = self._occurrence(name)
        if owner == self.gens.a:
            return a ** 2
        if owner == self.gens.b:
            return product(t, b ** 2, t.inverse())
        c = self.element(owner)
        # conjugating by t^k moves section k+1 to the first slot
        k = slot - 1
        rotated = product(t ** k, c, t ** -k) if k else c
        children = self.machine.states[self.machine.index(owner)].children
        third = children[(slot + 1) % DEGREE]
        if third is None:
            return rotated
        return product(b, rotated, b.inverse())

    def forms_witnesses(self, g: LevelPermutation) -> Dict[str, LevelPermutation]:
        """The six forms (g,*,1), (1,*,g), (*,1,g), (*,g,1), (g,1,*), (1,g,*) in G_{n+1}"""
        n = g.level
        a, b = self.element(self.gens.a), self.element(self.gens.b)
        t = self.rotation()
        movers = [self.machine.identity(), a, b, t, t.inverse(), product(a, b, a)]
        tables = [restrict(h, n + 1) for h in movers]
        identity = LevelPermutation.identity(DEGREE, n)
        out = {}
        for p, q in itertools.permutations(range(1, DEGREE + 1), 2):
            h = next(h for h in tables if h.root()(p) == 1 and h.root()(q) == DEGREE)
            hp = h.section(p)
            base = self._require_lift(n + 1, {1: hp.inverse() * g * hp, DEGREE: identity})
            label = ["*"] * DEGREE
            label[p - 1], label[q - 1] = "g", "1"
            out["(" + ",".join(label) + ")"] = h * base * h.inverse()
        return out

    def commutator_frame(self, g: LevelPermutation) -> LevelPermutation:
        """(g, g^-1, 1) as κ·a·κ^-1·a^-1 with κ = (g, 1, *) in G_{n+1}"""
        n = g.level
        kappa = self._require_lift(n + 1, {1: g, 2: LevelPermutation.identity(DEGREE, n)})
        a = restrict(self.element(self.gens.a), n + 1)
        return kappa * a * kappa.inverse() * a.inverse()

    def _correction_machine(self) -> Tuple[RecursionMachine, Dict[str, Tuple[str, str]]]:
        if self._correction is not None:
            return self._correction
        builder = MachineBuilder(self.machine)
        # stems are distinct, so fresh() only has to dodge the model's own state names
        pairs = {g: (builder.fresh(f"p_{g}"), builder.fresh(f"q_{g}")) for g in self.gens.names}

        def p_of(child: Optional[str]) -> Optional[str]:
            return None if child is None else pairs[child][0]

        def q_of(child: Optional[str]) -> Optional[str]:
            return None if child is None else pairs[child][1]

        identity = Permutation.identity(DEGREE)
        for g in self.gens.names:
            p, q = pairs[g]
            children = [self._section_name(g, x) for x in range(1, DEGREE + 1)]
            if g == self.gens.a:
                builder.add(p, identity, [p_of(children[0]), None, None])
                builder.add(q, ROTATION_INVERSE, [None, q_of(children[0]), None])
            elif g == self.gens.b:
                builder.add(p, identity, [None, None, p_of(children[2])])
                builder.add(q, ROTATION, [None, q_of(children[2]), None])
            else:
                builder.add(p, identity, [p_of(c) for c in children])
                builder.add(q, identity, [q_of(c) for c in children])
        self._correction = (builder.build(), pairs)
        return self._correction

    def order2_correction(self, gen: str, k: int) -> Tuple[Element, Element]:
        """p, q in the even wreath power with p·ℓ·q of order at most 2, exactly 2 where ℓ acts"""
        if gen not in self.gens.names:
            raise ArgumentError(f"{gen} is not a model generator")
        check_level(k, get_level_cap())
        machine, pairs = self._correction_machine()
        if k == 0:
            return machine.identity(), machine.identity()
        p, q = (machine.element(name) for name in pairs[gen])
        twin = product(p, machine.element(gen), q)
        for j in range(1, k + 1):
            order = restrict(twin, j).order()
            expected = 1 if restrict(machine.element(gen), j).is_identity() else 2
            if order != expected:
                raise ProcedureFailure(
                    f"p·{gen}·q has order {order} at level {j}, expected {expected}",
                    {"generator": gen, "level": j, "order": order},
                )
        for e in (p, q):
            if not restrict(e, k).is_even_everywhere():
                raise ProcedureFailure(f"{e} is not in the even wreath power at level {k}")
        return p, q

    def torsion_element(self, m: int, n3: int, level_cap: Optional[int] = None) -> TorsionElement:
        """Element of order 2^m·3^n3 together with the first level showing that order"""
        if m < 0 or n3 < 0:
            raise ArgumentError(f"exponents must be non-negative, got {(m, n3)}")
        cap = get_level_cap() if level_cap is None else level_cap
        base, pairs = self._correction_machine()
        builder = MachineBuilder(base)
        a, b = self.gens.a, self.gens.b
        t: Word = ((a, -1), (b, -1), (a, 1), (b, 1))
        a_prime: Word = t + ((a, 1),) + t
        x = self._section_name(a, 1)
        if x is not None:
            p, q = pairs[x]
            # (1,1,p)·t·a·t·(1,1,q) = (1,1,p·x·q)(1 2)
            a_prime = builder.lift(DEGREE, ((p, 1),)) + a_prime + builder.lift(DEGREE, ((q, 1),))

        h: Word = ()
        for k in range(1, n3 + 1):
            children = [h[0][0] if h else None, None, None]
            h = ((builder.add(builder.fresh(f"h{k}"), ROTATION, children), 1),)

        f: Word = a_prime
        for _ in range(1, m):
            framed = builder.lift(1, f) + invert(builder.lift(2, f))
            f = builder.lift(1, framed) + a_prime
        if m == 0:
            tau = h
        else:
            tau = builder.lift(1, f) + invert(builder.lift(2, f))
            if h:
                tau += builder.lift(DEGREE, h)
        element = element_of(builder.build(), tau)

        target = 2 ** m * 3 ** n3
        limit = m + n3 + 4
        for k in range(0, min(cap, limit) + 1):
            order = restrict(element, k, cap).order()
            if order == target:
                logger.debug("order %d reached at level %d", target, k)
                return TorsionElement(element, k, order)
        raise ResourceCapError(
            f"order {target} not reached by level {min(cap, limit)}", level=min(cap, limit), cap=cap
        )

    def simultaneous_conjugator(
        self, conjugates: Dict[str, LevelPermutation]
    ) -> Tuple[LevelPermutation, Dict[str, LevelPermutation]]:
        """w in W_n and X_ℓ in G_n with conjugates[ℓ] = (w·X_ℓ)·ℓ·(w·X_ℓ)^-1 on T_n.

        ``conjugates`` maps every generator name to a W_n-conjugate of its
        restriction; raises ProcedureFailure when the descent gets stuck.
        """
        if set(conjugates) != set(self.gens.names):
            raise ArgumentError(f"need a table for each of {self.gens.names}")
        levels = {t.level for t in conjugates.values()}
        if len(levels) != 1:
            raise ArgumentError("conjugates live on different levels")
        n = levels.pop()
        check_level(n, self.group_cap)
        return self._descend(dict(conjugates), n, ConjugacySolver())

    def _descend(
        self, cur: Dict[str, LevelPermutation], n: int, solver: ConjugacySolver
    ) -> Tuple[LevelPermutation, Dict[str, LevelPermutation]]:
        identity = LevelPermutation.identity(DEGREE, n)
        if n == 0:
            return identity, {name: identity for name in cur}
        a, b = self.gens.a, self.gens.b
        below = LevelPermutation.identity(DEGREE, n - 1)

        # cur = T·orig·T^-1 throughout
        rho = None
        for images in itertools.permutations(range(1, DEGREE + 1)):
            candidate = LevelPermutation.from_wreath([below] * DEGREE, Permutation(images))
            if (cur[a].conjugate(candidate).root() == Role.A.root
                    and cur[b].conjugate(candidate).root() == Role.B.root):
                rho = candidate
                break
        if rho is None:
            raise ProcedureFailure(
                f"roots {cur[a].root()} and {cur[b].root()} cannot be moved to (1 2) and (2 3)", {"level": n}
            )
        cur = {name: t.conjugate(rho) for name, t in cur.items()}
        if not (cur[a].section(3).is_identity() and cur[b].section(1).is_identity()):
            raise ProcedureFailure("A or B has a nontrivial section at its fixed letter", {"level": n})
        move = wreath_table({1: cur[a].section(2), 3: cur[b].section(2)}, DEGREE, n)
        cur = {name: t.conjugate(move) for name, t in cur.items()}
        T = move * rho

        A, B = cur[a], cur[b]
        lower: Dict[str, LevelPermutation] = {}
        sa, sb = self._section_name(a, 1), self._section_name(b, 3)
        for name, slot, table in ((sa, 1, A), (sb, 3, B)):
            if name is not None:
                lower[name] = table.section(slot)
            elif not table.section(slot).is_identity():
                raise ProcedureFailure("a trivial section was conjugated to a nontrivial one", {"level": n})

        movers = [identity, A, B, A * B, B * A, A * B * A]
        moved: Dict[str, LevelPermutation] = {}
        for c in self.gens.cs:
            children = [self._section_name(c, x) for x in range(1, DEGREE + 1)]
            targets = [below if ch is None else restrict(self.element(ch), n - 1) for ch in children]
            if not cur[c].root().is_identity():
                raise ProcedureFailure(f"conjugate of {c} has a nontrivial root", {"level": n})
            for h in movers:
                candidate = cur[c].conjugate(h)
                if all(solver.find(candidate.section(x), targets[x - 1]) is not None for x in range(1, DEGREE + 1)):
                    break
            else:
                raise ProcedureFailure(f"no word in <A, B> aligns the sections of {c}", {"level": n, "generator": c})
            moved[c] = h
            cur[c] = candidate
            for x, ch in enumerate(children, start=1):
                if ch is not None:
                    lower[ch] = candidate.section(x)
        if set(lower) != set(self.gens.names):
            raise ProcedureFailure("sections do not cover every generator exactly once", {"level": n})

        w_below, x_below = self._descend(lower, n - 1, solver)
        w = LevelPermutation.from_wreath([w_below] * DEGREE, Permutation.identity(DEGREE))
        X: Dict[str, LevelPermutation] = {
            a: identity if sa is None else self._require_lift(n, {1: x_below[sa], 2: x_below[sa]}),
            b: identity if sb is None else self._require_lift(n, {2: x_below[sb], 3: x_below[sb]}),
        }
        for c in self.gens.cs:
            prescribed = {
                x: x_below[ch]
                for x in range(1, DEGREE + 1)
                if (ch := self._section_name(c, x)) is not None
            }
            z = self._require_lift(n, prescribed) if prescribed else identity
            h = w.inverse() * moved[c] * w
            if not self.contains(n, h):
                raise ProcedureFailure(f"the mover for {c} is not conjugate into G_{n}", {"level": n, "generator": c})
            X[c] = h.inverse() * z
        return T.inverse() * w, X

    def filtration_conjugators(
        self, family: Sequence[LevelPermutation], s: int, m: int, r: int
    ) -> List[LevelPermutation]:
        """g_1..g_r in G_n with g_k·c_k·g_k^-1 the periodic period-r family on T_n.

        ``family`` holds the level-n tables of a role-a family with parameters
        (s, m), all members of G_n; c_k = a_k·a_{k+r}⋯a_{k+s+m-r}.
        """
        total = s + m
        if r < 1 or s % r or m % r:
            raise ArgumentError(f"r={r} must divide both s={s} and m={m}")
        if len(family) != total:
            raise ArgumentError(f"expected {total} family tables, got {len(family)}")
        n = family[0].level
        g = [LevelPermutation.identity(DEGREE, 0)] * r
        for level in range(n):
            rows = [a.restrict_to(level) for a in family]
            identity = LevelPermutation.identity(DEGREE, level)
            c_r = cyclic_factor(rows, r, r)
            first = self._require_lift(level + 1, {1: g[r - 1], 2: g[r - 1]}) * self._require_lift(
                level + 1, {1: c_r * rows[total - 1].inverse(), 2: identity}
            )
            g = [first] + [self._require_lift(level + 1, {1: g[k - 2], 2: identity}) for k in range(2, r + 1)]
        return g


def cyclic_factor(family: Sequence[LevelPermutation], k: int, r: int) -> LevelPermutation:
    """c_k = a_k·a_{k+r}⋯ over the family tables"""
    result = family[k - 1]
    for j in range(k - 1 + r, len(family), r):
        result = result * family[j]
    return result


def move_generators(family_a: OrbitFamily, family_b: OrbitFamily, n: int) -> List[Element]:
    """Multipliers g_j in the even wreath power with g_j·b_j = a_j, verified on T_n"""
    if family_a.role is family_b.role:
        raise ArgumentError("families must differ in role")
    if family_a.role is Role.B:
        family_a, family_b = family_b, family_a
    if (family_a.s, family_a.m) != (family_b.s, family_b.m):
        raise ArgumentError(
            f"families have different shapes {(family_a.s, family_a.m)} and {(family_b.s, family_b.m)}"
        )
    check_level(n, get_level_cap())
    s, m = family_a.s, family_a.m
    total = s + m
    names = [f"g{j}" for j in range(1, total + 1)]
    rows = []
    for j in range(1, total + 1):
        children: List[Optional[str]] = [None, None, None]
        root = Permutation.identity(DEGREE)
        if j == 1:
            root = ROTATION_INVERSE
            if s == 0:
                children[0] = names[total - 1]
        elif s > 0 and j == s + 1:
            children[0], children[1] = names[s - 1], names[total - 1]
        else:
            children[0] = names[j - 2]
        rows.append((names[j - 1], root, children))
    machine = RecursionMachine.from_recursions(DEGREE, rows)
    multipliers = [machine.element(name) for name in names]
    for j, g in enumerate(multipliers):
        a = family_a.machine.element(family_a.names[j])
        b = family_b.machine.element(family_b.names[j])
        table = restrict(g, n)
        if table * restrict(b, n) != restrict(a, n):
            raise ProcedureFailure(f"{names[j]}·{family_b.names[j]} differs from {family_a.names[j]} on level {n}")
        if not table.is_even_everywhere():
            raise ProcedureFailure(f"{names[j]} is not in the even wreath power at level {n}")
    return multipliers
