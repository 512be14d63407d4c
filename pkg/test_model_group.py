import numpy as np
import pytest

from src.core.errors import ArgumentError, DomainViolation, ResourceCapError
from src.core.model_group import (
    MachineBuilder,
    ModelGroup,
    cyclic_factor,
    element_of,
    move_generators,
    padded_sections,
    section_points,
    wreath_table,
)
from src.core.permgrp import build_chain, uniform_sample, wn_generators, wn_order
from src.core.portrait import Role, disjoint_orbit_family
from src.core.wreath_core import LevelPermutation, Permutation, product, restrict


def test_level_groups(two_fixed):
    assert two_fixed.order(1) == 6
    assert 6 < two_fixed.order(2) < wn_order(2)
    assert two_fixed.r == 0


def test_families_assign_names_and_roles():
    G = ModelGroup.from_families([(2, 3), (0, 2)])
    assert (G.gens.a, G.gens.b) == ("a1", "b1")
    assert G.r == 5
    assert [f.role for f in G.families] == [Role.A, Role.B]


def test_from_portrait_rejects_Y_violations():
    text = "critical c1 deg=2\ncritical c2 deg=2\nmap c1 -> p1\nmap p1 -> p1\nmap c2 -> c2\n"
    with pytest.raises(DomainViolation):
        ModelGroup.from_portrait(text)


def test_rotation_and_odometer(two_fixed):
    rotation = LevelPermutation.from_wreath([LevelPermutation.identity(3, 2)] * 3, Permutation.parse(3, "(1 2 3)"))
    assert restrict(two_fixed.rotation(), 3) == rotation
    assert restrict(two_fixed.odometer(), 3).order() == 27


def test_level_cap_is_enforced(two_fixed):
    with pytest.raises(ResourceCapError):
        two_fixed.level_group(5)
    assert ModelGroup.from_families([(0, 1), (0, 1)], level_cap=5).group_cap == 5


def test_padding_and_section_points():
    padded = padded_sections({3: LevelPermutation.identity(3, 1)}, 3, 2)
    assert sorted(padded) == [1, 3]
    assert section_points(3, 2, [1, 3]) == [0, 1, 2, 6, 7, 8]
    with pytest.raises(ArgumentError):
        section_points(3, 2, [2])


def test_lift_sections(two_fixed):
    a1 = restrict(two_fixed.element("a"), 1)
    identity = LevelPermutation.identity(3, 1)
    lifted = two_fixed.lift_sections(2, {1: a1, 2: a1})
    assert lifted is not None
    assert lifted.root().is_identity()
    assert lifted.section(1) == a1 and lifted.section(2) == a1
    assert two_fixed.contains(2, lifted)
    # (a, 1, 1) has sign profile (1, -1), outside the image of <a, b>
    assert two_fixed.lift_sections(2, {1: a1, 2: identity, 3: identity}) is None


@pytest.mark.parametrize("name", ["a1", "a2", "b"])
def test_self_replication_witness(period_two, name):
    table = restrict(period_two.self_replication_witness(name), 3)
    assert table.root().is_identity()
    assert table.section(1) == restrict(period_two.element(name), 2)
    assert table.section(3).is_identity()
    assert period_two.contains(3, table)


def test_forms_witnesses(two_fixed):
    g = uniform_sample(two_fixed.chain(1), np.random.default_rng(1))
    forms = two_fixed.forms_witnesses(g)
    assert len(forms) == 6
    for label, table in forms.items():
        assert table.root().is_identity()
        for x, letter in enumerate(label.strip("()").split(","), start=1):
            if letter == "g":
                assert table.section(x) == g
            elif letter == "1":
                assert table.section(x).is_identity()
        assert two_fixed.contains(2, table)


def test_commutator_frame(two_fixed):
    g = restrict(two_fixed.element("a") * two_fixed.element("b"), 2)
    frame = two_fixed.commutator_frame(g)
    assert frame == wreath_table({1: g, 2: g.inverse()}, 3, 3)
    assert two_fixed.contains(3, frame)


@pytest.mark.parametrize("gen", ["a1", "a2", "b"])
def test_order2_correction(period_two, gen):
    p, q = period_two.order2_correction(gen, 4)
    twin = product(p, p.machine.element(gen), q)
    expected = 1 if restrict(period_two.element(gen), 4).is_identity() else 2
    assert restrict(twin, 4).order() == expected
    assert restrict(p, 4).is_even_everywhere() and restrict(q, 4).is_even_everywhere()


def test_order2_correction_at_level_zero(two_fixed):
    p, q = two_fixed.order2_correction("a", 0)
    assert restrict(p, 3).is_identity() and restrict(q, 3).is_identity()


@pytest.mark.parametrize("m, n3", [(0, 0), (1, 0), (0, 1), (2, 0), (2, 1)])
def test_torsion_element_orders(two_fixed, m, n3):
    found = two_fixed.torsion_element(m, n3)
    assert found.order == 2 ** m * 3 ** n3
    assert found.level <= m + n3 + 4
    assert restrict(found.element, found.level).order() == found.order


def test_torsion_in_a_group_with_a_nontrivial_section(period_two):
    assert period_two.torsion_element(2, 1).order == 12


def test_torsion_cap_error(two_fixed):
    with pytest.raises(ResourceCapError):
        two_fixed.torsion_element(3, 2, level_cap=2)


def test_simultaneous_conjugator_recovers_a_shared_conjugator(two_fixed):
    chain = build_chain(wn_generators(2))
    rng = np.random.default_rng(8)
    base = dict(zip(two_fixed.gens.names, two_fixed.generator_tables(2)))
    for _ in range(5):
        w = uniform_sample(chain, rng)
        conjugates = {name: t.conjugate(w) for name, t in base.items()}
        found, X = two_fixed.simultaneous_conjugator(conjugates)
        for name, t in base.items():
            assert conjugates[name] == t.conjugate(found * X[name])
            assert two_fixed.contains(2, X[name])


def test_simultaneous_conjugator_with_c_generators(period_two):
    chain = build_chain(wn_generators(3))
    rng = np.random.default_rng(2)
    base = dict(zip(period_two.gens.names, period_two.generator_tables(3)))
    w = uniform_sample(chain, rng)
    conjugates = {name: t.conjugate(w * uniform_sample(period_two.chain(3), rng)) for name, t in base.items()}
    found, X = period_two.simultaneous_conjugator(conjugates)
    for name, t in base.items():
        assert conjugates[name] == t.conjugate(found * X[name])


def test_simultaneous_conjugator_needs_every_generator(two_fixed):
    with pytest.raises(ArgumentError):
        two_fixed.simultaneous_conjugator({"a": two_fixed.generator_tables(1)[0]})


def test_cyclic_factor():
    a = LevelPermutation.from_permutation(Permutation.parse(3, "(1 2)"))
    b = LevelPermutation.from_permutation(Permutation.parse(3, "(2 3)"))
    assert cyclic_factor([a, b, a, b], 1, 2) == a * a
    assert cyclic_factor([a, b, a, b], 2, 2) == b * b
    assert cyclic_factor([a, b], 1, 1) == a * b


def test_move_generators():
    fa = disjoint_orbit_family(1, 1, Role.A)
    fb = disjoint_orbit_family(1, 1, Role.B)
    multipliers = move_generators(fb, fa, 4)
    assert len(multipliers) == 2
    assert restrict(multipliers[0], 1) == LevelPermutation.from_permutation(Permutation.parse(3, "(1 3 2)"))
    with pytest.raises(ArgumentError):
        move_generators(fa, fa, 2)
    with pytest.raises(ArgumentError):
        move_generators(fa, disjoint_orbit_family(0, 2, Role.B), 2)


def test_machine_builder_lifts_are_memoized(two_fixed):
    builder = MachineBuilder(two_fixed.machine)
    word = builder.lift(2, (("a", 1), ("b", -1)))
    again = builder.lift(2, (("a", 1),))
    assert again[0][0] == word[0][0]
    e = element_of(builder.build(), word)
    expected = wreath_table({2: restrict(two_fixed.element("a") * two_fixed.element("b").inverse(), 2)}, 3, 3)
    assert restrict(e, 3) == expected
