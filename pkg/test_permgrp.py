import numpy as np
import pytest

from src.core.errors import ResourceCapError
from src.core.notation import parse_machine
from src.core.permgrp import (
    PermGroup,
    build_chain,
    contains,
    derived_subgroup,
    elements,
    equal_groups,
    is_subgroup,
    is_transitive,
    lift_on_points,
    uniform_sample,
    wn_generators,
    wn_order,
)
from src.core.wreath_core import LevelPermutation, Permutation, restrict


@pytest.fixture
def ab():
    m = parse_machine("a=(a,1,1)(1 2); b=(1,1,b)(2 3)")
    return m.element("a"), m.element("b")


@pytest.mark.parametrize("n", [1, 2, 3])
def test_wreath_power_order(n):
    chain = build_chain(wn_generators(n))
    assert chain.order() == 6 ** ((3 ** n - 1) // 2) == wn_order(n)


def test_wreath_power_order_exact_big_integer():
    assert build_chain(wn_generators(3)).order() == 13060694016


def test_known_order_stops_early_with_the_same_order():
    group = wn_generators(3)
    assert build_chain(group, seed=7, known_order=wn_order(3)).order() == wn_order(3)


def test_level_one_model_group_is_s3(ab):
    a, b = ab
    group = PermGroup(3, 1, [restrict(a, 1), restrict(b, 1)])
    assert build_chain(group).order() == 6
    assert equal_groups(group, wn_generators(1))


def test_derived_subgroup_of_s3_is_a3():
    derived = derived_subgroup(wn_generators(1))
    assert build_chain(derived).order() == 3


def test_transitivity(ab):
    a, _ = ab
    assert is_transitive(wn_generators(2))
    assert not is_transitive(PermGroup(3, 2, [restrict(a, 2)]))


def test_membership_and_subgroups(ab):
    a, b = ab
    chain = build_chain(wn_generators(2))
    assert contains(chain, restrict(a, 2))
    model = PermGroup(3, 2, [restrict(a, 2), restrict(b, 2)])
    assert is_subgroup(model, chain)
    model_chain = build_chain(model)
    assert model_chain.order() < chain.order()
    rotation_below_one = LevelPermutation.from_wreath(
        [LevelPermutation.from_permutation(Permutation.parse(3, "(1 2)"))] + [LevelPermutation.identity(3, 1)] * 2,
        Permutation.identity(3),
    )
    assert contains(chain, rotation_below_one)


def test_uniform_sample_is_seeded():
    chain = build_chain(wn_generators(2))
    first = uniform_sample(chain, np.random.default_rng(5))
    again = uniform_sample(chain, np.random.default_rng(5))
    assert first == again
    assert contains(chain, first)


def test_elements_enumerates_each_element_once():
    everything = list(elements(build_chain(wn_generators(1))))
    assert len(everything) == 6
    assert len(set(everything)) == 6


def test_lift_on_points_matches_prefix(ab):
    a, b = ab
    group = PermGroup(3, 2, [restrict(a, 2), restrict(b, 2)])
    points = [0, 1, 2]
    chain = build_chain(group, base=points)
    target = restrict(a, 2) * restrict(b, 2)
    found = lift_on_points(chain, target, points)
    assert found is not None
    assert [int(found.images[p]) for p in points] == [int(target.images[p]) for p in points]


def test_group_level_cap():
    with pytest.raises(ResourceCapError):
        wn_generators(5)
    assert wn_generators(5, level_cap=5).level == 5


def closure(group):
    """Every element reached from the identity by multiplying by generators"""
    seen = {group.identity()}
    frontier = [group.identity()]
    while frontier:
        fresh = []
        for x in frontier:
            for g in group.generators:
                y = x * g
                if y not in seen:
                    seen.add(y)
                    fresh.append(y)
        frontier = fresh
    return seen


def small_groups(ab):
    a, b = ab
    yield wn_generators(1)
    yield wn_generators(2)
    yield PermGroup(3, 2, [restrict(a, 2), restrict(b, 2)])
    yield PermGroup(3, 3, [restrict(a, 3)])
    yield PermGroup(3, 3, [restrict(a * b, 3)])
    yield derived_subgroup(wn_generators(2))


def test_chain_order_matches_enumeration(ab):
    for group in small_groups(ab):
        everything = closure(group)
        assert len(everything) <= 5000
        assert build_chain(group).order() == len(everything)


def test_membership_matches_enumeration_on_w2(ab):
    a, b = ab
    model = PermGroup(3, 2, [restrict(a, 2), restrict(b, 2)])
    members = closure(model)
    model_chain = build_chain(model)
    w2 = build_chain(wn_generators(2))
    rng = np.random.default_rng(31)
    hits = 0
    for _ in range(1000):
        x = uniform_sample(w2, rng)
        assert contains(model_chain, x) == (x in members)
        hits += x in members
    assert 0 < hits < 1000


def test_derived_subgroup_is_normal(ab):
    a, b = ab
    for group in (wn_generators(2), PermGroup(3, 3, [restrict(a, 3), restrict(b, 3)])):
        derived = derived_subgroup(group)
        chain = build_chain(derived)
        for h in derived.generators:
            for g in group.generators:
                assert contains(chain, h.conjugate(g))
                assert contains(chain, h.conjugate(g.inverse()))


def test_derived_subgroup_of_w2_has_index_four():
    first = derived_subgroup(wn_generators(2))
    again = derived_subgroup(wn_generators(2))
    assert first.generators == again.generators
    assert build_chain(first).order() == wn_order(2) // 4


def chi_square(draws, expected_size):
    counts = np.array(list({x: draws.count(x) for x in set(draws)}.values()), dtype=float)
    assert len(counts) == expected_size
    mean = len(draws) / expected_size
    return float(((counts - mean) ** 2 / mean).sum())


def test_uniform_sample_on_s3():
    chain = build_chain(wn_generators(1))
    rng = np.random.default_rng(41)
    draws = [uniform_sample(chain, rng) for _ in range(6000)]
    # 5 degrees of freedom
    assert chi_square(draws, 6) < 25


def test_uniform_sample_on_a_four_cycle(ab):
    a, _ = ab
    group = PermGroup(3, 2, [restrict(a, 2)])
    chain = build_chain(group)
    assert chain.order() == 4
    rng = np.random.default_rng(42)
    draws = [uniform_sample(chain, rng) for _ in range(4000)]
    assert chi_square(draws, 4) < 25


def test_uniform_sample_defaults_to_a_fixed_seed():
    chain = build_chain(wn_generators(3))
    assert uniform_sample(chain) == uniform_sample(chain)
    assert uniform_sample(chain) == uniform_sample(chain, np.random.default_rng(0))
