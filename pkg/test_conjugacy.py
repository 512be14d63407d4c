import numpy as np
import pytest

from src.core.conjugacy import (
    ConjugacySolver,
    brute_force_conjugator,
    canonical_solutions,
    check_square_condition,
    conjugate_in_wn,
    find_conjugator,
    is_odometer,
    parse_system,
    satisfies_system,
)
from src.core.errors import ArgumentError, UnsupportedInputError
from src.core.notation import format_machine, parse_machine
from src.core.permgrp import build_chain, uniform_sample, wn_generators
from src.core.wreath_core import LevelPermutation, Permutation, restrict, standard_odometer

TWO_FIXED_SYSTEM = """
a ~ (a, 1, 1)(1 2)
b ~ (1, 1, b)(2 3)
"""


def test_conjugate_pairs_get_a_valid_certificate():
    chain = build_chain(wn_generators(3))
    rng = np.random.default_rng(11)
    for _ in range(10):
        h = uniform_sample(chain, rng)
        g = h.conjugate(uniform_sample(chain, rng))
        certificate = find_conjugator(g, h)
        assert certificate is not None
        assert certificate.verify(g, h)
        assert certificate.to_model().level == 3


def test_different_root_cycle_types_are_not_conjugate():
    transposition = LevelPermutation.from_permutation(Permutation.parse(3, "(1 2)"))
    rotation = LevelPermutation.from_permutation(Permutation.parse(3, "(1 2 3)"))
    assert find_conjugator(transposition, rotation) is None


def test_level_zero_tables_are_conjugate():
    identity = LevelPermutation.identity(3, 0)
    assert find_conjugator(identity, identity).verify(identity, identity)


def test_solver_agrees_with_exhaustive_search(w2_elements):
    solver = ConjugacySolver()
    rng = np.random.default_rng(3)
    for _ in range(30):
        g = w2_elements[int(rng.integers(len(w2_elements)))]
        h = w2_elements[int(rng.integers(len(w2_elements)))]
        found = solver.find(g, h)
        assert (found is None) == (brute_force_conjugator(g, h, w2_elements) is None)


def test_canonical_forms_coincide_on_a_class():
    solver = ConjugacySolver()
    chain = build_chain(wn_generators(2))
    rng = np.random.default_rng(0)
    h = uniform_sample(chain, rng)
    g = h.conjugate(uniform_sample(chain, rng))
    (cg, vg), (ch, _) = solver.canonical(g), solver.canonical(h)
    assert cg == ch
    assert cg.conjugate(vg) == g


def test_level_mismatch_is_an_argument_error():
    with pytest.raises(ArgumentError):
        find_conjugator(LevelPermutation.identity(3, 1), LevelPermutation.identity(3, 2))


def test_model_odometer_is_conjugate_to_the_standard_one():
    m = parse_machine("a=(a,1,1)(1 2); b=(1,1,b)(2 3)")
    ab = m.element("a") * m.element("b")
    for n in (1, 2, 3, 4):
        assert is_odometer(ab, n)
    assert conjugate_in_wn(ab, standard_odometer(3), 4) is not None
    assert not is_odometer(m.element("a"), 2)


def test_square_condition_and_canonical_solutions():
    system = parse_system(TWO_FIXED_SYSTEM, 3)
    report = check_square_condition(system)
    assert report.holds
    assert format_machine(canonical_solutions(system)) == "a=(a,1,1)(1 2); b=(1,b,1)(2 3)"


def test_square_condition_violation():
    system = parse_system("x ~ (x, y, 1)(1 2)\ny ~ (1, 1, 1)", 3)
    report = check_square_condition(system)
    assert not report.holds
    assert "x" in report.violation


def test_constants_in_sections_are_unsupported():
    with pytest.raises(UnsupportedInputError):
        check_square_condition(parse_system("x ~ (z, 1, 1)(1 2)", 3))


def test_parse_system_rejects_wrong_arity():
    with pytest.raises(ArgumentError):
        parse_system("x ~ (x, 1)(1 2)", 3)


def test_model_generators_satisfy_their_own_system():
    m = parse_machine("a=(a,1,1)(1 2); b=(1,1,b)(2 3)")
    system = parse_system(TWO_FIXED_SYSTEM, 3)
    assignment = {name: restrict(m.element(name), 3) for name in ("a", "b")}
    assert satisfies_system(system, assignment)


def test_conjugacy_passes_down_to_lower_levels():
    chain = build_chain(wn_generators(3))
    rng = np.random.default_rng(51)
    for i in range(20):
        h = uniform_sample(chain, rng)
        g = h.conjugate(uniform_sample(chain, rng)) if i % 2 == 0 else uniform_sample(chain, rng)
        if find_conjugator(g, h) is None:
            continue
        for k in range(1, 4):
            certificate = find_conjugator(g.restrict_to(k), h.restrict_to(k))
            assert certificate is not None
            assert certificate.verify(g.restrict_to(k), h.restrict_to(k))


def test_conjugation_preserves_order_and_odometers():
    m = parse_machine("a=(a,1,1)(1 2); b=(1,1,b)(2 3)")
    rng = np.random.default_rng(52)
    for n in (2, 3, 4):
        chain = build_chain(wn_generators(n))
        for e in (m.element("a"), m.element("a") * m.element("b"), m.element("b") * m.element("a") * m.element("a")):
            t = restrict(e, n)
            moved = t.conjugate(uniform_sample(chain, rng))
            assert moved.order() == t.order()
            assert (moved.order() == 3 ** n) == is_odometer(e, n)


@pytest.mark.parametrize("text", [TWO_FIXED_SYSTEM, "a ~ (b, 1, 1)(1 2)\nb ~ (1, 1, a)(2 3)"])
def test_conjugates_of_canonical_solutions_satisfy_the_system(text):
    system = parse_system(text, 3)
    solutions = canonical_solutions(system)
    rng = np.random.default_rng(53)
    solver = ConjugacySolver()
    for n in (1, 2, 3):
        chain = build_chain(wn_generators(n))
        for _ in range(3):
            assignment = {
                name: restrict(solutions.element(name), n).conjugate(uniform_sample(chain, rng))
                for name in system.names
            }
            assert satisfies_system(system, assignment)
            for name, t in assignment.items():
                assert solver.find(t, restrict(solutions.element(name), n)) is not None
