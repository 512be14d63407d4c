import os

import numpy as np
import pytest

from config.settings import PORTRAIT_DIR
from src.core.conjugacy import is_odometer
from src.core.errors import ArgumentError, DomainViolation, PortraitParseError
from src.core.model_group import ModelGroup
from src.core.notation import format_machine, parse_machine
from src.core.portrait import (
    INFINITY,
    ModelGenerators,
    Role,
    check_model_conditions,
    classify_portrait,
    disjoint_orbit_family,
    enumerate_portraits,
    export_dot,
    export_json,
    family_parameters,
    family_portrait,
    has_disjoint_orbits,
    make_portrait,
    parse_portrait,
    portrait_from_dot,
    portraits_isomorphic,
    random_portrait,
    synthesize_model,
    to_dsl,
    validate_Y,
)
from src.core.wreath_core import Permutation, eq_at_level, product, wreath_literal


def bundled(name):
    with open(os.path.join(PORTRAIT_DIR, name + ".portrait"), encoding="utf-8") as f:
        return parse_portrait(f.read())


def test_two_fixed_model():
    gens = synthesize_model(bundled("two-fixed"))
    assert format_machine(gens.machine, gens.names) == "a=(a,1,1)(1 2); b=(1,1,b)(2 3)"
    assert gens.r == 0


def test_period_two_model():
    gens = synthesize_model(bundled("period-two"))
    assert format_machine(gens.machine, gens.names) == "a=(b,1,1)(1 2); b=(1,1,a)(2 3)"


def test_mixed_orbits():
    p = bundled("mixed-orbits")
    assert has_disjoint_orbits(p)
    assert family_parameters(p) == [(2, 3), (0, 2)]
    assert synthesize_model(p).r == 5


def test_bad_periodic_violates_Y():
    p = bundled("bad-periodic")
    report = validate_Y(p)
    assert not report.valid
    assert {v.vertex for v in report.violations} == {"p1"}
    with pytest.raises(DomainViolation) as info:
        synthesize_model(p)
    assert info.value.exit_code == 1


def test_classification_of_fixed_critical_points():
    assert classify_portrait(bundled("two-fixed")) == {INFINITY: "1b", "c1": "2b", "c2": "2b"}


@pytest.mark.parametrize(
    "text, line",
    [
        ("critical c1 deg=3\n", 1),
        ("critical c1 deg=2\ncritical c2 deg=2\nmap c1 -> zz\nmap c2 -> c2\n", 3),
        ("critical c1 deg=2\n  bogus\n", 2),
        ("critical c1 deg=2\ncritical c1 deg=2\n", 2),
        ("critical c1 deg=2\ncritical c2 deg=2\nmap c1 -> c1\nmap c1 -> c2\n", 4),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(PortraitParseError) as info:
        parse_portrait(text)
    assert info.value.line == line


def test_shared_critical_value_is_rejected():
    with pytest.raises(PortraitParseError):
        parse_portrait("critical c1 deg=2\ncritical c2 deg=2\nmap c1 -> v\nmap c2 -> v\nmap v -> v\n")


def test_dot_and_dsl_round_trip():
    p = bundled("mixed-orbits")
    assert portrait_from_dot(export_dot(p)).image == p.image
    assert parse_portrait(to_dsl(p)).image == p.image
    assert len(export_json(p).vertices) == len(p.image)


def test_family_portrait_matches_bundled_files():
    assert portraits_isomorphic(family_portrait([(0, 1), (0, 1)]), bundled("two-fixed"))
    assert portraits_isomorphic(family_portrait([(2, 3), (0, 2)]), bundled("mixed-orbits"))
    assert not portraits_isomorphic(family_portrait([(0, 1), (0, 1)]), bundled("period-two"))


def test_disjoint_orbit_family_recursions():
    assert format_machine(disjoint_orbit_family(1, 1, Role.A).machine) == "a1=(1 2); a2=(a1,a2,1)"
    assert format_machine(disjoint_orbit_family(0, 1, Role.B).machine) == "b=(1,1,b)(2 3)"
    assert disjoint_orbit_family(2, 3, Role.B).names == ["b1", "b2", "b3", "b4", "b5"]
    with pytest.raises(ArgumentError):
        disjoint_orbit_family(0, 0, Role.A)


def test_model_conditions_report_each_broken_condition():
    m = parse_machine("a=(a,1,1)(1 2); b=(1,1,b)(2 3); c=1")
    problems = check_model_conditions(ModelGenerators(m, "a", "b", ["c"]))
    assert any(p.startswith("Y2") for p in problems)
    assert any(p.startswith("Y4") for p in problems)


def test_enumerated_portraits_all_satisfy_Y():
    found = list(enumerate_portraits(3))
    assert found
    assert all(validate_Y(p).valid for p in found)
    assert any(portraits_isomorphic(p, bundled("two-fixed")) for p in found)


def test_random_portrait_is_seeded():
    first = random_portrait(np.random.default_rng(4))
    again = random_portrait(np.random.default_rng(4))
    assert first.image == again.image
    assert synthesize_model(first).names[:2] == ["a", "b"]


def test_tie_breaks_follow_lexicographic_name_order():
    # p10 sorts before p2, so p10 becomes c1
    p = parse_portrait(
        "critical c1 deg=2\ncritical c2 deg=2\n"
        "map c1 -> p1\nmap p1 -> p10\nmap p10 -> p2\nmap p2 -> p2\nmap c2 -> c2\n"
    )
    gens = synthesize_model(p)
    assert gens.labels == {"p1": "a", "c2": "b", "p10": "c1", "p2": "c2"}
    assert format_machine(gens.machine, gens.names) == "a=(1 2); b=(1,1,b)(2 3); c1=(a,1,1); c2=(c1,c2,1)"


def relabeled(p, rename):
    return make_portrait([rename[c] for c in p.critical], {rename[u]: rename[v] for u, v in p.image.items()})


@pytest.fixture(scope="module")
def random_corpus():
    rng = np.random.default_rng(61)
    return [random_portrait(rng) for _ in range(20)]


@pytest.mark.slow
def test_random_portraits_give_model_generators():
    rng = np.random.default_rng(60)
    for _ in range(100):
        p = random_portrait(rng)
        assert len(p.postcritical()) <= 8
        assert check_model_conditions(synthesize_model(p)) == []


def test_relabeled_portraits_give_the_same_machine(random_corpus):
    rng = np.random.default_rng(62)
    for p in random_corpus:
        names = p.vertices
        shuffled = [names[int(i)] for i in rng.permutation(len(names))]
        q = relabeled(p, {v: f"x{w}" for v, w in zip(names, shuffled)})
        assert portraits_isomorphic(p, q)
        assert synthesize_model(q).r == synthesize_model(p).r
        # an order-preserving relabeling keeps every tie-break
        ordered = relabeled(p, {v: f"w{i:02d}" for i, v in enumerate(names)})
        assert format_machine(synthesize_model(ordered).machine) == format_machine(synthesize_model(p).machine)


@pytest.mark.slow
def test_commutator_and_odometer_on_random_portraits(random_corpus):
    rng = np.random.default_rng(63)
    rotation = wreath_literal(3, Permutation.parse(3, "(1 2 3)"))
    for p in random_corpus:
        G = ModelGroup.from_portrait(p)
        for n in range(1, 7):
            assert eq_at_level(G.rotation(), rotation, n)
        gens = G.generator_elements()
        for _ in range(5):
            shuffled = [gens[int(i)] for i in rng.permutation(len(gens))]
            for n in range(1, 6):
                assert is_odometer(product(*shuffled), n)
