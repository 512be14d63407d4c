"""Finite-level checks of the model-group theorems.

Every check returns an ExperimentReport. Trial randomness is drawn from
SeedSequence([seed, level, trial]) so a report is reproducible from its seed
and parameters alone.
"""
import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.conjugacy import brute_force_conjugator, find_conjugator
from src.core.errors import ArgumentError, ProcedureFailure, check_level
from src.core.model_group import (
    ModelGroup,
    cyclic_factor,
    lift_in_chain,
    move_generators,
    section_chain,
    wreath_table,
)
from src.core.permgrp import (
    PermGroup,
    StabilizerChain,
    build_chain,
    contains,
    elements,
    equal_groups,
    is_subgroup,
    uniform_sample,
    wn_generators,
    wn_order,
)
from src.core.portrait import DEGREE, OrbitFamily, Role, disjoint_orbit_family
from src.core.reports import ExperimentReport, LevelResult, TrialOutcome, level_verdict, summarize
from src.core.wreath_core import Element, LevelPermutation, product, restrict, sign_profile

logger = logging.getLogger(__name__)

SIMCONJ_SAMPLES = 20
MAX_REJECTIONS = 1000
SIMCONJ_DRAWS_PER_TRIAL = 20

Pairs = Sequence[Tuple[int, int]]


def trial_rng(seed: int, level: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, level, trial]))


def wn_chain(n: int, level_cap: Optional[int] = None) -> StabilizerChain:
    return build_chain(wn_generators(n, DEGREE, level_cap), seed=0, known_order=wn_order(n, DEGREE))


def _report(theorem: str, params: Dict, seed: int, levels: List[LevelResult]) -> ExperimentReport:
    report = ExperimentReport(theorem=theorem, params=params, seed=seed, levels=levels, verdict=summarize(levels))
    logger.info("%s: %s", theorem, report.verdict)
    return report


def _failed(level: LevelResult) -> bool:
    if level.verdict == "counterexample":
        logger.warning("counterexample at level %d: %s", level.n, level.details or level.trials[-1].witness)
        return True
    return False


def _images(t: LevelPermutation) -> List[int]:
    return [int(x) for x in t.images]


def check_invariable_generation(G: ModelGroup, n: int, trials: int = 100, seed: int = 0) -> ExperimentReport:
    """Random G_n-conjugates of a, b, c_1..c_r and the odometer generate G_n"""
    check_level(n, G.group_cap)
    odometer = G.odometer()
    levels = []
    for k in range(1, n + 1):
        chain = G.chain(k)
        order = chain.order()
        tables = G.generator_tables(k) + [restrict(odometer, k)]
        outcomes = []
        for i in range(trials):
            rng = trial_rng(seed, k, i)
            conjugates = [t.conjugate(uniform_sample(chain, rng)) for t in tables]
            group = PermGroup(DEGREE, k, conjugates)
            contained = is_subgroup(group, chain)
            generated = build_chain(group, rng, known_order=order if contained else None).order()
            if contained and generated == order:
                outcomes.append(TrialOutcome(index=i, verdict="pass"))
                continue
            witness = {"generated_order": str(generated), "conjugates": [_images(t) for t in conjugates]}
            outcomes.append(TrialOutcome(index=i, verdict="fail", witness=witness))
            break
        levels.append(LevelResult(n=k, trials=outcomes, verdict=level_verdict(outcomes), details={"order": str(order)}))
        if _failed(levels[-1]):
            break
    return _report("invgen", {"n": n, "trials": trials, "r": G.r}, seed, levels)


def check_counterexample(G: ModelGroup, n: int = 1) -> ExperimentReport:
    """a and B = (ba)·b·(ba)^-1 generate a proper subgroup of G_n once the odometer is dropped"""
    check_level(n, G.group_cap)
    a, b = G.element(G.gens.a), G.element(G.gens.b)
    ba = product(b, a)
    conjugated = product(ba, b, ba.inverse())
    group = PermGroup(DEGREE, n, [restrict(a, n), restrict(conjugated, n)])
    order = build_chain(group).order()
    full = G.order(n)
    details = {"order": str(order), "group_order": str(full)}
    level = LevelResult(n=n, verdict="pass" if order < full else "counterexample", details=details)
    _failed(level)
    return _report("counterexample", {"n": n}, 0, [level])


def _has_transitive_element(tables: List[LevelPermutation], rng: np.random.Generator) -> bool:
    full = DEGREE ** tables[0].level
    for order in itertools.permutations(tables):
        p = order[0]
        for t in order[1:]:
            p = p * t
        if p.order() == full:
            return True
    chain = build_chain(PermGroup(DEGREE, tables[0].level, tables))
    return any(uniform_sample(chain, rng).order() == full for _ in range(SIMCONJ_SAMPLES))


def check_simultaneous_conjugation(
    G: ModelGroup, n: int, trials: int = 25, seed: int = 0, mode: str = "independent"
) -> ExperimentReport:
    """Recover w_n with conjugated generators equal to (w_n·X_ℓ)·ℓ·(w_n·X_ℓ)^-1, X_ℓ in G_n.

    ``independent`` conjugates every generator by its own uniform element of
    W_n and redraws whenever the conjugated group has no transitive element,
    so ``trials`` counts only draws that meet the hypothesis; ``coherent``
    uses w·X_ℓ with one shared w.
    """
    if mode not in ("independent", "coherent"):
        raise ArgumentError(f"unknown mode {mode!r}")
    check_level(n, G.group_cap)
    names = G.gens.names
    levels = []
    for k in range(1, n + 1):
        wchain = wn_chain(k, G.group_cap)
        base = dict(zip(names, G.generator_tables(k)))
        outcomes = []
        skipped = 0
        j = 0
        while len(outcomes) < trials and j < trials * SIMCONJ_DRAWS_PER_TRIAL:
            rng = trial_rng(seed, k, j)
            j += 1
            if mode == "independent":
                conjugates = {ell: t.conjugate(uniform_sample(wchain, rng)) for ell, t in base.items()}
            else:
                w = uniform_sample(wchain, rng)
                conjugates = {ell: t.conjugate(w * uniform_sample(G.chain(k), rng)) for ell, t in base.items()}
            if not _has_transitive_element(list(conjugates.values()), rng):
                logger.debug("draw %d at level %d redrawn: no transitive element found", j - 1, k)
                skipped += 1
                continue
            try:
                w, X = G.simultaneous_conjugator(conjugates)
            except ProcedureFailure as e:
                outcomes.append(TrialOutcome(index=j - 1, verdict="fail", witness={"error": str(e), **(e.witness or {})}))
                break
            matches = all(
                conjugates[ell] == base[ell].conjugate(w * X[ell]) and G.contains(k, X[ell]) for ell in names
            )
            pulled_back = PermGroup(DEGREE, k, [t.conjugate(w.inverse()) for t in conjugates.values()])
            if matches and equal_groups(pulled_back, G.level_group(k)):
                outcomes.append(TrialOutcome(index=j - 1, verdict="pass"))
                continue
            outcomes.append(TrialOutcome(index=j - 1, verdict="fail", witness={"w": _images(w), "matches": matches}))
            break
        verdict = level_verdict(outcomes)
        if verdict == "pass" and len(outcomes) < trials:
            logger.warning("level %d: only %d of %d trials met the hypothesis in %d draws", k, len(outcomes), trials, j)
            verdict = "not-applicable"
        details = {"draws": j, "skipped": skipped}
        levels.append(LevelResult(n=k, trials=outcomes, verdict=verdict, details=details))
        if _failed(levels[-1]):
            break
    return _report("simconj", {"n": n, "trials": trials, "mode": mode, "r": G.r}, seed, levels)


def check_branch(G: ModelGroup, n: int) -> ExperimentReport:
    """[a,b] in the derived subgroup, index at most 2^(r+2), and H x 1 x 1 inside the next level.

    The last check needs level k+1 and is left out (reported as null) at the group cap.
    """
    if n < 1:
        raise ArgumentError("branch checks need n >= 1")
    check_level(n, G.group_cap)
    bound = 2 ** (G.r + 2)
    rotation = G.rotation()
    levels = []
    for k in range(1, n + 1):
        derived, dchain = G.derived(k)
        index = G.order(k) // dchain.order()
        rotation_in = contains(dchain, restrict(rotation, k))
        branching: Optional[bool] = None
        if k < G.group_cap:
            _, next_chain = G.derived(k + 1)
            branching = all(
                contains(next_chain, wreath_table({x: h}, DEGREE, k + 1))
                for h in derived.generators
                for x in range(1, DEGREE + 1)
            )
        details = {
            "order": str(G.order(k)),
            "derived_order": str(dchain.order()),
            "index": index,
            "bound": bound,
            "rotation_in_derived": rotation_in,
            "branching": branching,
        }
        ok = rotation_in and index <= bound and branching is not False
        levels.append(LevelResult(n=k, verdict=level_verdict([], ok), details=details))
        if _failed(levels[-1]):
            break
    return _report("branch", {"n": n, "r": G.r}, 0, levels)


def check_torsion(G: ModelGroup, pairs: Sequence[Tuple[int, int]], level_cap: Optional[int] = None) -> ExperimentReport:
    """Elements of order 2^m·3^n3 inside G; the order is only reported once a level shows it.

    Membership is checked against G_k for every k up to the witness level that
    the group cap allows.
    """
    levels = []
    for m, n3 in pairs:
        found = G.torsion_element(m, n3, level_cap)
        target = 2 ** m * 3 ** n3
        checked = min(found.level, G.group_cap)
        member = all(G.contains(k, restrict(found.element, k)) for k in range(1, checked + 1))
        details = {
            "m": m,
            "n3": n3,
            "order": str(found.order),
            "bound": m + n3 + 4,
            "member": member,
            "member_levels": checked,
        }
        ok = member and found.order == target and found.level <= m + n3 + 4
        levels.append(LevelResult(n=found.level, verdict=level_verdict([], ok), details=details))
        if _failed(levels[-1]):
            break
    return _report("torsion", {"pairs": [list(p) for p in pairs], "r": G.r}, 0, levels)


def check_self_replication(G: ModelGroup, n: int) -> ExperimentReport:
    """(ℓ, *, 1) witnesses in G_{k+1} for every generator ℓ and k <= n"""
    check_level(n + 1, G.group_cap)
    levels = []
    for k in range(1, n + 1):
        failures = []
        for name in G.gens.names:
            table = restrict(G.self_replication_witness(name), k + 1)
            ok = (
                table.root().is_identity()
                and table.section(1) == restrict(G.element(name), k)
                and table.section(DEGREE).is_identity()
                and G.contains(k + 1, table)
            )
            if not ok:
                failures.append(name)
        details = {"generators": len(G.gens.names), "failures": failures}
        levels.append(LevelResult(n=k, verdict=level_verdict([], not failures), details=details))
        if _failed(levels[-1]):
            break
    return _report("replication", {"n": n, "r": G.r}, 0, levels)


def _form_holds(label: str, g: LevelPermutation, table: LevelPermutation) -> bool:
    if not table.root().is_identity():
        return False
    letters = label.strip("()").split(",")
    for x, letter in enumerate(letters, start=1):
        if letter == "g" and table.section(x) != g:
            return False
        if letter == "1" and not table.section(x).is_identity():
            return False
    return True


def check_forms(G: ModelGroup, n: int, trials: int = 20, seed: int = 0) -> ExperimentReport:
    check_level(n + 1, G.group_cap)
    levels = []
    for k in range(1, n + 1):
        outcomes = []
        for i in range(trials):
            g = uniform_sample(G.chain(k), trial_rng(seed, k, i))
            try:
                forms = G.forms_witnesses(g)
            except ProcedureFailure as e:
                outcomes.append(TrialOutcome(index=i, verdict="fail", witness={"error": str(e)}))
                break
            bad = [label for label, t in forms.items() if not (_form_holds(label, g, t) and G.contains(k + 1, t))]
            outcomes.append(TrialOutcome(index=i, verdict="fail" if bad else "pass", witness={"forms": bad} if bad else None))
            if bad:
                break
        levels.append(LevelResult(n=k, trials=outcomes, verdict=level_verdict(outcomes)))
        if _failed(levels[-1]):
            break
    return _report("forms", {"n": n, "trials": trials, "r": G.r}, seed, levels)


def check_commutator_frame(G: ModelGroup, n: int, trials: int = 20, seed: int = 0) -> ExperimentReport:
    """(g, g^-1, 1) lies in the derived subgroup one level down for random g in G_n"""
    check_level(n + 1, G.group_cap)
    levels = []
    for k in range(1, n + 1):
        _, dchain = G.derived(k + 1)
        outcomes = []
        for i in range(trials):
            g = uniform_sample(G.chain(k), trial_rng(seed, k, i))
            try:
                frame = G.commutator_frame(g)
            except ProcedureFailure as e:
                outcomes.append(TrialOutcome(index=i, verdict="fail", witness={"error": str(e)}))
                break
            ok = frame == wreath_table({1: g, 2: g.inverse()}, DEGREE, k + 1) and contains(dchain, frame)
            outcomes.append(TrialOutcome(index=i, verdict="pass" if ok else "fail"))
            if not ok:
                break
        levels.append(LevelResult(n=k, trials=outcomes, verdict=level_verdict(outcomes)))
        if _failed(levels[-1]):
            break
    return _report("frame", {"n": n, "trials": trials, "r": G.r}, seed, levels)


def check_conjugacy_oracle(n: int, trials: int = 200, seed: int = 0, level_cap: Optional[int] = None) -> ExperimentReport:
    """conjugate_in_wn against exhaustive search over W_n; even trials use conjugate pairs"""
    if not 1 <= n <= 2:
        raise ArgumentError(f"exhaustive search over W_n needs 1 <= n <= 2, got {n}")
    chain = wn_chain(n, level_cap)
    everything = list(elements(chain))
    outcomes = []
    for i in range(trials):
        rng = trial_rng(seed, n, i)
        h = uniform_sample(chain, rng)
        g = h.conjugate(uniform_sample(chain, rng)) if i % 2 == 0 else uniform_sample(chain, rng)
        certificate = find_conjugator(g, h)
        exhaustive = brute_force_conjugator(g, h, everything)
        agree = (certificate is None) == (exhaustive is None)
        valid = certificate is None or certificate.verify(g, h)
        if agree and valid:
            outcomes.append(TrialOutcome(index=i, verdict="pass"))
            continue
        witness = {"g": _images(g), "h": _images(h), "solver_found": certificate is not None}
        outcomes.append(TrialOutcome(index=i, verdict="fail", witness=witness))
        break
    conjugate = sum(1 for i in range(len(outcomes)) if i % 2 == 0)
    level = LevelResult(
        n=n, trials=outcomes, verdict=level_verdict(outcomes),
        details={"candidates": len(everything), "conjugate_pairs": conjugate},
    )
    _failed(level)
    return _report("conjugacy-oracle", {"n": n, "trials": trials}, seed, [level])


def match_families(sub: Pairs, sup: Pairs) -> List[Optional[Tuple[int, str]]]:
    """For each sub pair, a sup index meeting the inclusion hypothesis; exact matches first"""
    matches: List[Optional[Tuple[int, str]]] = []
    for s_sub, m_sub in sub:
        found: Optional[Tuple[int, str]] = None
        for j, (s, m) in enumerate(sup):
            if (s_sub, m_sub) == (s, m):
                found = (j, "equal")
                break
        if found is None and s_sub == 0:
            for j, (s, m) in enumerate(sup):
                if s % m_sub == 0 and m % m_sub == 0:
                    found = (j, "divides")
                    break
        matches.append(found)
    return matches


def upsilon_image(elements_: Sequence[Element]) -> List[Tuple[int, int]]:
    """Subgroup of {±1}^2 generated by the first two sign-profile entries"""
    image = {(1, 1)}
    for e in elements_:
        vector = sign_profile(e, 1)
        image |= {(u * vector[0], v * vector[1]) for u, v in image}
    return sorted(image)


def _role_a_tables(G: ModelGroup, family: OrbitFamily, n: int) -> List[LevelPermutation]:
    """Level-n tables of the role-a family with the same (s, m), built from G's generators"""
    own = [restrict(family.machine.element(name), n) for name in family.names]
    if family.role is Role.A:
        return own
    multipliers = move_generators(disjoint_orbit_family(family.s, family.m, Role.A), family, n)
    tables = []
    for g, b in zip(multipliers, own):
        table = restrict(g, n)
        if not G.contains(n, table):
            raise ProcedureFailure(f"multiplier {g} is not in G_{n}", {"level": n})
        tables.append(table * b)
    return tables


def _constructed_tables(
    sup: ModelGroup, family: OrbitFamily, match: Tuple[int, str], n: int
) -> List[LevelPermutation]:
    """Tables of the sub family assembled from sup's generators, lifts and multipliers"""
    source = sup.families[match[0]]
    base = _role_a_tables(sup, source, n)
    if match[1] == "equal":
        tables = base
    else:
        r = family.m
        conjugators = sup.filtration_conjugators(base, source.s, source.m, r)
        tables = [cyclic_factor(base, k, r).conjugate(conjugators[k - 1]) for k in range(1, r + 1)]
    if family.role is Role.B:
        multipliers = move_generators(disjoint_orbit_family(family.s, family.m, Role.A), family, n)
        tables = [restrict(g, n).inverse() * t for g, t in zip(multipliers, tables)]
    return tables


def check_filtration(
    sub_pairs: Pairs, sup_pairs: Pairs, n: int, level_cap: Optional[int] = None
) -> ExperimentReport:
    """Inclusion of disjoint-orbit model groups on T_1..T_n with a sign-profile strictness check"""
    sub = ModelGroup.from_families(sub_pairs, level_cap)
    sup = ModelGroup.from_families(sup_pairs, level_cap)
    check_level(n, sup.group_cap)
    matches = match_families(sub_pairs, sup_pairs)
    hypothesis = all(m is not None for m in matches)
    upsilon_sub = upsilon_image(sub.generator_elements())
    upsilon_sup = upsilon_image(sup.generator_elements())
    levels = []
    for k in range(1, n + 1):
        inclusion = all(sup.contains(k, t) for t in sub.generator_tables(k))
        reverse = all(sub.contains(k, t) for t in sup.generator_tables(k))
        details = {
            "inclusion": inclusion,
            "reverse_inclusion": reverse,
            "strict": inclusion and k >= 2 and upsilon_sub != upsilon_sup,
            "upsilon_sub": [list(v) for v in upsilon_sub],
            "upsilon_sup": [list(v) for v in upsilon_sup],
        }
        if not hypothesis:
            levels.append(LevelResult(n=k, verdict="not-applicable", details=details))
            continue
        try:
            constructive = True
            for family, match in zip(sub.families, matches):
                built = _constructed_tables(sup, family, match, k)
                expected = [restrict(family.machine.element(name), k) for name in family.names]
                if built != expected or not all(sup.contains(k, t) for t in built):
                    constructive = False
        except ProcedureFailure as e:
            constructive = False
            details["error"] = str(e)
        details["constructive"] = constructive
        levels.append(LevelResult(n=k, verdict=level_verdict([], inclusion and constructive), details=details))
        if _failed(levels[-1]):
            break
    params = {"sub": [list(p) for p in sub_pairs], "sup": [list(p) for p in sup_pairs], "n": n}
    return _report("filtration", params, 0, levels)


def _closure_checks(G: ModelGroup, w: LevelPermutation, n: int) -> Dict[str, bool]:
    """Conjugate G_{n+1} by (w, 1, 1) and test section closure and the (w, *, 1) lift"""
    k = wreath_table({1: w}, DEGREE, n + 1)
    conjugated = [t.conjugate(k) for t in G.generator_tables(n + 1)]
    lower = build_chain(PermGroup(DEGREE, n, [t.restrict_to(n) for t in conjugated]))
    closed = all(contains(lower, t.section(x)) for t in conjugated for x in range(1, DEGREE + 1))
    upper = section_chain(PermGroup(DEGREE, n + 1, conjugated), [1, DEGREE])
    lifted = lift_in_chain(upper, {1: w, DEGREE: LevelPermutation.identity(DEGREE, n)})
    return {"sections_closed": closed, "w_in_H": contains(lower, w), "lift_exists": lifted is not None}


def check_class_not_closed(G: ModelGroup, n: int, seed: int = 0) -> ExperimentReport:
    """Conjugating by (w, 1, 1) with w outside G_n leaves the class of model groups"""
    if n < 2:
        level = LevelResult(n=n, verdict="not-applicable", details={"reason": "G_1 is all of W_1"})
        return _report("not-closed", {"n": n, "r": G.r}, seed, [level])
    check_level(n + 1, G.group_cap)
    rng = trial_rng(seed, n, 0)
    wchain = wn_chain(n, G.group_cap)
    for _ in range(MAX_REJECTIONS):
        w = uniform_sample(wchain, rng)
        if not G.contains(n, w):
            break
    else:
        raise ProcedureFailure(f"no element of W_{n} outside G_{n} after {MAX_REJECTIONS} draws")
    outside = _closure_checks(G, w, n)
    g = uniform_sample(G.derived(n)[1], rng)
    control = _closure_checks(G, g, n)
    ok = not (outside["sections_closed"] and outside["lift_exists"])
    control_ok = control["sections_closed"] and control["lift_exists"]
    details = {"outside": outside, "control": control, "w": _images(w)}
    level = LevelResult(n=n, verdict=level_verdict([], ok and control_ok), details=details)
    _failed(level)
    return _report("not-closed", {"n": n, "r": G.r}, seed, [level])
