import random

import pytest

from sembeam.candidates import Constraints, candidate_plans
from sembeam.errors import InvalidBeamPlan
from sembeam.executor import Count, execute
from sembeam.kb import Literal
from sembeam.plans import Lit, Name, parse_plan, plan_length, render_plan, type_check

from oracles import brute_force_valid_plans
from synth import random_beam, random_kb


def canon(text):
    return render_plan(parse_plan(text))


def renders(plans):
    return {render_plan(p) for p in plans}


def test_entity_leaf_expansion(mini):
    out = candidate_plans(mini, [parse_plan("java")])
    assert renders(out) == {
        canon("(AND Language java)"),
        canon("(JOIN emulates java)"),
        canon("(JOIN knows java)"),
    }


def test_join_plan_expansion(mini):
    out = renders(candidate_plans(mini, [parse_plan("(JOIN emulates java)")]))
    assert canon("(AND Emulator (JOIN emulates java))") in out
    assert canon("(JOIN emulates~ (JOIN emulates java))") in out
    assert canon("(COUNT (JOIN emulates java))") in out
    assert not any("age" in r for r in out)


def test_denied_relation(mini):
    out = candidate_plans(
        mini, [parse_plan("java")], Constraints(denied_relations=frozenset({"knows"}))
    )
    assert renders(out) == {canon("(AND Language java)"), canon("(JOIN emulates java)")}


def test_denied_function(mini):
    out = candidate_plans(
        mini,
        [parse_plan("(JOIN emulates java)")],
        Constraints(denied_functions=frozenset({"COUNT"})),
    )
    assert not any(r.startswith("(COUNT") for r in renders(out))


def test_count_of_leaf_gate(mini):
    plain = renders(candidate_plans(mini, [parse_plan("java")]))
    assert canon("(COUNT java)") not in plain
    allowed = renders(
        candidate_plans(mini, [parse_plan("java")], Constraints(allow_count_of_leaf=True))
    )
    assert canon("(COUNT java)") in allowed


def test_max_candidates_truncation(mini):
    full = candidate_plans(mini, [parse_plan("java")])
    capped = candidate_plans(mini, [parse_plan("java")], Constraints(max_candidates=2))
    assert [render_plan(p) for p in capped] == [render_plan(p) for p in full[:2]]
    with pytest.raises(ValueError):
        Constraints(max_candidates=0)


def test_literal_leaf_spawns_comparatives(mini):
    beam = [Lit(Literal.parse("integer", "40"))]
    out = renders(candidate_plans(mini, beam))
    assert out == {
        canon('(GT age "40"^^integer)'),
        canon('(GE age "40"^^integer)'),
        canon('(LT age "40"^^integer)'),
        canon('(LE age "40"^^integer)'),
    }


def test_pairwise_and_requires_overlap(mini):
    j1 = parse_plan("(JOIN emulates java)")  # {emu1, emu2}
    j2 = parse_plan("(JOIN emulates basic)")  # {emu2}
    out = renders(candidate_plans(mini, [j1, j2]))
    assert canon("(AND (JOIN emulates java) (JOIN emulates basic))") in out
    k1 = parse_plan("(JOIN knows java)")  # {alice}
    k2 = parse_plan("(JOIN knows basic)")  # {bob}
    out2 = renders(candidate_plans(mini, [k1, k2]))
    assert canon("(AND (JOIN knows java) (JOIN knows basic))") not in out2


def test_invalid_beam_plan(mini):
    with pytest.raises(InvalidBeamPlan):
        candidate_plans(mini, [parse_plan("(JOIN emulates ghost)")])


def test_deterministic_and_sorted(mini):
    beam = [parse_plan("java"), parse_plan("alice")]
    first = [render_plan(p) for p in candidate_plans(mini, beam)]
    second = [render_plan(p) for p in candidate_plans(mini, list(reversed(beam)))]
    assert first == sorted(first)
    assert first == second


def test_faithfulness_on_random_kbs():
    rng = random.Random(7)
    for _ in range(60):
        kb = random_kb(rng, max_entities=12)
        beam = random_beam(kb, rng)
        for candidate in candidate_plans(kb, beam):
            type_check(candidate, kb)
            denotation = execute(kb, candidate)
            if not isinstance(denotation, Count):
                assert denotation.members, render_plan(candidate)


def test_length_step_for_single_plan_rules(mini):
    beam = [parse_plan("(JOIN emulates java)"), parse_plan("(JOIN knows java)")]
    lengths = {plan_length(p) for p in beam}
    assert lengths == {1}
    for candidate in candidate_plans(mini, beam):
        text = render_plan(candidate)
        if text.count("(JOIN") >= 2 and text.startswith("(AND"):
            assert plan_length(candidate) == 3  # pair rule: len_i + len_j + 1
        else:
            assert plan_length(candidate) == 2


def _bfs_closure(kb, initial, max_length):
    """Accumulating closure of candidate_plans, keeping plans of length <= max."""
    constraints = Constraints(allow_count_of_leaf=True)
    closed = {render_plan(p): p for p in initial}
    while True:
        beam = [closed[k] for k in sorted(closed)]
        new = candidate_plans(kb, beam, constraints)
        added = False
        for plan in new:
            key = render_plan(plan)
            if plan_length(plan) <= max_length and key not in closed:
                closed[key] = plan
                added = True
        if not added:
            return {k: p for k, p in closed.items() if plan_length(p) >= 1}


def test_enumeration_closure_matches_brute_force(mini):
    initial = [Name(e) for e in sorted(mini.entities)] + [Lit(Literal.parse("integer", "40"))]
    closure = _bfs_closure(mini, initial, 2)
    brute = brute_force_valid_plans(mini, initial, 2, allow_count_of_leaf=True)
    assert set(closure) == set(brute)
