"""Candidate plan enumeration: extend beam plans into all valid next plans.

Every emitted candidate is grammatical (type-checks) and faithful (executes;
non-COUNT candidates additionally have non-empty denotations). Enumeration is
deterministic: output is deduplicated by canonical rendering and sorted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidBeamPlan, SembeamError
from .executor import EntitySet, LiteralSet, execute
from .kb import BACKWARD, FORWARD, NUMERIC_KINDS, KnowledgeBase, classes_of, relations_from
from .plans import (
    COMPARATIVES,
    Name,
    Plan,
    comparative,
    count,
    intersect,
    join,
    plan_length,
    render_plan,
    superlative,
)


@dataclass(frozen=True)
class Constraints:
    """Disallowed actions and output bounds for enumeration."""

    denied_relations: frozenset = frozenset()
    denied_functions: frozenset = frozenset()
    max_candidates: int | None = None
    allow_count_of_leaf: bool = False

    def __post_init__(self):
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")

    def allows(self, func: str) -> bool:
        return func not in self.denied_functions

    def relation_ok(self, relation: str) -> bool:
        return relation not in self.denied_relations


DEFAULT_CONSTRAINTS = Constraints()


def _comparative_relations(kb: KnowledgeBase, kind: str) -> list:
    """Schema relations whose range is order-compatible with a literal kind."""
    if kind in NUMERIC_KINDS:
        wanted = NUMERIC_KINDS
    elif kind == "date":
        wanted = ("date",)
    else:
        return []
    return sorted(r for r, rel in kb.relations.items() if rel.range in wanted)


def candidate_plans(
    kb: KnowledgeBase,
    beam: Sequence[Plan],
    constraints: Constraints = DEFAULT_CONSTRAINTS,
) -> list:
    """All valid one-step extensions of the beam, canonically sorted.

    Raises InvalidBeamPlan if a beam member fails to execute.
    """
    executed = []
    for plan in beam:
        try:
            executed.append((plan, execute(kb, plan)))
        except SembeamError as exc:
            raise InvalidBeamPlan(f"beam plan {render_plan(plan)!r}: {exc}") from exc

    out: dict = {}

    def emit(candidate: Plan) -> None:
        out.setdefault(render_plan(candidate), candidate)

    entity_plans = []
    for plan, denotation in executed:
        if isinstance(denotation, EntitySet):
            entity_plans.append((plan, denotation.members))
            _extend_entity_plan(kb, plan, denotation.members, constraints, emit)
        elif isinstance(denotation, LiteralSet):
            _extend_literal_plan(kb, plan, denotation.members, constraints, emit)
        # Count-valued plans have no extensions

    if constraints.allows("AND"):
        for i, (p_i, d_i) in enumerate(entity_plans):
            for p_j, d_j in entity_plans[i + 1 :]:
                if render_plan(p_i) == render_plan(p_j):
                    continue
                if d_i & d_j:
                    emit(intersect(p_i, p_j))

    ordered = [out[key] for key in sorted(out)]
    if constraints.max_candidates is not None:
        ordered = ordered[: constraints.max_candidates]
    return ordered


def _count_ok(plan: Plan, constraints: Constraints) -> bool:
    if not constraints.allows("COUNT"):
        return False
    return plan_length(plan) >= 1 or constraints.allow_count_of_leaf


def _extend_entity_plan(kb, plan, members, constraints, emit) -> None:
    if constraints.allows("AND"):
        for cls in sorted(classes_of(kb, members)):
            emit(intersect(Name(cls), plan))

    forward_rels = sorted(relations_from(kb, members, FORWARD))
    if constraints.allows("JOIN"):
        for rel in sorted(relations_from(kb, members, BACKWARD)):
            if constraints.relation_ok(rel):
                emit(join(rel, plan))
        for rel in forward_rels:
            if constraints.relation_ok(rel):
                emit(join(rel, plan, inverse=True))

    for rel in forward_rels:
        if not constraints.relation_ok(rel):
            continue
        if kb.relations[rel].range in NUMERIC_KINDS:
            for func in ("ARGMAX", "ARGMIN"):
                if constraints.allows(func):
                    emit(superlative(func, plan, rel))

    if _count_ok(plan, constraints):
        emit(count(plan))


def _extend_literal_plan(kb, plan, members, constraints, emit) -> None:
    if len(members) == 1:
        (value,) = members
        for rel in _comparative_relations(kb, value.kind):
            if not constraints.relation_ok(rel):
                continue
            for func in COMPARATIVES:
                if not constraints.allows(func):
                    continue
                candidate = comparative(func, rel, value)
                if execute(kb, candidate).members:
                    emit(candidate)

    if _count_ok(plan, constraints):
        emit(count(plan))
