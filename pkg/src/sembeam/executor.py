"""Plan execution against a KB: the faithfulness ground truth.

Pure functions of immutable inputs; safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import PlanTypeError, TypeMismatch
from .kb import BACKWARD, FORWARD, KnowledgeBase, Literal, follow
from .plans import COMPARATIVES, Lit, Name, Plan, type_check


@dataclass(frozen=True)
class EntitySet:
    members: frozenset


@dataclass(frozen=True)
class LiteralSet:
    members: frozenset


@dataclass(frozen=True)
class Count:
    value: int


Denotation = Union[EntitySet, LiteralSet, Count]

_COMPARE = {
    "LT": lambda x, v: x < v,
    "LE": lambda x, v: x <= v,
    "GT": lambda x, v: x > v,
    "GE": lambda x, v: x >= v,
}


def execute(kb: KnowledgeBase, plan: Plan) -> Denotation:
    """Evaluate a plan to its denotation.

    Type-checks first: a plan that violates the signatures raises TypeMismatch,
    unresolvable identifiers raise UnknownIdentifier.
    """
    try:
        type_check(plan, kb)
    except PlanTypeError as exc:
        raise TypeMismatch(str(exc)) from exc
    return _denote(kb, plan, class_as_instances=False)


def _denote(kb: KnowledgeBase, plan: Plan, class_as_instances: bool) -> Denotation:
    if isinstance(plan, Name):
        if class_as_instances and plan.ident in kb.classes:
            return EntitySet(kb.instances[plan.ident])
        return EntitySet(frozenset((plan.ident,)))
    if isinstance(plan, Lit):
        return LiteralSet(frozenset((plan.value,)))

    func = plan.func
    if func == "JOIN":
        frontier = _denote(kb, plan.args[0], False).members
        direction = FORWARD if plan.inverse else BACKWARD
        result = follow(kb, frontier, plan.relation, direction)
        if plan.inverse and kb.relations[plan.relation].range_is_literal:
            return LiteralSet(frozenset(result))
        return EntitySet(frozenset(result))
    if func == "AND":
        a = _denote(kb, plan.args[0], True).members
        b = _denote(kb, plan.args[1], True).members
        return EntitySet(a & b)
    if func in ("ARGMAX", "ARGMIN"):
        operand = _denote(kb, plan.args[0], True).members
        pick = max if func == "ARGMAX" else min
        best_key = None
        winners: set = set()
        for entity in operand:
            values = kb.forward_index.get(entity, {}).get(plan.relation)
            if not values:
                continue
            key = pick(lit.value for lit in values)
            if best_key is None or key == best_key:
                winners.add(entity)
                best_key = key
            elif (func == "ARGMAX" and key > best_key) or (func == "ARGMIN" and key < best_key):
                winners = {entity}
                best_key = key
        return EntitySet(frozenset(winners))
    if func in COMPARATIVES:
        op = _COMPARE[func]
        bound = plan.args[0].value.value
        matched = {
            s
            for s, o in kb.by_relation.get(plan.relation, ())
            if isinstance(o, Literal) and op(o.value, bound)
        }
        return EntitySet(frozenset(matched))
    # COUNT
    operand = _denote(kb, plan.args[0], False)
    return Count(len(operand.members))


def denotation_members(denotation: Denotation):
    """The set behind a set-valued denotation; raises on Count."""
    if isinstance(denotation, Count):
        raise TypeMismatch("count denotation has no member set")
    return denotation.members
