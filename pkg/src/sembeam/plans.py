"""The S-expression plan language: AST, parser, canonical printer, type checker.

Grammar (nine functions):

    (JOIN r p)         one hop backward along r into the denotation of p
    (JOIN r~ p)        one hop forward along r out of the denotation of p
    (AND p q)          set intersection; a class id denotes all its instances
    (ARGMAX p r)       members of p with the maximum r-value (ARGMIN: minimum)
    (LT r "v"^^kind)   entities with an r-value < v (LE/GT/GE likewise)
    (COUNT p)          cardinality of the denotation of p

Leaves are entity ids, class ids, and literals written ``"lexical"^^kind``.
Canonical rendering sorts AND arguments lexicographically by their rendered
forms, so textual equality of canonical forms is order-insensitive equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import (
    ArityError,
    DegenerateGold,
    PlanSyntaxError,
    PlanTypeError,
    UnknownFunction,
    UnknownIdentifier,
)
from .kb import (
    NUMERIC_KINDS,
    ORDERED_KINDS,
    KnowledgeBase,
    Literal,
    escape_lexical,
    parse_literal_token,
)

FUNCTIONS = ("JOIN", "AND", "ARGMAX", "ARGMIN", "LT", "LE", "GT", "GE", "COUNT")
SUPERLATIVES = ("ARGMAX", "ARGMIN")
COMPARATIVES = ("LT", "LE", "GT", "GE")

ENTITY_SET = "entity-set"
LITERAL_SET = "literal-set"
INTEGER = "integer"


@dataclass(frozen=True)
class Name:
    """Entity or class identifier leaf; which one it is resolves against a KB."""

    ident: str


@dataclass(frozen=True)
class Lit:
    """Literal leaf."""

    value: Literal


@dataclass(frozen=True)
class Apply:
    """A function application node.

    ``relation`` is set for JOIN/ARGMAX/ARGMIN/comparatives; ``inverse`` only
    for JOIN (the ``r~`` surface form). AND arguments are stored in canonical
    (render-sorted) order.
    """

    func: str
    args: tuple
    relation: str | None = None
    inverse: bool = False


Plan = Union[Name, Lit, Apply]


def intersect(a: Plan, b: Plan) -> Apply:
    """Build an AND node with canonically ordered arguments."""
    if render_plan(a) <= render_plan(b):
        return Apply("AND", (a, b))
    return Apply("AND", (b, a))


def join(relation: str, arg: Plan, inverse: bool = False) -> Apply:
    return Apply("JOIN", (arg,), relation=relation, inverse=inverse)


def superlative(func: str, arg: Plan, relation: str) -> Apply:
    return Apply(func, (arg,), relation=relation)


def comparative(func: str, relation: str, value: Literal) -> Apply:
    return Apply(func, (Lit(value),), relation=relation)


def count(arg: Plan) -> Apply:
    return Apply("COUNT", (arg,))


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<lparen>\()
      | (?P<rparen>\))
      | (?P<literal>"(?:[^"\\]|\\.)*"\^\^[a-z]+)
      | (?P<symbol>[^\s()"]+)
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                return
            raise PlanSyntaxError(f"unexpected character {text[pos]!r}", pos)
        for kind in ("lparen", "rparen", "literal", "symbol"):
            if m.group(kind) is not None:
                yield kind, m.group(kind), m.start(kind)
                break
        pos = m.end()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, expect: str | None = None):
        tok = self.peek()
        if tok is None:
            raise PlanSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        if expect is not None and tok[0] != expect:
            raise PlanSyntaxError(f"expected {expect}, got {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Plan:
        if not self.tokens:
            raise PlanSyntaxError("empty plan", 0)
        plan = self.expression()
        trailing = self.peek()
        if trailing is not None:
            raise PlanSyntaxError(f"trailing input {trailing[1]!r}", trailing[2])
        return plan

    def expression(self) -> Plan:
        kind, value, pos = self.next()
        if kind == "symbol":
            return self.leaf_symbol(value, pos)
        if kind == "literal":
            return Lit(self.literal(value, pos))
        if kind == "rparen":
            raise PlanSyntaxError("unexpected ')'", pos)
        return self.application()

    def leaf_symbol(self, value: str, pos: int) -> Name:
        if "~" in value:
            raise PlanSyntaxError("'~' is only valid on a JOIN relation", pos)
        return Name(value)

    def literal(self, token: str, pos: int) -> Literal:
        try:
            lit = parse_literal_token(token)
        except ValueError as exc:
            raise PlanSyntaxError(f"bad literal: {exc}", pos) from exc
        if lit is None:
            raise PlanSyntaxError(f"malformed literal {token!r}", pos)
        return lit

    def application(self) -> Apply:
        kind, head, pos = self.next()
        if kind != "symbol":
            raise PlanSyntaxError("expected a function name after '('", pos)
        if head not in FUNCTIONS:
            raise UnknownFunction(f"unknown function {head!r}")
        items = []
        while True:
            tok = self.peek()
            if tok is None:
                raise PlanSyntaxError("missing ')'", len(self.text))
            if tok[0] == "rparen":
                self.next()
                break
            items.append(tok)
            if tok[0] == "lparen":
                items[-1] = ("expr", self.expression(), tok[2])
            else:
                self.next()
        return self.build(head, items, pos)

    def build(self, func: str, items: list, pos: int) -> Apply:
        def need(n: int):
            if len(items) != n:
                raise ArityError(f"{func} takes {n} arguments, got {len(items)}")

        def as_plan(item) -> Plan:
            kind, value, p = item
            if kind == "expr":
                return value
            if kind == "literal":
                return Lit(self.literal(value, p))
            return self.leaf_symbol(value, p)

        def as_relation(item) -> tuple[str, bool]:
            kind, value, p = item
            if kind != "symbol":
                raise PlanSyntaxError("expected a relation id", p)
            inverse = value.endswith("~")
            name = value[:-1] if inverse else value
            if not name or "~" in name:
                raise PlanSyntaxError(f"bad relation id {value!r}", p)
            return name, inverse

        if func == "JOIN":
            need(2)
            rel, inverse = as_relation(items[0])
            return Apply("JOIN", (as_plan(items[1]),), relation=rel, inverse=inverse)
        if func == "AND":
            need(2)
            return intersect(as_plan(items[0]), as_plan(items[1]))
        if func in SUPERLATIVES:
            need(2)
            rel, inverse = as_relation(items[1])
            if inverse:
                raise PlanSyntaxError("'~' is only valid on a JOIN relation", items[1][2])
            return Apply(func, (as_plan(items[0]),), relation=rel)
        if func in COMPARATIVES:
            need(2)
            rel, inverse = as_relation(items[0])
            if inverse:
                raise PlanSyntaxError("'~' is only valid on a JOIN relation", items[0][2])
            kind, value, p = items[1]
            if kind != "literal":
                raise PlanSyntaxError(f"{func} needs a literal argument", p)
            return Apply(func, (Lit(self.literal(value, p)),), relation=rel)
        if func == "COUNT":
            need(1)
            return Apply("COUNT", (as_plan(items[0]),))
        raise UnknownFunction(f"unknown function {func!r}")  # pragma: no cover


def parse_plan(text: str) -> Plan:
    """Parse plan text into an AST; ``parse_plan(render_plan(p)) == p``."""
    return _Parser(text).parse()


def render_plan(plan: Plan) -> str:
    """Deterministic canonical text; AND arguments sorted by rendered form."""
    if isinstance(plan, Name):
        return plan.ident
    if isinstance(plan, Lit):
        return f'"{escape_lexical(plan.value.lexical)}"^^{plan.value.kind}'
    if plan.func == "JOIN":
        rel = plan.relation + ("~" if plan.inverse else "")
        return f"(JOIN {rel} {render_plan(plan.args[0])})"
    if plan.func == "AND":
        a, b = sorted(render_plan(arg) for arg in plan.args)
        return f"(AND {a} {b})"
    if plan.func in SUPERLATIVES:
        return f"({plan.func} {render_plan(plan.args[0])} {plan.relation})"
    if plan.func in COMPARATIVES:
        return f"({plan.func} {plan.relation} {render_plan(plan.args[0])})"
    return f"(COUNT {render_plan(plan.args[0])})"


def plan_length(plan: Plan) -> int:
    """Number of function application nodes; leaves have length 0."""
    if not isinstance(plan, Apply):
        return 0
    return 1 + sum(plan_length(arg) for arg in plan.args)


def subexpressions(plan: Plan) -> Iterator[Apply]:
    """All Apply-rooted subtrees, outermost last, duplicates included."""
    if not isinstance(plan, Apply):
        return
    for arg in plan.args:
        yield from subexpressions(arg)
    yield plan


# --- type checking ---------------------------------------------------------

def _resolve_name(leaf: Name, kb: KnowledgeBase, class_ok: bool) -> str:
    if leaf.ident in kb.entities:
        return ENTITY_SET
    if leaf.ident in kb.classes:
        if not class_ok:
            raise PlanTypeError(
                f"class {leaf.ident!r} is only allowed as an AND argument or a "
                f"superlative operand"
            )
        return ENTITY_SET
    raise UnknownIdentifier(f"unknown identifier {leaf.ident!r}")


def _check_relation(name: str, kb: KnowledgeBase):
    if name not in kb.relations:
        raise UnknownIdentifier(f"unknown relation {name!r}")
    return kb.relations[name]


def type_check(plan: Plan, kb: KnowledgeBase, _class_ok: bool = False) -> str:
    """Infer the result type: entity-set, literal-set, or integer.

    Raises PlanTypeError on a signature violation (naming the offending
    subexpression) or UnknownIdentifier when an id does not resolve.
    """
    if isinstance(plan, Name):
        return _resolve_name(plan, kb, _class_ok)
    if isinstance(plan, Lit):
        return LITERAL_SET

    func = plan.func
    if func == "JOIN":
        rel = _check_relation(plan.relation, kb)
        arg_type = type_check(plan.args[0], kb)
        if arg_type != ENTITY_SET:
            raise PlanTypeError(f"JOIN needs an entity set, got {arg_type} in {render_plan(plan)}")
        if plan.inverse and rel.range_is_literal:
            return LITERAL_SET
        return ENTITY_SET
    if func == "AND":
        for arg in plan.args:
            arg_type = type_check(arg, kb, _class_ok=True)
            if arg_type != ENTITY_SET:
                raise PlanTypeError(f"AND cannot take {arg_type} in {render_plan(plan)}")
        a, b = plan.args
        if render_plan(a) == render_plan(b):
            raise PlanTypeError(f"AND arguments are identical in {render_plan(plan)}")
        return ENTITY_SET
    if func in SUPERLATIVES:
        rel = _check_relation(plan.relation, kb)
        arg_type = type_check(plan.args[0], kb, _class_ok=True)
        if arg_type != ENTITY_SET:
            raise PlanTypeError(f"{func} needs an entity set, got {arg_type} in {render_plan(plan)}")
        if rel.range not in ORDERED_KINDS:
            raise PlanTypeError(f"{func} needs an ordered literal range, relation "
                                f"{plan.relation!r} has range {rel.range!r}")
        return ENTITY_SET
    if func in COMPARATIVES:
        rel = _check_relation(plan.relation, kb)
        if rel.range not in ORDERED_KINDS:
            raise PlanTypeError(f"{func} needs an ordered literal range, relation "
                                f"{plan.relation!r} has range {rel.range!r}")
        lit = plan.args[0]
        if not isinstance(lit, Lit):
            raise PlanTypeError(f"{func} needs a literal argument in {render_plan(plan)}")
        kind = lit.value.kind
        compatible = (
            kind in NUMERIC_KINDS and rel.range in NUMERIC_KINDS
        ) or kind == rel.range
        if not compatible:
            raise PlanTypeError(f"{func}: literal kind {kind!r} does not match range "
                                f"{rel.range!r} of {plan.relation!r}")
        return ENTITY_SET
    # COUNT
    arg_type = type_check(plan.args[0], kb)
    if arg_type == INTEGER:
        raise PlanTypeError(f"COUNT cannot take integer in {render_plan(plan)}")
    return INTEGER


# --- gold decomposition ----------------------------------------------------

@dataclass(frozen=True)
class GoldDecomposition:
    """Gold subplans of a target, grouped by plan length: steps[t] for t=1..T."""

    target: Plan
    steps: dict  # t -> frozenset of Plan

    @property
    def length(self) -> int:
        return plan_length(self.target)

    def at(self, t: int) -> frozenset:
        return self.steps.get(t, frozenset())

    def all_subplans(self) -> frozenset:
        out: set = set()
        for members in self.steps.values():
            out.update(members)
        return frozenset(out)


def derive_gold_decomposition(target: Plan) -> GoldDecomposition:
    """Group the distinct Apply-rooted subexpressions of ``target`` by length."""
    T = plan_length(target)
    if T == 0:
        raise DegenerateGold(f"plan {render_plan(target)!r} has no function applications")
    by_length: dict = {}
    seen: set = set()
    for sub in subexpressions(target):
        key = render_plan(sub)
        if key in seen:
            continue
        seen.add(key)
        by_length.setdefault(plan_length(sub), set()).add(sub)
    return GoldDecomposition(target, {t: frozenset(s) for t, s in by_length.items()})
