"""In-memory knowledge base: typed triples, schema validation, adjacency indexes.

A KB is immutable after load. Entities, classes, and relations live in
disjoint id namespaces; class membership comes from ``type`` lines in the
schema file, never from triples, so ``type`` is not an enumerable relation.
"""

from __future__ import annotations

import datetime
import math
import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    DuplicateDeclaration,
    ParseError,
    SchemaViolation,
    UnknownEntity,
    UnknownRelation,
)

LITERAL_KINDS = ("integer", "float", "string", "date")
NUMERIC_KINDS = ("integer", "float")
ORDERED_KINDS = ("integer", "float", "date")

FORWARD = "forward"
BACKWARD = "backward"

# ids must survive the plan surface syntax unescaped
_IDENT_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass(frozen=True)
class Literal:
    """A typed literal; deduplicated by (kind, value), printed via canonical lexical."""

    kind: str
    value: object
    lexical: str

    @staticmethod
    def parse(kind: str, lexical: str) -> "Literal":
        """Parse a lexical form into a canonical literal; raises ValueError."""
        if kind == "integer":
            value: object = int(lexical, 10)
            canon = str(value)
        elif kind == "float":
            value = float(lexical)
            if not math.isfinite(value):
                raise ValueError(f"non-finite float literal {lexical!r}")
            canon = repr(value)
        elif kind == "date":
            value = datetime.date.fromisoformat(lexical)
            canon = value.isoformat()
        elif kind == "string":
            value = lexical
            canon = lexical
        else:
            raise ValueError(f"unknown literal kind {kind!r}")
        return Literal(kind, value, canon)

    def sort_key(self) -> tuple:
        return (self.kind, self.lexical)


def comparable_kinds(a: str, b: str) -> bool:
    """Whether two literal kinds share a total order (numerics pool together)."""
    if a in NUMERIC_KINDS and b in NUMERIC_KINDS:
        return True
    return a == b and a in ORDERED_KINDS


@dataclass(frozen=True)
class Relation:
    """Schema entry for a binary relation: domain class and range (class or literal kind)."""

    name: str
    domain: str
    range: str

    @property
    def range_is_literal(self) -> bool:
        return self.range in LITERAL_KINDS


Triple = tuple  # (subject: str, relation: str, obj: str | Literal)


@dataclass(frozen=True)
class KnowledgeBase:
    """Validated, indexed triple store. Never mutated after ``load_kb``."""

    entities: frozenset
    classes: frozenset
    relations: dict
    class_membership: dict  # entity -> frozenset of class ids
    instances: dict  # class -> frozenset of entity ids
    triples: frozenset
    forward_index: dict = field(repr=False)  # subject -> relation -> frozenset of objects
    backward_index: dict = field(repr=False)  # object -> relation -> frozenset of subjects
    by_relation: dict = field(repr=False)  # relation -> tuple of (subject, object)

    def check_entities(self, frontier: Iterable) -> None:
        for e in frontier:
            if e not in self.entities:
                raise UnknownEntity(f"unknown entity {e!r}")

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise UnknownRelation(f"unknown relation {name!r}") from None


def _check_ident(ident: str, what: str, path: str, line: int) -> None:
    if not _IDENT_RE.match(ident):
        raise ParseError(f"invalid {what} id {ident!r}", path, line)


_LITERAL_OBJ_RE = re.compile(r'^"(?P<lex>(?:[^"\\]|\\.)*)"\^\^(?P<kind>[a-z]+)$')


def unescape_lexical(text: str) -> str:
    return text.replace('\\"', '"').replace("\\\\", "\\")


def escape_lexical(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def parse_literal_token(token: str) -> Literal | None:
    """Parse a '"lexical"^^kind' token; returns None when it is not literal-shaped."""
    m = _LITERAL_OBJ_RE.match(token)
    if m is None:
        return None
    return Literal.parse(m.group("kind"), unescape_lexical(m.group("lex")))


def _iter_lines(path: str):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _load_schema(path: str):
    classes: set = set()
    relations: dict = {}
    memberships: list = []  # (entity, class, lineno)

    lines = list(_iter_lines(path))
    # classes first so that relation ranges / type lines may reference a class
    # declared later in the file (load is line-order independent)
    for lineno, line in lines:
        parts = line.split()
        if parts[0] == "class":
            if len(parts) != 2:
                raise ParseError("class declaration needs exactly one id", path, lineno)
            _check_ident(parts[1], "class", path, lineno)
            if parts[1] in classes:
                raise DuplicateDeclaration(f"class {parts[1]!r} declared twice")
            classes.add(parts[1])

    for lineno, line in lines:
        parts = line.split()
        kind = parts[0]
        if kind == "class":
            continue
        if kind == "relation":
            if len(parts) != 4:
                raise ParseError("relation declaration needs id, domain, range", path, lineno)
            name, domain, rng = parts[1], parts[2], parts[3]
            _check_ident(name, "relation", path, lineno)
            if name in relations:
                raise DuplicateDeclaration(f"relation {name!r} declared twice")
            if name in classes:
                raise DuplicateDeclaration(f"id {name!r} is both a class and a relation")
            if domain not in classes:
                raise SchemaViolation(f"relation {name!r}: unknown domain class {domain!r}")
            if rng not in classes and rng not in LITERAL_KINDS:
                raise SchemaViolation(f"relation {name!r}: unknown range {rng!r}")
            relations[name] = Relation(name, domain, rng)
        elif kind == "type":
            if len(parts) != 3:
                raise ParseError("type declaration needs entity and class", path, lineno)
            _check_ident(parts[1], "entity", path, lineno)
            if parts[2] not in classes:
                raise SchemaViolation(f"type line: unknown class {parts[2]!r}")
            memberships.append((parts[1], parts[2]))
        else:
            raise ParseError(f"unknown schema directive {kind!r}", path, lineno)

    membership: dict = {}
    seen = set()
    for entity, cls in memberships:
        if (entity, cls) in seen:
            raise DuplicateDeclaration(f"type {entity} {cls} declared twice")
        seen.add((entity, cls))
        membership.setdefault(entity, set()).add(cls)
    for entity in membership:
        if entity in classes or entity in relations:
            raise DuplicateDeclaration(f"id {entity!r} is both an entity and a class/relation")
    return classes, relations, membership


def load_kb(triples_path: str, schema_path: str) -> KnowledgeBase:
    """Load and validate a KB from a triples file and a schema file.

    Raises ParseError (malformed line), SchemaViolation (domain/range or
    unknown relation), or DuplicateDeclaration (schema redeclarations).
    """
    classes, relations, membership = _load_schema(schema_path)
    entities = frozenset(membership)

    triples: set = set()
    for lineno, line in _iter_lines(triples_path):
        cols = line.split("\t")
        if len(cols) != 3:
            raise ParseError("expected subject<TAB>relation<TAB>object", triples_path, lineno)
        subj, rel_name, obj_text = (c.strip() for c in cols)
        _check_ident(subj, "subject", triples_path, lineno)
        if subj not in entities:
            raise SchemaViolation(f"{triples_path}:{lineno}: unknown subject entity {subj!r}")
        if rel_name not in relations:
            raise SchemaViolation(f"{triples_path}:{lineno}: unknown relation {rel_name!r}")
        rel = relations[rel_name]
        if rel.domain not in membership[subj]:
            raise SchemaViolation(
                f"{triples_path}:{lineno}: subject {subj!r} is not a {rel.domain!r} "
                f"(required by relation {rel_name!r})"
            )
        obj: object
        if obj_text.startswith('"'):
            try:
                lit = parse_literal_token(obj_text)
            except ValueError as exc:
                raise ParseError(f"bad literal object: {exc}", triples_path, lineno) from exc
            if lit is None:
                raise ParseError(f"malformed literal object {obj_text!r}", triples_path, lineno)
            if not rel.range_is_literal or lit.kind != rel.range:
                raise SchemaViolation(
                    f"{triples_path}:{lineno}: relation {rel_name!r} expects range "
                    f"{rel.range!r}, got {lit.kind!r} literal"
                )
            obj = lit
        else:
            _check_ident(obj_text, "object", triples_path, lineno)
            if rel.range_is_literal:
                raise SchemaViolation(
                    f"{triples_path}:{lineno}: relation {rel_name!r} expects a "
                    f"{rel.range!r} literal object"
                )
            if obj_text not in entities:
                raise SchemaViolation(f"{triples_path}:{lineno}: unknown object entity {obj_text!r}")
            if rel.range not in membership[obj_text]:
                raise SchemaViolation(
                    f"{triples_path}:{lineno}: object {obj_text!r} is not a {rel.range!r} "
                    f"(required by relation {rel_name!r})"
                )
            obj = obj_text
        triples.add((subj, rel_name, obj))

    return build_kb(classes, relations, membership, triples)


def build_kb(classes, relations, membership, triples) -> KnowledgeBase:
    """Assemble the indexed KB from already-validated parts (used by tests too)."""
    forward: dict = {}
    backward: dict = {}
    by_relation: dict = {r: [] for r in relations}
    for s, r, o in triples:
        forward.setdefault(s, {}).setdefault(r, set()).add(o)
        backward.setdefault(o, {}).setdefault(r, set()).add(s)
        by_relation[r].append((s, o))

    instances: dict = {c: set() for c in classes}
    for entity, cls_set in membership.items():
        for c in cls_set:
            instances[c].add(entity)

    def freeze(index):
        return {k: {r: frozenset(v) for r, v in rels.items()} for k, rels in index.items()}

    return KnowledgeBase(
        entities=frozenset(membership),
        classes=frozenset(classes),
        relations=dict(relations),
        class_membership={e: frozenset(cs) for e, cs in membership.items()},
        instances={c: frozenset(es) for c, es in instances.items()},
        triples=frozenset(triples),
        forward_index=freeze(forward),
        backward_index=freeze(backward),
        by_relation={r: tuple(sorted(pairs, key=_pair_key)) for r, pairs in by_relation.items()},
    )


def _pair_key(pair):
    s, o = pair
    return (s, o.sort_key()) if isinstance(o, Literal) else (s, ("", o))


def _check_direction(direction: str) -> None:
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}, got {direction!r}")


def relations_from(kb: KnowledgeBase, frontier: Iterable, direction: str) -> set:
    """Relations with an edge out of (forward) or into (backward) the frontier."""
    _check_direction(direction)
    frontier = set(frontier)
    kb.check_entities(frontier)
    index = kb.forward_index if direction == FORWARD else kb.backward_index
    found: set = set()
    for e in frontier:
        found.update(index.get(e, ()))
    return found


def classes_of(kb: KnowledgeBase, frontier: Iterable) -> set:
    """Union of class memberships over the frontier."""
    frontier = set(frontier)
    kb.check_entities(frontier)
    found: set = set()
    for e in frontier:
        found.update(kb.class_membership.get(e, ()))
    return found


def follow(kb: KnowledgeBase, frontier: Iterable, relation: str, direction: str) -> set:
    """One hop along ``relation``: forward returns objects of frontier subjects,
    backward returns subjects pointing into the frontier."""
    _check_direction(direction)
    kb.relation(relation)
    frontier = set(frontier)
    kb.check_entities(e for e in frontier if not isinstance(e, Literal))
    index = kb.forward_index if direction == FORWARD else kb.backward_index
    result: set = set()
    for e in frontier:
        result.update(index.get(e, {}).get(relation, ()))
    return result
