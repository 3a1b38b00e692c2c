"""Exception hierarchy shared by all sembeam modules."""

from __future__ import annotations


class SembeamError(Exception):
    """Base class for every error raised by this package."""


# --- file parsing / KB loading -------------------------------------------

class ParseError(SembeamError):
    """A triples/schema/dataset file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class SchemaViolation(SembeamError):
    """A triple contradicts the declared schema (domain/range, unknown relation)."""


class DuplicateDeclaration(SembeamError):
    """The same class/relation/type was declared twice, or id namespaces overlap."""


# --- KB lookups ----------------------------------------------------------

class UnknownEntity(SembeamError):
    """An entity id is not part of the loaded KB."""


class UnknownRelation(SembeamError):
    """A relation id is not part of the loaded KB."""


# --- plan language -------------------------------------------------------

class PlanSyntaxError(SembeamError):
    """Malformed plan text; carries the character offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class ArityError(SembeamError):
    """A plan function was applied to the wrong number of arguments."""


class UnknownFunction(SembeamError):
    """The head of an S-expression is not one of the nine plan functions."""


class PlanTypeError(SembeamError):
    """A plan violates the function signatures; names the offending subexpression."""


class UnknownIdentifier(SembeamError):
    """A plan identifier does not resolve against the KB."""


class DegenerateGold(SembeamError):
    """A gold plan has no function applications, so it cannot be decomposed."""


# --- execution -----------------------------------------------------------

class TypeMismatch(SembeamError):
    """A plan that does not type-check was handed to the executor."""


# --- enumeration ---------------------------------------------------------

class InvalidBeamPlan(SembeamError):
    """A beam member failed to execute, so it cannot be extended."""


# --- scoring -------------------------------------------------------------

class DimensionMismatch(SembeamError):
    """Model weight vector does not match the feature dimension."""


class TransportError(SembeamError):
    """Remote scorer unreachable after bounded retries."""


class ProtocolError(SembeamError):
    """Remote scorer returned a malformed response or the wrong score count."""


class NonFiniteScore(SembeamError):
    """Remote scorer returned NaN or infinity."""


class EmptyPool(SembeamError):
    """In-context example selection was given an empty pool."""


# --- search / training ---------------------------------------------------

class EmptyInitialPlans(SembeamError):
    """Search was started without any initial plans."""


class ScorerFailure(SembeamError):
    """The scorer raised while scoring a candidate batch."""


class GoldNotReproducible(SembeamError):
    """A gold subexpression cannot be produced by enumeration under the constraints."""


class NonFiniteLoss(SembeamError):
    """Training produced a NaN/inf loss and was aborted."""


# --- evaluation ----------------------------------------------------------

class UnknownQid(SembeamError):
    """Predictions refer to a qid that is not in the dataset."""
