"""Plausibility scoring: featurization, the lexical baseline, and the linear ranker.

All scorers map (utterance, candidate plan) to a raw real score; higher means
a better match. Scores are not probabilities; softmax happens only in training.
"""

from __future__ import annotations

import functools
import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

from .errors import DimensionMismatch, ParseError
from .plans import Apply, Lit, Name, Plan, plan_length

FEATURE_VERSION = "lex13-v1"
FEATURE_DIM = 13

ROOT_FUNCTIONS = ("JOIN", "AND", "ARGMAX", "ARGMIN", "LT", "LE", "GT", "GE", "COUNT")

# fixed 25-word stopword list; versioned through FEATURE_VERSION
STOPWORDS = frozenset(
    "a an and are as at be by for from in is it of on or that the to was were "
    "what which who with".split()
)
assert len(STOPWORDS) == 25

_WORD_RE = re.compile(r"[a-z0-9]+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def tokenize_utterance(text: str) -> list:
    """Lowercased alphanumeric tokens, split on whitespace/punctuation."""
    return _WORD_RE.findall(text.lower())


def tokenize_schema(identifier: str) -> list:
    """Split an identifier on '.', '_', '~' and camelCase boundaries; lowercase."""
    return list(_tokenize_schema_cached(identifier))


@functools.lru_cache(maxsize=65536)
def _tokenize_schema_cached(identifier: str) -> tuple:
    cleaned = _CAMEL_RE.sub(" ", identifier)
    parts = re.split(r"[._~\s]+", cleaned)
    return tuple(p.lower() for p in parts if p)


@functools.lru_cache(maxsize=65536)
def plan_tokens(plan: Plan) -> frozenset:
    """Tokens of every identifier and literal appearing in the plan."""
    tokens: set = set()

    def walk(node: Plan) -> None:
        if isinstance(node, Name):
            tokens.update(tokenize_schema(node.ident))
        elif isinstance(node, Lit):
            tokens.update(tokenize_utterance(node.value.lexical))
        else:
            if node.relation is not None:
                tokens.update(tokenize_schema(node.relation))
            for arg in node.args:
                walk(arg)

    walk(plan)
    return frozenset(tokens)


def featurize(utterance: str, candidate: Plan) -> list:
    """13 features: jaccard, plan-token recall, content coverage, length/10,
    and nine 0/1 root-function indicators (all zero for a leaf)."""
    utt = set(tokenize_utterance(utterance))
    content = utt - STOPWORDS
    plan_toks = plan_tokens(candidate)
    overlap = plan_toks & utt

    union = plan_toks | utt
    jaccard = len(overlap) / len(union) if union else 0.0
    recall = len(overlap) / len(plan_toks) if plan_toks else 0.0
    coverage = len(plan_toks & content) / len(content) if content else 0.0

    indicators = [0.0] * len(ROOT_FUNCTIONS)
    if isinstance(candidate, Apply):
        indicators[ROOT_FUNCTIONS.index(candidate.func)] = 1.0

    return [jaccard, recall, coverage, plan_length(candidate) / 10.0] + indicators


def lexical_score(utterance: str, candidate: Plan) -> float:
    """Deterministic baseline: plan-token recall plus a completeness bonus."""
    utt = set(tokenize_utterance(utterance))
    plan_toks = plan_tokens(candidate)
    recall = len(plan_toks & utt) / len(plan_toks) if plan_toks else 0.0
    return recall + 0.01 * plan_length(candidate)


@dataclass(frozen=True)
class RankingModel:
    """Weight vector over the fixed feature definition."""

    weights: tuple
    feature_version: str = FEATURE_VERSION

    def __post_init__(self):
        if any(not math.isfinite(w) for w in self.weights):
            raise ValueError("model weights must be finite")

    @staticmethod
    def zeros() -> "RankingModel":
        return RankingModel(weights=(0.0,) * FEATURE_DIM)


def linear_score(model: RankingModel, utterance: str, candidate: Plan) -> float:
    """Dot product of the model weights with the candidate's features."""
    features = featurize(utterance, candidate)
    if len(model.weights) != len(features):
        raise DimensionMismatch(
            f"model has {len(model.weights)} weights, features have {len(features)}"
        )
    return sum(w * f for w, f in zip(model.weights, features))


def save_model(model: RankingModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"feature_version": model.feature_version, "weights": list(model.weights)},
            fh,
            indent=2,
        )
        fh.write("\n")


def load_model(path: str) -> RankingModel:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad model file: {exc}", path) from exc
    weights = payload.get("weights")
    if not isinstance(weights, list) or len(weights) != FEATURE_DIM:
        raise DimensionMismatch(f"{path}: model must carry {FEATURE_DIM} weights")
    return RankingModel(
        weights=tuple(float(w) for w in weights),
        feature_version=str(payload.get("feature_version", FEATURE_VERSION)),
    )


# --- batch scorer interface used by search ---------------------------------

class LexicalScorer:
    """Batch adapter over lexical_score."""

    name = "lexical"

    def score_batch(self, utterance: str, candidates: Sequence[Plan]) -> list:
        return [lexical_score(utterance, c) for c in candidates]


class LinearScorer:
    """Batch adapter over a RankingModel."""

    name = "linear"

    def __init__(self, model: RankingModel):
        self.model = model

    def score_batch(self, utterance: str, candidates: Sequence[Plan]) -> list:
        return [linear_score(self.model, utterance, c) for c in candidates]
