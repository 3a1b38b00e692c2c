"""In-context example retrieval (BM25 over utterances) and prompt construction."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from .errors import EmptyPool
from .scoring import tokenize_utterance

INSTRUCTION = "Please translate the following questions to lisp like programs."

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_K = 10


def bm25_scores(pool_utterances: Sequence[str], query: str) -> list:
    """Okapi BM25 (k1=1.2, b=0.75) of the query against each pool utterance.

    idf uses the smoothed form ln(1 + (N - df + 0.5) / (df + 0.5)); documents
    are the whitespace/punctuation-tokenized utterances.
    """
    docs = [tokenize_utterance(u) for u in pool_utterances]
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs) / n_docs if n_docs else 0.0
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))

    query_terms = tokenize_utterance(query)
    scores = []
    for doc in docs:
        tf = Counter(doc)
        score = 0.0
        for term in query_terms:
            if term not in tf:
                continue
            idf = math.log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
            freq = tf[term]
            denom = freq + BM25_K1 * (1.0 - BM25_B + BM25_B * len(doc) / avgdl)
            score += idf * freq * (BM25_K1 + 1.0) / denom
        scores.append(score)
    return scores


def select_in_context_examples(pool: Sequence, query: str, k: int = DEFAULT_K) -> list:
    """Top-k (utterance, plan) pairs by BM25 utterance similarity; ties keep pool order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pool:
        raise EmptyPool("in-context example pool is empty")
    scores = bm25_scores([u for u, _ in pool], query)
    ranked = sorted(range(len(pool)), key=lambda i: (-scores[i], i))
    return [pool[i] for i in ranked[:k]]


def build_prompt(examples: Sequence, query: str) -> str:
    """Instruction line, one Question/Program block per example, then the query block."""
    parts = [INSTRUCTION + "\n"]
    for utterance, plan in examples:
        parts.append(f"Question: {utterance}\nProgram: {plan}\n")
    parts.append(f"Question: {query}\nProgram:")
    return "".join(parts)
