"""Beam search over candidate plans with score-drop termination.

Each step extends the beam, scores all candidates in one batch, keeps the
top-K (ties broken by canonical string), and stops when the step's best score
strictly drops below the previous step's best. The answer is the best-scoring
plan over all recorded beams; score ties resolve toward the earliest step and
then the canonically smallest plan. Initial plans are seeds, never answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyInitialPlans, ScorerFailure, SembeamError
from .candidates import Constraints, candidate_plans
from .kb import KnowledgeBase
from .plans import Plan, render_plan

TERMINATED_SCORE_DROP = "score_drop"
TERMINATED_NO_CANDIDATES = "no_candidates"
TERMINATED_MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class SearchConfig:
    beam_size: int = 5
    max_steps: int = 10
    constraints: Constraints = Constraints()

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    step: int
    candidates: tuple  # ((plan, score), ...) in canonical candidate order
    beam: tuple  # top-K (plan, score), best first
    best_score: float


@dataclass
class SearchTrace:
    steps: list = field(default_factory=list)
    best_plan: Plan | None = None
    best_score: float | None = None
    termination_step: int = 0
    termination_reason: str = TERMINATED_MAX_STEPS

    def to_json(self) -> dict:
        return {
            "best_plan": render_plan(self.best_plan) if self.best_plan else None,
            "best_score": self.best_score,
            "termination_step": self.termination_step,
            "termination_reason": self.termination_reason,
            "steps": [
                {
                    "step": record.step,
                    "best_score": record.best_score,
                    "beam": [
                        {"plan": render_plan(p), "score": s} for p, s in record.beam
                    ],
                    "candidates": [
                        {"plan": render_plan(p), "score": s} for p, s in record.candidates
                    ],
                }
                for record in self.steps
            ],
        }


def check_termination(b_prev: float, b_curr: float) -> bool:
    """True iff the current step's best score strictly dropped."""
    if not (math.isfinite(b_prev) and math.isfinite(b_curr)):
        raise ValueError("termination check needs finite scores")
    return b_curr < b_prev


def top_k(candidates: Sequence[Plan], scores: Sequence[float], k: int) -> list:
    """Best k (plan, score) pairs; ties by canonical string ascending."""
    ranked = sorted(
        zip(candidates, scores), key=lambda pair: (-pair[1], render_plan(pair[0]))
    )
    return ranked[:k]


def search(
    kb: KnowledgeBase,
    utterance: str,
    initial_plans: Sequence[Plan],
    scorer,
    config: SearchConfig = SearchConfig(),
) -> SearchTrace:
    """Run the agent/scorer loop from the initial plans; returns the full trace."""
    if not initial_plans:
        raise EmptyInitialPlans("search needs at least one initial plan")
    seen: set = set()
    beam = []
    for plan in initial_plans:
        key = render_plan(plan)
        if key not in seen:
            seen.add(key)
            beam.append(plan)

    trace = SearchTrace()
    prev_best: float | None = None
    for step in range(1, config.max_steps + 1):
        candidates = candidate_plans(kb, beam, config.constraints)
        if not candidates:
            trace.termination_step = step
            trace.termination_reason = TERMINATED_NO_CANDIDATES
            return trace

        try:
            scores = scorer.score_batch(utterance, candidates)
        except SembeamError:
            raise
        except Exception as exc:
            raise ScorerFailure(f"scorer failed at step {step}: {exc}") from exc
        if len(scores) != len(candidates):
            raise ScorerFailure(
                f"scorer returned {len(scores)} scores for {len(candidates)} candidates"
            )

        ranked = top_k(candidates, scores, config.beam_size)
        best_score = ranked[0][1]
        trace.steps.append(
            StepRecord(
                step=step,
                candidates=tuple(zip(candidates, scores)),
                beam=tuple(ranked),
                best_score=best_score,
            )
        )
        # strict improvement keeps the earliest step / smallest render on ties
        if trace.best_score is None or best_score > trace.best_score:
            trace.best_plan, trace.best_score = ranked[0]
        trace.termination_step = step

        if prev_best is not None and check_termination(prev_best, best_score):
            trace.termination_reason = TERMINATED_SCORE_DROP
            return trace
        prev_best = best_score
        beam = [plan for plan, _ in ranked]

    trace.termination_reason = TERMINATED_MAX_STEPS
    return trace
