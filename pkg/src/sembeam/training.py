"""Listwise ranking loss with bottom-up teacher forcing, and the training loop.

Per example the gold plan of length T is decomposed into gold subplans by
length. A beam search runs for steps t = 1..T+1 with every gold of length <= t
force-inserted into the beam, so longer golds stay reachable regardless of the
current model. At each step the pool is the enumerated candidates plus the
previous step's golds; the loss is the cross entropy between the gold
indicator and the softmax of model scores over the pool, and the final step
reuses the step-T golds so the target must outscore its own extensions. The
total is normalized by the pool-item count over contributing steps.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .candidates import Constraints, candidate_plans
from .errors import GoldNotReproducible, NonFiniteLoss, SembeamError
from .evaluation import DatasetExample
from .executor import execute
from .kb import KnowledgeBase
from .plans import derive_gold_decomposition, render_plan
from .scoring import FEATURE_DIM, RankingModel, featurize
from .search import top_k


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 8
    l2_penalty: float = 1e-4
    rng_seed: int = 0
    beam_size: int = 5
    constraints: Constraints = Constraints()

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class StepPool:
    """One contributing step: pool feature rows plus the gold positions."""

    features: list
    gold_indices: list


def softmax(scores: Sequence[float]) -> list:
    peak = max(scores)
    exps = [math.exp(s - peak) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def rank_loss(pools: Sequence[StepPool], weights: Sequence[float]) -> tuple:
    """Loss and exact gradient of the listwise objective over prepared pools."""
    dim = len(weights)
    total_items = sum(len(pool.features) for pool in pools)
    loss = 0.0
    grad = [0.0] * dim
    for pool in pools:
        scores = [sum(w * f for w, f in zip(weights, row)) for row in pool.features]
        probs = softmax(scores)
        expected = [0.0] * dim
        for p, row in zip(probs, pool.features):
            for d in range(dim):
                expected[d] += p * row[d]
        for g in pool.gold_indices:
            loss += -math.log(probs[g])
            gold_row = pool.features[g]
            for d in range(dim):
                grad[d] += expected[d] - gold_row[d]
    if total_items:
        loss /= total_items
        grad = [g / total_items for g in grad]
    return loss, grad


def build_step_pools(
    kb: KnowledgeBase,
    example: DatasetExample,
    model: RankingModel,
    config: TrainConfig,
) -> list:
    """Run the teacher-forced search and collect (pool, golds) for each step.

    Raises GoldNotReproducible when some gold subplan never shows up among the
    enumerated candidates at its step (for example a denied relation, or a
    leaf missing from the proposals).
    """
    gold = example.gold()
    execute(kb, gold)  # gold must be valid on this KB
    decomposition = derive_gold_decomposition(gold)
    T = decomposition.length

    feature_cache: dict = {}

    def features_of(plan) -> list:
        key = render_plan(plan)
        if key not in feature_cache:
            feature_cache[key] = featurize(example.utterance, plan)
        return feature_cache[key]

    def score_of(plan) -> float:
        return sum(w * f for w, f in zip(model.weights, features_of(plan)))

    beam = []
    seen: set = set()
    for plan in example.initial_plans():
        key = render_plan(plan)
        if key not in seen:
            seen.add(key)
            beam.append(plan)
    if not beam:
        raise GoldNotReproducible(f"example {example.qid!r} has no proposals")

    pools: list = []
    forced: list = []  # all golds of length <= t, maintained incrementally
    for t in range(1, T + 2):
        candidates = candidate_plans(kb, beam, config.constraints)
        candidate_renders = {render_plan(c): c for c in candidates}

        step_golds = decomposition.at(t) if t <= T else decomposition.at(T)
        if t <= T:
            for g in step_golds:
                if render_plan(g) not in candidate_renders:
                    raise GoldNotReproducible(
                        f"example {example.qid!r}: gold subplan {render_plan(g)!r} "
                        f"is not reachable at step {t}"
                    )

        prev_golds = decomposition.at(t - 1) if t > 1 else frozenset()
        pool_plans = dict(candidate_renders)
        for g in prev_golds:
            pool_plans.setdefault(render_plan(g), g)
        pool_order = sorted(pool_plans)

        if step_golds:
            gold_renders = {render_plan(g) for g in step_golds}
            pools.append(
                StepPool(
                    features=[features_of(pool_plans[r]) for r in pool_order],
                    gold_indices=[i for i, r in enumerate(pool_order) if r in gold_renders],
                )
            )

        if t <= T:
            ranked = top_k(candidates, [score_of(c) for c in candidates], config.beam_size)
            next_beam = [plan for plan, _ in ranked]
            forced.extend(decomposition.at(t))
            beam = []
            beam_seen: set = set()
            for plan in next_beam + forced:
                key = render_plan(plan)
                if key not in beam_seen:
                    beam_seen.add(key)
                    beam.append(plan)
    return pools


def training_step(
    kb: KnowledgeBase,
    example: DatasetExample,
    model: RankingModel,
    config: TrainConfig,
) -> tuple:
    """Loss and analytic gradient of the listwise objective for one example."""
    pools = build_step_pools(kb, example, model, config)
    return rank_loss(pools, model.weights)


@dataclass
class TrainResult:
    model: RankingModel
    epoch_losses: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (qid, reason)


def train(kb: KnowledgeBase, dataset: Sequence[DatasetExample], config: TrainConfig) -> TrainResult:
    """SGD with L2 over shuffled epochs from zero-initialized weights.

    Examples whose golds are not reproducible are skipped (reported in the
    result); a non-finite loss aborts.
    """
    if not dataset:
        raise SembeamError("training dataset is empty")
    weights = [0.0] * FEATURE_DIM
    rng = random.Random(config.rng_seed)
    skipped: dict = {}
    epoch_losses: list = []

    for _epoch in range(config.epochs):
        order = list(range(len(dataset)))
        rng.shuffle(order)
        losses = []
        for idx in order:
            example = dataset[idx]
            if example.qid in skipped:
                continue
            model = RankingModel(weights=tuple(weights))
            try:
                loss, grad = training_step(kb, example, model, config)
            except GoldNotReproducible as exc:
                skipped[example.qid] = str(exc)
                continue
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged on example {example.qid!r}")
            losses.append(loss)
            lr = config.learning_rate
            for d in range(FEATURE_DIM):
                weights[d] -= lr * (grad[d] + config.l2_penalty * weights[d])
        if not losses:
            raise SembeamError("every training example was skipped")
        epoch_losses.append(sum(losses) / len(losses))

    return TrainResult(
        model=RankingModel(weights=tuple(weights)),
        epoch_losses=epoch_losses,
        skipped=sorted(skipped.items()),
    )
