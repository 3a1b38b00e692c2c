import math
import random

import pytest

from sembeam.candidates import Constraints
from sembeam.errors import GoldNotReproducible
from sembeam.evaluation import DatasetExample
from sembeam.plans import parse_plan, render_plan
from sembeam.scoring import FEATURE_DIM, LinearScorer, RankingModel
from sembeam.search import SearchConfig, search
from sembeam.training import (
    StepPool,
    TrainConfig,
    build_step_pools,
    rank_loss,
    softmax,
    train,
    training_step,
)

from synth import studio_kb, template_dataset


def _row(x):
    return [x] + [0.0] * (FEATURE_DIM - 1)


def test_hand_computed_toy_loss():
    # step 1: pool scores (1.0, 0.0), gold first; step 2: (0.0, 1.0), gold second
    pools = [
        StepPool(features=[_row(1.0), _row(0.0)], gold_indices=[0]),
        StepPool(features=[_row(0.0), _row(1.0)], gold_indices=[1]),
    ]
    weights = _row(1.0)
    loss, _ = rank_loss(pools, weights)
    assert loss == pytest.approx(0.15663, abs=1e-5)
    assert loss == pytest.approx((math.log(math.e + 1) - 1) / 2, abs=1e-12)


def test_uniform_scores_give_log_pool_size():
    pools = [StepPool(features=[_row(0.0)] * 4, gold_indices=[2])]
    loss, _ = rank_loss(pools, _row(0.0))
    assert loss == pytest.approx(math.log(4) / 4)


def test_loss_nonnegative_and_softmax_normalized():
    rng = random.Random(8)
    for _ in range(50):
        pools = [
            StepPool(
                features=[[rng.uniform(-2, 2) for _ in range(FEATURE_DIM)] for _ in range(5)],
                gold_indices=[rng.randrange(5)],
            )
        ]
        weights = [rng.uniform(-3, 3) for _ in range(FEATURE_DIM)]
        loss, _ = rank_loss(pools, weights)
        assert loss >= 0.0
        scores = [
            sum(w * f for w, f in zip(weights, row)) for row in pools[0].features
        ]
        assert abs(sum(softmax(scores)) - 1.0) <= 1e-12


def test_gradient_matches_finite_differences():
    kb = studio_kb()
    example = DatasetExample(
        "g1", "which person speaks ruby", ("ruby",), (),
        "(AND person (JOIN speaks ruby))",
    )
    rng = random.Random(123)
    config = TrainConfig()
    h = 1e-5
    for _ in range(20):
        weights = tuple(rng.uniform(-1.5, 1.5) for _ in range(FEATURE_DIM))
        model = RankingModel(weights=weights)
        _, grad = training_step(kb, example, model, config)
        for d in random.Random(9).sample(range(FEATURE_DIM), 4):
            up = list(weights)
            up[d] += h
            down = list(weights)
            down[d] -= h
            loss_up, _ = training_step(kb, example, RankingModel(weights=tuple(up)), config)
            loss_down, _ = training_step(kb, example, RankingModel(weights=tuple(down)), config)
            fd = (loss_up - loss_down) / (2 * h)
            assert abs(fd - grad[d]) / max(1.0, abs(fd), abs(grad[d])) < 1e-4


def test_branching_gold_skips_empty_steps():
    kb = studio_kb()
    gold = "(AND (JOIN speaks ruby) (JOIN speaks lisp))"
    example = DatasetExample("b1", "who speaks ruby and lisp", ("ruby", "lisp"), (), gold)
    pools = build_step_pools(kb, example, RankingModel.zeros(), TrainConfig())
    # steps 1, 3 and the extra final step contribute; step 2 has no golds
    assert len(pools) == 3
    target = parse_plan(gold)
    assert render_plan(target)  # target reachable via pair rule under teacher forcing


def test_gold_not_reproducible_under_denied_relation():
    kb = studio_kb()
    example = DatasetExample(
        "d1", "which person speaks ruby", ("ruby",), (),
        "(AND person (JOIN speaks ruby))",
    )
    config = TrainConfig(constraints=Constraints(denied_relations=frozenset({"speaks"})))
    with pytest.raises(GoldNotReproducible):
        training_step(kb, example, RankingModel.zeros(), config)


def test_gold_not_reproducible_when_leaf_missing():
    kb = studio_kb()
    example = DatasetExample("m1", "who speaks ruby", ("lisp",), (), "(JOIN speaks ruby)")
    with pytest.raises(GoldNotReproducible):
        training_step(kb, example, RankingModel.zeros(), TrainConfig())


def test_zero_learning_rate_keeps_zero_weights():
    kb = studio_kb()
    train_set, _ = template_dataset(n_train=5, n_dev=1)
    result = train(kb, train_set, TrainConfig(learning_rate=0.0, epochs=2))
    assert result.model.weights == (0.0,) * FEATURE_DIM
    assert len(result.epoch_losses) == 2


def test_training_is_seed_deterministic():
    kb = studio_kb()
    train_set, _ = template_dataset(n_train=12, n_dev=1)
    config = TrainConfig(epochs=3, rng_seed=42)
    a = train(kb, train_set, config)
    b = train(kb, train_set, config)
    assert a.model.weights == b.model.weights
    assert a.epoch_losses == b.epoch_losses


def test_single_example_converges_to_rank_one():
    kb = studio_kb()
    example = DatasetExample(
        "c1", "which person speaks ruby", ("ruby",), (),
        "(AND person (JOIN speaks ruby))",
    )
    result = train(kb, [example], TrainConfig(epochs=600, learning_rate=0.5))
    pools = build_step_pools(kb, example, result.model, TrainConfig())
    for pool in pools:
        scores = [
            sum(w * f for w, f in zip(result.model.weights, row)) for row in pool.features
        ]
        best = max(range(len(scores)), key=scores.__getitem__)
        assert best in pool.gold_indices
    # and the trained model actually answers the question
    trace = search(
        kb, example.utterance, example.initial_plans(),
        LinearScorer(result.model), SearchConfig(),
    )
    assert render_plan(trace.best_plan) == render_plan(parse_plan(example.gold_plan))


def test_teacher_forcing_keeps_golds_with_tiny_beam():
    kb = studio_kb()
    example = DatasetExample(
        "k1", "totally unrelated words", ("ruby",), (),
        "(COUNT (AND person (JOIN speaks ruby)))",
    )
    # beam size 1 with zero weights: only teacher forcing keeps golds reachable
    pools = build_step_pools(
        kb, example, RankingModel.zeros(), TrainConfig(beam_size=1)
    )
    assert len(pools) == 4  # steps 1..T+1 with T=3, all with golds
