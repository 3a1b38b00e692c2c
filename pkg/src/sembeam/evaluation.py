"""Dataset I/O, EM/F1 metrics, and batch evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ParseError, SembeamError, UnknownQid
from .executor import Count, Denotation, execute
from .kb import KnowledgeBase, Literal
from .plans import (
    COMPARATIVES,
    Lit,
    Name,
    Plan,
    parse_plan,
    plan_length,
    render_plan,
    subexpressions,
)


@dataclass(frozen=True)
class DatasetExample:
    """One question: utterance, entity/literal proposals, optional gold plan string."""

    qid: str
    utterance: str
    entity_proposals: tuple
    literal_proposals: tuple
    gold_plan: str | None = None

    def initial_plans(self) -> list:
        """The P_0 leaves seeding search for this example."""
        plans: list = [Name(e) for e in self.entity_proposals]
        plans.extend(Lit(lit) for lit in self.literal_proposals)
        return plans

    def gold(self) -> Plan:
        if self.gold_plan is None:
            raise SembeamError(f"example {self.qid!r} has no gold plan")
        return parse_plan(self.gold_plan)


def load_dataset(path: str) -> list:
    """Parse a JSONL dataset; validates qid uniqueness and gold plan syntax."""
    examples: list = []
    seen: set = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", path, lineno) from exc
            try:
                example = _example_from_json(obj)
            except (KeyError, TypeError, ValueError, SembeamError) as exc:
                raise ParseError(f"bad example: {exc}", path, lineno) from exc
            if example.qid in seen:
                raise ParseError(f"duplicate qid {example.qid!r}", path, lineno)
            seen.add(example.qid)
            examples.append(example)
    return examples


def _example_from_json(obj: dict) -> DatasetExample:
    qid = obj["qid"]
    utterance = obj["utterance"]
    if not isinstance(qid, str) or not isinstance(utterance, str):
        raise ValueError("qid and utterance must be strings")
    entities = tuple(obj.get("entities", ()))
    literals = tuple(
        Literal.parse(item["kind"], item["lexical"]) for item in obj.get("literals", ())
    )
    gold = obj.get("gold_plan")
    if gold is not None:
        parse_plan(gold)  # syntax is validated at load time
    return DatasetExample(qid, utterance, entities, literals, gold)


def dump_dataset(examples: Sequence[DatasetExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            obj: dict = {
                "qid": ex.qid,
                "utterance": ex.utterance,
                "entities": list(ex.entity_proposals),
                "literals": [
                    {"kind": lit.kind, "lexical": lit.lexical} for lit in ex.literal_proposals
                ],
            }
            if ex.gold_plan is not None:
                obj["gold_plan"] = ex.gold_plan
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


# --- metrics ----------------------------------------------------------------

def exact_match(pred: Plan, gold: Plan) -> bool:
    """Canonical-structure equality (AND argument order never matters)."""
    return render_plan(pred) == render_plan(gold)


def denotation_f1(pred: Denotation, gold: Denotation) -> float:
    """Set F1 over denotations; counts match exactly or not at all."""
    if isinstance(pred, Count) or isinstance(gold, Count):
        if isinstance(pred, Count) and isinstance(gold, Count):
            return 1.0 if pred.value == gold.value else 0.0
        return 0.0
    p_set, g_set = pred.members, gold.members
    if not p_set and not g_set:
        return 1.0
    if not p_set or not g_set:
        return 0.0
    hit = len(p_set & g_set)
    precision = hit / len(p_set)
    recall = hit / len(g_set)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def relation_uses(plan: Plan) -> int:
    """Number of relation-consuming applications (JOIN + comparatives);
    mirrors complexity bucketing by relation count."""
    return sum(1 for sub in subexpressions(plan) if sub.func == "JOIN" or sub.func in COMPARATIVES)


# --- batch evaluation --------------------------------------------------------

@dataclass(frozen=True)
class ExampleResult:
    qid: str
    predicted: str | None
    em: bool
    f1: float
    gold_length: int
    gold_relations: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple

    @property
    def mean_em(self) -> float:
        return sum(r.em for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def mean_f1(self) -> float:
        return sum(r.f1 for r in self.rows) / len(self.rows) if self.rows else 0.0

    def _grouped(self, key) -> dict:
        groups: dict = {}
        for row in self.rows:
            groups.setdefault(key(row), []).append(row)
        return {
            k: {
                "count": len(rows),
                "em": sum(r.em for r in rows) / len(rows),
                "f1": sum(r.f1 for r in rows) / len(rows),
            }
            for k, rows in sorted(groups.items())
        }

    def by_plan_length(self) -> dict:
        return self._grouped(lambda r: r.gold_length)

    def by_relation_count(self) -> dict:
        return self._grouped(lambda r: r.gold_relations)

    def to_json(self) -> dict:
        return {
            "per_example": [
                {
                    "qid": r.qid,
                    "plan": r.predicted,
                    "em": r.em,
                    "f1": r.f1,
                    "gold_length": r.gold_length,
                    "gold_relations": r.gold_relations,
                }
                for r in self.rows
            ],
            "aggregates": {
                "count": len(self.rows),
                "em": self.mean_em,
                "f1": self.mean_f1,
                "by_plan_length": {str(k): v for k, v in self.by_plan_length().items()},
                "by_relation_count": {str(k): v for k, v in self.by_relation_count().items()},
            },
        }

    def to_text(self) -> str:
        lines = [
            f"examples: {len(self.rows)}",
            f"EM: {self.mean_em:.4f}",
            f"F1: {self.mean_f1:.4f}",
            "",
            "by relation count (gold JOIN + comparative applications):",
            f"{'relations':>10} {'count':>6} {'EM':>8} {'F1':>8}",
        ]
        for k, stats in self.by_relation_count().items():
            lines.append(f"{k:>10} {stats['count']:>6} {stats['em']:>8.4f} {stats['f1']:>8.4f}")
        lines.append("")
        lines.append("by gold plan length:")
        lines.append(f"{'length':>10} {'count':>6} {'EM':>8} {'F1':>8}")
        for k, stats in self.by_plan_length().items():
            lines.append(f"{k:>10} {stats['count']:>6} {stats['em']:>8.4f} {stats['f1']:>8.4f}")
        return "\n".join(lines) + "\n"


def evaluate(
    kb: KnowledgeBase,
    dataset: Sequence[DatasetExample],
    predictions: Mapping,
    jobs: int = 1,
) -> EvalReport:
    """Score predictions (qid -> plan string or None) against gold plans.

    Missing predictions count as wrong; predictions that fail to parse or
    execute get F1 0 (EM still compares canonical text when parseable).
    Every example must carry a gold plan. ``jobs`` > 1 scores examples on a
    thread pool; rows always come back in dataset order.
    """
    known = {ex.qid for ex in dataset}
    for qid in predictions:
        if qid not in known:
            raise UnknownQid(f"prediction for unknown qid {qid!r}")

    def row_for(ex: DatasetExample) -> ExampleResult:
        gold = ex.gold()
        gold_denotation = execute(kb, gold)
        predicted = predictions.get(ex.qid)
        em = False
        f1 = 0.0
        text = None
        if predicted is not None:
            try:
                pred_plan = parse_plan(predicted)
                text = render_plan(pred_plan)
                em = exact_match(pred_plan, gold)
            except SembeamError:
                pred_plan = None
                text = predicted
            if pred_plan is not None:
                try:
                    f1 = denotation_f1(execute(kb, pred_plan), gold_denotation)
                except SembeamError:
                    f1 = 0.0
        return ExampleResult(
            qid=ex.qid,
            predicted=text,
            em=em,
            f1=f1,
            gold_length=plan_length(gold),
            gold_relations=relation_uses(gold),
        )

    if jobs > 1:
        import concurrent.futures

        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row_for, dataset))
    else:
        rows = [row_for(ex) for ex in dataset]
    return EvalReport(tuple(rows))
