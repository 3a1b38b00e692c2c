"""sembeam: grounded semantic parsing over in-memory knowledge bases.

A symbolic agent enumerates grammatical-and-faithful candidate plans by
exploring the KB while a pluggable scorer guides beam search; includes a
trainable listwise-ranking scorer, a remote scoring protocol with a bundled
mock server, and an EM/F1 evaluation harness.
"""

from .errors import SembeamError
from .kb import KnowledgeBase, Literal, classes_of, follow, load_kb, relations_from
from .plans import (
    Plan,
    derive_gold_decomposition,
    parse_plan,
    plan_length,
    render_plan,
    type_check,
)
from .executor import Count, Denotation, EntitySet, LiteralSet, execute
from .candidates import Constraints, candidate_plans
from .scoring import (
    LexicalScorer,
    LinearScorer,
    RankingModel,
    featurize,
    lexical_score,
    linear_score,
    load_model,
    save_model,
)
from .prompts import build_prompt, select_in_context_examples
from .remote import MockScorerServer, RemoteScorer, ScoreRequest, remote_score
from .search import SearchConfig, SearchTrace, check_termination, search
from .training import TrainConfig, TrainResult, train, training_step
from .evaluation import (
    DatasetExample,
    EvalReport,
    denotation_f1,
    evaluate,
    exact_match,
    load_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Constraints",
    "Count",
    "DatasetExample",
    "Denotation",
    "EntitySet",
    "EvalReport",
    "KnowledgeBase",
    "LexicalScorer",
    "LinearScorer",
    "Literal",
    "LiteralSet",
    "MockScorerServer",
    "Plan",
    "RankingModel",
    "RemoteScorer",
    "ScoreRequest",
    "SearchConfig",
    "SearchTrace",
    "SembeamError",
    "TrainConfig",
    "TrainResult",
    "__version__",
    "build_prompt",
    "candidate_plans",
    "check_termination",
    "classes_of",
    "denotation_f1",
    "derive_gold_decomposition",
    "evaluate",
    "exact_match",
    "execute",
    "featurize",
    "follow",
    "lexical_score",
    "linear_score",
    "load_dataset",
    "load_kb",
    "load_model",
    "parse_plan",
    "plan_length",
    "relations_from",
    "remote_score",
    "render_plan",
    "save_model",
    "search",
    "select_in_context_examples",
    "train",
    "training_step",
    "type_check",
]
