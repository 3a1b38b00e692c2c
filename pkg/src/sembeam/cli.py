"""Command-line entry point: exec, enumerate, search, train, eval, prompt, mock-scorer.

Every command writes a run manifest (config snapshot, input digests, seed,
version, timings). Primary outputs are deterministic for deterministic
scorers: re-running with identical inputs reproduces them byte for byte.

Exit codes: 0 success, 1 user/input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .errors import EmptyPool, SembeamError
from .candidates import Constraints
from .evaluation import evaluate, load_dataset
from .executor import Count, EntitySet, execute
from .kb import Literal, load_kb
from .plans import FUNCTIONS, parse_plan, render_plan
from .prompts import DEFAULT_K, build_prompt, select_in_context_examples
from .remote import DEFAULT_TIMEOUT, RemoteScorer, run_mock_scorer
from .scoring import LexicalScorer, LinearScorer, load_model, save_model
from .search import SearchConfig, search
from .training import TrainConfig, train

ENV_SCORER_URL = "SEMBEAM_SCORER_URL"
ENV_SCORER_TIMEOUT = "SEMBEAM_SCORER_TIMEOUT"

DEFAULT_MANIFEST = "sembeam.manifest.json"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (exit 2 is reserved for bugs)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    input_digests: dict = field(default_factory=dict)
    rng_seed: int | None = None
    version: str = __version__
    started_unix: float = 0.0
    elapsed_seconds: float = 0.0

    def add_input(self, path: str) -> None:
        digest = hashlib.sha256()
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                digest.update(chunk)
        self.input_digests[path] = digest.hexdigest()

    def write(self, path: str) -> None:
        payload = {
            "command": self.command,
            "config": self.config,
            "input_digests": self.input_digests,
            "rng_seed": self.rng_seed,
            "version": self.version,
            "started_unix": self.started_unix,
            "elapsed_seconds": self.elapsed_seconds,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _manifest_path(args) -> str:
    if getattr(args, "manifest", None):
        return args.manifest
    out = getattr(args, "out", None)
    if out:
        return out + ".manifest.json"
    return DEFAULT_MANIFEST


def _start_manifest(args, inputs) -> RunManifest:
    config = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    }
    manifest = RunManifest(
        command=args.command,
        config=config,
        rng_seed=getattr(args, "seed", None),
        started_unix=time.time(),
    )
    for path in inputs:
        manifest.add_input(path)
    return manifest


def _finish_manifest(manifest: RunManifest, args) -> None:
    manifest.elapsed_seconds = time.time() - manifest.started_unix
    manifest.write(_manifest_path(args))


def _add_kb_args(parser) -> None:
    parser.add_argument("--triples", required=True, help="triples file (TSV)")
    parser.add_argument("--schema", required=True, help="schema file")


def _add_constraint_args(parser) -> None:
    parser.add_argument("--deny-relation", action="append", default=[], metavar="REL")
    parser.add_argument(
        "--deny-function", action="append", default=[], metavar="FUNC", choices=FUNCTIONS
    )
    parser.add_argument("--max-candidates", type=int, default=None)
    parser.add_argument("--allow-count-of-leaf", action="store_true")


def _constraints(args) -> Constraints:
    return Constraints(
        denied_relations=frozenset(args.deny_relation),
        denied_functions=frozenset(args.deny_function),
        max_candidates=args.max_candidates,
        allow_count_of_leaf=args.allow_count_of_leaf,
    )


def _denotation_json(denotation):
    if isinstance(denotation, Count):
        return denotation.value
    if isinstance(denotation, EntitySet):
        return sorted(denotation.members)
    return [
        {"kind": lit.kind, "lexical": lit.lexical}
        for lit in sorted(denotation.members, key=Literal.sort_key)
    ]


def _make_scorer(spec: str, timeout: float):
    if spec == "lexical":
        return LexicalScorer()
    kind, _, detail = spec.partition(":")
    if kind == "linear" and detail:
        return LinearScorer(load_model(detail))
    if kind == "remote" and detail:
        return RemoteScorer(detail, timeout=timeout)
    raise SembeamError(
        f"bad scorer spec {spec!r}; use lexical, linear:<model path>, or remote:<URL>"
    )


# --- commands ----------------------------------------------------------------

def cmd_exec(args) -> int:
    manifest = _start_manifest(args, [args.triples, args.schema])
    kb = load_kb(args.triples, args.schema)
    plan = parse_plan(args.plan)
    denotation = execute(kb, plan)
    print(json.dumps(_denotation_json(denotation)))
    _finish_manifest(manifest, args)
    return 0


def cmd_enumerate(args) -> int:
    manifest = _start_manifest(args, [args.triples, args.schema])
    kb = load_kb(args.triples, args.schema)
    beam = [parse_plan(text) for text in args.plan]
    from .candidates import candidate_plans

    for candidate in candidate_plans(kb, beam, _constraints(args)):
        print(render_plan(candidate))
    _finish_manifest(manifest, args)
    return 0


def _search_one(kb, example, scorer, config):
    trace = search(kb, example.utterance, example.initial_plans(), scorer, config)
    return trace


def prediction_row(qid, trace, error=None) -> dict:
    """The stable JSONL row shape for one searched question."""
    if trace is None or trace.best_plan is None:
        row = {"qid": qid, "plan": None, "score": None, "steps": 0}
        if error:
            row["error"] = error
        if trace is not None:
            row["steps"] = trace.termination_step
        return row
    return {
        "qid": qid,
        "plan": render_plan(trace.best_plan),
        "score": trace.best_score,
        "steps": trace.termination_step,
    }


def write_predictions(path, results) -> int:
    """Write (qid, trace, error) triples as JSONL; returns the failure count."""
    failures = 0
    with open(path, "w", encoding="utf-8") as fh:
        for qid, trace, error in results:
            row = prediction_row(qid, trace, error)
            if row["plan"] is None:
                failures += 1
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return failures


def cmd_search(args) -> int:
    manifest = _start_manifest(args, [args.triples, args.schema, args.dataset])
    kb = load_kb(args.triples, args.schema)
    dataset = load_dataset(args.dataset)
    scorer_spec = args.scorer
    scorer_url = os.environ.get(ENV_SCORER_URL)
    if scorer_url and scorer_spec.startswith("remote"):
        scorer_spec = f"remote:{scorer_url}"
    timeout = float(os.environ.get(ENV_SCORER_TIMEOUT, DEFAULT_TIMEOUT))
    scorer = _make_scorer(scorer_spec, timeout)
    config = SearchConfig(
        beam_size=args.beam, max_steps=args.max_steps, constraints=_constraints(args)
    )

    if args.trace:
        os.makedirs(args.trace, exist_ok=True)

    def run(example):
        try:
            return example.qid, _search_one(kb, example, scorer, config), None
        except SembeamError as exc:
            return example.qid, None, str(exc)

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, dataset))
    else:
        results = [run(ex) for ex in dataset]

    failures = write_predictions(args.out, results)
    if args.trace:
        for qid, trace, _ in results:
            if trace is not None:
                with open(os.path.join(args.trace, f"{qid}.json"), "w", encoding="utf-8") as tf:
                    json.dump(trace.to_json(), tf, indent=2, sort_keys=True)
    print(f"searched {len(results)} questions ({failures} without a plan) -> {args.out}")
    _finish_manifest(manifest, args)
    return 0


def cmd_train(args) -> int:
    manifest = _start_manifest(args, [args.triples, args.schema, args.dataset])
    kb = load_kb(args.triples, args.schema)
    dataset = load_dataset(args.dataset)
    missing = [ex.qid for ex in dataset if ex.gold_plan is None]
    if missing:
        raise SembeamError(f"training examples without gold plans: {missing[:5]}")
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        l2_penalty=args.l2,
        rng_seed=args.seed,
        beam_size=args.beam,
        constraints=_constraints(args),
    )
    result = train(kb, dataset, config)

    if result.skipped:
        skipped_path = args.out + ".skipped.json"
        with open(skipped_path, "w", encoding="utf-8") as fh:
            json.dump(
                [{"qid": qid, "reason": reason} for qid, reason in result.skipped],
                fh,
                indent=2,
            )
            fh.write("\n")
        print(f"skipped {len(result.skipped)} examples -> {skipped_path}", file=sys.stderr)
        if len(result.skipped) > len(dataset) / 2:
            raise SembeamError(
                f"{len(result.skipped)}/{len(dataset)} examples skipped; aborting"
            )

    save_model(result.model, args.out)
    loss_path = args.out + ".loss.csv"
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(result.epoch_losses, start=1):
            fh.write(f"{epoch},{loss!r}\n")
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch}: mean loss {loss:.6f}")
    print(f"model -> {args.out}")
    _finish_manifest(manifest, args)
    return 0


def cmd_eval(args) -> int:
    manifest = _start_manifest(args, [args.triples, args.schema, args.dataset, args.predictions])
    kb = load_kb(args.triples, args.schema)
    dataset = load_dataset(args.dataset)
    predictions: dict = {}
    with open(args.predictions, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            predictions[row["qid"]] = row.get("plan")
    report = evaluate(kb, dataset, predictions, jobs=args.jobs)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = report.to_text()
    with open(args.out + ".txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    _finish_manifest(manifest, args)
    return 0


def cmd_prompt(args) -> int:
    manifest = _start_manifest(args, [args.pool])
    if args.k < 1:
        raise SembeamError("k must be >= 1")
    pool_examples = load_dataset(args.pool)
    pool = [(ex.utterance, ex.gold_plan) for ex in pool_examples if ex.gold_plan]
    if not pool:
        raise EmptyPool(f"pool {args.pool!r} has no examples with gold plans")
    selected = select_in_context_examples(pool, args.query, args.k)
    print(build_prompt(selected, args.query))
    _finish_manifest(manifest, args)
    return 0


def cmd_mock_scorer(args) -> int:
    manifest = _start_manifest(args, [])
    _finish_manifest(manifest, args)  # written at startup; the server runs until killed
    run_mock_scorer(args.host, args.port, flaky=args.flaky)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sembeam", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sembeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exec", parents=[], help="execute one plan and print its denotation")
    _add_kb_args(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("enumerate", help="print candidate extensions of beam plans")
    _add_kb_args(p)
    p.add_argument("--plan", action="append", required=True, help="beam plan (repeatable)")
    _add_constraint_args(p)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("search", help="answer a dataset with beam search")
    _add_kb_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--scorer", default="lexical",
                   help="lexical | linear:<model path> | remote:<URL>")
    p.add_argument("--out", required=True, help="predictions JSONL")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=10)
    _add_constraint_args(p)
    p.add_argument("--trace", help="directory for per-question search traces")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="fit the linear ranking scorer")
    _add_kb_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--l2", type=float, default=TrainConfig.l2_penalty)
    p.add_argument("--beam", type=int, default=TrainConfig.beam_size)
    p.add_argument("--seed", type=int, default=0)
    _add_constraint_args(p)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score predictions against gold plans")
    _add_kb_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True, help="report JSON path (text copy at .txt)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prompt", help="build an in-context prompt for a query")
    p.add_argument("--pool", required=True, help="JSONL pool with gold plans")
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=DEFAULT_K)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("mock-scorer", help="serve lexical_score over the wire protocol")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--flaky", action="store_true",
                   help="fail every other request with a 500 (retry testing)")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_mock_scorer)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help/--version and usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SembeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
