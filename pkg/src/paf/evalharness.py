"""Evaluation harness: simulate conversations over a workflow, score each
method's generated response against a golden response by embedding dot
product, aggregate the metrics, and run the three one-sided paired t-tests
(H1 naive vs basic, H2 naive vs optimized, H3 basic vs optimized).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import formats
from .engine import SessionState, run_turn
from .graph import NavigationMap, children_of
from .providers import ChatMessage, Embedder, ProviderError, ProviderSet, chat_text
from .router import DEFAULT_THRESHOLD, VectorStore, dot
from .stats import MetricsSummary, TTestResult, aggregate, paired_t_one_sided

METHODS = ("naive", "basic", "optimized")

TURNS_MIN = 6
TURNS_MAX = 10

HYPOTHESES = (
    ("H1", "naive", "basic"),
    ("H2", "naive", "optimized"),
    ("H3", "basic", "optimized"),
)


@dataclass
class EvalRecord:
    record_id: str
    system_prompt: str
    conversation_history: list[ChatMessage]
    golden_response: str
    generated: dict[str, str] = field(default_factory=dict)
    scores: dict[str, float] = field(default_factory=dict)


@dataclass
class SimulationManifest:
    count: int
    skipped: list[tuple[int, str]]
    seed: int


def record_to_json(record: EvalRecord) -> str:
    payload = {
        "record_id": record.record_id,
        "system_prompt": record.system_prompt,
        "conversation_history": [
            {"role": m.role, "content": m.content} for m in record.conversation_history
        ],
        "golden_response": record.golden_response,
        "generated": record.generated,
        "scores": record.scores,
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def record_from_json(line: str) -> EvalRecord:
    data = json.loads(line)
    return EvalRecord(
        record_id=data["record_id"],
        system_prompt=data["system_prompt"],
        conversation_history=[
            ChatMessage(role=m["role"], content=m["content"])
            for m in data["conversation_history"]
        ],
        golden_response=data["golden_response"],
        generated=dict(data.get("generated", {})),
        scores={k: float(v) for k, v in data.get("scores", {}).items()},
    )


def write_dataset(records: Sequence[EvalRecord], path: str | Path) -> None:
    text = "".join(record_to_json(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def read_dataset(path: str | Path) -> list[EvalRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [record_from_json(line) for line in lines if line.strip()]


def record_rng(seed: int, index: int) -> random.Random:
    """Per-record RNG stream; records are order-independent."""
    return random.Random((seed + 1) * 1_000_003 + index)


def draw_turn_length(rng: random.Random, turns_min: int = TURNS_MIN, turns_max: int = TURNS_MAX) -> int:
    return rng.randint(turns_min, turns_max)


def simulate_dataset(
    nav: NavigationMap,
    user_persona: str,
    count: int,
    seed: int,
    providers: ProviderSet,
    turns_min: int = TURNS_MIN,
    turns_max: int = TURNS_MAX,
) -> tuple[list[EvalRecord], SimulationManifest]:
    """Simulate conversations between a user LLM and a response LLM.

    Each record walks the map from the start node, drawing its turn length
    uniformly from [turns_min, turns_max] out of a per-record RNG stream.
    The golden response is the instruction of the node the trace lands on
    for the final turn. Provider failures skip the record and are reported
    in the manifest.
    """
    if turns_min > turns_max:
        raise ValueError("turns_min must be <= turns_max")
    workflow_text = formats.serialize_workflow(formats.document_from_map(nav))
    system_prompt = (
        f"Persona: {user_persona}\n\nWorkflow definition:\n{workflow_text}"
    )
    records: list[EvalRecord] = []
    skipped: list[tuple[int, str]] = []
    for index in range(count):
        rng = record_rng(seed, index)
        length = draw_turn_length(rng, turns_min, turns_max)
        try:
            records.append(
                _simulate_record(nav, user_persona, system_prompt, index, length, rng, providers)
            )
        except ProviderError as exc:
            skipped.append((index, str(exc)))
    return records, SimulationManifest(count=len(records), skipped=skipped, seed=seed)


def _simulate_record(
    nav: NavigationMap,
    persona: str,
    system_prompt: str,
    index: int,
    length: int,
    rng: random.Random,
    providers: ProviderSet,
) -> EvalRecord:
    history: list[ChatMessage] = []
    node_id = nav.start
    final_node = node_id
    for turn in range(length):
        node = nav.nodes[node_id]
        user_system = (
            f"You are simulating a caller. Persona: {persona}. "
            f"The agent's current stage is: {node.instruction or node.kind}."
        )
        user_text = chat_text(
            providers.chat,
            [ChatMessage("system", user_system)]
            + history
            + [ChatMessage("user", f"(caller turn {turn + 1} of conversation {index})")],
        )
        agent_system = (
            f"You are the workflow agent. Follow this instruction: "
            f"{node.instruction or node.kind}"
        )
        agent_text = chat_text(
            providers.chat,
            [ChatMessage("system", agent_system), ChatMessage("user", user_text)],
        )
        history.append(ChatMessage("user", user_text))
        history.append(ChatMessage("assistant", agent_text))
        final_node = node_id
        children = children_of(nav, node_id)
        if not children:
            break
        node_id = rng.choice([c for c, _, _ in children])
    golden = nav.nodes[final_node].instruction or final_node
    return EvalRecord(
        record_id=f"rec-{index:04d}",
        system_prompt=system_prompt,
        conversation_history=history,
        golden_response=golden,
    )


def similarity(generated: str, golden: str, embedder: Embedder) -> float:
    """Dot product of the two embeddings; symmetric in its arguments."""
    if not generated or not golden:
        raise ValueError("similarity requires non-empty texts")
    vec_a, vec_b = embedder.embed([generated, golden])
    return dot(vec_a, vec_b)


def generate_response(
    record: EvalRecord,
    method: str,
    nav: NavigationMap,
    providers: ProviderSet,
    store: Optional[VectorStore],
    threshold: float = DEFAULT_THRESHOLD,
) -> str:
    """Replay the record's history through the engine in the given mode and
    regenerate the final agent turn."""
    history = list(record.conversation_history)
    if history and history[-1].role == "assistant":
        history = history[:-1]
    if not history or history[-1].role != "user":
        raise ValueError(f"record {record.record_id}: history has no final user turn")
    last_user = history[-1].content
    state = SessionState(
        session_id=record.record_id,
        map=nav,
        history=tuple(history[:-1]),
        latest_node=nav.start,
        mode=method,
        threshold=threshold,
        task=nav.name,
    )
    result, _ = run_turn(state, last_user, providers, store=store)
    return result.agent_text


def fill_generated(
    dataset: Sequence[EvalRecord],
    methods: Sequence[str],
    nav: NavigationMap,
    providers: ProviderSet,
    store: Optional[VectorStore],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[tuple[str, str, str]]:
    """Generate any missing per-method responses in place.

    Returns a list of (record_id, method, error) for records that failed.
    """
    failures: list[tuple[str, str, str]] = []
    for record in dataset:
        for method in methods:
            if method in record.generated:
                continue
            try:
                record.generated[method] = generate_response(
                    record, method, nav, providers, store, threshold
                )
            except (ProviderError, ValueError) as exc:
                failures.append((record.record_id, method, str(exc)))
    return failures


@dataclass
class EvalReport:
    summaries: list[MetricsSummary]
    tests: list[TTestResult]
    embedder_norm_stats: dict[str, float]
    seed: int
    config: dict
    failures: list[tuple[str, str, str]] = field(default_factory=list)


def run_eval(
    dataset: Sequence[EvalRecord],
    methods: Sequence[str],
    providers: ProviderSet,
    nav: NavigationMap,
    store: Optional[VectorStore],
    seed: int,
    eval_embedder: Optional[Embedder] = None,
    threshold: float = DEFAULT_THRESHOLD,
    alpha: float = 0.05,
) -> EvalReport:
    """Generate (where missing), score, aggregate, and test.

    Records that failed for a method are excluded pairwise from the t-tests
    and reported on the result. Raises EmptyInput via aggregate when the
    dataset is empty.
    """
    if not dataset:
        from .stats import EmptyInput

        raise EmptyInput("dataset is empty")
    methods = list(methods) or list(METHODS)
    scorer = eval_embedder or providers.embedder
    failures = fill_generated(dataset, methods, nav, providers, store, threshold)
    failed_keys = {(rid, m) for rid, m, _ in failures}

    golden_norms: list[float] = []
    for record in dataset:
        golden_norms.append(float(np.linalg.norm(scorer.embed([record.golden_response])[0])))
        for method in methods:
            if (record.record_id, method) in failed_keys:
                continue
            record.scores[method] = similarity(
                record.generated[method], record.golden_response, scorer
            )

    summaries = [
        aggregate(
            [r.scores[m] for r in dataset if m in r.scores], method=m
        )
        for m in methods
    ]
    tests: list[TTestResult] = []
    for label, method_a, method_b in HYPOTHESES:
        if method_a not in methods or method_b not in methods:
            continue
        paired = [
            (r.scores[method_a], r.scores[method_b])
            for r in dataset
            if method_a in r.scores and method_b in r.scores
        ]
        a = [p[0] for p in paired]
        b = [p[1] for p in paired]
        tests.append(
            paired_t_one_sided(a, b, alpha=alpha, comparison=(method_a, method_b))
        )
    norms = np.asarray(golden_norms)
    return EvalReport(
        summaries=summaries,
        tests=tests,
        embedder_norm_stats={
            "mean": float(norms.mean()),
            "min": float(norms.min()),
            "max": float(norms.max()),
        },
        seed=seed,
        config={
            "methods": methods,
            "threshold": threshold,
            "alpha": alpha,
            "embedder": scorer.tag,
            "n_records": len(dataset),
        },
        failures=failures,
    )
