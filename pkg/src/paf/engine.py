"""Per-turn traversal engine.

Three modes:
  naive     — the whole workflow serialized into one prompt, no node tracking
  basic     — judge-only node identification while the agent streams
  optimized — vector node search first, judge only on fallback

Identification runs in-stream at each sentence boundary of the accumulated
agent text and once at stream end, so downstream consumers (e.g. TTS) could
act on node changes before the reply finishes.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Callable, IO, Optional, Sequence

from .graph import ActionSpec, NavigationMap, children_of, path_anchor
from .judge import JudgeUnavailable, judge_node
from .providers import (
    ChatMessage,
    ProviderError,
    ProviderSet,
)
from .router import DEFAULT_THRESHOLD, VectorStore, vector_node_search
from . import formats

MODES = ("naive", "basic", "optimized")

_SENTENCE_END_RE = re.compile(r"[.!?](?=\s)")

AGENT_QUESTION_TEMPLATE = (
    "Based on the navigation map and your current node, "
    "respond to the user question: {user_question}."
)


class EngineError(Exception):
    pass


class ConversationAborted(EngineError):
    """A turn failed; remaining turns were not run."""

    def __init__(self, turn_index: int, cause: Exception):
        self.turn_index = turn_index
        self.cause = cause
        super().__init__(f"turn {turn_index} aborted: {cause}")


@dataclass(frozen=True)
class SessionState:
    session_id: str
    map: NavigationMap
    history: tuple[ChatMessage, ...] = ()
    latest_node: Optional[str] = None
    mode: str = "basic"
    threshold: float = DEFAULT_THRESHOLD
    turn_counter: int = 0
    task: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"bad mode {self.mode!r}")
        if self.latest_node is not None and self.latest_node not in self.map.nodes:
            raise ValueError(f"latest_node {self.latest_node!r} not in map")
        for i, msg in enumerate(self.history):
            expected = "user" if i % 2 == 0 else "assistant"
            if msg.role != expected:
                raise ValueError("history must alternate user/assistant")


def new_session(
    nav: NavigationMap,
    mode: str = "basic",
    session_id: str = "s0",
    threshold: float = DEFAULT_THRESHOLD,
    task: str = "",
) -> SessionState:
    # A fresh session starts anchored at the map's start node.
    return SessionState(
        session_id=session_id,
        map=nav,
        latest_node=nav.start,
        mode=mode,
        threshold=threshold,
        task=task or nav.name,
    )


@dataclass(frozen=True)
class Hop:
    node: str
    source: str  # "vector" | "judge" | "retained_previous"
    jumped: bool = False  # judge moved to a node outside {current} ∪ children


@dataclass(frozen=True)
class CallCounts:
    chat: int = 0
    embed: int = 0
    judge: int = 0


@dataclass(frozen=True)
class TurnResult:
    agent_text: str
    identified_node: str
    identification_source: str
    actions_fired: tuple[ActionSpec, ...]
    provider_calls: CallCounts
    hops: tuple[Hop, ...] = ()

    @property
    def judge_jumps(self) -> int:
        return sum(1 for hop in self.hops if hop.jumped)


class ActionSink:
    """Dispatches node actions to registered handlers, preserving order.

    Unregistered action names land in ``unhandled``; everything dispatched is
    appended to ``fired`` as (node_id, action).
    """

    def __init__(self):
        self._handlers: dict[str, Callable[[str, ActionSpec], None]] = {}
        self.fired: list[tuple[str, ActionSpec]] = []
        self.unhandled: list[tuple[str, ActionSpec]] = []

    def register(self, name: str, handler: Callable[[str, ActionSpec], None]) -> None:
        self._handlers[name] = handler

    def dispatch(self, node_id: str, action: ActionSpec) -> None:
        self.fired.append((node_id, action))
        handler = self._handlers.get(action.name)
        if handler is None:
            self.unhandled.append((node_id, action))
        else:
            handler(node_id, action)


def build_agent_prompt(state: SessionState, user_text: str) -> list[ChatMessage]:
    """System prompt for the agent's generation call.

    basic/optimized: history + current-node declaration + path anchor
    (path from start, children instructions and edge conditions).
    naive: the entire workflow serialized flat plus the history.
    """
    history_text = "\n".join(f"{m.role}: {m.content}" for m in state.history)
    if state.mode == "naive":
        doc = formats.document_from_map(state.map)
        parts = [
            "You are a conversational agent. Follow this workflow definition:",
            formats.serialize_workflow(doc).rstrip("\n"),
        ]
        if history_text:
            parts += ["", "Conversation so far:", history_text]
        system = "\n".join(parts)
    else:
        current = state.latest_node or state.map.start
        anchor = path_anchor(state.map, current)
        node = state.map.nodes[current]
        parts = ["You are a conversational agent following a navigation map."]
        if history_text:
            parts += ["", "Conversation so far:", history_text]
        parts += [
            "",
            f"You are currently on Node {current}.",
            f"Instruction: {node.instruction}" if node.instruction else "Instruction: (none)",
            f"Path from start: {' -> '.join(anchor.path)}",
        ]
        if anchor.children:
            parts.append("You may proceed to:")
            for child_id, instruction, condition in anchor.children:
                parts.append(f"- Node {child_id}: {instruction} (condition: {condition})")
        else:
            parts.append("There are no further nodes from here.")
        system = "\n".join(parts)
    return [
        ChatMessage(role="system", content=system),
        ChatMessage(
            role="user",
            content=AGENT_QUESTION_TEMPLATE.format(user_question=user_text),
        ),
    ]


def _identification_points(chunks) -> tuple[str, list[str]]:
    """Consume the stream; return the full text and the accumulated-text
    prefixes at which identification should run (each sentence boundary,
    plus stream end)."""
    text = ""
    points: list[str] = []
    scanned = 0
    for chunk in chunks:
        text += chunk.delta
        for match in _SENTENCE_END_RE.finditer(text, scanned):
            points.append(text[: match.end()])
        scanned = len(text)
    if not points or points[-1] != text:
        stripped = text.strip()
        if stripped or not points:
            points.append(text)
    return text, points


def run_turn(
    state: SessionState,
    user_text: str,
    providers: ProviderSet,
    store: Optional[VectorStore] = None,
    sink: Optional[ActionSink] = None,
    map_rewrite: Optional[Callable[[NavigationMap, str], Optional[NavigationMap]]] = None,
) -> tuple[TurnResult, SessionState]:
    """Run one conversation turn; returns the result and the updated state.

    The turn is transactional: provider failures during the agent stream
    raise without any state change. Judge failures and bad verdicts retain
    the previous node instead of failing the turn.
    """
    if state.mode == "optimized" and store is None:
        raise EngineError("optimized mode requires a vector store")
    sink = sink if sink is not None else ActionSink()
    nav = state.map
    current = state.latest_node or nav.start
    user_msg = ChatMessage(role="user", content=user_text)

    prompt = build_agent_prompt(state, user_text)
    # Any ProviderError here propagates: the turn aborts with state untouched.
    agent_text, points = _identification_points(providers.chat.chat_stream(prompt))

    chat_calls, embed_calls, judge_calls = 1, 0, 0
    hops: list[Hop] = []
    actions_fired: list[ActionSpec] = []
    nodes_acted: set[str] = set()

    for point_text in points:
        if state.mode == "naive":
            break
        identified: Optional[str] = None
        source = "retained_previous"
        jumped = False
        if state.mode == "optimized":
            decision = vector_node_search(
                nav, store, current, point_text, state.threshold, providers.embedder
            )
            if decision.error is None:
                embed_calls += 1
            if decision.is_selected:
                identified = decision.selected
                source = "vector"
        if identified is None and state.mode in ("basic", "optimized"):
            judge_history = list(state.history) + [user_msg]
            if point_text.strip():
                judge_history.append(ChatMessage(role="assistant", content=point_text))
            judge_calls += 1
            try:
                verdict = judge_node(nav, judge_history, current, state.task, providers.judge())
            except JudgeUnavailable:
                verdict = None
            if verdict is not None and verdict.identified:
                identified = verdict.node
                source = "judge"
                neighborhood = {current} | {c for c, _, _ in children_of(nav, current)}
                jumped = identified not in neighborhood
        if identified is None:
            hops.append(Hop(node=current, source="retained_previous"))
            continue
        hops.append(Hop(node=identified, source=source, jumped=jumped))
        if identified != current and identified not in nodes_acted:
            nodes_acted.add(identified)
            for action in nav.nodes[identified].actions:
                sink.dispatch(identified, action)
                actions_fired.append(action)
        current = identified
        if map_rewrite is not None:
            new_map = map_rewrite(nav, identified)
            if new_map is not None:
                nav = new_map

    last_identifying = next(
        (hop for hop in reversed(hops) if hop.source != "retained_previous"), None
    )
    if last_identifying is not None:
        identification_source = last_identifying.source
    else:
        identification_source = "retained_previous"

    assistant_msg = ChatMessage(
        role="assistant", content=agent_text if agent_text else "(silence)"
    )
    new_state = replace(
        state,
        map=nav,
        history=state.history + (user_msg, assistant_msg),
        latest_node=current,
        turn_counter=state.turn_counter + 1,
    )
    result = TurnResult(
        agent_text=agent_text,
        identified_node=current,
        identification_source=identification_source,
        actions_fired=tuple(actions_fired),
        provider_calls=CallCounts(chat=chat_calls, embed=embed_calls, judge=judge_calls),
        hops=tuple(hops),
    )
    return result, new_state


class TranscriptWriter:
    """JSON-lines transcript sink, one record per turn."""

    def __init__(self, stream: IO[str]):
        self._stream = stream

    def write_turn(self, state: SessionState, user_text: str, result: TurnResult) -> None:
        record = {
            "session_id": state.session_id,
            "turn": state.turn_counter,
            "user": user_text,
            "agent": result.agent_text,
            "node": result.identified_node,
            "source": result.identification_source,
            "actions": [a.name for a in result.actions_fired],
            "calls": {
                "chat": result.provider_calls.chat,
                "embed": result.provider_calls.embed,
                "judge": result.provider_calls.judge,
            },
        }
        self._stream.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def run_conversation(
    state: SessionState,
    user_turns: Sequence[str],
    providers: ProviderSet,
    store: Optional[VectorStore] = None,
    sink: Optional[ActionSink] = None,
    transcript: Optional[TranscriptWriter] = None,
    map_rewrite=None,
) -> tuple[list[TurnResult], SessionState]:
    """Fold run_turn over the user turns.

    Stops early once an end node is identified; a transfer node fires its
    actions (inside run_turn) and then stops as well.
    """
    results: list[TurnResult] = []
    for index, user_text in enumerate(user_turns):
        try:
            result, state = run_turn(
                state, user_text, providers, store=store, sink=sink, map_rewrite=map_rewrite
            )
        except (ProviderError, EngineError) as exc:
            raise ConversationAborted(index, exc) from exc
        results.append(result)
        if transcript is not None:
            transcript.write_turn(state, user_text, result)
        kind = state.map.nodes[result.identified_node].kind
        if kind in ("end", "transfer"):
            break
    return results, state


def check_trajectory(
    nav: NavigationMap, results: Sequence[TurnResult], start: Optional[str] = None
) -> tuple[list[tuple[str, str]], int]:
    """Audit a conversation's node transitions.

    Returns (illegal transitions, judge-jump count). A transition is legal
    when it is a self-transition, follows a map edge, or was flagged as a
    judge jump.
    """
    current = start or nav.start
    illegal: list[tuple[str, str]] = []
    jumps = 0
    for result in results:
        for hop in result.hops:
            if hop.source == "retained_previous":
                continue
            if hop.jumped:
                jumps += 1
            elif hop.node != current and not any(
                e.from_id == current and e.to_id == hop.node for e in nav.edges
            ):
                illegal.append((current, hop.node))
            current = hop.node
    return illegal, jumps
