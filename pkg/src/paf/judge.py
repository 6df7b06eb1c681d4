"""LLM-as-judge node identification.

Builds an anchored prompt (path from start to the last identified node plus
that node's first-layer children), asks the chat provider where the agent
currently is, and validates the node it names against the map.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .graph import NavigationMap, path_anchor
from .providers import ChatMessage, ChatProvider, ProviderError, chat_text

JUDGE_QUESTION = "Based on your latest responses, where are you currently in the navigation map?"

_KEYWORD_RE = re.compile(r"\bnode\s+([A-Za-z0-9_-]+)", re.IGNORECASE)


class JudgeUnavailable(Exception):
    """The chat provider failed while answering the judge question."""


@dataclass(frozen=True)
class JudgeVerdict:
    kind: str  # "identified" | "unparseable" | "invalid_node"
    node: Optional[str]
    raw_response: str
    invalid_id: Optional[str] = None

    @property
    def identified(self) -> bool:
        return self.kind == "identified"


def format_history(history: Sequence[ChatMessage]) -> str:
    return "\n".join(f"{m.role}: {m.content}" for m in history)


def build_judge_prompt(
    nav: NavigationMap,
    history: Sequence[ChatMessage],
    last_node: Optional[str],
    task: str,
) -> list[ChatMessage]:
    """Deterministic judge prompt; same inputs yield byte-identical messages."""
    lines = ["You are tracking an agent's position in a conversation navigation map."]
    if history:
        lines += ["", "Conversation so far:", format_history(history)]
    lines.append("")
    if last_node is None:
        lines.append(f"This is the start of the task {task}, proceed to Node {nav.start}.")
    else:
        anchor = path_anchor(nav, last_node)
        path_text = " -> ".join(anchor.path)
        lines.append(
            f"You were previously on Node {last_node} with options to navigate to "
            f"in the map {path_text} each with instructions being:"
        )
        for child_id, instruction, condition in anchor.children:
            lines.append(f"- Node {child_id}: {instruction} (condition: {condition})")
        if not anchor.children:
            lines.append("- (no further nodes; this node ends the workflow)")
    system = ChatMessage(role="system", content="\n".join(lines))
    return [system, ChatMessage(role="user", content=JUDGE_QUESTION)]


def parse_verdict(nav: NavigationMap, raw_response: str) -> JudgeVerdict:
    """Extract the first node mention from the response and validate it.

    A mention is either "Node <id>" (case-insensitive keyword) or a bare id
    that exists in the map; the earliest mention in the text wins.
    """
    keyword = _KEYWORD_RE.search(raw_response)
    bare = _first_bare_id(nav, raw_response)
    mention = _earliest(keyword_match=keyword, bare_match=bare)
    if mention is None:
        return JudgeVerdict(kind="unparseable", node=None, raw_response=raw_response)
    kind, node_id = mention
    if node_id in nav.nodes:
        return JudgeVerdict(kind="identified", node=node_id, raw_response=raw_response)
    return JudgeVerdict(
        kind="invalid_node", node=None, raw_response=raw_response, invalid_id=node_id
    )


def _first_bare_id(nav: NavigationMap, text: str):
    if not nav.nodes:
        return None
    ids = sorted(nav.nodes, key=len, reverse=True)
    pattern = re.compile(
        r"(?<![A-Za-z0-9_-])(" + "|".join(re.escape(i) for i in ids) + r")(?![A-Za-z0-9_-])"
    )
    return pattern.search(text)


def _earliest(keyword_match, bare_match) -> Optional[tuple[str, str]]:
    if keyword_match is None and bare_match is None:
        return None
    if bare_match is None or (
        keyword_match is not None and keyword_match.start() <= bare_match.start()
    ):
        return ("keyword", keyword_match.group(1))
    return ("bare", bare_match.group(1))


def judge_node(
    nav: NavigationMap,
    history: Sequence[ChatMessage],
    last_node: Optional[str],
    task: str,
    chat_provider: ChatProvider,
) -> JudgeVerdict:
    """One prompt build, one chat call, one parse. No retry on bad verdicts:
    the engine decides the fallback, keeping call counts flat."""
    prompt = build_judge_prompt(nav, history, last_node, task)
    try:
        raw = chat_text(chat_provider, prompt)
    except ProviderError as exc:
        raise JudgeUnavailable(str(exc)) from exc
    return parse_verdict(nav, raw)
