"""Workflow-graph agent runtime with judge-based and vector-based node
routing, plus an offline evaluation harness."""

from .graph import (
    ActionSpec,
    Edge,
    NavigationMap,
    Node,
    PathAnchor,
    children_of,
    path_anchor,
    validate_map,
)
from .formats import (
    ParseDiagnostic,
    WorkflowDocument,
    load_map,
    map_from_document,
    parse_workflow,
    serialize_workflow,
)
from .providers import (
    ChatChunk,
    ChatMessage,
    HashingEmbedder,
    MockChatProvider,
    PlantedEmbedder,
    ProviderSet,
    RemoteChatProvider,
    RemoteEmbedder,
)
from .router import RouteDecision, VectorStore, build_store, dot, vector_node_search
from .judge import JudgeVerdict, build_judge_prompt, judge_node, parse_verdict
from .engine import (
    ActionSink,
    SessionState,
    TurnResult,
    new_session,
    run_conversation,
    run_turn,
)
from .evalharness import (
    EvalRecord,
    run_eval,
    similarity,
    simulate_dataset,
)
from .stats import MetricsSummary, TTestResult, aggregate, paired_t_one_sided

__version__ = "0.1.0"
