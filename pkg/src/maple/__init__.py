"""Multi-agent table reasoning engine with an evolving long-term memory."""

from maple.agents import (
    FULL_SCORE,
    NOT_READY,
    CheckerCriterion,
    CheckerFeedback,
    EvolutionDecision,
    ReflectionReport,
    SolverStep,
    SolverTrace,
)
from maple.backend import (
    AgentRole,
    ChatRequest,
    EmbeddingVector,
    HashEmbedder,
    OpenAIBackend,
    RecordingBackend,
    ReplayBackend,
    Transcript,
    cosine_distance,
)
from maple.errors import (
    BackendError,
    ConfigError,
    FormatError,
    MapleError,
    ParseError,
    ReplayMiss,
    SchemaError,
    StoreError,
    TransportError,
)
from maple.memory import (
    ErrorType,
    IntegrationOutcome,
    MemoryNote,
    MemoryStore,
    RetrievalConfig,
    RetrievalResult,
)
from maple.orchestrator import (
    AnswerRecord,
    EngineConfig,
    RunMode,
    Task,
    TerminalReason,
    run_dataset,
    run_task,
)
from maple.pool import Budget, EntryKind, TaskContext
from maple.table import (
    NOT_CHANGED,
    Table,
    TableState,
    apply_intermediate,
    parse_markdown,
    serialize_markdown,
)

__version__ = "0.1.0"

__all__ = [
    "AgentRole", "AnswerRecord", "BackendError", "Budget", "ChatRequest",
    "CheckerCriterion", "CheckerFeedback", "ConfigError", "EmbeddingVector",
    "EngineConfig", "EntryKind", "ErrorType", "EvolutionDecision", "FormatError",
    "FULL_SCORE", "HashEmbedder", "IntegrationOutcome", "MapleError", "MemoryNote",
    "MemoryStore", "NOT_CHANGED", "NOT_READY", "OpenAIBackend", "ParseError",
    "RecordingBackend", "ReflectionReport", "ReplayBackend", "ReplayMiss",
    "RetrievalConfig", "RetrievalResult", "RunMode", "SchemaError", "SolverStep",
    "SolverTrace", "StoreError", "Table", "TableState", "Task", "TaskContext",
    "TerminalReason",
    "Transcript", "TransportError", "apply_intermediate", "cosine_distance",
    "parse_markdown", "run_dataset", "run_task", "serialize_markdown",
]
