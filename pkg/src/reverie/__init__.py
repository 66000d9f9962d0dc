"""Fast/slow conversational agent runtime with bounded reconstructive memory."""

from .controller import CognitiveController, ConsolidationError, format_threads
from .gateway import (
    Backend,
    BackendError,
    GenerationRequest,
    GenerationResult,
    LiveBackend,
    PlanEntry,
    RetryingBackend,
    ScriptedBackend,
    SyntheticBackend,
    script_backend,
)
from .evaluation import (
    EvalResult,
    JudgeError,
    ScenarioRecord,
    judge,
    run_scenario,
    summarize,
)
from .latency import (
    HumanTimingModel,
    SimReport,
    aggregate_reports,
    simulate_conversation,
)
from .monologue import InnerMonologue, ReflectionError, continuation_prompt
from .scenarios import (
    ScenarioFormatError,
    ScenarioScript,
    ScenarioTurn,
    load_scenario,
    load_scenario_dir,
    synthetic_scenario,
)
from .scheduler import QueueStats, ReflectionJob, ReflectionScheduler
from .session import AgentConfig, AgentSession, EventLog, SessionBusyError
from .state import (
    ConversationHistory,
    InternalNarrative,
    Message,
    MonologueHistory,
    MonologueThreads,
    estimate_tokens,
    maintain_monologue_history,
    truncate_conversation,
)
from .talker import Talker

__all__ = [
    "AgentConfig",
    "AgentSession",
    "Backend",
    "BackendError",
    "CognitiveController",
    "ConsolidationError",
    "ConversationHistory",
    "EvalResult",
    "EventLog",
    "GenerationRequest",
    "GenerationResult",
    "HumanTimingModel",
    "InnerMonologue",
    "InternalNarrative",
    "JudgeError",
    "LiveBackend",
    "Message",
    "MonologueHistory",
    "MonologueThreads",
    "PlanEntry",
    "QueueStats",
    "ReflectionError",
    "ReflectionJob",
    "ReflectionScheduler",
    "RetryingBackend",
    "ScenarioFormatError",
    "ScenarioRecord",
    "ScenarioScript",
    "ScenarioTurn",
    "ScriptedBackend",
    "SessionBusyError",
    "SimReport",
    "SyntheticBackend",
    "Talker",
    "aggregate_reports",
    "continuation_prompt",
    "estimate_tokens",
    "format_threads",
    "judge",
    "load_scenario",
    "load_scenario_dir",
    "maintain_monologue_history",
    "run_scenario",
    "script_backend",
    "simulate_conversation",
    "summarize",
    "synthetic_scenario",
    "truncate_conversation",
]
