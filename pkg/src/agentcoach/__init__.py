"""Hint-internalization coaching loop for tool-using agents."""

from .model import (
    MistakeFinding,
    ModelTag,
    Outcome,
    RoundManifest,
    StateRef,
    Step,
    Task,
    Trajectory,
    ValidationError,
    normalize_answer,
    score_trajectory,
)
from .store import RunStore
from .gateway import (
    ChatMessage,
    Completion,
    CompletionParams,
    Gateway,
    ScriptedBehavior,
    ScriptedRule,
    UsageLedger,
)
from .hints import HintProfile, HintRegistry, HintSection
from .runtime import AgentRuntime, Budget, PromptProfile, assemble_prompt

__version__ = "0.1.0"

__all__ = [
    "AgentRuntime",
    "Budget",
    "ChatMessage",
    "Completion",
    "CompletionParams",
    "Gateway",
    "HintProfile",
    "HintRegistry",
    "HintSection",
    "MistakeFinding",
    "ModelTag",
    "Outcome",
    "PromptProfile",
    "RoundManifest",
    "RunStore",
    "ScriptedBehavior",
    "ScriptedRule",
    "StateRef",
    "Step",
    "Task",
    "Trajectory",
    "UsageLedger",
    "ValidationError",
    "assemble_prompt",
    "normalize_answer",
    "score_trajectory",
]
