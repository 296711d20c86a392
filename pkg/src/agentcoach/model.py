"""Shared domain types: tasks, trajectories, findings, manifests.

All records serialize to plain dicts (JSON lines on disk, schema_version 1)
and deserialize back field-for-field. Stored records are immutable; any
correction is a new record.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, asdict
from typing import Any, Optional

SCHEMA_VERSION = 1

SPLITS = ("train", "valid", "test")

COMPLETE_TOOL = "complete_task"


class ValidationError(ValueError):
    """A record violates one of its type invariants."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class Task:
    task_id: str
    group: str
    template_id: str
    description: str
    expected_answer: str
    split: str
    tool_allowlist: tuple[str, ...]

    def validate(self) -> None:
        if not self.expected_answer:
            raise ValidationError("expected_answer", "must be non-empty")
        if self.split not in SPLITS:
            raise ValidationError("split", f"must be one of {SPLITS}, got {self.split!r}")
        if COMPLETE_TOOL not in self.tool_allowlist:
            raise ValidationError("tool_allowlist", f"must contain {COMPLETE_TOOL!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["tool_allowlist"] = list(self.tool_allowlist)
        d["schema_version"] = SCHEMA_VERSION
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Task":
        return cls(
            task_id=d["task_id"],
            group=d["group"],
            template_id=d["template_id"],
            description=d["description"],
            expected_answer=d["expected_answer"],
            split=d["split"],
            tool_allowlist=tuple(d["tool_allowlist"]),
        )


@dataclass(frozen=True)
class Step:
    index: int
    monologue: str
    code: str
    observation: str
    input_tokens: int = 0
    output_tokens: int = 0

    def validate(self) -> None:
        if self.index < 1:
            raise ValidationError("index", "steps are 1-based")
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValidationError("input_tokens", "token counts must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "Step":
        return cls(**d)


@dataclass(frozen=True)
class Outcome:
    kind: str  # completed | budget_exhausted | step_limit | aborted
    answer: Optional[str] = None
    report: Optional[str] = None
    reason: Optional[str] = None

    KINDS = ("completed", "budget_exhausted", "step_limit", "aborted")

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise ValidationError("outcome.kind", f"unknown kind {self.kind!r}")
        if self.kind == "completed" and self.answer is None:
            raise ValidationError("outcome.answer", "completed outcome requires an answer")

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_json(cls, d: dict) -> "Outcome":
        return cls(**d)


@dataclass(frozen=True)
class Trajectory:
    trajectory_id: str
    task_id: str
    model_tag: str
    hint_profile_id: Optional[str]
    steps: tuple[Step, ...]
    outcome: Outcome
    success: Optional[bool]  # tri-state: True/False/None (unscored)
    seed: int
    created_at: float = 0.0

    def validate(self) -> None:
        self.outcome.validate()
        prev = 0
        for s in self.steps:
            s.validate()
            if s.index != prev + 1:
                raise ValidationError("steps.index", f"expected {prev + 1}, got {s.index}")
            prev = s.index
        if self.outcome.kind != "aborted" and not self.steps:
            raise ValidationError("steps", "non-aborted trajectory must have steps")
        if self.outcome.kind == "completed":
            final = self.steps[-1].code
            calls = re.findall(rf"\b{COMPLETE_TOOL}\s*\(", final)
            if len(calls) != 1:
                raise ValidationError(
                    "outcome",
                    f"completed trajectory requires exactly one {COMPLETE_TOOL} call "
                    f"in its final step, found {len(calls)}",
                )

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "trajectory_id": self.trajectory_id,
            "task_id": self.task_id,
            "model_tag": self.model_tag,
            "hint_profile_id": self.hint_profile_id,
            "steps": [s.to_json() for s in self.steps],
            "outcome": self.outcome.to_json(),
            "success": self.success,
            "seed": self.seed,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Trajectory":
        return cls(
            trajectory_id=d["trajectory_id"],
            task_id=d["task_id"],
            model_tag=d["model_tag"],
            hint_profile_id=d.get("hint_profile_id"),
            steps=tuple(Step.from_json(s) for s in d["steps"]),
            outcome=Outcome.from_json(d["outcome"]),
            success=d.get("success"),
            seed=d["seed"],
            created_at=d.get("created_at", 0.0),
        )


@dataclass(frozen=True, order=True)
class StateRef:
    """Points at state s_t: the prefix strictly before the action at step_index."""

    trajectory_id: str
    step_index: int

    def validate_against(self, trajectory: Trajectory) -> None:
        if not 1 <= self.step_index <= len(trajectory.steps):
            raise ValidationError(
                "step_index",
                f"{self.step_index} out of range 1..{len(trajectory.steps)}",
            )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "StateRef":
        return cls(trajectory_id=d["trajectory_id"], step_index=d["step_index"])


@dataclass(frozen=True)
class ModelTag:
    name: str
    round_index: int  # 0 = the base instruction-tuned model
    backend_kind: str  # http-chat | scripted
    endpoint_or_script: str

    def validate(self) -> None:
        if self.round_index < 0:
            raise ValidationError("round_index", "must be >= 0")
        if self.backend_kind not in ("http-chat", "scripted"):
            raise ValidationError("backend_kind", f"unknown kind {self.backend_kind!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ModelTag":
        return cls(**d)


@dataclass(frozen=True)
class MistakeFinding:
    finding_id: str
    filter_id: str
    state: StateRef
    verdict_reasoning: str
    round_index: int

    def validate(self) -> None:
        if self.state.step_index < 1:
            raise ValidationError("state.step_index", "must be >= 1")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "finding_id": self.finding_id,
            "filter_id": self.filter_id,
            "state": self.state.to_json(),
            "verdict_reasoning": self.verdict_reasoning,
            "round_index": self.round_index,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MistakeFinding":
        return cls(
            finding_id=d["finding_id"],
            filter_id=d["filter_id"],
            state=StateRef.from_json(d["state"]),
            verdict_reasoning=d["verdict_reasoning"],
            round_index=d["round_index"],
        )


@dataclass(frozen=True)
class RoundManifest:
    round_index: int
    model_tag_in: str
    model_tag_out: Optional[str]
    dataset_ids: tuple[str, ...]
    filter_ids: tuple[str, ...]
    hint_ids: tuple[str, ...]
    counts: dict[str, int] = field(default_factory=dict)
    config_snapshot: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.round_index < 1:
            raise ValidationError("round_index", "must be >= 1")
        if not self.dataset_ids:
            raise ValidationError("dataset_ids", "completed round must produce a dataset")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "round_index": self.round_index,
            "model_tag_in": self.model_tag_in,
            "model_tag_out": self.model_tag_out,
            "dataset_ids": list(self.dataset_ids),
            "filter_ids": list(self.filter_ids),
            "hint_ids": list(self.hint_ids),
            "counts": dict(self.counts),
            "config_snapshot": dict(self.config_snapshot),
        }

    @classmethod
    def from_json(cls, d: dict) -> "RoundManifest":
        return cls(
            round_index=d["round_index"],
            model_tag_in=d["model_tag_in"],
            model_tag_out=d.get("model_tag_out"),
            dataset_ids=tuple(d["dataset_ids"]),
            filter_ids=tuple(d["filter_ids"]),
            hint_ids=tuple(d["hint_ids"]),
            counts=dict(d.get("counts", {})),
            config_snapshot=dict(d.get("config_snapshot", {})),
        )


_WS_RUN = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    """Trim and collapse internal whitespace runs. Case-sensitive by design."""
    return _WS_RUN.sub(" ", text.strip())


def score_trajectory(trajectory: Trajectory, task: Task) -> bool:
    """True iff the trajectory completed and its answer matches the oracle."""
    if trajectory.task_id != task.task_id:
        raise ValueError("trajectory/task mismatch")
    if trajectory.outcome.kind != "completed" or trajectory.outcome.answer is None:
        return False
    return normalize_answer(trajectory.outcome.answer) == normalize_answer(task.expected_answer)


def now() -> float:
    return time.time()
