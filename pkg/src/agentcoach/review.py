"""Reviewer: rule-based and LLM-judge filters that localize mistakes in
stored trajectories, producing the flagged state set for a round."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .actionlang.parser import Call, Expr, ListLit, BinOp, Index, Neg, ParseError, StringLit, parse
from .gateway import ChatMessage, CompletionParams, Gateway
from .model import MistakeFinding, ModelTag, StateRef, Task, Trajectory

DEFAULT_CAP_PER_FILTER = 16

JUDGE_SUFFIX = (
    "Below is the agent's trajectory. Please make your judgment based on the "
    "last step only. The earlier steps are included as additional context.\n\n"
)


class FilterConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RuleCheck:
    """One predicate over a step; checks within a rule are conjoined.

    Textual: target in {monologue, code, observation}, op in {contains, regex}.
    Structural (over parsed code): calls_tool, tool_arg_not_string,
    tool_arg_count.
    """

    kind: str
    target: str = "code"
    value: str = ""
    tool: str = ""
    arg_index: int = 0
    arg_count: int = -1

    def evaluate(self, step_monologue: str, step_code: str, step_observation: str) -> bool:
        if self.kind == "contains":
            return self.value in self._text(step_monologue, step_code, step_observation)
        if self.kind == "regex":
            return re.search(self.value, self._text(step_monologue, step_code, step_observation)) is not None
        calls = _tool_calls(step_code)
        if self.kind == "calls_tool":
            return any(c.func == self.tool for c in calls)
        if self.kind == "tool_arg_count":
            return any(c.func == self.tool and len(c.args) == self.arg_count for c in calls)
        if self.kind == "tool_arg_not_string":
            for c in calls:
                if c.func == self.tool and len(c.args) > self.arg_index:
                    if not isinstance(c.args[self.arg_index], StringLit):
                        return True
            return False
        raise FilterConfigError(f"unknown check kind {self.kind!r}")

    def _text(self, monologue: str, code: str, observation: str) -> str:
        if self.target == "monologue":
            return monologue
        if self.target == "code":
            return code
        if self.target == "observation":
            return observation
        raise FilterConfigError(f"unknown target {self.target!r}")

    @classmethod
    def from_json(cls, d: dict) -> "RuleCheck":
        kind = d.get("kind")
        if kind not in ("contains", "regex", "calls_tool", "tool_arg_not_string",
                        "tool_arg_count"):
            raise FilterConfigError(f"unknown check kind {kind!r}")
        if kind in ("contains", "regex"):
            if d.get("target") not in ("monologue", "code", "observation"):
                raise FilterConfigError(f"check {kind}: bad target {d.get('target')!r}")
            if "value" not in d:
                raise FilterConfigError(f"check {kind}: missing value")
            if kind == "regex":
                try:
                    re.compile(d["value"])
                except re.error as e:
                    raise FilterConfigError(f"bad regex {d['value']!r}: {e}")
        if kind.startswith("tool") or kind == "calls_tool":
            if not d.get("tool"):
                raise FilterConfigError(f"check {kind}: missing tool name")
        return cls(
            kind=kind,
            target=d.get("target", "code"),
            value=d.get("value", ""),
            tool=d.get("tool", ""),
            arg_index=d.get("arg_index", 0),
            arg_count=d.get("arg_count", -1),
        )


def _walk(expr: Expr):
    yield expr
    if isinstance(expr, Call):
        for a in expr.args:
            yield from _walk(a)
    elif isinstance(expr, ListLit):
        for a in expr.items:
            yield from _walk(a)
    elif isinstance(expr, BinOp):
        yield from _walk(expr.left)
        yield from _walk(expr.right)
    elif isinstance(expr, Index):
        yield from _walk(expr.base)
        yield from _walk(expr.index)
    elif isinstance(expr, Neg):
        yield from _walk(expr.operand)


def _tool_calls(code: str) -> list[Call]:
    try:
        program = parse(code)
    except ParseError:
        return []
    calls: list[Call] = []
    for stmt in program.statements:
        expr = stmt.expr  # both statement kinds carry .expr
        calls.extend(n for n in _walk(expr) if isinstance(n, Call))
    return calls


@dataclass(frozen=True)
class FilterSpec:
    filter_id: str
    kind: str  # rule | llm-judge
    description: str
    checks: tuple[RuleCheck, ...] = ()
    judge_prompt: str = ""
    scope: tuple[str, ...] = ()  # task groups; empty = all groups

    def validate(self) -> None:
        if self.kind == "rule" and (not self.checks or self.judge_prompt):
            raise FilterConfigError(f"{self.filter_id}: rule filter needs checks only")
        if self.kind == "llm-judge" and (not self.judge_prompt or self.checks):
            raise FilterConfigError(f"{self.filter_id}: judge filter needs judge_prompt only")
        if self.kind not in ("rule", "llm-judge"):
            raise FilterConfigError(f"{self.filter_id}: unknown kind {self.kind!r}")

    def in_scope(self, group: str) -> bool:
        return not self.scope or group in self.scope

    @classmethod
    def from_json(cls, d: dict) -> "FilterSpec":
        spec = cls(
            filter_id=d["filter_id"],
            kind=d["kind"],
            description=d.get("description", ""),
            checks=tuple(RuleCheck.from_json(c) for c in d.get("rule", [])),
            judge_prompt=d.get("judge_prompt", ""),
            scope=tuple(d.get("scope", [])),
        )
        spec.validate()
        return spec


def load_filters(path: str | Path) -> list[FilterSpec]:
    """Load a round's filter file; configuration errors surface here, never
    at scan time."""
    data = json.loads(Path(path).read_text())
    specs = [FilterSpec.from_json(d) for d in data["filters"]]
    ids = [s.filter_id for s in specs]
    if len(set(ids)) != len(ids):
        raise FilterConfigError("duplicate filter ids")
    return specs


def _finding_id(filter_id: str, state: StateRef) -> str:
    return f"f:{filter_id}:{state.trajectory_id}:{state.step_index}"


def run_rule_filter(
    spec: FilterSpec, trajectory: Trajectory, round_index: int
) -> list[MistakeFinding]:
    """Pure function of (spec, trajectory): one finding per matching step."""
    if spec.kind != "rule":
        raise FilterConfigError(f"{spec.filter_id} is not a rule filter")
    findings = []
    for step in trajectory.steps:
        if all(c.evaluate(step.monologue, step.code, step.observation) for c in spec.checks):
            state = StateRef(trajectory.trajectory_id, step.index)
            findings.append(
                MistakeFinding(
                    finding_id=_finding_id(spec.filter_id, state),
                    filter_id=spec.filter_id,
                    state=state,
                    verdict_reasoning=f"rule:{spec.filter_id}",
                    round_index=round_index,
                )
            )
    return findings


@dataclass
class JudgeError:
    filter_id: str
    state: StateRef
    raw_output: str


def _render_prefix(trajectory: Trajectory, through_step: int) -> str:
    parts = []
    for step in trajectory.steps[:through_step]:
        parts.append(
            f"<inner_monologue>\n{step.monologue}\n</inner_monologue>\n"
            f"<run_ipython>\n{step.code}\n</run_ipython>\n"
            f"<observation>\n{step.observation}\n</observation>"
        )
    return "\n".join(parts)


_ANSWER_RE = re.compile(r"<answer>\s*(True|False)\b.*?</answer>", re.DOTALL)
_REASONING_RE = re.compile(r"<reasoning>(.*?)</reasoning>", re.DOTALL)


def run_judge_filter(
    spec: FilterSpec,
    trajectory: Trajectory,
    judge_model: ModelTag,
    gateway: Gateway,
    round_index: int,
    params: CompletionParams = CompletionParams(),
    judge_errors: Optional[list[JudgeError]] = None,
) -> list[MistakeFinding]:
    """Scans every step prefix; answer False marks a mistake at that step
    (True means correct-or-irrelevant)."""
    if spec.kind != "llm-judge":
        raise FilterConfigError(f"{spec.filter_id} is not a judge filter")
    findings = []
    for step in trajectory.steps:
        prompt = (
            spec.judge_prompt.replace("{description}", spec.description)
            + "\n\n" + JUDGE_SUFFIX + _render_prefix(trajectory, step.index)
        )
        messages = [ChatMessage(role="user", content=prompt)]
        state = StateRef(trajectory.trajectory_id, step.index)
        verdict, reasoning, raw = _ask_judge(gateway, judge_model, messages, params)
        if verdict is None:
            retry = messages + [
                ChatMessage(role="assistant", content=raw),
                ChatMessage(
                    role="user",
                    content="Your answer was unparseable. Respond again with "
                            "<reasoning>...</reasoning> and <answer>True or False</answer>.",
                ),
            ]
            verdict, reasoning, raw = _ask_judge(gateway, judge_model, retry, params)
        if verdict is None:
            if judge_errors is not None:
                judge_errors.append(JudgeError(spec.filter_id, state, raw))
            continue
        if verdict is False:  # False = mistake
            findings.append(
                MistakeFinding(
                    finding_id=_finding_id(spec.filter_id, state),
                    filter_id=spec.filter_id,
                    state=state,
                    verdict_reasoning=reasoning,
                    round_index=round_index,
                )
            )
    return findings


def _ask_judge(
    gateway: Gateway,
    judge_model: ModelTag,
    messages: list[ChatMessage],
    params: CompletionParams,
) -> tuple[Optional[bool], str, str]:
    completion = gateway.complete(judge_model, messages, params)
    m = _ANSWER_RE.search(completion.text)
    if m is None:
        return None, "", completion.text
    reasoning_m = _REASONING_RE.search(completion.text)
    reasoning = reasoning_m.group(1).strip() if reasoning_m else ""
    return m.group(1) == "True", reasoning, completion.text


def run_filters(
    specs: list[FilterSpec],
    trajectories: list[Trajectory],
    tasks_by_id: dict[str, Task],
    round_index: int,
    gateway: Optional[Gateway] = None,
    judge_model: Optional[ModelTag] = None,
    failed_only: bool = False,
    judge_errors: Optional[list[JudgeError]] = None,
) -> list[MistakeFinding]:
    findings: list[MistakeFinding] = []
    for trajectory in trajectories:
        if failed_only and trajectory.success:
            continue
        group = tasks_by_id[trajectory.task_id].group
        for spec in specs:
            if not spec.in_scope(group):
                continue
            if spec.kind == "rule":
                findings.extend(run_rule_filter(spec, trajectory, round_index))
            else:
                if gateway is None or judge_model is None:
                    raise FilterConfigError(
                        f"{spec.filter_id}: judge filter needs a gateway and judge model"
                    )
                findings.extend(
                    run_judge_filter(
                        spec, trajectory, judge_model, gateway, round_index,
                        judge_errors=judge_errors,
                    )
                )
    return findings


def collect_flagged_states(
    findings: list[MistakeFinding],
    cap_per_filter: int = DEFAULT_CAP_PER_FILTER,
    filter_priority: Optional[list[str]] = None,
) -> tuple[list[StateRef], dict[StateRef, str]]:
    """S_i: ordered unique StateRefs plus state -> attributed filter.

    Deterministic and stable under permutation of the input findings:
    duplicates collapse, attribution goes to the highest-priority filter
    (file order if given, else lexicographic), the per-filter cap keeps the
    earliest states in (trajectory_id, step_index) order.
    """
    priority = {f: i for i, f in enumerate(filter_priority or [])}

    def fprio(filter_id: str):
        return (priority.get(filter_id, len(priority)), filter_id)

    unique: dict[tuple[str, StateRef], MistakeFinding] = {}
    for f in findings:
        unique.setdefault((f.filter_id, f.state), f)

    per_filter: dict[str, list[StateRef]] = {}
    for (filter_id, state) in sorted(unique, key=lambda k: (k[1], fprio(k[0]))):
        per_filter.setdefault(filter_id, []).append(state)
    kept: set[tuple[str, StateRef]] = set()
    for filter_id, states in per_filter.items():
        for state in sorted(states)[:cap_per_filter]:
            kept.add((filter_id, state))

    attribution: dict[StateRef, str] = {}
    for (filter_id, state) in sorted(kept, key=lambda k: (k[1], fprio(k[0]))):
        if state not in attribution:
            attribution[state] = filter_id
    ordered = sorted(attribution)
    return ordered, attribution
