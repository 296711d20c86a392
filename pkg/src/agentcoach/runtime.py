"""ReAct loop: tagged prompt assembly, monologue/code alternation, cell
execution, budget enforcement, and trajectory finalization.

Prompt layout, in order: <task_description>, optional <guidelines> (omitted
entirely when there are no hint sections), <tool_documentation>, <status> for
step 1, then the alternating tagged history where each observation is
followed by a fresh <status> block (history is kept verbatim), optionally an
injected corrective hint message, then the format reminder that initiates
the expected opening tag.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .actionlang import Interpreter, ToolRegistry
from .gateway import (
    ChatMessage,
    Completion,
    CompletionParams,
    Gateway,
    count_message_tokens,
)
from .hints import HintProfile, HintRegistry, HintSection
from .model import (
    ModelTag,
    Outcome,
    StateRef,
    Step,
    Task,
    Trajectory,
    now,
    score_trajectory,
)
from .world import World, build_tool_registry, render_tool_docs

MONOLOGUE_TAG = "inner_monologue"
CODE_TAG = "run_ipython"

FORMAT_REMINDER_MONOLOGUE = (
    "Please proceed with your inner monologue to prepare your next action. "
    "Strictly follow the XML-like format below:\n"
    f"<{MONOLOGUE_TAG}>\nThoughts\n</{MONOLOGUE_TAG}>"
)
FORMAT_REMINDER_CODE = (
    "Now implement the next step of your plan by running a code cell. "
    "Strictly follow the XML-like format below:\n"
    f"<{CODE_TAG}>\nCode\n</{CODE_TAG}>"
)
FORMAT_CORRECTION = (
    "Your previous response did not follow the required format. Respond again, "
    "strictly wrapped in the expected XML tags."
)


def deterministic_clock(step_number: int) -> tuple[str, str]:
    """Logical clock: fixed start, two seconds per step. Keeps prompts (and
    therefore exported datasets) byte-identical across reruns."""
    elapsed = 2 * (step_number - 1)
    h, rem = divmod(elapsed, 3600)
    m, s = divmod(rem, 60)
    return (f"2025-01-10 20:10:{(23 + elapsed) % 60:02d}", f"{h}:{m:02d}:{s:02d}")


@dataclass(frozen=True)
class Budget:
    max_steps: int = 8
    max_input_tokens: int = 16_384

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class PromptProfile:
    hint_profile: Optional[HintProfile] = None  # None -> no guidelines block
    include_tool_docs: bool = True
    budget: Budget = field(default_factory=Budget)
    clock: Callable[[int], tuple[str, str]] = deterministic_clock


@dataclass(frozen=True)
class BudgetStatus:
    now: str
    elapsed: str
    step_number: int
    resources_spent: int  # cumulative output tokens
    input_tokens_remaining: int

    def render(self) -> str:
        return (
            f"Current date and time: {self.now}\n"
            f"Time elapsed since the project beginning: {self.elapsed}\n"
            f"You are on step {self.step_number}\n"
            f"Resources spent so far: {self.resources_spent}\n"
            f"Number of input tokens remaining: {self.input_tokens_remaining}"
        )


class MalformedOutputError(RuntimeError):
    pass


def extract_tag(text: str, tag: str) -> str:
    """Strict tag extraction: the opening tag must be present; the closing tag
    may be absent when a stop sequence consumed it."""
    m = re.match(rf"\s*<{tag}>(.*?)(?:</{tag}>.*)?$", text, flags=re.DOTALL)
    if m is None:
        raise MalformedOutputError(f"expected a <{tag}> section")
    return m.group(1).strip("\n")


def _tagged(tag: str, body: str) -> str:
    return f"<{tag}>\n{body}\n</{tag}>"


def compute_status(
    task: Task,
    profile: PromptProfile,
    history: list[Step],
    step_number: int,
    registry: Optional[HintRegistry] = None,
    corrective_hint: Optional[HintSection] = None,
) -> BudgetStatus:
    """Status for the given step: resources from recorded output tokens,
    tokens-remaining measured against a probe prompt (with the remaining
    field zeroed, so the figure is reproducible from the trajectory alone)."""
    prefix = history[: step_number - 1]
    resources = sum(s.output_tokens for s in prefix)
    now_text, elapsed = profile.clock(step_number)
    probe = BudgetStatus(now_text, elapsed, step_number, resources, 0)
    msgs = assemble_prompt(task, profile, prefix, probe, registry, corrective_hint)
    used = count_message_tokens(None, msgs)
    remaining = max(0, profile.budget.max_input_tokens - used)
    return BudgetStatus(now_text, elapsed, step_number, resources, remaining)


def assemble_prompt(
    task: Task,
    profile: PromptProfile,
    history: list[Step],
    status: BudgetStatus,
    registry: Optional[HintRegistry] = None,
    corrective_hint: Optional[HintSection] = None,
    next_section: str = MONOLOGUE_TAG,
) -> list[ChatMessage]:
    """Pure function of its inputs; sections appear in the documented order."""
    for i, s in enumerate(history, start=1):
        if s.index != i:
            raise ValueError("history steps must be contiguous from 1")
    first_status = (
        status if not history
        else compute_status(task, profile, [], 1, registry)
    )
    parts = [_tagged("task_description", task.description)]
    if profile.hint_profile is not None and profile.hint_profile.hint_ids:
        if registry is None:
            raise ValueError("a hint profile requires the hint registry")
        parts.append(_tagged("guidelines", profile.hint_profile.render(registry)))
    if profile.include_tool_docs:
        parts.append(_tagged("tool_documentation", render_tool_docs(task.tool_allowlist)))
    parts.append(_tagged("status", first_status.render()))
    messages = [ChatMessage(role="user", content="\n\n".join(parts))]
    for step in history:
        messages.append(
            ChatMessage(
                role="assistant",
                content=_tagged(MONOLOGUE_TAG, step.monologue)
                + "\n"
                + _tagged(CODE_TAG, step.code),
            )
        )
        if step.index == len(history):
            step_status = status  # the freshly appended status for this step
        else:
            step_status = compute_status(
                task, profile, history[: step.index], step.index + 1, registry
            )
        messages.append(
            ChatMessage(
                role="user",
                content=_tagged("observation", step.observation)
                + "\n"
                + _tagged("status", step_status.render()),
            )
        )
    if corrective_hint is not None:
        messages.append(ChatMessage(role="user", content=corrective_hint.text))
    reminder = (
        FORMAT_REMINDER_MONOLOGUE if next_section == MONOLOGUE_TAG else FORMAT_REMINDER_CODE
    )
    messages.append(ChatMessage(role="user", content=reminder))
    return messages


@dataclass
class ActionSample:
    """One sampled (monologue, code) action plus its full teacher context."""

    state: StateRef
    monologue: str
    code: str
    hint_id: Optional[str]
    teacher_messages: list[ChatMessage]
    task_id: str


class AgentRuntime:
    def __init__(
        self,
        gateway: Gateway,
        world: World,
        registry: Optional[HintRegistry] = None,
        tools: Optional[ToolRegistry] = None,
    ):
        self.gateway = gateway
        self.world = world
        self.registry = registry or HintRegistry()
        self.tools = tools or build_tool_registry(world)

    # -- section requests -----------------------------------------------------

    def _request_section(
        self,
        model: ModelTag,
        messages: list[ChatMessage],
        tag: str,
        params: CompletionParams,
        trajectory_id: str,
    ) -> tuple[str, Completion]:
        stop = (f"</{tag}>",)
        request = replace(params, stop=stop)
        completion = self.gateway.complete(model, messages, request)
        self.gateway.ledger.add(trajectory_id, completion.usage)
        try:
            return extract_tag(completion.text, tag), completion
        except MalformedOutputError:
            corrected = messages + [
                ChatMessage(role="assistant", content=completion.text),
                ChatMessage(role="user", content=FORMAT_CORRECTION),
            ]
            retry = self.gateway.complete(model, corrected, request)
            self.gateway.ledger.add(trajectory_id, retry.usage)
            return extract_tag(retry.text, tag), retry  # raises on second failure

    def _request_action(
        self,
        model: ModelTag,
        task: Task,
        profile: PromptProfile,
        history: list[Step],
        status: BudgetStatus,
        params: CompletionParams,
        trajectory_id: str,
        corrective_hint: Optional[HintSection] = None,
    ) -> tuple[str, str, list[ChatMessage]]:
        """Request monologue then code; returns both plus the monologue prompt."""
        messages = assemble_prompt(
            task, profile, history, status, self.registry, corrective_hint
        )
        monologue, _ = self._request_section(
            model, messages, MONOLOGUE_TAG, params, trajectory_id
        )
        code_messages = assemble_prompt(
            task, profile, history, status, self.registry, corrective_hint,
            next_section=CODE_TAG,
        )
        code_messages.insert(
            -1, ChatMessage(role="assistant", content=_tagged(MONOLOGUE_TAG, monologue))
        )
        code, _ = self._request_section(
            model, code_messages, CODE_TAG, params, trajectory_id
        )
        return monologue, code, messages

    # -- main loop ------------------------------------------------------------

    def run_trajectory(
        self,
        task: Task,
        model: ModelTag,
        profile: PromptProfile,
        seed: int,
        trajectory_id: str,
        params: CompletionParams = CompletionParams(),
    ) -> Trajectory:
        interp = Interpreter(self.tools.restricted(task.tool_allowlist))
        history: list[Step] = []
        outcome: Optional[Outcome] = None
        params = replace(params, seed=seed)
        hint_profile_id = (
            profile.hint_profile.profile_id if profile.hint_profile else None
        )
        while outcome is None:
            step_number = len(history) + 1
            if step_number > profile.budget.max_steps:
                outcome = Outcome(kind="step_limit")
                break
            status = compute_status(task, profile, history, step_number, self.registry)
            probe_messages = assemble_prompt(
                task, profile, history, status, self.registry
            )
            if count_message_tokens(model, probe_messages) > profile.budget.max_input_tokens:
                outcome = Outcome(kind="budget_exhausted")
                break
            before = self.gateway.ledger.trajectory_totals(trajectory_id)
            try:
                monologue, code, _ = self._request_action(
                    model, task, profile, history, status, params, trajectory_id
                )
            except MalformedOutputError:
                outcome = Outcome(kind="aborted", reason="malformed_output")
                break
            result = interp.run_source(code)
            after = self.gateway.ledger.trajectory_totals(trajectory_id)
            history.append(
                Step(
                    index=step_number,
                    monologue=monologue,
                    code=code,
                    observation=result.observation,
                    input_tokens=after["input_tokens"] - before["input_tokens"],
                    output_tokens=after["output_tokens"] - before["output_tokens"],
                )
            )
            if result.completed is not None:
                outcome = Outcome(
                    kind="completed",
                    answer=result.completed.answer,
                    report=result.completed.report,
                )
        trajectory = Trajectory(
            trajectory_id=trajectory_id,
            task_id=task.task_id,
            model_tag=model.name,
            hint_profile_id=hint_profile_id,
            steps=tuple(history),
            outcome=outcome,
            success=None,
            seed=seed,
            created_at=now(),
        )
        return replace(trajectory, success=score_trajectory(trajectory, task))

    # -- corrective sampling --------------------------------------------------

    def inject_hint_and_continue(
        self,
        trajectory: Trajectory,
        task: Task,
        state: StateRef,
        hint: HintSection,
        model: ModelTag,
        profile: PromptProfile,
        params: CompletionParams = CompletionParams(),
        m: int = 3,
    ) -> list[ActionSample]:
        """Sample m actions a ~ pi(a | s, hint) at the flagged state; nothing
        is executed beyond the sampled step. All samples share the identical
        prefix context."""
        state.validate_against(trajectory)
        if hint.kind != "corrective":
            raise ValueError("inject_hint_and_continue requires a corrective hint")
        prefix = list(trajectory.steps[: state.step_index - 1])
        status = compute_status(
            task, profile, prefix, state.step_index, self.registry, hint
        )
        samples: list[ActionSample] = []
        scratch_id = f"preview-{trajectory.trajectory_id}-{state.step_index}"
        for k in range(m):
            sample_params = replace(params, seed=(params.seed or 0) * 1000 + k)
            monologue, code, teacher_messages = self._request_action(
                model, task, profile, prefix, status, sample_params, scratch_id,
                corrective_hint=hint,
            )
            samples.append(
                ActionSample(
                    state=state,
                    monologue=monologue,
                    code=code,
                    hint_id=hint.hint_id,
                    teacher_messages=teacher_messages,
                    task_id=task.task_id,
                )
            )
        return samples
