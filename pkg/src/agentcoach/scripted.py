"""Builds deterministic scripted behaviors from reference solutions.

A rule keys on three substrings that together identify a decision point:
the task description (questions are unique), the current step marker from the
freshly appended status block, and the section-specific format reminder.
Rules are emitted with later steps first so the newest "You are on step N"
marker wins, and hint-conditioned overrides are placed ahead of the base
rules so an injected hint changes the sampled action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .gateway import ScriptedBehavior, ScriptedRule
from .model import Task
from .runtime import CODE_TAG, MONOLOGUE_TAG
from .world.templates import Cells

_MONOLOGUE_MARKER = "prepare your next action"
_CODE_MARKER = "running a code cell"


def _step_marker(step_number: int) -> str:
    return f"You are on step {step_number}\n"


def _wrap(tag: str, body: str) -> str:
    return f"<{tag}>\n{body}\n</{tag}>"


def _rules_for_step(
    description: str,
    step_number: int,
    monologue: str,
    code: str,
    extra_trigger: Optional[str] = None,
) -> list[ScriptedRule]:
    base = (description, _step_marker(step_number))
    if extra_trigger is not None:
        base = base + (extra_trigger,)
    return [
        ScriptedRule(base + (_MONOLOGUE_MARKER,), _wrap(MONOLOGUE_TAG, monologue)),
        ScriptedRule(base + (_CODE_MARKER,), _wrap(CODE_TAG, code)),
    ]


@dataclass
class MistakeSpec:
    """Replace one step of a reference solution with a deliberate mistake.

    The remaining reference steps still play out afterwards only if
    `resume` is set (the mistake's code must then be a no-op for state)."""

    task_id: str
    step_number: int
    monologue: str
    code: str
    resume: bool = False


@dataclass
class HintOverride:
    """Corrected action to produce when `hint_snippet` appears in the prompt
    (i.e. the coach injected the corresponding corrective hint)."""

    task_id: str
    step_number: int
    hint_snippet: str
    monologue: str
    code: str


def behavior_from_solutions(
    tasks: list[Task],
    solutions: dict[str, Cells],
    mistakes: list[MistakeSpec] = (),
    hint_overrides: list[HintOverride] = (),
    default_response: Optional[str] = None,
) -> ScriptedBehavior:
    mistakes_by_task: dict[str, dict[int, MistakeSpec]] = {}
    for m in mistakes:
        mistakes_by_task.setdefault(m.task_id, {})[m.step_number] = m
    rules: list[ScriptedRule] = []
    for override in hint_overrides:
        task = next(t for t in tasks if t.task_id == override.task_id)
        rules.extend(
            _rules_for_step(
                task.description,
                override.step_number,
                override.monologue,
                override.code,
                extra_trigger=override.hint_snippet,
            )
        )
    for task in tasks:
        cells = solutions.get(task.task_id)
        if cells is None:
            continue
        task_mistakes = mistakes_by_task.get(task.task_id, {})
        steps: list[tuple[int, str, str]] = []
        shift = 0
        for i, (monologue, code) in enumerate(cells, start=1):
            m = task_mistakes.get(i)
            if m is None:
                steps.append((i + shift, monologue, code))
                continue
            steps.append((i + shift, m.monologue, m.code))
            if m.resume:
                shift += 1  # mistake consumed a step; replay this cell next
                steps.append((i + shift, monologue, code))
            else:
                break
        for step_number, monologue, code in reversed(steps):
            rules.extend(_rules_for_step(task.description, step_number, monologue, code))
    return ScriptedBehavior(rules=rules, default_response=default_response)


def judge_behavior(
    flagged_snippets: list[str],
    pass_answer: str = "<answer>True</answer>",
    fail_answer: str = "<answer>False</answer>",
) -> ScriptedBehavior:
    """LLM-judge stand-in: flags any prompt containing one of the snippets
    (False means the reviewed step contains the mistake); passes otherwise."""
    rules = [ScriptedRule(s, fail_answer) for s in flagged_snippets]
    return ScriptedBehavior(rules=rules, default_response=pass_answer)
