"""Training-set construction: harvest teacher rollouts into state-action-hint
samples, per-section hint dropout for student contexts, corrective-sample
capture, balancing, deterministic split/export, and a diagnostic KL estimate.

Student contexts are always derivable from teacher contexts by deleting whole
hint sections (initial hints) or deleting the injected hint message
(corrective hints). The supervised action always begins at an assistant
message boundary, which is the alignment contract the trainer relies on.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from .gateway import ChatMessage
from .hints import HINT_SEPARATOR, HintRegistry
from .model import StateRef, Task, Trajectory
from .runtime import (
    ActionSample,
    AgentRuntime,
    MONOLOGUE_TAG,
    CODE_TAG,
    PromptProfile,
    assemble_prompt,
    compute_status,
)
from .model import ModelTag

SCHEMA_VERSION = 1

_GUIDELINES_RE = re.compile(r"<guidelines>\n(.*?)\n</guidelines>", re.DOTALL)


class ExportError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass
class DistillSample:
    sample_id: str
    round_index: int
    task_id: str
    state: StateRef
    teacher_messages: list[ChatMessage]
    student_messages: list[ChatMessage]
    action_text: str
    dropout_mask: tuple[bool, ...]  # True = kept, per hint section
    hint_ids: tuple[str, ...]
    weight: float = 1.0
    source_success: Optional[bool] = None
    dropout_seed: int = 0
    corrective: bool = False
    teacher_token_logprobs: Optional[list[dict[str, float]]] = None

    def to_json(self, mode: str) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "sample_id": self.sample_id,
            "round_index": self.round_index,
            "task_id": self.task_id,
            "state": self.state.to_json(),
            "student_messages": [m.to_json() for m in self.student_messages],
            "action_text": self.action_text,
            "dropout": {
                "mask": list(self.dropout_mask),
                "seed": self.dropout_seed,
                "policy": "redraw-per-epoch",
            },
            "hint_ids": list(self.hint_ids),
            "weight": self.weight,
            "source_success": self.source_success,
            "corrective": self.corrective,
            "mode": mode,
        }
        if mode == "kl":
            d["teacher_messages"] = [m.to_json() for m in self.teacher_messages]
        return d


def action_text(monologue: str, code: str) -> str:
    return (
        f"<{MONOLOGUE_TAG}>\n{monologue}\n</{MONOLOGUE_TAG}>\n"
        f"<{CODE_TAG}>\n{code}\n</{CODE_TAG}>"
    )


# -- hint dropout -------------------------------------------------------------


def _split_guidelines(content: str) -> Optional[tuple[str, str, str]]:
    """Returns (before, guidelines body, after) or None when no block exists."""
    m = _GUIDELINES_RE.search(content)
    if m is None:
        return None
    return content[: m.start()], m.group(1), content[m.end():]


def drop_sections(messages: list[ChatMessage], mask: tuple[bool, ...]) -> list[ChatMessage]:
    """Rebuild the first message keeping only masked-in hint sections; the
    guidelines block is omitted entirely when every section is dropped."""
    first = messages[0]
    parts = _split_guidelines(first.content)
    if parts is None:
        if any(not kept for kept in mask):
            raise ValueError("no guidelines block to drop sections from")
        return list(messages)
    before, body, after = parts
    sections = body.split(HINT_SEPARATOR)
    if len(sections) != len(mask):
        raise ValueError(f"mask length {len(mask)} != section count {len(sections)}")
    kept = [s for s, keep in zip(sections, mask) if keep]
    if kept:
        new_content = (
            before + "<guidelines>\n" + HINT_SEPARATOR.join(kept) + "\n</guidelines>" + after
        )
    else:
        # swallow one joining blank line along with the block
        new_content = before.rstrip("\n") + ("\n\n" + after.lstrip("\n") if after.strip() else "")
        if not before.strip():
            new_content = after.lstrip("\n")
    return [ChatMessage(role=first.role, content=new_content)] + list(messages[1:])


def dropout_mask_for(sample_id: str, p: float, seed: int, n_sections: int,
                     epoch: int = 0) -> tuple[bool, ...]:
    """Per-sample, per-epoch draw from the documented seed stream: each hint
    section is independently dropped with probability p."""
    digest = hashlib.sha256(f"{seed}:{epoch}:{sample_id}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return tuple(rng.random() >= p for _ in range(n_sections))


def apply_hint_dropout(
    sample: DistillSample, p: float, seed: int, epoch: int = 0
) -> DistillSample:
    """Materialize the student context for one epoch's dropout draw."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if sample.corrective:
        raise ValueError("corrective samples get no dropout; the hint is always hidden")
    n = len(sample.hint_ids)
    mask = dropout_mask_for(sample.sample_id, p, seed, n, epoch)
    student = drop_sections(sample.teacher_messages, mask)
    return replace(
        sample, student_messages=student, dropout_mask=mask, dropout_seed=seed
    )


# -- harvesting ---------------------------------------------------------------


def harvest_round1(
    trajectories: list[Trajectory],
    tasks_by_id: dict[str, Task],
    runtime: AgentRuntime,
    profile: PromptProfile,
    model: ModelTag,
    round_index: int = 1,
    skipped: Optional[list[str]] = None,
) -> list[DistillSample]:
    """One sample per step of each teacher rollout: state = the prefix before
    the step, teacher context = the prompt actually used at that step."""
    if profile.hint_profile is None:
        raise ValueError("round-1 harvesting requires an initial-hint profile")
    samples: list[DistillSample] = []
    for trajectory in trajectories:
        task = tasks_by_id.get(trajectory.task_id)
        if task is None:
            if skipped is not None:
                skipped.append(trajectory.trajectory_id)
            continue
        task_profile = replace(
            profile, hint_profile=runtime.registry.select_initial_hints(task)
        )
        hint_ids = task_profile.hint_profile.hint_ids
        for step in trajectory.steps:
            prefix = list(trajectory.steps[: step.index - 1])
            status = compute_status(
                task, task_profile, prefix, step.index, runtime.registry
            )
            teacher = assemble_prompt(
                task, task_profile, prefix, status, runtime.registry
            )
            samples.append(
                DistillSample(
                    sample_id=f"r{round_index}:{trajectory.trajectory_id}:{step.index}",
                    round_index=round_index,
                    task_id=task.task_id,
                    state=StateRef(trajectory.trajectory_id, step.index),
                    teacher_messages=teacher,
                    student_messages=list(teacher),
                    action_text=action_text(step.monologue, step.code),
                    dropout_mask=tuple(True for _ in hint_ids),
                    hint_ids=hint_ids,
                    source_success=trajectory.success,
                )
            )
    return samples


def harvest_corrective(
    action_samples: list[ActionSample],
    tasks_by_id: dict[str, Task],
    round_index: int,
    source_success: Optional[dict[str, bool]] = None,
) -> list[DistillSample]:
    """Corrective hints are always fully hidden from the student: the student
    context is the teacher context minus the injected hint message."""
    out: list[DistillSample] = []
    counters: dict[tuple, int] = {}
    for a in action_samples:
        key = (a.state.trajectory_id, a.state.step_index)
        k = counters.get(key, 0)
        counters[key] = k + 1
        # the injected hint is the second-to-last message (before the reminder)
        student = a.teacher_messages[:-2] + a.teacher_messages[-1:]
        out.append(
            DistillSample(
                sample_id=(
                    f"r{round_index}:{a.state.trajectory_id}:{a.state.step_index}:{k}"
                ),
                round_index=round_index,
                task_id=a.task_id,
                state=a.state,
                teacher_messages=list(a.teacher_messages),
                student_messages=student,
                action_text=action_text(a.monologue, a.code),
                dropout_mask=(),
                hint_ids=(a.hint_id,) if a.hint_id else (),
                corrective=True,
                source_success=(source_success or {}).get(a.state.trajectory_id),
            )
        )
    return out


# -- balancing (three-pass) ---------------------------------------------------


@dataclass
class BalanceConfig:
    enabled: bool = True
    per_template_floor: int = 3
    per_group_floor: Optional[int] = None  # None -> max corrected count per group
    retention_quota: int = 2  # trajectories from untouched groups
    failure_priority: dict[str, int] = field(default_factory=dict)  # task_id -> failures
    seed: int = 0


@dataclass
class BalanceReport:
    added_pass1: list[str] = field(default_factory=list)  # trajectory ids, in order
    added_pass2: list[str] = field(default_factory=list)
    added_pass3: list[str] = field(default_factory=list)
    shortfalls: list[str] = field(default_factory=list)


def balance_dataset(
    corrected: list[DistillSample],
    candidates: list[Trajectory],
    config: BalanceConfig,
    tasks_by_id: dict[str, Task],
    harvest: Callable[[list[Trajectory]], list[DistillSample]],
    report: Optional[BalanceReport] = None,
) -> list[DistillSample]:
    """Augments corrective samples with hint-conditioned full trajectories:
    (1) templates with too few corrected samples, (2) underrepresented groups
    ordered by historical failure count, (3) a retention quota from untouched
    groups. Never fabricates: shortfalls are reported, not filled."""
    if not config.enabled:
        return list(corrected)
    report = report if report is not None else BalanceReport()
    rng = random.Random(config.seed)

    by_template: dict[str, int] = {}
    by_group: dict[str, int] = {}
    for s in corrected:
        task = tasks_by_id[s.task_id]
        by_template[task.template_id] = by_template.get(task.template_id, 0) + 1
        by_group[task.group] = by_group.get(task.group, 0) + 1

    available = sorted(candidates, key=lambda t: t.trajectory_id)
    used: set[str] = set()
    chosen: list[Trajectory] = []

    def take(trajectory: Trajectory, bucket: list[str]) -> None:
        used.add(trajectory.trajectory_id)
        chosen.append(trajectory)
        bucket.append(trajectory.trajectory_id)
        task = tasks_by_id[trajectory.task_id]
        by_template[task.template_id] = by_template.get(task.template_id, 0) + len(trajectory.steps)
        by_group[task.group] = by_group.get(task.group, 0) + len(trajectory.steps)

    touched_groups: set[str] = set()

    # Pass 1: insufficient mistakes per template
    for template_id in sorted(by_template):
        pool = [
            t for t in available
            if t.trajectory_id not in used
            and tasks_by_id[t.task_id].template_id == template_id
        ]
        rng.shuffle(pool)
        while by_template[template_id] < config.per_template_floor and pool:
            t = pool.pop()
            take(t, report.added_pass1)
            touched_groups.add(tasks_by_id[t.task_id].group)
        if by_template[template_id] < config.per_template_floor:
            report.shortfalls.append(
                f"template {template_id}: {by_template[template_id]} < floor "
                f"{config.per_template_floor}"
            )

    # Pass 2: imbalance among the groups that have corrected samples so far;
    # groups with no mistakes at all are left to the retention pass
    all_groups = sorted(by_group)
    floor = (
        config.per_group_floor
        if config.per_group_floor is not None
        else (max(by_group.values()) if by_group else 0)
    )
    for group in all_groups:
        count = by_group.get(group, 0)
        if count >= floor:
            continue
        pool = [
            t for t in available
            if t.trajectory_id not in used and tasks_by_id[t.task_id].group == group
        ]
        pool.sort(
            key=lambda t: (-config.failure_priority.get(t.task_id, 0), t.trajectory_id)
        )
        while by_group.get(group, 0) < floor and pool:
            take(pool.pop(0), report.added_pass2)
            touched_groups.add(group)
        if by_group.get(group, 0) < floor:
            report.shortfalls.append(
                f"group {group}: {by_group.get(group, 0)} < floor {floor}"
            )

    # Pass 3: retention quota from groups untouched so far
    corrected_groups = {tasks_by_id[s.task_id].group for s in corrected}
    untouched = [
        t for t in available
        if t.trajectory_id not in used
        and tasks_by_id[t.task_id].group not in (touched_groups | corrected_groups)
    ]
    rng.shuffle(untouched)
    for t in untouched[: config.retention_quota]:
        take(t, report.added_pass3)

    added_samples = harvest(chosen)
    return list(corrected) + added_samples


# -- split and export ---------------------------------------------------------


@dataclass
class DatasetManifest:
    dataset_id: str
    round_index: int
    mode: str  # kl | cross-entropy
    counts_per_group: dict[str, int]
    counts_per_hint: dict[str, int]
    split_sizes: dict[str, int]
    dropout_p: float
    seed: int
    source_trajectory_ids: list[str]
    source_finding_ids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset_id": self.dataset_id,
            "round_index": self.round_index,
            "mode": self.mode,
            "counts_per_group": dict(sorted(self.counts_per_group.items())),
            "counts_per_hint": dict(sorted(self.counts_per_hint.items())),
            "split_sizes": dict(self.split_sizes),
            "dropout_p": self.dropout_p,
            "seed": self.seed,
            "source_trajectory_ids": sorted(set(self.source_trajectory_ids)),
            "source_finding_ids": sorted(set(self.source_finding_ids)),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        return cls(
            dataset_id=d["dataset_id"],
            round_index=d["round_index"],
            mode=d["mode"],
            counts_per_group=d["counts_per_group"],
            counts_per_hint=d["counts_per_hint"],
            split_sizes=d["split_sizes"],
            dropout_p=d["dropout_p"],
            seed=d["seed"],
            source_trajectory_ids=d["source_trajectory_ids"],
            source_finding_ids=d.get("source_finding_ids", []),
        )


def _sample_hash(dataset_id: str, sample_id: str) -> str:
    return hashlib.sha256(f"{dataset_id}:{sample_id}".encode()).hexdigest()


def split_and_export(
    samples: list[DistillSample],
    val_fraction: float,
    mode: str,
    dataset_id: str,
    out_dir: str | Path,
    tasks_by_id: dict[str, Task],
    dropout_p: float = 0.9,
    seed: int = 0,
    finding_ids: Optional[list[str]] = None,
) -> DatasetManifest:
    """Deterministic hash split and JSONL export; cross-entropy mode drops
    teacher contexts and refuses failure-sourced samples."""
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")
    if mode not in ("kl", "cross-entropy"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "cross-entropy":
        for s in samples:
            if s.source_success is not True:
                raise ExportError(
                    f"cross-entropy export requires success-sourced samples; "
                    f"{s.sample_id} has source_success={s.source_success}"
                )
    for s in samples:
        _assert_action_boundary(s)

    materialized: list[DistillSample] = []
    for s in samples:
        if not s.corrective and s.hint_ids:
            materialized.append(apply_hint_dropout(s, dropout_p, seed, epoch=0))
        else:
            materialized.append(s)

    ordered = sorted(materialized, key=lambda s: _sample_hash(dataset_id, s.sample_id))
    n_val = round(len(ordered) * val_fraction)
    val = sorted(ordered[:n_val], key=lambda s: s.sample_id)
    train = sorted(ordered[n_val:], key=lambda s: s.sample_id)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, chunk in (("train", train), ("val", val)):
        lines = [json.dumps(s.to_json(mode), sort_keys=True) for s in chunk]
        (out / f"{name}.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))

    counts_group: dict[str, int] = {}
    counts_hint: dict[str, int] = {}
    for s in materialized:
        g = tasks_by_id[s.task_id].group
        counts_group[g] = counts_group.get(g, 0) + 1
        for h in s.hint_ids:
            counts_hint[h] = counts_hint.get(h, 0) + 1
    manifest = DatasetManifest(
        dataset_id=dataset_id,
        round_index=materialized[0].round_index if materialized else 0,
        mode=mode,
        counts_per_group=counts_group,
        counts_per_hint=counts_hint,
        split_sizes={"train": len(train), "val": len(val)},
        dropout_p=dropout_p,
        seed=seed,
        source_trajectory_ids=[s.state.trajectory_id for s in materialized],
        source_finding_ids=finding_ids or [],
    )
    (out / "manifest.json").write_text(json.dumps(manifest.to_json(), sort_keys=True, indent=1))
    return manifest


def _assert_action_boundary(sample: DistillSample) -> None:
    """The supervised action must start at a message boundary: the last
    context message is not an assistant message, so tokenizing context+action
    yields identical action token ids for teacher and student views."""
    for msgs, label in ((sample.teacher_messages, "teacher"),
                        (sample.student_messages, "student")):
        if not msgs:
            raise AlignmentError(f"{sample.sample_id}: empty {label} context")
        if msgs[-1].role == "assistant":
            raise AlignmentError(
                f"{sample.sample_id}: {label} context ends in an assistant message; "
                f"the action would not start at a message boundary"
            )


def is_student_derivable(sample: DistillSample) -> bool:
    """Structural check: student messages are a subsequence of teacher messages
    where the first message may differ only by deleted hint sections."""
    t_msgs, s_msgs = sample.teacher_messages, sample.student_messages
    if sample.corrective:
        if len(s_msgs) != len(t_msgs) - 1:
            return False
        deleted = [m for m in t_msgs if m not in s_msgs]
        it = iter(t_msgs)
        if not all(any(m == x for x in it) for m in s_msgs):
            return False
        return len(deleted) >= 1
    if len(s_msgs) != len(t_msgs):
        return False
    if t_msgs[1:] != s_msgs[1:]:
        return False
    t_parts = _split_guidelines(t_msgs[0].content)
    if t_parts is None:
        return t_msgs[0] == s_msgs[0]
    s_parts = _split_guidelines(s_msgs[0].content)
    if s_parts is not None and (t_parts[0], t_parts[2]) != (s_parts[0], s_parts[2]):
        return False
    if s_parts is None:
        if drop_sections(t_msgs, (False,) * len(
                t_parts[1].split(HINT_SEPARATOR)))[0] != s_msgs[0]:
            return False
    t_sections = t_parts[1].split(HINT_SEPARATOR)
    s_sections = s_parts[1].split(HINT_SEPARATOR) if s_parts else []
    it = iter(t_sections)
    return all(any(sec == x for x in it) for sec in s_sections)


# -- diagnostic KL ------------------------------------------------------------


def kl_from_topk(
    teacher_tokens: list[dict[str, float]],
    student_tokens: list[dict[str, float]],
) -> tuple[float, list[float]]:
    """Forward KL over the teacher's truncated support, renormalized on both
    sides; returns (mean over tokens, per-token series). Logprob inputs."""
    if len(teacher_tokens) != len(student_tokens):
        raise AlignmentError(
            f"token-sequence mismatch: {len(teacher_tokens)} teacher vs "
            f"{len(student_tokens)} student positions"
        )
    series: list[float] = []
    for i, (t, s) in enumerate(zip(teacher_tokens, student_tokens)):
        support = sorted(t)
        missing = [v for v in support if v not in s]
        if missing:
            raise AlignmentError(f"position {i}: student lacks tokens {missing}")
        t_probs = [math.exp(t[v]) for v in support]
        s_probs = [math.exp(s[v]) for v in support]
        t_z, s_z = sum(t_probs), sum(s_probs)
        kl = sum(
            (tp / t_z) * (math.log(tp / t_z) - math.log(sp / s_z))
            for tp, sp in zip(t_probs, s_probs)
            if tp > 0
        )
        series.append(max(kl, 0.0) if kl > -1e-12 else kl)
    mean = sum(series) / len(series) if series else 0.0
    return mean, series


def diagnostic_kl(sample: DistillSample,
                  student_tokens: list[dict[str, float]]) -> tuple[float, list[float]]:
    """Diagnostic-only KL between the sample's captured teacher top-K and
    student logprobs for the action tokens (training-grade KL lives in the
    trainer, which recomputes full distributions)."""
    if sample.teacher_token_logprobs is None:
        raise AlignmentError(f"{sample.sample_id}: no teacher logprobs captured")
    return kl_from_topk(sample.teacher_token_logprobs, student_tokens)
