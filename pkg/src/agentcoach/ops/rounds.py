"""Round orchestration per the coaching algorithm: round 1 samples teacher
rollouts with initial hints and exports a distillation dataset; rounds >= 2
sample hint-free rollouts, localize mistakes with filters, inject the bound
corrective hints at flagged states, harvest corrective samples, balance, and
export. Training is a handoff: each round's manifest is written with
model_tag_out unset and the next round is blocked until a trainer registers
the produced model tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from ..distill import (
    BalanceConfig,
    BalanceReport,
    DatasetManifest,
    DistillSample,
    balance_dataset,
    harvest_corrective,
    harvest_round1,
    split_and_export,
)
from ..gateway import CompletionParams
from ..model import MistakeFinding, ModelTag, RoundManifest, StateRef, Task, Trajectory
from ..review import FilterSpec, JudgeError, collect_flagged_states, run_filters
from ..runtime import ActionSample, AgentRuntime, PromptProfile
from ..store import RunStore


class RoundError(RuntimeError):
    pass


class AwaitingTrainerError(RoundError):
    """The previous round's model_tag_out has not been registered yet."""


@dataclass
class RoundPlan:
    round_index: int
    model_tag_in: ModelTag
    rollouts_per_task: int = 3
    m_per_state: int = 3
    temperature: float = 0.0
    dropout_p: float = 0.9
    val_fraction: float = 0.1
    mode: str = "kl"
    seed: int = 0
    cap_per_filter: int = 16
    failed_only: bool = False
    task_split: str = "train"
    filters: tuple[FilterSpec, ...] = ()
    judge_model: Optional[ModelTag] = None
    balance: BalanceConfig = field(default_factory=lambda: BalanceConfig(enabled=False))

    def validate(self) -> None:
        if self.round_index < 1:
            raise RoundError("round_index must be >= 1")
        if self.round_index == 1 and self.filters:
            raise RoundError("round 1 takes no filter file")
        if self.round_index >= 2 and not self.filters:
            raise RoundError(f"round {self.round_index} requires a filter file")

    def snapshot(self) -> dict:
        return {
            "round_index": self.round_index,
            "model_tag_in": self.model_tag_in.name,
            "rollouts_per_task": self.rollouts_per_task,
            "m_per_state": self.m_per_state,
            "temperature": self.temperature,
            "dropout_p": self.dropout_p,
            "val_fraction": self.val_fraction,
            "mode": self.mode,
            "seed": self.seed,
            "cap_per_filter": self.cap_per_filter,
            "failed_only": self.failed_only,
            "task_split": self.task_split,
            "filter_ids": [f.filter_id for f in self.filters],
            "balance_enabled": self.balance.enabled,
        }


@dataclass
class RoundResult:
    manifest: RoundManifest
    dataset_manifest: DatasetManifest
    trajectories: list[Trajectory]
    findings: list[MistakeFinding] = field(default_factory=list)
    flagged_states: list[StateRef] = field(default_factory=list)
    samples: list[DistillSample] = field(default_factory=list)
    balance_report: Optional[BalanceReport] = None
    judge_errors: list[JudgeError] = field(default_factory=list)
    resumed: bool = False


def latest_manifest(store: RunStore, round_index: int) -> Optional[RoundManifest]:
    found = None
    for m in store.manifests():
        if m.round_index == round_index:
            found = m  # last record wins (append-only supersession)
    return found


def awaiting_model_tag(store: RunStore, round_index: int) -> bool:
    m = latest_manifest(store, round_index)
    return m is not None and m.model_tag_out is None


def register_model_tag(store: RunStore, round_index: int, tag_name: str) -> RoundManifest:
    """Trainer handoff completion: supersede the round manifest with the
    produced model tag, unblocking the next round."""
    m = latest_manifest(store, round_index)
    if m is None:
        raise RoundError(f"no manifest for round {round_index}")
    if m.model_tag_out is not None:
        raise RoundError(
            f"round {round_index} already has model_tag_out={m.model_tag_out!r}"
        )
    updated = replace(m, model_tag_out=tag_name)
    store.append(updated)
    return updated


def _dataset_id(plan: RoundPlan) -> str:
    return f"round-{plan.round_index}-{plan.mode}"


def run_round(
    plan: RoundPlan,
    tasks: list[Task],
    runtime: AgentRuntime,
    store: RunStore,
    balance_candidates: Optional[list[Trajectory]] = None,
) -> RoundResult:
    """Executes one coaching round and writes the dataset + manifest.

    Rerunning a completed plan is a no-op returning the stored manifest (the
    exported dataset is byte-identical for a fixed seed anyway)."""
    plan.validate()
    if plan.round_index >= 2 and awaiting_model_tag(store, plan.round_index - 1):
        raise AwaitingTrainerError(
            f"round {plan.round_index - 1} is awaiting model_tag_out"
        )
    existing = latest_manifest(store, plan.round_index)
    if existing is not None and existing.config_snapshot == plan.snapshot():
        dataset = DatasetManifest.from_json(
            json.loads((store.dataset_dir(_dataset_id(plan)) / "manifest.json").read_text())
        )
        return RoundResult(
            manifest=existing, dataset_manifest=dataset,
            trajectories=[], resumed=True,
        )

    tasks = [t for t in tasks if t.split == plan.task_split]
    if not tasks:
        raise RoundError(f"no tasks in split {plan.task_split!r}")
    tasks_by_id = {t.task_id: t for t in tasks}
    params = CompletionParams(temperature=plan.temperature)

    if plan.round_index == 1:
        return _run_round1(plan, tasks, tasks_by_id, runtime, store, params)
    return _run_round_n(
        plan, tasks, tasks_by_id, runtime, store, params, balance_candidates or []
    )


def _sample_rollouts(
    plan: RoundPlan,
    tasks: list[Task],
    runtime: AgentRuntime,
    store: RunStore,
    params: CompletionParams,
    profile_for,
    id_prefix: str,
) -> list[Trajectory]:
    out = []
    for task in tasks:
        for r in range(plan.rollouts_per_task):
            trajectory = runtime.run_trajectory(
                task,
                plan.model_tag_in,
                profile_for(task),
                seed=plan.seed * 10_000 + r,
                trajectory_id=f"{id_prefix}-{task.task_id}-{r}",
                params=params,
            )
            store.append(trajectory)
            out.append(trajectory)
    return out


def _run_round1(plan, tasks, tasks_by_id, runtime, store, params) -> RoundResult:
    def profile_for(task: Task) -> PromptProfile:
        return PromptProfile(hint_profile=runtime.registry.select_initial_hints(task))

    trajectories = _sample_rollouts(
        plan, tasks, runtime, store, params, profile_for, f"r{plan.round_index}"
    )
    harvest_profile = PromptProfile(hint_profile=profile_for(tasks[0]).hint_profile)
    samples = harvest_round1(
        trajectories, tasks_by_id, runtime, harvest_profile,
        plan.model_tag_in, round_index=plan.round_index,
    )
    dataset = split_and_export(
        samples, plan.val_fraction, plan.mode, _dataset_id(plan),
        store.dataset_dir(_dataset_id(plan)), tasks_by_id,
        dropout_p=plan.dropout_p, seed=plan.seed,
    )
    hint_ids = sorted({h for s in samples for h in s.hint_ids})
    manifest = RoundManifest(
        round_index=plan.round_index,
        model_tag_in=plan.model_tag_in.name,
        model_tag_out=None,
        dataset_ids=(dataset.dataset_id,),
        filter_ids=(),
        hint_ids=tuple(hint_ids),
        counts={
            "trajectories": len(trajectories),
            "samples": len(samples),
            "train": dataset.split_sizes["train"],
            "val": dataset.split_sizes["val"],
        },
        config_snapshot=plan.snapshot(),
    )
    store.append(manifest)
    return RoundResult(
        manifest=manifest, dataset_manifest=dataset,
        trajectories=trajectories, samples=samples,
    )


def _run_round_n(
    plan, tasks, tasks_by_id, runtime, store, params, balance_candidates
) -> RoundResult:
    hint_free = PromptProfile(hint_profile=None)
    trajectories = _sample_rollouts(
        plan, tasks, runtime, store, params,
        lambda task: hint_free, f"r{plan.round_index}-hf",
    )

    judge_errors: list[JudgeError] = []
    findings = run_filters(
        list(plan.filters), trajectories, tasks_by_id, plan.round_index,
        gateway=runtime.gateway, judge_model=plan.judge_model,
        failed_only=plan.failed_only, judge_errors=judge_errors,
    )
    for f in findings:
        store.append(f)
    flagged, attribution = collect_flagged_states(
        findings,
        cap_per_filter=plan.cap_per_filter,
        filter_priority=[f.filter_id for f in plan.filters],
    )

    by_id = {t.trajectory_id: t for t in trajectories}
    action_samples: list[ActionSample] = []
    for state in flagged:
        trajectory = by_id[state.trajectory_id]
        task = tasks_by_id[trajectory.task_id]
        hint = runtime.registry.resolve_hint(state, plan.round_index, attribution)
        action_samples.extend(
            runtime.inject_hint_and_continue(
                trajectory, task, state, hint, plan.model_tag_in, hint_free,
                replace(params, seed=plan.seed), m=plan.m_per_state,
            )
        )
    source_success = {t.trajectory_id: bool(t.success) for t in trajectories}
    corrected = harvest_corrective(
        action_samples, tasks_by_id, plan.round_index, source_success
    )

    balance_report = BalanceReport()
    failure_priority = {}
    for t in trajectories:
        if t.success is False:
            failure_priority[t.task_id] = failure_priority.get(t.task_id, 0) + 1
    balance_cfg = replace(plan.balance, failure_priority=failure_priority)

    def harvest_extra(chosen: list[Trajectory]) -> list[DistillSample]:
        profile = PromptProfile(
            hint_profile=runtime.registry.select_initial_hints(tasks[0])
        )
        return harvest_round1(
            chosen, tasks_by_id, runtime, profile, plan.model_tag_in,
            round_index=plan.round_index,
        )

    samples = balance_dataset(
        corrected, balance_candidates, balance_cfg, tasks_by_id,
        harvest_extra, report=balance_report,
    )
    dataset = split_and_export(
        samples, plan.val_fraction, plan.mode, _dataset_id(plan),
        store.dataset_dir(_dataset_id(plan)), tasks_by_id,
        dropout_p=plan.dropout_p, seed=plan.seed,
        finding_ids=[f.finding_id for f in findings],
    )
    hint_ids = sorted({h for s in samples for h in s.hint_ids})
    manifest = RoundManifest(
        round_index=plan.round_index,
        model_tag_in=plan.model_tag_in.name,
        model_tag_out=None,
        dataset_ids=(dataset.dataset_id,),
        filter_ids=tuple(f.filter_id for f in plan.filters),
        hint_ids=tuple(hint_ids),
        counts={
            "trajectories": len(trajectories),
            "findings": len(findings),
            "flagged_states": len(flagged),
            "corrective_samples": len(corrected),
            "samples": len(samples),
            "train": dataset.split_sizes["train"],
            "val": dataset.split_sizes["val"],
        },
        config_snapshot=plan.snapshot(),
    )
    store.append(manifest)
    return RoundResult(
        manifest=manifest, dataset_manifest=dataset,
        trajectories=trajectories, findings=findings,
        flagged_states=flagged, samples=samples,
        balance_report=balance_report, judge_errors=judge_errors,
    )
