"""Evaluation harness: trial sweeps, per-group and average success rates with
standard error across trials, and token-usage tables."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Optional

from .gateway import CompletionParams, Gateway
from .model import ModelTag, Task, Trajectory
from .runtime import AgentRuntime, PromptProfile


@dataclass
class TrialResult:
    model_tag: str
    profile_label: str
    trial_seed: int
    successes: dict[str, bool]  # task_id -> flag
    usage: dict[str, dict[str, int]]  # task_id -> {input_tokens, output_tokens}
    aborted: dict[str, bool] = field(default_factory=dict)

    def validate_against(self, tasks: list[Task]) -> None:
        expected = {t.task_id for t in tasks}
        if set(self.successes) != expected:
            raise ValueError("trial does not cover exactly the requested task set")


@dataclass
class Report:
    per_group_mean: dict[str, Optional[float]]  # percent; None for empty groups
    per_group_se: dict[str, Optional[float]]
    average: float  # task-weighted percent
    average_se: float
    n_trials: int
    token_usage: dict[str, float]  # mean input/output per task
    usage_source: str
    abort_count: int
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        fmt = lambda x: None if x is None else round(x, 1)
        return {
            "per_group": {
                g: {"mean": fmt(self.per_group_mean[g]), "se": fmt(self.per_group_se[g])}
                for g in sorted(self.per_group_mean)
            },
            "average": {"mean": round(self.average, 1), "se": round(self.average_se, 1)},
            "n_trials": self.n_trials,
            "token_usage": {k: round(v, 1) for k, v in self.token_usage.items()},
            "usage_source": self.usage_source,
            "abort_count": self.abort_count,
            "config": self.config_echo,
        }

    def to_markdown(self) -> str:
        groups = sorted(g for g in self.per_group_mean)
        header = "| " + " | ".join(groups + ["Avg."]) + " |"
        rule = "|" + "---|" * (len(groups) + 1)
        cells = []
        for g in groups:
            m, se = self.per_group_mean[g], self.per_group_se[g]
            cells.append("—" if m is None else f"{m:.1f} ± {se:.1f}")
        cells.append(f"{self.average:.1f} ± {self.average_se:.1f}")
        note = "" if self.n_trials > 1 else "  (n=1: SE reported as 0.0)"
        return header + "\n" + rule + "\n| " + " | ".join(cells) + " |" + note


def run_trials(
    tasks: list[Task],
    model: ModelTag,
    profile: PromptProfile,
    runtime: AgentRuntime,
    n_trials: int,
    seeds: list[int],
    params: CompletionParams = CompletionParams(),
    profile_label: str = "default",
) -> list[TrialResult]:
    """Each trial runs every task once; trials are independent. Aborted
    trajectories count as failures and are tallied separately."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if len(seeds) != n_trials:
        raise ValueError("need exactly one seed per trial")
    trials: list[TrialResult] = []
    for trial, seed in enumerate(seeds):
        successes: dict[str, bool] = {}
        usage: dict[str, dict[str, int]] = {}
        aborted: dict[str, bool] = {}
        for task in tasks:
            trajectory_id = f"eval-{profile_label}-t{trial}-{task.task_id}"
            trajectory = runtime.run_trajectory(
                task, model, profile, seed, trajectory_id, params
            )
            successes[task.task_id] = bool(trajectory.success)
            usage[task.task_id] = runtime.gateway.ledger.trajectory_totals(trajectory_id)
            aborted[task.task_id] = trajectory.outcome.kind == "aborted"
        trials.append(
            TrialResult(
                model_tag=model.name,
                profile_label=profile_label,
                trial_seed=seed,
                successes=successes,
                usage=usage,
                aborted=aborted,
            )
        )
    return trials


def _se_of_means(means: list[float]) -> float:
    if len(means) < 2:
        return 0.0
    return statistics.stdev(means) / math.sqrt(len(means))


def summarize(
    trials: list[TrialResult],
    tasks: list[Task],
    config_echo: Optional[dict] = None,
) -> Report:
    """Means and SE. Average is task-weighted (mean over per-task flags across
    all groups); SE is the sample standard deviation of trial means / sqrt(n)."""
    if not trials:
        raise ValueError("need >= 1 trial")
    groups: dict[str, list[str]] = {}
    for t in tasks:
        groups.setdefault(t.group, []).append(t.task_id)

    per_group_trial_means: dict[str, list[float]] = {g: [] for g in groups}
    overall_trial_means: list[float] = []
    for trial in trials:
        flags = trial.successes
        all_ids = [t.task_id for t in tasks]
        overall_trial_means.append(
            100.0 * sum(flags[i] for i in all_ids) / len(all_ids) if all_ids else 0.0
        )
        for g, ids in groups.items():
            if ids:
                per_group_trial_means[g].append(
                    100.0 * sum(flags[i] for i in ids) / len(ids)
                )

    per_group_mean: dict[str, Optional[float]] = {}
    per_group_se: dict[str, Optional[float]] = {}
    for g, means in per_group_trial_means.items():
        if means:
            per_group_mean[g] = statistics.mean(means)
            per_group_se[g] = _se_of_means(means)
        else:
            per_group_mean[g] = None
            per_group_se[g] = None

    n_tasks = len(tasks)
    in_means, out_means = [], []
    abort_count = 0
    for trial in trials:
        in_means.append(sum(u["input_tokens"] for u in trial.usage.values()) / n_tasks)
        out_means.append(sum(u["output_tokens"] for u in trial.usage.values()) / n_tasks)
        abort_count += sum(trial.aborted.values())

    return Report(
        per_group_mean=per_group_mean,
        per_group_se=per_group_se,
        average=statistics.mean(overall_trial_means),
        average_se=_se_of_means(overall_trial_means),
        n_trials=len(trials),
        token_usage={
            "mean_input_tokens": statistics.mean(in_means) if in_means else 0.0,
            "mean_output_tokens": statistics.mean(out_means) if out_means else 0.0,
        },
        usage_source="approximate-tokenizer",
        abort_count=abort_count,
        config_echo=config_echo or {},
    )


def usage_report(trials_by_profile: dict[str, list[TrialResult]]) -> dict[str, dict]:
    """Per-profile mean input/output tokens per task, with provenance flag."""
    table: dict[str, dict] = {}
    for label, trials in trials_by_profile.items():
        total_in = total_out = n = 0
        for trial in trials:
            for u in trial.usage.values():
                total_in += u["input_tokens"]
                total_out += u["output_tokens"]
                n += 1
        if n == 0:
            continue
        table[label] = {
            "mean_input_tokens": total_in / n,
            "mean_output_tokens": total_out / n,
            "tasks_counted": n,
            "tokenizer": "approximate",
        }
    return table
