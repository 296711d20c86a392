"""Evaluation harness: trial aggregation, standard errors, usage tables."""

import pytest

from agentcoach.evalbench import Report, TrialResult, run_trials, summarize, usage_report
from agentcoach.model import Task
from agentcoach.runtime import PromptProfile

from conftest import make_runtime


def _tasks(n=10, group="g1"):
    return [
        Task(f"t{i}", group, "tmpl", "d", "a", "train", ("complete_task",))
        for i in range(n)
    ]


def _trial(tasks, rate, seed):
    n_pass = round(rate / 100 * len(tasks))
    return TrialResult(
        model_tag="m",
        profile_label="default",
        trial_seed=seed,
        successes={t.task_id: i < n_pass for i, t in enumerate(tasks)},
        usage={t.task_id: {"input_tokens": 100, "output_tokens": 10} for t in tasks},
        aborted={t.task_id: False for t in tasks},
    )


class TestSummarize:
    def test_oracle_three_trials(self):
        # trial means 80, 90, 100 -> mean 90.0, SE = stdev([80,90,100])/sqrt(3)
        tasks = _tasks(10)
        trials = [_trial(tasks, r, i) for i, r in enumerate((80, 90, 100))]
        report = summarize(trials, tasks)
        assert report.average == pytest.approx(90.0)
        assert report.average_se == pytest.approx(5.773502691896258)
        assert report.per_group_mean["g1"] == pytest.approx(90.0)
        assert report.per_group_se["g1"] == pytest.approx(5.773502691896258)

    def test_single_trial_se_zero(self):
        tasks = _tasks(4)
        report = summarize([_trial(tasks, 75, 0)], tasks)
        assert report.average == pytest.approx(75.0)
        assert report.average_se == 0.0
        assert report.n_trials == 1

    def test_task_weighted_average(self):
        # 8 tasks in g1 all pass, 2 in g2 all fail: average is 80, not 50
        tasks = _tasks(8, "g1") + [
            Task(f"x{i}", "g2", "tmpl", "d", "a", "train", ("complete_task",))
            for i in range(2)
        ]
        successes = {t.task_id: t.group == "g1" for t in tasks}
        trial = TrialResult("m", "default", 0, successes,
                            {t.task_id: {"input_tokens": 1, "output_tokens": 1}
                             for t in tasks},
                            {t.task_id: False for t in tasks})
        report = summarize([trial], tasks)
        assert report.average == pytest.approx(80.0)
        assert report.per_group_mean["g1"] == pytest.approx(100.0)
        assert report.per_group_mean["g2"] == pytest.approx(0.0)

    def test_usage_source_flagged_approximate(self):
        tasks = _tasks(2)
        report = summarize([_trial(tasks, 50, 0)], tasks)
        assert report.usage_source == "approximate-tokenizer"
        assert report.token_usage["mean_input_tokens"] == pytest.approx(100.0)

    def test_empty_trials_rejected(self):
        with pytest.raises(ValueError):
            summarize([], _tasks(1))


class TestRendering:
    def _report(self):
        tasks = _tasks(10)
        return summarize([_trial(tasks, r, i) for i, r in enumerate((80, 100))], tasks)

    def test_markdown_table_shape(self):
        md = self._report().to_markdown()
        lines = md.splitlines()
        assert lines[0].startswith("| g1 |") and "Avg." in lines[0]
        assert set(lines[1]) <= {"|", "-"}
        assert "90.0 ±" in lines[2]

    def test_markdown_n1_note(self):
        tasks = _tasks(3)
        md = summarize([_trial(tasks, 100, 0)], tasks).to_markdown()
        assert "n=1" in md

    def test_json_round_trip_keys(self):
        payload = self._report().to_json()
        assert payload["average"]["mean"] == 90.0
        assert payload["usage_source"] == "approximate-tokenizer"
        assert "g1" in payload["per_group"]


class TestRunTrials:
    def test_trials_cover_tasks_and_usage(self, world, tasks, solutions, teacher_tag):
        runtime = make_runtime(world, tasks, solutions)
        profile = PromptProfile(hint_profile=None)
        subset = tasks[:3]
        trials = run_trials(subset, teacher_tag, profile, runtime, 2, [0, 1])
        assert len(trials) == 2
        for trial in trials:
            trial.validate_against(subset)
            assert all(trial.successes.values())
            assert all(u["input_tokens"] > 0 for u in trial.usage.values())

    def test_seed_count_mismatch(self, world, tasks, solutions, teacher_tag):
        runtime = make_runtime(world, tasks, solutions)
        with pytest.raises(ValueError):
            run_trials(tasks[:1], teacher_tag, PromptProfile(hint_profile=None),
                       runtime, 2, [0])


class TestUsageReport:
    def test_per_profile_means(self):
        tasks = _tasks(4)
        table = usage_report({"with-hints": [_trial(tasks, 100, 0)],
                              "hint-free": []})
        assert table["with-hints"]["mean_input_tokens"] == pytest.approx(100.0)
        assert table["with-hints"]["tokenizer"] == "approximate"
        assert "hint-free" not in table  # empty profiles omitted, not zero-filled
