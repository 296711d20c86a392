"""Exit criteria for the coaching pipeline, verified end to end against the
scripted backend with the stated tolerances and runtime bounds."""

import math
import random
import time

import pytest

from agentcoach.actionlang import Interpreter
from agentcoach.actionlang.interp import MAX_OBSERVATION, TRUNCATION_SUFFIX, TableHandle
from agentcoach.actionlang.parser import MAX_STATEMENTS
from agentcoach.distill import dropout_mask_for, kl_from_topk
from agentcoach.evalbench import TrialResult, summarize
from agentcoach.gateway import ScriptedBehavior, ScriptedRule, count_message_tokens
from agentcoach.hints import HintRegistry
from agentcoach.model import Task
from agentcoach.ops.rounds import RoundPlan, run_round
from agentcoach.review import FilterSpec
from agentcoach.runtime import PromptProfile, assemble_prompt, compute_status
from agentcoach.scripted import HintOverride, MistakeSpec
from agentcoach.store import RunStore
from agentcoach.world import data_filter_rows

from conftest import ALL_GROUPS, make_runtime
from test_actionlang import random_program
from test_world import brute_force, random_condition


class TestDropoutStatistics:
    def test_empirical_rate_over_10000_draws(self):
        start = time.monotonic()
        draws = 0
        dropped = 0
        for i in range(1_000):
            mask = dropout_mask_for(f"sample-{i}", 0.9, seed=42, n_sections=10)
            draws += len(mask)
            dropped += sum(1 for kept in mask if not kept)
        elapsed = time.monotonic() - start
        assert draws == 10_000
        assert abs(dropped / draws - 0.9) <= 0.01
        assert elapsed < 5.0

    def test_trivial_cases_exact(self):
        for i in range(100):
            assert dropout_mask_for(f"s{i}", 0.0, 0, 10) == (True,) * 10
            assert dropout_mask_for(f"s{i}", 1.0, 0, 10) == (False,) * 10


class TestFilterConditionOracle:
    def test_1000_random_queries_match_brute_force(self, world):
        start = time.monotonic()
        rng = random.Random(2024)
        tables = [world.tables[n] for n in ("flights", "coffee", "businesses")]
        mismatches = 0
        for _ in range(1_000):
            table = rng.choice(tables)
            handle = TableHandle(table.name, table.columns, table.rows)
            condition = random_condition(rng, table)
            if data_filter_rows(handle, condition) != brute_force(table, condition):
                mismatches += 1
        elapsed = time.monotonic() - start
        assert mismatches == 0
        assert elapsed < 30.0


def _round1_registry():
    registry = HintRegistry()
    registry.new_initial(
        "Narrow the data with data_filter before extracting values.", ALL_GROUPS
    )
    registry.new_initial(
        "Answer with the literal text you observed.", ALL_GROUPS
    )
    return registry


class TestScriptedRound1:
    def test_counts_and_byte_identical_export(self, world, tasks, solutions,
                                              teacher_tag, tmp_path):
        start = time.monotonic()
        assert len(tasks) == 12

        def run_once(run_dir):
            runtime = make_runtime(world, tasks, solutions, _round1_registry())
            store = RunStore(run_dir)
            plan = RoundPlan(round_index=1, model_tag_in=teacher_tag,
                             rollouts_per_task=3, seed=11)
            return run_round(plan, tasks, runtime, store), store

        result_a, store_a = run_once(tmp_path / "a")
        result_b, store_b = run_once(tmp_path / "b")

        assert len(result_a.trajectories) == 36
        assert len(store_a.trajectories()) == 36
        assert len(result_a.samples) == sum(
            len(t.steps) for t in result_a.trajectories
        )
        for name in ("train.jsonl", "val.jsonl", "manifest.json"):
            a = (store_a.dataset_dir("round-1-kl") / name).read_bytes()
            b = (store_b.dataset_dir("round-1-kl") / name).read_bytes()
            assert a == b, f"{name} not byte-identical across runs"
        assert time.monotonic() - start < 60.0


MISTAKE_OBS = "unknown tool 'data_fetch'"
HINT_TEXT = (
    "Only call the documented tools; there is no data_fetch tool. "
    "Use the documented call for this step instead."
)

JUDGE_FILTER = FilterSpec(
    filter_id="judge-unknown-tool",
    kind="llm-judge",
    description="the agent invented a tool that is not documented",
    judge_prompt="You check agent steps for this mistake: {description}. "
                 "Answer <answer>True</answer> if the last step is fine and "
                 "<answer>False</answer> if it shows the mistake.",
)


def _judge_behavior(chosen, solutions):
    """Flags a prefix exactly when its *last* step is the planted mistake:
    once the recovery (the original first cell) appears after the mistake,
    an earlier pass rule wins."""
    rules = [
        ScriptedRule((MISTAKE_OBS, solutions[t.task_id][0][0]),
                     "<reasoning>recovered afterwards</reasoning>"
                     "<answer>True</answer>")
        for t in chosen
    ]
    rules.append(ScriptedRule(MISTAKE_OBS,
                              "<reasoning>undocumented tool call</reasoning>"
                              "<answer>False</answer>"))
    return ScriptedBehavior(rules=rules,
                            default_response="<answer>True</answer>")


class TestScriptedRound2:
    @pytest.fixture
    def round2(self, world, tasks, solutions, teacher_tag, tmp_path):
        start = time.monotonic()
        chosen = tasks[:5]
        mistakes = [
            MistakeSpec(t.task_id, 1, "I will fetch everything in one call.",
                        'data_fetch("all")', resume=True)
            for t in chosen
        ]
        overrides = [
            HintOverride(t.task_id, 1, "no data_fetch tool",
                         solutions[t.task_id][0][0], solutions[t.task_id][0][1])
            for t in chosen
        ]
        registry = _round1_registry()
        registry.bind_corrective_hint("judge-unknown-tool", HINT_TEXT,
                                      round_index=2)
        runtime = make_runtime(world, tasks, solutions, registry,
                               mistakes=mistakes, hint_overrides=overrides)
        runtime.gateway.register_scripted("judge", _judge_behavior(chosen, solutions))
        judge_tag = type(teacher_tag)("judge", 0, "scripted", "inline")
        store = RunStore(tmp_path)
        from agentcoach.ops.rounds import register_model_tag
        run_round(RoundPlan(1, teacher_tag, rollouts_per_task=1), tasks,
                  runtime, store)
        register_model_tag(store, 1, "student-r1")
        plan = RoundPlan(2, teacher_tag, rollouts_per_task=1, m_per_state=3,
                         filters=(JUDGE_FILTER,), judge_model=judge_tag)
        result = run_round(plan, tasks, runtime, store)
        assert time.monotonic() - start < 60.0
        return chosen, result

    def test_judge_flags_exactly_five_known_states(self, round2):
        chosen, result = round2
        assert len(result.flagged_states) == 5
        expected = {f"r2-hf-{t.task_id}-0" for t in chosen}
        assert {s.trajectory_id for s in result.flagged_states} == expected
        assert all(s.step_index == 1 for s in result.flagged_states)
        assert not result.judge_errors

    def test_exactly_15_corrective_samples(self, round2):
        _, result = round2
        assert result.manifest.counts["corrective_samples"] == 15
        assert len(result.samples) == 15

    def test_student_differs_by_exactly_the_hint_message(self, round2):
        _, result = round2
        for s in result.samples:
            assert len(s.teacher_messages) == len(s.student_messages) + 1
            extra = [m for m in s.teacher_messages if m not in s.student_messages]
            assert len(extra) == 1
            assert extra[0].content == HINT_TEXT
            # everything else is shared, in order
            it = iter(s.teacher_messages)
            assert all(any(m == x for x in it) for m in s.student_messages)


class TestEvaluationMath:
    @staticmethod
    def _trials():
        tasks = [
            Task(f"t{i}", "g", "tmpl", "d", "a", "train", ("complete_task",))
            for i in range(10)
        ]
        trials = []
        for seed, rate in enumerate((80, 90, 100)):
            n_pass = rate // 10
            trials.append(TrialResult(
                "m", "default", seed,
                {t.task_id: i < n_pass for i, t in enumerate(tasks)},
                {t.task_id: {"input_tokens": 1, "output_tokens": 1} for t in tasks},
                {t.task_id: False for t in tasks},
            ))
        return tasks, trials

    def test_mean_and_se_oracle(self):
        tasks, trials = self._trials()
        report = summarize(trials, tasks)
        assert abs(report.average - 90.0) <= 0.05
        # closed form: stdev([80, 90, 100]) / sqrt(3) = 10 / sqrt(3) = 5.7735
        assert abs(report.average_se - 10.0 / math.sqrt(3)) <= 0.05
        assert f"{report.average_se:.1f}" == "5.8"

    def test_rendered_cells_match_raw_flags(self):
        tasks, trials = self._trials()
        report = summarize(trials, tasks)
        raw_mean = 100.0 * sum(
            sum(t.successes.values()) for t in trials
        ) / (len(trials) * len(tasks))
        rendered = report.to_markdown().splitlines()[2]
        cell = rendered.split("|")[-2].strip().split(" ± ")
        assert abs(float(cell[0]) - raw_mean) <= 0.05
        assert abs(float(cell[1]) - report.average_se) <= 0.05


class TestDiagnosticKL:
    def test_two_token_oracle(self):
        teacher = [{"a": math.log(0.9), "b": math.log(0.1)}]
        student = [{"a": math.log(0.5), "b": math.log(0.5)}]
        mean, _ = kl_from_topk(teacher, student)
        assert abs(mean - 0.368) <= 1e-3

    def test_self_kl_zero_and_nonnegative(self):
        rng = random.Random(7)
        for _ in range(50):
            weights = [rng.uniform(0.05, 1.0) for _ in range(4)]
            z = sum(weights)
            p = [{f"tok{i}": math.log(w / z) for i, w in enumerate(weights)}]
            mean, series = kl_from_topk(p, [dict(p[0])])
            assert abs(mean) <= 1e-9
            q_weights = [rng.uniform(0.05, 1.0) for _ in range(4)]
            qz = sum(q_weights)
            q = [{f"tok{i}": math.log(w / qz) for i, w in enumerate(q_weights)}]
            mean_pq, series_pq = kl_from_topk(p, q)
            assert mean_pq >= 0
            assert all(v >= 0 for v in series_pq)


class TestTokenFootprintDirection:
    def test_hint_free_prompts_strictly_smaller(self, world, tasks, solutions,
                                                teacher_tag):
        registry = _round1_registry()
        runtime = make_runtime(world, tasks, solutions, registry)
        hint_free = PromptProfile(hint_profile=None)
        totals = {"hints": 0, "none": 0}
        for task in tasks:
            with_hints = PromptProfile(
                hint_profile=registry.select_initial_hints(task)
            )
            for label, profile in (("hints", with_hints), ("none", hint_free)):
                status = compute_status(task, profile, [], 1, runtime.registry)
                messages = assemble_prompt(task, profile, [], status,
                                           runtime.registry)
                totals[label] += count_message_tokens(teacher_tag, messages)
        n = len(tasks)
        assert totals["none"] / n < totals["hints"] / n

    def test_direction_holds_over_full_rollouts(self, world, tasks, solutions,
                                                teacher_tag):
        registry = _round1_registry()
        runtime = make_runtime(world, tasks, solutions, registry)
        means = {}
        for label in ("hints", "none"):
            total = 0
            for task in tasks[:4]:
                profile = PromptProfile(
                    hint_profile=registry.select_initial_hints(task)
                    if label == "hints" else None
                )
                tid = f"footprint-{label}-{task.task_id}"
                runtime.run_trajectory(task, teacher_tag, profile, 0, tid)
                total += runtime.gateway.ledger.trajectory_totals(tid)["input_tokens"]
            means[label] = total / 4
        assert means["none"] < means["hints"]


class TestActionLanguageDeterminism:
    def test_1000_programs_execute_twice_identically(self):
        rng = random.Random(20240917)
        for _ in range(1_000):
            source = random_program(rng)
            a = Interpreter().run_source(source)
            b = Interpreter().run_source(source)
            assert a.observation == b.observation
            assert a.error == b.error

    def test_statement_33_rejected(self):
        ok = "\n".join(f"v{i} = {i}" for i in range(MAX_STATEMENTS))
        assert Interpreter().run_source(ok).error is None
        over = ok + f"\nv{MAX_STATEMENTS} = 1"
        result = Interpreter().run_source(over)
        assert result.error is not None
        assert result.error.kind == "parse"
        assert str(MAX_STATEMENTS) in result.error.message

    def test_observation_truncated_at_documented_bound(self):
        long_literal = "x" * 10_000
        result = Interpreter().run_source(f"print('{long_literal}')")
        assert result.observation.endswith(TRUNCATION_SUFFIX)
        assert len(result.observation) == MAX_OBSERVATION + len(TRUNCATION_SUFFIX)
