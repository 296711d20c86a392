"""Round orchestration, CLI subcommands, and the REST service."""

import json

import pytest
from fastapi.testclient import TestClient

from agentcoach.distill import BalanceConfig
from agentcoach.hints import HintRegistry
from agentcoach.model import ModelTag
from agentcoach.ops.cli import main
from agentcoach.ops.config import CoachConfig, load_tasks
from agentcoach.ops.rounds import (
    AwaitingTrainerError,
    RoundError,
    RoundPlan,
    awaiting_model_tag,
    latest_manifest,
    register_model_tag,
    run_round,
)
from agentcoach.ops.service import create_app
from agentcoach.review import FilterSpec, RuleCheck
from agentcoach.scripted import HintOverride, MistakeSpec, behavior_from_solutions
from agentcoach.store import RunStore

from conftest import ALL_GROUPS, make_runtime

MISTAKE_OBS = "unknown tool 'data_fetch'"
HINT_TEXT = (
    "Only call the documented tools; there is no data_fetch tool. "
    "Re-read the tool documentation and use the listed call."
)

UNKNOWN_TOOL_FILTER = FilterSpec(
    filter_id="unknown-tool",
    kind="rule",
    description="agent called an undocumented tool",
    checks=(RuleCheck(kind="contains", target="observation", value=MISTAKE_OBS),),
)


def _mistake_fixtures(tasks, solutions, n=5):
    """Step-1 mistakes on the first n tasks, with hint-conditioned recoveries."""
    chosen = tasks[:n]
    mistakes = [
        MistakeSpec(
            task_id=t.task_id,
            step_number=1,
            monologue="I will fetch everything in one call.",
            code='data_fetch("all")',
            resume=True,
        )
        for t in chosen
    ]
    overrides = [
        HintOverride(
            task_id=t.task_id,
            step_number=1,
            hint_snippet="no data_fetch tool",
            monologue=solutions[t.task_id][0][0],
            code=solutions[t.task_id][0][1],
        )
        for t in chosen
    ]
    return chosen, mistakes, overrides


def _registry_with_hints():
    registry = HintRegistry()
    registry.new_initial("Narrow the data with data_filter first.", ALL_GROUPS)
    return registry


class TestRound1:
    def test_counts_and_manifest(self, world, tasks, solutions, teacher_tag,
                                 tmp_path):
        runtime = make_runtime(world, tasks, solutions, _registry_with_hints())
        store = RunStore(tmp_path)
        plan = RoundPlan(round_index=1, model_tag_in=teacher_tag,
                         rollouts_per_task=3)
        result = run_round(plan, tasks, runtime, store)
        assert result.manifest.counts["trajectories"] == 36
        assert result.manifest.counts["samples"] == sum(
            len(t.steps) for t in result.trajectories
        )
        assert result.manifest.model_tag_out is None
        assert result.manifest.hint_ids == ("init-0001",)
        assert all(t.success for t in result.trajectories)
        assert (store.dataset_dir("round-1-kl") / "train.jsonl").exists()

    def test_rerun_is_idempotent_resume(self, world, tasks, solutions,
                                        teacher_tag, tmp_path):
        runtime = make_runtime(world, tasks, solutions, _registry_with_hints())
        store = RunStore(tmp_path)
        plan = RoundPlan(round_index=1, model_tag_in=teacher_tag,
                         rollouts_per_task=1)
        first = run_round(plan, tasks, runtime, store)
        again = run_round(plan, tasks, runtime, store)
        assert again.resumed is True
        assert again.manifest == first.manifest
        assert len(store.manifests()) == 1

    def test_round1_rejects_filters(self, teacher_tag):
        plan = RoundPlan(round_index=1, model_tag_in=teacher_tag,
                         filters=(UNKNOWN_TOOL_FILTER,))
        with pytest.raises(RoundError, match="no filter"):
            plan.validate()


class TestTrainerHandoff:
    def test_round2_blocked_until_tag_registered(self, world, tasks, solutions,
                                                 teacher_tag, tmp_path):
        runtime = make_runtime(world, tasks, solutions, _registry_with_hints())
        store = RunStore(tmp_path)
        run_round(RoundPlan(1, teacher_tag, rollouts_per_task=1), tasks,
                  runtime, store)
        assert awaiting_model_tag(store, 1)
        plan2 = RoundPlan(2, teacher_tag, rollouts_per_task=1,
                          filters=(UNKNOWN_TOOL_FILTER,))
        with pytest.raises(AwaitingTrainerError):
            run_round(plan2, tasks, runtime, store)
        register_model_tag(store, 1, "student-r1")
        assert not awaiting_model_tag(store, 1)
        assert latest_manifest(store, 1).model_tag_out == "student-r1"

    def test_double_registration_rejected(self, world, tasks, solutions,
                                          teacher_tag, tmp_path):
        runtime = make_runtime(world, tasks, solutions, _registry_with_hints())
        store = RunStore(tmp_path)
        run_round(RoundPlan(1, teacher_tag, rollouts_per_task=1), tasks,
                  runtime, store)
        register_model_tag(store, 1, "student-r1")
        with pytest.raises(RoundError, match="already has"):
            register_model_tag(store, 1, "student-r1b")

    def test_register_without_manifest(self, tmp_path):
        with pytest.raises(RoundError, match="no manifest"):
            register_model_tag(RunStore(tmp_path), 1, "x")


class TestRound2:
    @pytest.fixture
    def round2(self, world, tasks, solutions, teacher_tag, tmp_path):
        chosen, mistakes, overrides = _mistake_fixtures(tasks, solutions, n=5)
        registry = _registry_with_hints()
        registry.bind_corrective_hint("unknown-tool", HINT_TEXT, round_index=2)
        runtime = make_runtime(world, tasks, solutions, registry,
                               mistakes=mistakes, hint_overrides=overrides)
        store = RunStore(tmp_path)
        run_round(RoundPlan(1, teacher_tag, rollouts_per_task=1), tasks,
                  runtime, store)
        register_model_tag(store, 1, "student-r1")
        plan = RoundPlan(2, teacher_tag, rollouts_per_task=1, m_per_state=3,
                         filters=(UNKNOWN_TOOL_FILTER,))
        result = run_round(plan, tasks, runtime, store)
        return chosen, result

    def test_flags_exactly_the_mistake_states(self, round2):
        chosen, result = round2
        assert len(result.flagged_states) == 5
        flagged_tasks = set()
        for state in result.flagged_states:
            assert state.step_index == 1
            flagged_tasks.add(state.trajectory_id.split("r2-hf-")[1].rsplit("-", 1)[0])
        assert flagged_tasks == {t.task_id for t in chosen}

    def test_corrective_sample_counts(self, round2):
        _, result = round2
        assert result.manifest.counts["flagged_states"] == 5
        assert result.manifest.counts["corrective_samples"] == 15
        assert result.manifest.counts["samples"] == 15
        assert all(s.corrective for s in result.samples)

    def test_hint_changes_the_sampled_action(self, round2, tasks_by_id):
        chosen, result = round2
        solutions_first = {t.task_id for t in chosen}
        for s in result.samples:
            assert "data_fetch" not in s.action_text
            assert s.task_id in solutions_first

    def test_student_never_sees_the_hint(self, round2):
        _, result = round2
        for s in result.samples:
            assert all(HINT_TEXT not in m.content for m in s.student_messages)
            assert any(HINT_TEXT in m.content for m in s.teacher_messages)

    def test_manifest_records_filter_and_hint(self, round2):
        _, result = round2
        assert result.manifest.filter_ids == ("unknown-tool",)
        assert result.manifest.hint_ids == ("corr-0002",)


class TestBalancedRound2:
    def test_balance_tops_up_from_round1(self, world, tasks, solutions,
                                         teacher_tag, tmp_path):
        chosen, mistakes, overrides = _mistake_fixtures(tasks, solutions, n=2)
        registry = _registry_with_hints()
        registry.bind_corrective_hint("unknown-tool", HINT_TEXT, round_index=2)
        runtime = make_runtime(world, tasks, solutions, registry,
                               mistakes=mistakes, hint_overrides=overrides)
        store = RunStore(tmp_path)
        r1 = run_round(RoundPlan(1, teacher_tag, rollouts_per_task=1), tasks,
                       runtime, store)
        register_model_tag(store, 1, "student-r1")
        plan = RoundPlan(
            2, teacher_tag, rollouts_per_task=1, m_per_state=1,
            filters=(UNKNOWN_TOOL_FILTER,),
            balance=BalanceConfig(enabled=True, per_template_floor=0,
                                  per_group_floor=0, retention_quota=1),
        )
        result = run_round(plan, tasks, runtime, store,
                           balance_candidates=r1.trajectories)
        assert result.balance_report.added_pass3  # retention kicked in
        assert result.manifest.counts["samples"] > result.manifest.counts[
            "corrective_samples"]


# -- CLI ----------------------------------------------------------------------


def _build_run(tmp_path, with_filters=True):
    """Generate world/tasks/solutions/behavior files plus a config JSON the
    way an operator would, via the CLI."""
    world_path = tmp_path / "world.json"
    tasks_path = tmp_path / "tasks.json"
    solutions_path = tmp_path / "solutions.json"
    behavior_path = tmp_path / "behavior.json"
    assert main(["world", "gen", "--out", str(world_path), "--seed", "7"]) == 0
    assert main(["tasks", "gen", "--world", str(world_path), "--out",
                 str(tasks_path), "--solutions-out", str(solutions_path),
                 "--seed", "3"]) == 0
    assert main(["scripted", "gen", "--tasks", str(tasks_path), "--solutions",
                 str(solutions_path), "--out", str(behavior_path)]) == 0
    config = {
        "run_dir": "run",
        "world": "world.json",
        "tasks": "tasks.json",
        "hints": "hints.json",
        "models": {
            "teacher": {"name": "teacher", "round_index": 0,
                        "backend_kind": "scripted",
                        "endpoint_or_script": "behavior.json"},
        },
    }
    if with_filters:
        filters_path = tmp_path / "filters.json"
        filters_path.write_text(json.dumps({
            "filters": [{
                "filter_id": "unknown-tool",
                "kind": "rule",
                "description": "undocumented tool call",
                "rule": [{"kind": "contains", "target": "observation",
                          "value": MISTAKE_OBS}],
            }]
        }))
        config["filters"] = "filters.json"
    registry = _registry_with_hints()
    registry.bind_corrective_hint("unknown-tool", HINT_TEXT, round_index=2)
    registry.save(tmp_path / "hints.json")
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    return config_path


class TestCli:
    def test_agent_run_and_round_flow(self, tmp_path, capsys):
        cfg_path = _build_run(tmp_path)
        tasks = load_tasks(tmp_path / "tasks.json")
        capsys.readouterr()
        assert main(["agent", "run", "--config", str(cfg_path), "--task-id",
                     tasks[0].task_id, "--model", "teacher", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["outcome"]["kind"] == "completed"

        assert main(["round", "run", "--config", str(cfg_path), "--round", "1",
                     "--model", "teacher", "--rollouts", "1", "--json"]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["counts"]["trajectories"] == len(tasks)

        # round 2 is blocked until a trainer registers round 1's output tag
        assert main(["round", "run", "--config", str(cfg_path), "--round", "2",
                     "--model", "teacher", "--rollouts", "1"]) == 3
        store = RunStore(tmp_path / "run")
        register_model_tag(store, 1, "student-r1")
        assert main(["round", "run", "--config", str(cfg_path), "--round", "2",
                     "--model", "teacher", "--rollouts", "1", "--json"]) == 0
        manifest2 = json.loads(capsys.readouterr().out)
        assert manifest2["counts"]["flagged_states"] == 0  # clean behavior

    def test_review_and_dataset_build(self, tmp_path, capsys):
        cfg_path = _build_run(tmp_path)
        assert main(["round", "run", "--config", str(cfg_path), "--round", "1",
                     "--model", "teacher", "--rollouts", "1"]) == 0
        capsys.readouterr()
        assert main(["review", "run", "--config", str(cfg_path),
                     "--round", "2", "--json"]) == 0
        findings = json.loads(capsys.readouterr().out)
        assert findings == {"findings": []}
        assert main(["dataset", "build", "--config", str(cfg_path),
                     "--round", "1", "--model", "teacher", "--json"]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["split_sizes"]["train"] > 0

    def test_eval_run_json(self, tmp_path, capsys):
        cfg_path = _build_run(tmp_path, with_filters=False)
        capsys.readouterr()
        assert main(["eval", "run", "--config", str(cfg_path), "--model",
                     "teacher", "--trials", "2", "--split", "train",
                     "--compare", "none", "hints", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["none"]["average"]["mean"] == 100.0
        assert report["hints"]["average"]["mean"] == 100.0
        assert report["none"]["usage_source"] == "approximate-tokenizer"

    def test_errors_exit_1(self, tmp_path, capsys):
        cfg_path = _build_run(tmp_path, with_filters=False)
        capsys.readouterr()
        assert main(["agent", "run", "--config", str(cfg_path), "--task-id",
                     "nope", "--model", "teacher"]) == 1
        assert "error:" in capsys.readouterr().err
        assert main(["agent", "run", "--task-id", "x", "--model", "m"]) == 1
        assert "requires --config" in capsys.readouterr().err


# -- service ------------------------------------------------------------------


@pytest.fixture
def served(tmp_path):
    cfg_path = _build_run(tmp_path)
    assert main(["round", "run", "--config", str(cfg_path), "--round", "1",
                 "--model", "teacher", "--rollouts", "1", "--json"]) == 0
    cfg = CoachConfig.load(cfg_path)
    return TestClient(create_app(cfg)), cfg


class TestService:
    def test_health_and_reads(self, served):
        client, cfg = served
        assert client.get("/api/health").json()["status"] == "ok"
        assert len(client.get("/api/tasks").json()["tasks"]) == len(cfg.tasks)
        rounds = client.get("/api/rounds").json()["manifests"]
        assert rounds and rounds[-1]["round_index"] == 1

    def test_trajectory_listing_and_detail(self, served):
        client, cfg = served
        listing = client.get("/api/trajectories",
                             params={"round_prefix": "r1-"}).json()["trajectories"]
        assert len(listing) == len(cfg.tasks)
        detail = client.get(f"/api/trajectories/{listing[0]['trajectory_id']}").json()
        assert detail["task"]["task_id"] == listing[0]["task_id"]
        assert all("finding" in s for s in detail["steps"])
        assert client.get("/api/trajectories/nope").status_code == 404

    def test_draft_edit_bind_conflict(self, served):
        client, _ = served
        r = client.post("/api/hints/draft", json={
            "text": "draft v1", "target_filter": "unknown-tool", "author": "ana"})
        draft_id = r.json()["draft_id"]
        assert client.put(f"/api/hints/draft/{draft_id}", json={
            "text": "draft v2", "target_filter": "unknown-tool",
            "author": "ana"}).status_code == 200
        bind = client.post("/api/hints/bind", json={
            "draft_id": draft_id, "filter_id": "unknown-tool",
            "round_index": 3, "author": "ana"})
        assert bind.status_code == 200
        hints = client.get("/api/hints").json()["hints"]
        bound = next(h for h in hints if h["hint_id"] == bind.json()["hint_id"])
        assert bound["text"] == "draft v2"
        # a second hint for the same (filter, round) conflicts
        again = client.post("/api/hints/bind", json={
            "text": "other", "filter_id": "unknown-tool", "round_index": 3,
            "author": "bo"})
        assert again.status_code == 409

    def test_preview_returns_diff(self, served):
        client, cfg = served
        tid = client.get("/api/trajectories").json()["trajectories"][0][
            "trajectory_id"]
        r = client.post("/api/preview", json={
            "trajectory_id": tid, "step_index": 1, "hint_text": "try harder",
            "model": "teacher", "author": "ana", "m": 2})
        assert r.status_code == 200
        body = r.json()
        assert len(body["samples"]) == 2
        assert "diff" in body["samples"][0]
        assert body["original"]["code"]

    def test_model_tag_registration(self, served):
        client, _ = served
        r = client.post("/api/rounds/1/model-tag",
                        json={"name": "student-r1", "author": "trainer"})
        assert r.status_code == 200
        assert r.json()["model_tag_out"] == "student-r1"
        assert client.post("/api/rounds/1/model-tag",
                           json={"name": "x", "author": "t"}).status_code == 409
        assert client.post("/api/rounds/9/model-tag",
                           json={"name": "x", "author": "t"}).status_code == 404

    def test_writes_are_audited(self, served):
        client, cfg = served
        client.post("/api/approve", json={"round_index": 1, "stage": "hints",
                                          "author": "ana"})
        lines = (cfg.run_dir / "audit.jsonl").read_text().splitlines()
        entry = json.loads(lines[-1])
        assert entry["action"] == "round.approve"
        assert entry["author"] == "ana"
