"""REST service for the coaching console.

Reads never mutate state; every write endpoint requires an author and is
recorded in an append-only audit log under the run directory. Hint drafts
live in a service-side file until bound; binding registers the corrective
hint in the registry (persisted to hints.json) so the next round picks it up.
"""

from __future__ import annotations

import difflib
import json
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from ..gateway import CompletionParams
from ..hints import HintError
from ..model import StateRef
from ..review import run_filters
from ..runtime import PromptProfile
from .config import CoachConfig
from .rounds import RoundError, register_model_tag


class HintDraftBody(BaseModel):
    text: str
    target_filter: Optional[str] = None
    author: str


class HintBindBody(BaseModel):
    draft_id: Optional[str] = None
    text: Optional[str] = None
    filter_id: str
    round_index: int
    author: str


class PreviewBody(BaseModel):
    trajectory_id: str
    step_index: int
    hint_text: str
    model: str
    author: str
    m: int = 1


class FilterRunBody(BaseModel):
    round_index: int
    author: str


class ModelTagBody(BaseModel):
    name: str
    author: str


class ApproveBody(BaseModel):
    round_index: int
    stage: str
    author: str


def create_app(cfg: CoachConfig) -> FastAPI:
    app = FastAPI(title="agentcoach", version="0.1.0")
    store = cfg.build_store()
    runtime = cfg.build_runtime()
    tasks_by_id = {t.task_id: t for t in cfg.tasks}
    drafts_path = cfg.run_dir / "hint_drafts.json"
    audit_path = cfg.run_dir / "audit.jsonl"

    def audit(action: str, author: str, detail: dict) -> None:
        entry = {"ts": time.time(), "action": action, "author": author,
                 "detail": detail}
        with open(audit_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")

    def load_drafts() -> dict:
        if drafts_path.exists():
            return json.loads(drafts_path.read_text())
        return {"next_id": 1, "drafts": {}}

    def save_drafts(d: dict) -> None:
        drafts_path.write_text(json.dumps(d, indent=1, sort_keys=True))

    # -- reads ----------------------------------------------------------------

    @app.get("/api/health")
    def health():
        return {"status": "ok", "run_dir": str(cfg.run_dir)}

    @app.get("/api/rounds")
    def rounds():
        return {"manifests": [m.to_json() for m in store.manifests()]}

    @app.get("/api/tasks")
    def tasks():
        return {"tasks": [t.to_json() for t in cfg.tasks]}

    @app.get("/api/trajectories")
    def trajectories(round_prefix: Optional[str] = None, task_id: Optional[str] = None,
                     limit: int = 200):
        out = []
        for t in store.trajectories():
            if round_prefix and not t.trajectory_id.startswith(round_prefix):
                continue
            if task_id and t.task_id != task_id:
                continue
            out.append({
                "trajectory_id": t.trajectory_id,
                "task_id": t.task_id,
                "model_tag": t.model_tag,
                "outcome": t.outcome.kind,
                "success": t.success,
                "steps": len(t.steps),
            })
            if len(out) >= limit:
                break
        return {"trajectories": out}

    @app.get("/api/trajectories/{trajectory_id}")
    def trajectory(trajectory_id: str):
        t = store.get_trajectory(trajectory_id)
        if t is None:
            raise HTTPException(404, f"no trajectory {trajectory_id!r}")
        finding_steps = {
            f.state.step_index: f.to_json()
            for f in store.findings()
            if f.state.trajectory_id == trajectory_id
        }
        d = t.to_json()
        for s in d["steps"]:
            s["finding"] = finding_steps.get(s["index"])
        d["task"] = tasks_by_id[t.task_id].to_json() if t.task_id in tasks_by_id else None
        return d

    @app.get("/api/findings")
    def findings(round_index: Optional[int] = None):
        out = [
            f.to_json() for f in store.findings()
            if round_index is None or f.round_index == round_index
        ]
        return {"findings": out}

    @app.get("/api/hints")
    def hints():
        return {"hints": [h.to_json() for h in cfg.registry.all()],
                "drafts": load_drafts()["drafts"]}

    @app.get("/api/datasets/{dataset_id}/manifest")
    def dataset_manifest(dataset_id: str):
        path = store.dataset_dir(dataset_id) / "manifest.json"
        if not path.exists():
            raise HTTPException(404, f"no dataset {dataset_id!r}")
        return json.loads(path.read_text())

    @app.get("/api/reports")
    def reports():
        report_dir = cfg.run_dir / "reports"
        out = {}
        if report_dir.exists():
            for p in sorted(report_dir.glob("*.json")):
                out[p.stem] = json.loads(p.read_text())
        return {"reports": out}

    # -- writes ---------------------------------------------------------------

    @app.post("/api/hints/draft")
    def create_draft(body: HintDraftBody):
        if not body.text.strip():
            raise HTTPException(422, "draft text must be non-empty")
        d = load_drafts()
        draft_id = f"draft-{d['next_id']:04d}"
        d["next_id"] += 1
        d["drafts"][draft_id] = {
            "text": body.text,
            "target_filter": body.target_filter,
            "author": body.author,
            "previews": 0,
        }
        save_drafts(d)
        audit("hint.draft.create", body.author, {"draft_id": draft_id})
        return {"draft_id": draft_id}

    @app.put("/api/hints/draft/{draft_id}")
    def edit_draft(draft_id: str, body: HintDraftBody):
        d = load_drafts()
        if draft_id not in d["drafts"]:
            raise HTTPException(404, f"no draft {draft_id!r}")
        d["drafts"][draft_id].update(
            {"text": body.text, "target_filter": body.target_filter}
        )
        save_drafts(d)
        audit("hint.draft.edit", body.author, {"draft_id": draft_id})
        return {"draft_id": draft_id}

    @app.post("/api/hints/bind")
    def bind_hint(body: HintBindBody):
        text = body.text
        if body.draft_id is not None:
            d = load_drafts()
            if body.draft_id not in d["drafts"]:
                raise HTTPException(404, f"no draft {body.draft_id!r}")
            text = d["drafts"][body.draft_id]["text"]
        if not text:
            raise HTTPException(422, "bind needs draft_id or text")
        try:
            hint = cfg.registry.bind_corrective_hint(
                body.filter_id, text, body.round_index, author=body.author
            )
        except HintError as e:
            raise HTTPException(409, str(e))
        cfg.save_hints()
        audit("hint.bind", body.author,
              {"hint_id": hint.hint_id, "filter_id": body.filter_id,
               "round_index": body.round_index})
        return {"hint_id": hint.hint_id}

    @app.post("/api/preview")
    def preview(body: PreviewBody):
        trajectory = store.get_trajectory(body.trajectory_id)
        if trajectory is None:
            raise HTTPException(404, f"no trajectory {body.trajectory_id!r}")
        if not 1 <= body.step_index <= len(trajectory.steps):
            raise HTTPException(404, f"no step {body.step_index} in trajectory")
        if body.model not in cfg.models:
            raise HTTPException(422, f"unknown model label {body.model!r}")
        task = tasks_by_id.get(trajectory.task_id)
        if task is None:
            raise HTTPException(404, f"unknown task {trajectory.task_id!r}")
        from ..hints import HintSection

        hint = HintSection(
            hint_id="preview", text=body.hint_text, kind="corrective",
            round_introduced=1, filter_id="preview", author=body.author,
        )
        samples = runtime.inject_hint_and_continue(
            trajectory, task, StateRef(body.trajectory_id, body.step_index),
            hint, cfg.models[body.model], PromptProfile(hint_profile=None),
            CompletionParams(), m=body.m,
        )
        original = trajectory.steps[body.step_index - 1]
        original_text = f"{original.monologue}\n{original.code}"
        out = []
        for s in samples:
            corrected = f"{s.monologue}\n{s.code}"
            diff = "\n".join(
                difflib.unified_diff(
                    original_text.splitlines(), corrected.splitlines(),
                    "original", "with-hint", lineterm="",
                )
            )
            out.append({"monologue": s.monologue, "code": s.code, "diff": diff})
        d = load_drafts()  # count previews against any matching draft text
        for draft in d["drafts"].values():
            if draft["text"] == body.hint_text:
                draft["previews"] += 1
        save_drafts(d)
        audit("hint.preview", body.author,
              {"trajectory_id": body.trajectory_id, "step_index": body.step_index})
        return {"original": {"monologue": original.monologue, "code": original.code},
                "samples": out}

    @app.post("/api/filters/run")
    def filters_run(body: FilterRunBody):
        prefix = f"r{body.round_index}-hf-"
        trajectories = [
            t for t in store.trajectories() if t.trajectory_id.startswith(prefix)
        ]
        judge = cfg.models.get(cfg.judge_model) if cfg.judge_model else None
        found = run_filters(
            cfg.filters, trajectories, tasks_by_id, body.round_index,
            gateway=runtime.gateway, judge_model=judge,
        )
        stored = [store.append(f) for f in found]
        audit("filters.run", body.author,
              {"round_index": body.round_index, "findings": len(found)})
        return {"findings": [f.to_json() for f in found], "stored_ids": stored}

    @app.post("/api/rounds/{round_index}/model-tag")
    def set_model_tag(round_index: int, body: ModelTagBody):
        try:
            manifest = register_model_tag(store, round_index, body.name)
        except RoundError as e:
            status = 409 if "already has" in str(e) else 404
            raise HTTPException(status, str(e))
        audit("round.model_tag", body.author,
              {"round_index": round_index, "model_tag_out": body.name})
        return manifest.to_json()

    @app.post("/api/approve")
    def approve(body: ApproveBody):
        audit("round.approve", body.author,
              {"round_index": body.round_index, "stage": body.stage})
        return {"approved": True}

    return app
