"""Run configuration: one JSON file names the run directory, world, task
file, hint registry, filter file, and model tags. Scripted model tags point
at a saved ScriptedBehavior file; http-chat tags point at an endpoint (the
credential comes from the MODEL_API_KEY environment variable only).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..gateway import Gateway, ScriptedBehavior
from ..hints import HintRegistry
from ..model import ModelTag, Task
from ..review import FilterSpec, load_filters
from ..runtime import AgentRuntime
from ..store import RunStore
from ..world import World, build_tool_registry


class ConfigError(ValueError):
    pass


def load_tasks(path: str | Path) -> list[Task]:
    data = json.loads(Path(path).read_text())
    return [Task.from_json(d) for d in data["tasks"]]


def save_tasks(tasks: list[Task], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"tasks": [t.to_json() for t in tasks]}, indent=1, sort_keys=True)
    )


@dataclass
class CoachConfig:
    run_dir: Path
    world: World
    tasks: list[Task]
    registry: HintRegistry
    models: dict[str, ModelTag]
    filters: list[FilterSpec] = field(default_factory=list)
    judge_model: Optional[str] = None
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict)
    hints_path: Optional[Path] = None

    def save_hints(self) -> None:
        """Persist the registry to the configured hints file so later loads
        (and other processes) see newly bound hints."""
        self.registry.save(self.hints_path or self.base_dir / "hints.json")

    @classmethod
    def load(cls, path: str | Path) -> "CoachConfig":
        path = Path(path)
        base = path.parent
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}")

        def resolve(key: str, required: bool = True) -> Optional[Path]:
            if key not in raw:
                if required:
                    raise ConfigError(f"config missing {key!r}")
                return None
            return base / raw[key]

        world = World.load(resolve("world"))
        tasks = load_tasks(resolve("tasks"))
        hints_path = resolve("hints", required=False)
        registry = (
            HintRegistry.load(hints_path)
            if hints_path is not None and hints_path.exists()
            else HintRegistry()
        )
        models: dict[str, ModelTag] = {}
        for label, d in raw.get("models", {}).items():
            tag = ModelTag.from_json(d)
            tag.validate()
            models[label] = tag
        filters_path = resolve("filters", required=False)
        filters = load_filters(filters_path) if filters_path else []
        return cls(
            run_dir=base / raw.get("run_dir", "run"),
            world=world,
            tasks=tasks,
            registry=registry,
            models=models,
            filters=filters,
            judge_model=raw.get("judge_model"),
            base_dir=base,
            raw=raw,
            hints_path=hints_path,
        )

    def model(self, label: str) -> ModelTag:
        if label not in self.models:
            raise ConfigError(f"unknown model label {label!r}")
        return self.models[label]

    def build_store(self) -> RunStore:
        return RunStore(self.run_dir)

    def build_runtime(self) -> AgentRuntime:
        gateway = Gateway()
        for tag in self.models.values():
            if tag.backend_kind == "scripted":
                script = self.base_dir / tag.endpoint_or_script
                if not script.exists():
                    raise ConfigError(f"scripted behavior file missing: {script}")
                gateway.register_scripted(tag.name, ScriptedBehavior.load(script))
        return AgentRuntime(
            gateway, self.world, self.registry, build_tool_registry(self.world)
        )
