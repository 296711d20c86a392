"""Shared fixtures: a deterministic toy world, one task per template with
reference solutions, and factories for scripted-backend runtimes."""

import pytest

from agentcoach.gateway import Gateway
from agentcoach.hints import HintRegistry
from agentcoach.model import ModelTag
from agentcoach.runtime import AgentRuntime
from agentcoach.scripted import behavior_from_solutions
from agentcoach.world import (
    DEFAULT_TEMPLATES,
    generate_world,
    instantiate_tasks_with_solutions,
)

WORLD_SEED = 7
TASK_SEED = 3

ALL_GROUPS = ("flights", "coffee", "yelp", "graph", "agenda-lite")


@pytest.fixture(scope="session")
def world():
    return generate_world(WORLD_SEED)


@pytest.fixture(scope="session")
def tasks_and_solutions(world):
    return instantiate_tasks_with_solutions(
        DEFAULT_TEMPLATES, world, 1, seed=TASK_SEED
    )


@pytest.fixture(scope="session")
def tasks(tasks_and_solutions):
    return tasks_and_solutions[0]


@pytest.fixture(scope="session")
def solutions(tasks_and_solutions):
    return tasks_and_solutions[1]


@pytest.fixture(scope="session")
def tasks_by_id(tasks):
    return {t.task_id: t for t in tasks}


@pytest.fixture
def teacher_tag():
    return ModelTag("teacher", 0, "scripted", "inline")


def make_runtime(world, tasks, solutions, registry=None, tag_name="teacher",
                 mistakes=(), hint_overrides=()):
    """Fresh gateway + runtime wired to a scripted behavior built from the
    reference solutions (optionally with injected mistakes/overrides)."""
    behavior = behavior_from_solutions(
        tasks, solutions, mistakes=list(mistakes), hint_overrides=list(hint_overrides)
    )
    gateway = Gateway()
    gateway.register_scripted(tag_name, behavior)
    return AgentRuntime(gateway, world, registry or HintRegistry())


@pytest.fixture
def runtime(world, tasks, solutions):
    registry = HintRegistry()
    registry.new_initial(
        "Read the tool documentation before acting; always narrow the data "
        "with data_filter before extracting values.",
        ALL_GROUPS,
    )
    registry.new_initial(
        "Write the final answer as the literal text you observed; do not "
        "convert it programmatically.",
        ALL_GROUPS,
    )
    return make_runtime(world, tasks, solutions, registry)
