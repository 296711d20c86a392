"""Toy task world: deterministic data, tools, templates, oracle."""

from .gen import World, Table, Graph, AgendaDoc, generate_world, DEFAULT_SIZES
from .tools import build_tool_registry, render_tool_docs, data_filter_rows, TOOL_DOCS
from .templates import (
    DEFAULT_TEMPLATES,
    TEMPLATES_BY_ID,
    TaskTemplate,
    instantiate_tasks,
    instantiate_tasks_with_solutions,
)

__all__ = [
    "World",
    "Table",
    "Graph",
    "AgendaDoc",
    "generate_world",
    "DEFAULT_SIZES",
    "build_tool_registry",
    "render_tool_docs",
    "data_filter_rows",
    "TOOL_DOCS",
    "DEFAULT_TEMPLATES",
    "TEMPLATES_BY_ID",
    "TaskTemplate",
    "instantiate_tasks",
    "instantiate_tasks_with_solutions",
]
