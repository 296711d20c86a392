"""Restricted action language: grammar, parser, sandboxed interpreter."""

from .parser import Program, ParseError, parse
from .interp import (
    CellError,
    CellResult,
    Interpreter,
    TableHandle,
    GraphHandle,
    ToolRegistry,
    ToolError,
    TaskComplete,
)

__all__ = [
    "Program",
    "ParseError",
    "parse",
    "CellError",
    "CellResult",
    "Interpreter",
    "TableHandle",
    "GraphHandle",
    "ToolRegistry",
    "ToolError",
    "TaskComplete",
]
