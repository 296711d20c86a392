"""Sandboxed interpreter for parsed action-language programs.

Values are: text (str), number (finite float), boolean, list, table-handle,
graph-handle, unit (None). Execution touches nothing but the variable store
and the tool registry: no filesystem, network, or clock access exists in the
evaluation path, so a cell is a pure function of (program, env, tools).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .parser import (
    Assignment,
    BinOp,
    BoolLit,
    Call,
    Expr,
    ExprStatement,
    Index,
    ListLit,
    Name,
    Neg,
    NumberLit,
    ParseError,
    Program,
    StringLit,
    parse,
)

MAX_LIST_LEN = 10_000
MAX_TEXT_LEN = 100_000
MAX_OBSERVATION = 4_096
TRUNCATION_SUFFIX = "…[truncated]"


@dataclass(frozen=True)
class TableHandle:
    """Opaque view over a toy table: column names + row tuples of text."""

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class GraphHandle:
    """Opaque handle over the paper/author graph pair."""

    payload: Any


@dataclass(frozen=True)
class CellError:
    kind: str  # parse | name-not-found | type-mismatch | tool-error | limit-exceeded
    message: str
    tool_name: Optional[str] = None


class EvalError(Exception):
    def __init__(self, kind: str, message: str, tool_name: Optional[str] = None):
        self.error = CellError(kind, message, tool_name)
        super().__init__(message)


class ToolError(Exception):
    """Raised by tools; surfaces as a tool-error CellError."""

    def __init__(self, tool_name: str, message: str):
        self.tool_name = tool_name
        super().__init__(message)


class TaskComplete(Exception):
    """Raised by complete_task to end the episode."""

    def __init__(self, report: str, answer: str):
        self.report = report
        self.answer = answer
        super().__init__(report)


@dataclass
class CellResult:
    observation: str
    error: Optional[CellError] = None
    bindings_delta: tuple[str, ...] = ()
    completed: Optional[TaskComplete] = None


class ToolRegistry:
    def __init__(self) -> None:
        self._tools: dict[str, Callable[..., Any]] = {}

    def register(self, name: str, fn: Callable[..., Any]) -> None:
        self._tools[name] = fn

    def names(self) -> tuple[str, ...]:
        return tuple(self._tools)

    def get(self, name: str) -> Optional[Callable[..., Any]]:
        return self._tools.get(name)

    def restricted(self, allow: tuple[str, ...]) -> "ToolRegistry":
        sub = ToolRegistry()
        for name in allow:
            if name in self._tools:
                sub.register(name, self._tools[name])
        return sub


def _kind(v: Any) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, float):
        return "number"
    if isinstance(v, str):
        return "text"
    if isinstance(v, list):
        return "list"
    if isinstance(v, TableHandle):
        return "table-handle"
    if isinstance(v, GraphHandle):
        return "graph-handle"
    if v is None:
        return "unit"
    return type(v).__name__


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)
    if isinstance(v, str):
        return v
    if isinstance(v, list):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    if isinstance(v, TableHandle):
        return f"<table {v.name}: {len(v.rows)} rows, columns: {', '.join(v.columns)}>"
    if isinstance(v, GraphHandle):
        return "<graph data>"
    if v is None:
        return ""
    return str(v)


def _check_number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, float):
        raise EvalError("type-mismatch", f"{where}: expected number, got {_kind(v)}")
    if not math.isfinite(v):
        raise EvalError("limit-exceeded", f"{where}: number is not finite")
    return v


def _check_text(v: Any, where: str) -> str:
    if not isinstance(v, str):
        raise EvalError("type-mismatch", f"{where}: expected text, got {_kind(v)}")
    return v


def _check_list(v: Any, where: str) -> list:
    if not isinstance(v, list):
        raise EvalError("type-mismatch", f"{where}: expected list, got {_kind(v)}")
    return v


def _guard_text(s: str) -> str:
    if len(s) > MAX_TEXT_LEN:
        raise EvalError("limit-exceeded", f"text exceeds {MAX_TEXT_LEN} characters")
    return s


def _guard_list(xs: list) -> list:
    if len(xs) > MAX_LIST_LEN:
        raise EvalError("limit-exceeded", f"list exceeds {MAX_LIST_LEN} elements")
    return xs


def _guard_number(x: float) -> float:
    if not math.isfinite(x):
        raise EvalError("limit-exceeded", "numeric overflow")
    return x


def to_number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise EvalError("type-mismatch", f"cannot convert {text!r} to a number")


class Interpreter:
    """One instance per trajectory; owns a persistent variable store."""

    def __init__(self, tools: Optional[ToolRegistry] = None):
        self.env: dict[str, Any] = {}
        self.tools = tools or ToolRegistry()
        self._out: list[str]

    # -- builtins -------------------------------------------------------------

    def builtin_eval(self, name: str, args: list[Any]) -> Any:
        fn = getattr(self, f"_builtin_{name}", None)
        if fn is None:
            raise EvalError("name-not-found", f"no builtin named {name!r}")
        return fn(args)

    def _arity(self, name: str, args: list, n: int) -> None:
        if len(args) != n:
            raise EvalError(
                "type-mismatch", f"{name} expects {n} argument(s), got {len(args)}"
            )

    def _builtin_print(self, args: list) -> None:
        self._out.append(" ".join(format_value(a) for a in args))
        return None

    def _builtin_len(self, args: list) -> float:
        self._arity("len", args, 1)
        v = args[0]
        if isinstance(v, str) or isinstance(v, list):
            return float(len(v))
        if isinstance(v, TableHandle):
            return float(len(v.rows))
        raise EvalError("type-mismatch", f"len: expected text or list, got {_kind(v)}")

    def _minmax(self, name: str, args: list, pick) -> float:
        values = args[0] if len(args) == 1 and isinstance(args[0], list) else args
        if not values:
            raise EvalError("type-mismatch", f"{name} of empty sequence")
        nums = [_check_number(v, name) for v in values]
        return pick(nums)

    def _builtin_min(self, args: list) -> float:
        return self._minmax("min", args, min)

    def _builtin_max(self, args: list) -> float:
        return self._minmax("max", args, max)

    def _builtin_sum(self, args: list) -> float:
        self._arity("sum", args, 1)
        xs = _check_list(args[0], "sum")
        return _guard_number(math.fsum(_check_number(x, "sum") for x in xs))

    def _builtin_abs(self, args: list) -> float:
        self._arity("abs", args, 1)
        return abs(_check_number(args[0], "abs"))

    def _builtin_round(self, args: list) -> float:
        if len(args) not in (1, 2):
            raise EvalError("type-mismatch", f"round expects 1 or 2 arguments, got {len(args)}")
        x = _check_number(args[0], "round")
        ndigits = int(_check_number(args[1], "round")) if len(args) == 2 else 0
        return _guard_number(round(x, ndigits))

    def _builtin_split(self, args: list) -> list:
        self._arity("split", args, 2)
        text = _check_text(args[0], "split")
        sep = _check_text(args[1], "split")
        if not sep:
            raise EvalError("type-mismatch", "split: separator must be non-empty")
        return _guard_list(text.split(sep))

    def _builtin_join(self, args: list) -> str:
        self._arity("join", args, 2)
        sep = _check_text(args[0], "join")
        xs = _check_list(args[1], "join")
        return _guard_text(sep.join(_check_text(x, "join element") for x in xs))

    def _builtin_to_number(self, args: list) -> float:
        self._arity("to_number", args, 1)
        return to_number(_check_text(args[0], "to_number"))

    def _builtin_to_numbers(self, args: list) -> list:
        self._arity("to_numbers", args, 1)
        xs = _check_list(args[0], "to_numbers")
        out = []
        for i, x in enumerate(xs):
            if not isinstance(x, str):
                raise EvalError(
                    "type-mismatch", f"to_numbers: element at index {i} is {_kind(x)}"
                )
            try:
                out.append(float(x))
            except ValueError:
                raise EvalError(
                    "type-mismatch",
                    f"to_numbers: element at index {i} ({x!r}) is not numeric",
                )
        return out

    def _builtin_contains(self, args: list) -> bool:
        self._arity("contains", args, 2)
        return _check_text(args[1], "contains") in _check_text(args[0], "contains")

    def _builtin_unique(self, args: list) -> list:
        self._arity("unique", args, 1)
        xs = _check_list(args[0], "unique")
        seen: list = []
        for x in xs:
            if x not in seen:
                seen.append(x)
        return seen

    def _builtin_sort(self, args: list) -> list:
        self._arity("sort", args, 1)
        xs = _check_list(args[0], "sort")
        kinds = {_kind(x) for x in xs}
        if len(kinds) > 1:
            raise EvalError("type-mismatch", f"sort: mixed element kinds {sorted(kinds)}")
        try:
            return sorted(xs)
        except TypeError:
            raise EvalError("type-mismatch", "sort: elements are not orderable")

    BUILTIN_NAMES = (
        "print", "len", "min", "max", "sum", "abs", "round", "split", "join",
        "to_number", "to_numbers", "contains", "unique", "sort",
    )

    # -- evaluation -----------------------------------------------------------

    def _eval(self, node: Expr) -> Any:
        if isinstance(node, NumberLit):
            return node.value
        if isinstance(node, StringLit):
            return node.value
        if isinstance(node, BoolLit):
            return node.value
        if isinstance(node, Name):
            if node.ident not in self.env:
                raise EvalError("name-not-found", f"name {node.ident!r} is not defined")
            return self.env[node.ident]
        if isinstance(node, Neg):
            return -_check_number(self._eval(node.operand), "unary minus")
        if isinstance(node, ListLit):
            return _guard_list([self._eval(item) for item in node.items])
        if isinstance(node, Index):
            base = self._eval(node.base)
            idx = self._eval(node.index)
            if isinstance(base, (list, str)):
                i = int(_check_number(idx, "index"))
                if not 0 <= i < len(base):
                    raise EvalError(
                        "type-mismatch", f"index {i} out of range for length {len(base)}"
                    )
                return base[i]
            raise EvalError("type-mismatch", f"cannot index into {_kind(base)}")
        if isinstance(node, BinOp):
            return self._eval_binop(node)
        if isinstance(node, Call):
            return self._eval_call(node)
        raise EvalError("type-mismatch", f"unknown node {node!r}")

    def _eval_binop(self, node: BinOp) -> Any:
        left = self._eval(node.left)
        right = self._eval(node.right)
        op = node.op
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "+":
            if isinstance(left, str) and isinstance(right, str):
                return _guard_text(left + right)
            if isinstance(left, list) and isinstance(right, list):
                return _guard_list(left + right)
            return _guard_number(_check_number(left, "+") + _check_number(right, "+"))
        if op in ("-", "*", "/"):
            a = _check_number(left, op)
            b = _check_number(right, op)
            if op == "-":
                return _guard_number(a - b)
            if op == "*":
                return _guard_number(a * b)
            if b == 0:
                raise EvalError("type-mismatch", "division by zero")
            return _guard_number(a / b)
        # ordering comparisons
        if isinstance(left, str) and isinstance(right, str):
            a, b = left, right  # type: ignore[assignment]
        else:
            a, b = _check_number(left, op), _check_number(right, op)
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]

    def _eval_call(self, node: Call) -> Any:
        if node.func in self.BUILTIN_NAMES:
            args = [self._eval(a) for a in node.args]
            return self.builtin_eval(node.func, args)
        tool = self.tools.get(node.func)
        if tool is None:
            raise EvalError(
                "tool-error", f"unknown tool {node.func!r}", tool_name=node.func
            )
        args = [self._eval(a) for a in node.args]
        try:
            return tool(*args)
        except TaskComplete:
            raise
        except ToolError as e:
            raise EvalError("tool-error", str(e), tool_name=e.tool_name)
        except TypeError as e:
            raise EvalError("tool-error", f"{node.func}: {e}", tool_name=node.func)

    # -- cell execution -------------------------------------------------------

    def execute(self, program: Program) -> CellResult:
        """Run statements in order; halt at first error; earlier bindings persist."""
        self._out = []
        delta: list[str] = []
        error: Optional[CellError] = None
        completed: Optional[TaskComplete] = None
        for stmt in program.statements:
            try:
                if isinstance(stmt, Assignment):
                    value = self._eval(stmt.expr)
                    self.env[stmt.name] = value
                    delta.append(stmt.name)
                else:
                    assert isinstance(stmt, ExprStatement)
                    self._eval(stmt.expr)
            except EvalError as e:
                error = e.error
                break
            except TaskComplete as tc:
                completed = tc
                break
        parts = list(self._out)
        if error is not None:
            parts.append(f"Error ({error.kind}): {error.message}")
        if completed is not None:
            parts.append("Task completed.")
        observation = "\n".join(parts)
        if len(observation) > MAX_OBSERVATION:
            observation = observation[:MAX_OBSERVATION] + TRUNCATION_SUFFIX
        return CellResult(
            observation=observation,
            error=error,
            bindings_delta=tuple(delta),
            completed=completed,
        )

    def run_source(self, source: str) -> CellResult:
        """Parse + execute; parse failures become a parse-kind CellResult."""
        try:
            program = parse(source)
        except ParseError as e:
            obs = f"Error (parse): {e}"
            return CellResult(observation=obs, error=CellError("parse", str(e)))
        return self.execute(program)
