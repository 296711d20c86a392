"""Tool suite over the toy world, plus generated tool documentation blocks.

Condition grammar for data_filter: one or more `column OP value` clauses
joined by '; ', OP in {=, !=, >, >=, <, <=}. Ordering operators compare
numerically when both sides parse as numbers, lexically otherwise;
= and != are exact text equality.
"""

from __future__ import annotations

import re
from typing import Any

from ..actionlang.interp import GraphHandle, TableHandle, TaskComplete, ToolError, ToolRegistry
from .gen import World

_CLAUSE_RE = re.compile(r"^\s*([^<>=!]+?)\s*(<=|>=|!=|=|<|>)\s*(.*?)\s*$")

ORDERING_OPS = ("<", "<=", ">", ">=")


def _as_number(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def clause_matches(cell: str, op: str, value: str) -> bool:
    if op == "=":
        return cell == value
    if op == "!=":
        return cell != value
    a, b = _as_number(cell), _as_number(value)
    left: Any
    right: Any
    if a is not None and b is not None:
        left, right = a, b
    else:
        left, right = cell, value
    return {"<": left < right, "<=": left <= right,
            ">": left > right, ">=": left >= right}[op]


def parse_condition(condition: str, columns: tuple[str, ...]) -> list[tuple[int, str, str]]:
    """Returns (column index, op, value) per clause; raises ToolError on bad input."""
    clauses = []
    for raw in condition.split("; "):
        m = _CLAUSE_RE.match(raw)
        if m is None:
            raise ToolError("data_filter", f"malformed condition clause: {raw!r}")
        column, op, value = m.group(1), m.group(2), m.group(3)
        if column not in columns:
            raise ToolError("data_filter", f"unknown column {column!r} in clause {raw!r}")
        clauses.append((columns.index(column), op, value))
    return clauses


def data_filter_rows(table: TableHandle, condition: str) -> tuple[tuple[str, ...], ...]:
    clauses = parse_condition(condition, table.columns)
    return tuple(
        row for row in table.rows
        if all(clause_matches(row[i], op, v) for i, op, v in clauses)
    )


def _score_doc(query: str, doc_text: str) -> int:
    words = {w.lower() for w in re.findall(r"[A-Za-z0-9]+", query)}
    doc_words = [w.lower() for w in re.findall(r"[A-Za-z0-9]+", doc_text)]
    return sum(1 for w in doc_words if w in words)


def build_tool_registry(world: World) -> ToolRegistry:
    reg = ToolRegistry()

    def load_db(variant: str) -> TableHandle:
        if not isinstance(variant, str):
            raise ToolError("load_db", "variant must be a string")
        if variant not in world.tables:
            raise ToolError(
                "load_db",
                f"unknown variant {variant!r}; available: {', '.join(sorted(world.tables))}",
            )
        t = world.tables[variant]
        return TableHandle(t.name, t.columns, t.rows)

    def data_filter(handle: TableHandle, condition: str) -> TableHandle:
        if not isinstance(handle, TableHandle):
            raise ToolError("data_filter", "first argument must be a database handle")
        if not isinstance(condition, str):
            raise ToolError("data_filter", "condition must be a string")
        return TableHandle(handle.name, handle.columns, data_filter_rows(handle, condition))

    def get_value(handle: TableHandle, column: str) -> str:
        if not isinstance(handle, TableHandle):
            raise ToolError("get_value", "first argument must be a database handle")
        if column not in handle.columns:
            raise ToolError("get_value", f"unknown column {column!r}")
        i = handle.columns.index(column)
        return ", ".join(row[i] for row in handle.rows)

    def load_graph() -> GraphHandle:
        return GraphHandle(world.graph)

    def _graph_of(handle: GraphHandle, tool: str):
        if not isinstance(handle, GraphHandle):
            raise ToolError(tool, "first argument must be graph data from load_graph()")
        return handle.payload

    def _fmt_attrs(attrs: dict) -> str:
        parts = []
        for k, v in attrs.items():
            if isinstance(v, list):
                parts.append(f"{k}: {', '.join(str(x) for x in v)}")
            else:
                parts.append(f"{k}: {v}")
        return "; ".join(parts)

    def check_nodes(handle: GraphHandle, graph_type: str, node: str) -> str:
        g = _graph_of(handle, "check_nodes")
        if graph_type == "PaperNet":
            if node not in g.papers:
                raise ToolError("check_nodes", f"no paper titled {node!r}")
            return _fmt_attrs(g.papers[node])
        if graph_type == "AuthorNet":
            if node not in g.authors:
                raise ToolError("check_nodes", f"no author named {node!r}")
            return _fmt_attrs(g.authors[node])
        raise ToolError("check_nodes", "graph_type must be 'PaperNet' or 'AuthorNet'")

    def check_neighbours(handle: GraphHandle, graph_type: str, node: str) -> list[str]:
        g = _graph_of(handle, "check_neighbours")
        if graph_type == "AuthorNet":
            if node not in g.authors:
                raise ToolError("check_neighbours", f"no author named {node!r}")
            return g.neighbours(node)
        if graph_type == "PaperNet":
            if node not in g.papers:
                raise ToolError("check_neighbours", f"no paper titled {node!r}")
            return list(g.papers[node]["authors"])
        raise ToolError("check_neighbours", "graph_type must be 'PaperNet' or 'AuthorNet'")

    def check_edges(handle: GraphHandle, graph_type: str, node1: str, node2: str) -> str:
        g = _graph_of(handle, "check_edges")
        if graph_type != "AuthorNet":
            raise ToolError("check_edges", "edges are only defined in 'AuthorNet'")
        key = tuple(sorted((node1, node2)))
        if key not in g.edges:
            raise ToolError("check_edges", f"no collaboration between {node1!r} and {node2!r}")
        return _fmt_attrs(g.edges[key])

    def retrieve_agenda(query: str, num_docs: float) -> list[str]:
        if not isinstance(query, str):
            raise ToolError("retrieve_agenda", "query must be a string")
        try:
            k = int(num_docs)
        except (TypeError, ValueError):
            raise ToolError("retrieve_agenda", "num_docs must be a number")
        if k < 1:
            raise ToolError("retrieve_agenda", "num_docs must be >= 1")
        scored = sorted(
            world.agenda_docs,
            key=lambda d: (-_score_doc(query, d.text), d.doc_id),
        )
        return [d.text for d in scored[:k]]

    def complete_task(final_report: str, return_value: Any) -> None:
        if not isinstance(return_value, str):
            raise ToolError("complete_task", "the return value needs to be a string")
        if not isinstance(final_report, str):
            raise ToolError("complete_task", "the final report needs to be a string")
        raise TaskComplete(final_report, return_value)

    for name, fn in [
        ("load_db", load_db), ("data_filter", data_filter), ("get_value", get_value),
        ("load_graph", load_graph), ("check_nodes", check_nodes),
        ("check_neighbours", check_neighbours), ("check_edges", check_edges),
        ("retrieve_agenda", retrieve_agenda), ("complete_task", complete_task),
    ]:
        reg.register(name, fn)
    return reg


TOOL_DOCS: dict[str, str] = {
    "load_db": """load_db(db_variant: text) -> table
        This function loads a database and shows names of all its columns. `db_variant` can be one of: flights/coffee/businesses.
        - Input: used to indicate which database to load.
        - Output: A table handle. Note that all elements in the table are stored as strings.
        Example calls:
        `flights_db = load_db('flights')`: Returns the flights database.""",
    "data_filter": """data_filter(database: table, argument: text) -> table
        This function filters the database by column name, relation (e.g., =, >, etc.) and value, and keeps only rows matching the argument.
        - Input:
            1. A database;
            2. An argument string with column names, relations (e.g., =, >, etc.) and values as conditions to filter the database. Conditions in the argument should be separated by a semicolon and a space '; '.
            Example Argument: 'Origin=BUF; Dest=PHL'
            Note: You must strictly follow the exact format of the argument.
        - Output: A new table containing only rows matching the argument.
        Example calls:
        `new_database = data_filter(full_database, 'IATA_Code_Marketing_Airline=AA; Origin=BUF; Dest=PHL; FlightDate=2022-04-20')`: Returns a filtered table.""",
    "get_value": """get_value(data: table, name: text) -> text
        This function returns the value(s) of a specific column in the database.
        - Input:
            1. A database;
            2. A single column name.
        - Output: The value(s) of the specific column as a string. If there are multiple rows, the values are concatenated using a comma and a space ', '.
        Example calls:
        `dep_time = get_value(new_database, 'DepTime')`: Returns '1752.0'.""",
    "load_graph": """load_graph() -> graph
        This function loads the graph data.
        - Output: The graph data.
        Example calls:
        `GRAPH_DATA = load_graph()`: Returns the graph data.""",
    "check_nodes": """check_nodes(GRAPH_DATA: graph, graph_type: text, node: text) -> text
        This function returns the detailed attributes of a given node in the graph.
        - Input:
            1. Graph data;
            2. The graph name, which can be either 'PaperNet' or 'AuthorNet';
            3. The node name: a paper title in 'PaperNet', or an author name in 'AuthorNet'.
        - Output: The attributes of the given node.
        Example calls:
        `check_nodes(GRAPH_DATA, 'PaperNet', 'Sparse Planning at Scale.')`: Returns the paper's attributes.""",
    "check_neighbours": """check_neighbours(GRAPH_DATA: graph, graph_type: text, node: text) -> list
        This function returns the names of a given node's neighbours in the graph.
        - Input:
            1. Graph data;
            2. The graph name, which can be either 'PaperNet' or 'AuthorNet';
            3. The node name.
        - Output: A list of names of the node's neighbours.
        Example calls:
        `check_neighbours(GRAPH_DATA, 'AuthorNet', 'Wei Chen')`: Returns the co-author names.""",
    "check_edges": """check_edges(GRAPH_DATA: graph, graph_type: text, node1: text, node2: text) -> text
        This function returns the detailed attributes of an edge between two nodes in the graph.
        In 'AuthorNet', the edge represents the collaboration between two authors.
        - Input:
            1. Graph data;
            2. The graph name ('AuthorNet');
            3. The first node name;
            4. The second node name.
        - Output: The attributes of the edge between the two given nodes.
        Example calls:
        `check_edges(GRAPH_DATA, 'AuthorNet', 'Wei Chen', 'Anna Berg')`: Returns the collaboration attributes.""",
    "retrieve_agenda": """retrieve_agenda(query: text, num_docs: number) -> list
        This function retrieves relevant agenda-related documents based on the query.
        - Input:
            1. query: A query including the key information to answer the question.
            2. num_docs: The number of documents to retrieve.
        - Output: A list of `num_docs` documents relevant to the query.
        Example calls:
        `retrieved_docs = retrieve_agenda('Grace Broadway Show February', 10)`: Returns 10 relevant documents.""",
    "complete_task": """complete_task(final_report: text, return_value: text)
        Complete the task and report the final answer. It is recommended that you do this command as the only command in the cell.
        The return_value needs to be a string.
        Example calls:
        `complete_task('The star rating of Moonrise Mug is', '4.5')`""",
}


def render_tool_docs(tool_names: tuple[str, ...] | list[str]) -> str:
    """Appendix-style documentation block joined with dash separators."""
    blocks = [TOOL_DOCS[name] for name in tool_names if name in TOOL_DOCS]
    return "\n-------\n".join(blocks)
