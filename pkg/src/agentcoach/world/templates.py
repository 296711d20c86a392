"""Question templates: placeholder drawing, ground-truth oracles, reference
solutions, and task instantiation with per-template split assignment.

An oracle returning None marks the drawn instance as ambiguous (e.g. a tied
maximum or a non-unique matching row); such instances are redrawn.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from ..model import COMPLETE_TOOL, Task
from .gen import World
from .tools import data_filter_rows
from ..actionlang.interp import TableHandle

Cells = list[tuple[str, str]]  # (monologue, code) pairs

TABULAR_TOOLS = ("load_db", "data_filter", "get_value", COMPLETE_TOOL)
GRAPH_TOOLS = ("load_graph", "check_nodes", "check_neighbours", "check_edges", COMPLETE_TOOL)
AGENDA_TOOLS = ("retrieve_agenda", COMPLETE_TOOL)


@dataclass(frozen=True)
class TaskTemplate:
    template_id: str
    group: str
    tools: tuple[str, ...]
    draw: Callable[[random.Random, World], dict]
    question: Callable[[dict], str]
    oracle: Callable[[dict, World], Optional[str]]
    reference_solution: Callable[[dict, World, str], Cells]


def _table_handle(world: World, name: str) -> TableHandle:
    t = world.tables[name]
    return TableHandle(t.name, t.columns, t.rows)


def _filter(world: World, table: str, condition: str):
    return data_filter_rows(_table_handle(world, table), condition)


def _col(world: World, table: str, column: str) -> int:
    return world.tables[table].columns.index(column)


def _fmt_int(x: float) -> str:
    return str(int(x))


# -- flights ------------------------------------------------------------------


def _flight_cond(ph: dict) -> str:
    return (
        f"IATA_Code_Marketing_Airline={ph['carrier']}; "
        f"Flight_Number_Marketing_Airline={ph['number']}; "
        f"Origin={ph['origin']}; Dest={ph['dest']}; FlightDate={ph['date']}"
    )


def _draw_flight_row(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["flights"].rows)
    carrier, number, origin, dest, date = row[:5]
    return {"carrier": carrier, "number": number, "origin": origin,
            "dest": dest, "date": date}


def _unique_flight_row(ph: dict, world: World):
    rows = _filter(world, "flights", _flight_cond(ph))
    return rows[0] if len(rows) == 1 else None


def _flight_deptime_oracle(ph: dict, world: World) -> Optional[str]:
    row = _unique_flight_row(ph, world)
    return None if row is None else row[_col(world, "flights", "DepTime")]


def _flight_deptime_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = _flight_cond(ph)
    return [
        (
            "I need the departure time of one specific flight. I will load the "
            "flights database, filter down to the matching row and print the value.",
            f"db = load_db('flights')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"dep = get_value(fdb, 'DepTime')\n"
            f"print(dep)",
        ),
        (
            "The printed value is the departure time, so I can finish the task.",
            f"complete_task('The departure time was', '{answer}')",
        ),
    ]


def _flight_delay_oracle(ph: dict, world: World) -> Optional[str]:
    row = _unique_flight_row(ph, world)
    if row is None:
        return None
    dep = float(row[_col(world, "flights", "DepDelayMinutes")])
    arr = float(row[_col(world, "flights", "ArrDelayMinutes")])
    return _fmt_int(arr - dep)


def _flight_delay_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = _flight_cond(ph)
    return [
        (
            "The extra minutes are arrival delay minus departure delay. I will "
            "filter to the flight and inspect both delay columns.",
            f"db = load_db('flights')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"dep = to_number(get_value(fdb, 'DepDelayMinutes'))\n"
            f"arr = to_number(get_value(fdb, 'ArrDelayMinutes'))\n"
            f"print(arr - dep)",
        ),
        (
            "I have the difference printed; I write it directly as the answer.",
            f"complete_task('The flight took extra minutes:', '{answer}')",
        ),
    ]


def _draw_origin_date(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["flights"].rows)
    return {"origin": row[2], "date": row[4]}


def _flight_count_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(world, "flights", f"Origin={ph['origin']}; FlightDate={ph['date']}")
    return _fmt_int(len(rows)) if rows else None


def _flight_count_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = f"Origin={ph['origin']}; FlightDate={ph['date']}"
    return [
        (
            "I will filter the flights database by origin and date and count rows.",
            f"db = load_db('flights')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"print(len(fdb))",
        ),
        (
            "The row count is the number of departures.",
            f"complete_task('The number of flights was', '{answer}')",
        ),
    ]


def _draw_distance(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["flights"].rows)
    return {"origin": row[2], "threshold": str(rng.choice([300, 500, 800, 1200]))}


def _flight_distance_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(
        world, "flights", f"Origin={ph['origin']}; Distance>{ph['threshold']}"
    )
    return _fmt_int(len(rows))


def _flight_distance_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = f"Origin={ph['origin']}; Distance>{ph['threshold']}"
    return [
        (
            "Distance is numeric, so the > relation in data_filter applies. "
            "I filter by origin and the distance threshold, then count rows.",
            f"db = load_db('flights')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"print(len(fdb))",
        ),
        (
            "The count of matching rows answers the question.",
            f"complete_task('The number of long flights was', '{answer}')",
        ),
    ]


# -- coffee -------------------------------------------------------------------


def _draw_coffee_date(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["coffee"].rows)
    return {"date": row[0]}


def _coffee_close_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(world, "coffee", f"Date={ph['date']}")
    return rows[0][_col(world, "coffee", "Close")] if len(rows) == 1 else None


def _coffee_close_solution(ph: dict, world: World, answer: str) -> Cells:
    return [
        (
            "I will load the coffee price series, filter to the requested date "
            "and print the closing price to check its format.",
            f"db = load_db('coffee')\n"
            f"fdb = data_filter(db, 'Date={ph['date']}')\n"
            f"close = get_value(fdb, 'Close')\n"
            f"print(close)",
        ),
        (
            "The printed value is the closing price.",
            f"complete_task('The closing price was', '{answer}')",
        ),
    ]


def _draw_coffee_range(rng: random.Random, world: World) -> dict:
    rows = world.tables["coffee"].rows
    i = rng.randrange(len(rows) - 1)
    j = rng.randrange(i + 1, len(rows))
    return {"start": rows[i][0], "end": rows[j][0]}


def _coffee_low_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(world, "coffee", f"Date>={ph['start']}; Date<={ph['end']}")
    if not rows:
        return None
    low_i = _col(world, "coffee", "Low")
    return f"{min(float(r[low_i]) for r in rows):.1f}"


def _coffee_low_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = f"Date>={ph['start']}; Date<={ph['end']}"
    return [
        (
            "I filter the series to the date range, collect the Low column and "
            "take the minimum of the parsed numbers.",
            f"db = load_db('coffee')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"lows = to_numbers(split(get_value(fdb, 'Low'), ', '))\n"
            f"print(min(lows))",
        ),
        (
            "The printed minimum is the lowest low price; I report it in the "
            "one-decimal format used by the table.",
            f"complete_task('The lowest low price was', '{answer}')",
        ),
    ]


# -- businesses (yelp-like) ---------------------------------------------------


def _draw_category_city(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["businesses"].rows)
    return {"category": row[2], "city": row[1]}


def _biz_maxreview_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(
        world, "businesses", f"Category={ph['category']}; City={ph['city']}"
    )
    if not rows:
        return None
    rc = _col(world, "businesses", "ReviewCount")
    best = max(int(r[rc]) for r in rows)
    winners = [r for r in rows if int(r[rc]) == best]
    return winners[0][0] if len(winners) == 1 else None


def _biz_maxreview_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = f"Category={ph['category']}; City={ph['city']}"
    return [
        (
            "I filter the businesses table to the category and city, then look "
            "at names and review counts to find the maximum.",
            f"db = load_db('businesses')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"names = get_value(fdb, 'Name')\n"
            f"counts = get_value(fdb, 'ReviewCount')\n"
            f"print(names)\n"
            f"print(counts)",
        ),
        (
            "Matching the highest review count to its name gives the answer.",
            f"complete_task('The business with the most reviews is', '{answer}')",
        ),
    ]


def _draw_business(rng: random.Random, world: World) -> dict:
    row = rng.choice(world.tables["businesses"].rows)
    return {"name": row[0], "city": row[1]}


def _biz_rating_oracle(ph: dict, world: World) -> Optional[str]:
    rows = _filter(world, "businesses", f"Name={ph['name']}; City={ph['city']}")
    return rows[0][_col(world, "businesses", "Rating")] if len(rows) == 1 else None


def _biz_rating_solution(ph: dict, world: World, answer: str) -> Cells:
    cond = f"Name={ph['name']}; City={ph['city']}"
    return [
        (
            "I filter the businesses table down to the named business and print "
            "its rating to check the format.",
            f"db = load_db('businesses')\n"
            f"fdb = data_filter(db, '{cond}')\n"
            f"rating = get_value(fdb, 'Rating')\n"
            f"print(rating)",
        ),
        (
            "The printed value is the rating.",
            f"complete_task('The rating is', '{answer}')",
        ),
    ]


# -- graph --------------------------------------------------------------------


def _draw_paper(rng: random.Random, world: World) -> dict:
    return {"title": rng.choice(sorted(world.graph.papers))}


def _graph_citations_oracle(ph: dict, world: World) -> Optional[str]:
    paper = world.graph.papers.get(ph["title"])
    if paper is None:
        return None
    return str(paper["number of citations for this paper"])


def _graph_citations_solution(ph: dict, world: World, answer: str) -> Cells:
    title = ph["title"].replace("'", "\\'")
    return [
        (
            "I load the graph and check the paper node; its attributes include "
            "the citation count, which I should return directly.",
            f"g = load_graph()\n"
            f"attrs = check_nodes(g, 'PaperNet', '{title}')\n"
            f"print(attrs)",
        ),
        (
            "The citation count is in the printed attributes.",
            f"complete_task('The number of citations is', '{answer}')",
        ),
    ]


def _draw_author(rng: random.Random, world: World) -> dict:
    connected = sorted(a for a in world.graph.authors if world.graph.neighbours(a))
    if not connected:
        return {"author": ""}
    return {"author": rng.choice(connected)}


def _graph_coauthors_oracle(ph: dict, world: World) -> Optional[str]:
    if ph["author"] not in world.graph.authors:
        return None
    neigh = world.graph.neighbours(ph["author"])
    return ", ".join(neigh) if neigh else None


def _graph_coauthors_solution(ph: dict, world: World, answer: str) -> Cells:
    author = ph["author"].replace("'", "\\'")
    return [
        (
            "Co-authors are the author's neighbours in AuthorNet. I load the "
            "graph and list them.",
            f"g = load_graph()\n"
            f"names = check_neighbours(g, 'AuthorNet', '{author}')\n"
            f"print(join(', ', names))",
        ),
        (
            "The joined list is the required comma-and-space format.",
            f"complete_task('The co-authors are', '{answer}')",
        ),
    ]


# -- agenda-lite --------------------------------------------------------------


def _draw_agenda(rng: random.Random, world: World) -> dict:
    doc = rng.choice(world.agenda_docs)
    # "<person> attended the <event> at <place> on <Month D, YYYY>."
    text = doc.text
    person = text.split(" attended the ")[0]
    rest = text.split(" attended the ")[1]
    event = rest.split(" at ")[0]
    place = rest.split(" at ")[1].rsplit(" on ", 1)[0]
    date_words = rest.rsplit(" on ", 1)[1].rstrip(".")
    return {"person": person, "event": event, "place": place, "date_words": date_words}


def _agenda_unique(ph: dict, world: World) -> bool:
    hits = [
        d for d in world.agenda_docs
        if d.text.startswith(f"{ph['person']} attended the {ph['event']} ")
    ]
    return len(hits) == 1


def _agenda_place_oracle(ph: dict, world: World) -> Optional[str]:
    return ph["place"] if _agenda_unique(ph, world) else None


def _agenda_solution_prefix(ph: dict) -> tuple[str, str]:
    query = f"{ph['person']} {ph['event']}"
    return (
        "I write a query naming the person and the event and retrieve a few "
        "documents, then read them to find the fact asked for.",
        f"docs = retrieve_agenda('{query}', 3)\n"
        f"print(docs[0])\nprint(docs[1])\nprint(docs[2])",
    )


def _agenda_place_solution(ph: dict, world: World, answer: str) -> Cells:
    return [
        _agenda_solution_prefix(ph),
        (
            "The first document names the place exactly as written; I answer "
            "with the exact phrase from the document.",
            f"complete_task('The event took place at', '{answer}')",
        ),
    ]


def _agenda_date_oracle(ph: dict, world: World) -> Optional[str]:
    return ph["date_words"] if _agenda_unique(ph, world) else None


def _agenda_date_solution(ph: dict, world: World, answer: str) -> Cells:
    return [
        _agenda_solution_prefix(ph),
        (
            "The document spells the date in words; I copy it verbatim.",
            f"complete_task('The event date was', '{answer}')",
        ),
    ]


DEFAULT_TEMPLATES: tuple[TaskTemplate, ...] = (
    TaskTemplate(
        "flight-deptime", "flights", TABULAR_TOOLS, _draw_flight_row,
        lambda ph: (
            f"What was the departure time of the {ph['carrier']}{ph['number']} flight "
            f"from {ph['origin']} to {ph['dest']} on {ph['date']}?"
        ),
        _flight_deptime_oracle, _flight_deptime_solution,
    ),
    TaskTemplate(
        "flight-delay", "flights", TABULAR_TOOLS, _draw_flight_row,
        lambda ph: (
            f"How many extra minutes did the {ph['carrier']}{ph['number']} flight take "
            f"from {ph['origin']} to {ph['dest']} on {ph['date']}?"
        ),
        _flight_delay_oracle, _flight_delay_solution,
    ),
    TaskTemplate(
        "flight-count", "flights", TABULAR_TOOLS, _draw_origin_date,
        lambda ph: f"How many flights departed from {ph['origin']} on {ph['date']}?",
        _flight_count_oracle, _flight_count_solution,
    ),
    TaskTemplate(
        "flight-distance-count", "flights", TABULAR_TOOLS, _draw_distance,
        lambda ph: (
            f"How many flights from {ph['origin']} covered a distance greater than "
            f"{ph['threshold']} miles?"
        ),
        _flight_distance_oracle, _flight_distance_solution,
    ),
    TaskTemplate(
        "coffee-close", "coffee", TABULAR_TOOLS, _draw_coffee_date,
        lambda ph: f"What was the closing price of coffee on {ph['date']}?",
        _coffee_close_oracle, _coffee_close_solution,
    ),
    TaskTemplate(
        "coffee-lowest", "coffee", TABULAR_TOOLS, _draw_coffee_range,
        lambda ph: (
            f"What was the lowest low price of coffee between {ph['start']} and "
            f"{ph['end']} (inclusive)?"
        ),
        _coffee_low_oracle, _coffee_low_solution,
    ),
    TaskTemplate(
        "biz-max-reviews", "yelp", TABULAR_TOOLS, _draw_category_city,
        lambda ph: (
            f"Which {ph['category']} business has the highest review count in "
            f"{ph['city']}?"
        ),
        _biz_maxreview_oracle, _biz_maxreview_solution,
    ),
    TaskTemplate(
        "biz-rating", "yelp", TABULAR_TOOLS, _draw_business,
        lambda ph: f"What is the rating of {ph['name']} in {ph['city']}?",
        _biz_rating_oracle, _biz_rating_solution,
    ),
    TaskTemplate(
        "graph-citations", "graph", GRAPH_TOOLS, _draw_paper,
        lambda ph: f"How many citations does the paper \"{ph['title']}\" have?",
        _graph_citations_oracle, _graph_citations_solution,
    ),
    TaskTemplate(
        "graph-coauthors", "graph", GRAPH_TOOLS, _draw_author,
        lambda ph: (
            f"Who are the co-authors of {ph['author']}? Separate the authors with "
            f"comma and space ', '."
        ),
        _graph_coauthors_oracle, _graph_coauthors_solution,
    ),
    TaskTemplate(
        "agenda-place", "agenda-lite", AGENDA_TOOLS, _draw_agenda,
        lambda ph: f"Where did {ph['person']} attend the {ph['event']}?",
        _agenda_place_oracle, _agenda_place_solution,
    ),
    TaskTemplate(
        "agenda-date", "agenda-lite", AGENDA_TOOLS, _draw_agenda,
        lambda ph: (
            f"On which date did {ph['person']} attend the {ph['event']}? "
            f"Answer like 'April 5, 2022'."
        ),
        _agenda_date_oracle, _agenda_date_solution,
    ),
)

TEMPLATES_BY_ID = {t.template_id: t for t in DEFAULT_TEMPLATES}

TASK_PREAMBLE = (
    "In this task, you are asked to answer a question by retrieving information "
    "with the provided tools.\n\nHere is the question:\n{question}\n\n"
    "When you complete the task, call complete_task with the answer as a string."
)

MAX_REDRAWS = 80


class AmbiguousTemplateError(RuntimeError):
    pass


def _split_counts(n: int, ratios: tuple[float, float, float]) -> list[int]:
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    base = [int(n * r) for r in ratios]
    rem = n - sum(base)
    order = sorted(range(3), key=lambda i: (n * ratios[i]) - base[i], reverse=True)
    for i in range(rem):
        base[order[i % 3]] += 1
    if n >= 3:
        for i in range(3):
            if base[i] == 0 and ratios[i] > 0:
                donor = max(range(3), key=lambda j: base[j])
                base[donor] -= 1
                base[i] += 1
    return base


def instantiate_tasks_with_solutions(
    templates: tuple[TaskTemplate, ...],
    world: World,
    n_per_template: int,
    split_ratios: tuple[float, float, float] = (0.6, 0.1, 0.3),
    seed: int = 0,
) -> tuple[list[Task], dict[str, Cells]]:
    """Fills placeholders, computes oracle answers, assigns per-template splits.

    Also returns task_id -> reference solution cells (executed in CI and used
    by the scripted backend).
    """
    rng = random.Random(seed)
    tasks: list[Task] = []
    solutions: dict[str, Cells] = {}
    for template in templates:
        instances: list[tuple[dict, str]] = []
        questions_seen: set[str] = set()
        attempts = 0
        while len(instances) < n_per_template:
            attempts += 1
            if attempts > MAX_REDRAWS * n_per_template:
                raise AmbiguousTemplateError(
                    f"template {template.template_id}: could not draw "
                    f"{n_per_template} unambiguous instances"
                )
            ph = template.draw(rng, world)
            question = template.question(ph)
            if question in questions_seen:
                continue
            answer = template.oracle(ph, world)
            if answer is None or answer == "":
                continue  # ambiguous instance: redraw
            questions_seen.add(question)
            instances.append((ph, answer))
        counts = _split_counts(n_per_template, split_ratios)
        order = list(range(n_per_template))
        rng.shuffle(order)
        split_of: dict[int, str] = {}
        cursor = 0
        for split, c in zip(("train", "valid", "test"), counts):
            for k in order[cursor:cursor + c]:
                split_of[k] = split
            cursor += c
        for k, (ph, answer) in enumerate(instances):
            question = template.question(ph)
            task_id = f"{template.template_id}-{k:03d}"
            tasks.append(
                Task(
                    task_id=task_id,
                    group=template.group,
                    template_id=template.template_id,
                    description=TASK_PREAMBLE.format(question=question),
                    expected_answer=answer,
                    split=split_of[k],
                    tool_allowlist=template.tools,
                )
            )
            solutions[task_id] = template.reference_solution(ph, world, answer)
    return tasks, solutions


def instantiate_tasks(
    templates: tuple[TaskTemplate, ...],
    world: World,
    n_per_template: int,
    split_ratios: tuple[float, float, float] = (0.6, 0.1, 0.3),
    seed: int = 0,
) -> list[Task]:
    tasks, _ = instantiate_tasks_with_solutions(
        templates, world, n_per_template, split_ratios, seed
    )
    return tasks
