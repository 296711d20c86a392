"""Deterministic generation of the toy task world.

Same seed -> byte-identical world. All table cells are stored as text.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

AIRPORTS = ["BUF", "PHL", "JFK", "LAX", "ORD", "ATL", "DFW", "SEA", "DEN", "MIA"]
CARRIERS = ["AA", "DL", "UA", "WN", "B6", "G4", "F9"]
CITIES = ["Reno", "Austin", "Boise", "Savannah", "Madison", "Tulsa"]
CATEGORIES = ["Bakery", "Coffee", "Bar", "Bookstore", "Gym"]
NAME_FIRST = ["Moonrise", "Golden", "Rustic", "Urban", "Prairie", "Harbor", "Cedar",
              "Velvet", "Copper", "Juniper", "Lively", "Quiet"]
NAME_SECOND = ["Table", "Fork", "Bean", "Page", "Barbell", "Loaf", "Mug", "Corner",
               "Nook", "Press", "Garden", "Works"]

AUTHOR_FIRST = ["Wei", "Anna", "Tomas", "Priya", "Jonas", "Mei", "Carlos", "Sofia",
                "Ivan", "Lena", "Noah", "Amara"]
AUTHOR_LAST = ["Zhang", "Kowalski", "Berg", "Rao", "Lindqvist", "Chen", "Mendez",
               "Rossi", "Petrov", "Okafor", "Tanaka", "Novak"]
VENUES = ["ICML", "NeurIPS", "AAAI", "ACL", "KDD"]
TITLE_ADJ = ["Sparse", "Robust", "Latent", "Neural", "Causal", "Efficient",
             "Adaptive", "Modular", "Scalable", "Compositional"]
TITLE_NOUN = ["Representations", "Planning", "Alignment", "Retrieval", "Distillation",
              "Reasoning", "Abstraction", "Exploration", "Generalization", "Curricula"]
TITLE_TAIL = ["for Sequential Decision Making", "in Open Worlds", "under Distribution Shift",
              "with Limited Supervision", "at Scale", "from Human Feedback"]

PEOPLE = ["Grace", "Victor", "Noor", "Hiro", "Elif", "Marta", "Dmitri", "Yara"]
EVENTS = ["Broadway Show", "Jazz Festival", "Pottery Workshop", "Science Fair",
          "Book Launch", "Marathon", "Wine Tasting", "Chess Tournament"]
PLACES = ["the Riverside Theater", "Grand Hall", "the Maple Street Gallery",
          "Union Square", "the Observatory Deck", "Cedar Park Pavilion"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December"]


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for r in self.rows:
            assert len(r) == len(self.columns), "row width mismatch"


@dataclass(frozen=True)
class Graph:
    """paper-net: title -> attrs; author-net: name -> org, plus symmetric edges."""

    papers: dict[str, dict[str, Any]]
    authors: dict[str, dict[str, Any]]
    edges: dict[tuple[str, str], dict[str, Any]]  # key is sorted author pair

    def neighbours(self, author: str) -> list[str]:
        out = []
        for (a, b) in self.edges:
            if a == author:
                out.append(b)
            elif b == author:
                out.append(a)
        return sorted(out)


@dataclass(frozen=True)
class AgendaDoc:
    doc_id: str
    text: str


@dataclass
class World:
    seed: int
    tables: dict[str, Table] = field(default_factory=dict)
    graph: Graph = None  # type: ignore[assignment]
    agenda_docs: list[AgendaDoc] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "tables": {
                name: {"columns": list(t.columns), "rows": [list(r) for r in t.rows]}
                for name, t in self.tables.items()
            },
            "graph": {
                "papers": self.graph.papers,
                "authors": self.graph.authors,
                "edges": [
                    {"pair": list(k), "attrs": v} for k, v in self.graph.edges.items()
                ],
            },
            "agenda_docs": [{"doc_id": d.doc_id, "text": d.text} for d in self.agenda_docs],
        }

    @classmethod
    def from_json(cls, d: dict) -> "World":
        tables = {
            name: Table(name, tuple(t["columns"]), tuple(tuple(r) for r in t["rows"]))
            for name, t in d["tables"].items()
        }
        graph = Graph(
            papers=d["graph"]["papers"],
            authors=d["graph"]["authors"],
            edges={tuple(e["pair"]): e["attrs"] for e in d["graph"]["edges"]},
        )
        docs = [AgendaDoc(x["doc_id"], x["text"]) for x in d["agenda_docs"]]
        return cls(seed=d["seed"], tables=tables, graph=graph, agenda_docs=docs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {**self.to_json(), "graph": {
                    "papers": self.graph.papers,
                    "authors": self.graph.authors,
                    "edges": [{"pair": list(k), "attrs": v} for k, v in self.graph.edges.items()],
                }},
                sort_keys=True, indent=1,
            )
        )

    @classmethod
    def load(cls, path: str | Path) -> "World":
        return cls.from_json(json.loads(Path(path).read_text()))


DEFAULT_SIZES = {"flights": 60, "coffee": 40, "businesses": 30, "papers": 18, "agenda": 24}


def _gen_flights(rng: random.Random, n: int) -> Table:
    columns = (
        "IATA_Code_Marketing_Airline", "Flight_Number_Marketing_Airline",
        "Origin", "Dest", "FlightDate", "DepTime",
        "DepDelayMinutes", "ArrDelayMinutes", "Distance", "AirTime",
    )
    rows = []
    for _ in range(n):
        carrier = rng.choice(CARRIERS)
        number = str(rng.randint(100, 999))
        origin = rng.choice(AIRPORTS)
        dest = rng.choice([a for a in AIRPORTS if a != origin])
        date = f"2022-04-{rng.randint(1, 30):02d}"
        dep_h = rng.randint(6, 22)
        dep_m = rng.randint(0, 59)
        dep_time = f"{dep_h}{dep_m:02d}.0"
        dep_delay = f"{rng.randint(0, 90)}.0"
        arr_delay = f"{rng.randint(0, 120)}.0"
        distance = f"{rng.randint(120, 2600)}.0"
        air_time = f"{rng.randint(40, 330)}.0"
        rows.append((carrier, number, origin, dest, date, dep_time,
                     dep_delay, arr_delay, distance, air_time))
    return Table("flights", columns, tuple(rows))


def _gen_coffee(rng: random.Random, n: int) -> Table:
    columns = ("Date", "Low", "High", "Close")
    rows = []
    price = rng.uniform(35.0, 55.0)
    day = 0
    for _ in range(n):
        day += rng.randint(1, 3)
        month = 1 + day // 28
        dom = 1 + day % 28
        date = f"2000-{month:02d}-{dom:02d}"
        low = price - rng.uniform(0.1, 2.0)
        high = price + rng.uniform(0.1, 2.0)
        close = rng.uniform(low, high)
        rows.append((date, f"{low:.1f}", f"{high:.1f}", f"{close:.1f}"))
        price = max(20.0, price + rng.uniform(-1.5, 1.5))
    return Table("coffee", columns, tuple(rows))


def _gen_businesses(rng: random.Random, n: int) -> Table:
    columns = ("Name", "City", "Category", "ReviewCount", "Rating")
    rows = []
    names_used: set[str] = set()
    for _ in range(n):
        while True:
            name = f"{rng.choice(NAME_FIRST)} {rng.choice(NAME_SECOND)}"
            if name not in names_used:
                names_used.add(name)
                break
        city = rng.choice(CITIES)
        category = rng.choice(CATEGORIES)
        reviews = str(rng.randint(5, 900))
        rating = f"{rng.choice([3.0, 3.5, 4.0, 4.5, 5.0]):.1f}"
        rows.append((name, city, category, reviews, rating))
    return Table("businesses", columns, tuple(rows))


def _gen_graph(rng: random.Random, n_papers: int) -> Graph:
    author_pool = [f"{f} {l}" for f in AUTHOR_FIRST for l in AUTHOR_LAST]
    rng.shuffle(author_pool)
    authors_used: dict[str, dict[str, Any]] = {}
    papers: dict[str, dict[str, Any]] = {}
    edges: dict[tuple[str, str], dict[str, Any]] = {}
    titles_used: set[str] = set()
    active = author_pool[: max(6, n_papers // 2)]
    for _ in range(n_papers):
        while True:
            title = (
                f"{rng.choice(TITLE_ADJ)} {rng.choice(TITLE_NOUN)} "
                f"{rng.choice(TITLE_TAIL)}."
            )
            if title not in titles_used:
                titles_used.add(title)
                break
        team = rng.sample(active, rng.randint(1, 3))
        citations = rng.randint(0, 450)
        papers[title] = {
            "title": title,
            "authors": sorted(team),
            "year": rng.randint(2015, 2024),
            "venue": rng.choice(VENUES),
            "number of citations for this paper": citations,
        }
        for a in team:
            authors_used.setdefault(a, {"org": f"{rng.choice(CITIES)} Institute"})
        for i in range(len(team)):
            for j in range(i + 1, len(team)):
                key = tuple(sorted((team[i], team[j])))
                e = edges.setdefault(key, {"weight": 0, "papers": [],
                                           "number of citations for this paper": []})
                e["weight"] += 1
                e["papers"].append(title)
                e["number of citations for this paper"].append(citations)
    return Graph(papers=papers, authors=authors_used, edges=edges)


def _gen_agenda(rng: random.Random, n: int) -> list[AgendaDoc]:
    docs = []
    seen: set[tuple[str, str]] = set()
    for i in range(n):
        while True:
            person = rng.choice(PEOPLE)
            event = rng.choice(EVENTS)
            if (person, event) not in seen:
                seen.add((person, event))
                break
        place = rng.choice(PLACES)
        month = rng.choice(MONTHS)
        day = rng.randint(1, 28)
        text = (
            f"{person} attended the {event} at {place} on {month} {day}, 2022."
        )
        docs.append(AgendaDoc(f"doc-{i:04d}", text))
    return docs


def generate_world(seed: int, sizes: dict[str, int] | None = None) -> World:
    sizes = {**DEFAULT_SIZES, **(sizes or {})}
    for name, n in sizes.items():
        if n < 1:
            raise ValueError(f"sizes[{name!r}] must be >= 1")
    rng = random.Random(seed)
    world = World(seed=seed)
    world.tables["flights"] = _gen_flights(rng, sizes["flights"])
    world.tables["coffee"] = _gen_coffee(rng, sizes["coffee"])
    world.tables["businesses"] = _gen_businesses(rng, sizes["businesses"])
    world.graph = _gen_graph(rng, sizes["papers"])
    world.agenda_docs = _gen_agenda(rng, sizes["agenda"])
    return world
