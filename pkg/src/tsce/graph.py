"""Weighted temporal causal graphs and context-indexed graph sets."""

from __future__ import annotations

import json
import logging
import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import GraphError, NoContextError, VariableNotFoundError
from .predicate import Predicate

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
KINDS = ("continuous", "binary")

Node = tuple  # (variable name, time index)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"variable {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Edge:
    """``src`` at time ``t - lag`` causes ``dst`` at time ``t`` with coefficient ``weight``."""

    src: str
    dst: str
    lag: int
    weight: float


def _zero_lag_cycle(names, edges):
    """Return one variable on a zero-lag cycle, or None (Kahn's algorithm)."""
    indeg = {n: 0 for n in names}
    out = {n: [] for n in names}
    for e in edges:
        if e.lag == 0:
            indeg[e.dst] += 1
            out[e.src].append(e.dst)
    queue = deque(n for n in names if indeg[n] == 0)
    seen = 0
    while queue:
        n = queue.popleft()
        seen += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    if seen == len(names):
        return None
    return sorted(n for n in names if indeg[n] > 0)[0]


class TemporalCausalGraph:
    """Immutable weighted graph whose edges carry a time lag.

    ``max_lag`` bounds edge lags at construction; graphs produced by masking
    pass ``max_lag=None`` because bypass edges add up constituent lags.
    """

    def __init__(self, variables: Iterable[Variable], edges: Iterable[Edge], max_lag: Optional[int] = 1):
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise GraphError(f"duplicate variable names: {dup}")
        self.variables = variables
        self._kind = {v.name: v.kind for v in variables}

        edges = tuple(Edge(e.src, e.dst, int(e.lag), float(e.weight)) for e in edges)
        keys = set()
        for e in edges:
            for end in (e.src, e.dst):
                if end not in self._kind:
                    raise GraphError(f"edge {e.src}->{e.dst} references undeclared variable {end!r}")
            if e.weight == 0:
                raise GraphError(f"edge {e.src}->{e.dst} (lag {e.lag}) has zero weight")
            if e.lag < 0 or (max_lag is not None and e.lag > max_lag):
                raise GraphError(f"edge {e.src}->{e.dst} has unsupported lag {e.lag}")
            if e.lag == 0 and e.src == e.dst:
                raise GraphError(f"zero-lag self-edge on {e.src!r}")
            key = (e.src, e.dst, e.lag)
            if key in keys:
                raise GraphError(f"duplicate edge {e.src}->{e.dst} with lag {e.lag}")
            keys.add(key)
        bad = _zero_lag_cycle(names, edges)
        if bad is not None:
            raise GraphError(f"zero-lag subgraph has a cycle through {bad!r}")

        self.edges = tuple(sorted(edges, key=lambda e: (e.dst, e.src, e.lag)))
        self._in = {n: [] for n in names}
        self._out = {n: [] for n in names}
        for e in self.edges:
            self._in[e.dst].append(e)
            self._out[e.src].append(e)
        self._weights = {(e.src, e.dst, e.lag): e.weight for e in self.edges}

    # ------------------------------------------------------------------ basics
    @property
    def names(self):
        return tuple(v.name for v in self.variables)

    def __contains__(self, name):
        return name in self._kind

    def kind(self, name: str) -> str:
        self._check(name)
        return self._kind[name]

    def weight(self, src: str, dst: str, lag: int) -> Optional[float]:
        return self._weights.get((src, dst, lag))

    def _check(self, name):
        if name not in self._kind:
            raise VariableNotFoundError(f"variable {name!r} not found in graph")

    def __eq__(self, other):
        return (
            isinstance(other, TemporalCausalGraph)
            and self.variables == other.variables
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"TemporalCausalGraph({len(self.variables)} variables, {len(self.edges)} edges)"

    # ------------------------------------------------------------ local queries
    def parent_edges(self, v: str, t: int):
        """Incoming edges of ``(v, t)`` as ``(edge, parent time)``, ordered by name then time."""
        self._check(v)
        if t < 0:
            raise GraphError(f"negative time index {t}")
        found = [(e, t - e.lag) for e in self._in[v] if t - e.lag >= 0]
        found.sort(key=lambda p: (p[0].src, p[1]))
        return found

    def child_edges(self, v: str, t: int):
        self._check(v)
        if t < 0:
            raise GraphError(f"negative time index {t}")
        found = [(e, t + e.lag) for e in self._out[v]]
        found.sort(key=lambda p: (p[0].dst, p[1]))
        return found

    def parents(self, v: str, t: int):
        return [(e.src, s) for e, s in self.parent_edges(v, t)]

    def children(self, v: str, t: int):
        return [(e.dst, s) for e, s in self.child_edges(v, t)]

    # ------------------------------------------------------------ closures
    def ancestors(self, v: str, t: int) -> set:
        """All ``(variable, time)`` nodes with a directed path into ``(v, t)``."""
        seen = set()
        queue = deque(self.parents(v, t))
        while queue:
            node = queue.popleft()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(self.parents(*node))
        return seen

    def descendants(self, v: str, t: int, horizon: int) -> set:
        """All nodes reachable from ``(v, t)`` at times ``<= horizon``."""
        if horizon < t:
            raise GraphError(f"horizon {horizon} precedes query time {t}")
        seen = set()
        queue = deque(c for c in self.children(v, t) if c[1] <= horizon)
        while queue:
            node = queue.popleft()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(c for c in self.children(*node) if c[1] <= horizon)
        return seen

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        return {
            "variables": [{"name": v.name, "kind": v.kind} for v in self.variables],
            "edges": [{"src": e.src, "dst": e.dst, "lag": e.lag, "weight": e.weight} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping, max_lag: Optional[int] = 1) -> "TemporalCausalGraph":
        try:
            variables = [Variable(v["name"], v.get("kind", "continuous")) for v in data["variables"]]
            edges = [Edge(e["src"], e["dst"], e.get("lag", 0), e["weight"]) for e in data["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: missing {exc}") from None
        return cls(variables, edges, max_lag=max_lag)

    def save(self, path):
        payload = {"version": FORMAT_VERSION, **self.to_dict()}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path, max_lag: Optional[int] = 1):
        return cls.from_dict(json.loads(Path(path).read_text()), max_lag=max_lag)


# ---------------------------------------------------------------------------
# contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Context:
    name: str
    predicate: Predicate
    graph: Optional[TemporalCausalGraph]


class ContextSet:
    """Ordered named contexts, each a row predicate plus the graph valid under it.

    Selection is first-match; :meth:`check_rows` verifies that the contexts
    cover a dataset and warns where they overlap.
    """

    def __init__(self, contexts: Iterable[Context]):
        self.contexts = tuple(contexts)
        if not self.contexts:
            raise GraphError("a context set needs at least one context")
        names = [c.name for c in self.contexts]
        if len(set(names)) != len(names):
            raise GraphError(f"duplicate context names in {names}")
        self._by_name = {c.name: c for c in self.contexts}

    @classmethod
    def single(cls, graph, name="default"):
        return cls([Context(name, Predicate("true"), graph)])

    def __len__(self):
        return len(self.contexts)

    def __iter__(self):
        return iter(self.contexts)

    def __getitem__(self, name) -> Context:
        try:
            return self._by_name[name]
        except KeyError:
            raise NoContextError(f"no context named {name!r}") from None

    @property
    def names(self):
        return tuple(c.name for c in self.contexts)

    def select(self, row: Mapping) -> Context:
        for ctx in self.contexts:
            if ctx.predicate(row):
                return ctx
        shown = {k: row[k] for k in sorted(self.predicate_variables) if k in row}
        raise NoContextError(f"no context matches row {shown}")

    @property
    def predicate_variables(self):
        out = set()
        for c in self.contexts:
            out |= c.predicate.variables
        return out

    def check_rows(self, rows: Iterable[Mapping], label="dataset") -> int:
        """Raise if any row is uncovered; warn once if rows match several contexts.

        Returns the number of overlapping rows.
        """
        overlaps = 0
        for i, row in enumerate(rows):
            hits = [c.name for c in self.contexts if c.predicate(row)]
            if not hits:
                raise NoContextError(f"{label} row {i} matches no context")
            if len(hits) > 1:
                overlaps += 1
        if overlaps:
            warnings.warn(
                f"{overlaps} rows of {label} match several contexts; first match wins",
                stacklevel=2,
            )
        return overlaps

    def with_graphs(self, graphs: Mapping[str, TemporalCausalGraph]) -> "ContextSet":
        return ContextSet(Context(c.name, c.predicate, graphs.get(c.name, c.graph)) for c in self.contexts)

    def require_graphs(self):
        missing = [c.name for c in self.contexts if c.graph is None]
        if missing:
            raise GraphError(f"contexts without a graph: {missing}")
        return self

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "contexts": [
                {
                    "name": c.name,
                    "predicate": c.predicate.source,
                    "graph": None if c.graph is None else c.graph.to_dict(),
                }
                for c in self.contexts
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping, require_graphs=True) -> "ContextSet":
        if "contexts" not in data:
            # a bare graph file is a single always-true context
            return cls.single(TemporalCausalGraph.from_dict(data))
        contexts = []
        for entry in data["contexts"]:
            graph = entry.get("graph")
            contexts.append(
                Context(
                    entry["name"],
                    Predicate(entry.get("predicate", "true")),
                    None if graph is None else TemporalCausalGraph.from_dict(graph),
                )
            )
        cs = cls(contexts)
        return cs.require_graphs() if require_graphs else cs

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path, require_graphs=True):
        return cls.from_dict(json.loads(Path(path).read_text()), require_graphs=require_graphs)


# ---------------------------------------------------------------------------
# reference graphs
# ---------------------------------------------------------------------------

HANS_VARIABLES = ("Age", "Nutrition", "Health", "Mobility")


def hans_graph(temporal: bool = True, persistence: float = 0.6) -> TemporalCausalGraph:
    """The Causal Hans graph with its generating coefficients.

    The temporal version adds lag-1 self-edges: Age carries over with weight
    1, the other variables with the carry-over factor ``persistence``.
    """
    variables = [Variable(n) for n in HANS_VARIABLES]
    edges = [
        Edge("Age", "Nutrition", 0, 0.5),
        Edge("Age", "Health", 0, -0.2),
        Edge("Nutrition", "Health", 0, 0.6),
        Edge("Health", "Mobility", 0, 0.5),
    ]
    if temporal:
        edges.append(Edge("Age", "Age", 1, 1.0))
        edges += [Edge(n, n, 1, persistence) for n in HANS_VARIABLES[1:]]
    return TemporalCausalGraph(variables, edges)


def killer_contexts(graphs: Optional[Mapping[str, TemporalCausalGraph]] = None) -> ContextSet:
    """The three Killer-agent regimes keyed on sprite existence."""
    graphs = graphs or {}
    spec = [
        ("C_K1", "powerup_exists == 1 and enemy_exists == 1"),
        ("C_K2", "powerup_exists == 0 and enemy_exists == 1"),
        ("C_K3", "powerup_exists == 0 and enemy_exists == 0"),
    ]
    return ContextSet(Context(name, Predicate(src), graphs.get(name)) for name, src in spec)
