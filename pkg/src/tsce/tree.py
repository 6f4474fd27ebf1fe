"""Explanation tree data structures and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .errors import TreeError
from .rules import ERTriple

FORMAT_VERSION = 1
MODES = ("retrospective", "anticipative")
SELECT_MODES = ("all", "threshold", "topn", "threshold_or_topn")


@dataclass(frozen=True)
class SelectionConfig:
    """Which explainers to keep per node and how deep to recurse.

    ``threshold`` keeps ``|alpha| > theta``, ``topn`` the ``n`` strongest,
    ``threshold_or_topn`` the union of both.
    """

    mode: str = "all"
    theta: Optional[float] = None
    n: Optional[int] = None
    K: int = 2
    mostly: bool = True

    def __post_init__(self):
        if self.mode not in SELECT_MODES:
            raise TreeError(f"unknown selection mode {self.mode!r}")
        if self.mode in ("threshold", "threshold_or_topn") and (self.theta is None or self.theta < 0):
            raise TreeError(f"selection mode {self.mode!r} needs theta >= 0")
        if self.mode in ("topn", "threshold_or_topn") and (self.n is None or self.n < 1):
            raise TreeError(f"selection mode {self.mode!r} needs n >= 1")
        if self.K < 0:
            raise TreeError("recursion depth K must be >= 0")

    @classmethod
    def parse(cls, text: str, K: int = 2, mostly: bool = True) -> "SelectionConfig":
        """Parse ``all``, ``topn:2``, ``theta:0.05`` or ``theta:0.05,topn:2``."""
        theta = n = None
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if parts == ["all"]:
            return cls("all", K=K, mostly=mostly)
        try:
            for part in parts:
                key, _, val = part.partition(":")
                if key == "theta":
                    theta = float(val)
                elif key == "topn":
                    n = int(val)
                else:
                    raise ValueError(part)
        except ValueError:
            raise TreeError(f"cannot parse selection {text!r}") from None
        if theta is not None and n is not None:
            mode = "threshold_or_topn"
        elif theta is not None:
            mode = "threshold"
        elif n is not None:
            mode = "topn"
        else:
            raise TreeError(f"cannot parse selection {text!r}")
        return cls(mode, theta, n, K, mostly)

    def to_dict(self):
        return {"mode": self.mode, "theta": self.theta, "n": self.n, "K": self.K, "mostly": self.mostly}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("mode", "all"), d.get("theta"), d.get("n"), d.get("K", 2), d.get("mostly", True))


@dataclass(frozen=True)
class ExplanationNode:
    id: int
    var: str
    t: int
    context: str
    value: Optional[float]
    phi: Optional[float] = None
    er: Optional[ERTriple] = None
    alpha: Optional[float] = None
    kind: str = "continuous"
    depth: int = 0
    seq: Optional[int] = None

    @property
    def key(self):
        return (self.var, self.t)

    def to_dict(self):
        return {
            "id": self.id,
            "var": self.var,
            "t": self.t,
            "context": self.context,
            "value": self.value,
            "phi": self.phi,
            "er": None if self.er is None else list(self.er),
            "seq": self.seq,
            "alpha": self.alpha,
            "kind": self.kind,
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            er = d.get("er")
            return cls(
                id=int(d["id"]),
                var=d["var"],
                t=int(d["t"]),
                context=d.get("context", "default"),
                value=d.get("value"),
                phi=d.get("phi"),
                er=None if er is None else ERTriple(*map(int, er)),
                alpha=d.get("alpha"),
                kind=d.get("kind", "continuous"),
                depth=int(d.get("depth", 0)),
                seq=d.get("seq"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeError(f"malformed tree node {d!r}: {exc}") from None


@dataclass(frozen=True)
class ExplanationTree:
    """Rooted tree of explanation nodes; node ``id`` equals its position in ``nodes``."""

    nodes: tuple
    edges: tuple
    mode: str = "retrospective"
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    question: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise TreeError(f"unknown tree mode {self.mode!r}")
        if not self.nodes:
            raise TreeError("a tree needs a root node")
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise TreeError(f"node ids must be positional, node {i} has id {node.id}")
        kids = [[] for _ in self.nodes]
        parent = [None] * len(self.nodes)
        for p, c in self.edges:
            if not (0 <= p < len(self.nodes) and 0 <= c < len(self.nodes)):
                raise TreeError(f"edge ({p}, {c}) references a missing node")
            if parent[c] is not None or c == 0:
                raise TreeError(f"node {c} has more than one tree parent")
            parent[c] = p
            kids[p].append(c)
        orphans = [i for i in range(1, len(self.nodes)) if parent[i] is None]
        if orphans:
            raise TreeError(f"nodes {orphans} are not attached to the tree")
        object.__setattr__(self, "_kids", tuple(tuple(k) for k in kids))
        object.__setattr__(self, "_parent", tuple(parent))

    @property
    def root(self) -> ExplanationNode:
        return self.nodes[0]

    @property
    def K(self) -> int:
        return self.selection.K

    def children(self, node_id: int):
        return [self.nodes[c] for c in self._kids[node_id]]

    def child_ids(self, node_id: int):
        return self._kids[node_id]

    def parent(self, node_id: int) -> Optional[ExplanationNode]:
        p = self._parent[node_id]
        return None if p is None else self.nodes[p]

    def parent_id(self, node_id: int) -> Optional[int]:
        return self._parent[node_id]

    def is_leaf(self, node_id: int) -> bool:
        return not self._kids[node_id]

    def inner_nodes(self):
        return [n for n in self.nodes if self._kids[n.id]]

    def find(self, var: str, t: int):
        return [n for n in self.nodes if n.var == var and n.t == t]

    def path_to(self, node_id: int):
        """Node ids from the root down to ``node_id``."""
        path = [node_id]
        while self._parent[path[-1]] is not None:
            path.append(self._parent[path[-1]])
        return path[::-1]

    def replace_nodes(self, nodes: Sequence[ExplanationNode]) -> "ExplanationTree":
        return replace(self, nodes=tuple(nodes))

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "mode": self.mode,
            "K": self.selection.K,
            "selection": self.selection.to_dict(),
            "question": self.question,
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [[p, c] for p, c in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ExplanationTree":
        try:
            sel = dict(d.get("selection") or {})
            sel.setdefault("K", d.get("K", 2))
            return cls(
                nodes=tuple(ExplanationNode.from_dict(n) for n in d["nodes"]),
                edges=tuple((int(p), int(c)) for p, c in d["edges"]),
                mode=d.get("mode", "retrospective"),
                selection=SelectionConfig.from_dict(sel),
                question=d.get("question") or {},
            )
        except (KeyError, TypeError) as exc:
            raise TreeError(f"malformed tree JSON: {exc}") from None

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ExplanationTree":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise TreeError(f"{path}: {exc}") from None
        return cls.from_dict(data)


def renumber(nodes, edges, **kwargs) -> ExplanationTree:
    """Rebuild a tree in breadth-first order from arbitrary node ids.

    ``nodes`` maps old id -> node, ``edges`` are old-id pairs; the root is the
    node without a parent. Children keep their relative order.
    """
    kids = {}
    has_parent = set()
    for p, c in edges:
        kids.setdefault(p, []).append(c)
        has_parent.add(c)
    roots = [i for i in nodes if i not in has_parent]
    if len(roots) != 1:
        raise TreeError(f"expected a single root, found {roots}")
    order = [roots[0]]
    new_id = {roots[0]: 0}
    depth = {roots[0]: 0}
    new_edges = []
    i = 0
    while i < len(order):
        old = order[i]
        for c in kids.get(old, []):
            new_id[c] = len(order)
            depth[c] = depth[old] + 1
            order.append(c)
            new_edges.append((new_id[old], new_id[c]))
        i += 1
    new_nodes = tuple(replace(nodes[old], id=new_id[old], depth=depth[old]) for old in order)
    return ExplanationTree(new_nodes, tuple(new_edges), **kwargs)
