"""Post-hoc transformations of explanation trees and graphs.

* :func:`path_channel` keeps one root-to-node path plus a band of side branches.
* :func:`mask_graph` / :func:`mask_tree` remove intermediate variables and
  bridge them with product-weight edges.
* :func:`leave_n_out` merges sequences interrupted by short deviating runs.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Iterable

from .engine import _chains, _apply_groups, assign_sequences, child_signature, evaluate_edge
from .errors import TreeError
from .graph import Edge, TemporalCausalGraph
from .rules import Sibling, apply_er3
from .tree import ExplanationTree, renumber

log = logging.getLogger(__name__)

MAX_BYPASS_PATHS = 10_000


def _tree_kwargs(tree: ExplanationTree):
    return dict(mode=tree.mode, selection=tree.selection, question=tree.question)


# ---------------------------------------------------------------------------
# path channel
# ---------------------------------------------------------------------------


def path_channel(tree: ExplanationTree, target, width: int = 0) -> ExplanationTree:
    """Root-to-``target`` path plus every path node's descendants up to ``width`` levels.

    ``target`` is ``(variable, t)``. When the pair occurs several times (a
    duplicate attached as a leaf), the single expanded occurrence is used;
    otherwise the match must be unique.
    """
    if width < 0:
        raise TreeError("width must be >= 0")
    var, t = target
    hits = tree.find(var, t)
    if not hits:
        raise TreeError(f"node ({var}, {t}) is not in the tree")
    if len(hits) > 1:
        inner = [n for n in hits if not tree.is_leaf(n.id)]
        if len(inner) != 1:
            raise TreeError(f"node ({var}, {t}) occurs {len(hits)} times; the path is not unique")
        hits = inner
    path = tree.path_to(hits[0].id)
    keep = set(path)
    for nid in path:
        frontier = [nid]
        for _ in range(width):
            frontier = [c for f in frontier for c in tree.child_ids(f)]
            keep.update(frontier)
    nodes = {n.id: n for n in tree.nodes if n.id in keep}
    edges = [(p, c) for p, c in tree.edges if p in keep and c in keep]
    return renumber(nodes, edges, **_tree_kwargs(tree))


# ---------------------------------------------------------------------------
# masking on graphs
# ---------------------------------------------------------------------------


def bypass_paths(g: TemporalCausalGraph, masked: set, src: str):
    """All paths from ``src`` whose interior lies in ``masked`` and whose end does not.

    Yields lists of edges; interior variables are never repeated.
    """
    count = 0
    stack = [(src, [], frozenset())]
    while stack:
        node, path, seen = stack.pop()
        for e in sorted(g._out[node], key=lambda e: (e.dst, e.lag)):
            if e.dst in masked:
                if e.dst in seen:
                    continue
                stack.append((e.dst, path + [e], seen | {e.dst}))
            elif path:
                count += 1
                if count > MAX_BYPASS_PATHS:
                    raise TreeError(f"more than {MAX_BYPASS_PATHS} bypass paths from {src!r}")
                yield path + [e]


def mask_graph(g: TemporalCausalGraph, masked: Iterable[str]) -> TemporalCausalGraph:
    """Remove intermediate variables, bridging each masked-interior path with one edge.

    The bridge weight is the product of the path's weights and its lag the
    sum of its lags; bridges with the same endpoints and lag are summed
    (and dropped if they cancel exactly). A bridge that would be a zero-lag
    self-edge is dropped as well.
    """
    masked = set(masked)
    if not masked:
        return g
    for v in masked:
        g._check(v)
        has_in = any(e.src != v for e in g._in[v])
        has_out = any(e.dst != v for e in g._out[v])
        if not (has_in and has_out):
            raise TreeError(f"cannot mask {v!r}: only intermediate variables can be masked")

    weights = {}
    for e in g.edges:
        if e.src not in masked and e.dst not in masked:
            weights[(e.src, e.dst, e.lag)] = e.weight
    bridges = {}
    for v in g.names:
        if v in masked:
            continue
        for path in bypass_paths(g, masked, v):
            w = 1.0
            for e in path:
                w *= e.weight
            key = (v, path[-1].dst, sum(e.lag for e in path))
            bridges.setdefault(key, []).append(w)
    for key, ws in bridges.items():
        weights[key] = weights.get(key, 0.0) + sum(ws)

    edges = [
        Edge(s, d, lag, w)
        for (s, d, lag), w in sorted(weights.items())
        if w != 0 and not (lag == 0 and s == d)
    ]
    variables = [v for v in g.variables if v.name not in masked]
    return TemporalCausalGraph(variables, edges, max_lag=None)


# ---------------------------------------------------------------------------
# masking on trees
# ---------------------------------------------------------------------------


def mask_tree(tree: ExplanationTree, masked: Iterable[str]) -> ExplanationTree:
    """Splice masked inner nodes out of a tree and re-judge the bridged edges.

    Only inner occurrences of a masked variable are removed; leaf
    occurrences explain nothing further and stay. Each child of a removed
    node is re-attached to the nearest kept ancestor with coefficient equal
    to the product of the coefficients along the spliced path; its
    indicators are recomputed from the stored values, then "mostly" flags
    and sequences are recomputed.
    """
    masked = set(masked)
    if not masked:
        return tree
    if tree.root.var in masked:
        raise TreeError(f"cannot mask the root variable {tree.root.var!r}")
    inner = {n.var for n in tree.inner_nodes()}
    for v in sorted(masked):
        if v not in inner:
            raise TreeError(f"cannot mask {v!r}: it has no intermediate node in the tree")

    behaviour = tree.question.get("mode") == "behaviour"
    retro = tree.mode == "retrospective"
    alpha = {}  # kept node id -> coefficient to its anchor
    kids = {0: []}
    slot = {}  # (anchor, var, t) -> kept node id; parallel bridges are summed into it

    def attach(anchor, nid, a):
        node = tree.nodes[nid]
        if node.var in masked and not tree.is_leaf(nid):
            for c in tree.child_ids(nid):
                attach(anchor, c, a * tree.nodes[c].alpha)
            return
        key = (anchor, node.var, node.t)
        if key in slot:
            keep = slot[key]
            alpha[keep] += a
            # a leaf copy adopts the subtree of an expanded duplicate
            if not kids[keep]:
                for c in tree.child_ids(nid):
                    attach(keep, c, tree.nodes[c].alpha)
            return
        slot[key] = nid
        alpha[nid] = a
        kids[anchor].append(nid)
        kids[nid] = []
        for c in tree.child_ids(nid):
            attach(nid, c, tree.nodes[c].alpha)

    for c in tree.child_ids(0):
        attach(0, c, tree.nodes[c].alpha)

    nodes = {0: tree.root}
    edges = []
    changed = set()
    stack = [0]
    while stack:
        p = stack.pop()
        for c in kids[p]:
            node = tree.nodes[c]
            a = alpha[c]
            if a == 0:
                # bridges cancelled exactly: the edge disappears with its subtree
                changed.add(p)
                continue
            if a != node.alpha or tree.parent_id(c) != p:
                anchor = nodes[p]
                if retro:
                    er = evaluate_edge(a, node.kind, anchor.kind, node.value, anchor.value, node.phi, anchor.phi, behaviour)
                else:
                    er = evaluate_edge(a, anchor.kind, node.kind, anchor.value, node.value, anchor.phi, node.phi, behaviour)
                node = replace(node, alpha=a, er=er)
                changed.add(p)
            nodes[c] = node
            edges.append((p, c))
            stack.append(c)

    # "mostly" depends on the whole sibling group, so redo it where a group changed
    if tree.selection.mostly:
        groups = {}
        for p, c in edges:
            groups.setdefault(p, []).append(c)
        for p in changed:
            group = groups.get(p, [])
            sibs = []
            for c in group:
                n = nodes[c]
                x, phi = (n.value, n.phi) if retro else (nodes[p].value, nodes[p].phi)
                sibs.append(Sibling(n.var, n.t, n.er, n.alpha, x, phi))
            for c, er in zip(group, apply_er3(sibs)):
                nodes[c] = replace(nodes[c], er=er)
    out = renumber(nodes, edges, **_tree_kwargs(tree))
    out = out.replace_nodes(replace(n, seq=None) for n in out.nodes)
    return assign_sequences(out)


def mask(structure, masked):
    """Dispatch to :func:`mask_graph` or :func:`mask_tree`."""
    if isinstance(structure, TemporalCausalGraph):
        return mask_graph(structure, masked)
    if isinstance(structure, ExplanationTree):
        return mask_tree(structure, masked)
    raise TypeError(f"cannot mask a {type(structure).__name__}")


# ---------------------------------------------------------------------------
# leave-N-out
# ---------------------------------------------------------------------------


def leave_n_out(tree: ExplanationTree, max_gap: int = 1, rewrite: bool = False) -> ExplanationTree:
    """Absorb short interruptions of a sequence.

    Within each same-variable chain, a run of at most ``max_gap`` nodes that
    sits between two sequence segments with equal child signatures takes
    over the surrounding id. With ``rewrite`` the absorbed nodes' children
    get the indicators of the surrounding signature. Topology never changes.
    """
    if max_gap < 1:
        raise TreeError("max_gap must be >= 1")
    groups = []
    rewrites = {}
    for chain in _chains(tree):
        segs = []  # [nodes, signature]
        for n in chain:
            sig = child_signature(tree, n)
            if segs and segs[-1][0][-1].seq == n.seq and segs[-1][1] == sig:
                segs[-1][0].append(n)
            else:
                segs.append([[n], sig])
        merged = [segs[0]] if segs else []
        i = 1
        while i < len(segs):
            prev = merged[-1]
            absorbed = None
            gap = []
            j = i
            while j < len(segs) and sum(len(s[0]) for s in gap) + len(segs[j][0]) <= max_gap:
                gap.append(segs[j])
                j += 1
                if j < len(segs) and segs[j][1] == prev[1]:
                    absorbed = j
                    break
            if absorbed is not None:
                for s in gap:
                    for n in s[0]:
                        if s[1] != prev[1]:
                            rewrites[n.id] = prev[1]
                    prev[0].extend(s[0])
                prev[0].extend(segs[absorbed][0])
                i = absorbed + 1
            else:
                merged.append(segs[i])
                i += 1
        groups.extend(s[0] for s in merged)

    out = _apply_groups(tree, groups)
    if rewrite and rewrites:
        out = _rewrite_signatures(out, rewrites)
    return out


def _rewrite_signatures(tree: ExplanationTree, rewrites):
    """Overwrite children's indicators of absorbed nodes with the surrounding signature."""
    nodes = list(tree.nodes)
    for nid, sig in rewrites.items():
        owner = tree.nodes[nid]
        wanted = {(var, dt): er for var, dt, er in sig}
        for c in tree.child_ids(nid):
            key = (nodes[c].var, nodes[c].t - owner.t)
            if key in wanted:
                nodes[c] = replace(nodes[c], er=type(nodes[c].er)(*wanted[key]))
    return tree.replace_nodes(nodes)
