"""Why-question validation and the temporal explanation recursion.

The recursion is run breadth-first. Every selected explainer of a node is
attached with its indicators; it is expanded further only when it is above
the depth limit, its ``(variable, t)`` pair is new to the tree, and it is
outside the excluded closure of the root (descendants for retrospective
trees, ancestors for anticipative ones).
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

from .data import PanelDataset, Statistic
from .errors import DataError, InvalidQuestionError, NoContextError, TSCEError
from .graph import ContextSet, TemporalCausalGraph
from .rules import (
    CausalScenario,
    ERTriple,
    Sibling,
    apply_er3,
    eval_er_binary,
    eval_er_continuous,
    eval_er_score,
)
from .tree import ExplanationNode, ExplanationTree, SelectionConfig

RETRO = "retrospective"
ANTIC = "anticipative"
_MODE_ALIASES = {"retro": RETRO, "retrospective": RETRO, "antic": ANTIC, "anticipative": ANTIC}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise TSCEError(f"unknown explanation mode {mode!r}") from None


@dataclass(frozen=True)
class WhyQuestion:
    """``relation``/``stat`` set: continuous question; both None: behaviour question."""

    var: str
    t: int
    individual: int = 0
    relation: Optional[str] = None
    stat: Optional[Statistic] = None

    @property
    def behaviour(self) -> bool:
        return self.stat is None

    def to_dict(self):
        return {
            "var": self.var,
            "t": self.t,
            "individual": self.individual,
            "relation": self.relation,
            "stat": None if self.stat is None else str(self.stat),
        }

    def __str__(self):
        if self.behaviour:
            return f"{self.var} @ t={self.t} rollout={self.individual}"
        return f"{self.var} {self.relation} {self.stat} @ t={self.t} ind={self.individual}"


_Q_CONT = re.compile(r"^\s*(\w+)\s*([<>])\s*(mean|p\d+(?:\.\d+)?)\s*@\s*t\s*=\s*(\d+)\s+ind\s*=\s*(\d+)\s*$")
_Q_BEHAV = re.compile(r"^\s*(\w+)\s*@\s*t\s*=\s*(\d+)\s+rollout\s*=\s*(\d+)\s*$")


def parse_question(text: str) -> WhyQuestion:
    """Parse ``"Mobility < mean @ t=49 ind=17"`` or ``"targeting_enemy @ t=5 rollout=3"``."""
    m = _Q_CONT.match(text)
    if m:
        var, rel, stat, t, ind = m.groups()
        return WhyQuestion(var, int(t), int(ind), rel, Statistic.parse(stat))
    m = _Q_BEHAV.match(text)
    if m:
        var, t, rid = m.groups()
        return WhyQuestion(var, int(t), int(rid))
    raise InvalidQuestionError(f"cannot parse question {text!r}", reason="syntax")


@dataclass(frozen=True)
class ValidatedQuestion:
    question: WhyQuestion
    context: str
    value: float
    phi: Optional[float]


def _series_for(q: WhyQuestion, data):
    if hasattr(data, "row") and hasattr(data, "horizon") and not isinstance(data, PanelDataset):
        return data
    try:
        return data.series(q.individual, q.stat)
    except (DataError, KeyError) as exc:
        raise InvalidQuestionError(str(exc).strip("'\""), reason="out_of_range") from None


def validate_question(q: WhyQuestion, data, cs: ContextSet) -> ValidatedQuestion:
    """Check that the question holds and pick the context of its time step."""
    series = _series_for(q, data)
    if q.var not in series:
        raise InvalidQuestionError(f"unknown variable {q.var!r}", reason="unknown_variable")
    if not 0 <= q.t < series.horizon:
        raise InvalidQuestionError(f"time {q.t} outside [0, {series.horizon})", reason="out_of_range")
    try:
        ctx = cs.select(series.row(q.t))
    except NoContextError as exc:
        raise InvalidQuestionError(f"no context at t={q.t}: {exc}", reason="no_context") from None
    if ctx.graph is not None and q.var not in ctx.graph:
        raise InvalidQuestionError(f"variable {q.var!r} is not in the graph of context {ctx.name!r}", reason="unknown_variable")
    x = series.value(q.var, q.t)

    if q.behaviour:
        kind = ctx.graph.kind(q.var) if ctx.graph is not None else series.kinds.get(q.var)
        if kind != "binary":
            raise InvalidQuestionError(f"{q.var!r} is not a binary variable", reason="not_binary")
        if x != 1:
            raise InvalidQuestionError(f"{q.var!r} is not active at t={q.t} (value {x:g})", reason="not_active")
        return ValidatedQuestion(q, ctx.name, x, None)

    if q.relation not in ("<", ">"):
        raise InvalidQuestionError(f"relation must be '<' or '>', got {q.relation!r}", reason="syntax")
    phi = series.phi(q.var, q.t)
    holds = x < phi if q.relation == "<" else x > phi
    if not holds:
        raise InvalidQuestionError(
            f"{q.var}={x:.6g} is not {q.relation} {q.stat}={phi:.6g} at t={q.t}", reason="relation"
        )
    return ValidatedQuestion(q, ctx.name, x, phi)


def select_explainers(g: TemporalCausalGraph, v: str, t: int, cfg: SelectionConfig, mode: str = RETRO):
    """Candidate explainers of ``(v, t)`` as ``(edge, time)`` pairs, strongest first."""
    mode = normalize_mode(mode)
    cands = g.parent_edges(v, t) if mode == RETRO else g.child_edges(v, t)
    end = (lambda e: e.src) if mode == RETRO else (lambda e: e.dst)
    cands.sort(key=lambda p: (-abs(p[0].weight), end(p[0]), p[0].lag))
    if cfg.mode == "all":
        return cands
    keep = set()
    if cfg.mode in ("threshold", "threshold_or_topn"):
        keep |= {i for i, (e, _) in enumerate(cands) if abs(e.weight) > cfg.theta}
    if cfg.mode in ("topn", "threshold_or_topn"):
        keep |= set(range(min(cfg.n, len(cands))))
    return [c for i, c in enumerate(cands) if i in keep]


def evaluate_edge(alpha, cause_kind, effect_kind, x, y, phi_x, phi_y, behaviour) -> ERTriple:
    """Dispatch one edge to the matching explanation rule."""
    if x is None or y is None:
        return eval_er_score(alpha)
    if not behaviour:
        return eval_er_continuous(CausalScenario(alpha, x, y, phi_x, phi_y))
    if cause_kind == "binary" and effect_kind == "binary":
        return eval_er_binary(alpha, int(round(x)), int(round(y)))
    return eval_er_score(alpha)


def explain(
    q: WhyQuestion,
    cs: ContextSet,
    data,
    cfg: SelectionConfig = SelectionConfig(),
    mode: str = RETRO,
    live: bool = False,
) -> ExplanationTree:
    """Build the explanation tree for a why-question.

    ``data`` is a :class:`~tsce.data.PanelDataset`, a rollout collection, or
    a single series. ``live`` hides everything after the question's time
    step, so anticipative effects fall back to sign-only indicators.
    """
    mode = normalize_mode(mode)
    cs.require_graphs()
    series = _series_for(q, data)
    vq = validate_question(q, series, cs)
    behaviour = q.behaviour
    horizon = q.t + 1 if live else series.horizon

    root_graph = cs[vq.context].graph
    if mode == RETRO:
        excluded = root_graph.descendants(q.var, q.t, horizon=q.t)
    else:
        excluded = root_graph.ancestors(q.var, q.t)

    root = ExplanationNode(
        id=0,
        var=q.var,
        t=q.t,
        context=vq.context,
        value=vq.value,
        phi=vq.phi,
        kind=root_graph.kind(q.var),
        depth=0,
    )
    nodes = [root]
    edges = []
    seen = {root.key}
    queue = deque([0])
    while queue:
        nid = queue.popleft()
        node = nodes[nid]
        if node.depth >= cfg.K:
            continue
        graph = cs[node.context].graph
        cands = select_explainers(graph, node.var, node.t, cfg, mode)
        if not cands:
            continue
        pending = []
        for e, s in cands:
            u = e.src if mode == RETRO else e.dst
            known = s < horizon
            if known:
                ctx = cs.select(series.row(s)).name
                value = series.value(u, s)
                phi = None if behaviour else series.phi(u, s)
            else:
                ctx, value, phi = node.context, None, None
            kind = graph.kind(u)
            if mode == RETRO:
                er = evaluate_edge(e.weight, kind, node.kind, value, node.value, phi, node.phi, behaviour)
                sib = Sibling(u, s, er, e.weight, value, phi)
            else:
                er = evaluate_edge(e.weight, node.kind, kind, node.value, value, node.phi, phi, behaviour)
                sib = Sibling(u, s, er, e.weight, node.value, node.phi)
            pending.append((u, s, ctx, value, phi, kind, e.weight, known, sib))

        if cfg.mostly:
            triples = apply_er3([p[-1] for p in pending])
        else:
            triples = [p[-1].er for p in pending]

        for (u, s, ctx, value, phi, kind, alpha, known, _), er in zip(pending, triples):
            child = ExplanationNode(
                id=len(nodes),
                var=u,
                t=s,
                context=ctx,
                value=value,
                phi=phi,
                er=er,
                alpha=alpha,
                kind=kind,
                depth=node.depth + 1,
            )
            nodes.append(child)
            edges.append((nid, child.id))
            if child.key in seen:
                continue
            seen.add(child.key)
            if known and child.key not in excluded:
                queue.append(child.id)

    qdict = q.to_dict()
    qdict["mode"] = "behaviour" if behaviour else "continuous"
    qdict["live"] = live
    tree = ExplanationTree(tuple(nodes), tuple(edges), mode=mode, selection=cfg, question=qdict)
    return assign_sequences(tree)


def child_signature(tree: ExplanationTree, node: ExplanationNode):
    """Sorted ``(variable, time offset, indicators)`` of a node's direct children."""
    return tuple(sorted((c.var, c.t - node.t, tuple(c.er or ())) for c in tree.children(node.id)))


def _chains(tree: ExplanationTree):
    """Inner nodes per variable, latest first, split wherever time is not consecutive."""
    by_var = {}
    for n in tree.inner_nodes():
        by_var.setdefault(n.var, []).append(n)
    chains = []
    for var in sorted(by_var):
        ordered = sorted(by_var[var], key=lambda n: (-n.t, n.id))
        chain = [ordered[0]]
        for n in ordered[1:]:
            if n.t == chain[-1].t - 1:
                chain.append(n)
            else:
                chains.append(chain)
                chain = [n]
        chains.append(chain)
    return chains


def assign_sequences(tree: ExplanationTree) -> ExplanationTree:
    """Give runs of same-variable inner nodes with identical child indicators a shared id.

    Leaves carry no sequence id. Ids are dense from 0 in order of each run's
    first node in the tree.
    """
    groups = []
    for chain in _chains(tree):
        run = [chain[0]]
        sig = child_signature(tree, chain[0])
        for n in chain[1:]:
            s = child_signature(tree, n)
            if s == sig:
                run.append(n)
            else:
                groups.append(run)
                run, sig = [n], s
        groups.append(run)
    return _apply_groups(tree, groups)


def _apply_groups(tree, groups):
    groups = sorted(groups, key=lambda g: min(n.id for n in g))
    seq = {}
    for i, g in enumerate(groups):
        for n in g:
            seq[n.id] = i
    return tree.replace_nodes(replace(n, seq=seq.get(n.id)) for n in tree.nodes)
