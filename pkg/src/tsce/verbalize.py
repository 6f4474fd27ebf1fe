"""Template rendering of explanation trees into English sentences.

Wording comes from a lexicon (TOML). Flattened keys::

    style                "panel" (statistic questions) or "behaviour"
    subject              who the root belongs to, e.g. "Hans'" or "Mario"
    possessive           pronoun for later nodes, e.g. "his"
    because / mostly / although / due      connective words
    time.unit, time.units                  "year" / "years"
    time.current, time.prev, time.next     phrases for offsets 0, -1, +1
    time.before_n, time.after_n            e.g. "{n} years before"
    var.<name>.noun                        noun phrase of a variable
    var.<name>.high / var.<name>.low       adjective (panel) or clause (behaviour)

Every function here is pure: the same tree and lexicon give the same text.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .errors import LexiconError, TreeError
from .tree import ExplanationNode, ExplanationTree

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

RESOURCES = Path(__file__).parent / "resources"

_DEFAULTS = {
    "style": "panel",
    "subject": "The",
    "possessive": "its",
    "because": "because of",
    "mostly": "mostly",
    "although": "despite",
    "statistic.mean": "average",
    "statistic.percentile": "the {p:g}th percentile",
    "time.unit": "step",
    "time.units": "steps",
    "time.current": "in the same time step",
    "time.prev": "one time step before",
    "time.next": "in the next time step",
    "time.before_n": "{n} time steps before",
    "time.after_n": "{n} time steps later",
    "sequence.panel": "consistently",
    "sequence.behaviour": "constantly over steps {start} to {end}",
    "persist": "persistently",
}

_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten")


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


@dataclass(frozen=True)
class Lexicon:
    """Flat key/value wording table with defaults for anything missing."""

    entries: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        style = self.get("style")
        if style not in ("panel", "behaviour"):
            raise LexiconError(f"lexicon style must be 'panel' or 'behaviour', got {style!r}")

    def get(self, key, default=None):
        if key in self.entries:
            return self.entries[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        return default

    @property
    def style(self):
        return self.get("style")

    def noun(self, var):
        return self.get(f"var.{var}.noun", var)

    def side_word(self, var, side):
        key = "high" if side > 0 else "low"
        fallback = key if self.style == "panel" else None
        word = self.get(f"var.{var}.{key}", fallback)
        if word is None:
            active = "active" if side > 0 else "not active"
            word = f"{self.noun(var)} was {active}"
        return word

    @classmethod
    def from_toml(cls, text: str) -> "Lexicon":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise LexiconError(f"cannot parse lexicon: {exc}") from None
        flat = _flatten(data)
        bad = [k for k, v in flat.items() if not isinstance(v, str)]
        if bad:
            raise LexiconError(f"lexicon values must be strings: {bad}")
        return cls(flat)

    @classmethod
    def load(cls, path) -> "Lexicon":
        """Load a TOML file, or a built-in lexicon via ``builtin:<name>``."""
        path = str(path)
        if path.startswith("builtin:"):
            path = RESOURCES / f"{path.split(':', 1)[1]}_lexicon.toml"
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise LexiconError(f"cannot read lexicon {path}: {exc}") from None
        return cls.from_toml(text)


DEFAULT_LEXICON = Lexicon()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def format_coef(alpha: float) -> str:
    s = f"{alpha:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def join_and(items):
    items = list(items)
    if not items:
        return ""
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def count_word(n: int) -> str:
    return _NUMBER_WORDS[n] if 0 <= n < len(_NUMBER_WORDS) else str(n)


def capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def relative_time(dt: int, lex: Lexicon) -> str:
    if dt == 0:
        return lex.get("time.current")
    if dt == -1:
        return lex.get("time.prev")
    if dt == 1:
        return lex.get("time.next")
    key = "time.before_n" if dt < 0 else "time.after_n"
    return lex.get(key).format(n=count_word(abs(dt)))


def _side(node: ExplanationNode) -> int:
    if node.phi is None:
        return 1 if node.value else -1
    if node.value > node.phi:
        return 1
    if node.value < node.phi:
        return -1
    return 0


def _stat_phrase(tree: ExplanationTree, lex: Lexicon) -> str:
    stat = tree.question.get("stat") or "mean"
    if stat == "mean":
        return lex.get("statistic.mean")
    return lex.get("statistic.percentile").format(p=float(stat[1:]))


def _direction(node, tree, lex) -> str:
    side = _side(node)
    word = {1: "above", -1: "below", 0: "at"}[side]
    return f"{word} {_stat_phrase(tree, lex)}"


def _subject(node, tree, lex) -> str:
    if node.id == 0:
        return lex.get("subject")
    return capitalize(lex.get("possessive"))


def _sorted_children(children):
    """Because first (mostly-flag first, then |alpha| descending, name), then although."""

    def key(n):
        return (0 if n.er.er3 else 1, -abs(n.alpha or 0.0), n.var, n.t)

    because = sorted((c for c in children if c.er.er1), key=key)
    although = sorted((c for c in children if c.er.er2 and not c.er.er1), key=key)
    return because, although


def _cause_phrase(child, owner, lex, coefficients, persistent, with_time):
    side = child.er.er1 or child.er.er2
    if lex.style == "panel":
        text = f"{lex.get('possessive')} {lex.side_word(child.var, side)} {lex.noun(child.var)}"
    else:
        text = lex.side_word(child.var, side)
    if coefficients and child.alpha is not None:
        text += f" ({format_coef(child.alpha)})"
    if persistent and child.var == owner.var and child.t < owner.t:
        text += f" {lex.get('persist')}"
    if with_time:
        text += f" {relative_time(child.t - owner.t, lex)}"
    return text


def _clauses(node, children, lex, coefficients=False, persistent=False) -> str:
    for c in children:
        if c.er is None:
            raise TreeError(f"node {c.id} ({c.var}, {c.t}) has no indicators")
    because, although = _sorted_children(children)
    offsets = {c.t - node.t for c in because + although}
    shared = len(offsets) == 1 and len(because) + len(although) > 1
    per_clause = not shared

    parts = []
    conj = lex.get("because")
    for i, c in enumerate(because):
        phrase = _cause_phrase(c, node, lex, coefficients, persistent, per_clause)
        lead = f"{lex.get('mostly')} {conj}" if c.er.er3 else conj
        parts.append(f"{lead} {phrase}")
    text = join_and(parts)
    if although:
        phrases = [_cause_phrase(c, node, lex, coefficients, persistent, per_clause) for c in although]
        rest = f"{lex.get('although')} {join_and(phrases)}"
        text = f"{text}, {rest}" if text else rest
    if shared and text:
        text += f" {relative_time(offsets.pop(), lex)}"
    return text


def _head(node, tree, lex) -> str:
    subj = _subject(node, tree, lex)
    if lex.style == "panel":
        return f"{subj} {lex.noun(node.var)} is {_direction(node, tree, lex)}"
    if node.phi is None and node.kind == "binary":
        verb = "is" if node.value else "is not"
        return f"{subj} {verb} {lex.noun(node.var)}"
    return f"{capitalize(lex.noun(node.var))} is {node.value:g}"


def _finish(head, clauses) -> str:
    if not clauses:
        return head + "."
    return f"{head}, {clauses}."


# ---------------------------------------------------------------------------
# public renderers
# ---------------------------------------------------------------------------


def render_node(tree: ExplanationTree, node_id: int, lex: Lexicon = DEFAULT_LEXICON, coefficients=False) -> str:
    """One sentence explaining an inner node by its children."""
    node = tree.nodes[node_id]
    children = tree.children(node_id)
    if not children:
        raise TreeError(f"node {node_id} is a leaf and has nothing to explain")
    if tree.mode == "anticipative":
        return render_anticipative(tree, node_id, lex, coefficients)
    when = ""
    if node.id != 0:
        when = f" {relative_time(node.t - tree.root.t, lex)}"
    return _finish(_head(node, tree, lex) + when, _clauses(node, children, lex, coefficients))


def render_sequence(tree: ExplanationTree, node_ids, lex: Lexicon = DEFAULT_LEXICON, coefficients=False) -> str:
    """One summarising sentence for nodes sharing a sequence id (latest first)."""
    members = sorted((tree.nodes[i] for i in node_ids), key=lambda n: -n.t)
    if len(members) < 2:
        return render_node(tree, members[0].id, lex, coefficients)
    if tree.mode == "anticipative":
        return render_anticipative(tree, members[0].id, lex, coefficients)
    first = members[0]
    subj = _subject(first, tree, lex)
    if lex.style == "panel":
        head = (
            f"{subj} {lex.noun(first.var)} has been {lex.get('sequence.panel')} "
            f"{_direction(first, tree, lex)} over the past {count_word(len(members))} {lex.get('time.units')}"
        )
    else:
        span = lex.get("sequence.behaviour").format(start=members[-1].t, end=first.t)
        head = f"{_head(first, tree, lex)}, {span}"
    clauses = _clauses(first, tree.children(first.id), lex, coefficients, persistent=True)
    return _finish(head, clauses)


def render_anticipative(tree: ExplanationTree, node_id: int, lex: Lexicon = DEFAULT_LEXICON, coefficients=False) -> str:
    """Positive and negative effects of a node, strongest first within each group."""
    node = tree.nodes[node_id]
    children = tree.children(node_id)
    if not children:
        raise TreeError(f"node {node_id} is a leaf and has nothing to explain")

    offsets = {c.t - node.t for c in children}
    shared = len(offsets) == 1

    def item(c):
        text = lex.noun(c.var)
        if coefficients and c.alpha is not None:
            text += f" ({format_coef(c.alpha)})"
        if not shared:
            text += f" {relative_time(c.t - node.t, lex)}"
        return text

    key = lambda c: (-abs(c.alpha or 0.0), c.var, c.t)  # noqa: E731
    pos = [item(c) for c in sorted((c for c in children if (c.alpha or 0) > 0), key=key)]
    neg = [item(c) for c in sorted((c for c in children if (c.alpha or 0) < 0), key=key)]
    parts = []
    if pos:
        parts.append("a positive effect on " + (", ".join(pos) if neg else join_and(pos)))
    if neg:
        parts.append("a negative effect on " + join_and(neg))
    text = f"{capitalize(lex.noun(node.var))} has {' and '.join(parts)}"
    if shared:
        text += f" {relative_time(offsets.pop(), lex)}"
    return text + "."


def render_tree(
    tree: ExplanationTree,
    lex: Lexicon = DEFAULT_LEXICON,
    coefficients: bool = False,
    skip_vars=(),
    sequences: bool = True,
) -> list:
    """Sentences for every inner node, one per sequence when ``sequences`` is set."""
    skip = set(skip_vars)
    out = []
    done = set()
    for node in tree.nodes:
        if tree.is_leaf(node.id) or node.id in done or node.var in skip:
            continue
        if sequences and node.seq is not None:
            ids = [n.id for n in tree.nodes if n.seq == node.seq and not tree.is_leaf(n.id)]
        else:
            ids = [node.id]
        done.update(ids)
        out.append(render_sequence(tree, ids, lex, coefficients))
    return out


def render_text(tree: ExplanationTree, lex: Lexicon = DEFAULT_LEXICON, **kwargs) -> str:
    return "\n".join(render_tree(tree, lex, **kwargs)) + "\n"


def builtin_lexicon(name: str) -> Lexicon:
    return Lexicon.load(f"builtin:{name}")


def lexicon_or_default(path: Optional[str]) -> Lexicon:
    return DEFAULT_LEXICON if path is None else Lexicon.load(path)
