"""Explanation rules: continuous (statistic-relative), behavioural and "mostly".

Indicator encoding: a fired rule stores the *parent's* side, ``+1`` for a
high/active parent and ``-1`` for a low/inactive one. ``er1`` is the
"because" slot, ``er2`` the "although" slot, ``er3`` marks the dominant
because-sibling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .errors import RuleError


class ERTriple(NamedTuple):
    er1: int = 0
    er2: int = 0
    er3: int = 0

    @property
    def because(self) -> bool:
        return self.er1 != 0

    @property
    def although(self) -> bool:
        return self.er2 != 0

    @property
    def neutral(self) -> bool:
        return self.er1 == 0 and self.er2 == 0


NEUTRAL = ERTriple(0, 0, 0)


@dataclass(frozen=True)
class CausalScenario:
    """Edge ``X -> Y`` with coefficient ``alpha``; ``x``/``y`` are the parent/child values."""

    alpha: float
    x: float
    y: float
    phi_x: float
    phi_y: float

    def __post_init__(self):
        if self.alpha == 0:
            raise RuleError("scenario with alpha == 0: the edge should not exist")


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def eval_er_continuous(c: CausalScenario) -> ERTriple:
    """Because/although indicator for a continuous edge judged against statistics.

    ``opposite`` holds when parent and child sit on different sides of their
    statistics, ``same`` when on the same side. A negative edge explains via
    opposite sides, a positive edge via the same side; the other combination
    is an "although". Any value exactly at its statistic is neutral.
    """
    sx = _sign(c.x - c.phi_x)
    sy = _sign(c.y - c.phi_y)
    if sx == 0 or sy == 0:
        return NEUTRAL
    opposite = sx != sy
    same = sx == sy
    neg = c.alpha < 0
    pos = c.alpha > 0
    if (neg and opposite) or (pos and same):
        return ERTriple(sx, 0, 0)
    return ERTriple(0, sx, 0)


def eval_er_binary(alpha: float, x, y) -> ERTriple:
    """Behavioural rule on binary parent ``x`` and binary child ``y``.

    Fires for a negative edge when exactly one of ``x``, ``y`` is set and for
    a positive edge when they agree. A non-firing edge is kept as an
    "although" so every selected parent is verbalised.
    """
    if alpha == 0:
        raise RuleError("alpha == 0: the edge should not exist")
    if x not in (0, 1) or y not in (0, 1):
        raise RuleError(f"binary rule needs 0/1 values, got x={x!r}, y={y!r}")
    x, y = int(x), int(y)
    fires = (alpha < 0 and (x ^ y)) or (alpha > 0 and x == y)
    side = 1 if x == 1 else -1
    return ERTriple(side, 0, 0) if fires else ERTriple(0, side, 0)


def eval_er_score(alpha: float) -> ERTriple:
    """Sign-only indicator used for continuous behaviour variables and unseen futures."""
    if alpha == 0:
        raise RuleError("alpha == 0: the edge should not exist")
    return ERTriple(_sign(alpha), 0, 0)


@dataclass(frozen=True)
class Sibling:
    """One explainer of a node as seen by :func:`apply_er3`.

    ``x`` and ``phi`` are the value and statistic of the *cause* side of the
    edge; ``phi=None`` (binary or statistic-free) scores by ``|alpha|`` alone.
    """

    var: str
    t: int
    er: ERTriple
    alpha: float
    x: Optional[float] = None
    phi: Optional[float] = None

    @property
    def strength(self) -> float:
        if self.phi is None or self.x is None:
            return abs(self.alpha)
        return abs(self.alpha * (self.x - self.phi))


def apply_er3(siblings: Sequence[Sibling]) -> list:
    """Flag the strongest because-sibling with ``er3 = 1``.

    Needs at least two because-siblings; ties go to the smaller variable
    name, then the earlier time. Returns the updated triples in input order.
    """
    out = [ERTriple(s.er.er1, s.er.er2, 0) for s in siblings]
    because = [i for i, s in enumerate(siblings) if s.er.er1 != 0]
    if len(because) < 2:
        return out
    best = min(because, key=lambda i: (-siblings[i].strength, siblings[i].var, siblings[i].t))
    out[best] = out[best]._replace(er3=1)
    return out
