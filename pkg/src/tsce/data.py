"""Panel datasets, population statistics and the Causal Hans generator."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .graph import HANS_VARIABLES

_STAT_RE = re.compile(r"^(?:mean|p(\d+(?:\.\d+)?))$")


@dataclass(frozen=True)
class Statistic:
    """Population statistic: ``Statistic("mean")`` or ``Statistic("percentile", 10)``."""

    kind: str = "mean"
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind == "mean":
            if self.p is not None:
                raise DataError("the mean statistic takes no percentile")
        elif self.kind == "percentile":
            if self.p is None or not 0 < self.p < 100:
                raise DataError(f"percentile must lie in (0, 100), got {self.p}")
        else:
            raise DataError(f"unknown statistic {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Statistic":
        m = _STAT_RE.match(text.strip())
        if not m:
            raise DataError(f"cannot parse statistic {text!r} (use 'mean' or 'p<k>')")
        if m.group(1) is None:
            return cls("mean")
        return cls("percentile", float(m.group(1)))

    def __str__(self):
        if self.kind == "mean":
            return "mean"
        return f"p{self.p:g}"

    def reduce(self, values: np.ndarray, axis=-1) -> np.ndarray:
        if self.kind == "mean":
            return values.mean(axis=axis)
        return np.percentile(values, self.p, axis=axis)


MEAN = Statistic("mean")


class PanelDataset:
    """Dense individuals x time x variables array of real values.

    Storage is variable-major (``variable, t, individual``) so per-(variable,
    t) population statistics read one contiguous vector.
    """

    def __init__(self, variables: Sequence[str], values, kinds: Optional[Sequence[str]] = None):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 3:
            raise DataError(f"values must be 3-D (individual, t, variable), got shape {arr.shape}")
        n, T, V = arr.shape
        if len(variables) != V:
            raise DataError(f"{len(variables)} variable names for {V} columns")
        if len(set(variables)) != V:
            raise DataError("duplicate variable names")
        if n < 1 or T < 1:
            raise DataError("dataset needs at least one individual and one time step")
        if not np.all(np.isfinite(arr)):
            raise DataError("dataset contains missing or non-finite cells")
        self.variables = tuple(variables)
        self._index = {v: j for j, v in enumerate(self.variables)}
        self._cols = np.ascontiguousarray(arr.transpose(2, 1, 0))
        self._cols.setflags(write=False)
        if kinds is None:
            kinds = ["binary" if np.isin(self._cols[j], (0.0, 1.0)).all() else "continuous" for j in range(V)]
        self.kinds = dict(zip(self.variables, kinds))
        self._stats = {}

    @property
    def n(self) -> int:
        return self._cols.shape[2]

    @property
    def horizon(self) -> int:
        return self._cols.shape[1]

    @property
    def shape(self):
        return (self.n, self.horizon, len(self.variables))

    def cube(self) -> np.ndarray:
        """Read-only ``(individual, t, variable)`` view."""
        return self._cols.transpose(2, 1, 0)

    def var_index(self, var: str) -> int:
        try:
            return self._index[var]
        except KeyError:
            raise DataError(f"dataset has no variable {var!r}") from None

    def _check_t(self, t):
        if not 0 <= t < self.horizon:
            raise DataError(f"time index {t} outside [0, {self.horizon})")

    def column(self, var: str, t: int) -> np.ndarray:
        self._check_t(t)
        return self._cols[self.var_index(var), t]

    def value(self, individual: int, var: str, t: int) -> float:
        self._check_t(t)
        if not 0 <= individual < self.n:
            raise DataError(f"individual {individual} outside [0, {self.n})")
        return float(self._cols[self.var_index(var), t, individual])

    def row(self, individual: int, t: int) -> dict:
        self._check_t(t)
        return {v: float(self._cols[j, t, individual]) for v, j in self._index.items()}

    def stat_table(self, stat: Statistic) -> np.ndarray:
        """``(variable, t)`` table of the population statistic, cached per statistic."""
        table = self._stats.get(stat)
        if table is None:
            table = stat.reduce(self._cols, axis=2)
            table.setflags(write=False)
            self._stats[stat] = table
        return table

    def series(self, individual: int, stat: Optional[Statistic] = MEAN) -> "PanelSeries":
        if not 0 <= individual < self.n:
            raise DataError(f"individual {individual} outside [0, {self.n})")
        return PanelSeries(self, individual, stat)

    def scaled(self, factor: float) -> "PanelDataset":
        return PanelDataset(self.variables, self.cube() * factor, [self.kinds[v] for v in self.variables])

    # ------------------------------------------------------------------ CSV
    def to_csv(self, path):
        n, T, V = self.shape
        ind = np.repeat(np.arange(n), T)
        ts = np.tile(np.arange(T), n)
        flat = self.cube().reshape(n * T, V)
        buf = io.StringIO()
        buf.write(",".join(["individual", "t", *self.variables]) + "\n")
        body = np.column_stack([ind, ts, flat])
        fmt = ["%d", "%d"] + ["%.17g"] * V
        np.savetxt(buf, body, fmt=fmt, delimiter=",")
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "PanelDataset":
        text = Path(path).read_text()
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        if header[:2] != ["individual", "t"] or len(header) < 3:
            raise DataError(f"{path}: header must start with 'individual,t,' followed by variables")
        try:
            body = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
        if body.shape[1] != len(header):
            raise DataError(f"{path}: rows have {body.shape[1]} fields, header has {len(header)}")
        ind = body[:, 0].astype(int)
        ts = body[:, 1].astype(int)
        n, T = ind.max() + 1, ts.max() + 1
        if ind.min() < 0 or ts.min() < 0 or len(body) != n * T:
            raise DataError(f"{path}: dataset is not rectangular ({len(body)} rows for {n}x{T})")
        cube = np.full((n, T, len(header) - 2), np.nan)
        seen = np.zeros((n, T), dtype=bool)
        seen[ind, ts] = True
        if not seen.all():
            raise DataError(f"{path}: dataset is not rectangular (missing or repeated (individual, t))")
        cube[ind, ts] = body[:, 2:]
        return cls(header[2:], cube)


class PanelSeries:
    """One individual's trajectory plus the population statistic used to judge it."""

    def __init__(self, dataset: PanelDataset, individual: int, stat: Optional[Statistic]):
        self.dataset = dataset
        self.individual = individual
        self.stat = stat
        self.horizon = dataset.horizon
        self.kinds = dataset.kinds

    def __contains__(self, var):
        return var in self.dataset.variables

    def value(self, var: str, t: int) -> float:
        return self.dataset.value(self.individual, var, t)

    def row(self, t: int) -> dict:
        return self.dataset.row(self.individual, t)

    def phi(self, var: str, t: int) -> Optional[float]:
        if self.stat is None:
            return None
        return statistic(self.dataset, self.stat, var, t)


def statistic(d: PanelDataset, s: Statistic, var: str, t: int) -> float:
    """Population statistic of ``var`` at time ``t`` over all individuals."""
    d._check_t(t)
    return float(d.stat_table(s)[d.var_index(var), t])


def classify_vs_statistic(d: PanelDataset, s: Statistic = MEAN) -> PanelDataset:
    """Map every cell to 1 if strictly above the population statistic, else 0."""
    table = d.stat_table(s)  # (V, T)
    binary = (d._cols > table[:, :, None]).astype(float)
    return PanelDataset(d.variables, binary.transpose(2, 1, 0), ["binary"] * len(d.variables))


# ---------------------------------------------------------------------------
# Causal Hans generator
# ---------------------------------------------------------------------------

# structural coefficients of the Hans SCM
AGE_TO_NUTRITION = 0.5
AGE_TO_HEALTH = -0.2
NUTRITION_TO_HEALTH = 0.6
HEALTH_TO_MOBILITY = 0.5


@dataclass(frozen=True)
class HansGeneratorConfig:
    n: int = 10_000
    T: int = 50
    mix_new: float = 0.4
    mix_prev: float = 0.6
    noise_scale: float = 0.03
    age_low: float = 30.0
    age_high: float = 80.0
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.T < 1:
            raise DataError("generator needs n >= 1 and T >= 1")
        if abs(self.mix_new + self.mix_prev - 1.0) > 1e-12:
            raise DataError(f"mix_new + mix_prev must be 1, got {self.mix_new + self.mix_prev}")
        if self.noise_scale < 0:
            raise DataError("noise_scale must be non-negative")
        if not self.age_low <= self.age_high:
            raise DataError("age_low must not exceed age_high")
        return self


def structural_means(cfg: HansGeneratorConfig):
    """Analytical mean of each structural draw (F*, H*, M*) per time step.

    Returns an array of shape ``(T, 3)``; these set the noise scale.
    """
    age = 0.5 * (cfg.age_low + cfg.age_high) + np.arange(cfg.T)
    out = np.empty((cfg.T, 3))
    f_prev = h_prev = m_prev = 0.0
    for t in range(cfg.T):
        f_star = AGE_TO_NUTRITION * age[t]
        f = f_star if t == 0 else cfg.mix_new * f_star + cfg.mix_prev * f_prev
        h_star = AGE_TO_HEALTH * age[t] + NUTRITION_TO_HEALTH * f
        h = h_star if t == 0 else cfg.mix_new * h_star + cfg.mix_prev * h_prev
        m_star = HEALTH_TO_MOBILITY * h
        m = m_star if t == 0 else cfg.mix_new * m_star + cfg.mix_prev * m_prev
        out[t] = (f_star, h_star, m_star)
        f_prev, h_prev, m_prev = f, h, m
    return out


def _individual_draws(cfg: HansGeneratorConfig):
    """Initial ages and standard-normal noise, one RNG substream per individual."""
    root = np.random.SeedSequence(cfg.seed)
    age0 = np.empty(cfg.n)
    z = np.empty((cfg.n, cfg.T, 3))
    for i in range(cfg.n):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(i,)))
        age0[i] = rng.uniform(cfg.age_low, cfg.age_high)
        z[i] = rng.standard_normal((cfg.T, 3))
    return age0, z


def generate_hans(cfg: HansGeneratorConfig = HansGeneratorConfig(), age0=None) -> PanelDataset:
    """Simulate the temporal Causal Hans panel.

    ``age0`` overrides the initial ages (noise is still drawn from the seed).
    """
    cfg.validate()
    draws_age0, z = _individual_draws(cfg)
    if age0 is None:
        age0 = draws_age0
    else:
        age0 = np.asarray(age0, dtype=float)
        if age0.shape != (cfg.n,):
            raise DataError(f"age0 must have shape ({cfg.n},)")
    sigma = np.abs(structural_means(cfg)) * cfg.noise_scale  # (T, 3)
    eps = z * sigma[None, :, :]

    n, T = cfg.n, cfg.T
    out = np.empty((n, T, 4))
    age = age0[:, None] + np.arange(T)[None, :]
    out[:, :, 0] = age
    for t in range(T):
        a = age[:, t]
        f_star = AGE_TO_NUTRITION * a
        f = f_star + eps[:, t, 0] if t == 0 else cfg.mix_new * f_star + cfg.mix_prev * out[:, t - 1, 1] + eps[:, t, 0]
        h_star = AGE_TO_HEALTH * a + NUTRITION_TO_HEALTH * f
        h = h_star + eps[:, t, 1] if t == 0 else cfg.mix_new * h_star + cfg.mix_prev * out[:, t - 1, 2] + eps[:, t, 1]
        m_star = HEALTH_TO_MOBILITY * h
        m = m_star + eps[:, t, 2] if t == 0 else cfg.mix_new * m_star + cfg.mix_prev * out[:, t - 1, 3] + eps[:, t, 2]
        out[:, t, 1] = f
        out[:, t, 2] = h
        out[:, t, 3] = m
    return PanelDataset(HANS_VARIABLES, out, ["continuous"] * 4)
