"""Lag-1 causal discovery: VAR with Granger filtering, cross-validated Lasso,
context-conditioned segmentation of rollouts and graph averaging.

All regressions model ``x_t = c + C x_{t-1} + e_t``; an edge ``src -> dst``
with lag 1 carries the coefficient ``C[dst, src]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .errors import DiscoveryError, RankDeficientError
from .graph import Edge, TemporalCausalGraph, Variable
from .predicate import Predicate

log = logging.getLogger(__name__)

METHODS = ("granger_var", "lasso")


@dataclass(frozen=True)
class DiscoveryConfig:
    """Settings shared by both discovery methods.

    ``lambdas=None`` builds a geometric grid of ``n_lambdas`` values from the
    smallest penalty that zeroes every coefficient down to ``lambda_ratio``
    times that value. ``cv_rule="min"`` takes the penalty with the lowest
    cross-validated error, ``"1se"`` the largest penalty within one standard
    error of that minimum. ``refit`` re-estimates the selected coefficients by
    unpenalised least squares to undo the shrinkage. ``noise_sd`` is added to non-constant binary columns.
    """

    method: str = "granger_var"
    lag: int = 1
    alpha_level: float = 0.05
    folds: int = 5
    cv_rule: str = "1se"
    refit: bool = True
    lambdas: Optional[tuple] = None
    n_lambdas: int = 100
    lambda_ratio: float = 1e-3
    min_samples: int = 10
    margin: int = 0
    noise_sd: float = 0.01
    prune: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DiscoveryError(f"unknown discovery method {self.method!r}; choose from {METHODS}")
        if self.lag != 1:
            raise DiscoveryError("only lag 1 is supported")
        if not 0 < self.alpha_level < 1:
            raise DiscoveryError("alpha_level must lie in (0, 1)")
        if self.folds < 2:
            raise DiscoveryError("need at least 2 cross-validation folds")
        if self.cv_rule not in ("min", "1se"):
            raise DiscoveryError(f"unknown cv_rule {self.cv_rule!r}")
        if self.lambdas is not None and len(self.lambdas) == 0:
            raise DiscoveryError("empty lambda grid")
        if self.lambdas is not None and any(l < 0 for l in self.lambdas):
            raise DiscoveryError("lambda values must be >= 0")
        if self.margin < 0 or self.min_samples < 1:
            raise DiscoveryError("margin must be >= 0 and min_samples >= 1")

    def to_dict(self):
        d = asdict(self)
        d["lambdas"] = None if self.lambdas is None else list(self.lambdas)
        return d


# ---------------------------------------------------------------------------
# VAR(1)
# ---------------------------------------------------------------------------


@dataclass
class VARFit:
    """Least-squares VAR(1) fit.

    ``coef`` is ``d x d`` over the original columns with zero rows/columns
    for dropped (constant) ones; ``kept`` lists the indices actually fitted.
    """

    coef: np.ndarray
    intercept: np.ndarray
    resid_var: np.ndarray
    stderr: np.ndarray
    xtx_inv: np.ndarray
    kept: tuple
    dropped: tuple
    n_obs: int
    dof: int

    def report(self, names=None):
        names = names or [str(i) for i in range(len(self.coef))]
        return {
            "kept": [names[i] for i in self.kept],
            "dropped": [names[i] for i in self.dropped],
            "n_obs": self.n_obs,
            "resid_var": {names[i]: float(self.resid_var[i]) for i in self.kept},
        }


def _constant_columns(series: np.ndarray):
    return [j for j in range(series.shape[1]) if np.ptp(series[:, j]) == 0]


def _colliding(design: np.ndarray, labels):
    """Labels of columns that lie in the span of the columns before them."""
    out = []
    basis = np.zeros((design.shape[0], 0))
    for j in range(design.shape[1]):
        col = design[:, j : j + 1]
        if basis.shape[1]:
            coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
            resid = col - basis @ coef
        else:
            resid = col
        if np.linalg.norm(resid) <= 1e-9 * max(1.0, np.linalg.norm(col)):
            out.append(labels[j])
        else:
            basis = np.hstack([basis, col])
    return out


def fit_var1(series, names: Optional[Sequence[str]] = None) -> VARFit:
    """Ordinary least squares for every equation of a VAR(1) with intercept."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise DiscoveryError("series must be a T x d matrix")
    T, d = series.shape
    names = list(names) if names is not None else [str(i) for i in range(d)]
    dropped = tuple(_constant_columns(series))
    if dropped:
        log.info("dropping constant columns %s", [names[j] for j in dropped])
    kept = tuple(j for j in range(d) if j not in dropped)
    k = len(kept)
    n = T - 1
    p = k + 1
    if k == 0:
        raise DiscoveryError("every column is constant")
    if n <= p:
        raise DiscoveryError(f"need more than {p + 1} time steps for {k} non-constant columns, got {T}")
    X = np.hstack([np.ones((n, 1)), series[:-1, kept]])
    Y = series[1:, kept]
    if np.linalg.matrix_rank(X) < p:
        labels = ["intercept"] + [names[j] for j in kept]
        cols = _colliding(X, labels)
        raise RankDeficientError(f"rank-deficient design; columns {cols} are linear combinations of others", cols)
    xtx_inv = np.linalg.inv(X.T @ X)
    B = xtx_inv @ X.T @ Y  # (p, k)
    resid = Y - X @ B
    dof = n - p
    rv = (resid**2).sum(axis=0) / dof

    coef = np.zeros((d, d))
    stderr = np.full((d, d), np.nan)
    intercept = np.zeros(d)
    resid_var = np.full(d, np.nan)
    diag = np.diag(xtx_inv)[1:]
    for a, i in enumerate(kept):
        intercept[i] = B[0, a]
        resid_var[i] = rv[a]
        for b, j in enumerate(kept):
            coef[i, j] = B[b + 1, a]
            stderr[i, j] = math.sqrt(rv[a] * diag[b])
    return VARFit(coef, intercept, resid_var, stderr, xtx_inv, kept, dropped, n, dof)


def granger_pvalues(fit: VARFit) -> np.ndarray:
    """p-value for "column j helps predict column i" given all other lagged columns.

    Dropping one regressor from the unrestricted equation gives
    ``F = (RSS_r - RSS_u) / (RSS_u / dof) = coef^2 / (s^2 * inv(X'X)_jj)``
    with ``(1, dof)`` degrees of freedom. Dropped columns get NaN.
    """
    d = len(fit.coef)
    p = np.full((d, d), np.nan)
    diag = np.diag(fit.xtx_inv)[1:]
    for i in fit.kept:
        for b, j in enumerate(fit.kept):
            beta = fit.coef[i, j]
            denom = fit.resid_var[i] * diag[b]
            if denom > 0:
                p[i, j] = stats.f.sf(beta * beta / denom, 1, fit.dof)
            else:
                # exact fit: any nonzero coefficient is infinitely significant
                p[i, j] = 0.0 if abs(beta) > 1e-12 else 1.0
    return p


def _graph_from_matrix(coef, names, kinds, keep=None) -> TemporalCausalGraph:
    variables = [Variable(n, k) for n, k in zip(names, kinds)]
    edges = []
    d = len(names)
    for i in range(d):
        for j in range(d):
            w = float(coef[i, j])
            if w != 0 and (keep is None or keep[i, j]):
                edges.append(Edge(names[j], names[i], 1, w))
    return TemporalCausalGraph(variables, edges)


def granger_filter(fit: VARFit, names, cfg: DiscoveryConfig = DiscoveryConfig(), kinds=None):
    """Keep VAR coefficients whose Granger test rejects at ``cfg.alpha_level``.

    Returns ``(graph, pvalues)``.
    """
    kinds = kinds or ["continuous"] * len(names)
    pv = granger_pvalues(fit)
    keep = np.nan_to_num(pv, nan=1.0) < cfg.alpha_level
    return _graph_from_matrix(fit.coef, names, kinds, keep), pv


# ---------------------------------------------------------------------------
# Lasso
# ---------------------------------------------------------------------------


def lambda_grid(X, y, n_lambdas=100, ratio=1e-3):
    """Decreasing geometric grid starting at the smallest all-zero penalty."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    # tiny headroom so rounding in the solver cannot leave a 1e-16 coefficient at the top
    lam_max = np.max(np.abs(Xc.T @ yc)) / len(y) * (1 + 1e-9)
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * ratio, n_lambdas)


def _centred_path(X, y, lams, backend=None):
    xm, ym = X.mean(axis=0), y.mean()
    betas = _kernels.lasso_path(X - xm, y - ym, lams, backend=backend)
    intercepts = ym - betas @ xm
    return betas, intercepts


def lasso_cv(X, y, lams, folds=5, rule="1se", backend=None):
    """Choose a penalty by contiguous-block cross-validation, then refit on all rows.

    Returns ``(beta, intercept, best_lambda, mean_mse)``.
    """
    lams = np.sort(np.asarray(lams, dtype=float))[::-1]
    n = len(y)
    if n < folds:
        raise DiscoveryError(f"{n} samples cannot be split into {folds} folds")
    bounds = np.linspace(0, n, folds + 1).astype(int)
    errs = np.zeros((folds, len(lams)))
    for f in range(folds):
        test = np.zeros(n, dtype=bool)
        test[bounds[f] : bounds[f + 1]] = True
        betas, b0 = _centred_path(X[~test], y[~test], lams, backend)
        pred = X[test] @ betas.T + b0
        errs[f] = ((pred - y[test, None]) ** 2).mean(axis=0)
    mse = errs.mean(axis=0)
    best = int(np.argmin(mse))
    if rule == "1se":
        se = errs[:, best].std(ddof=1) / math.sqrt(folds)
        best = int(np.flatnonzero(mse <= mse[best] + se)[0])
    # refit along the path down to the chosen penalty for warm starts
    betas, b0 = _centred_path(X, y, lams[: best + 1], backend)
    return betas[-1], float(b0[-1]), float(lams[best]), mse


def _refit_support(X, y, beta):
    """Least squares restricted to the non-zero entries of ``beta``."""
    support = np.flatnonzero(beta)
    if support.size == 0:
        return beta
    design = np.hstack([np.ones((len(y), 1)), X[:, support]])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        return beta
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    out = np.zeros_like(beta)
    out[support] = sol[1:]
    return out


def fit_lasso(series, names=None, cfg: DiscoveryConfig = DiscoveryConfig(), kinds=None, backend=None):
    """Per-target L1 regression on the lagged columns; non-zero coefficients become edges.

    Returns ``(graph, report)`` where the report holds the chosen penalty and
    the cross-validation curve per target.
    """
    series = np.asarray(series, dtype=float)
    T, d = series.shape
    names = list(names) if names is not None else [str(i) for i in range(d)]
    kinds = kinds or ["continuous"] * d
    dropped = _constant_columns(series)
    kept = [j for j in range(d) if j not in dropped]
    if not kept:
        raise DiscoveryError("every column is constant")
    if T - 1 < max(cfg.folds, 2):
        raise DiscoveryError(f"too few time steps ({T}) for {cfg.folds}-fold cross-validation")
    X = series[:-1, kept]
    coef = np.zeros((d, d))
    report = {"kept": [names[j] for j in kept], "targets": {}}
    for i in kept:
        y = series[1:, i]
        lams = np.asarray(cfg.lambdas, dtype=float) if cfg.lambdas is not None else lambda_grid(X, y, cfg.n_lambdas, cfg.lambda_ratio)
        beta, _, lam, mse = lasso_cv(X, y, lams, cfg.folds, cfg.cv_rule, backend)
        if cfg.refit:
            beta = _refit_support(X, y, beta)
        for b, j in enumerate(kept):
            coef[i, j] = beta[b]
        report["targets"][names[i]] = {"lambda": lam, "cv_mse": [float(m) for m in mse]}
    return _graph_from_matrix(coef, names, kinds), report


# ---------------------------------------------------------------------------
# graph averaging and segmentation
# ---------------------------------------------------------------------------


def average_graphs(graphs: Sequence[TemporalCausalGraph], prune: float = 1e-3) -> TemporalCausalGraph:
    """Edge-wise mean with absent edges counted as zero; tiny means are dropped."""
    if not graphs:
        raise DiscoveryError("nothing to average")
    ref = graphs[0].variables
    for g in graphs[1:]:
        if g.variables != ref:
            raise DiscoveryError("graphs to average must share the same variables")
    sums = {}
    for g in graphs:
        for e in g.edges:
            sums.setdefault((e.src, e.dst, e.lag), []).append(e.weight)
    edges = []
    for (src, dst, lag), ws in sorted(sums.items()):
        # exact rational mean, rounded once: identical graphs average to themselves
        mean = float(sum(map(Fraction, ws)) / len(graphs))
        if abs(mean) >= prune:
            edges.append(Edge(src, dst, lag, mean))
    max_lag = max([1] + [e.lag for e in edges])
    return TemporalCausalGraph(ref, edges, max_lag=max_lag)


@dataclass(frozen=True)
class Segment:
    """Inclusive frame range ``[start, stop]`` of one rollout."""

    rollout: int
    start: int
    stop: int

    def __len__(self):
        return self.stop - self.start + 1


def context_runs(mask: Sequence[bool], margin: int = 0):
    """Maximal runs of true entries, widened by ``margin`` and merged where they touch."""
    n = len(mask)
    runs = []
    t = 0
    while t < n:
        if mask[t]:
            s = t
            while t + 1 < n and mask[t + 1]:
                t += 1
            lo, hi = max(0, s - margin), min(n - 1, t + margin)
            if runs and lo <= runs[-1][1] + 1:
                runs[-1] = (runs[-1][0], hi)
            else:
                runs.append((lo, hi))
        t += 1
    return runs


def condition_rollouts(rollouts, predicate, margin: int = 0, min_samples: int = 1):
    """Frame ranges where ``predicate`` holds, with ``margin`` extra frames at each end."""
    if isinstance(predicate, str):
        predicate = Predicate(predicate)
    items = rollouts.values() if isinstance(rollouts, dict) else rollouts
    out = []
    for r in items:
        mask = [predicate(f.row()) for f in r.frames]
        for lo, hi in context_runs(mask, margin):
            if hi - lo + 1 >= min_samples:
                out.append(Segment(r.id, lo, hi))
    return out


def inject_noise(matrix: np.ndarray, binary_cols, sd: float, rng) -> np.ndarray:
    """Add Gaussian noise to binary columns that are not constant."""
    out = np.array(matrix, dtype=float)
    if sd <= 0:
        return out
    for j in binary_cols:
        if np.ptp(out[:, j]) > 0:
            out[:, j] += rng.normal(0.0, sd, size=len(out))
    return out


@dataclass
class ContextResult:
    graph: Optional[TemporalCausalGraph]
    n_segments: int = 0
    n_fitted: int = 0
    skipped: dict = field(default_factory=dict)
    segments: list = field(default_factory=list)

    def report(self):
        return {
            "n_segments": self.n_segments,
            "n_fitted": self.n_fitted,
            "skipped": self.skipped,
            "n_edges": 0 if self.graph is None else len(self.graph.edges),
            "segments": self.segments,
        }


def fit_segment(matrix, names, kinds, cfg: DiscoveryConfig, backend=None):
    """One graph (and its report entry) for one already noise-injected segment."""
    if cfg.method == "granger_var":
        fit = fit_var1(matrix, names)
        graph, pv = granger_filter(fit, names, cfg, kinds)
        rep = fit.report(names)
        rep["pvalues"] = {
            f"{names[j]}->{names[i]}": float(pv[i, j]) for i in fit.kept for j in fit.kept
        }
        return graph, rep
    return fit_lasso(matrix, names, cfg, kinds, backend)


def discover(rollouts, contexts, cfg: DiscoveryConfig = DiscoveryConfig(), variables=None, kinds=None, backend=None):
    """Fit one graph per context segment and average them per context.

    Returns ``({context: graph or None}, report)``. Segments that are too
    short or rank-deficient are skipped and counted in the report.
    """
    from .coinrunner import FRAME_VARIABLES, RolloutSeries

    variables = list(variables or FRAME_VARIABLES)
    kinds = list(kinds or [RolloutSeries.kinds.get(v, "continuous") for v in variables])
    binary_cols = [j for j, k in enumerate(kinds) if k == "binary"]
    items = rollouts if isinstance(rollouts, dict) else {r.id: r for r in rollouts}
    root = np.random.SeedSequence(cfg.seed)
    graphs = {}
    report = {"config": cfg.to_dict(), "contexts": {}}
    for ci, ctx in enumerate(contexts):
        res = ContextResult(None)
        per_segment = []
        segs = condition_rollouts(items, ctx.predicate, cfg.margin, cfg.min_samples)
        res.n_segments = len(segs)
        for si, seg in enumerate(segs):
            r = items[seg.rollout]
            mat = r.matrix(variables)[seg.start : seg.stop + 1]
            rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(ci, seg.rollout, seg.start)))
            mat = inject_noise(mat, binary_cols, cfg.noise_sd, rng)
            try:
                g, rep = fit_segment(mat, variables, kinds, cfg, backend)
            except DiscoveryError as exc:
                key = type(exc).__name__
                res.skipped[key] = res.skipped.get(key, 0) + 1
                continue
            per_segment.append(g)
            rep.update({"rollout": seg.rollout, "start": seg.start, "stop": seg.stop})
            res.segments.append(rep)
        res.n_fitted = len(per_segment)
        if per_segment:
            res.graph = average_graphs(per_segment, cfg.prune)
        else:
            log.warning("context %s: no segment could be fitted", ctx.name)
        graphs[ctx.name] = res.graph
        report["contexts"][ctx.name] = res.report()
    return graphs, report


def simulate_var1(coef, T: int, noise_sd: float, seed: int = 0, burn_in: int = 100, intercept=None):
    """Draw ``T`` steps of ``x_t = c + C x_{t-1} + noise`` after a burn-in."""
    coef = np.asarray(coef, dtype=float)
    d = len(coef)
    c = np.zeros(d) if intercept is None else np.asarray(intercept, dtype=float)
    rng = np.random.default_rng(seed)
    x = np.zeros(d)
    out = np.empty((T, d))
    for t in range(burn_in + T):
        x = c + coef @ x + rng.normal(0.0, noise_sd, size=d)
        if t >= burn_in:
            out[t - burn_in] = x
    return out
