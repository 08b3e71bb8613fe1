"""Cox proportional hazards fitting on counting-process data.

The log partial likelihood is evaluated over the risk sets of the distinct
event times. A row with interval ``(start, stop]`` is at risk at time ``t``
when ``start < t <= stop``, so time-varying covariates are read from the row in
force at each event time. Tied event times are handled with the Breslow or
the Efron approximation.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from ._validation import check_ties
from .exceptions import (
    DimensionMismatch,
    MonotoneLikelihood,
    NoEvents,
    NonIdentifiable,
    NotConverged,
    SingularInformation,
    ValidationError,
)
from .panel import DesignMatrix

__all__ = [
    "CoxModel",
    "BaselineHazard",
    "partial_log_likelihood",
    "score_residuals",
    "fit_cox",
    "clustered_covariance",
]

MAX_ABS_COEF = 20.0
PLATEAU_MIN_COEF = 5.0


@dataclass(frozen=True)
class _RiskSet:
    time: float
    rows: np.ndarray  # indices of rows at risk
    deaths: np.ndarray  # positions of the event rows inside ``rows``


_risk_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def risk_sets(matrix: DesignMatrix) -> list[_RiskSet]:
    """Risk sets of ``matrix`` in increasing event-time order (cached)."""
    cached = _risk_cache.get(matrix)
    if cached is not None:
        return cached
    start, stop, event = matrix.start, matrix.stop, matrix.event
    out = []
    for t in np.unique(stop[event]):
        rows = np.flatnonzero((start < t) & (stop >= t))
        deaths = np.flatnonzero(event[rows] & (stop[rows] == t))
        out.append(_RiskSet(float(t), rows, deaths))
    _risk_cache[matrix] = out
    return out


def _check_beta(matrix: DesignMatrix, beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.ndim != 1 or beta.shape[0] != matrix.n_columns:
        raise DimensionMismatch(
            f"beta has {beta.shape[0]} entries but the design has {matrix.n_columns} columns"
        )
    return beta


def _accumulate(matrix: DesignMatrix, beta: np.ndarray, ties: str, residuals: bool):
    X = matrix.X
    n, p = X.shape
    eta = X @ beta
    value = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p))
    resid = np.zeros((n, p)) if residuals else None
    for rs in risk_sets(matrix):
        Xr = X[rs.rows]
        er = eta[rs.rows]
        shift = er.max()
        w = np.exp(er - shift)
        d = len(rs.deaths)
        Xd = Xr[rs.deaths]
        wd = w[rs.deaths]
        frac = np.arange(d) / d if ties == "efron" else np.zeros(d)

        s0 = w.sum()
        s1 = w @ Xr
        s2 = (Xr * w[:, None]).T @ Xr
        s0d = wd.sum()
        s1d = wd @ Xd
        s2d = (Xd * wd[:, None]).T @ Xd

        s0l = s0 - frac * s0d  # (d,)
        inv = 1.0 / s0l
        means = (s1[None, :] - frac[:, None] * s1d[None, :]) * inv[:, None]  # (d, p)

        value += er[rs.deaths].sum() - np.log(s0l).sum() - d * shift
        grad += Xd.sum(axis=0) - means.sum(axis=0)
        hess -= s2 * inv.sum() - s2d * (frac * inv).sum() - means.T @ means

        if residuals:
            a = inv.sum()
            am = inv @ means
            r = -w[:, None] * (a * Xr - am[None, :])
            b = (frac * inv).sum()
            bm = (frac * inv) @ means
            r[rs.deaths] += Xd - means.mean(axis=0) + wd[:, None] * (b * Xd - bm[None, :])
            resid[rs.rows] += r
    return value, grad, hess, resid


def partial_log_likelihood(
    matrix: DesignMatrix, beta, ties: str = "efron"
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partial likelihood with its exact gradient and Hessian.

    Parameters
    ----------
    matrix : DesignMatrix
    beta : array-like, shape (p,)
    ties : {"efron", "breslow"}

    Returns
    -------
    value : float
    gradient : ndarray, shape (p,)
    hessian : ndarray, shape (p, p)
    """
    ties = check_ties(ties)
    beta = _check_beta(matrix, beta)
    if matrix.n_events == 0:
        raise NoEvents("the design contains no events")
    value, grad, hess, _ = _accumulate(matrix, beta, ties, residuals=False)
    return float(value), grad, hess


def score_residuals(matrix: DesignMatrix, beta, ties: str = "efron") -> np.ndarray:
    """Per-row score residuals; their column sums equal the gradient."""
    ties = check_ties(ties)
    beta = _check_beta(matrix, beta)
    if matrix.n_events == 0:
        raise NoEvents("the design contains no events")
    return _accumulate(matrix, beta, ties, residuals=True)[3]


@dataclass(frozen=True)
class BaselineHazard:
    """Breslow cumulative baseline hazard as a right-continuous step function."""

    times: tuple[float, ...]
    increments: tuple[float, ...]

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    def __call__(self, t: float) -> float:
        """H0(t): sum of increments at event times <= t."""
        times = np.asarray(self.times)
        return float(np.sum(np.asarray(self.increments)[times <= t]))

    def on_grid(self, horizon: int) -> np.ndarray:
        """Increments over the periods ``1..horizon`` (zero where nothing happened)."""
        out = np.zeros(horizon)
        for t, inc in zip(self.times, self.increments):
            k = int(round(t))
            if 1 <= k <= horizon:
                out[k - 1] += inc
        return out


@dataclass(frozen=True, eq=False)
class CoxModel:
    columns: tuple[str, ...]
    blocks: tuple[str, ...]
    coef: np.ndarray
    covariance_model: np.ndarray
    covariance_clustered: np.ndarray | None
    log_likelihood: float
    ties: str
    iterations: int
    converged: bool
    n_observations: int
    n_events: int
    n_clusters: int | None = None
    baseline: BaselineHazard | None = None
    big_four: str = "flags"
    log_likelihood_null: float | None = None

    def __post_init__(self):
        for name in ("coef", "covariance_model", "covariance_clustered"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.array(a, dtype=float, copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        p = len(self.columns)
        if self.coef.shape != (p,) or self.covariance_model.shape != (p, p):
            raise DimensionMismatch("coefficient and covariance dimensions disagree with the columns")
        if self.covariance_clustered is not None and self.covariance_clustered.shape != (p, p):
            raise DimensionMismatch("clustered covariance has the wrong shape")

    @property
    def covariance(self) -> np.ndarray:
        """Clustered covariance when available, model-based otherwise."""
        return self.covariance_clustered if self.covariance_clustered is not None else self.covariance_model

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def model_standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance_model))

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.columns, self.coef.tolist()))

    @property
    def n_params(self) -> int:
        return len(self.columns)

    def to_dict(self) -> dict[str, Any]:
        from . import __version__

        return {
            "version": __version__,
            "columns": list(self.columns),
            "blocks": list(self.blocks),
            "big_four": self.big_four,
            "coef": self.coef.tolist(),
            "covariance_model": self.covariance_model.ravel().tolist(),
            "covariance_clustered": None
            if self.covariance_clustered is None
            else self.covariance_clustered.ravel().tolist(),
            "log_likelihood": self.log_likelihood,
            "log_likelihood_null": self.log_likelihood_null,
            "ties": self.ties,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_observations": self.n_observations,
            "n_events": self.n_events,
            "n_clusters": self.n_clusters,
            "baseline": None
            if self.baseline is None
            else {"times": list(self.baseline.times), "increments": list(self.baseline.increments)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CoxModel:
        try:
            p = len(d["columns"])
            clustered = d.get("covariance_clustered")
            baseline = d.get("baseline")
            return cls(
                columns=tuple(d["columns"]),
                blocks=tuple(d["blocks"]),
                coef=np.asarray(d["coef"], dtype=float),
                covariance_model=np.asarray(d["covariance_model"], dtype=float).reshape(p, p),
                covariance_clustered=None
                if clustered is None
                else np.asarray(clustered, dtype=float).reshape(p, p),
                log_likelihood=float(d["log_likelihood"]),
                log_likelihood_null=d.get("log_likelihood_null"),
                ties=d["ties"],
                iterations=int(d["iterations"]),
                converged=bool(d["converged"]),
                n_observations=int(d["n_observations"]),
                n_events=int(d["n_events"]),
                n_clusters=d.get("n_clusters"),
                baseline=None
                if baseline is None
                else BaselineHazard(tuple(baseline["times"]), tuple(baseline["increments"])),
                big_four=d.get("big_four", "flags"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed model file: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> CoxModel:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model file is not valid JSON: {exc}") from None

    @classmethod
    def load(cls, path) -> CoxModel:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _invert_information(info: np.ndarray, error=NonIdentifiable) -> np.ndarray:
    if info.size == 0:
        return np.zeros((0, 0))
    try:
        c = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise error("information matrix is singular or not positive definite") from None
    if np.min(np.diag(c)) ** 2 < 1e-12 * np.max(np.diag(info)):
        raise error("information matrix is numerically singular")
    cinv = np.linalg.inv(c)
    out = cinv.T @ cinv
    return (out + out.T) / 2


def fit_cox(
    matrix: DesignMatrix,
    ties: str = "efron",
    tol: float = 1e-8,
    max_iter: int = 100,
    *,
    gtol: float = 1e-8,
    max_halvings: int = 20,
    init=None,
    clustered: bool = True,
) -> CoxModel:
    """Maximise the partial likelihood by Newton-Raphson with step-halving.

    Iteration stops once the relative change of the log-likelihood falls
    below ``tol`` or the largest absolute score component falls below
    ``gtol``. A trial step that lowers the log-likelihood is halved, at most
    ``max_halvings`` times.

    Raises
    ------
    NoEvents
        The design has no events.
    NonIdentifiable
        A column has zero variance or the information matrix is singular.
    MonotoneLikelihood
        A coefficient exceeded 20 in absolute value, or the fit stopped on a
        plateau with a large coefficient still drifting outwards; both are
        signs of a likelihood that keeps increasing towards infinity.
    NotConverged
        ``max_iter`` iterations were used up.
    """
    ties = check_ties(ties)
    if matrix.n_events == 0:
        raise NoEvents("the design contains no events")
    if matrix.degenerate:
        raise NonIdentifiable(f"zero-variance column(s): {', '.join(matrix.degenerate)}")
    p = matrix.n_columns
    beta = np.zeros(p) if init is None else _check_beta(matrix, init).copy()
    ll, g, H, _ = _accumulate(matrix, beta, ties, residuals=False)
    ll_null = ll if init is None else None

    converged = False
    iterations = 0
    while not converged:
        if p == 0 or np.max(np.abs(g)) < gtol:
            converged = True
            break
        if iterations >= max_iter:
            raise NotConverged(f"no convergence after {max_iter} Newton iterations")
        iterations += 1
        info = -H
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError:
            raise NonIdentifiable("singular information matrix during Newton iterations") from None
        if not np.all(np.isfinite(step)):
            raise NonIdentifiable("singular information matrix during Newton iterations")
        scale = 1.0
        for _ in range(max_halvings + 1):
            cand = beta + scale * step
            ll_c, g_c, H_c, _ = _accumulate(matrix, cand, ties, residuals=False)
            if np.isfinite(ll_c) and ll_c >= ll:
                break
            scale /= 2
        else:
            # No ascent direction left at floating point resolution.
            if abs(ll_c - ll) <= tol * abs(ll) or np.max(np.abs(g)) < 1e-6:
                converged = True
                break
            raise NotConverged("step-halving failed to increase the log-likelihood")
        if np.any(np.abs(cand) > MAX_ABS_COEF):
            worst = matrix.columns[int(np.argmax(np.abs(cand)))]
            raise MonotoneLikelihood(
                f"coefficient of {worst!r} exceeded {MAX_ABS_COEF:g} in absolute value"
            )
        change = abs(ll_c - ll)
        beta, ll, g, H = cand, ll_c, g_c, H_c
        if change <= tol * abs(ll) or np.max(np.abs(g)) < gtol:
            converged = True

    cov = _invert_information(-H)
    if p:
        # On a likelihood plateau the next Newton step stays large relative to
        # the coefficient even though the log-likelihood no longer moves.
        pending = np.abs(cov @ g)
        drifting = (np.abs(beta) > PLATEAU_MIN_COEF) & (pending > np.sqrt(tol) * np.abs(beta))
        if np.any(drifting):
            worst = matrix.columns[int(np.argmax(np.where(drifting, pending, -1.0)))]
            raise MonotoneLikelihood(
                f"log-likelihood converged while the coefficient of {worst!r} keeps growing; "
                "its estimate is probably infinite"
            )
    model = CoxModel(
        columns=matrix.columns,
        blocks=matrix.blocks,
        coef=beta,
        covariance_model=cov,
        covariance_clustered=None,
        log_likelihood=float(ll),
        log_likelihood_null=None if ll_null is None else float(ll_null),
        ties=ties,
        iterations=iterations,
        converged=converged,
        n_observations=matrix.n_rows,
        n_events=matrix.n_events,
        big_four=matrix.big_four,
    )
    if clustered:
        vc = clustered_covariance(model, matrix)
        model = replace(model, covariance_clustered=vc, n_clusters=len(set(matrix.clusters.tolist())))
    return model


def clustered_covariance(model: CoxModel, matrix: DesignMatrix, clusters=None) -> np.ndarray:
    """Cluster-robust sandwich ``I^-1 (sum_c g_c g_c^T) I^-1``.

    ``g_c`` sums the score residuals of the rows in cluster ``c`` and ``I`` is
    the observed information at the fitted coefficients. ``clusters`` defaults
    to the design's cluster ids; pass one id per row to regroup.
    """
    if tuple(model.columns) != tuple(matrix.columns):
        raise DimensionMismatch("model and design columns differ")
    clusters = matrix.clusters if clusters is None else np.asarray(clusters)
    if len(clusters) != matrix.n_rows:
        raise DimensionMismatch("need one cluster id per design row")
    p = matrix.n_columns
    if p == 0:
        return np.zeros((0, 0))
    _, _, H, resid = _accumulate(matrix, model.coef, model.ties, residuals=True)
    bread = _invert_information(-H, error=SingularInformation)
    _, inverse = np.unique(np.asarray(clusters).astype(str), return_inverse=True)
    g = np.zeros((inverse.max() + 1, p))
    np.add.at(g, inverse, resid)
    meat = g.T @ g
    v = bread @ meat @ bread
    return (v + v.T) / 2


def breslow_increments(model: CoxModel, matrix: DesignMatrix) -> BaselineHazard:
    """Breslow estimator: events at ``t`` over the risk-weighted size of the risk set."""
    eta = matrix.X @ model.coef if matrix.n_columns else np.zeros(matrix.n_rows)
    w = np.exp(eta)
    times, incs = [], []
    for rs in risk_sets(matrix):
        times.append(rs.time)
        incs.append(len(rs.deaths) / float(w[rs.rows].sum()))
    return BaselineHazard(tuple(times), tuple(incs))


def wald_statistic(coef: np.ndarray, covariance: np.ndarray) -> float:
    """Quadratic form ``b^T V^-1 b``."""
    coef = np.asarray(coef, dtype=float)
    if coef.size == 0:
        return 0.0
    try:
        return float(coef @ np.linalg.solve(covariance, coef))
    except np.linalg.LinAlgError:
        raise SingularInformation("block covariance is singular") from None

