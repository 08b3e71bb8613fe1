"""Synthetic panels and brute-force reference computations.

Panels are drawn from a discrete-time proportional hazards process: in period
``j`` a spell still at risk exits with probability ``h_j * exp(x @ beta)``,
otherwise it is censored with a fixed per-period probability. Random numbers
come from NumPy's PCG64 bit generator seeded explicitly, so a spec and a seed
pin the output exactly.

The oracles here (risk-set enumeration, grid search, finite differences) do
not share code with :mod:`sponsorsurv.cox` beyond the design-matrix container.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._validation import check_ties
from .exceptions import HazardOverflow, TooManyColumns, ValidationError
from .panel import FLAG_FIELDS, Dataset, DesignMatrix, PanelObservation

CONTINUOUS_FIELDS = ("gdp_growth", "cpi_inflation")
_FIELD_RANGES = {"gdp_growth": (-100.0, 100.0), "cpi_inflation": (-100.0, 5000.0)}


@dataclass(frozen=True)
class CovariateSpec:
    """One generated covariate, stored in a panel field of the same name.

    Binary covariates use one of the 0/1 sponsor characteristic fields and are
    drawn with probability ``prevalence``; continuous covariates use
    ``gdp_growth`` or ``cpi_inflation`` and are uniform on ``[low, high]``,
    redrawn every period when ``time_varying``.
    """

    column: str
    beta: float
    prevalence: float = 0.5
    low: float = 0.0
    high: float = 1.0
    time_varying: bool = False

    @property
    def kind(self) -> str:
        return "binary" if self.column in FLAG_FIELDS else "continuous"

    def __post_init__(self):
        if self.column in FLAG_FIELDS:
            if not 0.0 <= self.prevalence <= 1.0:
                raise ValidationError(f"prevalence of {self.column!r} must lie in [0, 1]")
            if self.time_varying:
                raise ValidationError("binary covariates are fixed per spell")
        elif self.column in CONTINUOUS_FIELDS:
            lo, hi = _FIELD_RANGES[self.column]
            if not (lo <= self.low <= self.high <= hi):
                raise ValidationError(f"range of {self.column!r} must lie inside [{lo:g}, {hi:g}]")
        else:
            raise ValidationError(
                f"cannot generate {self.column!r}; use one of {FLAG_FIELDS + CONTINUOUS_FIELDS}"
            )

    def support(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.kind == "binary" else (self.low, self.high)


@dataclass(frozen=True)
class GeneratorSpec:
    n_spells: int
    baseline_hazard: tuple[float, ...]
    seed: int
    covariates: tuple[CovariateSpec, ...] = ()
    censoring_rate: float = 0.0
    max_horizon: int = 50
    clamp: bool = False

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ValidationError("a generator spec needs an integer seed")
        if self.n_spells < 0:
            raise ValidationError("n_spells must be >= 0")
        if not self.baseline_hazard or any(not 0.0 <= h < 1.0 for h in self.baseline_hazard):
            raise ValidationError("baseline hazards must lie in [0, 1)")
        if not 0.0 <= self.censoring_rate < 1.0:
            raise ValidationError("censoring_rate must lie in [0, 1)")
        if self.max_horizon < 1:
            raise ValidationError("max_horizon must be >= 1")
        names = [c.column for c in self.covariates]
        if len(set(names)) != len(names):
            raise ValidationError("each covariate column may be generated once")
        object.__setattr__(self, "baseline_hazard", tuple(float(h) for h in self.baseline_hazard))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.clamp:
            worst = self.max_linear_predictor()
            top = max(self.baseline_hazard[: self.max_horizon])
            if top * math.exp(worst) >= 1.0:
                raise HazardOverflow(
                    f"baseline {top:g} x exp({worst:.4g}) reaches 1 for a reachable covariate value; "
                    "set clamp=true to cap the exit probability"
                )

    def max_linear_predictor(self) -> float:
        return sum(max(c.beta * lo, c.beta * hi) for c in self.covariates for lo, hi in [c.support()])

    @property
    def beta(self) -> np.ndarray:
        return np.array([c.beta for c in self.covariates])

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c.column for c in self.covariates)

    def hazard(self, period: int) -> float:
        return self.baseline_hazard[min(period, len(self.baseline_hazard)) - 1]

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> GeneratorSpec:
        try:
            covs = tuple(CovariateSpec(**c) for c in obj.get("covariates", ()))
            baseline = obj["baseline_hazard"]
            if isinstance(baseline, (int, float)):
                baseline = [baseline]
            return cls(
                n_spells=int(obj["n_spells"]),
                baseline_hazard=tuple(baseline),
                seed=obj["seed"],
                covariates=covs,
                censoring_rate=float(obj.get("censoring_rate", 0.0)),
                max_horizon=int(obj.get("max_horizon", 50)),
                clamp=bool(obj.get("clamp", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed generator spec: {exc}") from None

    @classmethod
    def load(cls, path: str | os.PathLike) -> GeneratorSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))


def _neutral_row(sid: str, period: int, event: bool, values: dict[str, Any]) -> PanelObservation:
    row = dict(
        sponsorship_id=sid,
        period=period,
        sponsorship_type="team",
        big_four_property="none",
        gdp_growth=0.0,
        cpi_inflation=0.0,
        sponsor_location="north_america",
        sponsor_category="other",
        regional_proximity=False,
        congruence=False,
        brand_equity=False,
        b2b=False,
        publicly_traded=False,
        clutter=1,
        event=event,
    )
    row.update(values)
    return PanelObservation(**row)


def generate_panel(spec: GeneratorSpec) -> Dataset:
    """Draw a panel; identical specs give identical datasets."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    width = len(str(max(spec.n_spells, 1)))
    rows: list[PanelObservation] = []
    for i in range(spec.n_spells):
        sid = f"S{i + 1:0{width}d}"
        fixed: dict[str, Any] = {}
        for c in spec.covariates:
            if c.kind == "binary":
                fixed[c.column] = bool(rng.random() < c.prevalence)
            elif not c.time_varying:
                fixed[c.column] = float(rng.uniform(c.low, c.high))
        spell: list[dict[str, Any]] = []
        for period in range(1, spec.max_horizon + 1):
            values = dict(fixed)
            for c in spec.covariates:
                if c.time_varying:
                    values[c.column] = float(rng.uniform(c.low, c.high))
            eta = sum(c.beta * float(values[c.column]) for c in spec.covariates)
            p_exit = min(spec.hazard(period) * math.exp(eta), 1.0)
            u, v = rng.random(), rng.random()
            spell.append(values)
            if u < p_exit:
                rows.extend(_neutral_row(sid, j, j == period, val) for j, val in enumerate(spell, 1))
                break
            if v < spec.censoring_rate or period == spec.max_horizon:
                rows.extend(_neutral_row(sid, j, False, val) for j, val in enumerate(spell, 1))
                break
    return Dataset(rows, _validated=True)


def true_survivor(spec: GeneratorSpec, horizon: int | None = None, nodes: int = 64) -> np.ndarray:
    """Population survivor ``S(1..horizon)`` of the generating process.

    Averages the conditional survivor over the covariate distribution
    (enumeration for binary covariates, Gauss-Legendre quadrature for
    continuous ones). Only time-invariant covariates are supported.
    """
    horizon = spec.max_horizon if horizon is None else horizon
    if any(c.time_varying for c in spec.covariates):
        raise ValidationError("true_survivor needs time-invariant covariates")
    h = np.array([spec.hazard(j) for j in range(1, horizon + 1)])
    eta = np.zeros(1)
    weight = np.ones(1)
    x, w = np.polynomial.legendre.leggauss(nodes)
    for c in spec.covariates:
        if c.kind == "binary":
            vals, wts = np.array([0.0, 1.0]), np.array([1 - c.prevalence, c.prevalence])
        else:
            vals = c.low + (x + 1) * (c.high - c.low) / 2
            wts = w / 2
        eta = (eta[:, None] + c.beta * vals[None, :]).ravel()
        weight = (weight[:, None] * wts[None, :]).ravel()
    p = np.minimum(h[None, :] * np.exp(eta)[:, None], 1.0)
    return weight @ np.cumprod(1.0 - p, axis=1)


# -- oracles ------------------------------------------------------------------


def enumerate_log_likelihood(matrix: DesignMatrix, betas, ties: str = "efron") -> np.ndarray:
    """Log partial likelihood at each row of ``betas`` by explicit risk-set listing.

    ``betas`` has shape ``(G, p)`` (or ``(p,)``); the result has shape ``(G,)``.
    """
    ties = check_ties(ties)
    betas = np.asarray(betas, dtype=float)
    if betas.ndim == 1:
        betas = betas[None, :]
    eta = matrix.X @ betas.T  # (n, G)
    start, stop, event = matrix.start.tolist(), matrix.stop.tolist(), matrix.event.tolist()
    n = len(stop)
    total = np.zeros(betas.shape[0])
    for t in sorted({stop[i] for i in range(n) if event[i]}):
        at_risk = [i for i in range(n) if start[i] < t <= stop[i]]
        died = [i for i in at_risk if event[i] and stop[i] == t]
        er = eta[at_risk]
        m = er.max(axis=0)
        risk_sum = np.exp(er - m).sum(axis=0)
        death_sum = np.exp(eta[died] - m).sum(axis=0)
        d = len(died)
        total += eta[died].sum(axis=0)
        for k in range(d):
            frac = k / d if ties == "efron" else 0.0
            total -= np.log(risk_sum - frac * death_sum) + m
    return total


@dataclass(frozen=True)
class GridSearchResult:
    beta: np.ndarray
    log_likelihood: float
    monotone_suspected: bool
    grid: tuple[np.ndarray, ...] = field(repr=False, default=())


def grid_search_mle(
    matrix: DesignMatrix,
    bounds: tuple[float, float] = (-5.0, 5.0),
    resolution: float = 1e-3,
    ties: str = "efron",
    chunk: int = 20000,
) -> GridSearchResult:
    """Exhaustive maximisation of the partial likelihood over a regular grid.

    Limited to one or two columns. When the maximiser lies on the grid
    boundary the likelihood is probably monotone and ``monotone_suspected``
    is set.
    """
    p = matrix.n_columns
    if p > 2 or p == 0:
        raise TooManyColumns(f"grid search handles 1 or 2 columns, got {p}")
    lo, hi = map(float, bounds)
    if not hi > lo or resolution <= 0:
        raise ValidationError("need lower < upper bound and a positive resolution")
    axis = lo + resolution * np.arange(int(round((hi - lo) / resolution)) + 1)
    if p == 1:
        points = axis[:, None]
    else:
        a, b = np.meshgrid(axis, axis, indexing="ij")
        points = np.column_stack([a.ravel(), b.ravel()])
    best_val, best_idx = -np.inf, 0
    for s in range(0, len(points), chunk):
        vals = enumerate_log_likelihood(matrix, points[s : s + chunk], ties)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_idx = float(vals[k]), s + k
    beta = points[best_idx].copy()
    on_edge = bool(np.any(np.isclose(beta, lo) | np.isclose(beta, hi)))
    return GridSearchResult(beta, best_val, on_edge, (axis,))


@dataclass(frozen=True)
class FiniteDiffResult:
    gradient_error: float
    hessian_error: float


def finite_diff_check(
    matrix: DesignMatrix, beta, step: float = 1e-5, ties: str = "efron"
) -> FiniteDiffResult:
    """Compare analytic derivatives with central differences.

    The gradient is checked against differences of the log-likelihood value,
    the Hessian against differences of the analytic gradient. Errors are the
    max-norm of the discrepancy divided by the larger of the derivative's
    max-norm and 1.
    """
    from .cox import partial_log_likelihood

    if not step > 0:
        raise ValidationError("finite-difference step must be positive")
    beta = np.asarray(beta, dtype=float)
    p = beta.size
    _, grad, hess = partial_log_likelihood(matrix, beta, ties)
    num_grad = np.zeros(p)
    num_hess = np.zeros((p, p))
    for k in range(p):
        e = np.zeros(p)
        e[k] = step
        fp, gp, _ = partial_log_likelihood(matrix, beta + e, ties)
        fm, gm, _ = partial_log_likelihood(matrix, beta - e, ties)
        num_grad[k] = (fp - fm) / (2 * step)
        num_hess[:, k] = (gp - gm) / (2 * step)

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.max(np.abs(a)), 1.0))

    return FiniteDiffResult(rel(grad, num_grad), rel(hess, num_hess))
