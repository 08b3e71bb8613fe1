"""Survival curves, expected durations and revenue projections from a fitted model."""

from __future__ import annotations

import csv
import io
import json
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from ._validation import check_form, check_non_negative, check_positive_int
from .cox import BaselineHazard, CoxModel, breslow_increments
from .exceptions import HorizonTooShort, ProfileDimensionMismatch, ValidationError
from .nonparametric import SurvivorCurve
from .panel import _ENUMS, _PREFIXES, FLAG_FIELDS, DesignMatrix, _read_text, column_values

DEFAULT_HORIZON = 50
TRUNCATION_THRESHOLD = 0.05


def baseline_cumulative_hazard(model: CoxModel, matrix: DesignMatrix) -> BaselineHazard:
    """Breslow baseline: at each event period, events over ``sum exp(x @ beta)`` of the risk set."""
    if tuple(model.columns) != tuple(matrix.columns):
        raise ProfileDimensionMismatch("model and design columns differ")
    return breslow_increments(model, matrix)


def with_baseline(model: CoxModel, matrix: DesignMatrix) -> CoxModel:
    """Copy of ``model`` carrying its Breslow baseline hazard."""
    return replace(model, baseline=baseline_cumulative_hazard(model, matrix))


# -- profiles -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CovariateProfile:
    """Design-space description of one sponsor.

    ``X`` is either one row of design values (held flat over the forecast) or
    a ``(periods, columns)`` array giving the values period by period; the last
    row is carried forward past its end.
    """

    sponsorship_id: str
    X: np.ndarray
    annual_fee: float = 0.0
    current_tenure: int = 0

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[0] == 0:
            raise ProfileDimensionMismatch("profile values must be a row or a (periods, columns) array")
        X.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "annual_fee", check_non_negative(self.annual_fee, "annual_fee"))
        object.__setattr__(
            self, "current_tenure", check_positive_int(self.current_tenure, "current_tenure", 0)
        )

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]

    def linear_predictor(self, coef: np.ndarray, horizon: int) -> np.ndarray:
        """``x_t @ beta`` for periods ``1..horizon``."""
        if self.n_columns != len(coef):
            raise ProfileDimensionMismatch(
                f"profile has {self.n_columns} values but the model has {len(coef)} columns"
            )
        eta = self.X @ np.asarray(coef, dtype=float)
        if len(eta) >= horizon:
            return eta[:horizon]
        return np.concatenate([eta, np.full(horizon - len(eta), eta[-1])])


def _coerce_field(name: str, value: Any) -> Any:
    if name in _ENUMS:
        token = "none" if value is None else str(value).strip().lower()
        if name == "big_four_property" and token == "":
            token = "none"
        if token not in _ENUMS[name]:
            raise ValidationError(f"{value!r} is not a valid value for {name!r}")
        return token
    if name in FLAG_FIELDS:
        if value in (True, 1, "1", "true", "True"):
            return 1.0
        if value in (False, 0, "0", "false", "False"):
            return 0.0
        raise ValidationError(f"{name!r} must be 0 or 1, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name!r} must be numeric, got {value!r}") from None


def _required_field(column: str) -> str:
    if ":" in column:
        return _PREFIXES[column.split(":", 1)[0]]
    return column


def profile_from_mapping(
    model: CoxModel, mapping: Mapping[str, Any], *, sponsorship_id: str | None = None
) -> CovariateProfile:
    """Build a profile from the JSON/CSV description of a sponsor.

    Covariates may be given as raw panel fields (``sponsorship_type``,
    ``sponsor_category``, ``gdp_growth``, ...) or directly as design column
    values keyed by the model's column names. Optional ``gdp_growth_path`` and
    ``cpi_inflation_path`` lists give per-period economic assumptions.
    """
    covariates = mapping.get("covariates", mapping)
    sid = str(sponsorship_id or mapping.get("sponsorship_id", "profile"))
    fee = mapping.get("annual_fee", 0.0)
    tenure = int(mapping.get("current_tenure", 0) or 0)
    has_paths = any(mapping.get(f"{f}_path") for f in ("gdp_growth", "cpi_inflation"))
    if model.columns and not has_paths and all(c in covariates for c in model.columns):
        X = np.array([[float(covariates[c]) for c in model.columns]])
        return CovariateProfile(sid, X, fee, tenure)

    needed = dict.fromkeys(_required_field(c) for c in model.columns)
    if model.big_four == "league_interaction" and any(c.startswith("property:") for c in model.columns):
        needed["sponsorship_type"] = None
    missing = [f for f in needed if f not in covariates]
    if missing:
        raise ProfileDimensionMismatch(f"profile lacks value(s) for {', '.join(missing)}")
    paths = {
        f: [float(v) for v in mapping[f"{f}_path"]]
        for f in ("gdp_growth", "cpi_inflation")
        if mapping.get(f"{f}_path") and f in needed
    }
    periods = max((len(p) for p in paths.values()), default=1)
    data = {}
    for f in needed:
        value = _coerce_field(f, covariates[f])
        if f in paths:
            path = paths[f] + [paths[f][-1]] * (periods - len(paths[f]))
            data[f] = np.asarray(path)
        else:
            data[f] = np.asarray([value] * periods, dtype=object if f in _ENUMS else float)
    X = np.column_stack([column_values(c, data, model.big_four) for c in model.columns]) if model.columns else np.zeros((periods, 0))
    return CovariateProfile(sid, X, fee, tenure)


def load_profile(model: CoxModel, path) -> CovariateProfile:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"profile is not valid JSON: {exc}") from None
    return profile_from_mapping(model, obj)


def read_portfolio_csv(model: CoxModel, source) -> list[CovariateProfile]:
    """Profiles from a ``sponsorship_id,current_tenure,annual_fee,<covariates>`` CSV."""
    reader = csv.DictReader(io.StringIO(_read_text(source)))
    for required in ("sponsorship_id", "current_tenure", "annual_fee"):
        if required not in (reader.fieldnames or []):
            raise ValidationError(f"portfolio file lacks column {required!r}")
    profiles = []
    for line, rec in enumerate(reader, start=2):
        try:
            rec = dict(rec)
            rec["current_tenure"] = int(rec["current_tenure"])
            rec["annual_fee"] = float(rec["annual_fee"])
            profiles.append(profile_from_mapping(model, rec))
        except ValidationError as exc:
            raise type(exc)(f"portfolio row {line}: {exc}") from None
        except ValueError as exc:
            raise ValidationError(f"portfolio row {line}: {exc}") from None
    return profiles


# -- curves and durations -----------------------------------------------------


def survival_profile(
    model: CoxModel,
    profile: CovariateProfile,
    horizon: int = DEFAULT_HORIZON,
    form: str = "exponential",
) -> SurvivorCurve:
    """Survivor curve ``S(t | x)`` on the period grid ``0..horizon``.

    ``form="exponential"`` uses ``exp(-sum_t dH0(t) exp(x_t @ beta))``. The
    alternative ``form="product"`` uses ``prod_t (1 - dH0(t)) ** exp(x_t @ beta)``,
    which reproduces the product-limit curve exactly when ``beta = 0``.
    """
    horizon = check_positive_int(horizon, "horizon")
    form = check_form(form)
    if model.baseline is None:
        raise ValidationError("model carries no baseline hazard; fit it with with_baseline()")
    inc = model.baseline.on_grid(horizon)
    risk = np.exp(profile.linear_predictor(model.coef, horizon))
    if form == "exponential":
        s = np.exp(-np.cumsum(inc * risk))
    else:
        with np.errstate(divide="ignore"):
            s = np.cumprod(np.clip(1.0 - inc, 0.0, 1.0) ** risk)
    return SurvivorCurve(np.arange(horizon + 1), np.concatenate(([1.0], s)))


def expected_duration(
    curve: SurvivorCurve, current_tenure: int = 0, horizon: int | None = None
) -> float:
    """Restricted mean duration in years, optionally conditional on tenure.

    Unconditionally ``sum_{t=0}^{horizon-1} S(t)``; for a sponsor already ``k``
    years in, ``k + sum_{t=k}^{horizon-1} S(t) / S(k)``. Warns with
    :class:`~sponsorsurv.exceptions.HorizonTooShort` when ``S(horizon)`` is
    still above .05.
    """
    horizon = curve.horizon if horizon is None else check_positive_int(horizon, "horizon")
    k = check_positive_int(current_tenure, "current_tenure", 0)
    if k >= horizon:
        raise ValidationError(f"tenure {k} is not below the horizon {horizon}")
    s = np.array([curve(t) for t in range(horizon + 1)])
    if s[horizon] > TRUNCATION_THRESHOLD:
        warnings.warn(
            f"HorizonTooShort: S({horizon}) = {s[horizon]:.4f} > {TRUNCATION_THRESHOLD}; "
            "the expected duration is truncated",
            HorizonTooShort,
            stacklevel=2,
        )
    if k == 0:
        return float(s[:horizon].sum())
    if s[k] <= 0:
        raise ValidationError(f"survivor curve is zero at tenure {k}")
    return float(k + s[k:horizon].sum() / s[k])


def revenue_forecast(expected_duration: float, annual_fee: float) -> float:
    """Expected total revenue: duration times annual fee, at full precision."""
    return check_non_negative(expected_duration, "expected_duration") * check_non_negative(
        annual_fee, "annual_fee"
    )


def format_millions(amount: float) -> str:
    """Currency in millions with two decimals, half-up on the full-precision value."""
    from decimal import ROUND_HALF_UP, Decimal

    value = (Decimal(repr(float(amount))) / Decimal(1_000_000)).quantize(Decimal("0.01"), ROUND_HALF_UP)
    return f"${value}M"


def exit_probability(curve: SurvivorCurve, tenure: int, years: int) -> float:
    """Probability of exiting within ``years`` after ``tenure``: ``1 - S(k+years)/S(k)``."""
    sk = curve(tenure)
    if sk <= 0:
        return 1.0
    return float(min(max(1.0 - curve(tenure + years) / sk, 0.0), 1.0))


@dataclass(frozen=True)
class ForecastReport:
    sponsorship_id: str
    curve: SurvivorCurve
    current_tenure: int
    annual_fee: float
    renewal_probability: float
    expected_duration: float
    expected_remaining: float
    expected_revenue: float
    horizon: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "sponsorship_id": self.sponsorship_id,
            "current_tenure": self.current_tenure,
            "annual_fee": self.annual_fee,
            "horizon": self.horizon,
            "renewal_probability": self.renewal_probability,
            "expected_duration": self.expected_duration,
            "expected_remaining": self.expected_remaining,
            "expected_revenue": self.expected_revenue,
            "expected_revenue_display": format_millions(self.expected_revenue),
            "survival_curve": [[int(p), float(v)] for p, v in zip(self.curve.periods, self.curve.values)],
        }


def forecast(
    model: CoxModel,
    profile: CovariateProfile,
    horizon: int = DEFAULT_HORIZON,
    form: str = "exponential",
) -> ForecastReport:
    """Renewal probability, expected duration and revenue for one sponsor.

    Durations are conditional on ``profile.current_tenure``; the revenue is the
    expected total duration times the annual fee.
    """
    k = profile.current_tenure
    curve = survival_profile(model, profile, max(horizon, k + 1), form)
    total = expected_duration(curve, k)
    renewal = curve(k + 1) / curve(k) if curve(k) > 0 else 0.0
    return ForecastReport(
        sponsorship_id=profile.sponsorship_id,
        curve=curve,
        current_tenure=k,
        annual_fee=profile.annual_fee,
        renewal_probability=float(renewal),
        expected_duration=total,
        expected_remaining=total - k,
        expected_revenue=revenue_forecast(total, profile.annual_fee),
        horizon=curve.horizon,
    )


@dataclass(frozen=True)
class AuditRecord:
    sponsorship_id: str
    current_tenure: int
    annual_fee: float
    exit_1y: float
    exit_2y: float
    expected_duration: float
    expected_remaining: float
    expected_remaining_revenue: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "sponsorship_id": self.sponsorship_id,
            "current_tenure": self.current_tenure,
            "annual_fee": self.annual_fee,
            "exit_probability_1y": self.exit_1y,
            "exit_probability_2y": self.exit_2y,
            "expected_duration": self.expected_duration,
            "expected_remaining": self.expected_remaining,
            "expected_remaining_revenue": self.expected_remaining_revenue,
        }


def portfolio_audit(
    model: CoxModel,
    portfolio: Iterable[CovariateProfile],
    horizon: int = DEFAULT_HORIZON,
    form: str = "exponential",
) -> list[AuditRecord]:
    """Rank current sponsors by their probability of exiting within two years.

    Sorted by descending two-year exit probability, ties by ascending id.
    """
    records = []
    for profile in portfolio:
        k = profile.current_tenure
        curve = survival_profile(model, profile, max(horizon, k + 2), form)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonTooShort)
            total = expected_duration(curve, k)
        records.append(
            AuditRecord(
                sponsorship_id=profile.sponsorship_id,
                current_tenure=k,
                annual_fee=profile.annual_fee,
                exit_1y=exit_probability(curve, k, 1),
                exit_2y=exit_probability(curve, k, 2),
                expected_duration=total,
                expected_remaining=total - k,
                expected_remaining_revenue=(total - k) * profile.annual_fee,
            )
        )
    records.sort(key=lambda r: (-r.exit_2y, r.sponsorship_id))
    return records


def render_audit_text(records: Sequence[AuditRecord]) -> str:
    if not records:
        return "empty portfolio\n"
    w = max(len("sponsorship_id"), *(len(r.sponsorship_id) for r in records)) + 2
    head = (
        "sponsorship_id".ljust(w)
        + "tenure".rjust(7)
        + "exit 1y".rjust(9)
        + "exit 2y".rjust(9)
        + "E[total]".rjust(10)
        + "E[remaining]".rjust(14)
        + "remaining revenue".rjust(19)
    )
    lines = [head, "-" * len(head)]
    for r in records:
        lines.append(
            r.sponsorship_id.ljust(w)
            + f"{r.current_tenure}".rjust(7)
            + f"{r.exit_1y:.4f}".rjust(9)
            + f"{r.exit_2y:.4f}".rjust(9)
            + f"{r.expected_duration:.2f}".rjust(10)
            + f"{r.expected_remaining:.2f}".rjust(14)
            + format_millions(r.expected_remaining_revenue).rjust(19)
        )
    return "\n".join(lines) + "\n"


def render_audit_json(records: Sequence[AuditRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2) + "\n"

