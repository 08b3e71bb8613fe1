"""Hierarchical block fitting and its report: Wald tests, AIC/BIC, VIF, hazard ratios."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import chdtrc, ndtr

from .cox import CoxModel, fit_cox, wald_statistic
from .exceptions import DegenerateDesign, NoEvents, ValidationError
from .forecast import with_baseline
from .panel import BlockSpec, Dataset, DesignMatrix, design_matrix

Z_95 = 1.96


def information_criteria(log_likelihood: float, k: int, n: int) -> tuple[float, float]:
    """AIC ``-2LL + 2k`` and BIC ``-2LL + k ln n``."""
    if k < 0 or n < 1:
        raise ValidationError("need k >= 0 and n >= 1")
    return -2.0 * log_likelihood + 2.0 * k, -2.0 * log_likelihood + k * math.log(n)


def vif(matrix: DesignMatrix | np.ndarray, columns: Sequence[str] | None = None) -> dict[str, float]:
    """Variance inflation factors from auxiliary regressions with an intercept.

    Columns that are perfectly explained by the others (R^2 within 1e-12 of
    one) get ``inf``.
    """
    if isinstance(matrix, DesignMatrix):
        X, columns = matrix.X, matrix.columns
    else:
        X = np.asarray(matrix, dtype=float)
        columns = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    n, p = X.shape
    if p < 2:
        raise ValidationError("VIF needs at least two columns")
    if np.any(np.ptp(X, axis=0) == 0):
        raise ValidationError("VIF is undefined for constant columns")
    Xc = X - X.mean(axis=0)
    out = {}
    for j in range(p):
        y = Xc[:, j]
        others = np.delete(Xc, j, axis=1)
        coef, *_ = np.linalg.lstsq(others, y, rcond=None)
        resid = y - others @ coef
        r2 = 1.0 - (resid @ resid) / (y @ y)
        out[columns[j]] = math.inf if r2 >= 1.0 - 1e-12 else 1.0 / (1.0 - r2)
    return out


def stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def describe_hazard_ratio(hr: float) -> str:
    """Plain-language effect of a hazard ratio on the probability of exit."""
    if hr < 1.0:
        pct = f"{(1.0 - hr) * 100:.1f}"
        word = "less likely"
    else:
        pct = f"{(hr - 1.0) * 100:.1f}"
        word = "more likely"
    if pct == "0.0":
        return "0.0% change"
    return f"{pct}% {word}"


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    block: str
    coef: float
    se: float
    z: float
    p: float
    hazard_ratio: float
    ci_low: float
    ci_high: float

    @property
    def percent_change(self) -> float:
        hr = self.hazard_ratio
        return (1.0 - hr) * 100 if hr < 1.0 else (hr - 1.0) * 100

    @property
    def interpretation(self) -> str:
        return describe_hazard_ratio(self.hazard_ratio)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "block": self.block,
            "coef": self.coef,
            "robust_se": self.se,
            "z": self.z,
            "p": self.p,
            "stars": stars(self.p),
            "hazard_ratio": self.hazard_ratio,
            "ci95": [self.ci_low, self.ci_high],
            "interpretation": self.interpretation,
        }


@dataclass(frozen=True)
class BlockTest:
    block: str
    chi2: float
    df: int
    p: float

    def to_dict(self) -> dict:
        return {"block": self.block, "chi2": self.chi2, "df": self.df, "p": self.p, "stars": stars(self.p)}


@dataclass(frozen=True)
class FitReport:
    name: str
    rows: tuple[CoefficientRow, ...]
    block_tests: tuple[BlockTest, ...]
    log_likelihood: float
    aic: float
    bic: float
    n_observations: int
    ties: str
    vif: dict[str, float] | None = field(default=None)

    def row(self, name: str) -> CoefficientRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ties": self.ties,
            "rows": [r.to_dict() for r in self.rows],
            "block_tests": [b.to_dict() for b in self.block_tests],
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
            "bic_n": self.n_observations,
            "vif": self.vif,
        }


def hazard_ratio_table(model: CoxModel) -> tuple[CoefficientRow, ...]:
    """Per-column hazard ratios with robust-SE z statistics and 95% intervals."""
    se = model.standard_errors
    rows = []
    for name, block, b, s in zip(model.columns, model.blocks, model.coef, se):
        z = b / s if s > 0 else math.copysign(math.inf, b) if b else 0.0
        p = float(2 * ndtr(-abs(z)))
        rows.append(
            CoefficientRow(
                name=name,
                block=block,
                coef=float(b),
                se=float(s),
                z=float(z),
                p=p,
                hazard_ratio=math.exp(b),
                ci_low=math.exp(b - Z_95 * s),
                ci_high=math.exp(b + Z_95 * s),
            )
        )
    return tuple(rows)


def block_wald_test(model: CoxModel, block: str) -> BlockTest:
    """Joint Wald test that all coefficients of ``block`` are zero (clustered covariance)."""
    idx = [i for i, b in enumerate(model.blocks) if b == block]
    if not idx:
        raise ValidationError(f"model has no block {block!r}")
    chi2 = wald_statistic(model.coef[idx], model.covariance[np.ix_(idx, idx)])
    return BlockTest(block, chi2, len(idx), float(chdtrc(len(idx), chi2)))


def fit_report(
    model: CoxModel, name: str, new_blocks: Sequence[str] = (), with_vif: DesignMatrix | None = None
) -> FitReport:
    aic, bic = information_criteria(model.log_likelihood, model.n_params, model.n_observations)
    return FitReport(
        name=name,
        rows=hazard_ratio_table(model),
        block_tests=tuple(block_wald_test(model, b) for b in new_blocks),
        log_likelihood=model.log_likelihood,
        aic=aic,
        bic=bic,
        n_observations=model.n_observations,
        ties=model.ties,
        vif=None if with_vif is None else vif(with_vif),
    )


def hierarchical_fit(
    data: Dataset | DesignMatrix,
    spec: BlockSpec | dict | str | None = None,
    ties: str = "efron",
    tol: float = 1e-8,
    max_iter: int = 100,
) -> list[tuple[CoxModel, FitReport]]:
    """Fit Models 1..K, entering one block at a time.

    Model ``k`` contains blocks ``1..k``; its report carries the Wald test of
    block ``k`` and AIC/BIC/log-likelihood. VIFs are computed for the final
    model only. Each model carries its Breslow baseline hazard.
    """
    if isinstance(data, DesignMatrix):
        if spec is not None:
            spec = BlockSpec.from_obj(spec)
            full = replace(data.select(spec.columns), blocks=spec.labels)
        else:
            full = data
        order = full.block_names
    else:
        spec = BlockSpec.from_obj(spec)
        full = design_matrix(data, spec)
        order = tuple(name for name, _ in spec.blocks)
    if full.n_events == 0:
        raise NoEvents("the panel contains no events")
    if full.degenerate:
        raise DegenerateDesign(f"zero-variance column(s): {', '.join(full.degenerate)}")
    results = []
    previous: dict[str, float] = {}
    for k, block in enumerate(order, start=1):
        cols = [c for c, b in zip(full.columns, full.blocks) if b in order[:k]]
        sub = full.select(cols)
        # Warm start from the previous model; new columns start at zero.
        init = [previous.get(c, 0.0) for c in cols] if previous else None
        model = fit_cox(sub, ties=ties, tol=tol, max_iter=max_iter, init=init)
        model = with_baseline(model, sub)
        previous = model.params
        report = fit_report(
            model, f"Model {k}", new_blocks=(block,), with_vif=sub if k == len(order) and sub.n_columns > 1 else None
        )
        results.append((model, report))
    return results


# -- rendering ----------------------------------------------------------------


def _cell(row: CoefficientRow | None) -> str:
    if row is None:
        return ""
    return f"{row.z:.2f}{stars(row.p)} ({row.se:.3f})"


def render_text(reports: Sequence[FitReport]) -> str:
    """Aligned text table: rows are covariates, columns are models."""
    if not reports:
        return ""
    final = reports[-1]
    names = [r.name for r in final.rows]
    blocks = {r.name: r.block for r in final.rows}
    lines = [
        f"Cox proportional hazards, ties={final.ties}",
        "Cells: z = coef / robust SE, significance stars, robust SE in parentheses.",
        f"Standard errors clustered by sponsorship; BIC uses n = {final.n_observations} panel observations.",
        "",
    ]
    width = max([len(n) for n in names] + [len("Log-likelihood"), len("Wald chi2 (df)")]) + 2
    colw = max(18, *(len(r.name) + 2 for r in reports))
    header = "Variable".ljust(width) + "".join(r.name.rjust(colw) for r in reports)
    lines += [header, "-" * len(header)]
    current = None
    lookup = [{r.name: r for r in rep.rows} for rep in reports]
    for n in names:
        if blocks[n] != current:
            current = blocks[n]
            lines.append(f"[{current}]")
        lines.append(n.ljust(width) + "".join(_cell(lk.get(n)).rjust(colw) for lk in lookup))
    lines.append("-" * len(header))
    lines.append("AIC".ljust(width) + "".join(f"{r.aic:.1f}".rjust(colw) for r in reports))
    lines.append("BIC".ljust(width) + "".join(f"{r.bic:.1f}".rjust(colw) for r in reports))
    lines.append("Log-likelihood".ljust(width) + "".join(f"{r.log_likelihood:.1f}".rjust(colw) for r in reports))
    wald = []
    for r in reports:
        t = r.block_tests[0] if r.block_tests else None
        wald.append("" if t is None else f"{t.chi2:.2f}{stars(t.p)} ({t.df})")
    lines.append("Wald chi2 (df)".ljust(width) + "".join(w.rjust(colw) for w in wald))
    lines.append("* p < .05; ** p < .01; *** p < .001")
    lines.append("")
    lines.append(f"Hazard ratios ({final.name})")
    hw = max(len(n) for n in names) + 2
    lines.append(
        "Variable".ljust(hw) + "HR".rjust(8) + "95% CI".rjust(18) + "z".rjust(8) + "p".rjust(8) + "  Effect on exit"
    )
    for r in final.rows:
        ci = f"[{r.ci_low:.3f}, {r.ci_high:.3f}]"
        lines.append(
            r.name.ljust(hw)
            + f"{r.hazard_ratio:.3f}".rjust(8)
            + ci.rjust(18)
            + f"{r.z:.2f}".rjust(8)
            + f"{r.p:.3f}".rjust(8)
            + f"  {r.interpretation}"
        )
    if final.vif:
        finite = [v for v in final.vif.values() if math.isfinite(v)]
        lines.append("")
        worst = max(final.vif.values())
        mean = sum(finite) / len(finite) if finite else math.inf
        lines.append(f"VIF: largest {worst:.2f}, mean {mean:.2f}")
    return "\n".join(lines) + "\n"


def render_json(reports: Sequence[FitReport]) -> str:
    final = reports[-1] if reports else None
    doc = {
        "ties": final.ties if final else None,
        "bic_n": final.n_observations if final else None,
        "columns": [r.name for r in final.rows] if final else [],
        "models": [r.to_dict() for r in reports],
    }
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"
