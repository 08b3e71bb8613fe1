"""Survival analysis of sponsorship renewals.

Life tables and product-limit survivor curves, Cox proportional hazards
fitting with cluster-robust standard errors, and renewal, duration and revenue
forecasts built from fitted models.
"""

__version__ = "0.1.0"

from .cox import CoxModel, clustered_covariance, fit_cox, partial_log_likelihood
from .forecast import (
    CovariateProfile,
    expected_duration,
    exit_probability,
    forecast,
    portfolio_audit,
    revenue_forecast,
    survival_profile,
    with_baseline,
)
from .nonparametric import (
    LifeTable,
    SurvivorCurve,
    life_table,
    median_lifetime,
    overall_hazard,
    smoothed_hazard,
)
from .panel import (
    BlockSpec,
    Dataset,
    DesignMatrix,
    PanelObservation,
    SponsorshipSpell,
    design_matrix,
    parse_panel_csv,
    render_panel_csv,
    spells_from_panel,
)
from .report import hierarchical_fit, information_criteria, vif
from .synth import GeneratorSpec, finite_diff_check, generate_panel, grid_search_mle

__all__ = [
    "BlockSpec",
    "CovariateProfile",
    "CoxModel",
    "Dataset",
    "DesignMatrix",
    "GeneratorSpec",
    "LifeTable",
    "PanelObservation",
    "SponsorshipSpell",
    "SurvivorCurve",
    "clustered_covariance",
    "design_matrix",
    "exit_probability",
    "expected_duration",
    "finite_diff_check",
    "fit_cox",
    "forecast",
    "generate_panel",
    "grid_search_mle",
    "hierarchical_fit",
    "information_criteria",
    "life_table",
    "median_lifetime",
    "overall_hazard",
    "parse_panel_csv",
    "partial_log_likelihood",
    "portfolio_audit",
    "render_panel_csv",
    "revenue_forecast",
    "smoothed_hazard",
    "spells_from_panel",
    "survival_profile",
    "vif",
    "with_baseline",
]
