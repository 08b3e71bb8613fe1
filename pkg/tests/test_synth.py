import math

import numpy as np
import pytest
from conftest import random_matrix, tied_instance

from sponsorsurv.cox import fit_cox
from sponsorsurv.exceptions import HazardOverflow, TooManyColumns, ValidationError
from sponsorsurv.nonparametric import life_table, median_lifetime, overall_hazard
from sponsorsurv.panel import DesignMatrix, parse_panel_csv, render_panel_csv
from sponsorsurv.synth import (
    CovariateSpec,
    GeneratorSpec,
    enumerate_log_likelihood,
    finite_diff_check,
    generate_panel,
    grid_search_mle,
    true_survivor,
)


def spec(**kw):
    values = dict(
        n_spells=500,
        baseline_hazard=(0.2,),
        seed=1,
        covariates=(CovariateSpec("congruence", 0.5), CovariateSpec("gdp_growth", -0.3, low=-1, high=1)),
        censoring_rate=0.05,
        max_horizon=20,
    )
    values.update(kw)
    return GeneratorSpec(**values)


class TestGenerator:
    def test_empty(self):
        assert generate_panel(spec(n_spells=0)).n_spells == 0

    def test_deterministic(self):
        assert render_panel_csv(generate_panel(spec())) == render_panel_csv(generate_panel(spec()))
        assert render_panel_csv(generate_panel(spec())) != render_panel_csv(generate_panel(spec(seed=2)))

    def test_round_trip(self):
        data = generate_panel(spec())
        assert parse_panel_csv(render_panel_csv(data).encode()) == data

    def test_horizon_and_censoring(self):
        data = generate_panel(spec(censoring_rate=0.0, baseline_hazard=(0.01,), max_horizon=5))
        assert max(s.duration for s in data.spells) == 5
        assert any(not s.ended for s in data.spells)

    def test_overflow(self):
        with pytest.raises(HazardOverflow):
            spec(baseline_hazard=(0.6,), covariates=(CovariateSpec("b2b", 1.0),))
        clamped = spec(baseline_hazard=(0.6,), covariates=(CovariateSpec("b2b", 1.0, prevalence=1.0),), clamp=True)
        data = generate_panel(clamped)
        assert all(s.duration == 1 and s.ended for s in data.spells)

    def test_seed_required(self):
        with pytest.raises(ValidationError):
            spec(seed=None)

    def test_bad_covariate(self):
        with pytest.raises(ValidationError):
            CovariateSpec("clutter", 0.1)
        with pytest.raises(ValidationError):
            CovariateSpec("b2b", 0.1, prevalence=1.5)

    def test_from_obj(self):
        obj = {"n_spells": 3, "baseline_hazard": 0.3, "seed": 9, "covariates": [{"column": "b2b", "beta": 0.2}]}
        g = GeneratorSpec.from_obj(obj)
        assert g.baseline_hazard == (0.3,) and g.columns == ("b2b",)

    def test_null_half_hazard(self):
        data = generate_panel(GeneratorSpec(n_spells=10_000, baseline_hazard=(0.5,), seed=42))
        table = life_table(data)
        assert overall_hazard(table)[0] == pytest.approx(0.5, abs=0.01)
        assert median_lifetime(table) == pytest.approx(1.0, abs=0.05)

    def test_survivor_within_dkw_band(self):
        g = spec(n_spells=4000, censoring_rate=0.0, seed=5)
        table = life_table(generate_panel(g))
        truth = true_survivor(g, horizon=len(table))
        eps = math.sqrt(math.log(2 / 0.01) / (2 * g.n_spells))
        assert np.max(np.abs(table.survivor - truth)) < eps


class TestOracles:
    def test_grid_tied_instance(self):
        result = grid_search_mle(tied_instance(), ties="breslow")
        assert result.beta[0] == pytest.approx(0.0, abs=1e-12)
        assert not result.monotone_suspected

    def test_grid_flags_monotone(self):
        x = np.arange(8, dtype=float)[::-1]
        m = DesignMatrix.from_arrays(x, np.arange(1, 9), np.ones(8), start=np.zeros(8))
        result = grid_search_mle(m, resolution=1e-2)
        assert result.monotone_suspected and result.beta[0] == pytest.approx(5.0)

    def test_grid_two_columns(self):
        m = random_matrix(3, n=30)
        result = grid_search_mle(m, bounds=(-2, 2), resolution=0.01)
        assert result.beta == pytest.approx(fit_cox(m).coef, abs=0.01)

    def test_grid_limits(self):
        with pytest.raises(TooManyColumns):
            grid_search_mle(random_matrix(0, p=3))

    def test_enumeration_vectorized(self):
        m = random_matrix(4)
        betas = np.array([[0.0, 0.0], [0.5, -0.2]])
        vals = enumerate_log_likelihood(m, betas)
        assert vals[1] == pytest.approx(enumerate_log_likelihood(m, betas[1])[0])

    def test_finite_diff(self):
        result = finite_diff_check(random_matrix(6), [0.0, 0.0])
        assert result.gradient_error < 1e-6 and result.hessian_error < 1e-4
        with pytest.raises(ValidationError):
            finite_diff_check(random_matrix(6), [0.0, 0.0], step=0)
