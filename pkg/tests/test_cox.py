import math

import numpy as np
import pytest
from conftest import random_matrix, tied_instance, time_varying_matrix

from sponsorsurv.cox import (
    CoxModel,
    breslow_increments,
    clustered_covariance,
    fit_cox,
    partial_log_likelihood,
    score_residuals,
)
from sponsorsurv.exceptions import (
    DimensionMismatch,
    MonotoneLikelihood,
    NoEvents,
    NonIdentifiable,
    NotConverged,
    ValidationError,
)
from sponsorsurv.panel import DesignMatrix
from sponsorsurv.synth import enumerate_log_likelihood, finite_diff_check


def breslow_closed_form(b):
    return 2 * b - 2 * math.log(2 * math.exp(b) + 2) - 2 * math.log(math.exp(b) + 1)


def efron_closed_form(b):
    s = math.exp(b) + 1
    return 2 * b - math.log(2 * s) - math.log(1.5 * s) - math.log(s) - math.log(s / 2)


class TestPartialLikelihood:
    def test_single_risk_set(self):
        m = DesignMatrix.from_arrays([[1.0], [0.0]], [1, 1], [1, 0])
        value, grad, hess = partial_log_likelihood(m, [0.0])
        assert value == pytest.approx(math.log(0.5), abs=1e-15)
        assert grad == pytest.approx([0.5])
        assert hess[0, 0] == pytest.approx(-0.25)

    @pytest.mark.parametrize("b", [-2.0, -0.3, 0.0, 0.7, 3.1])
    def test_tied_instance_closed_forms(self, b):
        m = tied_instance()
        assert partial_log_likelihood(m, [b], "breslow")[0] == pytest.approx(breslow_closed_form(b), abs=1e-12)
        assert partial_log_likelihood(m, [b], "efron")[0] == pytest.approx(efron_closed_form(b), abs=1e-12)

    def test_tied_instance_spot_values(self):
        m = tied_instance()
        assert partial_log_likelihood(m, [0.0], "breslow")[0] == pytest.approx(-math.log(64), abs=1e-12)
        assert partial_log_likelihood(m, [0.0], "efron")[0] == pytest.approx(-math.log(24), abs=1e-12)
        assert partial_log_likelihood(m, [0.0], "breslow")[1] == pytest.approx([0.0], abs=1e-15)

    @pytest.mark.parametrize("ties", ["efron", "breslow"])
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_enumeration(self, ties, seed):
        m = time_varying_matrix(seed) if seed % 2 else random_matrix(seed)
        beta = np.random.default_rng(seed).normal(size=m.n_columns)
        value = partial_log_likelihood(m, beta, ties)[0]
        assert value == pytest.approx(enumerate_log_likelihood(m, beta, ties)[0], rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_breslow_equals_efron_without_ties(self, seed):
        m = random_matrix(seed, ties=False)
        beta = np.random.default_rng(seed).normal(size=2)
        vb, gb, hb = partial_log_likelihood(m, beta, "breslow")
        ve, ge, he = partial_log_likelihood(m, beta, "efron")
        assert abs(vb - ve) < 1e-12
        assert np.max(np.abs(gb - ge)) < 1e-12 and np.max(np.abs(hb - he)) < 1e-12

    @pytest.mark.parametrize("ties", ["efron", "breslow"])
    def test_derivatives(self, ties):
        for m in (random_matrix(1, ties=False), random_matrix(2, n=60, max_time=3), time_varying_matrix(3)):
            for beta in np.random.default_rng(0).normal(scale=0.8, size=(3, 2)):
                result = finite_diff_check(m, beta, ties=ties)
                assert result.gradient_error < 1e-6 and result.hessian_error < 1e-4

    def test_stable_for_large_linear_predictors(self):
        m = random_matrix(3)
        big = m.with_X(m.X * 100)
        value, grad, hess = partial_log_likelihood(big, [3.0, -2.0])
        assert np.isfinite(value) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))

    def test_rejects_bad_input(self):
        m = tied_instance()
        with pytest.raises(DimensionMismatch):
            partial_log_likelihood(m, [0.0, 1.0])
        with pytest.raises(ValidationError):
            partial_log_likelihood(m, [0.0], "exact")
        with pytest.raises(NoEvents):
            partial_log_likelihood(DesignMatrix.from_arrays([[1.0], [0.0]], [1, 2], [0, 0]), [0.0])


class TestFit:
    @pytest.mark.parametrize("ties", ["efron", "breslow"])
    def test_tied_instance(self, ties):
        model = fit_cox(tied_instance(), ties=ties)
        assert abs(model.coef[0]) < 1e-6
        assert model.converged

    def test_score_vanishes_at_estimate(self):
        m = time_varying_matrix(5)
        model = fit_cox(m)
        _, grad, _ = partial_log_likelihood(m, model.coef)
        assert np.max(np.abs(grad)) < 1e-6

    def test_far_start_converges(self):
        m = random_matrix(7, n=80)
        a = fit_cox(m)
        b = fit_cox(m, init=[4.0, -4.0])
        assert b.coef == pytest.approx(a.coef, abs=1e-6)
        assert b.log_likelihood == pytest.approx(a.log_likelihood, abs=1e-8)

    def test_step_halving_keeps_likelihood_from_falling(self):
        # A full Newton step from far out overshoots; fit_cox must still climb.
        m = random_matrix(11, n=30, p=1)
        start = [6.0]
        model = fit_cox(m, init=start)
        assert model.log_likelihood >= partial_log_likelihood(m, start)[0]

    def test_constant_column(self):
        m = DesignMatrix.from_arrays(np.c_[np.ones(4), [1.0, 0.0, 1.0, 0.0]], [1, 2, 1, 2], [1, 1, 1, 0])
        with pytest.raises(NonIdentifiable):
            fit_cox(m)

    def test_collinear_columns(self):
        x = np.random.default_rng(0).normal(size=30)
        m = random_matrix(0, n=30, p=1)
        m2 = DesignMatrix.from_arrays(np.c_[x, 2 * x], m.stop, m.event, start=m.start)
        with pytest.raises(NonIdentifiable):
            fit_cox(m2)

    def test_no_events(self):
        with pytest.raises(NoEvents):
            fit_cox(DesignMatrix.from_arrays([[1.0], [0.0]], [1, 2], [0, 0]))

    def test_monotone_likelihood(self):
        # Every exit has a larger x than everyone still at risk.
        x = np.arange(10, dtype=float)[::-1]
        m = DesignMatrix.from_arrays(x, np.arange(1, 11), np.ones(10), start=np.zeros(10))
        with pytest.raises(MonotoneLikelihood):
            fit_cox(m)

    def test_iteration_cap(self):
        with pytest.raises(NotConverged):
            fit_cox(random_matrix(2, n=60), max_iter=1, tol=1e-300, gtol=0)

    def test_no_covariates(self):
        m = DesignMatrix.from_arrays(np.zeros((4, 0)), [1, 2, 1, 2], [1, 1, 1, 0], start=[0, 0, 0, 0])
        model = fit_cox(m)
        assert model.n_params == 0
        assert model.log_likelihood == pytest.approx(-math.log(4) - math.log(3) - math.log(2))

    def test_persistence_round_trip(self, tmp_path):
        m = time_varying_matrix(4)
        model = fit_cox(m)
        back = CoxModel.from_json(model.to_json())
        assert back.coef.tolist() == model.coef.tolist()
        assert np.array_equal(back.covariance, model.covariance)
        assert back.columns == model.columns and back.ties == model.ties
        path = tmp_path / "m.json"
        path.write_text(model.to_json())
        assert CoxModel.load(path).log_likelihood == model.log_likelihood


class TestInvariance:
    def test_translation(self):
        m = time_varying_matrix(8, n_spells=60)
        a = fit_cox(m)
        b = fit_cox(m.with_X(m.X + np.array([5.0, -3.0])))
        assert abs(a.log_likelihood - b.log_likelihood) < 1e-8
        assert np.max(np.abs(a.coef - b.coef)) < 1e-8
        assert np.max(np.abs(a.standard_errors - b.standard_errors)) < 1e-8

    def test_scaling(self):
        m = time_varying_matrix(9, n_spells=60)
        scale = np.array([4.0, 0.25])
        a = fit_cox(m)
        b = fit_cox(m.with_X(m.X * scale))
        assert abs(a.log_likelihood - b.log_likelihood) < 1e-8
        assert np.max(np.abs(a.coef - b.coef * scale)) < 1e-8
        za, zb = a.coef / a.standard_errors, b.coef / b.standard_errors
        assert np.max(np.abs(za - zb)) < 1e-8

    def test_row_order(self):
        m = time_varying_matrix(10)
        perm = np.random.default_rng(1).permutation(m.n_rows)
        shuffled = DesignMatrix.from_arrays(
            m.X[perm], m.stop[perm], m.event[perm], start=m.start[perm], clusters=m.clusters[perm]
        )
        a, b = fit_cox(m), fit_cox(shuffled)
        assert np.max(np.abs(a.coef - b.coef)) < 1e-10
        assert np.max(np.abs(a.covariance - b.covariance)) < 1e-10


def residual_oracle(m: DesignMatrix, beta, ties):
    """Score residuals by explicit loops over event times and tie positions."""
    X, n = m.X, m.n_rows
    eta = X @ beta
    r = np.zeros_like(X)
    for t in sorted(set(m.stop[m.event].tolist())):
        R = [i for i in range(n) if m.start[i] < t <= m.stop[i]]
        D = [i for i in R if m.event[i] and m.stop[i] == t]
        d = len(D)
        for k in range(d):
            f = k / d if ties == "efron" else 0.0
            wts = {i: math.exp(eta[i]) * (1 - f if i in D else 1.0) for i in R}
            s0 = sum(wts.values())
            mean = sum(wts[i] * X[i] for i in R) / s0
            for i in D:
                r[i] += (X[i] - mean) / d
            for i in R:
                r[i] -= wts[i] / s0 * (X[i] - mean)
    return r


class TestCovariance:
    @pytest.mark.parametrize("ties", ["efron", "breslow"])
    def test_residuals_match_oracle(self, ties):
        m = random_matrix(12, n=25, max_time=4)
        beta = np.array([0.4, -0.7])
        got = score_residuals(m, beta, ties)
        assert np.max(np.abs(got - residual_oracle(m, beta, ties))) < 1e-12
        assert got.sum(axis=0) == pytest.approx(partial_log_likelihood(m, beta, ties)[1], abs=1e-12)

    def test_singleton_clusters_equal_plain_sandwich(self):
        m = random_matrix(13, n=50)
        model = fit_cox(m, clustered=False)
        r = score_residuals(m, model.coef)
        bread = model.covariance_model
        plain = bread @ (r.T @ r) @ bread
        assert np.max(np.abs(clustered_covariance(model, m) - plain)) < 1e-10

    def test_one_cluster_is_zero(self):
        m = random_matrix(14, n=40, p=1)
        model = fit_cox(m)
        v = clustered_covariance(model, m, clusters=["all"] * m.n_rows)
        assert abs(v[0, 0]) < 1e-10

    def test_six_rows_three_clusters(self):
        X = np.array([[0.5, 1.0], [-1.0, 0.0], [2.0, 1.0], [0.0, 0.0], [1.5, 1.0], [-0.5, 1.0]])
        m = DesignMatrix.from_arrays(
            X, [1, 2, 2, 3, 3, 1], [1, 1, 0, 1, 0, 0], start=np.zeros(6), clusters=["a", "a", "b", "b", "c", "c"]
        )
        beta = np.array([0.3, -0.2])
        model = CoxModel(
            columns=m.columns,
            blocks=m.blocks,
            coef=beta,
            covariance_model=np.eye(2),
            covariance_clustered=None,
            log_likelihood=0.0,
            ties="efron",
            iterations=0,
            converged=True,
            n_observations=6,
            n_events=3,
        )
        r = residual_oracle(m, beta, "efron")
        g = np.array([r[0] + r[1], r[2] + r[3], r[4] + r[5]])
        _, _, H = partial_log_likelihood(m, beta)
        A = np.linalg.inv(-H)
        expected = A @ (g.T @ g) @ A
        assert np.max(np.abs(clustered_covariance(model, m) - expected)) < 1e-10

    def test_default_fit_uses_clusters(self):
        m = time_varying_matrix(15)
        model = fit_cox(m)
        assert model.n_clusters == len(set(m.clusters.tolist()))
        assert np.array_equal(model.covariance, model.covariance_clustered)
        assert np.allclose(model.covariance, clustered_covariance(model, m), atol=1e-14)


class TestBaseline:
    def test_tied_instance_increments(self):
        m = tied_instance()
        base = breslow_increments(fit_cox(m, ties="breslow"), m)
        assert base.times == (1.0, 2.0)
        assert base.increments == pytest.approx((0.5, 1.0), abs=1e-6)
        assert base(0.5) == 0.0 and base(1) == pytest.approx(0.5, abs=1e-6) and base(7) == pytest.approx(1.5, abs=1e-6)

    def test_non_decreasing(self):
        m = time_varying_matrix(16)
        base = breslow_increments(fit_cox(m), m)
        assert np.all(np.diff(base.cumulative) >= 0)
