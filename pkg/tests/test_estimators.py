import numpy as np
import pytest
from conftest import random_panel
from sklearn.base import clone

from sponsorsurv.cox import fit_cox
from sponsorsurv.estimators import CoxPHSurvival, LifeTableEstimator, PanelEncoder
from sponsorsurv.exceptions import DimensionMismatch, ValidationError
from sponsorsurv.nonparametric import life_table, median_lifetime
from sponsorsurv.panel import BlockSpec, design_matrix
from sponsorsurv.reference import reference_spells


@pytest.fixture(scope="module")
def panel():
    return random_panel(2, n_spells=600)


def test_params_and_clone():
    est = CoxPHSurvival(ties="breslow", horizon=20)
    assert est.get_params()["ties"] == "breslow"
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    est.set_params(form="product")
    assert est.form == "product"


def test_encoder_matches_design(panel):
    enc = PanelEncoder(blocks=["characteristics"]).fit(panel)
    X = enc.transform(panel)
    spec = BlockSpec.from_obj(["characteristics"])
    assert np.array_equal(X, design_matrix(panel, spec).X)
    assert list(enc.get_feature_names_out()) == list(spec.columns)
    y = enc.target(panel)
    assert y.shape == (panel.n_observations, 3)


def test_cox_estimator_matches_functional_core(panel):
    enc = PanelEncoder(blocks=["economics", "characteristics"]).fit(panel)
    X, y = enc.transform(panel), enc.target(panel)
    groups = panel.arrays["sponsorship_id"]
    est = CoxPHSurvival().fit(X, y, groups=groups)
    direct = fit_cox(design_matrix(panel, enc.spec_))
    assert est.coef_ == pytest.approx(direct.coef, abs=1e-10)
    assert est.model_.standard_errors == pytest.approx(direct.standard_errors, abs=1e-10)
    assert est.predict(X[:3]) == pytest.approx(X[:3] @ direct.coef)
    S = est.predict_survival_function(X[:2])
    assert S.shape == (2, 51) and np.all(S[:, 0] == 1.0)
    assert est.predict_expected_duration(X[:2]).shape == (2,)
    assert est.score(X, y) == pytest.approx(direct.log_likelihood / direct.n_events)


def test_cox_two_column_target():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 1))
    y = np.c_[rng.integers(1, 6, 80), rng.random(80) < 0.7]
    est = CoxPHSurvival().fit(X, y)
    with pytest.raises(DimensionMismatch):
        est.predict(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        CoxPHSurvival().fit(X, np.c_[y, y])
    with pytest.raises(DimensionMismatch):
        CoxPHSurvival().fit(X[:10], y)


def test_life_table_estimator():
    est = LifeTableEstimator().fit(reference_spells())
    table = life_table(reference_spells())
    assert est.predict([0, 1, 2]) == pytest.approx([1.0, *table.survivor[:2]])
    assert est.median_ == pytest.approx(median_lifetime(table))
    pairs = np.array([[1, 1], [1, 0], [2, 1], [2, 0]])
    assert LifeTableEstimator().fit(pairs).predict([1, 2]) == pytest.approx([0.75, 0.375])
    periods, values = LifeTableEstimator(bandwidth=2).fit(pairs).smoothed_hazard()
    assert len(periods) == len(values) == 2
