"""scikit-learn style wrappers around the functional core."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_form, check_positive_int, check_survival_target, check_ties
from .cox import fit_cox, partial_log_likelihood
from .exceptions import DimensionMismatch, HorizonTooShort, ValidationError
from .forecast import CovariateProfile, expected_duration, survival_profile, with_baseline
from .nonparametric import SurvivorCurve, life_table, median_lifetime, smoothed_hazard
from .panel import BlockSpec, Dataset, DesignMatrix, SponsorshipSpell, design_matrix


class PanelEncoder(TransformerMixin, BaseEstimator):
    """Dummy-code a :class:`Dataset` into a design matrix array.

    Parameters
    ----------
    blocks : str, list or dict, default="default"
        Block specification accepted by :meth:`BlockSpec.from_obj`.
    """

    def __init__(self, blocks="default"):
        self.blocks = blocks

    def fit(self, X: Dataset, y=None):
        spec = BlockSpec.from_obj(self.blocks)
        self.spec_ = spec
        self.feature_names_out_ = np.asarray(spec.columns, dtype=object)
        self.n_features_in_ = len(spec.columns)
        return self

    def transform(self, X: Dataset) -> np.ndarray:
        check_is_fitted(self, "spec_")
        if not isinstance(X, Dataset):
            raise ValidationError("PanelEncoder expects a Dataset")
        return np.array(design_matrix(X, self.spec_).X)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "spec_")
        return self.feature_names_out_.copy()

    def target(self, X: Dataset) -> np.ndarray:
        """Survival target ``(start, stop, event)`` matching :meth:`transform` rows."""
        a = X.arrays
        period = a["period"].astype(float)
        return np.column_stack([period - 1.0, period, a["event"].astype(float)])


class CoxPHSurvival(BaseEstimator):
    """Cox proportional hazards model on counting-process rows.

    Parameters
    ----------
    ties : {"efron", "breslow"}, default="efron"
    tol : float, default=1e-8
        Relative log-likelihood tolerance for Newton-Raphson.
    max_iter : int, default=100
    horizon : int, default=50
        Number of periods for survival predictions.
    form : {"exponential", "product"}, default="exponential"
        How the baseline hazard is turned into a covariate-specific curve.

    Attributes
    ----------
    model_ : CoxModel
    coef_ : ndarray of shape (n_features,)
    """

    def __init__(self, ties="efron", tol=1e-8, max_iter=100, horizon=50, form="exponential"):
        self.ties = ties
        self.tol = tol
        self.max_iter = max_iter
        self.horizon = horizon
        self.form = form

    def fit(self, X, y, groups=None):
        """Fit on rows ``X`` with target ``y`` (see :func:`check_survival_target`).

        ``groups`` holds the cluster label of each row; by default every row
        is its own cluster.
        """
        X = check_array(X, dtype=float, ensure_min_features=0)
        start, stop, event = check_survival_target(y)
        if len(stop) != X.shape[0]:
            raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {len(stop)}")
        if groups is not None and len(groups) != X.shape[0]:
            raise DimensionMismatch("groups must have one label per row")
        names = getattr(self, "feature_names_in_", None)
        columns = [f"x{j}" for j in range(X.shape[1])] if names is None else list(names)
        matrix = DesignMatrix.from_arrays(
            X,
            stop,
            event,
            start=start,
            columns=columns,
            clusters=None if groups is None else np.asarray(groups).astype(str),
        )
        model = fit_cox(matrix, ties=check_ties(self.ties), tol=self.tol, max_iter=self.max_iter)
        self.model_ = with_baseline(model, matrix)
        self.coef_ = np.array(model.coef)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        """Linear predictor ``X @ coef_`` (log relative hazard)."""
        return self._check_X(X) @ self.coef_

    def predict_survival_function(self, X) -> np.ndarray:
        """Survivor values on periods ``0..horizon``, one row per sample."""
        X = self._check_X(X)
        horizon = check_positive_int(self.horizon, "horizon")
        form = check_form(self.form)
        return np.vstack(
            [survival_profile(self.model_, CovariateProfile("row", x), horizon, form).values for x in X]
        )

    def predict_expected_duration(self, X) -> np.ndarray:
        """Restricted mean duration over ``horizon`` periods for each sample."""
        S = self.predict_survival_function(X)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonTooShort)
            return np.array([expected_duration(SurvivorCurve.from_values(s)) for s in S])

    def score(self, X, y, groups=None) -> float:
        """Mean partial log-likelihood per event at the fitted coefficients."""
        X = self._check_X(X)
        start, stop, event = check_survival_target(y)
        matrix = DesignMatrix.from_arrays(X, stop, event, start=start, columns=self.model_.columns)
        if matrix.n_events == 0:
            raise ValidationError("score needs at least one event")
        ll, _, _ = partial_log_likelihood(matrix, self.coef_, ties=self.model_.ties)
        return ll / matrix.n_events


class LifeTableEstimator(BaseEstimator):
    """Discrete life table from spells.

    ``fit`` accepts a :class:`Dataset`, an iterable of spells, or an array of
    ``(duration, ended)`` pairs.

    Parameters
    ----------
    bandwidth : float, default=3
        Epanechnikov bandwidth for :meth:`smoothed_hazard`.
    """

    def __init__(self, bandwidth=3):
        self.bandwidth = bandwidth

    def fit(self, X, y=None):
        if isinstance(X, Dataset):
            spells = X
        elif isinstance(X, np.ndarray) or (isinstance(X, (list, tuple)) and X and not isinstance(X[0], SponsorshipSpell)):
            arr = check_array(X, dtype=float)
            if arr.shape[1] != 2:
                raise ValidationError("expected (duration, ended) pairs")
            spells = [SponsorshipSpell(f"s{i}", int(d), bool(e)) for i, (d, e) in enumerate(arr)]
        else:
            spells = list(X)
        self.table_ = life_table(spells)
        self.survivor_ = self.table_.curve
        return self

    def predict(self, periods) -> np.ndarray:
        """Survivor values at the given periods."""
        check_is_fitted(self, "table_")
        return np.array([self.survivor_(int(t)) for t in np.atleast_1d(periods)])

    @property
    def median_(self) -> float:
        check_is_fitted(self, "table_")
        return median_lifetime(self.survivor_)

    def smoothed_hazard(self):
        check_is_fitted(self, "table_")
        return smoothed_hazard(self.table_, self.bandwidth)
