"""scikit-learn compatible wrappers around the selection and regression steps."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .lagfamily import CROSS, SELF, CandidateFamily, StopRule, greedy_select
from .regression import INTERCEPT, LagDesign, ols_fit, stepwise_aic
from .spectral import FrequencyGrid, LagWindow
from .timeseries import Series


def _feature_names(X, n):
    cols = getattr(X, "columns", None)
    if cols is not None:
        return np.asarray([str(c) for c in cols], dtype=object)
    return np.asarray([f"x{i + 1}" for i in range(n)], dtype=object)


class InteractionSelector(TransformerMixin, BaseEstimator):
    """Select lag-product inputs by residual coherence / integrated spectrum.

    ``X`` holds the known inputs as columns; the candidate family is built
    from the first two columns (``X1(t+h) X2(t)``), or from the first column
    alone when ``kind="self"``.  Fitting runs the greedy stage-wise scan and
    ``transform`` appends the selected product series.

    Parameters
    ----------
    window : int, default=10
        Truncation point of the Tukey-Hamming lag window.
    grid_half_count : int, default=1000
        Frequency grid ``-pi + k pi / grid_half_count``.
    lags : tuple of int, default=(-9, 9)
        Inclusive range of candidate lags.
    kind : {"cross", "self"}, default="cross"
    criterion : {"both", "RC", "IS"}, default="both"
    stop_ratio : float or None, default=3.5
        Minimum max/median bar ratio to accept a stage's argmax.
    max_stages : int, default=4
    n_jobs : int, optional
        Threads used to evaluate candidates within a scan.

    Attributes
    ----------
    selected_lags_ : list of int
    stages_ : list of dict
        Per stage, the :class:`~rescoh.lagfamily.ScanResult` of each criterion.
    stop_reason_ : str
    """

    def __init__(self, window=10, grid_half_count=1000, lags=(-9, 9), kind=CROSS, criterion="both", stop_ratio=3.5, max_stages=4, n_jobs=None):
        self.window = window
        self.grid_half_count = grid_half_count
        self.lags = lags
        self.kind = kind
        self.criterion = criterion
        self.stop_ratio = stop_ratio
        self.max_stages = max_stages
        self.n_jobs = n_jobs

    def _family(self, X):
        a = Series(X[:, 0], name=str(self.feature_names_in_[0]))
        if self.kind == SELF:
            return CandidateFamily(a, None, self.lags[0], self.lags[1], SELF)
        if X.shape[1] < 2:
            raise ValueError("a cross-product family needs at least two input columns")
        b = Series(X[:, 1], name=str(self.feature_names_in_[1]))
        return CandidateFamily(a, b, self.lags[0], self.lags[1], CROSS)

    def fit(self, X, y):
        names = _feature_names(X, np.shape(X)[1] if np.ndim(X) == 2 else 1)
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self.feature_names_in_ = names
        fam = self._family(X)
        inputs = [Series(X[:, j]) for j in range(X.shape[1])]
        result = greedy_select(
            Series(y),
            inputs,
            fam,
            self.criterion,
            StopRule(self.stop_ratio, self.max_stages),
            LagWindow(self.window),
            FrequencyGrid(self.grid_half_count),
            self.n_jobs,
        )
        self.family_ = fam
        self.selected_lags_ = list(result.selected)
        self.stages_ = result.stages
        self.stop_reason_ = result.stop_reason
        self.selection_ = result
        return self

    def transform(self, X):
        """Append one column per selected lag; rows lacking a factor get NaN."""
        check_is_fitted(self, "selected_lags_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        n = X.shape[0]
        a = X[:, 0]
        b = X[:, 0] if self.kind == SELF else X[:, 1]
        out = [X]
        for h in self.selected_lags_:
            oa, ob = self.family_.offsets(h)
            col = np.full(n, np.nan)
            t = np.arange(n)
            ok = (t + oa >= 0) & (t + oa < n) & (t + ob >= 0) & (t + ob < n)
            col[ok] = a[t[ok] + oa] * b[t[ok] + ob]
            out.append(col[:, None])
        return np.hstack(out)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "selected_lags_")
        base = list(self.feature_names_in_ if input_features is None else input_features)
        return np.asarray(base + [self.family_.label(h) for h in self.selected_lags_], dtype=object)


class StepwiseOLS(RegressorMixin, BaseEstimator):
    """Ordinary least squares with stepwise AIC column selection.

    Parameters
    ----------
    fit_intercept : bool, default=True
        The intercept, when fitted, is kept through the search.
    direction : {"both", "backward", "forward"}, default="both"
    stepwise : bool, default=True
        ``False`` fits all columns.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Zero for columns dropped by the search.
    intercept_ : float
    selected_features_ : ndarray of str
    fit_result_ : rescoh.regression.FitResult
    """

    def __init__(self, fit_intercept=True, direction="both", stepwise=True):
        self.fit_intercept = fit_intercept
        self.direction = direction
        self.stepwise = stepwise

    def fit(self, X, y):
        names = _feature_names(X, np.shape(X)[1])
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self.feature_names_in_ = names
        design = LagDesign(y, {str(c): X[:, j] for j, c in enumerate(names)}, self.fit_intercept)
        fit = stepwise_aic(design, self.direction) if self.stepwise else ols_fit(design)
        self.fit_result_ = fit
        coef = np.zeros(X.shape[1])
        lookup = {str(c): j for j, c in enumerate(names)}
        for c, e in zip(fit.names, fit.estimates):
            if c != INTERCEPT:
                coef[lookup[c]] = e
        self.coef_ = coef
        self.intercept_ = fit.coef(INTERCEPT) if INTERCEPT in fit.names else 0.0
        self.selected_features_ = np.asarray([c for c in fit.names if c != INTERCEPT], dtype=object)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_
