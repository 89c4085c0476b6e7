"""scikit-learn style estimator wrappers around the solvers.

Each estimator follows the fit/transform protocol with ``get_params`` /
``set_params`` from :class:`sklearn.base.BaseEstimator`, validates its input
through scikit-learn's helpers, and exposes the learned component as
``component_`` (and, for the deflation estimator, ``components_``).  The
functional API in :mod:`spcalab.solvers` stays the primary surface; these
wrappers exist so the solvers compose with pipelines and model selection.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .models import Dataset, sample_covariance
from .solvers import (
    RtpmConfig,
    cov_thresh,
    diag_thresh,
    greedy_corr,
    kspca_deflate,
    rtpm_with_report,
    top_s_project,
)


class _OneComponentMixin(TransformerMixin):
    """Shared scoring/transform surface for single-component estimators."""

    def transform(self, X):
        check_is_fitted(self, "component_")
        X = check_array(X, dtype=np.float64)
        return X @ self.component_.reshape(-1, 1)

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def explained_variance(self, X):
        """Rayleigh quotient of the fitted component on the sample covariance."""
        check_is_fitted(self, "component_")
        X = check_array(X, dtype=np.float64)
        cov = sample_covariance(X)
        return float(self.component_ @ (cov @ self.component_))


class RTPM(BaseEstimator, _OneComponentMixin):
    """Restarted truncated power method estimator.

    Parameters mirror :class:`spcalab.solvers.RtpmConfig`; ``project_s``
    optionally truncates the fitted component to exactly ``project_s``
    nonzeros (the proper-hypothesis step).
    """

    def __init__(self, r=10, T=50, mode="full", restarts="all", tol=0.0,
                 matvec="auto", project_s=None):
        self.r = r
        self.T = T
        self.mode = mode
        self.restarts = restarts
        self.tol = tol
        self.matvec = matvec
        self.project_s = project_s

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        cfg = RtpmConfig(r=self.r, T=self.T, mode=self.mode, restarts=self.restarts,
                         tol=self.tol, matvec=self.matvec)
        report = rtpm_with_report(Dataset(rows=X), cfg)
        cand = report.candidate
        if self.project_s is not None:
            cand = top_s_project(cand, self.project_s)
        self.component_ = cand.values
        self.support_ = cand.support
        self.rayleigh_ = report.rayleigh
        self.n_iter_ = report.iterations_used
        self.restart_index_ = report.restart_index
        return self


class _CovarianceBacked(BaseEstimator, _OneComponentMixin):
    """Base for the one-shot baselines: fit from data or a covariance."""

    def _solve(self, cov):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        return self.fit_covariance(sample_covariance(X))

    def fit_covariance(self, cov):
        cand = self._solve(np.asarray(cov, dtype=np.float64))
        self.component_ = cand.values
        self.support_ = cand.support
        return self


class DiagonalThresholding(_CovarianceBacked):
    """Support from the s largest sample variances, then a local eigenvector."""

    def __init__(self, s=10):
        self.s = s

    def _solve(self, cov):
        return diag_thresh(cov, self.s)


class CovarianceThresholding(_CovarianceBacked):
    """Top eigenvector of the entrywise-thresholded sample covariance."""

    def __init__(self, tau=0.1, s=None):
        self.tau = tau
        self.s = s  # unused by the algorithm; kept for harness uniformity

    def _solve(self, cov):
        return cov_thresh(cov, self.tau, self.s)


class GreedyCorrelation(_CovarianceBacked):
    """Support from squared-covariance row correlations with a seed row."""

    def __init__(self, s=10, seed_index=0):
        self.s = s
        self.seed_index = seed_index

    def _solve(self, cov):
        return greedy_corr(cov, self.s, self.seed_index)


class DeflatedSparsePCA(BaseEstimator, TransformerMixin):
    """k sparse components via deflation around an RTPM oracle."""

    def __init__(self, k=2, r=10, T=50, mode="full", restarts="all",
                 project_s=None, matvec="auto"):
        self.k = k
        self.r = r
        self.T = T
        self.mode = mode
        self.restarts = restarts
        self.project_s = project_s
        self.matvec = matvec

    def _oracle(self, source):
        cfg = RtpmConfig(r=self.r, T=self.T, mode=self.mode, restarts=self.restarts,
                         matvec=self.matvec)
        cand = rtpm_with_report(source, cfg).candidate
        if self.project_s is not None:
            cand = top_s_project(cand, self.project_s)
        return cand

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.components_ = kspca_deflate(Dataset(rows=X), self.k, self._oracle)
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return X @ self.components_
