"""scikit-learn style front ends.

``LatticeRounder`` is a stateless-ish transformer that snaps points onto
``q + h Z^d``; ``RobustOffsetEstimator`` fits the measure estimates for a
map/domain pair and then classifies arbitrary offsets.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import classify_offsets
from .lattice import DomainSpec, GridContext, reduce_offset, round_indices
from .maps import MapSpec
from .measure import DEFAULT_SAMPLES, bounds_report


class LatticeRounder(TransformerMixin, BaseEstimator):
    """Round rows of ``X`` to the lattice ``offset + h Z^d``.

    Parameters
    ----------
    h : float
        Lattice spacing.
    offset : array-like of shape (n_features,), default=None
        Lattice offset; reduced into ``(-h/2, h/2]``.  Zero when omitted.
    """

    def __init__(self, h=1.0, offset=None):
        self.h = h
        self.offset = offset

    def fit(self, X, y=None):
        X = check_array(X, ensure_all_finite=True)
        d = X.shape[1]
        offset = np.zeros(d) if self.offset is None else np.atleast_1d(np.asarray(self.offset, dtype=float))
        if offset.shape != (d,):
            raise ValueError(f"offset has {offset.shape[0]} components, X has {d} features")
        self.context_ = GridContext.from_offset(self.h, offset)
        self.offset_ = self.context_.q_array
        self.n_features_in_ = d
        return self

    def _validated(self, X):
        check_is_fitted(self, "context_")
        X = check_array(X, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, rounder was fitted with {self.n_features_in_}")
        return X

    def lattice_index(self, X):
        """Integer lattice indices ``z`` of the rounded rows."""
        X = self._validated(X)
        return round_indices(X, self.offset_, self.context_.h)

    def transform(self, X):
        z = self.lattice_index(X)
        return self.offset_ + self.context_.h * z


class RobustOffsetEstimator(BaseEstimator):
    """Estimate the measure of robust offsets and classify offsets.

    ``fit`` ignores its data arguments: the map and domain define the
    problem.  After fitting, ``report_`` holds the full
    :class:`~latlab.measure.BoundReport`.

    Parameters
    ----------
    f : MapSpec
    domain : DomainSpec
    h : float
    n_samples : int
    seed : int
    n_jobs : int or None
        Worker threads; None defers to ``LATLAB_THREADS``.
    """

    def __init__(self, f: MapSpec = None, domain: DomainSpec = None, h=1.0, n_samples=DEFAULT_SAMPLES,
                 seed=0, n_jobs=None):
        self.f = f
        self.domain = domain
        self.h = h
        self.n_samples = n_samples
        self.seed = seed
        self.n_jobs = n_jobs

    def _check_problem(self):
        if not isinstance(self.f, MapSpec) or not isinstance(self.domain, DomainSpec):
            raise ValueError("f must be a MapSpec and domain a DomainSpec")
        if self.f.dimension != self.domain.d:
            raise ValueError(f"map dimension {self.f.dimension} != domain dimension {self.domain.d}")

    def fit(self, X=None, y=None):
        self._check_problem()
        report = bounds_report(self.f, self.domain, float(self.h), int(self.n_samples), int(self.seed),
                               self.n_jobs)
        self.report_ = report
        self.vs_ = report.vs_estimate.value
        self.vnear_ = report.vnear_estimate.value
        self.k_integral_ = report.k_integral_estimate.value
        self.lower_bound_ = report.lower_bound
        self.upper_bound_ = report.upper_bound
        self.L_ = report.L
        self.n_features_in_ = self.domain.d
        return self

    def _classify(self, Q):
        check_is_fitted(self, "report_")
        Q = check_array(Q, ensure_all_finite=True)
        if Q.shape[1] != self.n_features_in_:
            raise ValueError(f"offsets have {Q.shape[1]} components, expected {self.n_features_in_}")
        return classify_offsets(self.f, self.domain, float(self.h), reduce_offset(Q, float(self.h)))

    def predict(self, Q):
        """Robustness flag of each offset row of ``Q``."""
        return self._classify(Q).robust

    def count_equilibria(self, Q):
        """``k(h, q)`` for each offset row of ``Q``."""
        return self._classify(Q).k
