"""Scikit-learn style front end for the cheating-detection models."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import decision
from .analysis import analyze
from .model import ConfigurationError, DataError, DataSet, ModelSpec
from .sampler import SamplerConfig


def check_responses(X) -> np.ndarray:
    """Validate a 0/1 response matrix (persons in rows, items in columns)."""
    y = check_array(X, dtype=None, ensure_2d=True, ensure_min_samples=1)
    bad = ~np.isin(y, (0, 1))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DataError(f"non-binary response at row {i}, column {j}: {y[i, j]!r}")
    return y.astype(np.int8)


def check_times(times, shape) -> np.ndarray:
    """Validate response times in seconds; NaN marks a missing time."""
    t = check_array(times, dtype=float, ensure_all_finite="allow-nan")
    if t.shape != shape:
        raise DataError(f"times shape {t.shape} does not match responses {shape}")
    return t


class CheatingDetector(BaseEstimator):
    """Bayesian detection of cheaters and compromised items.

    ``fit`` takes the response matrix ``X`` and, for the joint models, a
    matching matrix of response times.  Predictions are transductive: they
    refer to the persons and items of the fitted data.

    Parameters
    ----------
    model : {"M1", "M1_null", "M2", "M2_null"}
    n_chains, n_iter, burn_in : sampler size; draws after ``burn_in`` are kept.
    fdr_level : local FDR bound used by :meth:`predict` for persons.
    fnr_level : local FNR bound used by :meth:`flag_items`.
    init : "data" (moment and spectral start) or "prior" (prior draw).
    rhat_threshold : chains above it are excluded from pooling.
    compare_null : also fit the null model and record both DICs.
    random_state : integer seed; chain ``k`` uses substream ``k``.
    """

    def __init__(self, model="M2", n_chains=1, n_iter=3000, burn_in=1000, fdr_level=0.05,
                 fnr_level=0.05, init="data", adapt=True, rhat_threshold=1.1,
                 compare_null=False, n_jobs=1, random_state=0):
        self.model = model
        self.n_chains = n_chains
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.fdr_level = fdr_level
        self.fnr_level = fnr_level
        self.init = init
        self.adapt = adapt
        self.rhat_threshold = rhat_threshold
        self.compare_null = compare_null
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _check_params(self):
        spec = ModelSpec.parse(self.model)
        for name in ("fdr_level", "fnr_level"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {v}")
        if self.init not in ("data", "prior"):
            raise ConfigurationError(f"init must be 'data' or 'prior', got {self.init!r}")
        seed = 0 if self.random_state is None else self.random_state
        if not isinstance(seed, (int, np.integer)):
            raise ConfigurationError("random_state must be an integer seed")
        return spec, int(seed)

    def fit(self, X, times=None):
        spec, seed = self._check_params()
        y = check_responses(X)
        if spec.uses_times:
            if times is None:
                raise DataError(f"model {spec.value} needs response times")
            data = DataSet.from_arrays(y, check_times(times, y.shape))
        else:
            data = DataSet(y)
        config = SamplerConfig(burn_in=self.burn_in, n_iter=self.n_iter, adapt=self.adapt)
        report, chains, null_chains = analyze(
            data, spec, config, n_chains=self.n_chains, seed=seed, init=self.init,
            levels=(self.fdr_level,), rhat_threshold=self.rhat_threshold,
            compare_null=self.compare_null, force=True, n_jobs=self.n_jobs)
        self.report_ = report
        self.chains_ = chains
        self.null_chains_ = null_chains
        self.person_proba_ = np.asarray(report["person_probs"])
        self.item_proba_ = np.asarray(report["item_probs"])
        self.globals_ = report["globals"]
        self.converged_ = report["converged"]
        self.dic_ = report.get("dic")
        self.n_persons_, self.n_items_ = y.shape
        return self

    def predict_proba(self, X=None) -> np.ndarray:
        """Columns ``[P(honest), P(cheater)]`` for each fitted person."""
        check_is_fitted(self, "person_proba_")
        self._check_same(X)
        p = self.person_proba_
        return np.column_stack([1.0 - p, p])

    def predict(self, X=None) -> np.ndarray:
        """Cheater flags under the local-FDR rule at ``fdr_level``."""
        check_is_fitted(self, "person_proba_")
        self._check_same(X)
        return decision.optimal_threshold_fdr(self.person_proba_, self.fdr_level).flags

    def fit_predict(self, X, times=None) -> np.ndarray:
        return self.fit(X, times).predict()

    def flag_items(self) -> np.ndarray:
        """Compromised-item flags under the local-FNR rule at ``fnr_level``."""
        check_is_fitted(self, "item_proba_")
        return decision.optimal_threshold_fnr(self.item_proba_, self.fnr_level).flags

    def _check_same(self, X):
        if X is not None and np.shape(X)[0] != self.n_persons_:
            raise DataError("predictions refer to the fitted persons; pass the same X or None")
