"""Estimator-style front doors over the functional API.

Both classes follow the fit/get_params convention: constructors only store
settings, ``fit`` takes a multi-environment dataset (a MultiEnvDataset or a
sequence of per-environment matrices) and exposes results as trailing-
underscore attributes.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import as_dataset
from .exceptions import ConfigError
from .graph import Dag
from .invariance import KernelConfig, make_invariance_test
from .mec import enumerate_mec
from .mss import empirical_mss
from .pc import pooled_pc


class MechanismShiftScorer(BaseEstimator):
    """Score candidate DAGs by cross-environment mechanism instability.

    Candidates come either from ``candidates`` (an explicit DAG list) or, when
    ``search_class`` is a DAG, from its Markov equivalence class. After
    ``fit``: ``report_`` holds the full score report, ``dags_`` the candidate
    list, ``argmin_`` the minimizing indices, and ``cpdag_`` the summary
    pattern over the minimizers.

    Parameters mirror empirical_mss; ``test_params`` is passed through to
    make_invariance_test.
    """

    def __init__(
        self,
        candidates=None,
        search_class=None,
        test="fisher_z",
        alpha=None,
        mode="hard",
        mec_limit=None,
        use_cache=True,
        best_effort=False,
        test_params=None,
    ):
        self.candidates = candidates
        self.search_class = search_class
        self.test = test
        self.alpha = alpha
        self.mode = mode
        self.mec_limit = mec_limit
        self.use_cache = use_cache
        self.best_effort = best_effort
        self.test_params = test_params

    def _candidate_dags(self) -> tuple[Dag, ...]:
        if (self.candidates is None) == (self.search_class is None):
            raise ConfigError(
                "exactly one of candidates/search_class must be given"
            )
        if self.candidates is not None:
            dags = tuple(self.candidates)
            if not dags or not all(isinstance(g, Dag) for g in dags):
                raise ConfigError("candidates must be a non-empty sequence of DAGs")
            return dags
        if not isinstance(self.search_class, Dag):
            raise ConfigError("search_class must be a DAG")
        kwargs = {} if self.mec_limit is None else {"limit": self.mec_limit}
        return enumerate_mec(self.search_class, **kwargs).members

    def fit(self, X, y=None):
        dataset = as_dataset(X)
        dags = self._candidate_dags()
        test_fn = (
            self.test
            if callable(self.test)
            else make_invariance_test(self.test, **(self.test_params or {}))
        )
        self.report_ = empirical_mss(
            dags,
            dataset,
            test_fn,
            alpha=self.alpha,
            mode=self.mode,
            use_cache=self.use_cache,
            best_effort=self.best_effort,
        )
        self.dags_ = self.report_.dags
        self.argmin_ = self.report_.argmin
        self.cpdag_ = self.report_.summary
        return self

    def score(self, X=None, y=None):
        """Negated best score, so larger is better."""
        check_is_fitted(self, "report_")
        scores = (
            self.report_.soft_scores
            if self.mode == "soft"
            else self.report_.hard_scores
        )
        best = min(s for s in scores if s is not None)
        return -float(best)


class PooledPC(BaseEstimator):
    """Constraint-based pattern search on pooled multi-environment data.

    Stacks all environments with the environment index as an extra variable,
    runs the stable skeleton/orientation phases, and keeps the pattern over
    the data variables. After ``fit``: ``cpdag_`` is the estimated pattern.
    """

    def __init__(
        self,
        test_family="fisher_z",
        level=0.05,
        max_cond_size=None,
        kernel=None,
    ):
        self.test_family = test_family
        self.level = level
        self.max_cond_size = max_cond_size
        self.kernel = kernel

    def fit(self, X, y=None):
        dataset = as_dataset(X)
        kernel = self.kernel
        if kernel is not None and not isinstance(kernel, KernelConfig):
            raise ConfigError("kernel must be a KernelConfig or None")
        self.cpdag_ = pooled_pc(
            dataset,
            test_family=self.test_family,
            level=self.level,
            max_cond_size=self.max_cond_size,
            kernel=kernel,
        )
        return self
