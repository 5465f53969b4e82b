"""Tests for equality of a conditional distribution across two environments.

Every test answers the same question: does P(X_j | Z) differ between the two
samples? All of them are framed as a conditional-independence test between
X_j and a binary environment indicator given Z on the stacked data, and all
return a :class:`TestResult` with a p-value. Numerical degeneracy (constant
columns, singular covariances, rank-deficient designs) raises
:class:`DegenerateDataError`; it is never reported as "invariant".

Families
--------
fisher_z
    Partial correlation of (X_j, indicator) given Z, Fisher z-transformed.
linear_param
    Per-environment least squares; a Chow-style F-test for equal
    coefficients combined with an F-test for equal residual variances.
kci
    Kernel conditional independence: Gaussian kernels on X_j and Z with
    median-heuristic bandwidths, a delta kernel on the indicator,
    kernel-ridge residualization on Z, and a moment-matched gamma null
    (or a permutation null).
regression_residual
    Pooled flexible regression of X_j on Z; residuals compared across
    environments by location and scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import stats

from .data import EnvSample
from .exceptions import DegenerateDataError
from .graph import AugmentedDag, d_separated

_P_FLOOR = 1e-300  # keeps log(p) finite when combining p-values


@dataclass(frozen=True)
class InvarianceQuery:
    """Which conditional to compare: variable ``target`` given ``given``,
    between environments ``env_pair[0] < env_pair[1]``."""

    target: int
    given: tuple[int, ...]
    env_pair: tuple[int, int]

    def __post_init__(self):
        given = tuple(sorted(int(v) for v in self.given))
        if len(set(given)) != len(given):
            raise ValueError("conditioning set contains duplicates")
        if self.target in given:
            raise ValueError("target cannot appear in its conditioning set")
        e, f = self.env_pair
        if not e < f:
            raise ValueError(f"env_pair must be ordered, got ({e}, {f})")
        object.__setattr__(self, "given", given)
        object.__setattr__(self, "env_pair", (int(e), int(f)))


@dataclass(frozen=True)
class TestResult:
    p_value: float
    statistic: float
    test: str

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value outside [0, 1]: {self.p_value}")


InvarianceTest = Callable[[EnvSample, EnvSample, InvarianceQuery], TestResult]


def _stack(a: EnvSample, b: EnvSample, query: InvarianceQuery):
    if a.n_vars != b.n_vars:
        raise ValueError("environments have different variable counts")
    d = a.n_vars
    for v in (query.target, *query.given):
        if not 0 <= v < d:
            raise ValueError(f"variable {v} out of range for {d} columns")
    x = np.concatenate([a.values[:, query.target], b.values[:, query.target]])
    e = np.concatenate([np.zeros(a.n_samples), np.ones(b.n_samples)])
    z = np.vstack([a.values[:, query.given], b.values[:, query.given]])
    return x, e, z


# ---------------------------------------------------------------------------
# Fisher z


def _partial_correlation(columns: np.ndarray) -> float:
    """Partial correlation of the first two columns given the rest."""
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(columns, rowvar=False)
    if not np.isfinite(corr).all():
        raise DegenerateDataError("constant column in correlation matrix")
    try:
        precision = np.linalg.inv(corr)
    except np.linalg.LinAlgError as err:
        raise DegenerateDataError(f"singular correlation matrix: {err}") from err
    if not np.isfinite(precision).all():
        raise DegenerateDataError("correlation matrix is numerically singular")
    denom = precision[0, 0] * precision[1, 1]
    if denom <= 0:
        raise DegenerateDataError("ill-conditioned correlation matrix")
    return float(-precision[0, 1] / np.sqrt(denom))


def _fisher_z_p_value(columns: np.ndarray, n_cond: int) -> tuple[float, float]:
    n = columns.shape[0]
    dof = n - n_cond - 3
    if dof <= 0:
        raise ValueError(f"sample size {n} too small for {n_cond} conditioners")
    r = _partial_correlation(columns)
    r = min(max(r, -1.0 + 1e-15), 1.0 - 1e-15)
    z = np.sqrt(dof) * np.arctanh(r)
    p = 2.0 * stats.norm.sf(abs(z))
    return float(p), float(z)


def fisher_z_invariance(
    a: EnvSample, b: EnvSample, query: InvarianceQuery
) -> TestResult:
    """Partial correlation between X_j and the environment indicator given Z.

    The statistic is sqrt(n - |Z| - 3) * atanh(r) against a standard normal,
    two sided. Exact under joint Gaussianity and linear mechanisms; used as a
    fast approximate test otherwise.
    """
    x, e, z = _stack(a, b, query)
    columns = np.column_stack([x, e, z])
    p, stat = _fisher_z_p_value(columns, z.shape[1])
    return TestResult(p, stat, "fisher_z")


def fisher_z_ci(data: np.ndarray, x: int, y: int, z: Iterable[int]) -> float:
    """p-value of X_x independent of X_y given columns ``z`` in one matrix."""
    z = tuple(z)
    columns = np.column_stack([data[:, x], data[:, y], data[:, list(z)]])
    p, _ = _fisher_z_p_value(columns, len(z))
    return p


# ---------------------------------------------------------------------------
# Per-environment linear parameters


def _ols_ssr(X: np.ndarray, y: np.ndarray) -> float:
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateDataError("rank-deficient regression design")
    resid = y - X @ coef
    return float(resid @ resid)


def linear_param_invariance(
    a: EnvSample, b: EnvSample, query: InvarianceQuery
) -> TestResult:
    """Equality of linear-regression parameters and noise level across envs.

    Combines a Chow-style F-test (all coefficients and the intercept equal)
    with a two-sided F-test for equal residual variances via Fisher's method.
    With an empty conditioning set this degenerates to mean and variance
    equality tests.
    """
    x, e, z = _stack(a, b, query)
    n1, n2 = a.n_samples, b.n_samples
    k = z.shape[1] + 1  # coefficients plus intercept
    if min(n1, n2) < k + 2:
        raise ValueError(
            f"need more than {k + 1} samples per environment, got {min(n1, n2)}"
        )
    ones = np.ones_like(x)[:, None]
    design = np.hstack([ones, z])
    ssr_pooled = _ols_ssr(design, x)
    ssr_1 = _ols_ssr(design[e == 0], x[e == 0])
    ssr_2 = _ols_ssr(design[e == 1], x[e == 1])

    dof = n1 + n2 - 2 * k
    num = max(ssr_pooled - ssr_1 - ssr_2, 0.0) / k
    den = (ssr_1 + ssr_2) / dof
    if den <= 0:
        raise DegenerateDataError("zero residual variance in both environments")
    f_coef = num / den
    p_coef = float(stats.f.sf(f_coef, k, dof))

    s1, s2 = ssr_1 / (n1 - k), ssr_2 / (n2 - k)
    if s1 <= 0 or s2 <= 0:
        raise DegenerateDataError("zero residual variance in one environment")
    f_var = s1 / s2
    p_var = 2.0 * min(
        stats.f.cdf(f_var, n1 - k, n2 - k), stats.f.sf(f_var, n1 - k, n2 - k)
    )
    p_var = min(float(p_var), 1.0)

    combined = -2.0 * (np.log(max(p_coef, _P_FLOOR)) + np.log(max(p_var, _P_FLOOR)))
    p = float(stats.chi2.sf(combined, 4))
    return TestResult(p, float(combined), "linear_param")


# ---------------------------------------------------------------------------
# Kernel conditional independence


@dataclass(frozen=True)
class KernelConfig:
    """Settings for the kernel test.

    ``ridge`` is the regularization of the kernel-ridge residualization,
    ``null_method`` selects the gamma approximation or a permutation null with
    ``n_permutations`` shuffles, ``max_pooled`` bounds the stacked sample
    size (kernel matrices are dense), and ``seed`` drives the permutations.
    """

    ridge: float = 1e-3
    null_method: str = "gamma"
    n_permutations: int = 1000
    max_pooled: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.null_method not in ("gamma", "permutation"):
            raise ValueError(f"unknown null {self.null_method!r}")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be positive")
        if self.max_pooled < 4:
            raise ValueError("max_pooled too small")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            # None would reseed the permutation null from OS entropy.
            raise ValueError("seed must be an integer")


def _median_bandwidth(block: np.ndarray) -> float:
    """Median pairwise distance; degenerate when every point coincides."""
    sq = _sq_dists(block)
    upper = sq[np.triu_indices_from(sq, k=1)]
    med = float(np.sqrt(np.median(upper)))
    if not np.isfinite(med) or med <= 0:
        raise DegenerateDataError("median-heuristic bandwidth is zero (constant block)")
    return med


def _sq_dists(block: np.ndarray) -> np.ndarray:
    norms = (block * block).sum(axis=1)
    sq = norms[:, None] + norms[None, :] - 2.0 * block @ block.T
    np.maximum(sq, 0.0, out=sq)
    return sq


def _gaussian_kernel(block: np.ndarray) -> np.ndarray:
    bw = _median_bandwidth(block)
    return np.exp(_sq_dists(block) / (-2.0 * bw * bw))


def _delta_kernel(labels: np.ndarray) -> np.ndarray:
    return (labels[:, None] == labels[None, :]).astype(np.float64)


def _center(k: np.ndarray) -> np.ndarray:
    row = k.mean(axis=0, keepdims=True)
    col = k.mean(axis=1, keepdims=True)
    return k - row - col + k.mean()


def _residualizer(kz_centered: np.ndarray, ridge: float) -> np.ndarray:
    """lambda (K + lambda I)^{-1}: the residual maker of kernel ridge on Z."""
    n = kz_centered.shape[0]
    try:
        return ridge * np.linalg.inv(kz_centered + ridge * np.eye(n))
    except np.linalg.LinAlgError as err:
        raise DegenerateDataError(f"residualization failed: {err}") from err


def _kci_statistic(kx: np.ndarray, ke: np.ndarray, kz: np.ndarray | None,
                   ridge: float):
    """Statistic and gamma-null parameters for trace(Kx~ Ke~).

    Both kernel matrices are centered, then multiplied on both sides by the
    residual maker of kernel ridge regression on Z. Under the null the
    statistic is approximately a weighted chi-square sum; a gamma fit to its
    first two moments (trace products) gives the p-value.
    """
    kx_c = _center(kx)
    ke_c = _center(ke)
    if kz is None:
        kx_t, ke_t = kx_c, ke_c
        resid = None
    else:
        resid = _residualizer(_center(kz), ridge)
        kx_t = resid @ kx_c @ resid
        ke_t = resid @ ke_c @ resid
    n = kx.shape[0]
    stat = float((kx_t * ke_t).sum())
    tr_x, tr_e = float(np.trace(kx_t)), float(np.trace(ke_t))
    tr_xx = float((kx_t * kx_t).sum())
    tr_ee = float((ke_t * ke_t).sum())
    mean = tr_x * tr_e / n
    var = 2.0 * tr_xx * tr_ee / (n * n)
    if mean <= 0 or var <= 0:
        raise DegenerateDataError("degenerate kernel statistic (zero variance)")
    return stat, mean, var, kx_t, resid, kx_c


def _gamma_p(stat: float, mean: float, var: float) -> float:
    shape = mean * mean / var
    scale = var / mean
    return float(stats.gamma.sf(stat, shape, scale=scale))


def _kci_p_value(
    x: np.ndarray,
    e_labels: np.ndarray,
    z: np.ndarray | None,
    config: KernelConfig,
    perm_key: tuple = (),
) -> tuple[float, float]:
    n = x.shape[0]
    if n > config.max_pooled:
        raise ValueError(
            f"pooled sample size {n} exceeds max_pooled={config.max_pooled}"
        )
    kx = _gaussian_kernel(x[:, None])
    ke = _delta_kernel(e_labels)
    kz = None
    if z is not None and z.shape[1] > 0:
        kz = _gaussian_kernel(z)
    stat, mean, var, kx_t, resid, _ = _kci_statistic(kx, ke, kz, config.ridge)
    if config.null_method == "gamma":
        return _gamma_p(stat, mean, var), stat

    # Permutation null: reshuffle the indicator, recompute the trace. Writing
    # the delta kernel as G G^T with G the one-hot labels, the trace becomes
    # a quadratic form in (resid @ centered G), which costs O(n^2) per draw.
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, *perm_key)))
    groups = np.unique(e_labels)
    onehot = (e_labels[:, None] == groups[None, :]).astype(np.float64)

    def trace_with(perm_onehot: np.ndarray) -> float:
        g = perm_onehot - perm_onehot.mean(axis=0, keepdims=True)
        w = g if resid is None else resid @ g
        return float((w * (kx_t @ w)).sum())

    observed = trace_with(onehot)
    hits = 0
    for _ in range(config.n_permutations):
        perm = rng.permutation(n)
        if trace_with(onehot[perm]) >= observed:
            hits += 1
    p = (1.0 + hits) / (1.0 + config.n_permutations)
    return float(p), stat


def kci_invariance(
    a: EnvSample,
    b: EnvSample,
    query: InvarianceQuery,
    config: KernelConfig | None = None,
) -> TestResult:
    """Kernel test of X_j independent of the environment indicator given Z."""
    config = config if config is not None else KernelConfig()
    x, e, z = _stack(a, b, query)
    z_block = z if z.shape[1] > 0 else None
    p, stat = _kci_p_value(
        x, e, z_block, config,
        perm_key=(query.target, *query.given, *query.env_pair),
    )
    return TestResult(p, stat, "kci")


def kci_ci(
    data: np.ndarray,
    x: int,
    y: int,
    z: Iterable[int],
    discrete: frozenset[int] = frozenset(),
    config: KernelConfig | None = None,
) -> float:
    """Kernel CI p-value between two columns of one matrix.

    Columns listed in ``discrete`` (the pooled environment index, typically)
    get a delta kernel; continuous blocks share one Gaussian kernel with a
    median-heuristic bandwidth. Discrete conditioning columns multiply into
    the Z kernel.
    """
    config = config if config is not None else KernelConfig()
    z = tuple(z)

    def column_kernel(idx: int) -> np.ndarray:
        col = data[:, idx]
        if idx in discrete:
            return _delta_kernel(col)
        return _gaussian_kernel(col[:, None])

    n = data.shape[0]
    if n > config.max_pooled:
        raise ValueError(
            f"pooled sample size {n} exceeds max_pooled={config.max_pooled}"
        )
    kx = column_kernel(x)
    ke = column_kernel(y)
    kz = None
    if z:
        cont = [c for c in z if c not in discrete]
        kz = np.ones((n, n))
        if cont:
            kz = _gaussian_kernel(data[:, cont])
        for c in z:
            if c in discrete:
                kz = kz * _delta_kernel(data[:, c])
    stat, mean, var, _, _, _ = _kci_statistic(kx, ke, kz, config.ridge)
    return _gamma_p(stat, mean, var)


# ---------------------------------------------------------------------------
# Pooled-regression residuals


def regression_residual_invariance(
    a: EnvSample,
    b: EnvSample,
    query: InvarianceQuery,
    regressor: str = "kernel_ridge",
    ridge: float = 1.0,
) -> TestResult:
    """Residual location/scale comparison after one pooled fit of X_j on Z.

    The pooled fit uses kernel ridge regression with a Gaussian kernel and a
    median-heuristic bandwidth (``regressor="linear"`` switches to ordinary
    least squares). Residuals are grouped by environment and compared with a
    Welch t-test on means and a two-sided F-test on variances,
    Bonferroni-combined.
    """
    x, e, z = _stack(a, b, query)
    if z.shape[1] == 0:
        residuals = x - x.mean()
    elif regressor == "linear":
        design = np.hstack([np.ones_like(x)[:, None], z])
        coef, _, rank, _ = np.linalg.lstsq(design, x, rcond=None)
        if rank < design.shape[1]:
            raise DegenerateDataError("rank-deficient regression design")
        residuals = x - design @ coef
    elif regressor == "kernel_ridge":
        from sklearn.kernel_ridge import KernelRidge

        bw = _median_bandwidth(z)
        model = KernelRidge(alpha=ridge, kernel="rbf", gamma=1.0 / (2.0 * bw * bw))
        model.fit(z, x)
        residuals = x - model.predict(z)
    else:
        raise ValueError(f"unknown regressor {regressor!r}")

    r1, r2 = residuals[e == 0], residuals[e == 1]
    if min(len(r1), len(r2)) < 3:
        raise ValueError("need at least three samples per environment")
    v1, v2 = r1.var(ddof=1), r2.var(ddof=1)
    if v1 <= 0 or v2 <= 0:
        raise DegenerateDataError("zero residual variance in one environment")
    p_mean = float(stats.ttest_ind(r1, r2, equal_var=False).pvalue)
    f_var = v1 / v2
    p_var = 2.0 * min(
        stats.f.cdf(f_var, len(r1) - 1, len(r2) - 1),
        stats.f.sf(f_var, len(r1) - 1, len(r2) - 1),
    )
    p_var = min(float(p_var), 1.0)
    p = min(1.0, 2.0 * min(p_mean, p_var))
    return TestResult(p, float(f_var), "regression_residual")


# ---------------------------------------------------------------------------
# Oracle


def oracle_invariance(scenario) -> InvarianceTest:
    """Test that reads the verdict off the scenario's augmented truth.

    Returns p = 0 when the target is d-connected to the environment indicator
    given the conditioning set (the conditional genuinely differs between the
    pair), else p = 1. Data arguments are ignored.
    """
    from .mss import pairwise_shift_set

    def test(a: EnvSample, b: EnvSample, query: InvarianceQuery) -> TestResult:
        e, f = query.env_pair
        shifted = pairwise_shift_set(scenario, e, f)
        aug = AugmentedDag(scenario.dag, shifted)
        separated = d_separated(aug, query.target, aug.env_index, query.given)
        p = 1.0 if separated else 0.0
        return TestResult(p, 1.0 - p, "oracle")

    return test


_FAMILIES = ("fisher_z", "linear", "kci", "regression_residual")


def make_invariance_test(
    name: str,
    kernel: KernelConfig | None = None,
    regressor: str = "kernel_ridge",
    ridge: float = 1.0,
) -> InvarianceTest:
    """Bind a test family name and its options into a single callable."""
    if name == "fisher_z":
        return fisher_z_invariance
    if name == "linear":
        return linear_param_invariance
    if name == "kci":
        cfg = kernel if kernel is not None else KernelConfig()

        def kci_test(a, b, query):
            return kci_invariance(a, b, query, cfg)

        return kci_test
    if name == "regression_residual":
        def rr_test(a, b, query):
            return regression_residual_invariance(
                a, b, query, regressor=regressor, ridge=ridge
            )

        return rr_test
    raise ValueError(f"unknown invariance test {name!r}; known: {_FAMILIES}")
