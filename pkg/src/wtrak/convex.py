"""Wasserstein-robust influence for convex generalized linear models.

Two losses are supported, both written as ``psi(x^T theta, y) + reg/2 ||theta||^2``
with the regularizer folded into every per-sample loss:

* ``ridge``    -- ``psi(s, y) = (s - y)^2 / 2``
* ``logistic`` -- ``psi(s, y) = log(1 + exp(s)) - y s`` with ``y in {0, 1}``

Influence of training point ``i`` on a test point is ``-g_test^T H^{-1} g_i``.
Its derivative along the mixture ``(1 - t) P_n + t delta_z`` is the sensitivity
kernel ``S(z) = S_H(z) + S_g(z)`` where, with ``u = H^{-1} g_test``,
``v = H^{-1} g_i`` and ``w = H^{-1} g_z``::

    S_H(z) = u^T (dH/dt) v
    S_g(z) = w^T H_test v + u^T H_i w

and ``dH/dt = (H_z - H) - D[w]``.  ``D[w] = mean_k psi'''_k (x_k^T w) x_k x_k^T``
is the drift of the pooled Hessian caused by the parameter shift ``-w``; it
vanishes for ridge (constant Hessian) and is reported separately as ``drift``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_epsilon
from .exceptions import (
    BadLabels,
    DimensionMismatch,
    DuplicatePoints,
    IndexOutOfRange,
    InputError,
    NonConvergence,
    TooFewPoints,
)
from .trak import IntervalMatrix, Metric, RobustInterval, resolve_threads

STATIONARITY_TOL = 1e-10
MAX_NEWTON_ITER = 100


class LossKind(str, enum.Enum):
    RIDGE = "ridge"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class ConvexLossSpec:
    kind: LossKind
    reg_strength: float
    feature_dim: Optional[int] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", LossKind(self.kind))
        except ValueError:
            raise InputError(f"unknown loss {self.kind!r}; expected 'ridge' or 'logistic'") from None
        if not (math.isfinite(self.reg_strength) and self.reg_strength > 0):
            raise InputError(f"reg_strength must be > 0, got {self.reg_strength}")

    # Derivatives of psi with respect to the linear score s = x^T theta.
    def psi(self, s, y):
        if self.kind is LossKind.RIDGE:
            return 0.5 * (s - y) ** 2
        return np.logaddexp(0.0, s) - y * s

    def psi1(self, s, y):
        if self.kind is LossKind.RIDGE:
            return s - y
        return expit(s) - y

    def psi2(self, s):
        if self.kind is LossKind.RIDGE:
            return np.ones_like(s)
        p = expit(s)
        return p * (1.0 - p)

    def psi3(self, s):
        if self.kind is LossKind.RIDGE:
            return np.zeros_like(s)
        p = expit(s)
        return p * (1.0 - p) * (1.0 - 2.0 * p)

    def loss(self, theta, X, y) -> np.ndarray:
        return self.psi(X @ theta, y) + 0.5 * self.reg_strength * float(theta @ theta)

    def gradients(self, theta, X, y) -> np.ndarray:
        return self.psi1(X @ theta, y)[:, None] * X + self.reg_strength * theta[None, :]

    def hessians(self, theta, X) -> np.ndarray:
        c = self.psi2(X @ theta)
        p = X.shape[1]
        return c[:, None, None] * X[:, :, None] * X[:, None, :] + self.reg_strength * np.eye(p)[None]


def _check_labels(spec: ConvexLossSpec, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise BadLabels("labels contain non-finite values")
    if spec.kind is LossKind.LOGISTIC and not np.all((y == 0.0) | (y == 1.0)):
        raise BadLabels("logistic loss needs labels in {0, 1}")
    return y


def _chunked_diameter(Z: np.ndarray, block: int = 2048) -> float:
    best = 0.0
    for s in range(0, Z.shape[0], block):
        best = max(best, float(cdist(Z[s:s + block], Z).max()))
    return best


def data_points(X: np.ndarray, y: np.ndarray, label_weight: float = 1.0) -> np.ndarray:
    """Points of the raw data space: ``x`` concatenated with ``label_weight * y``."""
    return np.column_stack([X, label_weight * np.asarray(y, dtype=np.float64)])


@dataclass(frozen=True)
class ConvexModelFit:
    theta_hat: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    H: np.ndarray
    H_inv: np.ndarray
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    spec: ConvexLossSpec
    label_weight: float
    diameter: float
    n_iter: int
    dataset_ref: str = "train"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def points(self) -> np.ndarray:
        return data_points(self.X, self.y, self.label_weight)

    def stationarity(self) -> float:
        return float(np.linalg.norm(self.weights @ self.grads))


def _objective(spec, theta, X, y, w):
    return float(w @ spec.psi(X @ theta, y)) + 0.5 * spec.reg_strength * float(theta @ theta)


def _solve(spec: ConvexLossSpec, X, y, w):
    p = X.shape[1]
    reg = spec.reg_strength
    if spec.kind is LossKind.RIDGE:
        A = (X * w[:, None]).T @ X + reg * np.eye(p)
        theta = np.linalg.solve(A, X.T @ (w * y))
        # one refinement step against round-off
        g = X.T @ (w * (X @ theta - y)) + reg * theta
        return theta - np.linalg.solve(A, g), 1
    theta = np.zeros(p)
    f = _objective(spec, theta, X, y, w)
    for it in range(1, MAX_NEWTON_ITER + 1):
        s = X @ theta
        g = X.T @ (w * spec.psi1(s, y)) + reg * theta
        A = (X * (w * spec.psi2(s))[:, None]).T @ X + reg * np.eye(p)
        step = np.linalg.solve(A, g)
        if np.linalg.norm(g) <= 1e-14 * (1.0 + np.linalg.norm(theta)):
            return theta, it
        decrement = float(g @ step)
        t = 1.0
        while True:
            cand = theta - t * step
            fc = _objective(spec, cand, X, y, w)
            # near the optimum the objective change drops below round-off; take the full step
            if fc <= f - 1e-4 * t * decrement or decrement <= 1e-12 * (1.0 + abs(f)) or t < 1e-10:
                break
            t *= 0.5
        if np.linalg.norm(cand - theta) <= 1e-16 * (1.0 + np.linalg.norm(theta)):
            return cand, it
        theta, f = cand, fc
    return theta, MAX_NEWTON_ITER


def fit_convex(X, y, spec: ConvexLossSpec, sample_weight=None, label_weight: float = 1.0,
               dataset_ref: str = "train") -> ConvexModelFit:
    """Minimize the weighted empirical risk and evaluate per-sample derivatives at the optimum.

    ``sample_weight`` is normalized to sum to one (uniform by default).  Ridge
    uses the normal equations, logistic a damped Newton method; both are
    deterministic.  The fit is rejected if the weighted mean gradient exceeds
    ``1e-10 * (1 + ||theta||)``.

    Raises:
        TooFewPoints: fewer than two rows.
        BadLabels: labels do not match the loss.
        NonConvergence: the stationarity check fails.
    """
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise TooFewPoints("need at least two training points")
    if spec.feature_dim is not None and X.shape[1] != spec.feature_dim:
        raise DimensionMismatch(f"X has {X.shape[1]} features, loss spec expects {spec.feature_dim}")
    y = _check_labels(spec, y)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y must have one label per row")
    if sample_weight is None:
        w = np.full(X.shape[0], 1.0 / X.shape[0])
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if w.shape != y.shape or np.any(w < 0) or w.sum() <= 0:
            raise InputError("sample_weight must be non-negative with a positive sum")
        w = w / w.sum()
    theta, n_iter = _solve(spec, X, y, w)
    grads = spec.gradients(theta, X, y)
    residual = float(np.linalg.norm(w @ grads))
    if not np.all(np.isfinite(theta)) or residual > STATIONARITY_TOL * (1.0 + np.linalg.norm(theta)):
        raise NonConvergence(f"stationarity residual {residual:.3e} after {n_iter} iterations")
    hessians = spec.hessians(theta, X)
    H = np.einsum("k,kab->ab", w, hessians)
    H = 0.5 * (H + H.T)
    return ConvexModelFit(
        theta_hat=theta, grads=grads, hessians=hessians, H=H, H_inv=np.linalg.inv(H),
        X=X, y=y, weights=w, spec=spec, label_weight=float(label_weight),
        diameter=_chunked_diameter(data_points(X, y, label_weight)), n_iter=n_iter,
        dataset_ref=dataset_ref,
    )


def _point(fit: ConvexModelFit, z):
    x, y = z
    x = as_vector(x, fit.p, "z.x")
    y = float(_check_labels(fit.spec, np.array([y]))[0])
    return x, y


def gradient_at(fit: ConvexModelFit, z) -> np.ndarray:
    x, y = _point(fit, z)
    return fit.spec.gradients(fit.theta_hat, x[None, :], np.array([y]))[0]


def hessian_at(fit: ConvexModelFit, z) -> np.ndarray:
    x, _ = _point(fit, z)
    return fit.spec.hessians(fit.theta_hat, x[None, :])[0]


def _index(fit: ConvexModelFit, i) -> int:
    if not 0 <= int(i) < fit.n:
        raise IndexOutOfRange(f"train index {i} outside [0, {fit.n})")
    return int(i)


def classical_influence(fit: ConvexModelFit, train_index: int, z_test) -> float:
    i = _index(fit, train_index)
    return float(-gradient_at(fit, z_test) @ fit.H_inv @ fit.grads[i])


def influence_matrix(fit: ConvexModelFit, X_test, y_test) -> np.ndarray:
    """``-g_t^T H^{-1} g_i`` for every test row ``t`` and training row ``i``."""
    X_test = as_matrix(X_test, "X_test")
    G_t = fit.spec.gradients(fit.theta_hat, X_test, _check_labels(fit.spec, y_test))
    return -G_t @ fit.H_inv @ fit.grads.T


def param_sensitivity(fit: ConvexModelFit, z) -> np.ndarray:
    """Derivative of the optimum along the mixture toward ``z``: ``-H^{-1} g_z``."""
    return -fit.H_inv @ gradient_at(fit, z)


@dataclass(frozen=True)
class SensitivityEval:
    z_index: Optional[str]
    S_H: float
    S_g: float
    S: float
    drift: float = 0.0


def _drift_form(fit: ConvexModelFit, u, v, w) -> float:
    """``u^T D[w] v`` with ``D[w] = sum_k weight_k psi'''_k (x_k^T w) x_k x_k^T``."""
    X = fit.X
    c3 = fit.spec.psi3(X @ fit.theta_hat)
    return float(np.sum(fit.weights * c3 * (X @ w) * (X @ u) * (X @ v)))


def sensitivity_kernel(fit: ConvexModelFit, train_index: int, z_test, z, z_index=None) -> SensitivityEval:
    i = _index(fit, train_index)
    u = fit.H_inv @ gradient_at(fit, z_test)
    v = fit.H_inv @ fit.grads[i]
    w = fit.H_inv @ gradient_at(fit, z)
    H_test = hessian_at(fit, z_test)
    H_z = hessian_at(fit, z)
    drift = -_drift_form(fit, u, v, w)
    S_H = float(u @ (H_z - fit.H) @ v) + drift
    S_g = float(w @ H_test @ v + u @ fit.hessians[i] @ w)
    return SensitivityEval(z_index, S_H, S_g, S_H + S_g, drift)


def kernel_matrix(fit: ConvexModelFit, z_test, with_parts: bool = False):
    """Kernel at every training point for every attributed training point.

    Returns an ``n x n`` array ``S[j, i]`` = kernel of pair (i, test) evaluated
    at perturbation point ``z_j``; with ``with_parts`` also ``(S_H, S_g, drift)``.
    """
    x_t, y_t = _point(fit, z_test)
    spec, theta, X = fit.spec, fit.theta_hat, fit.X
    reg = spec.reg_strength
    g_t = spec.gradients(theta, x_t[None, :], np.array([y_t]))[0]
    H_t = spec.hessians(theta, x_t[None, :])[0]
    u = fit.H_inv @ g_t
    V = fit.H_inv @ fit.grads.T  # p x n, column i is v_i (and w_i)
    c2 = spec.psi2(X @ theta)
    c3 = spec.psi3(X @ theta)
    Xu = X @ u
    XV = X @ V  # n x n, [k, i] = x_k^T v_i
    uV = u @ V
    # u^T H_j v_i and u^T H v_i = g_t^T v_i
    uHjv = (c2 * Xu)[:, None] * XV + reg * uV[None, :]
    uHv = g_t @ V
    drift = -(XV.T * (fit.weights * c3 * Xu)[None, :]) @ XV
    S_H = uHjv - uHv[None, :] + drift
    # w_j^T H_t v_i + u^T H_i w_j
    S_g = V.T @ H_t @ V + (XV * (c2 * Xu)[:, None]).T + reg * uV[:, None]
    S = S_H + S_g
    if with_parts:
        return S, S_H, S_g, drift
    return S


def _pair_index(n: int, pairs_sample: Optional[int], seed: int):
    total = n * (n - 1) // 2
    if pairs_sample is None or pairs_sample >= total:
        return np.triu_indices(n, 1), False
    from .data_io import CounterRNG

    rng = CounterRNG(seed, stream=0x5A17)
    j = (rng.uniform(pairs_sample) * n).astype(np.int64)
    k = (rng.uniform(pairs_sample) * (n - 1)).astype(np.int64)
    k = np.where(k >= j, k + 1, k)
    return (np.minimum(j, k), np.maximum(j, k)), True


def _pair_distances(points: np.ndarray, pairs) -> np.ndarray:
    j, k = pairs
    dist = np.linalg.norm(points[j] - points[k], axis=1)
    if dist.size and dist.min() <= 1e-12:
        raise DuplicatePoints("two data points coincide; the difference quotient is undefined")
    return dist


def kernel_lipschitz(evals, points, pairs_sample: Optional[int] = None, seed: int = 0) -> float:
    """Largest pairwise difference quotient ``|S_j - S_k| / ||z_j - z_k||``.

    All pairs by default; with ``pairs_sample`` only that many random pairs
    are examined, which yields a lower estimate of the true maximum.
    """
    S = np.array([e.S if isinstance(e, SensitivityEval) else float(e) for e in evals], dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if S.shape[0] < 2:
        raise TooFewPoints("need at least two kernel evaluations")
    if points.shape[0] != S.shape[0]:
        raise DimensionMismatch("one point per kernel evaluation required")
    pairs, _ = _pair_index(S.shape[0], pairs_sample, seed)
    dist = _pair_distances(points, pairs)
    return float(np.max(np.abs(S[pairs[0]] - S[pairs[1]]) / dist))


def _column_lipschitz(S: np.ndarray, pairs, dist: np.ndarray, block_elems: int = 2 ** 22) -> np.ndarray:
    j, k = pairs
    n_cols = S.shape[1]
    step = max(1, block_elems // max(1, len(j)))
    out = np.empty(n_cols)
    for s in range(0, n_cols, step):
        cols = slice(s, s + step)
        out[cols] = np.max(np.abs(S[j, cols] - S[k, cols]) / dist[:, None], axis=0)
    return out


def wrif_lipschitz(fit: ConvexModelFit, X_test, y_test, pairs_sample: Optional[int] = None,
                   seed: int = 0, n_jobs: Optional[int] = None):
    """``L_S`` for every (test, train) pair; returns ``(m x n array, is_estimate)``."""
    X_test = as_matrix(X_test, "X_test")
    y_test = _check_labels(fit.spec, y_test)
    if fit.n < 2:
        raise TooFewPoints("need at least two training points")
    pairs, sampled = _pair_index(fit.n, pairs_sample, seed)
    dist = _pair_distances(fit.points, pairs)

    def one(t):
        return _column_lipschitz(kernel_matrix(fit, (X_test[t], y_test[t])), pairs, dist)

    threads = resolve_threads(n_jobs)
    idx = range(X_test.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, idx))
    else:
        rows = [one(t) for t in idx]
    return np.vstack(rows), sampled


def wrif_interval(fit: ConvexModelFit, train_index: int, z_test, epsilon: float,
                  pairs_sample: Optional[int] = None, seed: int = 0) -> RobustInterval:
    """Influence interval ``I +- epsilon * L_S`` over the raw-data Wasserstein-1 ball."""
    epsilon = check_epsilon(epsilon)
    i = _index(fit, train_index)
    S = kernel_matrix(fit, z_test)[:, i]
    lip = kernel_lipschitz(S, fit.points, pairs_sample, seed)
    return RobustInterval.around(classical_influence(fit, i, z_test), lip, epsilon,
                                 Metric.EUCLIDEAN, None, f"{fit.dataset_ref}:{i}")


def wrif_intervals(fit: ConvexModelFit, X_test, y_test, epsilon: float,
                   pairs_sample: Optional[int] = None, seed: int = 0,
                   n_jobs: Optional[int] = None) -> IntervalMatrix:
    epsilon = check_epsilon(epsilon)
    lip, _ = wrif_lipschitz(fit, X_test, y_test, pairs_sample, seed, n_jobs)
    nominal = influence_matrix(fit, X_test, y_test)
    return IntervalMatrix(nominal, lip, epsilon, Metric.EUCLIDEAN,
                          tuple(str(t) for t in range(nominal.shape[0])),
                          tuple(str(i) for i in range(fit.n)))


def loo_wasserstein_bound(points) -> float:
    """``diam / n`` for the given raw data points (upper bound on W1 to any leave-one-out)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] < 2:
        raise TooFewPoints("need at least two points")
    return _chunked_diameter(points) / points.shape[0]


def loo_refit(fit: ConvexModelFit, train_index: int) -> ConvexModelFit:
    i = _index(fit, train_index)
    if fit.n < 3:
        raise TooFewPoints("leave-one-out needs at least three points")
    keep = np.arange(fit.n) != i
    return fit_convex(fit.X[keep], fit.y[keep], fit.spec, fit.weights[keep], fit.label_weight,
                      dataset_ref=f"{fit.dataset_ref}-{i}")


def _loss_at(fit: ConvexModelFit, theta, z) -> float:
    x, y = _point(fit, z)
    return float(fit.spec.loss(theta, x[None, :], np.array([y]))[0])


def loo_influence_oracle(fit: ConvexModelFit, train_index: int, z_test) -> float:
    """Actual test-loss change ``l(theta_{-i}, z_test) - l(theta, z_test)`` after retraining."""
    refit = loo_refit(fit, train_index)
    return _loss_at(fit, refit.theta_hat, z_test) - _loss_at(fit, fit.theta_hat, z_test)


def loo_influence_value(fit: ConvexModelFit, train_index: int, z_test, refit=None) -> float:
    """Influence of ``z_i`` on the test point recomputed under the leave-one-out distribution."""
    i = _index(fit, train_index)
    refit = refit or loo_refit(fit, i)
    x_i, y_i = fit.X[i], fit.y[i]
    g_i = refit.spec.gradients(refit.theta_hat, x_i[None, :], np.array([y_i]))[0]
    return float(-gradient_at(refit, z_test) @ refit.H_inv @ g_i)


@dataclass(frozen=True)
class CoverageResult:
    fraction: float
    epsilon: float
    inside: np.ndarray  # m x n booleans
    loo_values: np.ndarray  # m x n influence under P_{n,-i}
    loss_change: np.ndarray  # m x n raw test-loss change after removing i
    intervals: IntervalMatrix

    def to_dict(self) -> dict:
        return {
            "coverage": self.fraction,
            "epsilon": self.epsilon,
            "pairs": int(self.inside.size),
            "covered": int(self.inside.sum()),
            "max_abs_loo_shift": float(np.max(np.abs(self.loo_values - self.intervals.nominal))),
            "mean_halfwidth": float(np.mean(self.epsilon * self.intervals.lipschitz)),
        }


def coverage_table(fit: ConvexModelFit, epsilon: float, X_test, y_test,
                   pairs_sample: Optional[int] = None, seed: int = 0,
                   n_jobs: Optional[int] = None) -> CoverageResult:
    X_test = as_matrix(X_test, "X_test")
    y_test = _check_labels(fit.spec, y_test)
    intervals = wrif_intervals(fit, X_test, y_test, epsilon, pairs_sample, seed, n_jobs)

    def one(i):
        refit = loo_refit(fit, i)
        vals = [loo_influence_value(fit, i, (X_test[t], y_test[t]), refit) for t in range(len(y_test))]
        changes = [_loss_at(fit, refit.theta_hat, (X_test[t], y_test[t]))
                   - _loss_at(fit, fit.theta_hat, (X_test[t], y_test[t])) for t in range(len(y_test))]
        return vals, changes

    threads = resolve_threads(n_jobs)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(one, range(fit.n)))
    else:
        cols = [one(i) for i in range(fit.n)]
    loo = np.array([c[0] for c in cols]).T
    change = np.array([c[1] for c in cols]).T
    inside = (intervals.lo <= loo) & (loo <= intervals.hi)
    return CoverageResult(float(inside.mean()), float(epsilon), inside, loo, change, intervals)


def coverage_check(fit: ConvexModelFit, epsilon: float, X_test, y_test, **kwargs) -> float:
    """Fraction of (train, test) pairs whose leave-one-out influence lies in the W-RIF interval."""
    return coverage_table(fit, epsilon, X_test, y_test, **kwargs).fraction


class RobustInfluence(BaseEstimator):
    """Influence functions with certified Wasserstein intervals for ridge / L2-logistic models.

    Parameters
    ----------
    loss : {"logistic", "ridge"}
    reg_strength : float
        L2 penalty folded into every per-sample loss; must be positive.
    label_weight : float
        Scale of the label coordinate in the raw-data ground metric.
    pairs_sample : int or None
        Cap on pairs examined when estimating ``L_S`` (None = all pairs).
    random_state : int
    n_jobs : int or None
    """

    def __init__(self, loss: str = "logistic", reg_strength: float = 1e-2, label_weight: float = 1.0,
                 pairs_sample: Optional[int] = None, random_state: int = 0, n_jobs: Optional[int] = None):
        self.loss = loss
        self.reg_strength = reg_strength
        self.label_weight = label_weight
        self.pairs_sample = pairs_sample
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None):
        spec = ConvexLossSpec(self.loss, self.reg_strength)
        self.fit_ = fit_convex(X, y, spec, sample_weight, self.label_weight)
        self.coef_ = self.fit_.theta_hat
        self.n_features_in_ = self.fit_.p
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_")
        return as_matrix(X) @ self.coef_

    def predict(self, X) -> np.ndarray:
        s = self.decision_function(X)
        return (s > 0).astype(np.float64) if self.fit_.spec.kind is LossKind.LOGISTIC else s

    def loo_radius(self) -> float:
        check_is_fitted(self, "fit_")
        return self.fit_.diameter / self.fit_.n

    def influence(self, X_test, y_test) -> np.ndarray:
        check_is_fitted(self, "fit_")
        return influence_matrix(self.fit_, X_test, y_test)

    def intervals(self, X_test, y_test, epsilon: float | None = None) -> IntervalMatrix:
        check_is_fitted(self, "fit_")
        eps = self.loo_radius() if epsilon is None else epsilon
        return wrif_intervals(self.fit_, X_test, y_test, eps, self.pairs_sample, self.random_state, self.n_jobs)

    def coverage(self, X_test, y_test, epsilon: float | None = None) -> CoverageResult:
        check_is_fitted(self, "fit_")
        eps = self.loo_radius() if epsilon is None else epsilon
        return coverage_table(self.fit_, eps, X_test, y_test, self.pairs_sample, self.random_state, self.n_jobs)

    def sensitivity(self, train_index: int, x_test, y_test, points: Sequence) -> list:
        check_is_fitted(self, "fit_")
        return [sensitivity_kernel(self.fit_, train_index, (x_test, y_test), z) for z in points]
