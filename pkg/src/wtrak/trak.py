"""TRAK scores, Self-Influence, Lipschitz constants and certified W-TRAK intervals.

Two metrics are supported for the perturbation ball:

* ``natural`` -- Mahalanobis distance induced by ``Q^{-1}``.  The Lipschitz
  constant is ``2 sqrt(SI_test) sqrt(SI_i) R_whit`` with the test
  Self-Influence capped at twice the largest training Self-Influence.
* ``euclidean`` -- plain Euclidean distance in raw feature space over the same
  training domain (the whitened ball of radius ``R_whit``).  The identical
  triangle/Cauchy-Schwarz chain carried out in raw coordinates gives
  ``(||Q^{-1} phi_test|| sqrt(SI_i) + ||Q^{-1} phi_i|| sqrt(SI_test)) R_whit``.

:func:`euclidean_lipschitz_ball` keeps the cruder variant that also swaps the
domain for the raw Euclidean ball of radius ``r_euc``; it is reported as a
diagnostic only.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_epsilon, check_nonneg
from .exceptions import DimensionMismatch, IndexOutOfRange
from .geometry import DEFAULT_LAMBDA, CovarianceModel, FeatureMatrix, build_covariance

OOD_CAP_FACTOR = 2.0


class Metric(str, enum.Enum):
    NATURAL = "natural"
    EUCLIDEAN = "euclidean"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            from .exceptions import InputError

            raise InputError(f"unknown metric {value!r}; expected 'natural' or 'euclidean'") from None


@dataclass(frozen=True)
class RobustInterval:
    nominal: float
    lipschitz: float
    epsilon: float
    lo: float
    hi: float
    metric: Metric
    test_id: Optional[str] = None
    train_id: Optional[str] = None

    @classmethod
    def around(cls, nominal, lipschitz, epsilon, metric, test_id=None, train_id=None) -> "RobustInterval":
        nominal, lipschitz = float(nominal), float(lipschitz)
        epsilon = check_epsilon(epsilon)
        half = epsilon * lipschitz
        return cls(nominal, lipschitz, epsilon, nominal - half, nominal + half,
                   Metric.parse(metric), test_id, train_id)

    @property
    def halfwidth(self) -> float:
        return self.epsilon * self.lipschitz

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        return {
            "nominal": self.nominal, "lipschitz": self.lipschitz, "epsilon": self.epsilon,
            "lo": self.lo, "hi": self.hi, "metric": self.metric.value,
            "test_id": self.test_id, "train_id": self.train_id,
        }


@dataclass(frozen=True)
class SelfInfluenceRecord:
    id: str
    raw: float
    capped: Optional[float] = None


def _pair(model: CovarianceModel, a, b):
    return as_vector(a, model.dim, "phi_test"), as_vector(b, model.dim, "phi_i")


def trak_score(model: CovarianceModel, phi_test, phi_i) -> float:
    phi_test, phi_i = _pair(model, phi_test, phi_i)
    return float(phi_test @ model.Q_inv @ phi_i)


def spectral_decompose_trak(model: CovarianceModel, phi_test, phi_i) -> np.ndarray:
    """Per-eigendirection terms ``<phi_test, e_k> <phi_i, e_k> / lambda_k``; they sum to the score."""
    phi_test, phi_i = _pair(model, phi_test, phi_i)
    E = model.eigenvectors
    return (E.T @ phi_test) * (E.T @ phi_i) / model.eigenvalues


def self_influence(model: CovarianceModel, phi) -> float:
    phi = as_vector(phi, model.dim, "phi")
    return float(np.sum((model.Q_inv_sqrt @ phi) ** 2))


def self_influence_rows(model: CovarianceModel, Phi) -> np.ndarray:
    Phi = np.asarray(Phi, dtype=np.float64)
    if Phi.ndim != 2 or Phi.shape[1] != model.dim:
        raise DimensionMismatch(f"expected rows of dimension {model.dim}, got shape {Phi.shape}")
    return np.sum((Phi @ model.Q_inv_sqrt) ** 2, axis=1)


def cap_ood(si_test_raw: float, si_train_max: float) -> float:
    """Clamp a test Self-Influence at twice the largest training Self-Influence."""
    si_test_raw = check_nonneg(si_test_raw, "si_test_raw")
    si_train_max = check_nonneg(si_train_max, "si_train_max")
    return min(si_test_raw, OOD_CAP_FACTOR * si_train_max)


def natural_lipschitz(si_test_capped: float, si_i: float, r_whit: float) -> float:
    si_test_capped = check_nonneg(si_test_capped, "si_test")
    si_i = check_nonneg(si_i, "si_i")
    r_whit = check_nonneg(r_whit, "r_whit")
    return 2.0 * np.sqrt(si_test_capped) * np.sqrt(si_i) * r_whit


def euclidean_lipschitz(model: CovarianceModel, phi_test, phi_i, r_whit: float) -> float:
    """Euclidean-metric Lipschitz bound over the whitened training ball of radius ``r_whit``."""
    phi_test, phi_i = _pair(model, phi_test, phi_i)
    r_whit = check_nonneg(r_whit, "r_whit")
    u = model.Q_inv @ phi_test
    v = model.Q_inv @ phi_i
    a = np.linalg.norm(model.Q_inv_sqrt @ phi_test)
    b = np.linalg.norm(model.Q_inv_sqrt @ phi_i)
    return float((np.linalg.norm(u) * b + np.linalg.norm(v) * a) * r_whit)


def euclidean_lipschitz_ball(model: CovarianceModel, phi_test, phi_i, r_euc: float) -> float:
    """``2 ||Q^{-1} phi_test|| ||Q^{-1} phi_i|| r_euc``: bound over the raw Euclidean ball."""
    phi_test, phi_i = _pair(model, phi_test, phi_i)
    r_euc = check_nonneg(r_euc, "r_euc")
    return float(2.0 * np.linalg.norm(model.Q_inv @ phi_test) * np.linalg.norm(model.Q_inv @ phi_i) * r_euc)


@dataclass(frozen=True)
class AttributionModel:
    """Covariance plus the cached training-side quantities used by every interval.

    ``r_whit`` and ``r_euc`` are maxima over the training rows only.
    """

    covariance: CovarianceModel
    features: FeatureMatrix
    si_train: np.ndarray
    r_whit: float
    r_euc: float
    preconditioned: np.ndarray  # rows Q^{-1} phi_j
    whitened: np.ndarray  # rows Q^{-1/2} phi_j

    @property
    def n(self) -> int:
        return self.features.n

    @property
    def si_train_max(self) -> float:
        return float(self.si_train.max())

    def self_influence_records(self):
        return [SelfInfluenceRecord(i, float(s)) for i, s in zip(self.features.ids, self.si_train)]


def fit_attribution(features, lam: float = DEFAULT_LAMBDA) -> AttributionModel:
    if not isinstance(features, FeatureMatrix):
        features = FeatureMatrix(as_matrix(features, "features"))
    cov = build_covariance(features, lam)
    Phi = features.values
    whitened = Phi @ cov.Q_inv_sqrt
    si = np.sum(whitened ** 2, axis=1)
    return AttributionModel(
        covariance=cov,
        features=features,
        si_train=si,
        r_whit=float(np.sqrt(si.max())),
        r_euc=float(np.linalg.norm(Phi, axis=1).max()),
        preconditioned=Phi @ cov.Q_inv,
        whitened=whitened,
    )


def wtrak_interval(model: AttributionModel, phi_test, train_index: int, epsilon: float,
                   metric="natural", cap: bool = True, test_id: Optional[str] = None) -> RobustInterval:
    """Certified interval for one (test, train) pair.

    With ``metric="natural"`` this is the Natural W-TRAK recipe: training and
    test Self-Influence, the OOD cap on the test side, ``R_whit``, the
    Lipschitz constant and the symmetric interval around the TRAK score.
    ``cap=False`` gives the uncapped bound.
    """
    metric = Metric.parse(metric)
    epsilon = check_epsilon(epsilon)
    if not 0 <= int(train_index) < model.n:
        raise IndexOutOfRange(f"train_index {train_index} outside [0, {model.n})")
    i = int(train_index)
    cov = model.covariance
    phi_test = as_vector(phi_test, cov.dim, "phi_test")
    phi_i = model.features.values[i]
    si_i = float(model.si_train[i])
    si_test_raw = self_influence(cov, phi_test)
    nominal = trak_score(cov, phi_test, phi_i)
    if metric is Metric.NATURAL:
        si_test = cap_ood(si_test_raw, model.si_train_max) if cap else si_test_raw
        lip = natural_lipschitz(si_test, si_i, model.r_whit)
    else:
        lip = euclidean_lipschitz(cov, phi_test, phi_i, model.r_whit)
    return RobustInterval.around(nominal, lip, epsilon, metric, test_id, model.features.ids[i])


@dataclass(frozen=True)
class IntervalMatrix:
    """Structure-of-arrays block of ``m x n`` intervals sharing one epsilon and metric."""

    nominal: np.ndarray
    lipschitz: np.ndarray
    epsilon: float
    metric: Metric
    test_ids: tuple
    train_ids: tuple

    @property
    def lo(self) -> np.ndarray:
        return self.nominal - self.epsilon * self.lipschitz

    @property
    def hi(self) -> np.ndarray:
        return self.nominal + self.epsilon * self.lipschitz

    @property
    def shape(self):
        return self.nominal.shape

    def with_epsilon(self, epsilon: float) -> "IntervalMatrix":
        return IntervalMatrix(self.nominal, self.lipschitz, check_epsilon(epsilon), self.metric,
                              self.test_ids, self.train_ids)

    def interval(self, t: int, i: int) -> RobustInterval:
        return RobustInterval.around(self.nominal[t, i], self.lipschitz[t, i], self.epsilon,
                                     self.metric, self.test_ids[t], self.train_ids[i])


def resolve_threads(n_jobs: Optional[int]) -> int:
    if n_jobs is None:
        n_jobs = int(os.environ.get("WTRAK_THREADS", "1") or 1)
    return max(1, int(n_jobs))


def _block(model: AttributionModel, T: np.ndarray, metric: Metric, cap: bool):
    cov = model.covariance
    nominal = T @ model.preconditioned.T
    white_t = T @ cov.Q_inv_sqrt
    si_t = np.sum(white_t ** 2, axis=1)
    sqrt_si = np.sqrt(model.si_train)
    if metric is Metric.NATURAL:
        if cap:
            si_t = np.minimum(si_t, OOD_CAP_FACTOR * model.si_train_max)
        lip = 2.0 * np.sqrt(si_t)[:, None] * sqrt_si[None, :] * model.r_whit
    else:
        u_norm = np.linalg.norm(T @ cov.Q_inv, axis=1)
        v_norm = np.linalg.norm(model.preconditioned, axis=1)
        lip = (u_norm[:, None] * sqrt_si[None, :] + np.sqrt(si_t)[:, None] * v_norm[None, :]) * model.r_whit
    return nominal, lip


def batch_intervals(model: AttributionModel, test_features, epsilon: float = 0.0, metric="natural",
                    cap: bool = True, n_jobs: Optional[int] = None, chunk: int = 256) -> IntervalMatrix:
    """All test x train intervals, computed in row chunks (optionally on a thread pool)."""
    metric = Metric.parse(metric)
    epsilon = check_epsilon(epsilon)
    if isinstance(test_features, FeatureMatrix):
        T, test_ids = test_features.values, test_features.ids
    else:
        T = as_matrix(test_features, "test_features")
        test_ids = tuple(str(i) for i in range(T.shape[0]))
    if T.shape[1] != model.covariance.dim:
        raise DimensionMismatch(f"test features have dimension {T.shape[1]}, expected {model.covariance.dim}")
    starts = list(range(0, T.shape[0], chunk))
    work = lambda s: _block(model, T[s:s + chunk], metric, cap)  # noqa: E731
    threads = resolve_threads(n_jobs)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    nominal = np.vstack([p[0] for p in parts])
    lip = np.vstack([p[1] for p in parts])
    return IntervalMatrix(nominal, lip, epsilon, metric, tuple(test_ids), model.features.ids)


class WTRAK(BaseEstimator):
    """Certified TRAK attribution as an estimator.

    ``fit`` takes the training feature matrix (rows are per-sample gradient
    features); ``predict`` returns nominal TRAK scores for test rows and
    ``intervals`` the certified intervals.

    Parameters
    ----------
    lam : float, default=1e-4
        Covariance regularization.
    epsilon : float, default=0.0
        Robustness radius used when ``intervals`` is called without one.
    metric : {"natural", "euclidean"}, default="natural"
    cap_ood : bool, default=True
        Apply the test-side Self-Influence cap (Natural metric only).
    n_jobs : int or None
        Worker threads for batch evaluation; ``None`` reads ``WTRAK_THREADS``.
    """

    def __init__(self, lam: float = DEFAULT_LAMBDA, epsilon: float = 0.0, metric: str = "natural",
                 cap_ood: bool = True, n_jobs: Optional[int] = None):
        self.lam = lam
        self.epsilon = epsilon
        self.metric = metric
        self.cap_ood = cap_ood
        self.n_jobs = n_jobs

    def fit(self, X, y=None, ids: Sequence | None = None):
        features = X if isinstance(X, FeatureMatrix) else FeatureMatrix(as_matrix(X), tuple(ids or ()))
        self.model_ = fit_attribution(features, self.lam)
        self.n_features_in_ = features.d
        self.self_influence_ = self.model_.si_train
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return as_matrix(X) @ self.model_.preconditioned.T

    def intervals(self, X, epsilon: float | None = None, metric: str | None = None) -> IntervalMatrix:
        check_is_fitted(self, "model_")
        return batch_intervals(self.model_, X, self.epsilon if epsilon is None else epsilon,
                               metric or self.metric, self.cap_ood, self.n_jobs)

    def self_influence(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self_influence_rows(self.model_.covariance, as_matrix(X))
