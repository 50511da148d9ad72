"""Regularized feature covariance, whitening and the Natural (Mahalanobis) metric.

The :class:`CovarianceModel` is the geometry object every other module queries.
It stores the regularized second-moment matrix of the training features

    Q = (1/n) * Phi^T Phi + lam * I

together with its symmetric eigendecomposition, inverse and inverse square
root.  All inverses go through the eigendecomposition because the spectrum is
itself a reported quantity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_nonneg
from .exceptions import DimensionMismatch, InputError, NonFiniteInput, SingularCovariance

DEFAULT_LAMBDA = 1e-4


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-sample feature vectors with identifiers and optional anomaly flags."""

    values: np.ndarray
    ids: tuple = ()
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatch(f"feature matrix must be n x d with n, d >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("feature matrix contains non-finite values")
        ids = tuple(str(i) for i in self.ids) if len(self.ids) else tuple(str(i) for i in range(values.shape[0]))
        if len(ids) != values.shape[0]:
            raise DimensionMismatch(f"{len(ids)} ids for {values.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise InputError("row ids must be unique")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels).astype(bool)
            if labels.shape != (values.shape[0],):
                raise DimensionMismatch("labels must have one entry per row")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _features_array(features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.values
    return as_matrix(features, "features")


@dataclass(frozen=True)
class CovarianceModel:
    """Immutable regularized covariance with cached spectral quantities.

    ``eigenvalues`` are sorted in descending order and already include
    ``lam``; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``.
    """

    Q: np.ndarray
    lam: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    Q_inv: np.ndarray
    Q_inv_sqrt: np.ndarray
    raw_min_eigenvalue: float
    n_samples: int = 0

    def __post_init__(self):
        for name in ("Q", "eigenvalues", "eigenvectors", "Q_inv", "Q_inv_sqrt"):
            getattr(self, name).setflags(write=False)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues[0] / self.eigenvalues[-1])

    @classmethod
    def from_matrix(cls, Q, lam: float = 0.0) -> "CovarianceModel":
        """Wrap an explicit symmetric positive definite matrix (``lam`` is bookkeeping only)."""
        Q = as_matrix(Q, "Q")
        if Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got {Q.shape}")
        Q = 0.5 * (Q + Q.T)
        w, E = _sorted_eigh(Q)
        if w[-1] <= 0 or w[-1] <= 1e-12 * w[0]:
            raise SingularCovariance(f"matrix is not numerically positive definite (min eigenvalue {w[-1]:.3e})")
        return _assemble(Q, float(lam), w, E, raw_min=float(w[-1]), n=0)


def _sorted_eigh(S: np.ndarray):
    w, E = np.linalg.eigh(S)
    order = np.argsort(w)[::-1]
    return w[order], E[:, order]


def _assemble(Q, lam, w, E, raw_min, n) -> CovarianceModel:
    Q_inv = (E / w) @ E.T
    Q_inv_sqrt = (E / np.sqrt(w)) @ E.T
    return CovarianceModel(
        Q=Q,
        lam=lam,
        eigenvalues=w,
        eigenvectors=E,
        Q_inv=0.5 * (Q_inv + Q_inv.T),
        Q_inv_sqrt=0.5 * (Q_inv_sqrt + Q_inv_sqrt.T),
        raw_min_eigenvalue=raw_min,
        n_samples=n,
    )


def build_covariance(features, lam: float = DEFAULT_LAMBDA) -> CovarianceModel:
    """Build ``Q = (1/n) Phi^T Phi + lam I`` and its spectral caches.

    Negative round-off eigenvalues of the empirical second moment are clamped
    to zero before ``lam`` is added.

    Raises:
        SingularCovariance: ``lam == 0`` and the empirical matrix is rank deficient.
        NonFiniteInput: the features contain NaN or infinity.
    """
    Phi = _features_array(features)
    lam = check_nonneg(lam, "lambda")
    n = Phi.shape[0]
    C = Phi.T @ Phi / n
    C = 0.5 * (C + C.T)
    raw, E = _sorted_eigh(C)
    if lam == 0.0 and not (raw[-1] > 1e-12 * max(raw[0], 0.0) and raw[-1] > 0):
        raise SingularCovariance(
            f"empirical covariance is singular (min eigenvalue {raw[-1]:.3e}); use lambda > 0"
        )
    w = np.maximum(raw, 0.0) + lam
    Q = C + lam * np.eye(C.shape[0])
    return _assemble(Q, lam, w, E, raw_min=float(raw[-1]), n=n)


def whiten(model: CovarianceModel, phi) -> np.ndarray:
    """Whitened vector(s) ``Q^{-1/2} phi``; accepts a single vector or row-stacked matrix."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 1:
        phi = as_vector(phi, model.dim, "phi")
        return model.Q_inv_sqrt @ phi
    if phi.ndim != 2 or phi.shape[1] != model.dim:
        raise DimensionMismatch(f"expected rows of dimension {model.dim}, got shape {phi.shape}")
    return phi @ model.Q_inv_sqrt


def natural_distance(model: CovarianceModel, phi, phi2) -> float:
    """Mahalanobis distance ``sqrt((phi - phi2)^T Q^{-1} (phi - phi2))``."""
    delta = as_vector(phi, model.dim, "phi") - as_vector(phi2, model.dim, "phi2")
    return float(np.linalg.norm(model.Q_inv_sqrt @ delta))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: list
    condition_number: float
    euclidean_amplification: list
    natural_amplification: list
    reduction_prediction: float
    raw_min_eigenvalue: float
    raw_condition_number: Optional[float]
    lam: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues,
            "condition_number": self.condition_number,
            "euclidean_amplification": self.euclidean_amplification,
            "natural_amplification": self.natural_amplification,
            "reduction_prediction": self.reduction_prediction,
            "raw_min_eigenvalue": self.raw_min_eigenvalue,
            "raw_condition_number": self.raw_condition_number,
            "lambda": self.lam,
        }

    def rows(self):
        """(k, lambda_k, 1/lambda_k, 1.0) tuples for plotting."""
        for k, (lam_k, amp) in enumerate(zip(self.eigenvalues, self.euclidean_amplification)):
            yield k, lam_k, amp, 1.0


def spectrum_report(model: CovarianceModel) -> SpectrumReport:
    w = model.eigenvalues
    kappa = model.condition_number
    raw_max = float(w[0] - model.lam)
    raw_min = model.raw_min_eigenvalue
    raw_kappa = raw_max / raw_min if raw_min > 0 else None
    return SpectrumReport(
        eigenvalues=[float(v) for v in w],
        condition_number=kappa,
        euclidean_amplification=[float(v) for v in 1.0 / w],
        natural_amplification=[1.0] * len(w),
        reduction_prediction=float(np.sqrt(kappa)),
        raw_min_eigenvalue=raw_min,
        raw_condition_number=raw_kappa,
        lam=model.lam,
    )


class NaturalWhitener(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` builds the covariance, ``transform`` whitens rows.

    Parameters
    ----------
    lam : float, default=1e-4
        Ridge added to the feature second-moment matrix.
    """

    def __init__(self, lam: float = DEFAULT_LAMBDA):
        self.lam = lam

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.model_ = build_covariance(X, self.lam)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return whiten(self.model_, as_matrix(X))

    def self_influence(self, X) -> np.ndarray:
        return np.sum(self.transform(X) ** 2, axis=1)

    def mahalanobis(self, X, Y: Sequence | None = None) -> np.ndarray:
        """Pairwise Natural distances between rows of ``X`` and ``Y`` (default ``X``)."""
        from scipy.spatial.distance import cdist

        A = self.transform(X)
        B = A if Y is None else self.transform(Y)
        return cdist(A, B)

    def spectrum_report(self) -> SpectrumReport:
        check_is_fitted(self, "model_")
        return spectrum_report(self.model_)
