"""Self-Influence anomaly scores and ranking metrics for the label-noise experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.metrics import precision_recall_curve, roc_curve
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix
from .convex import ConvexLossSpec, fit_convex
from .data_io import SynthKind, SynthSpec, generate_label_noise_dataset
from .exceptions import DimensionMismatch, InputError, SingleClass
from .geometry import DEFAULT_LAMBDA, CovarianceModel, FeatureMatrix, build_covariance
from .trak import SelfInfluenceRecord, self_influence_rows

DEFAULT_FRACTIONS = (0.05, 0.1, 0.2, 0.3)


def _scores_labels(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise DimensionMismatch(f"{s.size} scores for {y.size} labels")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    if y.all() or not y.any():
        raise SingleClass("both positive and negative labels are required")
    return s, y


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg) with ties counting one half."""
    s, y = _scores_labels(scores, labels)
    ranks = rankdata(s)  # average ranks give ties half credit
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _stable_descending(s: np.ndarray) -> np.ndarray:
    # ties keep input order
    return np.argsort(-s, kind="stable")


def average_precision(scores, labels) -> float:
    """Step-wise AP: mean precision at the rank of each positive (ties broken by input order)."""
    s, y = _scores_labels(scores, labels)
    hits = y[_stable_descending(s)]
    ranks = np.flatnonzero(hits) + 1
    precision_at_hit = np.arange(1, ranks.size + 1) / ranks
    return float(precision_at_hit.mean())


def topk_recall(scores, labels, fraction: float) -> float:
    """Share of positives among the top ``ceil(fraction * n)`` scores."""
    if not (0.0 < fraction <= 1.0):
        raise InputError(f"fraction must lie in (0, 1], got {fraction}")
    s, y = _scores_labels(scores, labels)
    k = math.ceil(fraction * s.size - 1e-12)
    top = _stable_descending(s)[:k]
    return float(y[top].sum() / y.sum())


def curve_points(scores, labels):
    """ROC ``(fpr, tpr, threshold)`` and PR ``(recall, precision)`` point lists."""
    s, y = _scores_labels(scores, labels)
    fpr, tpr, thr = roc_curve(y, s)
    precision, recall, _ = precision_recall_curve(y, s)
    roc = [(float(a), float(b), float(c)) for a, b, c in zip(fpr, tpr, thr)]
    pr = [(float(r), float(p)) for r, p in zip(recall[::-1], precision[::-1])]
    return roc, pr


def score_anomalies(model: CovarianceModel, features) -> list:
    """Raw (uncapped) Self-Influence for every row."""
    if isinstance(features, FeatureMatrix):
        Phi, ids = features.values, features.ids
    else:
        Phi = as_matrix(features, "features")
        ids = tuple(str(i) for i in range(Phi.shape[0]))
    si = self_influence_rows(model, Phi)
    return [SelfInfluenceRecord(i, float(v)) for i, v in zip(ids, si)]


@dataclass(frozen=True)
class AnomalyReport:
    auroc: float
    average_precision: float
    topk_recall: dict
    mean_separation: float
    corruption_rate: float
    n: int
    scores: np.ndarray = field(repr=False, default=None)
    labels: np.ndarray = field(repr=False, default=None)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "average_precision": self.average_precision,
            "topk_recall": {f"{k:g}": v for k, v in self.topk_recall.items()},
            "mean_separation": self.mean_separation,
            "corruption_rate": self.corruption_rate,
            "n": self.n,
            "config": self.config,
        }


def evaluate_scores(scores, labels, corruption_rate: float,
                    fractions: Sequence[float] = DEFAULT_FRACTIONS, config: Optional[dict] = None) -> AnomalyReport:
    s, y = _scores_labels(scores, labels)
    clean_mean = float(s[~y].mean())
    return AnomalyReport(
        auroc=auroc(s, y),
        average_precision=average_precision(s, y),
        topk_recall={float(f): topk_recall(s, y, f) for f in fractions},
        mean_separation=float(s[y].mean() / clean_mean) if clean_mean > 0 else float("inf"),
        corruption_rate=float(corruption_rate),
        n=int(s.size),
        scores=s,
        labels=y,
        config=dict(config or {}),
    )


def gradient_features(fit) -> np.ndarray:
    """Per-sample loss gradients at the fitted parameters (regularizer included)."""
    return np.asarray(fit.grads)


def label_noise_experiment(spec: SynthSpec, reg_strength: float = 1e-2, lam: float = DEFAULT_LAMBDA,
                           fractions: Sequence[float] = DEFAULT_FRACTIONS) -> AnomalyReport:
    """Flip labels, fit L2-logistic regression, score rows by gradient Self-Influence.

    Deterministic in ``spec`` (seed included).
    """
    if spec.kind is not SynthKind.TWO_CLUSTER:
        raise InputError(f"label-noise experiment needs a two_cluster spec, got {spec.kind.value!r}")
    data = generate_label_noise_dataset(spec)
    mask = data.flip_mask
    if not mask.any():
        raise SingleClass("no labels were flipped; nothing to detect")
    fit = fit_convex(data.X, data.y, ConvexLossSpec("logistic", reg_strength))
    phi = gradient_features(fit)
    cov = build_covariance(phi, lam)
    si = self_influence_rows(cov, phi)
    config = {"synth": spec.to_dict(), "reg_strength": float(reg_strength), "lambda": float(lam),
              "loss": "logistic", "features": "per-sample loss gradients at the fitted parameters"}
    return evaluate_scores(si, mask, spec.corruption_rate, fractions, config)


class SelfInfluenceDetector(OutlierMixin, BaseEstimator):
    """Outlier detector that flags rows with large Self-Influence.

    Parameters
    ----------
    lam : float, default=1e-4
    contamination : float, default=0.1
        Expected outlier share; sets ``threshold_`` as the matching training quantile.
    """

    def __init__(self, lam: float = DEFAULT_LAMBDA, contamination: float = 0.1):
        self.lam = lam
        self.contamination = contamination

    def fit(self, X, y=None):
        if not (0.0 < self.contamination < 0.5):
            raise InputError("contamination must lie in (0, 0.5)")
        X = as_matrix(X)
        self.covariance_ = build_covariance(X, self.lam)
        self.self_influence_ = self_influence_rows(self.covariance_, X)
        self.threshold_ = float(np.quantile(self.self_influence_, 1.0 - self.contamination))
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X) -> np.ndarray:
        """Negated Self-Influence, so that lower means more abnormal."""
        check_is_fitted(self, "covariance_")
        return -self_influence_rows(self.covariance_, as_matrix(X))

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X) + self.threshold_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) < 0, -1, 1)
