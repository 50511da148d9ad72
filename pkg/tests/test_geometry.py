import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from wtrak import (
    CovarianceModel,
    FeatureMatrix,
    NaturalWhitener,
    SynthSpec,
    build_covariance,
    generate_spectrum_features,
    natural_distance,
    spectrum_report,
    whiten,
)
from wtrak.exceptions import (
    DimensionMismatch,
    InputError,
    NegativeInput,
    NonFiniteInput,
    SingularCovariance,
)


def dense_Q(Phi, lam):
    return Phi.T @ Phi / Phi.shape[0] + lam * np.eye(Phi.shape[1])


def test_feature_matrix_defaults_and_validation():
    fm = FeatureMatrix(np.ones((3, 2)))
    assert fm.ids == ("0", "1", "2") and fm.n == 3 and fm.d == 2
    with pytest.raises(NonFiniteInput):
        FeatureMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(InputError):
        FeatureMatrix(np.ones((2, 2)), ids=("a", "a"))
    with pytest.raises(DimensionMismatch):
        FeatureMatrix(np.ones(3))
    with pytest.raises(ValueError):
        fm.values[0, 0] = 5.0


def test_orthonormal_rows_small_examples():
    rows = np.eye(2)
    assert np.allclose(build_covariance(rows, 0.5).Q, np.eye(2), atol=1e-15)
    model = build_covariance(rows, 0.0)
    assert np.allclose(model.Q, 0.5 * np.eye(2))
    assert model.condition_number == pytest.approx(1.0)


def test_covariance_matches_dense_oracle(rng):
    Phi = rng.standard_normal((50, 6)) * np.array([3, 1, 1, 0.1, 0.01, 1e-3])
    model = build_covariance(Phi, 1e-4)
    Q = dense_Q(Phi, 1e-4)
    assert np.allclose(model.Q, Q, rtol=1e-12, atol=1e-14)
    kappa = model.condition_number
    assert np.max(np.abs(model.Q @ model.Q_inv - np.eye(6))) <= 1e-8 * kappa
    assert np.max(np.abs(model.Q_inv_sqrt @ model.Q @ model.Q_inv_sqrt - np.eye(6))) <= 1e-8 * kappa
    assert np.all(model.eigenvalues >= 1e-4 - 1e-10)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    recon = (model.eigenvectors * model.eigenvalues) @ model.eigenvectors.T
    assert np.linalg.norm(recon - Q) <= 1e-9 * np.linalg.norm(Q)
    assert np.allclose(model.Q_inv, np.linalg.inv(Q), rtol=1e-8)


def test_prescribed_spectrum_condition_number(rng):
    Phi = rng.standard_normal((200, 2)) * np.sqrt([1.0, 1e-4])
    model = build_covariance(Phi, 1e-4)
    target = (1 + 1e-4) / 2e-4
    assert 0.3 * target <= model.condition_number <= 3 * target
    w = np.linalg.eigvalsh(dense_Q(Phi, 1e-4))
    assert model.condition_number == pytest.approx(w[-1] / w[0], rel=1e-10)


def test_singular_and_invalid_inputs():
    with pytest.raises(SingularCovariance):
        build_covariance(np.array([[1.0, 1.0], [2.0, 2.0]]), 0.0)
    with pytest.raises(NonFiniteInput):
        build_covariance(np.array([[1.0, np.inf]]), 1e-4)
    with pytest.raises(NegativeInput):
        build_covariance(np.eye(2), -1.0)
    with pytest.raises(SingularCovariance):
        CovarianceModel.from_matrix(np.diag([1.0, 0.0]))


def test_regularization_never_increases_kappa(rng):
    Phi = rng.standard_normal((30, 5)) * np.logspace(0, -3, 5)
    kappas = [build_covariance(Phi, lam).condition_number for lam in (1e-8, 1e-6, 1e-4, 1e-2, 1.0)]
    assert all(a >= b for a, b in zip(kappas, kappas[1:]))


def test_whiten_examples(rng):
    eye = CovarianceModel.from_matrix(np.eye(2))
    assert np.allclose(whiten(eye, [3.0, 4.0]), [3.0, 4.0])
    diag = CovarianceModel.from_matrix(np.diag([4.0, 1.0]))
    assert np.allclose(whiten(diag, [2.0, 0.0]), [1.0, 0.0])
    A = rng.standard_normal((5, 5))
    model = CovarianceModel.from_matrix(A @ A.T + 0.1 * np.eye(5))
    phi = rng.standard_normal(5)
    oracle = phi @ np.linalg.solve(model.Q, phi)
    assert np.sum(whiten(model, phi) ** 2) == pytest.approx(oracle, rel=1e-10)
    with pytest.raises(DimensionMismatch):
        whiten(model, np.ones(3))


def test_natural_distance_examples():
    eye = CovarianceModel.from_matrix(np.eye(2))
    assert natural_distance(eye, [1, 0], [0, 1]) == pytest.approx(np.sqrt(2))
    assert natural_distance(eye, [1, 2], [1, 2]) == 0.0
    weak = CovarianceModel.from_matrix(np.diag([1e-4, 1.0]))
    assert natural_distance(weak, [1e-2, 0], [0, 0]) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DimensionMismatch):
        natural_distance(eye, [1, 0, 0], [1, 0])


_vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(_vec, _vec, _vec)
def test_natural_distance_is_a_metric(a, b, c):
    model = CovarianceModel.from_matrix(np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.02]]))
    dab, dbc, dac = (natural_distance(model, a, b), natural_distance(model, b, c), natural_distance(model, a, c))
    assert dac <= dab + dbc + 1e-9 * (1 + dab + dbc)
    assert dab == pytest.approx(natural_distance(model, b, a), rel=1e-12, abs=1e-12)
    # whitening is an isometry onto Euclidean space
    eu = np.linalg.norm(whiten(model, a) - whiten(model, b))
    assert dab == pytest.approx(eu, rel=1e-10, abs=1e-12)


def test_spectrum_report_examples():
    rep = spectrum_report(CovarianceModel.from_matrix(np.eye(3)))
    assert rep.condition_number == 1.0 and rep.euclidean_amplification == [1.0] * 3
    rep = spectrum_report(CovarianceModel.from_matrix(np.diag([1.0, 1e-4])))
    assert rep.condition_number == pytest.approx(1e4)
    assert rep.euclidean_amplification == pytest.approx([1.0, 1e4])
    assert rep.natural_amplification == [1.0, 1.0]
    assert rep.reduction_prediction == pytest.approx(100.0)
    assert list(rep.rows())[1] == (1, pytest.approx(1e-4), pytest.approx(1e4), 1.0)


def test_spectrum_report_kappa_1e6():
    # exact second moment diag(1, ..., 1e-6): orthogonal rows scaled to the target spectrum
    w = np.logspace(0, -6, 8)
    Phi = np.diag(np.sqrt(8 * w))
    rep = spectrum_report(build_covariance(Phi, 0.0))
    assert rep.condition_number == pytest.approx(1e6, rel=1e-9)
    assert rep.reduction_prediction == pytest.approx(1e3, rel=1e-9)
    assert all(a <= b for a, b in zip(rep.euclidean_amplification, rep.euclidean_amplification[1:]))
    assert rep.raw_condition_number == pytest.approx(1e6, rel=1e-9)


def test_natural_whitener_estimator(rng):
    X = generate_spectrum_features(SynthSpec("spectrum", 500, 4, kappa=100, seed=3)).values
    est = NaturalWhitener(lam=0.0).fit(X)
    assert clone(est).get_params() == {"lam": 0.0}
    W = est.transform(X)
    assert np.allclose(W.T @ W / X.shape[0], np.eye(4), atol=1e-10)
    assert np.allclose(est.self_influence(X), np.sum(W ** 2, axis=1))
    D = est.mahalanobis(X[:5])
    assert D[1, 3] == pytest.approx(natural_distance(est.model_, X[1], X[3]), rel=1e-10)
    assert est.spectrum_report().condition_number >= 1.0
