import itertools

import numpy as np
import pytest

from wtrak import (
    SynthSpec,
    batch_intervals,
    certification_frontier,
    certify_pair,
    compare_metrics,
    fit_attribution,
    generate_spectrum_features,
    spectrum_report,
)
from wtrak.exceptions import EmptyGrid, MissingSeries, MixedEpsilon, MixedMetric
from wtrak.trak import IntervalMatrix, Metric, RobustInterval


def iv(lo, hi, eps=0.1, metric=Metric.NATURAL):
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    return RobustInterval.around(mid, half / eps, eps, metric)


def test_certify_pair_examples():
    assert certify_pair(iv(1, 2), iv(3, 4))
    assert not certify_pair(iv(1, 3), iv(2, 4))
    assert not certify_pair(iv(1, 2), iv(2, 3))
    a, b = iv(0, 1), iv(5, 6)
    assert certify_pair(a, b) == certify_pair(b, a)
    assert not certify_pair(a, a)
    with pytest.raises(MixedMetric):
        certify_pair(iv(1, 2), iv(3, 4, metric=Metric.EUCLIDEAN))
    with pytest.raises(MixedEpsilon):
        certify_pair(iv(1, 2), iv(3, 4, eps=0.2))


def block(nominal, lip, metric=Metric.NATURAL):
    nominal, lip = np.atleast_2d(nominal).astype(float), np.atleast_2d(lip).astype(float)
    m, n = nominal.shape
    return IntervalMatrix(nominal, lip, 0.0, metric, tuple(map(str, range(m))), tuple(map(str, range(n))))


def test_frontier_trivial_limits():
    nominal = np.array([[0.0, 1.0, 3.0, 7.0]])
    L = np.ones_like(nominal)
    max_gap = 7.0
    rep = certification_frontier({"natural": block(nominal, L)}, [0.0, max_gap / 2 + 1e-9])
    assert rep.fraction_certified["natural"] == [1.0, 0.0]
    tied = certification_frontier([block([[1.0, 1.0, 2.0]], [[1.0, 1.0, 1.0]])], [0.0])
    assert tied.fraction_certified["natural"][0] == pytest.approx(2 / 3)
    with pytest.raises(EmptyGrid):
        certification_frontier([block(nominal, L)], [])


def test_frontier_matches_pairwise_oracle(rng):
    nominal = rng.standard_normal((3, 12))
    L = rng.uniform(0.5, 2.0, (3, 12))
    grid = [0.0, 0.01, 0.05, 0.2, 1.0]
    rep = certification_frontier([block(nominal, L)], grid)
    for g, eps in enumerate(grid):
        per_test = []
        for t in range(3):
            ivs = [RobustInterval.around(nominal[t, i], L[t, i], eps, Metric.NATURAL) for i in range(12)]
            per_test.append(np.mean([certify_pair(a, b) for a, b in itertools.combinations(ivs, 2)]))
        assert rep.fraction_certified["natural"][g] == pytest.approx(np.mean(per_test), abs=1e-15)
    assert rep.pair_count == 3 * 66 and not rep.sampled


def test_frontier_monotone_exactly(rng):
    nominal = rng.standard_normal((4, 300))
    L = rng.uniform(0.1, 3.0, (4, 300))
    grid = np.concatenate([[0.0], np.geomspace(1e-5, 10, 60)])
    fr = certification_frontier([block(nominal, L)], grid).fraction_certified["natural"]
    assert all(a >= b for a, b in zip(fr, fr[1:]))


def test_sampled_frontier_close_to_exhaustive(rng):
    nominal = rng.standard_normal((2, 400))
    L = rng.uniform(0.5, 1.5, (2, 400))
    grid = [0.0, 0.01, 0.1, 0.5]
    full = certification_frontier([block(nominal, L)], grid, pair_budget=None)
    sampled = certification_frontier([block(nominal, L)], grid, pair_budget=20000, seed=3)
    assert sampled.sampled and sampled.pairs_per_test == 10000
    assert np.allclose(sampled.fraction_certified["natural"], full.fraction_certified["natural"], atol=0.03)
    again = certification_frontier([block(nominal, L)], grid, pair_budget=20000, seed=3)
    assert again.fraction_certified == sampled.fraction_certified


def test_report_serialization():
    rep = certification_frontier({"natural": block([[0.0, 1.0]], [[1.0, 1.0]]),
                                  "euclidean": block([[0.0, 1.0]], [[2.0, 2.0]], Metric.EUCLIDEAN)}, [0.0, 0.3])
    doc = rep.to_dict()
    assert doc["grid"] == [0.0, 0.3]
    assert [s["metric"] for s in doc["series"]] == ["natural", "euclidean"]
    assert doc["summary"]["reduction_ratio"] == pytest.approx(2.0)
    header, rows = rep.csv_rows()
    assert header == ["epsilon", "natural_frac", "euclidean_frac"]
    assert rows == [[0.0, 1.0, 1.0], [0.3, 1.0, 0.0]]


def _both(model, test):
    return {m: batch_intervals(model, test, 0.0, m) for m in ("natural", "euclidean")}


def test_compare_metrics_identity_fixture():
    model = fit_attribution(np.eye(2), lam=0.5)  # Q = I exactly
    test = np.array([[0.6, 0.2], [-0.3, 0.5]])
    rep = certification_frontier(_both(model, test), [0.0, 0.01, 0.1])
    text, data = compare_metrics(rep, spectrum_report(model.covariance))
    assert data["reduction_ratio"] == pytest.approx(1.0, abs=1e-9)
    assert data["agreement_factor"] == pytest.approx(1.0, abs=1e-9)
    assert "Sensitivity reduction" in text
    with pytest.raises(MissingSeries):
        compare_metrics(certification_frontier({"natural": _both(model, test)["natural"]}, [0.0]))


def test_compare_metrics_weak_direction():
    # Q = diag(1, 1e-4) exactly; test features lie along the weak axis
    train = np.sqrt(2) * np.array([[1.0, 0.0], [0.0, 1e-2]])
    model = fit_attribution(train, lam=0.0)
    assert np.allclose(model.covariance.Q, np.diag([1.0, 1e-4]))
    test = np.array([[0.0, 1e-2], [0.0, -5e-3]])
    rep = certification_frontier(_both(model, test), [0.0])
    _, data = compare_metrics(rep, spectrum_report(model.covariance))
    assert 0.3 * 100 <= data["reduction_ratio"] <= 3 * 100


def test_reduction_ratio_at_least_one_on_ill_conditioned_fixtures():
    for seed in range(20):
        kappa = 10.0 ** (1 + seed % 5)
        train = generate_spectrum_features(SynthSpec("spectrum", 300, 8, kappa=kappa, seed=seed), stream=0)
        test = generate_spectrum_features(SynthSpec("spectrum", 10, 8, kappa=kappa, seed=seed), stream=1)
        model = fit_attribution(train)
        rep = certification_frontier(_both(model, test), [0.0])
        assert rep.reduction_ratio >= 1.0
