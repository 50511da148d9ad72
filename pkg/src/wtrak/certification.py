"""Ranking certification: disjoint-interval checks, frontiers over epsilon, metric comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import EmptyGrid, InputError, MissingSeries, MixedEpsilon, MixedMetric
from .geometry import SpectrumReport
from .trak import IntervalMatrix, Metric, RobustInterval

DEFAULT_PAIR_BUDGET = 2_000_000


def certify_pair(a: RobustInterval, b: RobustInterval) -> bool:
    """True iff the two intervals are disjoint; touching endpoints do not certify."""
    if a.metric != b.metric:
        raise MixedMetric(f"cannot compare {a.metric.value} and {b.metric.value} intervals")
    if a.epsilon != b.epsilon:
        raise MixedEpsilon(f"cannot compare intervals at epsilon {a.epsilon} and {b.epsilon}")
    return a.hi < b.lo or b.hi < a.lo


@dataclass(frozen=True)
class CertificationReport:
    epsilon_grid: list
    fraction_certified: dict  # metric value -> list of fractions, one per grid point
    pair_count: int
    pairs_per_test: int
    sampled: bool
    lipschitz_summary: dict
    reduction_ratio: Optional[float]
    per_test: dict = field(default_factory=dict, repr=False)

    @property
    def metrics(self):
        return list(self.fraction_certified)

    def to_dict(self) -> dict:
        return {
            "grid": list(self.epsilon_grid),
            "series": [{"metric": m, "fractions": list(f)} for m, f in self.fraction_certified.items()],
            "summary": {
                "pair_count": self.pair_count,
                "pairs_per_test": self.pairs_per_test,
                "sampled": self.sampled,
                "aggregation": "unweighted mean over test points",
                "lipschitz": self.lipschitz_summary,
                "reduction_ratio": self.reduction_ratio,
            },
        }

    def csv_rows(self):
        metrics = self.metrics
        header = ["epsilon"] + [f"{m}_frac" for m in metrics]
        rows = [[eps] + [self.fraction_certified[m][g] for m in metrics] for g, eps in enumerate(self.epsilon_grid)]
        return header, rows


def _pairs_for_test(nominal_row: np.ndarray, budget: Optional[int], rng) -> tuple:
    n = nominal_row.shape[0]
    total = n * (n - 1) // 2
    if budget is None or budget >= total:
        j, k = np.triu_indices(n, 1)
        return j, k, False
    # stratify by nominal gap: systematic sample from a gap-sorted random pool
    pool = min(total, 4 * budget)
    j = (rng.uniform(pool) * n).astype(np.int64)
    k = (rng.uniform(pool) * (n - 1)).astype(np.int64)
    k = np.where(k >= j, k + 1, k)
    gap = np.abs(nominal_row[j] - nominal_row[k])
    order = np.argsort(gap, kind="stable")
    pick = order[np.linspace(0, pool - 1, budget).astype(np.int64)]
    return j[pick], k[pick], True


def _fractions(nominal_row, lip_row, j, k, grid: np.ndarray) -> np.ndarray:
    half = grid[:, None] * lip_row[None, :]
    lo = nominal_row[None, :] - half
    hi = nominal_row[None, :] + half
    ok = (hi[:, j] < lo[:, k]) | (hi[:, k] < lo[:, j])
    return ok.mean(axis=1)


def certification_frontier(series: Mapping | Sequence[IntervalMatrix], grid: Sequence[float],
                           pair_budget: Optional[int] = DEFAULT_PAIR_BUDGET, seed: int = 0) -> CertificationReport:
    """Fraction of certified ranking pairs at every grid radius, per metric.

    ``series`` holds one :class:`IntervalMatrix` per metric (only its nominal
    scores and Lipschitz constants are used).  Every test row contributes the
    fraction of its training pairs with disjoint intervals; fractions are
    averaged over test rows.  When ``m * C(n, 2)`` exceeds ``pair_budget`` each
    test row is evaluated on a gap-stratified sample of pairs instead.
    """
    from .data_io import CounterRNG

    if isinstance(series, Mapping):
        mats = list(series.values())
    else:
        mats = list(series)
    if not mats:
        raise MissingSeries("no interval series given")
    grid = np.asarray(list(grid), dtype=np.float64)
    if grid.size == 0:
        raise EmptyGrid("epsilon grid is empty")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0) or not np.all(np.isfinite(grid)):
        raise InputError("epsilon grid must be finite, non-negative and sorted ascending")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise InputError("all series must cover the same test x train block")
    m_test, n = shape
    if n < 2:
        raise InputError("need at least two training scores per test point")
    total = n * (n - 1) // 2
    per_test_budget = None
    if pair_budget is not None and m_test * total > pair_budget:
        per_test_budget = max(1, int(pair_budget) // m_test)

    fractions, per_test, lip_summary = {}, {}, {}
    sampled, pairs_per_test = False, total
    for mat in mats:
        rng = CounterRNG(seed, stream=0xCE27)
        rows = []
        for t in range(m_test):
            j, k, was_sampled = _pairs_for_test(mat.nominal[t], per_test_budget, rng)
            sampled |= was_sampled
            pairs_per_test = len(j)
            rows.append(_fractions(mat.nominal[t], mat.lipschitz[t], j, k, grid))
        rows = np.array(rows)
        per_test[mat.metric.value] = rows
        fractions[mat.metric.value] = [float(v) for v in rows.mean(axis=0)]
        lip_summary[mat.metric.value] = {"L_max": float(mat.lipschitz.max()), "L_mean": float(mat.lipschitz.mean())}
    ratio = None
    if Metric.NATURAL.value in lip_summary and Metric.EUCLIDEAN.value in lip_summary:
        nat = lip_summary[Metric.NATURAL.value]["L_max"]
        ratio = lip_summary[Metric.EUCLIDEAN.value]["L_max"] / nat if nat > 0 else None
    return CertificationReport(
        epsilon_grid=[float(e) for e in grid],
        fraction_certified=fractions,
        pair_count=int(m_test * pairs_per_test),
        pairs_per_test=int(pairs_per_test),
        sampled=sampled,
        lipschitz_summary=lip_summary,
        reduction_ratio=ratio,
        per_test=per_test,
    )


def compare_metrics(report: CertificationReport, spectrum: Optional[SpectrumReport] = None,
                    reference_epsilon: Optional[float] = None):
    """Natural-vs-Euclidean summary table.

    Returns ``(text, data)``.  The reference radius defaults to the grid point
    where the Natural fraction exceeds the Euclidean one by the widest margin.
    """
    nat, euc = Metric.NATURAL.value, Metric.EUCLIDEAN.value
    if nat not in report.fraction_certified or euc not in report.fraction_certified:
        raise MissingSeries("comparison needs both natural and euclidean series")
    grid = np.asarray(report.epsilon_grid)
    f_nat = np.asarray(report.fraction_certified[nat])
    f_euc = np.asarray(report.fraction_certified[euc])
    if reference_epsilon is None:
        g = int(np.argmax(f_nat - f_euc))
    else:
        g = int(np.argmin(np.abs(grid - reference_epsilon)))
    L_euc = report.lipschitz_summary[euc]["L_max"]
    L_nat = report.lipschitz_summary[nat]["L_max"]
    data = {
        "L_euclidean": L_euc,
        "L_natural": L_nat,
        "reduction_ratio": report.reduction_ratio,
        "reference_epsilon": float(grid[g]),
        "certified_natural": float(f_nat[g]),
        "certified_euclidean": float(f_euc[g]),
    }
    if spectrum is not None:
        data["condition_number"] = spectrum.condition_number
        data["predicted_ratio"] = spectrum.reduction_prediction
        data["agreement_factor"] = (report.reduction_ratio / spectrum.reduction_prediction
                                    if report.reduction_ratio is not None else None)
    lines = [
        f"{'':24s}{'Euclidean':>14s}{'Natural':>14s}",
        f"{'Lipschitz constant L':24s}{L_euc:14.4g}{L_nat:14.4g}",
        f"{'Certified pairs (%)':24s}{100 * f_euc[g]:14.1f}{100 * f_nat[g]:14.1f}",
        f"{'Sensitivity reduction':24s}{'-':>14s}{(report.reduction_ratio or float('nan')):13.1f}x",
        f"reference epsilon = {grid[g]:.4g}",
    ]
    if spectrum is not None:
        lines.append(f"condition number = {spectrum.condition_number:.4g}, "
                     f"sqrt(kappa) = {spectrum.reduction_prediction:.4g}, "
                     f"measured/predicted = {data['agreement_factor']:.3g}")
    return "\n".join(lines), data
