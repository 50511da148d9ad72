"""Command-line entry point: ``wtrak {synth,spectrum,trak,certify,wrif,anomaly}``.

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .anomaly import DEFAULT_FRACTIONS, curve_points, label_noise_experiment
from .certification import DEFAULT_PAIR_BUDGET, certification_frontier, compare_metrics
from .convex import ConvexLossSpec, coverage_table, fit_convex, loo_wasserstein_bound, wrif_intervals
from .data_io import (
    SynthSpec,
    generate_label_noise_dataset,
    generate_spectrum_features,
    load_dataset,
    load_features,
    save_dataset,
    save_features,
    write_csv,
    write_json,
)
from .exceptions import InputError, NumericalError
from .geometry import DEFAULT_LAMBDA, build_covariance, spectrum_report
from .trak import Metric, batch_intervals, fit_attribution, resolve_threads

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
DEFAULT_GRID = (0.0,) + tuple(float(v) for v in np.geomspace(1e-6, 1.0, 31))


def _metrics(choice: str):
    return [Metric.NATURAL, Metric.EUCLIDEAN] if choice == "both" else [Metric.parse(choice)]


def _grid(text: str | None):
    if text is None:
        return list(DEFAULT_GRID)
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad --grid value: {exc}") from exc
    if not grid:
        raise InputError("--grid is empty")
    return sorted(grid)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _common(args) -> dict:
    return {"lambda": args.lam, "seed": args.seed, "threads": resolve_threads(args.threads)}


# --------------------------------------------------------------------------- subcommands


def cmd_synth(args) -> int:
    spec = SynthSpec(args.kind, args.n, args.d, args.kappa, args.separation, args.corruption_rate, args.seed)
    out = _outdir(args.out)
    files, extra = [], {}
    if spec.kind.value == "spectrum":
        suffix = ".csv" if args.format == "csv" else ".bin"
        save_features(out / f"train{suffix}", generate_spectrum_features(spec, stream=0))
        files.append(f"train{suffix}")
        if args.n_test:
            test_spec = SynthSpec(spec.kind, args.n_test, spec.d, spec.kappa, seed=spec.seed)
            save_features(out / f"test{suffix}", generate_spectrum_features(test_spec, stream=1))
            files.append(f"test{suffix}")
    else:
        data = generate_label_noise_dataset(spec, stream=0)
        save_dataset(out / "train.csv", data)
        files.append("train.csv")
        if args.n_test:
            test_spec = SynthSpec(spec.kind, args.n_test, spec.d, separation=spec.separation, seed=spec.seed)
            save_dataset(out / "test.csv", generate_label_noise_dataset(test_spec, stream=1))
            files.append("test.csv")
        extra["flipped"] = data.flipped
    report = dict(extra, command="synth", spec=spec.to_dict(), n_test=args.n_test, files=files)
    write_json(out / "synth.json", report)
    print(f"synth {spec.kind.value}: n={spec.n} d={spec.d} seed={spec.seed} -> {', '.join(files)}")
    return 0


def cmd_spectrum(args) -> int:
    features = load_features(args.features)
    report = spectrum_report(build_covariance(features, args.lam))
    out = _outdir(args.out)
    write_json(out / "spectrum.json", {"command": "spectrum", "config": _common(args), "input": str(args.features),
                                       "n": features.n, "d": features.d, "report": report.to_dict()})
    write_csv(out / "spectrum.csv", ["k", "eigenvalue", "euclidean_amplification", "natural_amplification"],
              list(report.rows()))
    print(f"d={features.d} kappa={report.condition_number:.4g} "
          f"max amplification={max(report.euclidean_amplification):.4g} "
          f"predicted reduction sqrt(kappa)={report.reduction_prediction:.4g}")
    return 0


def cmd_trak(args) -> int:
    train, test = load_features(args.train), load_features(args.test)
    model = fit_attribution(train, args.lam)
    out = _outdir(args.out)
    summary, columns = {}, []
    for metric in _metrics(args.metric):
        block = batch_intervals(model, test, args.epsilon, metric, cap=not args.no_cap, n_jobs=args.threads)
        summary[metric.value] = {"L_max": float(block.lipschitz.max()), "L_mean": float(block.lipschitz.mean())}
        columns.append(block)
    header = ["test_id", "train_id", "score"]
    for block in columns:
        header += [f"{block.metric.value}_lo", f"{block.metric.value}_hi", f"{block.metric.value}_lipschitz"]
    rows = []
    nominal = columns[0].nominal
    for t, tid in enumerate(test.ids):
        for i, iid in enumerate(train.ids):
            row = [tid, iid, float(nominal[t, i])]
            for block in columns:
                row += [float(block.lo[t, i]), float(block.hi[t, i]), float(block.lipschitz[t, i])]
            rows.append(row)
    write_csv(out / "trak.csv", header, rows)
    si_test = np.sum((test.values @ model.covariance.Q_inv_sqrt) ** 2, axis=1)
    cap = 2.0 * model.si_train_max
    write_json(out / "trak.json", {
        "command": "trak",
        "config": dict(_common(args), epsilon=args.epsilon, metric=args.metric, cap_ood=not args.no_cap),
        "shape": [test.n, train.n],
        "r_whit": model.r_whit,
        "r_euc": model.r_euc,
        "si_train_max": model.si_train_max,
        "ood_test_rows": int(np.sum(si_test > cap)),
        "lipschitz": summary,
    })
    print(f"{test.n} x {train.n} scores, epsilon={args.epsilon:g}")
    for name, s in summary.items():
        print(f"  {name:10s} L_max={s['L_max']:.4g} L_mean={s['L_mean']:.4g}")
    return 0


def cmd_certify(args) -> int:
    train, test = load_features(args.train), load_features(args.test)
    model = fit_attribution(train, args.lam)
    grid = _grid(args.grid)
    series = {m.value: batch_intervals(model, test, 0.0, m, cap=not args.no_cap, n_jobs=args.threads)
              for m in _metrics(args.metric)}
    report = certification_frontier(series, grid, args.pair_budget, args.seed)
    out = _outdir(args.out)
    doc = report.to_dict()
    doc["config"] = dict(_common(args), metric=args.metric, pair_budget=args.pair_budget, cap_ood=not args.no_cap)
    write_json(out / "frontier.json", doc)
    header, rows = report.csv_rows()
    write_csv(out / "frontier.csv", header, rows)
    if args.metric == "both":
        text, data = compare_metrics(report, spectrum_report(model.covariance), args.reference_epsilon)
        write_json(out / "comparison.json", dict(data, config=doc["config"]))
        print(text)
    else:
        for eps, frac in zip(report.epsilon_grid, report.fraction_certified[args.metric]):
            print(f"epsilon={eps:.3g} certified={frac:.4f}")
    return 0


def cmd_wrif(args) -> int:
    data = load_dataset(args.dataset)
    spec = ConvexLossSpec(args.loss, args.reg_strength)
    fit = fit_convex(data.X, data.y, spec, label_weight=args.label_weight)
    if args.test:
        test = load_dataset(args.test)
        X_test, y_test, test_ids = test.X, test.y, test.ids
    else:
        k = min(args.n_test, data.n)
        X_test, y_test, test_ids = data.X[:k], data.y[:k], data.ids[:k]
    radius = loo_wasserstein_bound(fit.points)
    eps = radius if args.epsilon is None else args.epsilon
    if args.loo_check:
        cov = coverage_table(fit, eps, X_test, y_test, args.pairs_sample, args.seed, args.threads)
        block = cov.intervals
    else:
        cov = None
        block = wrif_intervals(fit, X_test, y_test, eps, args.pairs_sample, args.seed, args.threads)
    intervals = []
    for t, tid in enumerate(test_ids):
        for i, iid in enumerate(data.ids):
            entry = {"test_id": tid, "train_id": iid, "influence": block.nominal[t, i],
                     "lo": block.lo[t, i], "hi": block.hi[t, i], "lipschitz": block.lipschitz[t, i]}
            if cov is not None:
                entry["loo_influence"] = cov.loo_values[t, i]
                entry["covered"] = bool(cov.inside[t, i])
            intervals.append(entry)
    report = {
        "command": "wrif",
        "config": dict(_common(args), loss=args.loss, reg_strength=args.reg_strength,
                       label_weight=args.label_weight, pairs_sample=args.pairs_sample, epsilon=eps,
                       epsilon_source="flag" if args.epsilon is not None else "diam/n"),
        "theta_hat": fit.theta_hat,
        "newton_iterations": fit.n_iter,
        "diameter": fit.diameter,
        "loo_radius": radius,
        "intervals": intervals,
    }
    if cov is not None:
        report["coverage"] = cov.to_dict()
    write_json(_outdir(args.out) / "wrif.json", report)
    print(f"{len(test_ids)} x {data.n} intervals at epsilon={eps:.4g} (diam/n={radius:.4g})")
    if cov is not None:
        print(f"leave-one-out coverage: {cov.fraction:.4f}")
    return 0


def cmd_anomaly(args) -> int:
    spec = SynthSpec("two_cluster", args.n, args.d, separation=args.separation,
                     corruption_rate=args.corruption_rate, seed=args.seed)
    report = label_noise_experiment(spec, args.reg_strength, args.lam, DEFAULT_FRACTIONS)
    out = _outdir(args.out)
    doc = report.to_dict()
    doc["command"] = "anomaly"
    doc["config"]["threads"] = resolve_threads(args.threads)
    write_json(out / "anomaly.json", doc)
    roc, pr = curve_points(report.scores, report.labels)
    write_csv(out / "roc.csv", ["fpr", "tpr", "threshold"], roc)
    write_csv(out / "pr.csv", ["recall", "precision"], pr)
    print(f"AUROC={report.auroc:.4f} AP={report.average_precision:.4f} "
          f"separation={report.mean_separation:.2f}x top20%={report.topk_recall[0.2]:.3f}")
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                        help="covariance regularization (default: %(default)g)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads (fallback: $WTRAK_THREADS)")

    parser = argparse.ArgumentParser(prog="wtrak", description="Certified data attribution toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic features or a labeled dataset")
    p.add_argument("--kind", choices=["spectrum", "two_cluster"], default="spectrum")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--corruption-rate", type=float, default=0.0)
    p.add_argument("--n-test", type=int, default=0, help="also write a test set drawn from a separate stream")
    p.add_argument("--format", choices=["bin", "csv"], default="bin")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrum", parents=[common], help="covariance spectrum and amplification factors")
    p.add_argument("features")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trak", parents=[common], help="TRAK scores with certified intervals")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--metric", choices=["natural", "euclidean", "both"], default="both")
    p.add_argument("--no-cap", action="store_true", help="disable the test-side Self-Influence cap")
    p.set_defaults(func=cmd_trak)

    p = sub.add_parser("certify", parents=[common], help="certification frontier over an epsilon grid")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--grid", default=None, help="comma-separated epsilons (default: 0 and 31 log-spaced in [1e-6, 1])")
    p.add_argument("--metric", choices=["natural", "euclidean", "both"], default="both")
    p.add_argument("--pair-budget", type=int, default=DEFAULT_PAIR_BUDGET)
    p.add_argument("--reference-epsilon", type=float, default=None)
    p.add_argument("--no-cap", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("wrif", parents=[common], help="Wasserstein-robust influence intervals for convex models")
    p.add_argument("dataset")
    p.add_argument("--test", default=None, help="test dataset CSV (default: first --n-test training rows)")
    p.add_argument("--n-test", type=int, default=10)
    p.add_argument("--loss", choices=["logistic", "ridge"], default="logistic")
    p.add_argument("--reg-strength", type=float, default=1e-2)
    p.add_argument("--label-weight", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=None, help="default: diam/n")
    p.add_argument("--pairs-sample", type=int, default=None)
    p.add_argument("--loo-check", action="store_true", help="retrain without each point and report coverage")
    p.set_defaults(func=cmd_wrif)

    p = sub.add_parser("anomaly", parents=[common], help="label-noise detection with Self-Influence")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--corruption-rate", type=float, default=0.1)
    p.add_argument("--reg-strength", type=float, default=1e-2)
    p.set_defaults(func=cmd_anomaly)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"wtrak {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"wtrak {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
