"""Certified data attribution: TRAK scores and influence functions with Wasserstein robustness intervals."""

__version__ = "0.1.0"

from .anomaly import (  # noqa: E402
    AnomalyReport,
    SelfInfluenceDetector,
    auroc,
    average_precision,
    label_noise_experiment,
    score_anomalies,
    topk_recall,
)
from .certification import CertificationReport, certification_frontier, certify_pair, compare_metrics  # noqa: E402
from .convex import (  # noqa: E402
    ConvexLossSpec,
    ConvexModelFit,
    RobustInfluence,
    SensitivityEval,
    coverage_check,
    fit_convex,
    loo_influence_oracle,
    loo_wasserstein_bound,
    sensitivity_kernel,
    wrif_interval,
)
from .data_io import (  # noqa: E402
    CounterRNG,
    LabeledDataset,
    SynthSpec,
    generate_label_noise_dataset,
    generate_spectrum_features,
    load_dataset,
    load_features,
    save_dataset,
    save_features,
)
from .exceptions import InputError, NumericalError, WTrakError  # noqa: E402
from .geometry import (  # noqa: E402
    CovarianceModel,
    FeatureMatrix,
    NaturalWhitener,
    SpectrumReport,
    build_covariance,
    natural_distance,
    spectrum_report,
    whiten,
)
from .trak import (  # noqa: E402
    WTRAK,
    AttributionModel,
    IntervalMatrix,
    Metric,
    RobustInterval,
    batch_intervals,
    cap_ood,
    fit_attribution,
    self_influence,
    spectral_decompose_trak,
    trak_score,
    wtrak_interval,
)

__all__ = [name for name in dir() if not name.startswith("_")]
