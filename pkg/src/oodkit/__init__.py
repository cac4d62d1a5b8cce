"""Out-of-distribution supervisors and evaluation over activation dumps."""

from .dumpio import (
    ActivationDump,
    DumpManifest,
    Origin,
    SampleRecord,
    Split,
    read_csv_dump,
    read_dump,
    write_csv_dump,
    write_dump,
)
from .metrics import (
    CurveSet,
    Fnr95Mode,
    LabeledScore,
    MetricReport,
    RateKind,
    auprc,
    auroc,
    build_curves,
    coverage_breakpoints,
    full_report,
    rate_at,
)
from .openmax import (
    DistanceMetric,
    OmegaMode,
    OpenMaxModel,
    OpenMaxParams,
    RevisedVector,
    WeibullClassModel,
    class_distance,
    fit_openmax,
    load_model,
    openmax_predict,
    openmax_score_dump,
    recalibrate,
    save_model,
    weibull_cdf,
)
from .supervisors import (
    ScoredSample,
    SupervisorConfig,
    Verdict,
    baseline_predict,
    baseline_score,
    baseline_score_dump,
    softmax,
)
from .synth import SyntheticSpec, generate
from .weibull import fit_weibull_mle

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
