"""Threshold-sweep curves and scalar detection metrics over scored samples.

Outliers are the positive class throughout. All metrics depend only on the
ordering (and tie structure) of the anomaly scores, never on their values,
so any strictly increasing rescaling of the scores leaves every metric
unchanged.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np


class MetricsError(ValueError):
    pass


class SingleClassError(MetricsError):
    pass


@dataclass(frozen=True)
class LabeledScore:
    """One sample's anomaly score with the ground truth needed for metrics.

    ``inlier_correct`` records whether the classifier's prediction matched
    the true label; outliers have no label and are never correct.
    """

    anomaly: float
    is_outlier: bool
    inlier_correct: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.anomaly <= 1.0) or not math.isfinite(self.anomaly):
            raise MetricsError(f"anomaly score outside [0, 1]: {self.anomaly}")
        if self.is_outlier and self.inlier_correct:
            raise MetricsError("an outlier cannot be a correct inlier")


@dataclass
class CurveSet:
    """ROC, precision-recall, and coverage-accuracy polylines.

    ROC and PR points are listed per distinct threshold in sweep order
    (threshold descending, so fpr and recall nondecreasing); the ROC list is
    preceded by the empty-acceptance endpoint at threshold +inf. Coverage
    points cover every prefix size of the pessimistically tie-broken
    ascending-score order.
    """

    roc_thresholds: list[float]
    roc_fpr: list[float]
    roc_tpr: list[float]
    pr_thresholds: list[float]
    pr_recall: list[float]
    pr_precision: list[float]
    cov_coverage: list[float]
    cov_accuracy: list[float]

    @property
    def roc(self) -> list[tuple[float, float]]:
        return list(zip(self.roc_fpr, self.roc_tpr))

    @property
    def pr(self) -> list[tuple[float, float]]:
        return list(zip(self.pr_recall, self.pr_precision))

    @property
    def coverage(self) -> list[tuple[float, float]]:
        return list(zip(self.cov_coverage, self.cov_accuracy))


class RateKind(Enum):
    TPR_AT_FPR = "tpr_at_fpr"
    FNR_AT_FPR = "fnr_at_fpr"
    PRECISION_AT_RECALL = "precision_at_recall"


class Fnr95Mode(Enum):
    # Miss rate read at the 5% false-positive operating point (the
    # magnitude-consistent reading) or at the 95% one (the verbatim reading).
    TNR95 = "tnr95"
    FPR95 = "fpr95"


# Pessimistic tie order for coverage prefixes: at equal anomaly, outliers
# are accepted first, then misclassified inliers, then correct inliers.
def _coverage_rank(s: LabeledScore) -> int:
    if s.is_outlier:
        return 0
    return 1 if not s.inlier_correct else 2


def build_curves(scores: Sequence[LabeledScore]) -> CurveSet:
    """Sweep the rule "flag as outlier iff anomaly >= t" over all distinct
    anomaly values and record ROC, PR, and coverage points."""
    n = len(scores)
    n_pos = sum(s.is_outlier for s in scores)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"need both classes: {n_pos} outliers, {n_neg} inliers"
        )

    anomalies = np.array([s.anomaly for s in scores])
    outlier = np.array([s.is_outlier for s in scores])
    order = np.argsort(-anomalies, kind="stable")
    a_sorted = anomalies[order]
    out_sorted = outlier[order]
    tp_cum = np.cumsum(out_sorted.astype(np.int64))
    fp_cum = np.cumsum((~out_sorted).astype(np.int64))
    # Last index of each distinct-value group = the state after flagging
    # everything at or above that threshold.
    group_end = np.nonzero(np.append(a_sorted[1:] != a_sorted[:-1], True))[0]

    roc_thresholds = [math.inf]
    roc_fpr = [0.0]
    roc_tpr = [0.0]
    pr_thresholds: list[float] = []
    pr_recall: list[float] = []
    pr_precision: list[float] = []
    for idx in group_end:
        tp = int(tp_cum[idx])
        fp = int(fp_cum[idx])
        roc_thresholds.append(float(a_sorted[idx]))
        roc_fpr.append(fp / n_neg)
        roc_tpr.append(tp / n_pos)
        pr_thresholds.append(float(a_sorted[idx]))
        pr_recall.append(tp / n_pos)
        pr_precision.append(tp / (tp + fp))

    cov_order = sorted(range(n), key=lambda i: (scores[i].anomaly, _coverage_rank(scores[i])))
    correct = 0
    cov_coverage = []
    cov_accuracy = []
    for k, i in enumerate(cov_order, start=1):
        if scores[i].inlier_correct:
            correct += 1
        cov_coverage.append(k / n)
        cov_accuracy.append(correct / k)

    return CurveSet(
        roc_thresholds,
        roc_fpr,
        roc_tpr,
        pr_thresholds,
        pr_recall,
        pr_precision,
        cov_coverage,
        cov_accuracy,
    )


def auroc(curves: CurveSet) -> float:
    """Trapezoidal area under the ROC polyline."""
    terms = [
        (f2 - f1) * (t1 + t2) * 0.5
        for f1, f2, t1, t2 in zip(
            curves.roc_fpr, curves.roc_fpr[1:], curves.roc_tpr, curves.roc_tpr[1:]
        )
    ]
    return math.fsum(terms)


def auprc(curves: CurveSet) -> float:
    """Area under the PR curve by right-continuous steps over recall."""
    prev = 0.0
    terms = []
    for r, p in zip(curves.pr_recall, curves.pr_precision):
        terms.append((r - prev) * p)
        prev = r
    return math.fsum(terms)


def _envelope(xs: Sequence[float], ys: Sequence[float]) -> tuple[list[float], list[float]]:
    # One knot per distinct x, keeping the best (maximum) y. Points arrive in
    # sweep order, so the last y of a group is its maximum for ROC; PR needs
    # an explicit max because precision can dip within equal recall.
    kx: list[float] = []
    ky: list[float] = []
    for x, y in zip(xs, ys):
        if kx and x == kx[-1]:
            if y > ky[-1]:
                ky[-1] = y
        else:
            kx.append(x)
            ky.append(y)
    return kx, ky


def _interpolate(kx: list[float], ky: list[float], level: float) -> float:
    if level <= kx[0]:
        return ky[0]
    if level >= kx[-1]:
        return ky[-1]
    for i in range(1, len(kx)):
        if level <= kx[i]:
            if level == kx[i]:
                return ky[i]
            x1, x2 = kx[i - 1], kx[i]
            y1, y2 = ky[i - 1], ky[i]
            return y1 + (level - x1) * (y2 - y1) / (x2 - x1)
    return ky[-1]


def rate_at(curves: CurveSet, kind: RateKind, level: float) -> float:
    """Read an operating-point rate off a curve by linear interpolation over
    the per-distinct-abscissa upper envelope."""
    if not (0.0 <= level <= 1.0):
        raise MetricsError(f"level outside [0, 1]: {level}")
    if kind in (RateKind.TPR_AT_FPR, RateKind.FNR_AT_FPR):
        kx, ky = _envelope(curves.roc_fpr, curves.roc_tpr)
        tpr = _interpolate(kx, ky, level)
        return 1.0 - tpr if kind is RateKind.FNR_AT_FPR else tpr
    kx, ky = _envelope(curves.pr_recall, curves.pr_precision)
    return _interpolate(kx, ky, level)


def coverage_breakpoints(
    scores: Sequence[LabeledScore], reference_accuracy: float
) -> tuple[float, float]:
    """Largest coverages at which the accepted prefix still meets the
    reference accuracy (CBPL) and is still free of outliers (CBFAD)."""
    if not scores:
        raise MetricsError("coverage breakpoints need at least one score")
    if not (0.0 <= reference_accuracy <= 1.0):
        raise MetricsError(f"reference accuracy outside [0, 1]: {reference_accuracy}")
    n = len(scores)
    order = sorted(scores, key=lambda s: (s.anomaly, _coverage_rank(s)))
    cbpl = 0.0
    correct = 0
    first_outlier = n
    for k, s in enumerate(order, start=1):
        if s.is_outlier and first_outlier == n:
            first_outlier = k - 1
        if s.inlier_correct:
            correct += 1
        if correct / k >= reference_accuracy:
            cbpl = k / n
    cbfad = first_outlier / n
    return cbpl, cbfad


@dataclass
class ReportMetadata:
    """Provenance carried alongside the metric values."""

    supervisor_id: str = ""
    model_name: str = ""
    epoch: int = 0
    params: dict = field(default_factory=dict)
    augmented: str = "-"
    loss: float | None = None


@dataclass
class MetricReport:
    auroc: float
    auprc: float
    tpr05: float
    fnr95: float
    p95: float
    cbpl: float
    cbfad: float
    reference_accuracy: float
    fnr95_mode: Fnr95Mode
    metadata: ReportMetadata

    CSV_HEADER = [
        "Model",
        "Augmented",
        "Supervisor",
        "Epoch",
        "Acc",
        "Loss",
        "AUROC",
        "AUPRC",
        "TPR05",
        "FNR95",
        "P95",
        "CBPL",
        "CBFAD",
    ]

    def csv_row(self) -> list[str]:
        m = self.metadata
        return [
            m.model_name,
            m.augmented,
            m.supervisor_id,
            str(m.epoch),
            repr(self.reference_accuracy),
            "" if m.loss is None else repr(m.loss),
            repr(self.auroc),
            repr(self.auprc),
            repr(self.tpr05),
            repr(self.fnr95),
            repr(self.p95),
            repr(self.cbpl),
            repr(self.cbfad),
        ]

    def to_json(self) -> str:
        return json.dumps(
            {
                "supervisor": self.metadata.supervisor_id,
                "model_name": self.metadata.model_name,
                "epoch": self.metadata.epoch,
                "params": self.metadata.params,
                "reference_accuracy": self.reference_accuracy,
                "fnr95_mode": self.fnr95_mode.value,
                "auroc": self.auroc,
                "auprc": self.auprc,
                "tpr05": self.tpr05,
                "fnr95": self.fnr95,
                "p95": self.p95,
                "cbpl": self.cbpl,
                "cbfad": self.cbfad,
            },
            indent=2,
        )


def full_report(
    scores: Sequence[LabeledScore],
    reference_accuracy: float,
    metadata: ReportMetadata | None = None,
    fnr95_mode: Fnr95Mode = Fnr95Mode.TNR95,
) -> MetricReport:
    """Compute all seven metrics from one score set.

    The result is invariant under permutation of the input order.
    """
    curves = build_curves(scores)
    fnr_level = 0.05 if fnr95_mode is Fnr95Mode.TNR95 else 0.95
    cbpl, cbfad = coverage_breakpoints(scores, reference_accuracy)
    return MetricReport(
        auroc=auroc(curves),
        auprc=auprc(curves),
        tpr05=rate_at(curves, RateKind.TPR_AT_FPR, 0.05),
        fnr95=rate_at(curves, RateKind.FNR_AT_FPR, fnr_level),
        p95=rate_at(curves, RateKind.PRECISION_AT_RECALL, 0.95),
        cbpl=cbpl,
        cbfad=cbfad,
        reference_accuracy=reference_accuracy,
        fnr95_mode=fnr95_mode,
        metadata=metadata or ReportMetadata(),
    )


def _write_csv(
    destination: str | Path | TextIO, header: list[str], rows: list[list[str]]
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(buf.getvalue(), encoding="utf-8")
    else:
        destination.write(buf.getvalue())


def write_roc_csv(curves: CurveSet, destination: str | Path | TextIO) -> None:
    rows = [
        [repr(t), repr(f), repr(p)]
        for t, f, p in zip(curves.roc_thresholds, curves.roc_fpr, curves.roc_tpr)
    ]
    _write_csv(destination, ["threshold", "fpr", "tpr"], rows)


def write_pr_csv(curves: CurveSet, destination: str | Path | TextIO) -> None:
    rows = [
        [repr(t), repr(r), repr(p)]
        for t, r, p in zip(curves.pr_thresholds, curves.pr_recall, curves.pr_precision)
    ]
    _write_csv(destination, ["threshold", "recall", "precision"], rows)


def write_coverage_csv(curves: CurveSet, destination: str | Path | TextIO) -> None:
    rows = [
        [repr(c), repr(a)]
        for c, a in zip(curves.cov_coverage, curves.cov_accuracy)
    ]
    _write_csv(destination, ["coverage", "accuracy"], rows)


def write_report_csv(
    reports: Sequence[MetricReport], destination: str | Path | TextIO
) -> None:
    _write_csv(destination, MetricReport.CSV_HEADER, [r.csv_row() for r in reports])
