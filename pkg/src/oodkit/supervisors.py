"""Shared supervisor types and the softmax-confidence baseline.

A supervisor maps each sample to an anomaly score in [0, 1] (higher is more
outlier-like) and an accept/reject verdict. The baseline scores a sample by
one minus its maximum softmax probability.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .dumpio import ActivationDump, SampleRecord


class Verdict(Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class SupervisorConfig:
    """Threshold configuration shared by all supervisors."""

    epsilon: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class ScoredSample:
    """Scoring outcome for one sample.

    ``predicted_class`` is a class index in [0, N); OpenMax additionally uses
    index N for the unknown-unknown class.
    """

    sample_id: int
    anomaly: float
    predicted_class: int
    verdict: Verdict

    def __post_init__(self) -> None:
        if not (0.0 <= self.anomaly <= 1.0) or not np.isfinite(self.anomaly):
            raise ValueError(f"anomaly score outside [0, 1]: {self.anomaly}")


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis.

    The maximum is subtracted before exponentiation, so the result is
    invariant under a common additive shift of the inputs. Entries whose
    gap to the maximum exceeds the exp range underflow to exactly zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] < 1:
        raise ValueError("softmax needs at least one entry")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def baseline_score(record: SampleRecord) -> float:
    """Anomaly score: 1 minus the maximum softmax probability."""
    return float(1.0 - np.max(softmax(record.activations)))


def baseline_predict(record: SampleRecord, config: SupervisorConfig) -> ScoredSample:
    """Score one sample and apply the accept-below-threshold rule.

    Acceptance is strict (anomaly < epsilon); argmax ties break toward the
    lowest class index.
    """
    probs = softmax(record.activations)
    anomaly = float(1.0 - np.max(probs))
    predicted = int(np.argmax(record.activations))
    verdict = Verdict.ACCEPT if anomaly < config.epsilon else Verdict.REJECT
    return ScoredSample(record.sample_id, anomaly, predicted, verdict)


# Rows are always processed in fixed-size blocks so that the array shapes
# seen by numpy's vectorized math never depend on the thread count; SIMD
# versus scalar-tail code paths can otherwise differ in the last ulp.
BLOCK_ROWS = 512


def map_rows(
    matrix: np.ndarray,
    fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply a row-wise pure function block by block.

    The block boundaries are fixed, so results are bit-identical for every
    thread count; threads only spread the blocks over a pool.
    """
    n = len(matrix)
    if n == 0:
        return fn(matrix)
    bounds = [(lo, min(lo + BLOCK_ROWS, n)) for lo in range(0, n, BLOCK_ROWS)]
    if threads <= 1 or len(bounds) == 1:
        parts = [fn(matrix[lo:hi]) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(bounds))) as pool:
            parts = list(pool.map(lambda b: fn(matrix[b[0] : b[1]]), bounds))
    if len(parts) == 1:
        return parts[0]
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
    )


def _baseline_rows(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(matrix) == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    probs = softmax(matrix)
    return 1.0 - np.max(probs, axis=1), np.argmax(matrix, axis=1)


def baseline_score_dump(
    dump: ActivationDump, config: SupervisorConfig, threads: int = 1
) -> list[ScoredSample]:
    """Vectorized baseline scoring of every record in a dump."""
    anomalies, predicted = map_rows(dump.activation_matrix(), _baseline_rows, threads)
    out = []
    for rec, a, p in zip(dump.records, anomalies, predicted):
        verdict = Verdict.ACCEPT if a < config.epsilon else Verdict.REJECT
        out.append(ScoredSample(rec.sample_id, float(a), int(p), verdict))
    return out


def accuracy(dump: ActivationDump) -> float:
    """Fraction of labeled records whose argmax activation matches the label."""
    labeled: Sequence[SampleRecord] = [r for r in dump.records if r.true_label is not None]
    if not labeled:
        raise ValueError("dump has no labeled records")
    hits = sum(
        int(np.argmax(r.activations)) == r.true_label for r in labeled
    )
    return hits / len(labeled)
