"""OpenMax supervisor: per-class mean activation vectors, Weibull tail
calibration of distances, top-rank activation revision, and an explicit
unknown-unknown class.

Fitting uses only correctly classified training samples. At prediction time
the activations of the highest-ranked classes are shrunk according to how
extreme the sample's distance to each class mean is; the removed mass feeds
a synthetic unknown class whose victory means rejection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import weibull
from .dumpio import ActivationDump, SampleRecord
from .supervisors import ScoredSample, Verdict, map_rows, softmax
from .weibull import DegenerateTailError, FitError, NonConvergenceError


class InsufficientTailError(FitError):
    def __init__(self, class_index: int, have: int, eta: int):
        super().__init__(
            f"class {class_index}: {have} correctly classified samples, "
            f"tail size {eta} requires at least {eta}"
        )
        self.class_index = class_index


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"
    EUCOS = "eucos"


class OmegaMode(Enum):
    RANK_WEIGHTED = "rank-weighted"
    PLAIN_CDF = "plain-cdf"


# Scaling applied to the Euclidean term when combining it with cosine
# distance in the EuCos metric.
EUCOS_EUCLIDEAN_SCALE = 200.0


@dataclass(frozen=True)
class OpenMaxParams:
    """Hyperparameters: tail size eta, revision depth alpha, threshold, and
    the distance/weighting variants.

    ``unknown_accepts`` flips the discriminator to accept a sample whose
    augmented argmax is the unknown class (the literal reading of the
    printed rule); the default rejects unknowns.
    """

    eta: int = 20
    alpha: int = 10
    epsilon: float = 0.5
    distance: DistanceMetric = DistanceMetric.EUCLIDEAN
    omega_mode: OmegaMode = OmegaMode.RANK_WEIGHTED
    unknown_accepts: bool = False

    def __post_init__(self) -> None:
        if self.eta < 2:
            raise ValueError(f"eta must be >= 2, got {self.eta}")
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass
class WeibullClassModel:
    """One class's mean activation vector and fitted tail distribution."""

    class_index: int
    mav: np.ndarray
    shape: float
    scale: float
    tail_size: int

    def __post_init__(self) -> None:
        self.mav = np.asarray(self.mav, dtype=np.float64)
        if self.shape <= 0.0 or self.scale <= 0.0:
            raise ValueError("Weibull shape and scale must be positive")


@dataclass
class OpenMaxModel:
    classes: list[WeibullClassModel]
    params: OpenMaxParams

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def mav_matrix(self) -> np.ndarray:
        return np.stack([c.mav for c in self.classes])

    def shapes(self) -> np.ndarray:
        return np.array([c.shape for c in self.classes])

    def scales(self) -> np.ndarray:
        return np.array([c.scale for c in self.classes])


@dataclass
class RevisedVector:
    """Outcome of revising one activation vector."""

    revised: np.ndarray
    unknown_mass: float
    omegas: np.ndarray


def class_distance(v: np.ndarray, mav: np.ndarray, metric: DistanceMetric) -> float:
    """Distance from an activation vector to a class mean."""
    v = np.asarray(v, dtype=np.float64)
    mav = np.asarray(mav, dtype=np.float64)
    if v.shape != mav.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {mav.shape}")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(mav))):
        raise ValueError("distance inputs must be finite")
    diff = v - mav
    euclidean = float(np.sqrt(np.sum(diff * diff, axis=-1)))
    if metric is DistanceMetric.EUCLIDEAN:
        return euclidean
    nv = float(np.sqrt(np.sum(v * v, axis=-1)))
    nm = float(np.sqrt(np.sum(mav * mav, axis=-1)))
    if nv == 0.0 or nm == 0.0:
        raise ValueError("cosine distance is undefined for a zero-norm vector")
    # Rounding can push cos similarity past 1; the true distance is >= 0.
    cosine = max(0.0, 1.0 - float(np.sum(v * mav, axis=-1)) / (nv * nm))
    if metric is DistanceMetric.COSINE:
        return cosine
    return euclidean / EUCOS_EUCLIDEAN_SCALE + cosine


def _distances_to_mavs(
    matrix: np.ndarray, mavs: np.ndarray, metric: DistanceMetric
) -> np.ndarray:
    """(rows, classes) distance table using the same float operations as
    class_distance, so chunked and single-vector paths agree bitwise."""
    diff = matrix[:, None, :] - mavs[None, :, :]
    euclidean = np.sqrt(np.sum(diff * diff, axis=-1))
    if metric is DistanceMetric.EUCLIDEAN:
        return euclidean
    nv = np.sqrt(np.sum(matrix * matrix, axis=-1))
    nm = np.sqrt(np.sum(mavs * mavs, axis=-1))
    if np.any(nv == 0.0) or np.any(nm == 0.0):
        raise ValueError("cosine distance is undefined for a zero-norm vector")
    dots = np.sum(matrix[:, None, :] * mavs[None, :, :], axis=-1)
    cosine = np.maximum(0.0, 1.0 - dots / (nv[:, None] * nm[None, :]))
    if metric is DistanceMetric.COSINE:
        return cosine
    return euclidean / EUCOS_EUCLIDEAN_SCALE + cosine


def fit_openmax(train_dump: ActivationDump, params: OpenMaxParams) -> OpenMaxModel:
    """Fit per-class mean vectors and Weibull tails on a correct-only dump.

    For each class the eta largest distances to the class mean form the tail;
    ties at the boundary are resolved by a stable descending sort.
    """
    n = train_dump.n_classes
    if params.alpha > n:
        raise ValueError(f"alpha {params.alpha} exceeds class count {n}")
    if any(rec.true_label is None for rec in train_dump.records):
        raise FitError("training dump contains unlabeled records")

    matrix = train_dump.activation_matrix()
    labels = train_dump.labels()
    classes: list[WeibullClassModel] = []
    for j in range(n):
        rows = matrix[labels == j]
        if len(rows) < params.eta:
            raise InsufficientTailError(j, len(rows), params.eta)
        mav = rows.mean(axis=0)
        distances = np.array(
            [class_distance(row, mav, params.distance) for row in rows]
        )
        order = np.argsort(-distances, kind="stable")
        tail = distances[order[: params.eta]]
        try:
            shape, scale = weibull.fit_weibull_mle(tail)
        except FitError as exc:
            raise type(exc)(f"class {j}: {exc}") from exc
        classes.append(
            WeibullClassModel(
                class_index=j,
                mav=mav,
                shape=shape,
                scale=scale,
                tail_size=params.eta,
            )
        )
    return OpenMaxModel(classes=classes, params=params)


def weibull_cdf(model: WeibullClassModel, d: float) -> float:
    """Probability that a distance at most d is observed under the class tail."""
    return float(weibull.cdf(d, model.shape, model.scale))


def _rank_weight(rank: int, alpha: int, mode: OmegaMode) -> float:
    # rank runs 1..alpha; the top rank carries (alpha-1)/alpha under the
    # rank-weighted variant and 1 under the plain-CDF variant.
    if mode is OmegaMode.PLAIN_CDF:
        return 1.0
    return (alpha - rank) / alpha


def recalibrate(v: np.ndarray, model: OpenMaxModel) -> RevisedVector:
    """Shrink the top-alpha activations by tail probability and pool the
    removed mass into the unknown-unknown slot."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.n_classes,):
        raise ValueError(
            f"vector length {v.shape} does not match model classes {model.n_classes}"
        )
    params = model.params
    order = np.argsort(-v, kind="stable")
    omegas = np.ones(model.n_classes)
    for rank in range(1, params.alpha + 1):
        cls = int(order[rank - 1])
        d = class_distance(v, model.classes[cls].mav, params.distance)
        f = weibull_cdf(model.classes[cls], d)
        omegas[cls] = 1.0 - _rank_weight(rank, params.alpha, params.omega_mode) * f
    revised = v * omegas
    unknown_mass = float(np.sum(v * (1.0 - omegas)))
    return RevisedVector(revised=revised, unknown_mass=unknown_mass, omegas=omegas)


def _augmented_decision(
    revised: np.ndarray, unknown_mass: float
) -> tuple[float, int]:
    """Anomaly from the revised softmax plus the argmax over the augmented
    vector; index n_classes denotes the unknown class."""
    probs = softmax(revised)
    anomaly = float(1.0 - np.max(probs))
    augmented = np.concatenate([revised, [unknown_mass]])
    predicted = int(np.argmax(augmented))
    return anomaly, predicted


def openmax_predict(record: SampleRecord, model: OpenMaxModel) -> ScoredSample:
    """Score one sample with the fitted model.

    The anomaly score is one minus the top revised-softmax probability. The
    predicted class is the augmented argmax; when the unknown class wins the
    sample is rejected (or accepted under ``unknown_accepts``), otherwise
    the strict accept-below-threshold rule applies.
    """
    rv = recalibrate(record.activations, model)
    anomaly, predicted = _augmented_decision(rv.revised, rv.unknown_mass)
    params = model.params
    if predicted == model.n_classes:
        verdict = Verdict.ACCEPT if params.unknown_accepts else Verdict.REJECT
    else:
        verdict = Verdict.ACCEPT if anomaly < params.epsilon else Verdict.REJECT
    return ScoredSample(record.sample_id, anomaly, predicted, verdict)


def _openmax_rows(
    matrix: np.ndarray, model: OpenMaxModel
) -> tuple[np.ndarray, np.ndarray]:
    if len(matrix) == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    params = model.params
    n = model.n_classes
    dists = _distances_to_mavs(matrix, model.mav_matrix(), params.distance)
    order = np.argsort(-matrix, axis=1, kind="stable")
    omegas = np.ones_like(matrix)
    rows = np.arange(len(matrix))
    shapes = model.shapes()
    scales = model.scales()
    for rank in range(1, params.alpha + 1):
        cls = order[:, rank - 1]
        d = dists[rows, cls]
        with np.errstate(over="ignore"):
            f = -np.expm1(-((d / scales[cls]) ** shapes[cls]))
        f = np.minimum(f, np.nextafter(1.0, 0.0))
        if params.omega_mode is OmegaMode.PLAIN_CDF:
            weight = 1.0
        else:
            weight = (params.alpha - rank) / params.alpha
        omegas[rows, cls] = 1.0 - weight * f
    revised = matrix * omegas
    unknown = np.sum(matrix * (1.0 - omegas), axis=1)
    probs = softmax(revised)
    anomalies = 1.0 - np.max(probs, axis=1)
    augmented = np.concatenate([revised, unknown[:, None]], axis=1)
    predicted = np.argmax(augmented, axis=1)
    return anomalies, predicted


def openmax_score_dump(
    dump: ActivationDump, model: OpenMaxModel, threads: int = 1
) -> list[ScoredSample]:
    """Vectorized OpenMax scoring of every record in a dump."""
    if dump.n_classes != model.n_classes:
        raise ValueError(
            f"dump has {dump.n_classes} classes, model has {model.n_classes}"
        )
    anomalies, predicted = map_rows(
        dump.activation_matrix(), lambda m: _openmax_rows(m, model), threads
    )
    params = model.params
    out = []
    for rec, a, p in zip(dump.records, anomalies, predicted):
        if int(p) == model.n_classes:
            verdict = Verdict.ACCEPT if params.unknown_accepts else Verdict.REJECT
        else:
            verdict = Verdict.ACCEPT if a < params.epsilon else Verdict.REJECT
        out.append(ScoredSample(rec.sample_id, float(a), int(p), verdict))
    return out


def params_to_dict(params: OpenMaxParams) -> dict:
    return {
        "eta": params.eta,
        "alpha": params.alpha,
        "epsilon": params.epsilon,
        "distance": params.distance.value,
        "omega_mode": params.omega_mode.value,
        "unknown_accepts": params.unknown_accepts,
    }


def params_from_dict(raw: dict) -> OpenMaxParams:
    return OpenMaxParams(
        eta=int(raw["eta"]),
        alpha=int(raw["alpha"]),
        epsilon=float(raw["epsilon"]),
        distance=DistanceMetric(raw["distance"]),
        omega_mode=OmegaMode(raw["omega_mode"]),
        unknown_accepts=bool(raw.get("unknown_accepts", False)),
    )


def save_model(model: OpenMaxModel, destination: str | Path) -> None:
    """Serialize a fitted model to JSON; floats keep round-trip precision."""
    doc = {
        "params": params_to_dict(model.params),
        "classes": [
            {
                "class_index": c.class_index,
                "mav": [float(x) for x in c.mav],
                "shape": c.shape,
                "scale": c.scale,
                "tail_size": c.tail_size,
            }
            for c in model.classes
        ],
    }
    Path(destination).write_text(json.dumps(doc, indent=2), encoding="utf-8")


def load_model(source: str | Path) -> OpenMaxModel:
    doc = json.loads(Path(source).read_text(encoding="utf-8"))
    classes = [
        WeibullClassModel(
            class_index=int(c["class_index"]),
            mav=np.array(c["mav"], dtype=np.float64),
            shape=float(c["shape"]),
            scale=float(c["scale"]),
            tail_size=int(c["tail_size"]),
        )
        for c in doc["classes"]
    ]
    classes.sort(key=lambda c: c.class_index)
    return OpenMaxModel(classes=classes, params=params_from_dict(doc["params"]))
