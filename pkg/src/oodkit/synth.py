"""Seeded synthetic activation dumps with controllable separability.

Inlier logits cluster around one dominant coordinate per class. Outliers are
mostly isotropic noise with no dominant coordinate, plus a small "near"
population of attenuated class-like vectors that stays confusable at every
overlap, the way an outlier set that shares content with the training
distribution would. The ``overlap`` knob scales all spreads jointly, so
shrinking it emulates a better-trained model: accuracy rises and the far
outliers separate, while the near ones keep pressure on coverage metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dumpio import ActivationDump, DumpManifest, Origin, SampleRecord, Split

_TEST_ID_BASE = 1_000_000
_OUTLIER_ID_BASE = 2_000_000


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Everything that determines the generated bytes, including the seed."""

    seed: int
    n_classes: int = 10
    train_per_class: int = 150
    test_per_class: int = 60
    n_outliers: int = 600
    mean_scale: float = 2.5
    inlier_spread: float = 1.0
    outlier_spread: float = 1.0
    near_fraction: float = 0.10
    near_attenuation: float = 0.65
    overlap: float = 1.0
    epoch: int = 0
    model_name: str = "synthetic"
    dataset_name: str = "synthetic"

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise SynthError(f"seed out of u64 range: {self.seed}")
        if self.n_classes < 2:
            raise SynthError("need at least two classes")
        if min(self.train_per_class, self.test_per_class, self.n_outliers) < 1:
            raise SynthError("sample counts must be positive")
        if self.overlap < 0:
            raise SynthError(f"overlap must be nonnegative, got {self.overlap}")
        if not (0.0 <= self.near_fraction <= 1.0):
            raise SynthError(f"near_fraction outside [0, 1]: {self.near_fraction}")


def _class_means(spec: SyntheticSpec) -> np.ndarray:
    return spec.mean_scale * np.eye(spec.n_classes)


def generate(spec: SyntheticSpec) -> tuple[ActivationDump, ActivationDump, ActivationDump]:
    """Produce (train_correct_only, test, outlier) dumps for one pseudo-epoch.

    The counter-based generator makes equal specs yield identical bytes on
    any platform. The train dump keeps only samples whose argmax matches
    their class.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    means = _class_means(spec)
    sigma_in = spec.inlier_spread * spec.overlap
    sigma_out = spec.outlier_spread * spec.overlap

    train_records: list[SampleRecord] = []
    next_id = 0
    kept_per_class = [0] * spec.n_classes
    for j in range(spec.n_classes):
        rows = means[j] + sigma_in * rng.standard_normal(
            (spec.train_per_class, spec.n_classes)
        )
        for row in rows:
            if int(np.argmax(row)) == j:
                train_records.append(
                    SampleRecord(next_id, Origin.INLIER, j, row)
                )
                kept_per_class[j] += 1
                next_id += 1
    for j, kept in enumerate(kept_per_class):
        if kept == 0:
            raise SynthError(
                f"class {j}: no correctly classified training samples survived"
            )

    test_records: list[SampleRecord] = []
    hits = 0
    next_id = _TEST_ID_BASE
    for j in range(spec.n_classes):
        rows = means[j] + sigma_in * rng.standard_normal(
            (spec.test_per_class, spec.n_classes)
        )
        for row in rows:
            hits += int(np.argmax(row)) == j
            test_records.append(SampleRecord(next_id, Origin.INLIER, j, row))
            next_id += 1
    test_accuracy = hits / len(test_records)

    n_near = round(spec.near_fraction * spec.n_outliers)
    near_classes = rng.integers(0, spec.n_classes, size=n_near)
    near_rows = (
        spec.near_attenuation * means[near_classes]
        + sigma_in * rng.standard_normal((n_near, spec.n_classes))
    )
    far_rows = sigma_out * rng.standard_normal(
        (spec.n_outliers - n_near, spec.n_classes)
    )
    outlier_records = [
        SampleRecord(_OUTLIER_ID_BASE + i, Origin.OUTLIER, None, row)
        for i, row in enumerate(np.concatenate([near_rows, far_rows]))
    ]

    def manifest(split: Split, reference_accuracy: float | None) -> DumpManifest:
        return DumpManifest(
            model_name=spec.model_name,
            dataset_name=spec.dataset_name,
            epoch=spec.epoch,
            split=split,
            reference_accuracy=reference_accuracy,
        )

    train = ActivationDump(
        spec.n_classes, train_records, manifest(Split.TRAIN_CORRECT_ONLY, None)
    )
    test = ActivationDump(
        spec.n_classes, test_records, manifest(Split.TEST, test_accuracy)
    )
    outliers = ActivationDump(
        spec.n_classes, outlier_records, manifest(Split.OUTLIER_SET, None)
    )
    for dump in (train, test, outliers):
        dump.validate()
    return train, test, outliers
