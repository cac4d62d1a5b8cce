import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oodkit.dumpio import ActivationDump, Origin, SampleRecord
from oodkit.metrics import LabeledScore

GOLDEN_DIR = Path(__file__).parent / "golden"


def make_dump(vectors, labels, n_classes, ids=None) -> ActivationDump:
    """Bare dump from parallel vector/label lists; label None means outlier."""
    records = []
    for i, (vec, label) in enumerate(zip(vectors, labels)):
        records.append(
            SampleRecord(
                sample_id=ids[i] if ids else i,
                origin=Origin.INLIER if label is not None else Origin.OUTLIER,
                true_label=label,
                activations=vec,
            )
        )
    dump = ActivationDump(n_classes=n_classes, records=records)
    dump.validate()
    return dump


def random_labeled_scores(rng: np.random.Generator, n: int) -> list[LabeledScore]:
    """Random score set with ties and both classes present."""
    n_pos = int(rng.integers(1, n))
    # Draw from a coarse grid about half the time so ties are common.
    if rng.random() < 0.5:
        values = rng.integers(0, max(2, n // 2), size=n) / max(2, n // 2)
    else:
        values = rng.random(n)
    out = []
    for i in range(n):
        is_outlier = i < n_pos
        correct = bool(rng.random() < 0.7) and not is_outlier
        out.append(LabeledScore(float(values[i]), is_outlier, correct))
    return out


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20240812))
