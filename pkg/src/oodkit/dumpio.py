"""Activation-dump interchange format: binary and CSV readers/writers.

A dump holds one activation vector per sample plus a sidecar manifest, so
supervisors can be developed and evaluated without touching the model that
produced the activations.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterable, TextIO

import numpy as np

MAGIC = b"OODD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, n_classes, n_records
_REC_PREFIX = struct.Struct("<Qi")  # sample_id, label (-1 = outlier)

_U64_MAX = 2**64 - 1


class DumpError(Exception):
    """Base class for dump format and invariant failures."""


class BadMagicError(DumpError):
    pass


class VersionMismatchError(DumpError):
    pass


class TruncatedError(DumpError):
    pass


class RaggedRowError(DumpError):
    pass


class InvariantError(DumpError):
    pass


class Origin(Enum):
    INLIER = "inlier"
    OUTLIER = "outlier"


class Split(Enum):
    TRAIN_CORRECT_ONLY = "TrainCorrectOnly"
    TEST = "Test"
    OUTLIER_SET = "OutlierSet"


@dataclass
class DumpManifest:
    """Sidecar metadata for one dump file.

    ``reference_accuracy`` is the producing model's test accuracy; it is the
    bar that coverage-breakpoint metrics compare against and cannot be
    re-derived by dump consumers, so it travels with the data.
    """

    model_name: str
    dataset_name: str
    epoch: int
    split: Split
    reference_accuracy: float | None = None

    def validate(self) -> None:
        if self.epoch < 0:
            raise InvariantError(f"epoch must be nonnegative, got {self.epoch}")
        if self.split is Split.TEST and self.reference_accuracy is None:
            raise InvariantError("Test split manifests need a reference_accuracy")
        if self.reference_accuracy is not None and not (
            0.0 <= self.reference_accuracy <= 1.0
        ):
            raise InvariantError(
                f"reference_accuracy outside [0, 1]: {self.reference_accuracy}"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "model_name": self.model_name,
                "dataset_name": self.dataset_name,
                "epoch": self.epoch,
                "reference_accuracy": self.reference_accuracy,
                "split": self.split.value,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DumpManifest":
        raw = json.loads(text)
        manifest = cls(
            model_name=raw["model_name"],
            dataset_name=raw["dataset_name"],
            epoch=int(raw["epoch"]),
            split=Split(raw["split"]),
            reference_accuracy=(
                None
                if raw.get("reference_accuracy") is None
                else float(raw["reference_accuracy"])
            ),
        )
        manifest.validate()
        return manifest


def _quantize(values: Iterable[float]) -> np.ndarray:
    # On-disk precision is f32; quantizing at construction time makes the
    # binary round trip exact while in-memory math stays f64.
    arr = np.asarray(values, dtype=np.float32).astype(np.float64)
    return arr


@dataclass
class SampleRecord:
    """One sample's activation vector with its identity and provenance."""

    sample_id: int
    origin: Origin
    true_label: int | None
    activations: np.ndarray

    def __post_init__(self) -> None:
        self.activations = _quantize(self.activations)

    def validate(self, n_classes: int) -> None:
        if not (0 <= self.sample_id <= _U64_MAX):
            raise InvariantError(f"sample_id out of u64 range: {self.sample_id}")
        if self.activations.shape != (n_classes,):
            raise InvariantError(
                f"sample {self.sample_id}: expected {n_classes} activations, "
                f"got shape {self.activations.shape}"
            )
        if not np.all(np.isfinite(self.activations)):
            raise InvariantError(f"sample {self.sample_id}: non-finite activation")
        if self.origin is Origin.INLIER:
            if self.true_label is None:
                raise InvariantError(f"inlier {self.sample_id} is missing true_label")
            if not (0 <= self.true_label < n_classes):
                raise InvariantError(
                    f"sample {self.sample_id}: label {self.true_label} outside "
                    f"[0, {n_classes})"
                )
        elif self.true_label is not None:
            raise InvariantError(f"outlier {self.sample_id} must not carry a label")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleRecord):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.origin == other.origin
            and self.true_label == other.true_label
            and np.array_equal(self.activations, other.activations)
        )


@dataclass
class ActivationDump:
    """An ordered collection of activation vectors from one model snapshot."""

    n_classes: int
    records: list[SampleRecord]
    manifest: DumpManifest | None = None

    def validate(self) -> None:
        if self.n_classes < 2:
            raise InvariantError(f"n_classes must be >= 2, got {self.n_classes}")
        seen: set[int] = set()
        for rec in self.records:
            rec.validate(self.n_classes)
            if rec.sample_id in seen:
                raise InvariantError(f"duplicate sample_id {rec.sample_id}")
            seen.add(rec.sample_id)
        if self.manifest is not None:
            self.manifest.validate()

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActivationDump):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.manifest == other.manifest
            and self.records == other.records
        )

    def activation_matrix(self) -> np.ndarray:
        """Stack all activation vectors into an (n_records, n_classes) array."""
        if not self.records:
            return np.empty((0, self.n_classes), dtype=np.float64)
        return np.stack([rec.activations for rec in self.records])

    def labels(self) -> np.ndarray:
        """Per-record labels as an int array, -1 for outliers."""
        return np.array(
            [-1 if r.true_label is None else r.true_label for r in self.records],
            dtype=np.int64,
        )


def _manifest_path(dump_path: Path) -> Path:
    return dump_path.with_name(dump_path.name + ".manifest.json")


def write_dump(dump: ActivationDump, destination: str | Path | BinaryIO) -> None:
    """Serialize a dump; for path destinations the manifest sidecar is written too.

    All invariants are checked before the first byte goes out.
    """
    dump.validate()
    payload = bytearray()
    payload += _HEADER.pack(MAGIC, FORMAT_VERSION, dump.n_classes, len(dump.records))
    for rec in dump.records:
        label = -1 if rec.true_label is None else rec.true_label
        payload += _REC_PREFIX.pack(rec.sample_id, label)
        payload += rec.activations.astype("<f4").tobytes()
    if isinstance(destination, (str, Path)):
        path = Path(destination)
        path.write_bytes(bytes(payload))
        if dump.manifest is not None:
            _manifest_path(path).write_text(dump.manifest.to_json(), encoding="utf-8")
    else:
        destination.write(bytes(payload))


def _read_exactly(source: BinaryIO, n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedError(f"unexpected end of input while reading {what}")
    return data


def read_dump(source: str | Path | BinaryIO) -> ActivationDump:
    """Parse a binary dump, attaching the manifest sidecar when reading a path."""
    manifest = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        mpath = _manifest_path(path)
        if mpath.exists():
            manifest = DumpManifest.from_json(mpath.read_text(encoding="utf-8"))
        stream: BinaryIO = io.BytesIO(path.read_bytes())
    else:
        stream = source

    header = _read_exactly(stream, _HEADER.size, "header")
    magic, version, n_classes, n_records = _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported version {version}")

    records: list[SampleRecord] = []
    vec_bytes = 4 * n_classes
    for _ in range(n_records):
        prefix = _read_exactly(stream, _REC_PREFIX.size, "record prefix")
        sample_id, label = _REC_PREFIX.unpack(prefix)
        raw = _read_exactly(stream, vec_bytes, "activations")
        vector = np.frombuffer(raw, dtype="<f4")
        if not np.all(np.isfinite(vector)):
            raise DumpError(f"sample {sample_id}: non-finite activation on disk")
        records.append(
            SampleRecord(
                sample_id=sample_id,
                origin=Origin.OUTLIER if label == -1 else Origin.INLIER,
                true_label=None if label == -1 else label,
                activations=vector,
            )
        )
    if stream.read(1):
        raise DumpError("trailing bytes after final record")

    dump = ActivationDump(n_classes=n_classes, records=records, manifest=manifest)
    dump.validate()
    return dump


def csv_header(n_classes: int) -> list[str]:
    return ["sample_id", "label"] + [f"logit_{i}" for i in range(n_classes)]


def read_csv_dump(source: str | Path | TextIO, n_classes: int) -> ActivationDump:
    """Read the human-inspectable CSV form; equal data yields the same dump
    the binary path would produce."""
    manifest = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        mpath = _manifest_path(path)
        if mpath.exists():
            manifest = DumpManifest.from_json(mpath.read_text(encoding="utf-8"))
        stream: TextIO = io.StringIO(path.read_text(encoding="utf-8"))
    else:
        stream = source

    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DumpError("empty CSV input") from None
    if header != csv_header(n_classes):
        raise DumpError(f"unexpected CSV header {header!r}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 2 + n_classes:
            raise RaggedRowError(
                f"line {lineno}: expected {2 + n_classes} columns, got {len(row)}"
            )
        try:
            sample_id = int(row[0])
            label = int(row[1])
            values = [float(cell) for cell in row[2:]]
        except ValueError as exc:
            raise DumpError(f"line {lineno}: unparsable number ({exc})") from None
        records.append(
            SampleRecord(
                sample_id=sample_id,
                origin=Origin.OUTLIER if label == -1 else Origin.INLIER,
                true_label=None if label == -1 else label,
                activations=values,
            )
        )
    dump = ActivationDump(n_classes=n_classes, records=records, manifest=manifest)
    dump.validate()
    return dump


def write_csv_dump(dump: ActivationDump, destination: str | Path | TextIO) -> None:
    """CSV twin of write_dump. Values are printed with round-trip precision."""
    dump.validate()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(dump.n_classes))
    for rec in dump.records:
        label = -1 if rec.true_label is None else rec.true_label
        writer.writerow(
            [rec.sample_id, label] + [repr(float(v)) for v in rec.activations]
        )
    if isinstance(destination, (str, Path)):
        path = Path(destination)
        path.write_text(buf.getvalue(), encoding="utf-8")
        if dump.manifest is not None:
            _manifest_path(path).write_text(dump.manifest.to_json(), encoding="utf-8")
    else:
        destination.write(buf.getvalue())
