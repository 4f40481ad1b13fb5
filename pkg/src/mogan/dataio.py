"""Vibration-style datasets: synthesis, windowing, splits, CSV persistence.

A dataset is a flat table of fixed-length signal windows with integer class
labels. Class index 0 is always the healthy ("normal") condition; indices
1..K-1 are fault conditions. Synthetic signals are built from a deterministic
component (harmonics plus a periodic decaying impulse train) and additive
Gaussian noise, which is the classic signature of localized bearing faults.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .seeding import make_rng

SAMPLE_RATE_HZ = 12000.0


class DataError(ValueError):
    """Malformed dataset, CSV, or split request."""


@dataclass
class FaultClassSpec:
    """Generative recipe for one machine condition.

    harmonics: list of (multiplier, amplitude) tones at multiplier*base_freq.
    impulse_period / impulse_amplitude / ring_decay: a decaying impulse train
    that repeats every `impulse_period` samples (0 disables it).
    noise_sigma: std of the additive Gaussian noise.
    """

    name: str
    base_freq: float
    harmonics: list = field(default_factory=list)
    impulse_period: int = 0
    impulse_amplitude: float = 0.0
    ring_decay: float = 0.8
    noise_sigma: float = 0.1

    def __post_init__(self):
        amps = [a for _, a in self.harmonics] + [self.impulse_amplitude]
        if not all(np.isfinite(a) for a in amps):
            raise DataError(f"{self.name}: amplitudes must be finite")
        if not 0.0 < self.ring_decay < 1.0:
            raise DataError(f"{self.name}: ring_decay must lie in (0, 1)")
        if self.noise_sigma < 0:
            raise DataError(f"{self.name}: noise_sigma must be >= 0")
        if self.impulse_period < 0:
            raise DataError(f"{self.name}: impulse_period must be >= 0")
        if self.impulse_period == 0 and self.impulse_amplitude != 0.0:
            raise DataError(f"{self.name}: impulse_amplitude requires a period")

    def deterministic_signal(self, n_samples: int, phase: float = 0.0) -> np.ndarray:
        """The noise-free waveform for this condition."""
        if n_samples < 1:
            raise DataError("n_samples must be >= 1")
        t = np.arange(n_samples) / SAMPLE_RATE_HZ
        x = np.zeros(n_samples)
        for mult, amp in self.harmonics:
            x += amp * np.sin(2 * np.pi * mult * self.base_freq * t + phase)
        if self.impulse_period > 0 and self.impulse_amplitude != 0.0:
            idx = np.arange(n_samples)
            for start in range(0, n_samples, self.impulse_period):
                tail = idx[start:] - start
                x[start:] += self.impulse_amplitude * self.ring_decay ** tail
        return x


@dataclass
class LabeledDataset:
    """Feature matrix (n, d) float64 with integer labels and class names."""

    features: np.ndarray
    labels: np.ndarray
    class_names: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = list(self.class_names)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must be one integer per row")
        if len(self.class_names) < 1:
            raise DataError("at least one class name required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DataError("label out of range for class_names")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.class_names)


def default_fault_specs() -> list:
    """Four stock conditions: normal plus three bearing-style faults.

    Amplitudes and noise are tuned so classes overlap enough that a plain
    classifier trained on heavily imbalanced data misses minority faults,
    while the classes stay separable in principle.
    """
    return [
        FaultClassSpec("normal", base_freq=30.0,
                       harmonics=[(1, 1.0), (2, 0.3)],
                       impulse_period=0, impulse_amplitude=0.0,
                       noise_sigma=0.85),
        FaultClassSpec("inner_race", base_freq=30.0,
                       harmonics=[(1, 1.0), (2, 0.3)],
                       impulse_period=74, impulse_amplitude=1.1,
                       ring_decay=0.78, noise_sigma=0.85),
        FaultClassSpec("outer_race", base_freq=30.0,
                       harmonics=[(1, 1.0), (2, 0.3)],
                       impulse_period=111, impulse_amplitude=1.3,
                       ring_decay=0.82, noise_sigma=0.85),
        FaultClassSpec("ball", base_freq=30.0,
                       harmonics=[(1, 1.0), (2, 0.3), (3.2, 0.25)],
                       impulse_period=47, impulse_amplitude=0.7,
                       ring_decay=0.70, noise_sigma=0.85),
    ]


MIN_WINDOW = 16


def synth_signal(spec: FaultClassSpec, window_len: int, seed: int) -> np.ndarray:
    """One seeded signal window: harmonics + impulse train + Gaussian noise."""
    if window_len < MIN_WINDOW:
        raise DataError(f"window_len must be >= {MIN_WINDOW}")
    x = spec.deterministic_signal(int(window_len))
    if spec.noise_sigma > 0:
        rng = make_rng(seed, f"synth_signal:{spec.name}")
        x = x + rng.normal(0.0, spec.noise_sigma, size=int(window_len))
    return x


def synthesize_dataset(specs, counts, window: int, seed: int,
                       random_phase: bool = False) -> LabeledDataset:
    """Draw `counts[c]` windows of class c, one independent noise draw each.

    Every window of a class shares the same deterministic component (fixed
    phase unless `random_phase`); windows differ by their noise realization.
    """
    specs = list(specs)
    counts = [int(c) for c in counts]
    if len(specs) != len(counts):
        raise DataError("one count per class spec required")
    if any(c < 0 for c in counts):
        raise DataError("counts must be >= 0")
    if window < MIN_WINDOW:
        raise DataError(f"window must be >= {MIN_WINDOW}")
    rng = make_rng(seed, "synthesize")
    rows = []
    labels = []
    for c, (spec, count) in enumerate(zip(specs, counts)):
        if count == 0:
            continue
        base = spec.deterministic_signal(window)
        for _ in range(count):
            x = base
            if random_phase:
                x = spec.deterministic_signal(window, phase=rng.uniform(0, 2 * np.pi))
            noise = rng.normal(0.0, spec.noise_sigma, size=window) if spec.noise_sigma > 0 else 0.0
            rows.append(x + noise)
            labels.append(c)
    feats = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, window))
    return LabeledDataset(feats, np.asarray(labels, dtype=np.int64),
                          [s.name for s in specs])


@dataclass
class ImbalanceSpec:
    """Requested class counts for an imbalanced draw.

    Index 0 is the majority (normal) class and must dominate every fault
    count. window_len defaults to the full-length regime; desk-scale runs
    usually pass something smaller.
    """

    samples_per_class: list
    window_len: int = 2048
    seed: int = 0

    def __post_init__(self):
        self.samples_per_class = [int(c) for c in self.samples_per_class]
        if len(self.samples_per_class) < 2:
            raise DataError("need the majority class plus at least one fault class")
        if any(c < 1 for c in self.samples_per_class):
            raise DataError("every class count must be >= 1")
        if self.samples_per_class[0] < max(self.samples_per_class[1:]):
            raise DataError("majority count must be >= every fault count")
        if self.window_len < MIN_WINDOW:
            raise DataError(f"window_len must be >= {MIN_WINDOW}")


def make_imbalanced_dataset(specs, imb: ImbalanceSpec) -> LabeledDataset:
    """Synthesize counts per `imb` and shuffle rows with a seeded permutation."""
    specs = list(specs)
    if len(specs) != len(imb.samples_per_class):
        raise DataError("one spec per requested class count required")
    ds = synthesize_dataset(specs, imb.samples_per_class, imb.window_len, imb.seed)
    rng = make_rng(imb.seed, "shuffle")
    return ds.subset(rng.permutation(ds.n))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(ds: LabeledDataset, train_fraction: float, seed: int):
    """Per-class shuffled split into (train, test) datasets.

    Each class contributes round-half-up(n_c * fraction) training rows,
    clamped to [1, n_c - 1] so both sides see every class. Classes with fewer
    than 2 rows cannot be split.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be in (0, 1)")
    rng = make_rng(seed, "split")
    train_idx = []
    test_idx = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            continue
        if members.size < 2:
            raise DataError(f"class {c} has {members.size} row(s); need >= 2 to split")
        perm = rng.permutation(members.size)
        members = members[perm]
        k = _round_half_up(members.size * train_fraction)
        k = min(max(k, 1), members.size - 1)
        train_idx.extend(members[:k])
        test_idx.extend(members[k:])
    train_idx = np.sort(np.asarray(train_idx, dtype=np.int64))
    test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))
    return ds.subset(train_idx), ds.subset(test_idx), train_idx, test_idx


@dataclass
class Standardizer:
    """Per-feature affine transform fitted on one split and applied to all."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        f = np.asarray(features, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise DataError("standardizer needs a non-empty 2D feature matrix")
        mean = f.mean(axis=0)
        scale = f.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def apply(self, features: np.ndarray) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        return (f - self.mean) / self.scale

    def invert(self, features: np.ndarray) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        return f * self.scale + self.mean


def write_csv(ds: LabeledDataset, path) -> None:
    """Write `label,f0..f{d-1}` rows; labels are class-name strings and
    floats use round-trip-exact %.17g formatting."""
    with open(path, "w", newline="") as fh:
        _write_csv_stream(ds, fh)


def _write_csv_stream(ds: LabeledDataset, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
    for row, label in zip(ds.features, ds.labels):
        writer.writerow([ds.class_names[int(label)]] + ["%.17g" % v for v in row])


def csv_text(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    _write_csv_stream(ds, buf)
    return buf.getvalue()


def load_csv(path, schema=None) -> LabeledDataset:
    """Read a `label,f0..f{N-1}` table with string class labels.

    `schema` is the ordered class-name list (index 0 = the majority class);
    labels outside it are rejected with their line number. When omitted, the
    order of first appearance is used, except that a class literally named
    "normal" is always moved to index 0.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0] != "label":
            raise DataError(f"{path}: first column must be 'label'")
        dim = len(header) - 1
        if dim < 1:
            raise DataError(f"{path}: no feature columns")
        for i, name in enumerate(header[1:]):
            if name != f"f{i}":
                raise DataError(f"{path}: expected column f{i}, got {name!r}")
        feats = []
        raw_labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            raw_labels.append((lineno, row[0]))
            try:
                feats.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not feats:
        raise DataError(f"{path}: no samples")
    if schema is None:
        schema = []
        for _, name in raw_labels:
            if name not in schema:
                schema.append(name)
        if "normal" in schema:
            schema.remove("normal")
            schema.insert(0, "normal")
    else:
        schema = list(schema)
    index = {name: c for c, name in enumerate(schema)}
    if len(index) != len(schema):
        raise DataError("schema contains duplicate class names")
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, (lineno, name) in enumerate(raw_labels):
        if name not in index:
            raise DataError(f"{path}:{lineno}: unknown label {name!r}")
        labels[i] = index[name]
    return LabeledDataset(np.asarray(feats, dtype=np.float64), labels, schema)
