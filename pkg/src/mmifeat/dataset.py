"""Epoch and feature containers, file I/O, synthetic generators, fold planning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "EpochSet",
    "LabeledFeatures",
    "FoldPlan",
    "Hierarchy",
    "OscClass",
    "load_epochs",
    "save_epochs",
    "load_features",
    "save_features",
    "synth_gaussian",
    "synth_oscillatory_epochs",
    "stratified_kfold",
    "hierarchy_split",
    "hierarchy_level_indices",
]


@dataclass
class EpochSet:
    """Multichannel trials with per-trial integer class labels.

    ``data`` is indexed ``[trial][channel][sample]``. Instances are treated
    as immutable after construction.
    """

    data: np.ndarray
    labels: np.ndarray
    fs: float
    channel_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 3:
            raise ValueError(f"epoch data must be 3-D, got shape {self.data.shape}")
        if self.labels.shape != (self.data.shape[0],):
            raise ValueError("one label per trial required")
        if not np.isfinite(self.data).all():
            raise ValueError("epoch data contains non-finite values")
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive")
        if not self.channel_names:
            self.channel_names = tuple(f"ch{i}" for i in range(self.data.shape[1]))
        elif len(self.channel_names) != self.data.shape[1]:
            raise ValueError("channel_names length must match channel count")
        self.channel_names = tuple(self.channel_names)

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, indices, labels=None) -> "EpochSet":
        """New EpochSet restricted to ``indices``, optionally relabeled."""
        idx = np.asarray(indices, dtype=np.int64)
        new_labels = self.labels[idx] if labels is None else np.asarray(labels)
        return EpochSet(self.data[idx], new_labels, self.fs, self.channel_names)


@dataclass
class LabeledFeatures:
    """An n-by-d feature matrix with per-row integer class labels.

    Multi-class sets use labels 1..L; binary one-versus-rest subsets use
    labels +1/-1.
    """

    x: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.x.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.x.shape}")
        if self.x.shape[0] < 2:
            raise ValueError("at least two samples required")
        if self.labels.shape != (self.x.shape[0],):
            raise ValueError("one label per row required")
        if not np.isfinite(self.x).all():
            raise ValueError("features contain non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def subset(self, indices, labels=None) -> "LabeledFeatures":
        idx = np.asarray(indices, dtype=np.int64)
        new_labels = self.labels[idx] if labels is None else np.asarray(labels)
        return LabeledFeatures(self.x[idx], new_labels)


@dataclass
class FoldPlan:
    """Stratified fold assignments, one row of fold indices per repeat."""

    assignments: np.ndarray  # (repeats, n) fold index per sample
    k: int
    repeats: int
    seed: int

    def split(self, repeat: int, fold: int):
        """Train/test index arrays for one repeat-fold cell."""
        row = self.assignments[repeat]
        test = np.flatnonzero(row == fold)
        train = np.flatnonzero(row != fold)
        return train, test

    def iter_splits(self):
        for r in range(self.repeats):
            for f in range(self.k):
                train, test = self.split(r, f)
                yield r, f, train, test


@dataclass(frozen=True)
class Hierarchy:
    """Ordered class indices defining a chain of one-versus-rest levels.

    Level ``l`` (1-based) separates ``order[l-1]`` (state +1) from all later
    classes (state -1); a hierarchy over L classes has L-1 levels.
    """

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(c) for c in self.order))
        if len(set(self.order)) != len(self.order) or len(self.order) < 2:
            raise ValueError("hierarchy order must be >=2 distinct class indices")

    @property
    def n_classes(self) -> int:
        return len(self.order)

    @property
    def n_levels(self) -> int:
        return len(self.order) - 1


def load_epochs(path) -> EpochSet:
    """Load an epoch directory (manifest.json, data.f32, labels.csv).

    The binary file is row-major ``[trial][channel][sample]`` little-endian
    float32; labels are 1-based integers, one per line in trial order.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    data_path = root / "data.f32"
    labels_path = root / "labels.csv"
    for p in (manifest_path, data_path, labels_path):
        if not p.exists():
            raise FileNotFoundError(f"missing required file: {p}")
    manifest = json.loads(manifest_path.read_text())
    trials = int(manifest["trials"])
    channels = int(manifest["channels"])
    samples = int(manifest["samples"])
    fs = float(manifest["fs"])
    classes = int(manifest.get("classes", 0))
    names = tuple(manifest.get("channel_names", ()))

    raw = data_path.read_bytes()
    expected = trials * channels * samples * 4
    if len(raw) != expected:
        raise ValueError(
            f"data.f32 holds {len(raw)} bytes, manifest implies {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    data = data.reshape(trials, channels, samples)

    labels = np.array(
        [int(line) for line in labels_path.read_text().split()], dtype=np.int64
    )
    if labels.shape != (trials,):
        raise ValueError(f"labels.csv holds {len(labels)} labels for {trials} trials")
    if classes and (labels.min() < 1 or labels.max() > classes):
        raise ValueError(f"labels outside 1..{classes}")
    return EpochSet(data, labels, fs, names)


def save_epochs(epochs: EpochSet, path, classes: int | None = None) -> None:
    """Write an EpochSet as an epoch directory (see :func:`load_epochs`)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if classes is None:
        classes = int(epochs.labels.max())
    manifest = {
        "trials": epochs.n_trials,
        "channels": epochs.n_channels,
        "samples": epochs.n_samples,
        "fs": epochs.fs,
        "classes": classes,
        "channel_names": list(epochs.channel_names),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2))
    (root / "data.f32").write_bytes(
        np.ascontiguousarray(epochs.data, dtype="<f4").tobytes()
    )
    (root / "labels.csv").write_text(
        "\n".join(str(int(c)) for c in epochs.labels) + "\n"
    )


def load_features(features_path, labels_path) -> LabeledFeatures:
    """Load a header-less CSV of floats plus a labels CSV (one int per line)."""
    x = np.loadtxt(features_path, delimiter=",", ndmin=2, dtype=np.float64)
    labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
    return LabeledFeatures(x, labels)


def save_features(features: LabeledFeatures, features_path, labels_path) -> None:
    rows = [",".join(repr(float(v)) for v in row) for row in features.x]
    Path(features_path).write_text("\n".join(rows) + "\n")
    Path(labels_path).write_text(
        "\n".join(str(int(c)) for c in features.labels) + "\n"
    )


def synth_gaussian(means, cov_diag, samples_per_class: int, seed: int) -> LabeledFeatures:
    """Draw per-class Gaussian features with a shared diagonal covariance.

    ``means`` is (L, d); class labels are 1..L. Deterministic per seed.
    """
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    var = np.broadcast_to(np.asarray(cov_diag, dtype=np.float64), (means.shape[1],))
    if np.any(var <= 0):
        raise ValueError("covariance diagonal must be strictly positive")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for c, mu in enumerate(means, start=1):
        blocks.append(mu + rng.standard_normal((samples_per_class, means.shape[1])) * np.sqrt(var))
        labels.extend([c] * samples_per_class)
    return LabeledFeatures(np.vstack(blocks), np.array(labels))


@dataclass(frozen=True)
class OscClass:
    """One class of the oscillatory generator: a sinusoid at ``freq_hz``
    with the given amplitude on the listed channels."""

    freq_hz: float
    channels: tuple[int, ...]
    amplitude: float


def synth_oscillatory_epochs(
    class_specs: Sequence[OscClass],
    n_channels: int,
    fs: float,
    duration_s: float,
    trials_per_class: int,
    noise_std: float,
    seed: int,
) -> EpochSet:
    """Generate epochs where each class drives its channels at its own frequency.

    Every channel carries white noise of ``noise_std``; the class's channels
    additionally carry a fixed-amplitude sinusoid with a random phase per
    trial. Deterministic per seed.
    """
    for spec in class_specs:
        if spec.freq_hz >= fs / 2:
            raise ValueError(
                f"class frequency {spec.freq_hz} Hz at or above Nyquist ({fs / 2} Hz)"
            )
        if any(ch < 0 or ch >= n_channels for ch in spec.channels):
            raise ValueError("oscillation channel index out of range")
    rng = np.random.default_rng(seed)
    n_samples = int(round(fs * duration_s))
    t = np.arange(n_samples) / fs
    data = []
    labels = []
    for c, spec in enumerate(class_specs, start=1):
        for _ in range(trials_per_class):
            trial = rng.standard_normal((n_channels, n_samples)) * noise_std
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wave = spec.amplitude * np.sin(2.0 * np.pi * spec.freq_hz * t + phase)
            for ch in spec.channels:
                trial[ch] += wave
            data.append(trial)
            labels.append(c)
    return EpochSet(np.array(data), np.array(labels), fs)


def stratified_kfold(labels, k: int, repeats: int, seed: int) -> FoldPlan:
    """Plan stratified k-fold assignments, repeated ``repeats`` times.

    Per-class fold sizes follow largest-remainder rounding; the folds taking
    the extra samples rotate across classes so total fold sizes differ by at
    most one. Deterministic per seed.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    classes = np.unique(labels)
    for c in classes:
        count = int(np.sum(labels == c))
        if count < k:
            raise ValueError(f"class {c} has {count} samples, fewer than k={k}")
    rng = np.random.default_rng(seed)
    assignments = np.empty((repeats, n), dtype=np.int64)
    for r in range(repeats):
        offset = 0
        for c in classes:
            idx = np.flatnonzero(labels == c)
            idx = rng.permutation(idx)
            m = len(idx)
            base, extra = divmod(m, k)
            sizes = np.full(k, base, dtype=np.int64)
            for e in range(extra):
                sizes[(offset + e) % k] += 1
            offset = (offset + extra) % k
            start = 0
            for fold in range(k):
                assignments[r, idx[start : start + sizes[fold]]] = fold
                start += sizes[fold]
    return FoldPlan(assignments=assignments, k=k, repeats=repeats, seed=seed)


def hierarchy_level_indices(labels, hierarchy: Hierarchy, level: int):
    """Row indices reaching ``level`` and their +1/-1 state labels.

    Keeps samples of classes ``order[level-1:]``; the class at this level
    maps to +1 and the continuing branch to -1. Row order is preserved.
    """
    if level < 1 or level > hierarchy.n_levels:
        raise ValueError(f"level must be in 1..{hierarchy.n_levels}, got {level}")
    labels = np.asarray(labels, dtype=np.int64)
    kept_classes = hierarchy.order[level - 1 :]
    positive = hierarchy.order[level - 1]
    mask = np.isin(labels, kept_classes)
    indices = np.flatnonzero(mask)
    signs = np.where(labels[indices] == positive, 1, -1).astype(np.int64)
    return indices, signs


def hierarchy_split(features: LabeledFeatures, hierarchy: Hierarchy, level: int) -> LabeledFeatures:
    """Binary one-versus-rest subset of ``features`` at a hierarchy level."""
    indices, signs = hierarchy_level_indices(features.labels, hierarchy, level)
    return LabeledFeatures(features.x[indices], signs)
