"""Benchmark harness: run configuration, cross-validation, metrics, reports."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as _stats

from .dataset import (
    EpochSet,
    Hierarchy,
    LabeledFeatures,
    load_epochs,
    load_features,
    stratified_kfold,
)
from .decoder import PipelineConfig, decode, fit_hierarchical
from .presets import default_train_config, make_preset
from .transform import TrainConfig

__all__ = [
    "RunConfig",
    "Report",
    "run_cv",
    "run_cross_session",
    "confusion_matrix",
    "paired_ttest",
    "load_data_source",
]

PIPELINES = ("csp", "fbcsp", "r2", "sda", "mrmr", "mmi_select", "mmi_lint", "mmi_nonlint")


@dataclass
class RunConfig:
    """Full specification of a benchmark run.

    ``data_path`` points at an epoch directory (manifest.json) or a feature
    directory (features.csv + labels.csv); alternatively ``preset`` names a
    built-in generator seeded by ``data_seed``. Seeds are explicit and
    required for reproducibility.
    """

    pipeline: str
    cv_k: int = 5
    cv_repeats: int = 5
    cv_seed: int = 0
    data_path: str | None = None
    preset: str | None = None
    data_seed: int | None = None
    hierarchy: tuple[int, ...] | None = None
    train: TrainConfig | None = None
    bands: tuple[tuple[float, float], ...] | None = None
    filter_order: int = 4
    csp_k: int = 6
    select_k: int = 6
    uniform_priors: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}; choose from {PIPELINES}")
        if (self.data_path is None) == (self.preset is None):
            raise ValueError("exactly one of data_path or preset must be given")
        if self.preset is not None and self.data_seed is None:
            raise ValueError("preset data requires an explicit data_seed")

    @staticmethod
    def from_dict(payload: dict) -> "RunConfig":
        train = payload.get("train")
        hierarchy = payload.get("hierarchy")
        bands = payload.get("bands")
        return RunConfig(
            pipeline=payload["pipeline"],
            cv_k=int(payload.get("cv_k", 5)),
            cv_repeats=int(payload.get("cv_repeats", 5)),
            cv_seed=int(payload["cv_seed"]),
            data_path=payload.get("data_path"),
            preset=payload.get("preset"),
            data_seed=(
                int(payload["data_seed"]) if payload.get("data_seed") is not None else None
            ),
            hierarchy=tuple(hierarchy) if hierarchy else None,
            train=TrainConfig(**train) if train else None,
            bands=tuple(tuple(b) for b in bands) if bands else None,
            filter_order=int(payload.get("filter_order", 4)),
            csp_k=int(payload.get("csp_k", 6)),
            select_k=int(payload.get("select_k", 6)),
            uniform_priors=bool(payload.get("uniform_priors", True)),
            out=payload.get("out"),
        )

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "cv_k": self.cv_k,
            "cv_repeats": self.cv_repeats,
            "cv_seed": self.cv_seed,
            "data_path": self.data_path,
            "preset": self.preset,
            "data_seed": self.data_seed,
            "hierarchy": list(self.hierarchy) if self.hierarchy else None,
            "train": self.resolved_train().to_dict(),
            "bands": [list(b) for b in self.bands] if self.bands else None,
            "filter_order": self.filter_order,
            "csp_k": self.csp_k,
            "select_k": self.select_k,
            "uniform_priors": self.uniform_priors,
        }

    def resolved_train(self) -> TrainConfig:
        if self.train is not None:
            return self.train
        return default_train_config(self.preset, self.pipeline, seed=self.cv_seed)


@dataclass
class Report:
    """Per-fold accuracies plus aggregate metrics of one run."""

    config: dict
    folds: list[dict]
    mean: float
    std: float
    confusion: list[list[float]]
    mi_trace: list[float]
    wall_ms: float

    def accuracies(self) -> np.ndarray:
        return np.array([f["accuracy"] for f in self.folds])

    def to_json_dict(self) -> dict:
        # wall-clock time stays out of the serialized report so reruns with
        # identical seeds are byte-identical
        return {
            "config": self.config,
            "folds": self.folds,
            "mean": self.mean,
            "std": self.std,
            "confusion": self.confusion,
            "mi_trace": self.mi_trace,
        }

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"
        )


def load_data_source(config: RunConfig):
    """Materialize the configured data source (EpochSet or LabeledFeatures)."""
    if config.preset is not None:
        return make_preset(config.preset, config.data_seed)
    root = Path(config.data_path)
    if (root / "manifest.json").exists():
        return load_epochs(root)
    if (root / "features.csv").exists():
        return load_features(root / "features.csv", root / "labels.csv")
    raise FileNotFoundError(
        f"{root} holds neither an epoch directory nor a feature directory"
    )


def _pipeline_config(config: RunConfig, data, seed: int) -> PipelineConfig:
    if isinstance(data, EpochSet):
        front_end = "csp" if config.pipeline == "csp" else "fbcsp"
    else:
        front_end = "identity"
    reducer = "none" if config.pipeline in ("csp", "fbcsp") else config.pipeline
    kwargs = {}
    if config.bands is not None:
        kwargs["bands"] = config.bands
    return PipelineConfig(
        front_end=front_end,
        filter_order=config.filter_order,
        csp_k=config.csp_k,
        reducer=reducer,
        select_k=config.select_k,
        train=config.resolved_train(),
        uniform_priors=config.uniform_priors,
        seed=seed,
        **kwargs,
    )


def _hierarchy_for(config: RunConfig, labels) -> Hierarchy:
    if config.hierarchy is not None:
        return Hierarchy(config.hierarchy)
    return Hierarchy(tuple(int(c) for c in np.unique(labels)))


def confusion_matrix(truth, predicted, n_classes: int, classes=None) -> np.ndarray:
    """Row-normalized confusion matrix; entry (a, b) is the fraction of
    class-a trials predicted as class b. Rows without trials stay zero."""
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape:
        raise ValueError("truth and prediction lengths differ")
    if classes is None:
        classes = np.arange(1, n_classes + 1)
    index = {int(c): i for i, c in enumerate(classes)}
    counts = np.zeros((n_classes, n_classes))
    for t, p in zip(truth, predicted):
        counts[index[int(t)], index[int(p)]] += 1.0
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sums > 0, counts / sums, 0.0)
    return out


def paired_ttest(a, b) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t, p). Errors on zero-variance diffs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length score vectors of length >= 2")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0:
        raise ValueError("paired differences have zero variance")
    n = len(diff)
    t = diff.mean() / (sd / np.sqrt(n))
    p = 2.0 * float(_stats.t.sf(abs(t), n - 1))
    return float(t), p


def _subset(data, idx):
    return data.subset(idx)


def _mean_trace(traces: list[list[float]]) -> list[float]:
    if not traces:
        return []
    length = min(len(t) for t in traces)
    arr = np.array([t[:length] for t in traces])
    return [float(v) for v in arr.mean(axis=0)]


def run_cv(config: RunConfig) -> Report:
    """Repeated stratified k-fold evaluation of the configured pipeline.

    Every fold fits the full pipeline (filters, spatial patterns, reducers,
    classifiers) on its training split only.
    """
    t0 = time.perf_counter()
    data = load_data_source(config)
    hierarchy = _hierarchy_for(config, data.labels)
    plan = stratified_kfold(data.labels, config.cv_k, config.cv_repeats, config.cv_seed)
    folds = []
    truth_all, pred_all = [], []
    traces: list[list[float]] = []
    for repeat, fold, train_idx, test_idx in plan.iter_splits():
        fold_seed = _fold_seed(config.cv_seed, repeat, fold)
        pcfg = _pipeline_config(config, data, seed=fold_seed)
        decoder = fit_hierarchical(_subset(data, train_idx), hierarchy, pcfg)
        test = _subset(data, test_idx)
        rows = test.data if isinstance(test, EpochSet) else test.x
        preds = np.array([decode(decoder, row)[0] for row in rows])
        acc = float(np.mean(preds == test.labels))
        folds.append({"repeat": repeat, "fold": fold, "accuracy": acc})
        truth_all.extend(int(v) for v in test.labels)
        pred_all.extend(int(v) for v in preds)
        for lv in decoder.levels:
            if lv.reducer.mi_trace:
                traces.append(lv.reducer.mi_trace)
    accs = np.array([f["accuracy"] for f in folds])
    classes = list(hierarchy.order)
    conf = confusion_matrix(truth_all, pred_all, len(classes), classes=sorted(classes))
    return Report(
        config=config.to_dict(),
        folds=folds,
        mean=float(accs.mean()),
        std=float(accs.std(ddof=1)) if len(accs) > 1 else 0.0,
        confusion=[[float(v) for v in row] for row in conf],
        mi_trace=_mean_trace(traces),
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


def _fold_seed(base: int, repeat: int, fold: int) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=(repeat, fold))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**31))


def run_cross_session(train_path, test_path, config: RunConfig) -> Report:
    """Fit on one session, evaluate on the other, in both directions."""
    t0 = time.perf_counter()
    sess = []
    for path in (train_path, test_path):
        src = RunConfig(
            pipeline=config.pipeline,
            cv_seed=config.cv_seed,
            data_path=str(path),
            train=config.train,
            hierarchy=config.hierarchy,
            bands=config.bands,
            filter_order=config.filter_order,
            csp_k=config.csp_k,
            select_k=config.select_k,
            uniform_priors=config.uniform_priors,
        )
        sess.append(load_data_source(src))
    a, b = sess
    geom = lambda d: (
        (d.n_channels, d.n_samples) if isinstance(d, EpochSet) else (d.d,)
    )
    if geom(a) != geom(b) or set(np.unique(a.labels)) != set(np.unique(b.labels)):
        raise ValueError("sessions disagree in geometry or label sets")

    hierarchy = _hierarchy_for(config, a.labels)
    folds = []
    truth_all, pred_all = [], []
    traces: list[list[float]] = []
    for direction, (src, dst) in enumerate(((a, b), (b, a))):
        pcfg = _pipeline_config(config, src, seed=_fold_seed(config.cv_seed, direction, 0))
        decoder = fit_hierarchical(src, hierarchy, pcfg)
        rows = dst.data if isinstance(dst, EpochSet) else dst.x
        preds = np.array([decode(decoder, row)[0] for row in rows])
        acc = float(np.mean(preds == dst.labels))
        folds.append({"repeat": 0, "fold": direction, "accuracy": acc})
        truth_all.extend(int(v) for v in dst.labels)
        pred_all.extend(int(v) for v in preds)
        for lv in decoder.levels:
            if lv.reducer.mi_trace:
                traces.append(lv.reducer.mi_trace)
    accs = np.array([f["accuracy"] for f in folds])
    classes = list(hierarchy.order)
    conf = confusion_matrix(truth_all, pred_all, len(classes), classes=sorted(classes))
    return Report(
        config={**config.to_dict(), "cross_session": [str(train_path), str(test_path)]},
        folds=folds,
        mean=float(accs.mean()),
        std=float(accs.std(ddof=1)),
        confusion=[[float(v) for v in row] for row in conf],
        mi_trace=_mean_trace(traces),
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
