"""Binary KDE MAP classification and hierarchical multi-class decoding.

The multi-class problem over L classes is decomposed into L-1 one-versus-rest
binary levels arranged as a disjunction chain. Each level owns its feature
pipeline (spatial-filter front end plus an optional reducer) and a binary
kernel-density classifier; decoding scores every class's deterministic state
path through the chain and picks the maximum-a-posteriori class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .csp import FbcspModel, csp_pair_partner, fbcsp_features, fit_fbcsp
from .dataset import (
    EpochSet,
    Hierarchy,
    LabeledFeatures,
    hierarchy_level_indices,
    stratified_kfold,
)
from .density import ClassDensities, KdeModel, fit_class_densities, kde_logpdf
from .selection import mmi_select, mrmr_select, r2_select, sda_select
from .transform import (
    StandardizationStats,
    TrainConfig,
    fit_mmi,
    forward,
    standardize_apply,
    transform_from_dict,
)

__all__ = [
    "BinaryKdeClassifier",
    "PipelineConfig",
    "LevelModel",
    "HierarchicalDecoder",
    "fit_binary_kde",
    "classify_binary",
    "transition_priors",
    "fit_hierarchical",
    "decode",
]

PAPER_BANDS = ((8.0, 12.0), (12.0, 16.0), (16.0, 22.0), (22.0, 30.0))
SINGLE_BAND = ((8.0, 30.0),)


@dataclass
class BinaryKdeClassifier:
    """Per-class Gaussian KDEs with priors over the labels {+1, -1}."""

    densities: ClassDensities

    def __post_init__(self):
        if set(self.densities.classes) != {1, -1}:
            raise ValueError("binary classifier requires classes {+1, -1}")

    def log_likelihood(self, y, label: int) -> float:
        i = self.densities.classes.index(label)
        return kde_logpdf(self.densities.models[i], np.asarray(y, dtype=np.float64))

    def log_prior(self, label: int) -> float:
        i = self.densities.classes.index(label)
        return float(np.log(self.densities.priors[i]))

    @property
    def dim(self) -> int:
        return self.densities.models[0].d

    def to_dict(self) -> dict:
        return {
            "classes": list(self.densities.classes),
            "priors": [float(p) for p in self.densities.priors],
            "models": [
                {
                    "centers": [float(v) for v in m.centers.ravel()],
                    "m": m.m,
                    "d": m.d,
                    "bandwidth": [float(v) for v in m.bandwidth],
                }
                for m in self.densities.models
            ],
        }

    @staticmethod
    def from_dict(payload: dict) -> "BinaryKdeClassifier":
        models = tuple(
            KdeModel(
                np.array(m["centers"], dtype=np.float64).reshape(m["m"], m["d"]),
                np.array(m["bandwidth"], dtype=np.float64),
            )
            for m in payload["models"]
        )
        densities = ClassDensities(
            tuple(payload["classes"]), models, np.array(payload["priors"])
        )
        return BinaryKdeClassifier(densities)


def fit_binary_kde(features: LabeledFeatures, uniform_priors: bool = False) -> BinaryKdeClassifier:
    """Fit per-label KDEs with Silverman bandwidths on +-1-labeled features."""
    classes = set(int(c) for c in features.classes)
    if classes != {1, -1}:
        raise ValueError(f"labels must be +-1 with both present, got {classes}")
    return BinaryKdeClassifier(fit_class_densities(features, uniform_priors))


def classify_binary(clf: BinaryKdeClassifier, y) -> tuple[int, tuple[float, float]]:
    """MAP decision over {+1, -1}; ties go to +1.

    Returns the label and the (plus, minus) unnormalized log posteriors.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (clf.dim,):
        raise ValueError(f"expected feature dimension {clf.dim}, got shape {y.shape}")
    log_plus = clf.log_prior(1) + clf.log_likelihood(y, 1)
    log_minus = clf.log_prior(-1) + clf.log_likelihood(y, -1)
    label = 1 if log_plus >= log_minus else -1
    return label, (log_plus, log_minus)


def transition_priors(hierarchy: Hierarchy, class_priors) -> np.ndarray:
    """P(state=+1 | level reached) for each level of the chain.

    At level l this is the prior of the level's class renormalized over the
    classes still reachable.
    """
    priors = np.asarray(class_priors, dtype=np.float64)
    if len(priors) != hierarchy.n_classes:
        raise ValueError("one prior per hierarchy class required")
    if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
        raise ValueError("class priors must be nonnegative and sum to 1")
    out = np.empty(hierarchy.n_levels)
    for level in range(hierarchy.n_levels):
        tail = priors[level:].sum()
        if tail <= 0:
            raise ValueError(f"no prior mass reaches level {level + 1}")
        out[level] = priors[level] / tail
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Per-level feature pipeline specification.

    ``front_end`` is "fbcsp", "csp" (single 8-30 Hz band) or "identity"
    (pre-extracted feature rows). ``reducer`` is one of "none", "r2", "sda",
    "mrmr", "mmi_select", "mmi_lint", "mmi_nonlint".
    """

    front_end: str = "fbcsp"
    bands: tuple[tuple[float, float], ...] = PAPER_BANDS
    filter_order: int = 4
    csp_k: int = 6
    reducer: str = "none"
    select_k: int = 6
    train: TrainConfig = field(default_factory=TrainConfig)
    uniform_priors: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.front_end not in ("fbcsp", "csp", "identity"):
            raise ValueError(f"unknown front end {self.front_end!r}")
        if self.reducer not in (
            "none",
            "r2",
            "sda",
            "mrmr",
            "mmi_select",
            "mmi_lint",
            "mmi_nonlint",
        ):
            raise ValueError(f"unknown reducer {self.reducer!r}")


@dataclass
class _FrontEnd:
    """Fitted front end: FBCSP filters or a feature passthrough."""

    kind: str
    model: FbcspModel | None = None
    dim: int | None = None

    def feature_matrix(self, data) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(data.x if isinstance(data, LabeledFeatures) else data)
        rows = [fbcsp_features(self.model, trial) for trial in data.data]
        return np.array(rows)

    def features(self, trial) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(trial, dtype=np.float64)
        return fbcsp_features(self.model, trial)

    @property
    def n_features(self) -> int:
        return self.dim if self.kind == "identity" else self.model.n_features

    def pair_map(self) -> list[int]:
        if self.kind == "identity":
            # interleaved halves, mirroring the CSP large/small pairing
            half = self.n_features // 2
            return [(j + half) % (2 * half) if j < 2 * half else j for j in range(self.n_features)]
        return csp_pair_partner(self.model.n_features, self.model.k)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": self.model.to_dict() if self.model is not None else None,
            "dim": self.dim,
        }

    @staticmethod
    def from_dict(payload: dict) -> "_FrontEnd":
        model = payload.get("model")
        return _FrontEnd(
            kind=payload["kind"],
            model=FbcspModel.from_dict(model) if model else None,
            dim=payload.get("dim"),
        )


@dataclass
class _Reducer:
    """Fitted dimensionality reduction stage of one level."""

    kind: str
    indices: list[int] | None = None
    transform: object | None = None
    standardization: StandardizationStats | None = None
    mi_trace: list[float] = field(default_factory=list)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "none":
            out = x
        elif self.kind == "select":
            out = x[:, self.indices]
        else:  # transform
            if self.standardization is not None:
                x = standardize_apply(self.standardization, x)
            out = forward(self.transform, x)
        return out

    def apply_one(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)[0]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "indices": self.indices,
            "transform": self.transform.to_dict() if self.transform is not None else None,
            "standardization": (
                self.standardization.to_dict() if self.standardization is not None else None
            ),
            "mi_trace": list(self.mi_trace),
        }

    @staticmethod
    def from_dict(payload: dict) -> "_Reducer":
        transform = payload.get("transform")
        stats = payload.get("standardization")
        return _Reducer(
            kind=payload["kind"],
            indices=payload.get("indices"),
            transform=transform_from_dict(transform) if transform else None,
            standardization=StandardizationStats.from_dict(stats) if stats else None,
            mi_trace=list(payload.get("mi_trace", ())),
        )


@dataclass
class LevelModel:
    """One binary level: front end, reducer, classifier, transition prior."""

    front_end: _FrontEnd
    reducer: _Reducer
    classifier: BinaryKdeClassifier
    p_plus: float

    def level_features(self, trial) -> np.ndarray:
        return self.reducer.apply_one(self.front_end.features(trial))

    def to_dict(self) -> dict:
        return {
            "front_end": self.front_end.to_dict(),
            "reducer": self.reducer.to_dict(),
            "classifier": self.classifier.to_dict(),
            "p_plus": self.p_plus,
        }

    @staticmethod
    def from_dict(payload: dict) -> "LevelModel":
        return LevelModel(
            front_end=_FrontEnd.from_dict(payload["front_end"]),
            reducer=_Reducer.from_dict(payload["reducer"]),
            classifier=BinaryKdeClassifier.from_dict(payload["classifier"]),
            p_plus=float(payload["p_plus"]),
        )


@dataclass
class HierarchicalDecoder:
    """L-1 fitted level models along a hierarchy over L classes."""

    hierarchy: Hierarchy
    levels: list[LevelModel]

    def __post_init__(self):
        if len(self.levels) != self.hierarchy.n_levels:
            raise ValueError("decoder needs exactly L-1 level models")

    def to_dict(self) -> dict:
        return {
            "hierarchy": list(self.hierarchy.order),
            "levels": [lv.to_dict() for lv in self.levels],
        }

    @staticmethod
    def from_dict(payload: dict) -> "HierarchicalDecoder":
        return HierarchicalDecoder(
            hierarchy=Hierarchy(tuple(payload["hierarchy"])),
            levels=[LevelModel.from_dict(lv) for lv in payload["levels"]],
        )

    def param_digest(self) -> str:
        """Stable digest of all fitted parameters, for leakage checks."""
        import hashlib
        import json

        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _inner_sweep_k(
    features: LabeledFeatures,
    pair_map: list[int],
    candidates: Sequence[int],
    uniform_priors: bool,
    seed: int,
) -> int:
    """Pick the pairwise-selection size by inner 3-fold validation accuracy."""
    feasible = [k for k in candidates if k <= features.d]
    if not feasible:
        raise ValueError("no feasible selection size")
    plan = stratified_kfold(features.labels, k=3, repeats=1, seed=seed)
    best_k, best_acc = None, None
    for k in sorted(feasible):
        correct = 0
        total = 0
        for _, _, train_idx, test_idx in plan.iter_splits():
            tr = features.subset(train_idx)
            te = features.subset(test_idx)
            picked = mmi_select(tr, k, pair_map).indices
            clf = fit_binary_kde(
                LabeledFeatures(tr.x[:, picked], tr.labels), uniform_priors
            )
            for row, lab in zip(te.x[:, picked], te.labels):
                pred, _ = classify_binary(clf, row)
                correct += pred == lab
                total += 1
        acc = correct / total
        if best_acc is None or acc > best_acc:
            best_k, best_acc = k, acc
    return best_k


def _fit_reducer(
    level_features: LabeledFeatures,
    config: PipelineConfig,
    pair_map: list[int],
    level_seed: int,
) -> _Reducer:
    kind = config.reducer
    if kind == "none":
        return _Reducer("none")
    if kind == "r2":
        res = r2_select(level_features, min(config.select_k, level_features.d))
        return _Reducer("select", indices=sorted(res.indices))
    if kind == "sda":
        res = sda_select(level_features, cap=config.select_k)
        indices = sorted(res.indices) if res.indices else [0]
        return _Reducer("select", indices=indices)
    if kind == "mrmr":
        res = mrmr_select(level_features, min(config.select_k, level_features.d))
        return _Reducer("select", indices=sorted(res.indices))
    if kind == "mmi_select":
        k = _inner_sweep_k(
            level_features, pair_map, (2, 4, 6), config.uniform_priors, level_seed
        )
        res = mmi_select(level_features, k, pair_map)
        return _Reducer("select", indices=sorted(res.indices))
    # mmi_lint / mmi_nonlint
    train_cfg = TrainConfig(
        d_y=config.train.d_y,
        d_z=config.train.d_z,
        epochs=config.train.epochs,
        step=config.train.step,
        momentum=config.train.momentum,
        seed=level_seed,
        standardize=config.train.standardize,
        bandwidth_refresh=config.train.bandwidth_refresh,
    )
    fit = fit_mmi(
        level_features,
        train_cfg,
        kind="linear" if kind == "mmi_lint" else "two_layer",
    )
    return _Reducer(
        "transform",
        transform=fit.transform,
        standardization=fit.standardization,
        mi_trace=fit.mi_trace,
    )


def _derive_seed(base: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**31))


def fit_hierarchical(
    train,
    hierarchy: Hierarchy,
    config: PipelineConfig,
) -> HierarchicalDecoder:
    """Fit the full per-level pipeline stack on training data.

    ``train`` is an EpochSet (spatial-filter front ends) or LabeledFeatures
    (identity front end). Each level fits on its one-versus-rest subset only.
    """
    is_epochs = isinstance(train, EpochSet)
    if config.front_end == "identity" and is_epochs:
        raise ValueError("identity front end expects LabeledFeatures")
    if config.front_end != "identity" and not is_epochs:
        raise ValueError("spatial front ends expect an EpochSet")
    present = set(int(c) for c in np.unique(train.labels))
    if not set(hierarchy.order) <= present:
        missing = set(hierarchy.order) - present
        raise ValueError(f"training data missing hierarchy classes {sorted(missing)}")

    if config.uniform_priors:
        class_priors = np.full(hierarchy.n_classes, 1.0 / hierarchy.n_classes)
    else:
        counts = np.array(
            [np.sum(train.labels == c) for c in hierarchy.order], dtype=np.float64
        )
        class_priors = counts / counts.sum()
    p_plus = transition_priors(hierarchy, class_priors)

    bands = SINGLE_BAND if config.front_end == "csp" else config.bands
    levels = []
    for level in range(1, hierarchy.n_levels + 1):
        indices, signs = hierarchy_level_indices(train.labels, hierarchy, level)
        if len(np.unique(signs)) < 2:
            raise ValueError(f"level {level} subset lacks one of the binary classes")
        if is_epochs:
            subset = train.subset(indices, signs)
            model = fit_fbcsp(subset, bands, k=config.csp_k, order=config.filter_order)
            fe = _FrontEnd("fbcsp", model=model)
            feats = fe.feature_matrix(subset)
        else:
            fe = _FrontEnd("identity", dim=train.x.shape[1])
            feats = train.x[indices]
        level_features = LabeledFeatures(feats, signs)
        level_seed = _derive_seed(config.seed, level)
        reducer = _fit_reducer(level_features, config, fe.pair_map(), level_seed)
        reduced = reducer.apply(level_features.x)
        clf = fit_binary_kde(
            LabeledFeatures(reduced, signs), uniform_priors=config.uniform_priors
        )
        levels.append(
            LevelModel(
                front_end=fe,
                reducer=reducer,
                classifier=clf,
                p_plus=float(p_plus[level - 1]),
            )
        )
    return HierarchicalDecoder(hierarchy=hierarchy, levels=levels)


def decode(decoder: HierarchicalDecoder, trial) -> tuple[int, np.ndarray]:
    """MAP class of one trial plus per-class path log scores.

    The score of the class at hierarchy position j sums, over the levels on
    its state path (levels 1..j, all -1 with a terminal +1, or all L-1
    levels -1 for the last class), the state log likelihood and the state
    transition log prior. Ties resolve to the earlier class in hierarchy
    order; scores are returned in hierarchy order.
    """
    n_levels = decoder.hierarchy.n_levels
    level_feats = [lv.level_features(trial) for lv in decoder.levels]
    loglik_plus = np.array(
        [lv.classifier.log_likelihood(f, 1) for lv, f in zip(decoder.levels, level_feats)]
    )
    loglik_minus = np.array(
        [lv.classifier.log_likelihood(f, -1) for lv, f in zip(decoder.levels, level_feats)]
    )
    logp_plus = np.array([np.log(lv.p_plus) for lv in decoder.levels])
    logp_minus = np.array([np.log1p(-lv.p_plus) for lv in decoder.levels])

    minus_cum = np.cumsum(loglik_minus + logp_minus)
    scores = np.empty(decoder.hierarchy.n_classes)
    for j in range(decoder.hierarchy.n_classes):
        if j < n_levels:
            below = minus_cum[j - 1] if j > 0 else 0.0
            scores[j] = below + loglik_plus[j] + logp_plus[j]
        else:  # last class: every level takes the continuing branch
            scores[j] = minus_cum[n_levels - 1]
    winner = int(np.argmax(scores))
    return decoder.hierarchy.order[winner], scores


def predict(decoder: HierarchicalDecoder, data) -> np.ndarray:
    """Decoded class for every trial/row of an EpochSet or LabeledFeatures."""
    if isinstance(data, EpochSet):
        rows = data.data
    elif isinstance(data, LabeledFeatures):
        rows = data.x
    else:
        rows = np.asarray(data)
    return np.array([decode(decoder, row)[0] for row in rows])
