"""Maximum-mutual-information feature transforms and their trainer.

A linear transform projects features through a single matrix; the nonlinear
variant is a two-layer perceptron with a rectified hidden layer and no bias
terms. Both are trained by momentum stochastic gradient ascent on a
single-sample mutual-information estimate between transformed features and
class labels, where the class-conditional densities are Gaussian KDEs
refitted on the transformed training data as training progresses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import LabeledFeatures
from .density import (
    _mi_and_grad_arrays,
    average_mi,
    silverman_bandwidth,
)

__all__ = [
    "LinearTransform",
    "TwoLayerTransform",
    "TrainConfig",
    "StandardizationStats",
    "MmiFit",
    "init_transform",
    "forward",
    "mi_gradient",
    "fit_mmi",
    "standardize_fit",
    "standardize_apply",
]

PARAM_LIMIT = 1e6  # divergence guard on any single parameter magnitude


@dataclass
class LinearTransform:
    """y = M x with M of shape (d_y, d_x)."""

    m: np.ndarray

    def __post_init__(self):
        self.m = np.atleast_2d(np.asarray(self.m, dtype=np.float64))
        if not np.isfinite(self.m).all():
            raise ValueError("transform matrix must be finite")

    @property
    def d_x(self) -> int:
        return self.m.shape[1]

    @property
    def d_y(self) -> int:
        return self.m.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "d_x": self.d_x,
            "d_y": self.d_y,
            "m": [float(v) for v in self.m.ravel()],
        }

    @staticmethod
    def from_dict(payload: dict) -> "LinearTransform":
        m = np.array(payload["m"], dtype=np.float64).reshape(
            payload["d_y"], payload["d_x"]
        )
        return LinearTransform(m)


@dataclass
class TwoLayerTransform:
    """y = M2 max(0, M1 x) with M1 (d_z, d_x) and M2 (d_y, d_z)."""

    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        self.m1 = np.atleast_2d(np.asarray(self.m1, dtype=np.float64))
        self.m2 = np.atleast_2d(np.asarray(self.m2, dtype=np.float64))
        if self.m2.shape[1] != self.m1.shape[0]:
            raise ValueError("layer shapes do not compose")
        if not (np.isfinite(self.m1).all() and np.isfinite(self.m2).all()):
            raise ValueError("transform matrices must be finite")

    @property
    def d_x(self) -> int:
        return self.m1.shape[1]

    @property
    def d_z(self) -> int:
        return self.m1.shape[0]

    @property
    def d_y(self) -> int:
        return self.m2.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "two_layer",
            "d_x": self.d_x,
            "d_z": self.d_z,
            "d_y": self.d_y,
            "m1": [float(v) for v in self.m1.ravel()],
            "m2": [float(v) for v in self.m2.ravel()],
        }

    @staticmethod
    def from_dict(payload: dict) -> "TwoLayerTransform":
        m1 = np.array(payload["m1"], dtype=np.float64).reshape(
            payload["d_z"], payload["d_x"]
        )
        m2 = np.array(payload["m2"], dtype=np.float64).reshape(
            payload["d_y"], payload["d_z"]
        )
        return TwoLayerTransform(m1, m2)


def transform_from_dict(payload: dict):
    if payload["kind"] == "linear":
        return LinearTransform.from_dict(payload)
    if payload["kind"] == "two_layer":
        return TwoLayerTransform.from_dict(payload)
    raise ValueError(f"unknown transform kind {payload['kind']!r}")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the stochastic MI ascent.

    ``bandwidth_refresh`` is the iteration period at which per-class
    Silverman bandwidths are refitted on the transformed training data
    (1 refits every iteration).
    """

    d_y: int = 2
    d_z: int = 30
    epochs: int = 20
    step: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    standardize: bool = True
    bandwidth_refresh: int = 1

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("at least one training epoch required")
        if self.bandwidth_refresh < 1:
            raise ValueError("bandwidth refresh period must be >= 1")

    def to_dict(self) -> dict:
        return {
            "d_y": self.d_y,
            "d_z": self.d_z,
            "epochs": self.epochs,
            "step": self.step,
            "momentum": self.momentum,
            "seed": self.seed,
            "standardize": self.standardize,
            "bandwidth_refresh": self.bandwidth_refresh,
        }


@dataclass
class StandardizationStats:
    """Per-dimension affine map learned on training features."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if np.any(self.std <= 0):
            raise ValueError("standardization stds must be positive")

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    @staticmethod
    def from_dict(payload: dict) -> "StandardizationStats":
        return StandardizationStats(
            np.array(payload["mean"]), np.array(payload["std"])
        )


def standardize_fit(x) -> StandardizationStats:
    """Column means/stds of the fitting data; zero-spread columns get std 1."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=0)
    std = np.where(std > 0.0, std, 1.0)
    return StandardizationStats(mean, std)


def standardize_apply(stats: StandardizationStats, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (x - stats.mean) / stats.std


def init_transform(kind: str, d_x: int, d_y: int, d_z: int | None = None, seed: int = 0):
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], deterministic per seed."""
    if d_x < 1 or d_y < 1:
        raise ValueError("transform dimensions must be positive")
    rng = np.random.default_rng(seed)
    if kind == "linear":
        bound = 1.0 / np.sqrt(d_x)
        return LinearTransform(rng.uniform(-bound, bound, size=(d_y, d_x)))
    if kind == "two_layer":
        if d_z is None or d_z < 1:
            raise ValueError("two-layer transform requires d_z >= 1")
        b1 = 1.0 / np.sqrt(d_x)
        b2 = 1.0 / np.sqrt(d_z)
        m1 = rng.uniform(-b1, b1, size=(d_z, d_x))
        m2 = rng.uniform(-b2, b2, size=(d_y, d_z))
        return TwoLayerTransform(m1, m2)
    raise ValueError(f"unknown transform kind {kind!r}")


def forward(transform, x) -> np.ndarray:
    """Apply a transform to a single vector (d_x,) or a batch (n, d_x)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != transform.d_x:
        raise ValueError(f"expected input dimension {transform.d_x}, got {xb.shape[1]}")
    if isinstance(transform, LinearTransform):
        y = xb @ transform.m.T
    elif isinstance(transform, TwoLayerTransform):
        z = np.maximum(0.0, xb @ transform.m1.T)
        y = z @ transform.m2.T
    else:
        raise TypeError(f"unsupported transform type {type(transform)!r}")
    return y[0] if single else y


def mi_gradient(transform, x, centers_per_class, bandwidths_per_class, priors):
    """Gradient of the single-sample MI estimate with respect to the parameters.

    ``centers_per_class`` holds already-transformed kernel centers (with the
    current sample removed from its own class); they are treated as constants,
    so the gradient flows only through y = psi(x). Returns a (d_y, d_x) array
    for a linear transform and an (m1_grad, m2_grad) pair for a two-layer one.
    The rectifier subgradient at zero is zero.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = [np.atleast_2d(np.asarray(c, dtype=np.float64)) for c in centers_per_class]
    bandwidths = [np.asarray(b, dtype=np.float64) for b in bandwidths_per_class]
    for c in centers:
        if c.shape[0] < 1:
            raise ValueError("every class needs at least one kernel center")
    priors = np.asarray(priors, dtype=np.float64)
    if isinstance(transform, LinearTransform):
        y = transform.m @ x
        _, dy = _mi_and_grad_arrays(y, centers, bandwidths, priors)
        return np.outer(dy, x)
    if isinstance(transform, TwoLayerTransform):
        pre = transform.m1 @ x
        z = np.maximum(0.0, pre)
        y = transform.m2 @ z
        _, dy = _mi_and_grad_arrays(y, centers, bandwidths, priors)
        g2 = np.outer(dy, z)
        dz = transform.m2.T @ dy
        dpre = dz * (pre > 0.0)
        g1 = np.outer(dpre, x)
        return g1, g2
    raise TypeError(f"unsupported transform type {type(transform)!r}")


@dataclass
class MmiFit:
    """Trained transform, the input standardization, and the per-epoch MI trace."""

    transform: object
    standardization: StandardizationStats | None
    mi_trace: list[float] = field(default_factory=list)


def _check_finite(arrays, context: str):
    for a in arrays:
        if not np.isfinite(a).all() or np.max(np.abs(a)) > PARAM_LIMIT:
            raise RuntimeError(
                f"training diverged ({context}): parameters non-finite or "
                f"exceeding {PARAM_LIMIT:g}; reduce the step size"
            )


def fit_mmi(features: LabeledFeatures, config: TrainConfig, kind: str = "linear") -> MmiFit:
    """Train a transform by momentum stochastic MI ascent.

    Each epoch visits all training samples once in a seeded random order with
    batch size one. At every iteration the full training set is re-transformed
    with the current parameters, per-class bandwidths are refitted on the
    refresh schedule, the current sample is dropped from its own class's
    centers, and the parameters take a momentum step along the stochastic MI
    gradient. The recorded trace holds the leave-one-out average MI of the
    transformed training data at the end of each epoch.
    """
    classes = [int(c) for c in features.classes]
    if len(classes) < 2:
        raise ValueError("training requires at least two classes")
    class_rows = [np.flatnonzero(features.labels == c) for c in classes]
    if any(len(r) < 2 for r in class_rows):
        raise ValueError("training requires at least two samples per class")

    if config.standardize:
        stats = standardize_fit(features.x)
        x = standardize_apply(stats, features.x)
    else:
        stats = None
        x = features.x.copy()
    n, d_x = x.shape
    priors = np.array([len(r) / n for r in class_rows])
    class_of_row = np.empty(n, dtype=np.int64)
    for j, rows in enumerate(class_rows):
        class_of_row[rows] = j
    # position of each sample inside its class block, for self-removal
    pos_in_class = np.empty(n, dtype=np.int64)
    for rows in class_rows:
        pos_in_class[rows] = np.arange(len(rows))

    transform = init_transform(kind, d_x, config.d_y, config.d_z, config.seed)
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(1,))
    )

    linear = kind == "linear"
    params = [transform.m] if linear else [transform.m1, transform.m2]
    velocity = [np.zeros_like(p) for p in params]

    bandwidths = None
    iteration = 0
    trace: list[float] = []
    for _epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        for t in order:
            if linear:
                y = x @ transform.m.T
            else:
                pre = x @ transform.m1.T
                z = np.maximum(0.0, pre)
                y = z @ transform.m2.T
            if bandwidths is None or iteration % config.bandwidth_refresh == 0:
                bandwidths = [silverman_bandwidth(y[rows]) for rows in class_rows]
            j = class_of_row[t]
            centers = [y[rows] for rows in class_rows]
            centers[j] = np.delete(centers[j], pos_in_class[t], axis=0)
            _, dy = _mi_and_grad_arrays(y[t], centers, bandwidths, priors)
            if linear:
                grads = [np.outer(dy, x[t])]
            else:
                g2 = np.outer(dy, z[t])
                dpre = (transform.m2.T @ dy) * (pre[t] > 0.0)
                grads = [np.outer(dpre, x[t]), g2]
            for v, p, g in zip(velocity, params, grads):
                v *= config.momentum
                v += config.step * g
                p += v
            _check_finite(params, f"iteration {iteration}")
            iteration += 1
        y = forward(transform, x)
        epoch_mi = average_mi(LabeledFeatures(y, features.labels), leave_one_out=True)
        if not np.isfinite(epoch_mi):
            raise RuntimeError("training diverged: MI trace became non-finite")
        trace.append(float(epoch_mi))
    return MmiFit(transform=transform, standardization=stats, mi_trace=trace)
