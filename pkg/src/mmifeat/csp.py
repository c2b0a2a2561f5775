"""Common spatial patterns and filter-bank CSP feature extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as _linalg

from .dataset import EpochSet
from .dsp import apply_bank, design_bandpass, filtfilt

__all__ = [
    "SpatialFilters",
    "FbcspModel",
    "class_covariance",
    "fit_csp",
    "csp_features",
    "fit_fbcsp",
    "fbcsp_features",
]

RIDGE = 1e-8  # relative diagonal loading applied before the eigensolve


@dataclass
class SpatialFilters:
    """K spatial filters as columns of W, paired largest/smallest eigenvalue.

    Columns 0..K/2-1 hold the filters with the largest generalized
    eigenvalues (descending); columns K/2..K-1 the smallest (ascending).
    """

    w: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.w.shape[1] != len(self.eigenvalues):
            raise ValueError("one eigenvalue per filter column required")

    @property
    def n_channels(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.w.shape[1]

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "k": self.k,
            "w": [float(v) for v in self.w.ravel()],
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }

    @staticmethod
    def from_dict(payload: dict) -> "SpatialFilters":
        w = np.array(payload["w"], dtype=np.float64).reshape(
            payload["n_channels"], payload["k"]
        )
        return SpatialFilters(w, np.array(payload["eigenvalues"], dtype=np.float64))


@dataclass
class FbcspModel:
    """Per-band spatial filters; features concatenate in band order."""

    bands: tuple[tuple[float, float], ...]
    filters: tuple[SpatialFilters, ...]
    order: int
    fs: float
    k: int

    @property
    def n_features(self) -> int:
        return len(self.bands) * self.k

    def to_dict(self) -> dict:
        return {
            "bands": [list(b) for b in self.bands],
            "filters": [f.to_dict() for f in self.filters],
            "order": self.order,
            "fs": self.fs,
            "k": self.k,
        }

    @staticmethod
    def from_dict(payload: dict) -> "FbcspModel":
        return FbcspModel(
            bands=tuple(tuple(b) for b in payload["bands"]),
            filters=tuple(SpatialFilters.from_dict(f) for f in payload["filters"]),
            order=int(payload["order"]),
            fs=float(payload["fs"]),
            k=int(payload["k"]),
        )


def class_covariance(epochs) -> np.ndarray:
    """Average trace-normalized spatial covariance of one class's epochs.

    Each epoch is channel-mean-removed, its covariance divided by its trace,
    and the per-epoch matrices averaged; the result has unit trace.
    """
    epochs = np.asarray(epochs, dtype=np.float64)
    if epochs.ndim == 2:
        epochs = epochs[None, :, :]
    if epochs.shape[0] < 1:
        raise ValueError("at least one epoch required")
    acc = np.zeros((epochs.shape[1], epochs.shape[1]))
    for trial in epochs:
        centered = trial - trial.mean(axis=1, keepdims=True)
        cov = centered @ centered.T
        tr = np.trace(cov)
        if tr <= 0:
            raise ValueError("epoch with zero variance")
        acc += cov / tr
    return acc / epochs.shape[0]


def _fix_sign(w: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of each column positive."""
    w = w.copy()
    for j in range(w.shape[1]):
        col = w[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0:
            w[:, j] = -col
    return w


def fit_csp(cov1: np.ndarray, cov2: np.ndarray, k: int) -> SpatialFilters:
    """Solve the generalized eigenproblem cov1 w = lambda cov2 w for K filters.

    Realized as Cholesky whitening of cov2 followed by a symmetric
    eigensolve. Returns K/2 largest-eigenvalue filters then K/2 smallest,
    columns normalized to unit length with the leading component positive.
    """
    cov1 = np.asarray(cov1, dtype=np.float64)
    cov2 = np.asarray(cov2, dtype=np.float64)
    n = cov1.shape[0]
    if cov1.shape != (n, n) or cov2.shape != (n, n):
        raise ValueError("covariances must be square and same size")
    if k % 2 != 0 or k < 2:
        raise ValueError("K must be a positive even number")
    if k > n:
        raise ValueError(f"K={k} exceeds channel count {n}")

    c1 = cov1 + RIDGE * np.mean(np.diag(cov1)) * np.eye(n)
    c2 = cov2 + RIDGE * np.mean(np.diag(cov2)) * np.eye(n)
    try:
        chol = _linalg.cholesky(c2, lower=True)
    except _linalg.LinAlgError as exc:
        raise ValueError("second covariance not positive definite") from exc
    inv_chol = _linalg.solve_triangular(chol, np.eye(n), lower=True)
    whitened = inv_chol @ c1 @ inv_chol.T
    eigvals, eigvecs = np.linalg.eigh((whitened + whitened.T) / 2.0)  # ascending
    w_full = inv_chol.T @ eigvecs

    half = k // 2
    top = np.arange(n - 1, n - 1 - half, -1)  # largest, descending
    bottom = np.arange(0, half)  # smallest, ascending
    idx = np.concatenate([top, bottom])
    w = w_full[:, idx]
    w = w / np.linalg.norm(w, axis=0, keepdims=True)
    w = _fix_sign(w)
    return SpatialFilters(w, eigvals[idx])


def csp_features(filters: SpatialFilters, epoch) -> np.ndarray:
    """Log-normalized variances of the spatially filtered epoch.

    f_j = log(var_j / sum_i var_i); entries are <= 0 and exp-sum to 1.
    """
    epoch = np.asarray(epoch, dtype=np.float64)
    if epoch.shape[0] != filters.n_channels:
        raise ValueError(
            f"epoch has {epoch.shape[0]} channels, filters expect {filters.n_channels}"
        )
    centered = epoch - epoch.mean(axis=1, keepdims=True)
    projected = filters.w.T @ centered
    variances = np.mean(projected**2, axis=1)
    total = variances.sum()
    if total <= 0:
        raise ValueError("epoch has zero variance under the spatial filters")
    return np.log(variances / total)


def fit_fbcsp(
    train: EpochSet,
    bands: Sequence[tuple[float, float]],
    k: int = 6,
    order: int = 4,
) -> FbcspModel:
    """Fit per-band CSP filters on a binary-labeled epoch set.

    Labels must take exactly two values; the larger label drives the
    numerator covariance.
    """
    classes = np.unique(train.labels)
    if len(classes) != 2:
        raise ValueError(f"binary labels required, got classes {classes}")
    pos, neg = classes.max(), classes.min()
    filters = []
    for low, high in bands:
        filt = design_bandpass(low, high, train.fs, order)
        filtered = filtfilt(filt, train.data)
        cov_pos = class_covariance(filtered[train.labels == pos])
        cov_neg = class_covariance(filtered[train.labels == neg])
        filters.append(fit_csp(cov_pos, cov_neg, k))
    return FbcspModel(
        bands=tuple((float(lo), float(hi)) for lo, hi in bands),
        filters=tuple(filters),
        order=order,
        fs=train.fs,
        k=k,
    )


def fbcsp_features(model: FbcspModel, epoch) -> np.ndarray:
    """Concatenated per-band CSP features for one (channels, samples) epoch."""
    parts = []
    for band_epoch, filters in zip(
        apply_bank(model.bands, model.order, model.fs, epoch), model.filters
    ):
        parts.append(csp_features(filters, band_epoch))
    return np.concatenate(parts)


def fbcsp_feature_matrix(model: FbcspModel, epochs: EpochSet) -> np.ndarray:
    """FBCSP features for every trial of an epoch set, shape (n, bands*K)."""
    return np.array([fbcsp_features(model, trial) for trial in epochs.data])


def csp_pair_partner(n_features: int, k: int) -> list[int]:
    """Eigen-pair partner index for concatenated per-band CSP features.

    Within each band block of size K, the j-th largest-eigenvalue filter is
    paired with the j-th smallest.
    """
    if n_features % k != 0:
        raise ValueError("feature count must be a multiple of K")
    half = k // 2
    partner = []
    for j in range(n_features):
        offset = (j // k) * k
        within = j % k
        partner.append(offset + (within + half) % k)
    return partner
