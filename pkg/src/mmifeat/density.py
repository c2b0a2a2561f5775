"""Gaussian kernel density estimation and mutual-information estimation.

Densities use a product of per-dimension Gaussian kernels with diagonal
bandwidths. All probabilities are handled in the log domain and all
information quantities are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dataset import LabeledFeatures

__all__ = [
    "KdeModel",
    "ClassDensities",
    "silverman_bandwidth",
    "kde_logpdf",
    "fit_class_densities",
    "stochastic_mi",
    "stochastic_mi_and_grad",
    "average_mi",
    "label_entropy",
    "error_bounds",
]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class KdeModel:
    """Kernel centers (m, d) and per-dimension Gaussian bandwidths (d,)."""

    centers: np.ndarray
    bandwidth: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.bandwidth = np.atleast_1d(np.asarray(self.bandwidth, dtype=np.float64))
        if self.centers.shape[0] < 1:
            raise ValueError("at least one kernel center required")
        if self.bandwidth.shape != (self.centers.shape[1],):
            raise ValueError("bandwidth must have one entry per dimension")
        if np.any(self.bandwidth <= 0):
            raise ValueError("bandwidths must be strictly positive")

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]


@dataclass
class ClassDensities:
    """One KDE per class plus class prior probabilities."""

    classes: tuple[int, ...]
    models: tuple[KdeModel, ...]
    priors: np.ndarray

    def __post_init__(self):
        self.classes = tuple(int(c) for c in self.classes)
        self.models = tuple(self.models)
        self.priors = np.asarray(self.priors, dtype=np.float64)
        if not (len(self.classes) == len(self.models) == len(self.priors)):
            raise ValueError("classes, models and priors must align")
        if np.any(self.priors <= 0) or abs(self.priors.sum() - 1.0) > 1e-9:
            raise ValueError("priors must be positive and sum to 1")


def silverman_bandwidth(samples) -> np.ndarray:
    """Per-dimension rule-of-thumb bandwidths for a Gaussian product kernel.

    sigma_j = s_j * (4 / ((d + 2) * m)) ** (1 / (d + 4)) with s_j the sample
    standard deviation of dimension j. Dimensions with zero spread fall back
    to 1e-3 times the mean nonzero spread (1e-3 absolute if all are zero).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m, d = samples.shape
    if m < 2:
        raise ValueError("at least two samples required for a bandwidth estimate")
    s = samples.std(axis=0, ddof=1)
    factor = (4.0 / ((d + 2.0) * m)) ** (1.0 / (d + 4.0))
    sigma = s * factor
    degenerate = s <= 0.0
    if degenerate.any():
        nonzero = s[~degenerate]
        floor = 1e-3 * nonzero.mean() if nonzero.size else 1e-3
        sigma = np.where(degenerate, floor, sigma)
    return sigma


def _log_kernel_matrix(model: KdeModel, queries: np.ndarray) -> np.ndarray:
    """Log of the Gaussian product kernel for every (query, center) pair.

    Returns shape (n_queries, m). Row logsumexp minus log m is the log KDE.
    """
    q = np.atleast_2d(queries)
    diff = q[:, None, :] - model.centers[None, :, :]
    z = diff / model.bandwidth
    log_norm = np.sum(np.log(model.bandwidth)) + 0.5 * model.d * LOG_2PI
    return -0.5 * np.sum(z * z, axis=2) - log_norm


def kde_logpdf(model: KdeModel, y) -> float:
    """Log density of the kernel mixture at a single point."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.d,):
        raise ValueError(f"query must have dimension {model.d}, got shape {y.shape}")
    logs = _log_kernel_matrix(model, y[None, :])[0]
    return float(logsumexp(logs) - np.log(model.m))


def fit_class_densities(
    features: LabeledFeatures, uniform_priors: bool = False
) -> ClassDensities:
    """Per-class KDEs with Silverman bandwidths and empirical or uniform priors."""
    classes = [int(c) for c in features.classes]
    models = []
    counts = []
    for c in classes:
        rows = features.x[features.labels == c]
        if rows.shape[0] < 2:
            raise ValueError(f"class {c} has fewer than two samples")
        models.append(KdeModel(rows, silverman_bandwidth(rows)))
        counts.append(rows.shape[0])
    if uniform_priors:
        priors = np.full(len(classes), 1.0 / len(classes))
    else:
        priors = np.asarray(counts, dtype=np.float64) / features.n
    return ClassDensities(tuple(classes), tuple(models), priors)


def _class_log_likelihoods(densities: ClassDensities, y: np.ndarray) -> np.ndarray:
    return np.array([kde_logpdf(model, y) for model in densities.models])


def stochastic_mi(y, densities: ClassDensities) -> float:
    """Single-sample mutual-information estimate between features and labels.

    I_hat = -log sum_c P(c) p(y|c) + sum_c P(c|y) log p(y|c), with the
    posterior weights computed in log space.
    """
    y = np.asarray(y, dtype=np.float64)
    log_lik = _class_log_likelihoods(densities, y)
    log_joint = np.log(densities.priors) + log_lik
    log_mix = logsumexp(log_joint)
    posterior = np.exp(log_joint - log_mix)
    return float(-log_mix + np.dot(posterior, log_lik))


def _mi_and_grad_arrays(y, centers_list, bandwidth_list, priors):
    """Raw-array core of :func:`stochastic_mi_and_grad` (no model objects).

    With L_c = log p(y|c), w_c = P(c|y) and g_c = d L_c / d y, the gradient
    reduces to the posterior-weighted covariance of g and L:
    sum_c w_c g_c L_c - (sum_c w_c g_c)(sum_c w_c L_c).
    """
    d = y.shape[0]
    n_classes = len(centers_list)
    log_lik = np.empty(n_classes)
    grads = np.empty((n_classes, d))
    for i, (centers, bw) in enumerate(zip(centers_list, bandwidth_list)):
        diff = y - centers
        z = diff / bw
        logs = -0.5 * np.einsum("ij,ij->i", z, z) - (
            np.log(bw).sum() + 0.5 * d * LOG_2PI
        )
        total = logsumexp(logs)
        log_lik[i] = total - np.log(centers.shape[0])
        resp = np.exp(logs - total)  # per-center responsibilities
        grads[i] = -resp @ (diff / (bw * bw))
    log_joint = np.log(priors) + log_lik
    log_mix = logsumexp(log_joint)
    w = np.exp(log_joint - log_mix)
    value = float(-log_mix + np.dot(w, log_lik))
    mean_g = w @ grads
    mean_l = float(np.dot(w, log_lik))
    grad = (w * log_lik) @ grads - mean_g * mean_l
    return value, grad


def stochastic_mi_and_grad(y, densities: ClassDensities):
    """Stochastic MI estimate at ``y`` and its gradient with respect to ``y``."""
    y = np.asarray(y, dtype=np.float64)
    return _mi_and_grad_arrays(
        y,
        [m.centers for m in densities.models],
        [m.bandwidth for m in densities.models],
        densities.priors,
    )


def average_mi(features: LabeledFeatures, leave_one_out: bool = True) -> float:
    """Mean stochastic MI estimate over all samples of a labeled set.

    With ``leave_one_out`` each sample is excluded from its own class's
    kernel centers (bandwidths stay fitted on the full class). Requires at
    least two classes; leave-one-out requires >=2 samples per class.
    """
    classes = [int(c) for c in features.classes]
    if len(classes) < 2:
        raise ValueError("average_mi requires at least two classes")
    n = features.n
    class_rows = {c: np.flatnonzero(features.labels == c) for c in classes}
    if leave_one_out and any(len(r) < 2 for r in class_rows.values()):
        raise ValueError("leave-one-out requires at least two samples per class")
    priors = np.array([len(class_rows[c]) / n for c in classes])

    log_lik = np.empty((n, len(classes)))
    for j, c in enumerate(classes):
        rows = class_rows[c]
        model = KdeModel(features.x[rows], silverman_bandwidth(features.x[rows]))
        logs = _log_kernel_matrix(model, features.x)  # (n, m_c)
        if leave_one_out:
            logs[rows, np.arange(len(rows))] = -np.inf
            counts = np.full(n, float(len(rows)))
            counts[rows] -= 1.0
        else:
            counts = np.full(n, float(len(rows)))
        log_lik[:, j] = logsumexp(logs, axis=1) - np.log(counts)

    log_joint = np.log(priors)[None, :] + log_lik
    log_mix = logsumexp(log_joint, axis=1)
    posterior = np.exp(log_joint - log_mix[:, None])
    per_sample = -log_mix + np.sum(posterior * log_lik, axis=1)
    return float(per_sample.mean())


def label_entropy(priors) -> float:
    """Shannon entropy of a label distribution in nats (0 log 0 = 0)."""
    p = np.asarray(priors, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("priors must be nonnegative and sum to 1")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def error_bounds(mi: float, priors) -> tuple[float, float]:
    """Fano lower and Hellman-Raviv-style upper values for the Bayes error.

    Computed in nats as upper = (H(C) - I) / 2 and
    lower = (H(C) - I - 1) / log 2, both clamped to [0, 1].
    """
    h = label_entropy(priors)
    upper = (h - mi) / 2.0
    lower = (h - mi - 1.0) / np.log(2.0)
    upper = float(min(max(upper, 0.0), 1.0))
    lower = float(min(max(lower, 0.0), 1.0))
    if lower > upper:
        lower = upper
    return lower, upper
