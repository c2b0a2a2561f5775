"""Zero-phase band-pass filtering for the filter-bank front end."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as _signal

__all__ = ["BandpassFilter", "design_bandpass", "filtfilt", "apply_bank"]


@dataclass
class BandpassFilter:
    """Butterworth band-pass coefficients plus the design parameters."""

    low_hz: float
    high_hz: float
    order: int
    fs: float
    b: np.ndarray
    a: np.ndarray

    @property
    def pad_len(self) -> int:
        return 3 * (self.order + 1)


def design_bandpass(low_hz: float, high_hz: float, fs: float, order: int = 4) -> BandpassFilter:
    """Design a Butterworth band-pass filter via the bilinear transform.

    Requires 0 < low_hz < high_hz < fs/2.
    """
    if fs <= 0:
        raise ValueError("sampling rate must be positive")
    if not 0.0 < low_hz < high_hz < fs / 2.0:
        raise ValueError(
            f"band edges must satisfy 0 < low ({low_hz}) < high ({high_hz}) < fs/2 ({fs / 2})"
        )
    if order < 1:
        raise ValueError("filter order must be >= 1")
    b, a = _signal.butter(order, [low_hz, high_hz], btype="bandpass", fs=fs)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64) / a[0]
    a = a / a[0]
    return BandpassFilter(low_hz, high_hz, order, fs, b, a)


def filtfilt(filt: BandpassFilter, x) -> np.ndarray:
    """Forward-backward (zero-phase) filtering with reflective edge padding.

    Filters along the last axis of the input (1-D signals, (channels,
    samples) epochs, or stacked epochs). The signal must be longer than the
    reflective pad of 3 * (order + 1) samples.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n <= filt.pad_len:
        raise ValueError(
            f"signal of length {n} too short for pad of {filt.pad_len} samples"
        )
    return _signal.filtfilt(filt.b, filt.a, x, axis=-1, padtype="even", padlen=filt.pad_len)


def apply_bank(
    bands: Sequence[tuple[float, float]],
    order: int,
    fs: float,
    epoch,
) -> list[np.ndarray]:
    """Filter one (channels, samples) epoch through each band of the bank.

    Returns one filtered copy per band, each channel filtered independently.
    """
    epoch = np.asarray(epoch, dtype=np.float64)
    filters = [design_bandpass(low, high, fs, order) for low, high in bands]
    return [filtfilt(f, epoch) for f in filters]
