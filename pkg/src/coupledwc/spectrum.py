"""Dominant oscillation frequency and EEG band labels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal.windows import hann

from .chareq import frequency_hz
from .exceptions import ConfigError, NoPeak


class Band(str, Enum):
    DELTA = "Delta"
    THETA = "Theta"
    ALPHA = "Alpha"
    BETA = "Beta"
    GAMMA = "Gamma"


# lower edges; a boundary value belongs to the band above it, except 30 Hz
_EDGES = ((30.0, Band.GAMMA), (12.0, Band.BETA), (8.0, Band.ALPHA), (4.0, Band.THETA))


def band_classify(f_hz: float) -> Band:
    """Delta < 4 <= Theta < 8 <= Alpha < 12 <= Beta <= 30 < Gamma."""
    if not f_hz >= 0:
        raise ConfigError(f"frequency must be non-negative, got {f_hz}")
    if f_hz > 30.0:
        return Band.GAMMA
    for edge, band in _EDGES[1:]:
        if f_hz >= edge:
            return band
    return Band.DELTA


def onset_frequency(omega: float, T_ms: float) -> float:
    """Frequency in Hz of the scaled root ``i*omega`` at mean delay ``T_ms``."""
    return frequency_hz(omega, T_ms)


def dominant_frequency(signal, dt_ms: float | None = None, discard: float = 0.5, pad: int = 4) -> float:
    """Peak of the Hann-windowed, zero-padded magnitude spectrum (Hz).

    ``signal`` is a 1-D series or a :class:`~coupledwc.simulate.Trajectory`
    (its E1 channel is used).  The first ``discard`` fraction is dropped as
    transient and the peak bin is refined by parabolic interpolation of the
    log magnitude.
    """
    if hasattr(signal, "x"):
        if dt_ms is None:
            dt_ms = signal.meta.get("dt_ms")
        signal = signal.x[:, 0]
    if dt_ms is None or not dt_ms > 0:
        raise ConfigError("sampling step dt_ms must be positive")
    sig = np.asarray(signal, dtype=float)
    sig = sig[int(len(sig) * discard):]
    if len(sig) < 8:
        raise NoPeak("too few samples after discarding the transient")
    mean = sig.mean()
    sig = sig - mean
    scale = np.max(np.abs(sig))
    if not scale > 1e-12 * (1 + abs(mean)):
        raise NoPeak("signal is flat")
    nfft = pad * len(sig)
    mag = np.abs(np.fft.rfft(sig * hann(len(sig), sym=False), nfft))
    k = int(np.argmax(mag[1:])) + 1
    if mag[k] <= 1e-12 * scale * len(sig):
        raise NoPeak("no spectral peak")
    offset = 0.0
    if 0 < k < len(mag) - 1:
        a, b, c = np.log(mag[k - 1 : k + 2] + 1e-300)
        denom = a - 2 * b + c
        if denom < 0:
            offset = 0.5 * (a - c) / denom
    fs = 1000.0 / dt_ms
    return (k + offset) * fs / nfft


@dataclass(frozen=True)
class SpectrumReport:
    f_hz: float
    band: Band
    method: str

    def to_dict(self) -> dict:
        return {"f_hz": self.f_hz, "band": self.band.value, "method": self.method}


def report_fft(traj) -> SpectrumReport:
    f = dominant_frequency(traj)
    return SpectrumReport(f, band_classify(f), "fft")


def report_analytic(omega: float, T_ms: float) -> SpectrumReport:
    f = onset_frequency(omega, T_ms)
    if not math.isfinite(f):
        raise ConfigError("non-finite onset frequency")
    return SpectrumReport(f, band_classify(f), "analytic")
