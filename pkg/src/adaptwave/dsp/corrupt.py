"""Signal corruptions used by the robustness sweeps."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError

CLEAN = float("inf")


def red_noise(length: int, seed: int) -> np.ndarray:
    """Zero-mean, unit-RMS noise with a 1/f^2 power spectrum.

    White Gaussian spectrum shaped by 1/f in amplitude with the DC bin zeroed.
    """
    if length < 2:
        raise ValueError("length must be >= 2")
    rng = np.random.default_rng(seed)
    n_bins = length // 2 + 1
    spec = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    k = np.arange(n_bins, dtype=np.float64)
    k[0] = 1.0
    spec /= k
    spec[0] = 0.0
    if length % 2 == 0:
        spec[-1] = spec[-1].real
    x = np.fft.irfft(spec, n=length)
    x -= x.mean()
    return x / np.sqrt(np.mean(x ** 2))


def mix_at_snr(signal, noise, snr_db: float) -> np.ndarray:
    """Add ``noise`` to ``signal`` scaled so the mixture has SNR ``snr_db`` (power = mean square).

    ``snr_db = inf`` (:data:`CLEAN`) returns the signal unchanged.
    """
    s = np.asarray(signal, dtype=np.float64)
    v = np.asarray(noise, dtype=np.float64)
    if s.shape != v.shape:
        raise ValueError(f"signal {s.shape} and noise {v.shape} lengths differ")
    if np.isposinf(snr_db):
        return s.copy()
    ps = np.mean(s ** 2)
    pn = np.mean(v ** 2)
    if ps <= 0:
        raise DegenerateInputError("signal has zero power")
    if pn <= 0:
        raise DegenerateInputError("noise has zero power")
    alpha = np.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    return s + alpha * v


def lowpass_truncate(samples, cutoff_hz: float, fs: int) -> np.ndarray:
    """Brick-wall low-pass: zero every DFT bin strictly above ``cutoff_hz``."""
    if not 0 < cutoff_hz <= fs / 2:
        raise ValueError("need 0 < cutoff_hz <= fs/2")
    x = np.asarray(samples, dtype=np.float64)
    if cutoff_hz >= fs / 2:
        return x.copy()
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    spec[freqs > cutoff_hz] = 0.0
    return np.fft.irfft(spec, n=x.size)
