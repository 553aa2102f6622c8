from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .framing import Window
from .transform import EPS_MAG


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_centers(n_mels: int, sample_rate: int) -> np.ndarray:
    """Center frequencies (Hz) of ``n_mels`` triangles evenly spaced on the mel scale."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_mels + 2))
    return edges[1:-1]


def mel_weights(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filter matrix ``[n_mels, n_fft//2 + 1]`` spanning [0, Nyquist]."""
    n_bins = n_fft // 2 + 1
    if n_mels < 1:
        raise ConfigurationError("n_mels must be >= 1")
    if n_mels > n_bins:
        raise ConfigurationError(f"n_mels={n_mels} exceeds the {n_bins} spectrum bins")
    freqs = np.arange(n_bins) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_filterbank(frames, window: Window, n_mels: int = 300, sample_rate: int = 16000,
                   eps: float = EPS_MAG) -> np.ndarray:
    """Log mel energies ``[n_mels, T]`` (or ``[N, n_mels, T]`` for batched frames)."""
    frames = np.asarray(frames, dtype=np.float64)
    L = frames.shape[-1]
    W = mel_weights(n_mels, L, sample_rate)
    spec = np.fft.rfft(frames * window.values, axis=-1)
    power = spec.real ** 2 + spec.imag ** 2
    return np.log(np.swapaxes(power @ W.T, -1, -2) + eps)
