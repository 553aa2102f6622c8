"""Windowed wavelet transform with analytic backward pass over the bank parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidCacheError, ShapeError
from .framing import FrameSpec, Window
from .wavelets import WaveletBank

EPS_MAG = 1e-10


@dataclass
class Spectrogram:
    complex_values: np.ndarray  # [B, T] or [N, B, T]
    log_mag: np.ndarray
    frame_spec: FrameSpec | None = None
    bank_snapshot: dict | None = None


@dataclass
class WaveletGradients:
    d_fc: np.ndarray
    d_fb: np.ndarray
    d_m: np.ndarray


@dataclass
class WaveletCache:
    windowed: np.ndarray  # [N, T, L]
    X: np.ndarray  # [N, B, T]
    bank: WaveletBank
    params: tuple
    n: np.ndarray
    eps: float
    batched: bool


def offsets(frame_len: int, center: int | None = None) -> np.ndarray:
    """Sample offsets ``n - c`` fed to the basis; ``center=None`` means ``frame_len // 2``."""
    c = frame_len // 2 if center is None else center
    return np.arange(frame_len, dtype=np.float64) - c


def log_magnitude(X, eps: float = EPS_MAG):
    return np.log(X.real ** 2 + X.imag ** 2 + eps)


def wavelet_forward(frames, window: Window, bank: WaveletBank, center: int | None = None,
                    eps: float = EPS_MAG, frame_spec: FrameSpec | None = None,
                    return_cache: bool = False):
    """Compute ``X[k, t] = sum_n frames[t, n] w[n] conj(psi_k(n - c))``.

    ``frames`` is ``[T, L]`` or a batch ``[N, T, L]``. The result's
    ``complex_values`` and ``log_mag`` are ``[B, T]`` (or ``[N, B, T]``).
    With ``return_cache`` a :class:`WaveletCache` for :func:`wavelet_backward`
    is returned alongside.
    """
    frames = np.asarray(frames, dtype=np.float64)
    batched = frames.ndim == 3
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3:
        raise ShapeError(f"frames must be [T, L] or [N, T, L], got shape {frames.shape}")
    L = frames.shape[-1]
    w = np.asarray(window.values, dtype=np.float64)
    if w.shape != (L,):
        raise ShapeError(f"window length {w.shape} does not match frame length {L}")
    n = offsets(L, center)
    psi = bank.basis(n)  # [B, L]
    fw = frames * w
    # real matmuls are cheaper than a complex one with a real operand
    re = fw @ psi.real.T
    im = -(fw @ psi.imag.T)
    X = np.transpose(re + 1j * im, (0, 2, 1))
    lm = log_magnitude(X, eps)
    out_X, out_lm = (X, lm) if batched else (X[0], lm[0])
    spec = Spectrogram(out_X, out_lm, frame_spec, bank.snapshot())
    if not return_cache:
        return spec
    cache = WaveletCache(fw, X, bank, (bank.fc.copy(), bank.fb.copy(), bank.m.copy()), n, eps, batched)
    return spec, cache


def wavelet_backward(dL_dlogmag, cache: WaveletCache) -> WaveletGradients:
    """Chain rule from ``dL/dlog_mag`` back to each bin's ``(f_c, f_b, m)``."""
    bank = cache.bank
    for cur, old in zip((bank.fc, bank.fb, bank.m), cache.params):
        if cur.shape != old.shape or not np.array_equal(cur, old):
            raise InvalidCacheError("wavelet bank changed since the forward pass")
    g = np.asarray(dL_dlogmag, dtype=np.float64)
    if not cache.batched:
        g = g[None]
    if g.shape != cache.X.shape:
        raise InvalidCacheError(f"gradient shape {g.shape} does not match cached output {cache.X.shape}")
    X = cache.X
    N, B, T = X.shape
    L = cache.windowed.shape[-1]
    scale = g / (X.real ** 2 + X.imag ** 2 + cache.eps)
    G = scale * X  # [N, B, T]
    Gt = np.transpose(G, (1, 0, 2)).reshape(B, N * T)
    fw = cache.windowed.reshape(N * T, L)
    M = Gt.real @ fw + 1j * (Gt.imag @ fw)  # [B, L]
    d_fc, d_fb, d_m = bank.grads(cache.n)
    out = []
    for key, d in (("fc", d_fc), ("fb", d_fb), ("m", d_m)):
        val = 2.0 * np.einsum("bl,bl->b", M.real, d.real) - 2.0 * np.einsum("bl,bl->b", M.imag, d.imag)
        if not bank.learnable.get(key, True):
            val = np.zeros_like(val)
        out.append(val)
    return WaveletGradients(*out)


def degenerate_bank(frame_len: int) -> WaveletBank:
    """Fbsp bank with ``m=0, f_b=1`` on the DFT grid: the transform reduces to the DFT."""
    return WaveletBank.default("Fbsp", frame_len)


def stft(frames, window: Window, center: int | None = 0, eps: float = EPS_MAG,
         frame_spec: FrameSpec | None = None) -> Spectrogram:
    frames = np.asarray(frames, dtype=np.float64)
    return wavelet_forward(frames, window, degenerate_bank(frames.shape[-1]), center=center,
                           eps=eps, frame_spec=frame_spec)
