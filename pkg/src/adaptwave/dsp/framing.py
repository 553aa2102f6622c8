from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameSpec:
    frame_len: int
    hop: int

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise ValueError(f"need 0 < hop <= frame_len, got hop={self.hop}, frame_len={self.frame_len}")

    @classmethod
    def from_ms(cls, sample_rate: int, frame_ms: float = 100.0, hop_ms: float = 50.0) -> "FrameSpec":
        return cls(int(round(sample_rate * frame_ms / 1000)), int(round(sample_rate * hop_ms / 1000)))

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            return 0
        return (n_samples - self.frame_len) // self.hop + 1


def frame_signal(samples, spec: FrameSpec) -> np.ndarray:
    """Slice ``samples`` (shape ``[..., S]``) into frames ``[..., T, frame_len]``.

    Frame ``t`` covers ``[t*hop, t*hop + frame_len)``. Input shorter than one
    frame gives ``T = 0``.
    """
    x = np.asarray(samples, dtype=np.float64)
    T = spec.n_frames(x.shape[-1])
    if T == 0:
        return np.zeros(x.shape[:-1] + (0, spec.frame_len))
    view = np.lib.stride_tricks.sliding_window_view(x, spec.frame_len, axis=-1)
    return np.ascontiguousarray(view[..., ::spec.hop, :][..., :T, :])


@dataclass(frozen=True)
class Window:
    kind: str
    values: np.ndarray


def make_window(kind: str, frame_len: int) -> Window:
    # periodic Hann: w[0] = 0, matches the DFT-even convention
    if kind == "rectangular":
        vals = np.ones(frame_len)
    elif kind == "hann":
        vals = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(frame_len) / frame_len)
    else:
        raise ValueError(f"unknown window kind {kind!r}")
    return Window(kind, vals)
