"""Complex wavelet bases (Cmor, Shan, Fbsp) and their parameter derivatives.

All bases share the modulation ``exp(2j*pi*f_c*n)`` with ``f_c`` in cycles per
sample and ``n`` an integer sample offset. Parameters broadcast against ``n``,
so a whole bank is evaluated at once by passing ``f_c[:, None]`` etc.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError

KINDS = ("Cmor", "Shan", "Fbsp")
FB_MIN = 1e-3
LOG_FLOOR = -30.0  # clamp for log|sinc| in the Fbsp envelope


def _check(kind, f_c, f_b, m):
    if kind not in KINDS:
        raise DomainError(f"unknown basis kind {kind!r}")
    for name, v in (("f_c", f_c), ("f_b", f_b), ("m", m)):
        if not np.all(np.isfinite(v)):
            raise DomainError(f"{name} must be finite")
    if np.any(np.asarray(f_b) < FB_MIN):
        raise DomainError(f"f_b must be >= {FB_MIN}")
    if np.any(np.asarray(m) < 0):
        raise DomainError("m must be >= 0")


def sinc(x):
    return np.sinc(x)


_SERIES_TERMS = 12


def _sin_minus_y(y):
    """``sin(y) - y`` without cancellation, for ``|y| <= 1``."""
    out = np.zeros_like(y)
    term = y.copy()
    for k in range(1, _SERIES_TERMS):
        term = -term * y * y / ((2 * k) * (2 * k + 1))
        out += term
    return out


def _cos_minus_sinc(y):
    """``cos(y) - sin(y)/y`` without cancellation, for ``|y| <= 1``."""
    out = np.zeros_like(y)
    term = np.ones_like(y)  # (-1)^k y^(2k) / (2k+1)!
    for k in range(1, _SERIES_TERMS):
        term = -term * y * y / ((2 * k) * (2 * k + 1))
        out += 2 * k * term
    return out


def dsinc(x):
    """Derivative of the normalized sinc."""
    x = np.asarray(x, dtype=np.float64)
    y = np.pi * x
    small = np.abs(y) <= 1.0
    ys = np.where(small, 1.0, y)
    big = np.pi * (np.cos(ys) - np.sin(ys) / ys) / ys
    yy = np.where(small, y, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        series = np.pi * np.where(yy == 0, 0.0, _cos_minus_sinc(yy) / np.where(yy == 0, 1.0, yy))
    return np.where(small, series, big)


def log_abs_sinc(x):
    """``log|sinc(x)|``, accurate near ``x = 0`` where sinc is close to 1.

    At the integer zeros ``np.sinc`` returns roundoff (~1e-17), not 0, so the
    result there is large and negative rather than ``-inf``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.pi * x
    small = np.abs(y) <= 1.0
    yy = np.where(small, y, 1.0)
    t = np.where(yy == 0, 0.0, _sin_minus_y(yy) / np.where(yy == 0, 1.0, yy))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(small, np.log1p(t), np.log(np.abs(np.sinc(np.where(small, 1.0, x)))))


def _fbsp_envelope(n, f_b, m):
    """Return (A, dA/dm, dA/df_b) for A(x, m) = exp(m * max(log|sinc(x)|, floor)), x = f_b*n/m."""
    n, f_b, m = np.broadcast_arrays(np.asarray(n, dtype=np.float64),
                                    np.asarray(f_b, dtype=np.float64),
                                    np.asarray(m, dtype=np.float64))
    zero_m = m == 0
    m_safe = np.where(zero_m, 1.0, m)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = f_b * n / m_safe  # may overflow for subnormal m; such points land on the floor
        logs = log_abs_sinc(x)
        clamped = ~(logs >= LOG_FLOOR)
        x = np.where(clamped, 0.0, x)
        logc = np.where(clamped, LOG_FLOOR, logs)
        r = np.where(clamped, 0.0, dsinc(x) / np.where(clamped, 1.0, sinc(x)))
    A = np.exp(m * logc)
    dA_dm = A * (logc - x * r)
    dA_dfb = A * n * r
    # m == 0: envelope is identically 1; the m-derivative takes the limit x -> inf,
    # where log|sinc| sits on the floor (n != 0) or at 0 (n == 0).
    A = np.where(zero_m, 1.0, A)
    dA_dm = np.where(zero_m, np.where(n == 0, 0.0, LOG_FLOOR), dA_dm)
    dA_dfb = np.where(zero_m, 0.0, dA_dfb)
    return A, dA_dm, dA_dfb


def eval_basis(kind: str, n, f_c, f_b, m=0.0):
    """Evaluate psi(n) for one basis kind; returns a complex array."""
    _check(kind, f_c, f_b, m)
    n = np.asarray(n, dtype=np.float64)
    carrier = np.exp(2j * np.pi * f_c * n)
    if kind == "Cmor":
        amp = (np.pi * f_b) ** -0.5 * np.exp(-n ** 2 / f_b)
    elif kind == "Shan":
        amp = np.sqrt(f_b) * sinc(f_b * n)
    else:
        amp = np.sqrt(f_b) * _fbsp_envelope(n, f_b, m)[0]
    return amp * carrier


def basis_param_grads(kind: str, n, f_c, f_b, m=0.0):
    """Analytic ``(dpsi/df_c, dpsi/df_b, dpsi/dm)`` for the closed forms in :func:`eval_basis`."""
    _check(kind, f_c, f_b, m)
    n = np.asarray(n, dtype=np.float64)
    carrier = np.exp(2j * np.pi * f_c * n)
    if kind == "Cmor":
        amp = (np.pi * f_b) ** -0.5 * np.exp(-n ** 2 / f_b)
        d_amp_fb = amp * (-0.5 / f_b + n ** 2 / f_b ** 2)
        d_amp_m = np.zeros(np.broadcast(amp, m).shape)
    elif kind == "Shan":
        rf = np.sqrt(f_b)
        amp = rf * sinc(f_b * n)
        d_amp_fb = sinc(f_b * n) / (2 * rf) + rf * n * dsinc(f_b * n)
        d_amp_m = np.zeros(np.broadcast(amp, m).shape)
    else:
        rf = np.sqrt(f_b)
        A, dA_dm, dA_dfb = _fbsp_envelope(n, f_b, m)
        amp = rf * A
        d_amp_fb = A / (2 * rf) + rf * dA_dfb
        d_amp_m = rf * dA_dm
    psi = amp * carrier
    d_fc = 2j * np.pi * n * psi
    return d_fc, d_amp_fb * carrier, d_amp_m * carrier


@dataclass
class WaveletBank:
    """Per-bin learnable ``(f_c, f_b, m)`` triples for one basis kind."""

    kind: str
    fc: np.ndarray
    fb: np.ndarray
    m: np.ndarray
    learnable: dict = field(default_factory=lambda: {"fc": True, "fb": True, "m": True})

    def __post_init__(self):
        self.fc = np.array(self.fc, dtype=np.float64).reshape(-1)
        self.fb = np.array(self.fb, dtype=np.float64).reshape(-1)
        self.m = np.array(self.m, dtype=np.float64).reshape(-1)
        if not (self.fc.size == self.fb.size == self.m.size) or self.fc.size < 1:
            raise ValueError("fc, fb, m must share one non-zero length")
        if self.kind not in KINDS:
            raise DomainError(f"unknown basis kind {self.kind!r}")

    @classmethod
    def default(cls, kind: str, frame_len: int, n_bins: int | None = None, f_b=1.0, m=0.0):
        """Linear center-frequency grid initialised at ``f_b=1, m=0``.

        With ``n_bins`` unset the grid is ``k / frame_len`` for
        ``k = 0..frame_len//2``; otherwise ``n_bins`` points spread uniformly
        over [0, 0.5].
        """
        if n_bins is None:
            fc = np.arange(frame_len // 2 + 1) / frame_len
        else:
            fc = np.linspace(0.0, 0.5, n_bins)
        B = fc.size
        return cls(kind, fc, np.full(B, float(f_b)), np.full(B, float(m)))

    def __len__(self):
        return self.fc.size

    def basis(self, n):
        return eval_basis(self.kind, n[None, :], self.fc[:, None], self.fb[:, None], self.m[:, None])

    def grads(self, n):
        return basis_param_grads(self.kind, n[None, :], self.fc[:, None], self.fb[:, None], self.m[:, None])

    def project(self):
        """Clip parameters back onto the feasible set, in place."""
        np.maximum(self.fb, FB_MIN, out=self.fb)
        np.maximum(self.m, 0.0, out=self.m)
        np.clip(self.fc, 0.0, 0.5, out=self.fc)

    def is_feasible(self) -> bool:
        return bool(np.all(self.fb >= FB_MIN) and np.all(self.m >= 0)
                    and np.all((self.fc >= 0) & (self.fc <= 0.5)))

    def snapshot(self) -> dict:
        return {"kind": self.kind, "fc": self.fc.tolist(), "fb": self.fb.tolist(), "m": self.m.tolist()}

    def copy(self) -> "WaveletBank":
        return WaveletBank(self.kind, self.fc.copy(), self.fb.copy(), self.m.copy(), dict(self.learnable))
