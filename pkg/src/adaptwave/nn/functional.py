"""Forward/backward kernel pairs in plain numpy.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes ``(dout, cache)`` and returns gradients in argument order.
"""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateBatchError, LabelError, ShapeError


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def _windows(xpad, kh, kw, sh, sw, Ho, Wo):
    win = np.lib.stride_tricks.sliding_window_view(xpad, (kh, kw), axis=(2, 3))
    return win[:, :, ::sh, ::sw][:, :, :Ho, :Wo]


def conv_out_size(size, k, s, p):
    return (size + 2 * p - k) // s + 1


def conv2d_forward(x, w, b=None, stride=1, padding=0, groups=1):
    """Cross-correlation of ``x [N,C,H,W]`` with ``w [O, C//groups, kh, kw]``.

    ``groups`` must be 1 or equal to ``C`` (depthwise, one filter per channel).
    """
    N, C, H, W = x.shape
    O, Cg, kh, kw = w.shape
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if groups == 1:
        if Cg != C:
            raise ShapeError(f"weight expects {Cg} input channels, input has {C}")
    elif groups == C and O == C and Cg == 1:
        pass
    else:
        raise ShapeError(f"unsupported grouping: groups={groups}, C={C}, weight {w.shape}")
    Ho, Wo = conv_out_size(H, kh, sh, ph), conv_out_size(W, kw, sw, pw)
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {H}x{W} with padding {padding}")
    xpad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    if kh == kw == 1 and groups == 1:
        cols = xpad[:, :, ::sh, ::sw][:, :, :Ho, :Wo]
        out = np.tensordot(w[:, :, 0, 0], cols, axes=([1], [1])).transpose(1, 0, 2, 3)
    else:
        win = _windows(xpad, kh, kw, sh, sw, Ho, Wo)
        if groups == 1:
            out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        else:
            out = np.einsum("nchwij,cij->nchw", win, w[:, 0])
    if b is not None:
        out = out + b[None, :, None, None]
    out = np.ascontiguousarray(out)
    return out, (x.shape, xpad, w, b is not None, (sh, sw), (ph, pw), groups, (Ho, Wo))


def conv2d_backward(dout, cache):
    xshape, xpad, w, has_bias, (sh, sw), (ph, pw), groups, (Ho, Wo) = cache
    O, Cg, kh, kw = w.shape
    db = dout.sum(axis=(0, 2, 3)) if has_bias else None
    dxpad = np.zeros(xpad.shape)
    if kh == kw == 1 and groups == 1:
        cols = xpad[:, :, ::sh, ::sw][:, :, :Ho, :Wo]
        dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 2, 3]))[:, :, None, None]
        dcols = np.tensordot(w[:, :, 0, 0], dout, axes=([0], [1])).transpose(1, 0, 2, 3)
        dxpad[:, :, 0:sh * Ho:sh, 0:sw * Wo:sw] += dcols
    else:
        win = _windows(xpad, kh, kw, sh, sw, Ho, Wo)
        if groups == 1:
            dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
            dcols = np.tensordot(dout, w, axes=([1], [0]))  # [N, Ho, Wo, C, kh, kw]
            for i in range(kh):
                for j in range(kw):
                    dxpad[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += dcols[..., i, j].transpose(0, 3, 1, 2)
        else:
            dw = np.einsum("nchw,nchwij->cij", dout, win)[:, None]
            for i in range(kh):
                for j in range(kw):
                    dxpad[:, :, i:i + sh * Ho:sh, j:j + sw * Wo:sw] += dout * w[None, :, 0, i, j, None, None]
    H, W = xshape[2], xshape[3]
    dx = dxpad[:, :, ph:ph + H, pw:pw + W]
    return np.ascontiguousarray(dx), dw, db


def maxpool2d_forward(x, kernel=3, stride=2, padding=1):
    k = kernel
    N, C, H, W = x.shape
    Ho, Wo = conv_out_size(H, k, stride, padding), conv_out_size(W, k, stride, padding)
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"pool kernel {k} does not fit input {H}x{W}")
    xpad = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)), constant_values=-np.inf)
    win = _windows(xpad, k, k, stride, stride, Ho, Wo).reshape(N, C, Ho, Wo, k * k)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, xpad.shape, arg, k, stride, padding, Ho, Wo)


def maxpool2d_backward(dout, cache):
    xshape, pshape, arg, k, s, p, Ho, Wo = cache
    dxpad = np.zeros(pshape)
    for idx in range(k * k):
        i, j = divmod(idx, k)
        dxpad[:, :, i:i + s * Ho:s, j:j + s * Wo:s] += np.where(arg == idx, dout, 0.0)
    return dxpad[:, :, p:p + xshape[2], p:p + xshape[3]]


def batchnorm_forward(x, gamma, beta, running_mean, running_var, training=True,
                      momentum=0.1, eps=1e-5):
    """Per-channel batch norm. In training mode ``running_*`` are updated in place."""
    N, C, H, W = x.shape
    M = N * H * W
    if training:
        if M <= 1:
            raise DegenerateBatchError("batch norm needs more than one value per channel in training mode")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * M / (M - 1)
    else:
        mean, var = running_mean, running_var
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * invstd[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, invstd, gamma, training, M)


def batchnorm_backward(dout, cache):
    xhat, invstd, gamma, training, M = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if training:
        s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        dx = (invstd[None, :, None, None] / M) * (M * dxhat - s1 - xhat * s2)
    else:
        dx = dxhat * invstd[None, :, None, None]
    return dx, dgamma, dbeta


def linear_forward(x, w, b):
    """``x [N, D] @ w.T [D, K] + b``."""
    return x @ w.T + b, (x, w)


def linear_backward(dout, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient ``(softmax - one_hot) / N``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    N, C = logits.shape
    if labels.shape != (N,) or np.any(labels < 0) or np.any(labels >= C):
        raise LabelError(f"labels must be {N} integers in [0, {C})")
    lsm = log_softmax(logits)
    loss = -lsm[np.arange(N), labels].mean()
    d = np.exp(lsm)
    d[np.arange(N), labels] -= 1.0
    return float(loss), d / N


def sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out
