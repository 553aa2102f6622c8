"""Reverse-mode autodiff: each op records its parents and a backward closure."""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import functional as F

_branch_log = None


@contextmanager
def record_branches():
    """Collect the active piece (ReLU masks, max-pool argmaxes) of every kink evaluated inside."""
    global _branch_log
    prev, _branch_log = _branch_log, []
    try:
        yield _branch_log
    finally:
        _branch_log = prev


class Tensor:
    def __init__(self, data, requires_grad=False, name=None, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            stack.extend((p, False) for p in t._parents if id(p) not in seen)

        self.accumulate(np.ones_like(self.data) if grad is None else grad)
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)
                if t._parents:
                    # intermediate grads are not needed after propagation
                    t.grad = None

    # elementwise sugar
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)


class Parameter(Tensor):
    """Learnable tensor.

    ``decay`` marks eligibility for weight decay; ``project`` is an optional
    callable run after every optimizer step to restore feasibility.
    """

    def __init__(self, data, name=None, decay=False, project=None):
        super().__init__(data, requires_grad=True, name=name)
        self.decay = decay
        self.project = project


def _node(data, parents, backward):
    rg = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=rg, parents=parents if rg else (), backward=backward if rg else None)


def add(a, b):
    def bw(g):
        a.accumulate(g)
        b.accumulate(g)
    return _node(a.data + b.data, (a, b), bw)


def mul(a, b):
    if a.shape != b.shape:
        raise ValueError(f"mul expects equal shapes, got {a.shape} and {b.shape}")

    def bw(g):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)
    return _node(a.data * b.data, (a, b), bw)


def relu(x):
    mask = x.data > 0
    if _branch_log is not None:
        _branch_log.append(mask)

    def bw(g):
        x.accumulate(g * mask)
    return _node(x.data * mask, (x,), bw)


def sigmoid(x):
    s = F.sigmoid(x.data)

    def bw(g):
        x.accumulate(g * s * (1 - s))
    return _node(s, (x,), bw)


def conv2d(x, w, b=None, stride=1, padding=0, groups=1):
    out, cache = F.conv2d_forward(x.data, w.data, None if b is None else b.data, stride, padding, groups)
    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        dx, dw, db = F.conv2d_backward(g, cache)
        x.accumulate(dx)
        w.accumulate(dw)
        if b is not None:
            b.accumulate(db)
    return _node(out, parents, bw)


def batch_norm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    out, cache = F.batchnorm_forward(x.data, gamma.data, beta.data, running_mean, running_var,
                                     training, momentum, eps)

    def bw(g):
        dx, dgamma, dbeta = F.batchnorm_backward(g, cache)
        x.accumulate(dx)
        gamma.accumulate(dgamma)
        beta.accumulate(dbeta)
    return _node(out, (x, gamma, beta), bw)


def max_pool2d(x, kernel, stride, padding):
    out, cache = F.maxpool2d_forward(x.data, kernel, stride, padding)
    if _branch_log is not None:
        _branch_log.append(cache[2])

    def bw(g):
        x.accumulate(F.maxpool2d_backward(g, cache))
    return _node(out, (x,), bw)


def global_avg_pool(x):
    N, C, H, W = x.shape

    def bw(g):
        x.accumulate(np.broadcast_to(g[:, :, None, None] / (H * W), x.shape))
    return _node(x.data.mean(axis=(2, 3)), (x,), bw)


def linear(x, w, b):
    out, cache = F.linear_forward(x.data, w.data, b.data)

    def bw(g):
        dx, dw, db = F.linear_backward(g, cache)
        x.accumulate(dx)
        w.accumulate(dw)
        b.accumulate(db)
    return _node(out, (x, w, b), bw)


def unsqueeze_channel(x):
    """``[N, H, W] -> [N, 1, H, W]``."""
    def bw(g):
        x.accumulate(g[:, 0])
    return _node(x.data[:, None], (x,), bw)
