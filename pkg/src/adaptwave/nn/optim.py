from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: dict = field(default_factory=dict)
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def reset(self, name):
        self.step.pop(name, None)
        self.m.pop(name, None)
        self.v.pop(name, None)


def adam_step(params: dict, grads: dict, state: AdamState, decay: dict | None = None):
    """One bias-corrected Adam update, in place on ``params`` (name -> ndarray).

    Weight decay is added to the gradient as ``weight_decay * theta`` only for
    names where ``decay[name]`` is true. Each parameter keeps its own step
    count, so a freshly reset parameter restarts its bias correction.
    """
    decay = decay or {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        if state.weight_decay and decay.get(name, False):
            g = g + state.weight_decay * p
        t = state.step.get(name, 0) + 1
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.step[name], state.m[name], state.v[name] = t, m, v
        mhat = m / (1 - state.beta1 ** t)
        vhat = v / (1 - state.beta2 ** t)
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


class Adam:
    """Adam over a dict of :class:`Parameter`; runs each parameter's projection after the step."""

    def __init__(self, params: dict, lr=5e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = params
        self.state = AdamState(lr, betas[0], betas[1], eps, weight_decay)

    def step(self):
        arrays = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        adam_step(arrays, grads, self.state, {k: p.decay for k, p in self.params.items()})
        seen = set()
        for p in self.params.values():
            if p.project is not None and id(p.project) not in seen:
                seen.add(id(p.project))
                p.project()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
