"""Randomised finite-difference audit of every differentiable piece of the pipeline."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dsp.framing import make_window
from .dsp.transform import wavelet_backward, wavelet_forward
from .dsp.wavelets import KINDS, WaveletBank
from .nn import functional as F
from .nn import tensor as T
from .nn.gradcheck import grad_check
from .nn.layers import (AttentionBlock, AttentionBlockConfig, BatchNorm2d, Bottleneck, Conv2d,
                        DepthwiseSeparable, Linear, Module)
from .nn.tensor import Tensor

H = 1e-5
FLOOR = 1e-6  # absolute scale below which gradients count as zero
LAYER_TOL = 1e-4
END_TO_END_TOL = 1e-3
RESOLVE = 0.1  # a difference quotient must be accurate to a tenth of the tolerance to count


@dataclass
class SuiteEntry:
    name: str
    trials: int
    max_rel_err: float
    tolerance: float
    checked: int = 0  # coordinates compared
    unresolved: int = 0  # coordinates dropped because the difference quotient was not accurate enough

    @property
    def passed(self):
        return self.max_rel_err < self.tolerance


MIN_MARGIN = 300.0


def fd_margin(n, f_b, m, h=H):
    """Distance of ``x = f_b*n/m`` from the nearest sinc zero, in units of the FD step on ``x``.

    For m <= 1 the Fbsp envelope ``|sinc(x)|^m`` has a cusp at every zero, so
    central differences are only meaningful well away from them.
    """
    n = np.abs(np.asarray(n, dtype=np.float64))
    n = n[n != 0]
    if n.size == 0:
        return np.inf
    x = f_b * n / m
    dist = np.abs(x - np.maximum(np.round(x), 1.0))
    step = (x / m + n / m) * h
    return float(np.min(dist / step))


def random_bank(kind, B, rng, n, m_sampler=lambda r: r.uniform(0.2, 1.5), fb_range=(0.5, 2.0)):
    """Random feasible bank; Fbsp bins are redrawn until :func:`fd_margin` exceeds ``MIN_MARGIN``."""
    fc = rng.uniform(0.02, 0.48, B)
    fb = rng.uniform(*fb_range, B)
    m = np.array([m_sampler(rng) for _ in range(B)])
    if kind == "Fbsp":
        for k in range(B):
            while fd_margin(n, fb[k], m[k]) < MIN_MARGIN:
                fb[k] = rng.uniform(*fb_range)
                m[k] = m_sampler(rng)
    return WaveletBank(kind, fc, fb, m)


def wavelet_trial(kind, rng):
    B, Tn, L = int(rng.integers(2, 6)), int(rng.integers(1, 4)), int(rng.integers(8, 33))
    bank = random_bank(kind, B, rng, np.arange(L) - L // 2)
    frames = rng.standard_normal((Tn, L))
    window = make_window("hann" if rng.random() < 0.5 else "rectangular", L)
    weights = rng.standard_normal((B, Tn))

    def loss():
        return float(np.sum(weights * wavelet_forward(frames, window, bank).log_mag))

    spec, cache = wavelet_forward(frames, window, bank, return_cache=True)
    g = wavelet_backward(weights, cache)
    rep = grad_check(loss, {"fc": bank.fc, "fb": bank.fb, "m": bank.m},
                     {"fc": g.d_fc, "fb": g.d_fb, "m": g.d_m}, h=H, floor=FLOOR,
                     resolve=RESOLVE * LAYER_TOL)
    return rep


def module_trial(module: Module, x: np.ndarray, rng, n_samples=24, out_fn=None):
    """Gradient check of ``sum(w * module(x))`` over parameters and input."""
    xt = Tensor(x.copy(), requires_grad=True)
    out = module(xt) if out_fn is None else out_fn(module, xt)
    w = rng.standard_normal(out.shape)
    module.zero_grad()
    xt = Tensor(x.copy(), requires_grad=True)
    out = module(xt) if out_fn is None else out_fn(module, xt)
    out.backward(w)
    params = {k: p.data for k, p in module.named_parameters().items()}
    analytic = {k: p.grad if p.grad is not None else np.zeros_like(p.data)
                for k, p in module.named_parameters().items()}
    params["input"] = xt.data
    analytic["input"] = xt.grad

    state = {}

    def loss():
        with T.record_branches() as log:
            o = module(Tensor(xt.data)) if out_fn is None else out_fn(module, Tensor(xt.data))
        state["branch"] = log
        return float(np.sum(w * o.data))

    return grad_check(loss, params, analytic, h=H, n_samples=n_samples, floor=FLOOR,
                      seed=int(rng.integers(2 ** 31)), branches=lambda: state["branch"],
                      resolve=RESOLVE * LAYER_TOL)


def _layer_cases(rng):
    N = int(rng.integers(2, 4))
    C = int(rng.integers(1, 4))
    Hs, Ws = int(rng.integers(4, 8)), int(rng.integers(4, 8))
    x = rng.standard_normal((N, C, Hs, Ws))
    r = np.random.default_rng(int(rng.integers(2 ** 31)))
    k = int(rng.choice([1, 3]))
    stride = int(rng.choice([1, 2]))
    cases = {
        "conv2d": (Conv2d(C, int(rng.integers(1, 4)), k, stride=stride, padding=k // 2, bias=True, rng=r), x),
        "depthwise_separable": (DepthwiseSeparable(C, int(rng.integers(1, 4)), rng=r), x),
        "batchnorm_train": (BatchNorm2d(C), x),
        "bottleneck": (Bottleneck(C, 2, int(rng.integers(2, 5)), stride=stride, rng=r), x),
        "attention_block": (AttentionBlock(AttentionBlockConfig(C, int(rng.integers(1, 4)), 3, stride), rng=r), x),
        "linear": (Linear(C * Hs, 3, rng=r), x[:, :, :, 0].reshape(N, -1)),
    }
    bn = cases["batchnorm_train"][0]
    bn.weight.data[:] = rng.uniform(0.5, 1.5, C)
    bn.bias.data[:] = rng.standard_normal(C)
    return cases


class _Pool(Module):
    def forward(self, x):
        return T.max_pool2d(x, 3, 2, 1)


def cross_entropy_trial(rng):
    N, C = int(rng.integers(1, 6)), int(rng.integers(2, 6))
    z = rng.standard_normal((N, C)) * 2
    y = rng.integers(0, C, N)
    _, d = F.cross_entropy(z, y)
    return grad_check(lambda: F.cross_entropy(z, y)[0], {"z": z}, {"z": d}, h=H, floor=FLOOR,
                      resolve=RESOLVE * LAYER_TOL)


def end_to_end_trial(seed=0, basis="Fbsp", n_samples=64, n_bank=32):
    """Full desk model (learnable bank + gated classifier), train-mode cross-entropy.

    The bank is redrawn at random. For Fbsp the order is taken off its
    ``m = 0`` initialisation (where the m-derivative is a one-sided
    convention) into the regime without sinc zeros inside the frame, since
    with 400-sample frames any smaller order leaves a cusp within FD reach.
    Coordinates whose ``±h`` probe flips a ReLU or max-pool branch are redrawn.
    """
    from .train.config import desk_config
    from .train.model import build_model
    from .train.synthetic import tones_vs_chirps

    rng = np.random.default_rng(seed)
    cfg = desk_config(seed=seed, basis=basis)
    model = build_model(cfg, 2)
    bank = model.bank()
    L = model.frontend.frame_spec.frame_len
    half = L // 2
    B = len(bank)
    bank.fc[:] = rng.uniform(0.02, 0.48, B)
    bank.fb[:] = rng.uniform(0.8, 1.2, B)
    # Fbsp: zero-free regime |f_b n / m| < 1 (m just above f_b * max|n|)
    bank.m[:] = bank.fb * half * rng.uniform(1.02, 1.3, B) if basis == "Fbsp" else 1.0
    if basis == "Fbsp":
        assert all(fd_margin(np.arange(L) - half, f, m) >= MIN_MARGIN for f, m in zip(bank.fb, bank.m))
    data = tones_vs_chirps(4, sample_rate=cfg.sample_rate, duration_s=cfg.segment_s, seed=seed)
    y = data.label_indices(["tone", "chirp"])
    model.train()
    params = model.trainable_parameters()

    state = {}

    def loss():
        with T.record_branches() as log:
            out = F.cross_entropy(model(data.samples).data, y)[0]
        state["branch"] = log
        return out

    def branch():
        return state["branch"]

    model.zero_grad()
    out = model(data.samples)
    _, d = F.cross_entropy(out.data, y)
    out.backward(d)
    arrays = {k: p.data for k, p in params.items()}
    analytic = {k: p.grad if p.grad is not None else np.zeros_like(p.data) for k, p in params.items()}
    rep_all = grad_check(loss, arrays, analytic, h=H, tolerance=END_TO_END_TOL, n_samples=n_samples,
                         seed=seed, floor=FLOOR, branches=branch, resolve=RESOLVE * END_TO_END_TOL)
    bank_keys = [k for k in arrays if k.startswith("frontend.")]
    rep_bank = grad_check(loss, {k: arrays[k] for k in bank_keys}, {k: analytic[k] for k in bank_keys},
                          h=H, tolerance=END_TO_END_TOL, n_samples=n_bank, seed=seed + 1, floor=FLOOR,
                          branches=branch, resolve=RESOLVE * END_TO_END_TOL)
    return max(rep_all.max_rel_err, rep_bank.max_rel_err), (rep_all, rep_bank)


def run_suite(seed=0, wavelet_trials=40, layer_trials=20, end_to_end_trials=1, log=None):
    """Run every check; returns a list of :class:`SuiteEntry`."""
    rng = np.random.default_rng(seed)
    entries = []
    t0 = time.time()

    def note(e):
        entries.append(e)
        if log:
            log(f"{e.name:24s} trials={e.trials:3d} max_rel_err={e.max_rel_err:.3e} "
                f"tol={e.tolerance:.0e} unresolved={e.unresolved}/{e.checked + e.unresolved} "
                f"{'PASS' if e.passed else 'FAIL'} ({time.time() - t0:.1f}s)")

    def entry(name, reports, tol):
        return SuiteEntry(name, len(reports), max(r.max_rel_err for r in reports), tol,
                          sum(r.n_checked for r in reports), sum(r.n_unresolved for r in reports))

    for kind in KINDS:
        note(entry(f"wavelet_{kind}", [wavelet_trial(kind, rng) for _ in range(wavelet_trials)], LAYER_TOL))
    per_layer: dict[str, list] = {}
    for _ in range(layer_trials):
        for name, (mod, x) in _layer_cases(rng).items():
            mod.train()
            per_layer.setdefault(name, []).append(module_trial(mod, x, rng))
        x = rng.standard_normal((2, 2, 5, 6))
        per_layer.setdefault("maxpool", []).append(module_trial(_Pool(), x, rng))
        bn = BatchNorm2d(2)
        bn.running_mean[:] = rng.standard_normal(2)
        bn.running_var[:] = rng.uniform(0.5, 2, 2)
        bn.eval()
        per_layer.setdefault("batchnorm_eval", []).append(module_trial(bn, x, rng))
        per_layer.setdefault("cross_entropy", []).append(cross_entropy_trial(rng))
    for name, reports in per_layer.items():
        note(entry(name, reports, LAYER_TOL))
    for kind in KINDS if end_to_end_trials else ():
        reports = [r for i in range(end_to_end_trials) for r in end_to_end_trial(seed + i, kind)[1]]
        e = entry(f"end_to_end_desk_{kind}", reports, END_TO_END_TOL)
        e.trials = end_to_end_trials
        note(e)
    return entries
