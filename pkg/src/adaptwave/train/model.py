"""Front-end (wavelet / STFT / mel) joined to the gated classifier."""
from __future__ import annotations

import numpy as np

from ..dsp.framing import FrameSpec, frame_signal, make_window
from ..dsp.mel import mel_filterbank
from ..dsp.transform import degenerate_bank, wavelet_backward, wavelet_forward
from ..dsp.wavelets import WaveletBank
from ..nn.layers import Classifier, Module
from ..nn.tensor import Parameter, Tensor, _node
from .config import ExperimentConfig


class WaveletFrontend(Module):
    """Log-magnitude wavelet spectrogram; ``fc``/``fb``/``m`` alias the bank arrays."""

    def __init__(self, bank: WaveletBank, frame_spec: FrameSpec, window: str, center=None, learnable=True):
        self.bank = bank
        self.frame_spec = frame_spec
        self.window = make_window(window, frame_spec.frame_len)
        self.center = center
        self.fc = Parameter(bank.fc, project=bank.project)
        self.fb = Parameter(bank.fb, project=bank.project)
        self.m = Parameter(bank.m, project=bank.project)
        for key in ("fc", "fb", "m"):
            getattr(self, key).requires_grad = learnable and bank.learnable.get(key, True)

    def forward(self, frames):
        spec, cache = wavelet_forward(frames, self.window, self.bank, self.center, return_cache=True)
        fc, fb, m = self.fc, self.fb, self.m

        def bw(g):
            grads = wavelet_backward(g[:, 0], cache)
            fc.accumulate(grads.d_fc)
            fb.accumulate(grads.d_fb)
            m.accumulate(grads.d_m)
        return _node(spec.log_mag[:, None], (fc, fb, m), bw)


class MelFrontend(Module):
    def __init__(self, frame_spec: FrameSpec, window: str, n_mels: int, sample_rate: int):
        self.frame_spec = frame_spec
        self.window = make_window(window, frame_spec.frame_len)
        self.n_mels = n_mels
        self.sample_rate = sample_rate

    def forward(self, frames):
        return Tensor(mel_filterbank(frames, self.window, self.n_mels, self.sample_rate)[:, None])


class AcousticModel(Module):
    def __init__(self, frontend, classifier: Classifier):
        self.frontend = frontend
        self.classifier = classifier

    def features(self, samples):
        frames = frame_signal(samples, self.frontend.frame_spec)
        return self.frontend(frames)

    def forward(self, samples, force_gates_one=False):
        return self.classifier(self.features(samples), force_gates_one)

    def trainable_parameters(self):
        return {k: p for k, p in self.named_parameters().items() if p.requires_grad}

    def bank(self):
        return getattr(self.frontend, "bank", None)


def build_model(config: ExperimentConfig, n_classes: int) -> AcousticModel:
    spec = FrameSpec.from_ms(config.sample_rate, config.frame_ms, config.hop_ms)
    center = None if config.center < 0 else config.center
    if config.feature == "mel":
        frontend = MelFrontend(spec, config.window, config.n_mels, config.sample_rate)
    elif config.feature == "stft":
        frontend = WaveletFrontend(degenerate_bank(spec.frame_len), spec, config.window, center, learnable=False)
    else:
        bank = WaveletBank.default(config.basis, spec.frame_len, config.bank_size or None,
                                   f_b=config.init_fb, m=config.init_m)
        frontend = WaveletFrontend(bank, spec, config.window, center,
                                   learnable=config.feature == "learnable-wavelet")
    classifier = Classifier(config.classifier_config(n_classes), seed=config.seed)
    return AcousticModel(frontend, classifier)


def predict_logits(model: AcousticModel, samples, batch_size=32) -> np.ndarray:
    """Eval-mode logits; restores the model's previous mode."""
    was = model.classifier.training
    model.eval()
    out = [model(samples[i:i + batch_size]).data for i in range(0, len(samples), batch_size)]
    model.train(was)
    if not out:
        return np.zeros((0, model.classifier.config.n_classes))
    return np.concatenate(out)
