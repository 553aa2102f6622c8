from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigurationError
from ..nn.layers import ClassifierConfig

FEATURES = ("learnable-wavelet", "fixed-wavelet", "stft", "mel")


def _f(default, doc, published=False, **kw):
    return field(default=default, metadata={"doc": doc, "published": published}, **kw)


@dataclass
class ExperimentConfig:
    """Every knob of one experiment. Fields flagged ``published`` default to published values."""

    feature: str = _f("learnable-wavelet", "front-end: learnable-wavelet | fixed-wavelet | stft | mel")
    basis: str = _f("Fbsp", "wavelet basis: Cmor | Shan | Fbsp")
    sample_rate: int = _f(16000, "working sample rate (Hz)", published=True)
    segment_s: float = _f(30.0, "segment length (s)", published=True)
    overlap_s: float = _f(15.0, "overlap between adjacent segments (s)", published=True)
    frame_ms: float = _f(100.0, "frame length (ms)", published=True)
    hop_ms: float = _f(50.0, "frame shift (ms)", published=True)
    bank_size: int = _f(0, "wavelet bins; 0 means frame_len/2 + 1 on the DFT grid")
    center: int = _f(-1, "basis time offset within the frame; -1 means frame_len // 2")
    window: str = _f("hann", "analysis window: hann | rectangular")
    init_fb: float = _f(1.0, "initial bandwidth f_b", published=True)
    init_m: float = _f(0.0, "initial order m", published=True)
    n_mels: int = _f(300, "mel filters for the mel front-end", published=True)
    preset: str = _f("desk", "classifier size: desk | full (fifty-layer bottleneck network)")
    stage_channels: tuple = _f((8, 16, 32, 64), "output channels of the four stages (desk preset)")
    blocks_per_stage: tuple = _f((1, 1, 1, 1), "bottleneck blocks per stage (desk preset)")
    expansion: int = _f(2, "bottleneck expansion factor (desk preset)")
    stem_channels: int = _f(8, "stem convolution channels (desk preset)")
    attention: bool = _f(True, "enable the parallel attention gates")
    gate_sigmoid: bool = _f(True, "squash attention gates through a sigmoid")
    lr: float = _f(5e-4, "Adam learning rate", published=True)
    weight_decay: float = _f(1e-6, "weight decay on conv/fc weights", published=True)
    epochs: int = _f(100, "training epochs", published=True)
    batch_size: int = _f(16, "mini-batch size")
    seed: int = _f(0, "master random seed")
    folds: int = _f(4, "cross-validation folds", published=True)
    val_fraction: float = _f(0.1, "share of training sources held out for model selection")

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.blocks_per_stage = tuple(int(b) for b in self.blocks_per_stage)
        self.validate()

    def validate(self):
        if self.feature not in FEATURES:
            raise ConfigurationError(f"feature: unknown front-end {self.feature!r}")
        if self.basis not in ("Cmor", "Shan", "Fbsp"):
            raise ConfigurationError(f"basis: unknown kind {self.basis!r}")
        if self.preset not in ("desk", "full"):
            raise ConfigurationError(f"preset: expected desk or full, got {self.preset!r}")
        if self.window not in ("hann", "rectangular"):
            raise ConfigurationError(f"window: unknown kind {self.window!r}")
        if self.sample_rate <= 0 or self.segment_s <= 0 or not 0 <= self.overlap_s < self.segment_s:
            raise ConfigurationError("sample_rate/segment_s/overlap_s out of range")
        if not 0 < self.hop_ms <= self.frame_ms:
            raise ConfigurationError("hop_ms must be in (0, frame_ms]")
        if self.batch_size < 1 or self.epochs < 0 or self.folds < 2:
            raise ConfigurationError("batch_size >= 1, epochs >= 0 and folds >= 2 required")
        if not 0 <= self.val_fraction < 1:
            raise ConfigurationError("val_fraction must lie in [0, 1)")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigurationError("lr and weight_decay must be non-negative")

    def classifier_config(self, n_classes: int) -> ClassifierConfig:
        if self.preset == "full":
            return ClassifierConfig.full(n_classes, attention_enabled=self.attention,
                                         gate_sigmoid=self.gate_sigmoid)
        return ClassifierConfig(n_classes=n_classes, stage_channels=self.stage_channels,
                                blocks_per_stage=self.blocks_per_stage, expansion=self.expansion,
                                stem_channels=self.stem_channels, attention_enabled=self.attention,
                                gate_sigmoid=self.gate_sigmoid)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_channels"] = list(self.stage_channels)
        d["blocks_per_stage"] = list(self.blocks_per_stage)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(kw)
        return ExperimentConfig.from_dict(d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def desk_config(**kw) -> ExperimentConfig:
    """Small CPU-friendly setup: 4 kHz audio, 1 s segments, 64-bin bank, few epochs."""
    base = dict(sample_rate=4000, segment_s=1.0, overlap_s=0.5, bank_size=64,
                epochs=30, batch_size=8)
    base.update(kw)
    return ExperimentConfig(**base)
