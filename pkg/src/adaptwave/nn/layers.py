"""Layer set for the attention-gated bottleneck classifier."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError
from . import tensor as T
from .functional import conv_out_size
from .tensor import Parameter, Tensor


class Module:
    training = True

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Parameter):
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
        return out

    def named_buffers(self, prefix=""):
        out = {}
        for key in getattr(self, "_buffers", ()):
            out[f"{prefix}{key}"] = getattr(self, key)
        for key, val in vars(self).items():
            if isinstance(val, Module):
                out.update(val.named_buffers(f"{prefix}{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_buffers(f"{prefix}{key}.{i}."))
        return out

    def modules(self):
        yield self
        for val in vars(self).values():
            if isinstance(val, Module):
                yield from val.modules()
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _he_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, groups=1, bias=False, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
        self.stride, self.padding, self.groups = stride, padding, groups
        fan_in = (c_in // groups) * kh * kw
        self.weight = Parameter(_he_uniform(rng, (c_out, c_in // groups, kh, kw), fan_in), decay=True)
        self.bias = Parameter(np.zeros(c_out)) if bias else None

    def forward(self, x):
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)

    def n_params(self):
        return self.weight.data.size + (self.bias.data.size if self.bias is not None else 0)


class BatchNorm2d(Module):
    _buffers = ("running_mean", "running_var")

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum, self.eps = momentum, eps

    def forward(self, x):
        return T.batch_norm(x, self.weight, self.bias, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class MaxPool2d(Module):
    def __init__(self, kernel=3, stride=2, padding=1):
        self.kernel, self.stride, self.padding = kernel, stride, padding

    def forward(self, x):
        return T.max_pool2d(x, self.kernel, self.stride, self.padding)


class Linear(Module):
    def __init__(self, d_in, d_out, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Parameter(_he_uniform(rng, (d_out, d_in), d_in), decay=True)
        self.bias = Parameter(np.zeros(d_out))

    def forward(self, x):
        return T.linear(x, self.weight, self.bias)


class DepthwiseSeparable(Module):
    """Per-channel ``kernel`` filter followed by a 1x1 channel mix; no biases."""

    def __init__(self, c_in, c_out, kernel=(3, 1), rng=None):
        kh, kw = kernel
        self.depthwise = Conv2d(c_in, c_in, (kh, kw), padding=(kh // 2, kw // 2), groups=c_in, rng=rng)
        self.pointwise = Conv2d(c_in, c_out, 1, rng=rng)

    def forward(self, x):
        return self.pointwise(self.depthwise(x))

    def n_params(self):
        return self.depthwise.n_params() + self.pointwise.n_params()


def full_conv_params(c_in, c_out, kernel=(3, 1)):
    return c_in * c_out * kernel[0] * kernel[1]


class Bottleneck(Module):
    """1x1 -> 3x3 (strided) -> 1x1 residual unit with an optional projection skip."""

    def __init__(self, c_in, width, c_out, stride=1, rng=None):
        self.stride = stride
        self.conv1 = Conv2d(c_in, width, 1, rng=rng)
        self.bn1 = BatchNorm2d(width)
        self.conv2 = Conv2d(width, width, 3, stride=stride, padding=1, rng=rng)
        self.bn2 = BatchNorm2d(width)
        self.conv3 = Conv2d(width, c_out, 1, rng=rng)
        self.bn3 = BatchNorm2d(c_out)
        if stride != 1 or c_in != c_out:
            self.proj = Conv2d(c_in, c_out, 1, stride=stride, rng=rng)
            self.proj_bn = BatchNorm2d(c_out)
        else:
            self.proj = None
            self.proj_bn = None

    def forward(self, x):
        h = T.relu(self.bn1(self.conv1(x)))
        h = T.relu(self.bn2(self.conv2(h)))
        h = self.bn3(self.conv3(h))
        skip = x if self.proj is None else self.proj_bn(self.proj(x))
        return T.relu(h + skip)


@dataclass
class AttentionBlockConfig:
    in_channels: int
    out_channels: int
    pool_kernel: int = 3
    pool_stride: int = 1
    depthwise_kernel: tuple = (3, 1)


class AttentionBlock(Module):
    """Gate = sigmoid(BN(depthwise_separable(maxpool(x)))), computed from the stage input."""

    def __init__(self, config: AttentionBlockConfig, use_sigmoid=True, rng=None):
        self.config = config
        self.use_sigmoid = use_sigmoid
        k = config.pool_kernel
        self.pool = MaxPool2d(k, config.pool_stride, k // 2)
        self.conv = DepthwiseSeparable(config.in_channels, config.out_channels, config.depthwise_kernel, rng=rng)
        self.bn = BatchNorm2d(config.out_channels)

    def output_hw(self, h, w):
        k, s = self.config.pool_kernel, self.config.pool_stride
        return conv_out_size(h, k, s, k // 2), conv_out_size(w, k, s, k // 2)

    def forward(self, x):
        g = self.bn(self.conv(self.pool(x)))
        return T.sigmoid(g) if self.use_sigmoid else g


@dataclass
class ClassifierConfig:
    n_classes: int = 2
    stage_channels: tuple = (8, 16, 32, 64)
    blocks_per_stage: tuple = (1, 1, 1, 1)
    expansion: int = 2
    stem_channels: int = 8
    in_channels: int = 1
    attention_enabled: bool = True
    gate_sigmoid: bool = True
    stage_strides: tuple = field(default=(1, 2, 2, 2))

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.blocks_per_stage = tuple(int(b) for b in self.blocks_per_stage)
        self.stage_strides = tuple(int(s) for s in self.stage_strides)
        if not (len(self.stage_channels) == len(self.blocks_per_stage) == len(self.stage_strides) == 4):
            raise ConfigurationError("classifier needs exactly four stages")
        if any(c % self.expansion for c in self.stage_channels):
            raise ConfigurationError("stage_channels must be divisible by expansion")
        if self.n_classes < 1:
            raise ConfigurationError("n_classes must be >= 1")

    @classmethod
    def full(cls, n_classes, **kw):
        """Fifty-layer bottleneck preset: [3, 4, 6, 3] blocks, widths 64..512, expansion 4."""
        return cls(n_classes=n_classes, stage_channels=(256, 512, 1024, 2048), blocks_per_stage=(3, 4, 6, 3),
                   expansion=4, stem_channels=64, **kw)


class Classifier(Module):
    """Stem conv + maxpool, four bottleneck stages each gated by a parallel attention block,
    global average pooling and a fully connected head."""

    def __init__(self, config: ClassifierConfig, seed=0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.stem = Conv2d(config.in_channels, config.stem_channels, 7, stride=2, padding=3, rng=rng)
        self.stem_bn = BatchNorm2d(config.stem_channels)
        self.stem_pool = MaxPool2d(3, 2, 1)
        self.stages = []
        self.attention = []
        c_in = config.stem_channels
        for c_out, n_blocks, stride in zip(config.stage_channels, config.blocks_per_stage, config.stage_strides):
            width = c_out // config.expansion
            blocks = [Bottleneck(c_in if i == 0 else c_out, width, c_out, stride if i == 0 else 1, rng=rng)
                      for i in range(n_blocks)]
            self.stages.append(Stage(blocks))
            if config.attention_enabled:
                att = AttentionBlock(AttentionBlockConfig(c_in, c_out, 3, stride), config.gate_sigmoid, rng=rng)
                # pooled dims equal the stage's strided 3x3 conv output by construction
                if att.config.pool_stride != stride or att.config.out_channels != c_out:
                    raise ConfigurationError("attention block does not match its residual stage")
                self.attention.append(att)
            c_in = c_out
        self.fc = Linear(c_in, config.n_classes, rng=rng)
        self.last_shapes = []

    def features(self, x: Tensor, force_gates_one=False):
        if not np.all(np.isfinite(x.data)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(x.data))[0])
            raise NumericError(f"non-finite classifier input at index {bad}")
        h = self.stem_pool(T.relu(self.stem_bn(self.stem(x))))
        self.last_shapes = []
        for i, stage in enumerate(self.stages):
            y = stage(h)
            if self.config.attention_enabled:
                if force_gates_one:
                    gate = Tensor(np.ones(y.shape))
                else:
                    gate = self.attention[i](h)
                if gate.shape != y.shape:
                    raise ConfigurationError(f"stage {i}: gate {gate.shape} does not match output {y.shape}")
                self.last_shapes.append((y.shape, gate.shape))
                y = y * gate
            else:
                self.last_shapes.append((y.shape, None))
            h = y
        return T.global_avg_pool(h)

    def forward(self, x: Tensor, force_gates_one=False):
        return self.fc(self.features(x, force_gates_one))


class Stage(Module):
    def __init__(self, blocks):
        self.blocks = blocks

    def forward(self, x):
        for b in self.blocks:
            x = b(x)
        return x
