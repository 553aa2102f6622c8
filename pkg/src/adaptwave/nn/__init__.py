from . import functional
from .gradcheck import GradCheckReport, grad_check, rel_error
from .layers import (AttentionBlock, AttentionBlockConfig, BatchNorm2d, Bottleneck, Classifier,
                     ClassifierConfig, Conv2d, DepthwiseSeparable, Linear, MaxPool2d, Module,
                     full_conv_params)
from .optim import Adam, AdamState, adam_step
from .tensor import Parameter, Tensor

__all__ = [
    "Adam", "AdamState", "AttentionBlock", "AttentionBlockConfig", "BatchNorm2d", "Bottleneck",
    "Classifier", "ClassifierConfig", "Conv2d", "DepthwiseSeparable", "GradCheckReport", "Linear",
    "MaxPool2d", "Module", "Parameter", "Tensor", "adam_step", "full_conv_params", "functional",
    "grad_check", "rel_error",
]
