"""Learnable wavelet front-end and attention-gated residual classifier for ship-radiated noise."""

__version__ = "0.1.0"
