from .corrupt import CLEAN, lowpass_truncate, mix_at_snr, red_noise
from .export import read_tensor, write_bank_csv, write_spectrogram, write_tensor
from .framing import FrameSpec, Window, frame_signal, make_window
from .mel import mel_centers, mel_filterbank, mel_weights
from .transform import (EPS_MAG, Spectrogram, WaveletCache, WaveletGradients, degenerate_bank,
                        offsets, stft, wavelet_backward, wavelet_forward)
from .wavelets import FB_MIN, KINDS, WaveletBank, basis_param_grads, eval_basis

__all__ = [
    "CLEAN", "EPS_MAG", "FB_MIN", "KINDS", "FrameSpec", "Spectrogram", "WaveletBank", "WaveletCache",
    "WaveletGradients", "Window", "basis_param_grads", "degenerate_bank", "eval_basis", "frame_signal",
    "lowpass_truncate", "make_window", "mel_centers", "mel_filterbank", "mel_weights", "mix_at_snr",
    "offsets", "read_tensor", "red_noise", "stft", "wavelet_backward", "wavelet_forward",
    "write_bank_csv", "write_spectrogram", "write_tensor",
]
