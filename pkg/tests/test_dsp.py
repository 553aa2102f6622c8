import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from adaptwave.dsp.corrupt import CLEAN, lowpass_truncate, mix_at_snr, red_noise
from adaptwave.dsp.export import read_tensor, write_bank_csv, write_spectrogram, write_tensor
from adaptwave.dsp.framing import FrameSpec, frame_signal, make_window
from adaptwave.dsp.mel import mel_centers, mel_filterbank, mel_weights
from adaptwave.dsp.transform import (EPS_MAG, degenerate_bank, offsets, stft, wavelet_backward,
                                     wavelet_forward)
from adaptwave.dsp.wavelets import (KINDS, LOG_FLOOR, WaveletBank, basis_param_grads, dsinc, eval_basis, log_abs_sinc,
                                    sinc)
from adaptwave.errors import ConfigurationError, DegenerateInputError, DomainError, InvalidCacheError
from adaptwave.gradsuite import MIN_MARGIN, fd_margin


# --------------------------------------------------------------------------- framing

def test_frame_count_published_setup():
    spec = FrameSpec.from_ms(16000, 100, 50)
    assert (spec.frame_len, spec.hop) == (1600, 800)
    assert frame_signal(np.zeros(30 * 16000), spec).shape == (599, 1600)


def test_single_and_disjoint_frames():
    spec = FrameSpec(10, 10)
    x = np.arange(30.0)
    assert frame_signal(x[:10], spec).shape == (1, 10)
    f = frame_signal(x, spec)
    np.testing.assert_array_equal(f.reshape(-1), x)
    assert frame_signal(x[:9], spec).shape == (0, 10)


@given(st.integers(1, 40), st.data(), st.integers(0, 300))
def test_frame_contents(frame_len, data, n):
    hop = data.draw(st.integers(1, frame_len))
    x = np.arange(float(n))
    f = frame_signal(x, FrameSpec(frame_len, hop))
    assert f.shape[0] == (0 if n < frame_len else (n - frame_len) // hop + 1)
    for t in range(f.shape[0]):
        np.testing.assert_array_equal(f[t], x[t * hop:t * hop + frame_len])


def test_bad_hop():
    with pytest.raises(ValueError):
        FrameSpec(10, 11)


def test_windows():
    h = make_window("hann", 16).values
    assert h[0] == 0 and np.all((h >= 0) & (h <= 1))
    assert np.all(make_window("rectangular", 5).values == 1)


# --------------------------------------------------------------------------- bases

def test_basis_special_values():
    assert eval_basis("Cmor", 0, 0.2, 1.0) == pytest.approx(1 / np.sqrt(np.pi))
    assert eval_basis("Shan", 0, 0.2, 1.0) == pytest.approx(1.0)
    n = np.arange(-50, 51)
    np.testing.assert_allclose(np.abs(eval_basis("Fbsp", n, 0.3, 1.0, 0.0)), 1.0)


def test_fbsp_order_one_is_shannon_where_sinc_nonnegative():
    n = np.arange(-800, 801)
    for fb in (0.3, 1.0, 1.7):
        pos = sinc(fb * n) >= 0
        # at the zeros the envelope sits on its exp(-30) floor instead of 0
        np.testing.assert_allclose(eval_basis("Fbsp", n, 0.1, fb, 1.0)[pos],
                                   eval_basis("Shan", n, 0.1, fb)[pos], rtol=1e-12, atol=np.sqrt(fb) * np.exp(-30))


@given(st.sampled_from(KINDS), st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0.01, 3), st.floats(0, 4))
def test_modulus_independent_of_center_frequency(kind, fc1, fc2, fb, m):
    n = np.arange(-40, 41)
    np.testing.assert_allclose(np.abs(eval_basis(kind, n, fc1, fb, m)), np.abs(eval_basis(kind, n, fc2, fb, m)),
                               rtol=1e-12, atol=1e-300)


def test_fbsp_continuity_at_zero_order():
    n = np.arange(-20, 21)
    base = eval_basis("Fbsp", n, 0.1, 1.0, 0.0)
    for m in (1e-2, 1e-4, 1e-6):
        err = np.max(np.abs(eval_basis("Fbsp", n, 0.1, 1.0, m) - base))
        assert err < 10 * m * 30 + 1e-12


def test_basis_domain_errors():
    with pytest.raises(DomainError):
        eval_basis("Fbsp", 0, 0.1, 1e-4, 0.0)
    with pytest.raises(DomainError):
        eval_basis("Fbsp", 0, 0.1, 1.0, -0.5)
    with pytest.raises(DomainError):
        eval_basis("Morlet", 0, 0.1, 1.0)


def test_basis_matches_frozen_high_precision(frozen):
    for p in frozen["basis"]:
        got = eval_basis(p["kind"], p["n"], p["fc"], p["fb"], p["m"])
        live = oracles.basis_value(p["kind"], p["n"], p["fc"], p["fb"], p["m"])
        assert got == pytest.approx(complex(p["re"], p["im"]), rel=1e-13, abs=1e-15)
        assert got == pytest.approx(live, rel=1e-13, abs=1e-15)


def test_log_abs_sinc_against_frozen(frozen):
    x = np.array(frozen["log_abs_sinc"]["x"])
    np.testing.assert_allclose(log_abs_sinc(x), frozen["log_abs_sinc"]["value"], rtol=1e-14)
    np.testing.assert_allclose(log_abs_sinc(-x), frozen["log_abs_sinc"]["value"], rtol=1e-14)
    assert log_abs_sinc(0.0) == 0.0
    assert log_abs_sinc(2.0) < LOG_FLOOR


def test_subnormal_order_is_finite():
    d = basis_param_grads("Fbsp", np.arange(-5, 6.0), 0.1, 1.0, 5e-324)
    assert all(np.all(np.isfinite(g)) for g in d)


@given(st.floats(-6, 6))
def test_dsinc_finite_difference(x):
    h = 1e-6
    fd = (sinc(x + h) - sinc(x - h)) / (2 * h)
    assert dsinc(x) == pytest.approx(fd, abs=1e-8)


def test_center_frequency_gradient_vanishes_at_origin():
    for kind in KINDS:
        d_fc, _, _ = basis_param_grads(kind, 0.0, 0.2, 1.1, 0.5)
        assert d_fc == 0


def test_param_grads_against_frozen_derivatives(frozen):
    for row in frozen["basis_derivatives"]:
        got = basis_param_grads(row["kind"], row["n"], row["fc"], row["fb"], row["m"])
        for name, g in zip(("d_fc", "d_fb", "d_m"), got):
            if name in row:
                assert g == pytest.approx(complex(*row[name]), rel=1e-10, abs=1e-12)


def test_cmor_fb_gradient_finite_difference():
    n = np.arange(-6, 7.0)
    h = 1e-6
    _, d_fb, d_m = basis_param_grads("Cmor", n, 0.2, 1.3)
    fd = (eval_basis("Cmor", n, 0.2, 1.3 + h) - eval_basis("Cmor", n, 0.2, 1.3 - h)) / (2 * h)
    assert np.max(np.abs(d_fb - fd)) < 1e-6
    assert np.all(d_m == 0)


def test_fbsp_order_gradient_finite_difference():
    h = 1e-6
    _, _, d_m = basis_param_grads("Fbsp", 3.0, 0.1, 1.2, 0.5)
    fd = (eval_basis("Fbsp", 3.0, 0.1, 1.2, 0.5 + h) - eval_basis("Fbsp", 3.0, 0.1, 1.2, 0.5 - h)) / (2 * h)
    assert abs(d_m - fd) < 1e-5


@given(st.sampled_from(KINDS), st.integers(-30, 30), st.floats(0.01, 0.49), st.floats(0.5, 2.0),
       st.floats(0.3, 4.0))
def test_param_grads_property(kind, n, fc, fb, m):
    if kind == "Fbsp" and fd_margin(np.array([n]), fb, m, 1e-6) < MIN_MARGIN:
        return  # too close to a cusp of |sinc|^m for a central difference
    h = 1e-6
    got = basis_param_grads(kind, n, fc, fb, m)
    for i, g in enumerate(got):
        args = [fc, fb, m]
        up, dn = list(args), list(args)
        up[i] += h
        dn[i] -= h
        fd = (eval_basis(kind, n, *up) - eval_basis(kind, n, *dn)) / (2 * h)
        assert abs(g - fd) <= 1e-6 * max(1.0, abs(g))


def test_fbsp_zero_order_derivative_convention():
    _, _, d_m = basis_param_grads("Fbsp", np.array([0.0, 2.0]), 0.0, 1.0, 0.0)
    np.testing.assert_allclose(d_m, [0.0, -30.0])


# --------------------------------------------------------------------------- transform

def test_degenerate_bank_is_dft():
    L = 64
    rng = np.random.default_rng(5)
    frames = rng.standard_normal((4, L))
    spec = wavelet_forward(frames, make_window("rectangular", L), degenerate_bank(L), center=0)
    np.testing.assert_allclose(spec.complex_values, np.fft.rfft(frames, axis=1).T, rtol=1e-10, atol=1e-10)


def test_degenerate_bank_against_loop_dft(frozen):
    frame = np.array(frozen["dft"]["frame"])
    L = frame.size
    mag = np.abs(wavelet_forward(frame[None], make_window("rectangular", L), degenerate_bank(L), 0).complex_values[:, 0])
    np.testing.assert_allclose(mag, frozen["dft"]["magnitudes"], rtol=1e-9)
    np.testing.assert_allclose(mag, oracles.dft_magnitudes(frame.tolist()), rtol=1e-9)


def test_forward_against_direct_loop(frozen):
    d = frozen["wavelet_direct"]
    frames, window = np.array(d["frames"]), make_window("hann", 12)
    np.testing.assert_allclose(window.values, d["window"], atol=1e-15)
    for kind in KINDS:
        m = d["bank"]["m"] if kind == "Fbsp" else [0.0] * 3
        bank = WaveletBank(kind, d["bank"]["fc"], d["bank"]["fb"], m)
        X = wavelet_forward(frames, window, bank, center=d["center"]).complex_values
        ref = np.array(d["X"][kind]["re"]) + 1j * np.array(d["X"][kind]["im"])
        np.testing.assert_allclose(X, ref, rtol=1e-10, atol=1e-12)


def test_zero_frame_log_floor():
    spec = wavelet_forward(np.zeros((2, 16)), make_window("hann", 16), WaveletBank.default("Cmor", 16))
    np.testing.assert_allclose(spec.log_mag, np.log(EPS_MAG))


def test_tone_argmax_bin():
    fs, L = 16000, 1600
    x = np.sin(2 * np.pi * 1000 * np.arange(4 * L) / fs)
    frames = frame_signal(x, FrameSpec(L, 800))
    bank = WaveletBank.default("Fbsp", L, 201)
    spec = wavelet_forward(frames, make_window("hann", L), bank)
    target = np.argmin(np.abs(bank.fc - 1000 / fs))
    assert np.all(np.argmax(spec.log_mag, axis=0) == target)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 3, 20))
    bank = WaveletBank("Shan", rng.uniform(0, 0.5, 5), rng.uniform(0.5, 2, 5), np.zeros(5))
    w = make_window("hann", 20)
    lhs = wavelet_forward(a * x + b * y, w, bank).complex_values
    rhs = a * wavelet_forward(x, w, bank).complex_values + b * wavelet_forward(y, w, bank).complex_values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_batched_matches_single():
    rng = np.random.default_rng(0)
    frames = rng.standard_normal((3, 4, 16))
    bank = WaveletBank.default("Fbsp", 16, 6, m=1.5)
    w = make_window("hann", 16)
    batched = wavelet_forward(frames, w, bank).log_mag
    for i in range(3):
        np.testing.assert_array_equal(batched[i], wavelet_forward(frames[i], w, bank).log_mag)


def _grad_setup(kind, seed=0, B=4, T=3, L=16):
    rng = np.random.default_rng(seed)
    from adaptwave.gradsuite import random_bank
    bank = random_bank(kind, B, rng, offsets(L))
    frames = rng.standard_normal((T, L))
    return bank, frames, make_window("hann", L), rng.standard_normal((B, T))


def test_backward_zero_upstream():
    bank, frames, w, _ = _grad_setup("Fbsp")
    spec, cache = wavelet_forward(frames, w, bank, return_cache=True)
    g = wavelet_backward(np.zeros_like(spec.log_mag), cache)
    assert not np.any(g.d_fc) and not np.any(g.d_fb) and not np.any(g.d_m)


@pytest.mark.parametrize("kind", KINDS)
def test_backward_finite_difference(kind):
    bank, frames, w, up = _grad_setup(kind, seed=3)
    spec, cache = wavelet_forward(frames, w, bank, return_cache=True)
    g = wavelet_backward(up, cache)
    h = 1e-5
    for name, grad in (("fc", g.d_fc), ("fb", g.d_fb), ("m", g.d_m)):
        arr = getattr(bank, name)
        for k in range(len(bank)):
            old = arr[k]
            arr[k] = old + h
            fp = np.sum(up * wavelet_forward(frames, w, bank).log_mag)
            arr[k] = old - h
            fm = np.sum(up * wavelet_forward(frames, w, bank).log_mag)
            arr[k] = old
            fd = (fp - fm) / (2 * h)
            assert abs(grad[k] - fd) / max(abs(grad[k]) + abs(fd), 1e-6) < 1e-4, (name, k)
    if kind == "Cmor":
        assert np.all(g.d_m == 0)


def test_backward_stale_cache():
    bank, frames, w, up = _grad_setup("Cmor")
    _, cache = wavelet_forward(frames, w, bank, return_cache=True)
    bank.fb[0] += 0.1
    with pytest.raises(InvalidCacheError):
        wavelet_backward(up, cache)


def test_frozen_parameters_get_zero_gradient():
    bank, frames, w, up = _grad_setup("Fbsp")
    bank.learnable["m"] = False
    _, cache = wavelet_forward(frames, w, bank, return_cache=True)
    g = wavelet_backward(up, cache)
    assert np.all(g.d_m == 0) and np.any(g.d_fb)


def test_stft_equals_degenerate_bank_bitwise():
    rng = np.random.default_rng(4)
    frames = rng.standard_normal((5, 32))
    w = make_window("hann", 32)
    a = stft(frames, w)
    b = wavelet_forward(frames, w, degenerate_bank(32), center=0)
    assert np.array_equal(a.complex_values, b.complex_values)


def test_stft_dc_and_parseval():
    L = 32
    w = make_window("rectangular", L)
    assert np.abs(stft(np.ones((1, L)), w).complex_values[0, 0]) == pytest.approx(L)
    x = np.random.default_rng(0).standard_normal((1, L))
    X = stft(x, w).complex_values[:, 0]
    full = np.concatenate([X, np.conj(X[1:-1][::-1])])
    assert np.sum(np.abs(full) ** 2) / L == pytest.approx(np.sum(x ** 2), rel=1e-12)


# --------------------------------------------------------------------------- mel

def test_mel_shape_and_floor():
    w = make_window("hann", 1600)
    out = mel_filterbank(np.zeros((7, 1600)), w, 300, 16000)
    assert out.shape == (300, 7)
    np.testing.assert_allclose(out, np.log(EPS_MAG))


def test_mel_tone_peaks_at_nearest_center():
    fs, L = 16000, 1600
    w = make_window("hann", L)
    centers = mel_centers(40, fs)
    for f0 in (500.0, 1000.0, 3000.0):
        x = np.sin(2 * np.pi * f0 * np.arange(L) / fs)
        out = mel_filterbank(x[None], w, 40, fs)[:, 0]
        assert np.argmax(out) == np.argmin(np.abs(centers - f0))


def test_mel_too_many_filters():
    with pytest.raises(ConfigurationError):
        mel_weights(900, 1600, 16000)


# --------------------------------------------------------------------------- corruption

def _psd_slope(x, fs, lo=50, hi=4000, n_seg=64):
    seg = x.size // n_seg
    segs = x[:seg * n_seg].reshape(n_seg, seg) * np.hanning(seg)
    psd = np.mean(np.abs(np.fft.rfft(segs, axis=1)) ** 2, axis=0)
    f = np.fft.rfftfreq(seg, 1 / fs)
    band = (f >= lo) & (f <= hi)
    slope = np.polyfit(np.log10(f[band]), 10 * np.log10(psd[band]), 1)[0]
    return slope


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_red_noise_slope(seed):
    fs = 16000
    x = red_noise(fs * 60, seed)
    assert abs(_psd_slope(x, fs) + 20) <= 3


@given(st.integers(2, 5000), st.integers(0, 2 ** 31))
def test_red_noise_moments(n, seed):
    x = red_noise(n, seed)
    assert abs(np.mean(x)) < 3 / np.sqrt(n)
    assert np.sqrt(np.mean(x ** 2)) == pytest.approx(1.0)
    np.testing.assert_array_equal(x, red_noise(n, seed))


def _snr_db(signal, mixed):
    noise = mixed - signal
    return 10 * np.log10(np.mean(signal ** 2) / np.mean(noise ** 2))


def test_mix_zero_db_equal_power():
    rng = np.random.default_rng(0)
    s = rng.standard_normal(1000)
    out = mix_at_snr(s, red_noise(1000, 1) * 7, 0.0)
    assert np.sqrt(np.mean((out - s) ** 2)) == pytest.approx(np.sqrt(np.mean(s ** 2)))


def test_mix_clean_is_identity():
    s = np.arange(10.0)
    np.testing.assert_array_equal(mix_at_snr(s, np.ones(10), CLEAN), s)


@pytest.mark.parametrize("snr", [20, 10, 5, 0, -5])
def test_mix_target_snr(snr):
    s = np.sin(np.arange(16000) * 0.1)
    out = mix_at_snr(s, red_noise(16000, 3), snr)
    assert abs(_snr_db(s, out) - snr) < 0.1


@given(st.floats(-20, 40), st.integers(0, 1000))
def test_mix_snr_property(snr, seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(256) + 0.1
    out = mix_at_snr(s, rng.standard_normal(256), snr)
    assert abs(_snr_db(s, out) - snr) < 1e-6


def test_mix_zero_power():
    with pytest.raises(DegenerateInputError):
        mix_at_snr(np.zeros(10), np.ones(10), 10)


def test_truncate_nyquist_identity():
    x = np.random.default_rng(0).standard_normal(1000)
    np.testing.assert_array_equal(lowpass_truncate(x, 8000, 16000), x)


def test_truncate_removes_tone():
    fs = 16000
    x = np.sin(2 * np.pi * 3000 * np.arange(fs) / fs)
    assert np.max(np.abs(lowpass_truncate(x, 2000, fs))) < 1e-6


@given(st.integers(0, 1000), st.floats(100, 7900), st.integers(64, 4096))
def test_truncate_energy_and_idempotence(seed, cutoff, n):
    fs = 16000
    x = np.random.default_rng(seed).standard_normal(n)
    y = lowpass_truncate(x, cutoff, fs)
    spec = np.abs(np.fft.rfft(y)) ** 2
    f = np.fft.rfftfreq(n, 1 / fs)
    total = np.sum(np.abs(np.fft.rfft(x)) ** 2)
    above = np.sum(spec[f > cutoff])
    assert above <= total * 1e-12
    np.testing.assert_allclose(lowpass_truncate(y, cutoff, fs), y, atol=1e-12)


# --------------------------------------------------------------------------- export

@given(st.lists(st.integers(1, 5), min_size=0, max_size=3), st.integers(0, 100))
def test_tensor_roundtrip(tmp_path_factory, shape, seed):
    a = np.random.default_rng(seed).standard_normal(shape)
    p = tmp_path_factory.mktemp("t") / "a.wsp"
    write_tensor(p, a)
    b = read_tensor(p)
    assert b.shape == a.shape and np.array_equal(a, b)


def test_spectrogram_export(tmp_path):
    bank = WaveletBank.default("Cmor", 16, 5)
    spec = wavelet_forward(np.ones((3, 16)), make_window("hann", 16), bank, frame_spec=FrameSpec(16, 8))
    write_spectrogram(tmp_path / "s.wsp", spec)
    np.testing.assert_array_equal(read_tensor(tmp_path / "s.wsp"), spec.log_mag)
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["bank"]["fc"] == bank.fc.tolist() and meta["frame_spec"] == {"frame_len": 16, "hop": 8}
    write_bank_csv(tmp_path / "b.csv", [dict(bank.snapshot(), epoch=e) for e in (1, 2)])
    rows = (tmp_path / "b.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 2 * len(bank)
