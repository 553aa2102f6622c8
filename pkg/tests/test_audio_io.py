import struct
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptwave.audio_io import (CLASS_LETTERS, SHIPSEAR_CLASSES, AudioClip, Manifest, ManifestEntry, kfold_split,
                                map_label, read_wav, resample, segment, write_wav)
from adaptwave.errors import UnknownLabelError, UnsupportedCodecError, WavFormatError


def raw_wav(path, code, channels, rate, bits, payload):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


def test_pcm16_full_scale_division(tmp_path):
    p = raw_wav(tmp_path / "c.wav", 1, 1, 8000, 16, np.full(100, 16384, "<i2").tobytes())
    clip = read_wav(p)
    assert clip.sample_rate == 8000
    assert np.all(clip.samples == 0.5)
    assert clip.source_id == "c"


def test_stereo_is_averaged(tmp_path):
    frames = np.tile(np.array([0.2, 0.4], "<f4"), 50)
    clip = read_wav(raw_wav(tmp_path / "s.wav", 3, 2, 16000, 32, frames.tobytes()))
    np.testing.assert_allclose(clip.samples, 0.3, atol=1e-7)
    assert clip.samples.size == 50


def test_mulaw_is_unsupported(tmp_path):
    p = raw_wav(tmp_path / "u.wav", 7, 1, 8000, 8, bytes(range(64)))
    with pytest.raises(UnsupportedCodecError):
        read_wav(p)


@pytest.mark.parametrize("blob", [b"", b"RIFF0000WAVX", b"RIFF\x04\x00\x00\x00WAVE"])
def test_malformed_header(tmp_path, blob):
    p = tmp_path / "bad.wav"
    p.write_bytes(blob)
    with pytest.raises(WavFormatError):
        read_wav(p)


@given(st.lists(st.floats(-1, 1, width=32), min_size=1, max_size=200))
def test_float_roundtrip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("w") / "x.wav"
    write_wav(p, values, 11025)
    clip = read_wav(p)
    np.testing.assert_array_equal(clip.samples, np.asarray(values, np.float32).astype(np.float64))


def test_resample_identity():
    x = np.random.default_rng(0).standard_normal(1000)
    out = resample(AudioClip(x, 16000), 16000)
    np.testing.assert_array_equal(out.samples, x)


def test_resample_keeps_tone_peak():
    n = 32000
    x = np.sin(2 * np.pi * 1000 * np.arange(n) / 32000)
    y = resample(AudioClip(x, 32000), 16000)
    assert y.sample_rate == 16000
    spec = np.abs(np.fft.rfft(y.samples))
    freqs = np.fft.rfftfreq(y.samples.size, 1 / 16000)
    # analytically generated reference sine at the target rate
    ref = np.abs(np.fft.rfft(np.sin(2 * np.pi * 1000 * np.arange(y.samples.size) / 16000)))
    assert freqs[np.argmax(spec)] == 1000.0
    assert np.argmax(spec) == np.argmax(ref)


@pytest.mark.parametrize("rate", [52734, 32000, 17067])
def test_resample_length(rate):
    n = rate * 2 + 17
    y = resample(AudioClip(np.random.default_rng(1).standard_normal(n), rate), 16000)
    assert abs(y.samples.size - round(n * 16000 / rate)) <= 1


@given(st.floats(50, 3000), st.floats(0, 2 * np.pi))  # up to 0.75 of the 4 kHz Nyquist
def test_resample_roundtrip_rms(f0, phase):
    fs, n = 16000, 16000
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * f0 * t + phase)
    down = resample(AudioClip(x, fs), 8000)
    back = resample(down, fs)
    trim = slice(400, n - 400)  # filter edge transients
    rms = np.sqrt(np.mean(x[trim] ** 2))
    assert abs(np.sqrt(np.mean(back.samples[trim] ** 2)) / rms - 1) < 0.01


def _clip(seconds, fs=100):
    return AudioClip(np.random.default_rng(2).standard_normal(int(seconds * fs)), fs, source_id="rec")


def test_segment_sixty_seconds():
    segs = segment(_clip(60), 30, 15)
    assert [s.start_s for s in segs] == [0.0, 15.0, 30.0]
    assert all(s.duration_s == 30 and s.clip.samples.size == 3000 for s in segs)
    assert all(s.parent_source_id == "rec" for s in segs)


def test_segment_exact_fit_and_too_short():
    assert len(segment(_clip(30), 30, 15)) == 1
    assert segment(_clip(29), 30, 15) == []


@given(st.floats(10, 200), st.integers(2, 40), st.data())
def test_segment_grid(seconds, seg_len, data):
    overlap = data.draw(st.integers(0, seg_len - 1))
    clip = _clip(seconds, fs=10)
    segs = segment(clip, seg_len, overlap)
    hop = seg_len - overlap
    n_seg = clip.samples.size
    expected = 0 if n_seg < seg_len * 10 else (n_seg - seg_len * 10) // (hop * 10) + 1
    assert len(segs) == expected
    for i, s in enumerate(segs):
        assert s.start_s == pytest.approx(i * hop)
        start = int(round(s.start_s * 10))
        np.testing.assert_array_equal(s.clip.samples, clip.samples[start:start + seg_len * 10])


TABLE = {"Fishboat": "A", "Musselboat": "A", "Dredger": "A", "Motorboat": "B", "Sailboat": "B",
         "Passengers": "C", "Oceanliner": "D", "RORO": "D", "Naturalnoise": "E"}


@pytest.mark.parametrize("vessel,cls", sorted(TABLE.items()))
def test_map_label_table(vessel, cls):
    assert map_label(vessel) == cls


def test_map_label_total_idempotent():
    assert SHIPSEAR_CLASSES == TABLE
    for name in list(TABLE) + list(CLASS_LETTERS):
        assert map_label(map_label(name)) == map_label(name)
    assert map_label("ro-ro") == "D"
    with pytest.raises(UnknownLabelError):
        map_label("Submarine")


def _manifest(n_sources, labels, segs_per_source=1):
    entries = []
    for i in range(n_sources):
        for j in range(segs_per_source):
            entries.append(ManifestEntry(f"s{i}_{j}.wav", f"s{i:03d}", labels[i % len(labels)]))
    return Manifest(entries)


def test_kfold_even_division():
    fa = kfold_split(_manifest(8, ["x"]), 4, seed=3)
    assert Counter(fa.assignment.values()) == {0: 2, 1: 2, 2: 2, 3: 2}


def test_kfold_deterministic():
    m = _manifest(40, list("ABCD"), 3)
    assert kfold_split(m, 4, 7).assignment == kfold_split(m, 4, 7).assignment


def test_kfold_exhaustive_audit():
    m = _manifest(40, list("ABCD"), 3)
    fa = kfold_split(m, 4, 11)
    # brute force: every source exactly once, folds partition the sources
    pairs = [(e.source_id, fa.assignment[e.source_id]) for e in m.entries]
    per_source = {}
    for s, f in pairs:
        per_source.setdefault(s, set()).add(f)
    assert all(len(v) == 1 for v in per_source.values())
    assert sorted(per_source) == sorted(fa.assignment)
    for a in range(4):
        for b in range(a + 1, 4):
            assert not set(fa.sources_in(a)) & set(fa.sources_in(b))
    label = {e.source_id: e.label for e in m.entries}
    for lab in "ABCD":
        counts = Counter(fa.assignment[s] for s in fa.assignment if label[s] == lab)
        assert max(counts.values()) - min(counts.get(f, 0) for f in range(4)) <= 1


@given(st.integers(2, 6), st.integers(1, 50), st.integers(1, 5), st.integers(0, 2 ** 16))
def test_kfold_leak_free_and_balanced(k, n_sources, n_labels, seed):
    labels = [f"L{i}" for i in range(n_labels)]
    m = _manifest(n_sources, labels, 2)
    fa = kfold_split(m, k, seed)
    assert set(fa.assignment) == set(m.source_ids)
    assert all(0 <= f < k for f in fa.assignment.values())
    sizes = Counter(fa.assignment.values())
    assert max(sizes.values()) - min(sizes.get(f, 0) for f in range(k)) <= 1
    small = [lab for lab in labels if sum(1 for i in range(n_sources) if labels[i % n_labels] == lab) < k]
    assert len(fa.warnings) == len([lab for lab in small if any(labels[i % n_labels] == lab
                                                                for i in range(n_sources))])


def test_kfold_respects_predefined_folds():
    entries = [ManifestEntry("a", "a", "x", 2), ManifestEntry("b", "b", "x"), ManifestEntry("c", "c", "x", 0)]
    fa = kfold_split(Manifest(entries), 3, 0)
    assert fa.assignment["a"] == 2 and fa.assignment["c"] == 0


def test_manifest_unknown_label():
    with pytest.raises(UnknownLabelError):
        Manifest([ManifestEntry("a", "a", "x")], ["y"])
