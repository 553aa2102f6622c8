"""Synthetic datasets with known class structure, for smoke tests and transfer checks."""
from __future__ import annotations

import numpy as np

from ..dsp.corrupt import mix_at_snr, red_noise
from .data import SegmentSet


def tone(n, fs, f0, phase=0.0):
    t = np.arange(n) / fs
    return np.sin(2 * np.pi * f0 * t + phase)


def chirp(n, fs, f0, f1, phase=0.0):
    t = np.arange(n) / fs
    dur = n / fs
    return np.sin(2 * np.pi * (f0 * t + 0.5 * (f1 - f0) / dur * t ** 2) + phase)


def make_set(generators, labels, n_segments, sample_rate=4000, duration_s=1.0, snr_db=10.0,
             seed=0, prefix="syn") -> SegmentSet:
    """Balanced set; ``generators[c](rng, n, fs)`` synthesises one clean segment of class ``c``.

    Each segment is its own source recording and is buried in red noise at ``snr_db``.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    rows, labs, srcs = [], [], []
    for i in range(n_segments):
        c = i % len(labels)
        clean = generators[c](rng, n, sample_rate)
        noise = red_noise(n, int(rng.integers(2 ** 31)))
        rows.append(mix_at_snr(clean, noise, snr_db) if np.isfinite(snr_db) else clean)
        labs.append(labels[c])
        srcs.append(f"{prefix}{i:04d}")
    return SegmentSet(np.stack(rows), labs, srcs, [0] * n_segments, sample_rate)


def _tone_gen(lo, hi):
    def gen(rng, n, fs):
        return tone(n, fs, rng.uniform(lo, hi), rng.uniform(0, 2 * np.pi))
    return gen


def _chirp_gen(lo, hi, min_sweep):
    def gen(rng, n, fs):
        f0 = rng.uniform(lo, hi - min_sweep)
        f1 = rng.uniform(f0 + min_sweep, hi)
        if rng.random() < 0.5:
            f0, f1 = f1, f0
        return chirp(n, fs, f0, f1, rng.uniform(0, 2 * np.pi))
    return gen


def _noise_gen(rng, n, fs):
    return rng.standard_normal(n)


def tones_vs_chirps(n_segments=100, sample_rate=4000, duration_s=1.0, snr_db=10.0, seed=0,
                    band=(300.0, 1500.0)) -> SegmentSet:
    """Class ``tone``: steady sinusoid; class ``chirp``: linear sweep of at least 400 Hz."""
    lo, hi = band
    return make_set([_tone_gen(lo, hi), _chirp_gen(lo, hi, 400.0)], ["tone", "chirp"], n_segments,
                    sample_rate, duration_s, snr_db, seed, prefix="tc")


def transfer_pair(n_source=120, n_target=40, sample_rate=4000, duration_s=1.0, snr_db=5.0, seed=0):
    """Source task (tone / chirp / white burst, 3 classes) and a 2-class target task.

    The target reuses the tone-versus-chirp structure in a shifted band, so a
    front-end and classifier trained on the source transfer directly.
    """
    src = make_set([_tone_gen(300, 1500), _chirp_gen(300, 1500, 400), _noise_gen],
                   ["tone", "chirp", "noise"], n_source, sample_rate, duration_s, snr_db, seed, prefix="src")
    tgt = make_set([_tone_gen(400, 1600), _chirp_gen(400, 1600, 400)], ["tone", "chirp"],
                   n_target, sample_rate, duration_s, snr_db, seed + 1, prefix="tgt")
    return src, tgt


def write_raw_dir(data: SegmentSet, directory, folds=None):
    """Write one WAV per source plus ``labels.json``, the layout ``prepare`` reads.

    Segments sharing a source are concatenated in order. ``folds`` optionally
    maps source ids to a fixed fold.
    """
    import json
    from pathlib import Path

    from ..audio_io import write_wav

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    labels = {}
    for src in sorted(set(data.source_ids)):
        idx = [i for i, s in enumerate(data.source_ids) if s == src]
        idx.sort(key=lambda i: data.seg_index[i])
        write_wav(directory / f"{src}.wav", np.concatenate([data.samples[i] for i in idx]), data.sample_rate)
        lab = data.labels[idx[0]]
        labels[src] = lab if folds is None else {"label": lab, "fold": int(folds[src])}
    (directory / "labels.json").write_text(json.dumps(labels, indent=1, sort_keys=True) + "\n")
    return directory
