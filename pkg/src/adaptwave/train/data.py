from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..audio_io import Manifest, read_wav, resample, segment
from ..dsp.corrupt import lowpass_truncate, mix_at_snr, red_noise
from ..errors import LabelError

log = logging.getLogger(__name__)


@dataclass
class SegmentSet:
    """Equal-length segments held in memory, with their labels and source recordings."""

    samples: np.ndarray  # [N, S]
    labels: list
    source_ids: list
    seg_index: list = field(default_factory=list)
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be [N, S]")
        if not self.seg_index:
            self.seg_index = [0] * len(self.labels)
        if not (len(self.labels) == len(self.source_ids) == len(self.seg_index) == self.samples.shape[0]):
            raise ValueError("labels, source_ids and seg_index must match the number of segments")

    def __len__(self):
        return self.samples.shape[0]

    def subset(self, idx) -> "SegmentSet":
        idx = np.asarray(idx, dtype=int)
        return SegmentSet(self.samples[idx], [self.labels[i] for i in idx], [self.source_ids[i] for i in idx],
                          [self.seg_index[i] for i in idx], self.sample_rate)

    def by_sources(self, sources) -> "SegmentSet":
        keep = set(sources)
        return self.subset([i for i, s in enumerate(self.source_ids) if s in keep])

    def label_indices(self, label_space) -> np.ndarray:
        lookup = {lab: i for i, lab in enumerate(label_space)}
        try:
            return np.array([lookup[lab] for lab in self.labels], dtype=int)
        except KeyError as exc:
            raise LabelError(f"label {exc.args[0]!r} not in label space {list(label_space)}") from None

    def map_samples(self, fn) -> "SegmentSet":
        """New set with ``fn(samples_row, source_id, seg_index)`` applied per segment."""
        rows = [fn(x, s, k) for x, s, k in zip(self.samples, self.source_ids, self.seg_index)]
        return SegmentSet(np.stack(rows) if rows else self.samples.copy(), list(self.labels),
                          list(self.source_ids), list(self.seg_index), self.sample_rate)


def load_manifest_set(manifest: Manifest, sample_rate: int, segment_s: float, overlap_s: float) -> SegmentSet:
    """Read every manifest entry, resample it, and cut it into segments."""
    rows, labels, sources, index = [], [], [], []
    counters: dict[str, int] = {}
    for e in manifest.entries:
        clip = read_wav(e.path)
        clip.source_id = e.source_id
        clip.label = e.label
        if clip.sample_rate != sample_rate:
            clip = resample(clip, sample_rate)
        for seg in segment(clip, segment_s, overlap_s):
            k = counters.get(e.source_id, 0)
            counters[e.source_id] = k + 1
            rows.append(seg.clip.samples)
            labels.append(e.label)
            sources.append(e.source_id)
            index.append(k)
    if not rows:
        n = int(round(segment_s * sample_rate))
        return SegmentSet(np.zeros((0, n)), [], [], [], sample_rate)
    return SegmentSet(np.stack(rows), labels, sources, index, sample_rate)


def segment_seed(seed: int, source_id: str, seg_index: int) -> int:
    return zlib.crc32(f"{seed}|{source_id}|{seg_index}".encode())


def add_red_noise(data: SegmentSet, snr_db: float, seed: int) -> SegmentSet:
    if np.isposinf(snr_db):
        return data.map_samples(lambda x, s, k: x.copy())
    return data.map_samples(lambda x, s, k: mix_at_snr(x, red_noise(x.size, segment_seed(seed, s, k)), snr_db))


def truncate_band(data: SegmentSet, cutoff_hz: float) -> SegmentSet:
    return data.map_samples(lambda x, s, k: lowpass_truncate(x, cutoff_hz, data.sample_rate))
