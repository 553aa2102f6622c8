"""WAV ingestion, resampling, segmentation, label mapping and grouped folds."""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import UnknownLabelError, UnsupportedCodecError, WavFormatError

log = logging.getLogger(__name__)

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("AudioClip needs a non-empty 1-D sample buffer")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Segment:
    clip: AudioClip
    parent_source_id: str
    start_s: float
    duration_s: float
    index: int = 0


@dataclass
class ManifestEntry:
    path: str
    source_id: str
    label: str
    fold: int | None = None


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    label_space: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.label_space:
            self.label_space = sorted({e.label for e in self.entries})
        missing = {e.label for e in self.entries} - set(self.label_space)
        if missing:
            raise UnknownLabelError(f"labels not in label_space: {sorted(missing)}")

    @property
    def source_ids(self) -> list[str]:
        return sorted({e.source_id for e in self.entries})

    def to_json(self) -> str:
        entries = []
        for e in self.entries:
            d = {"path": e.path, "source_id": e.source_id, "label": e.label}
            if e.fold is not None:
                d["fold"] = e.fold
            entries.append(d)
        return json.dumps({"entries": entries, "label_space": self.label_space},
                          indent=1, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, doc: dict) -> "Manifest":
        entries = [ManifestEntry(e["path"], str(e["source_id"]), e["label"], e.get("fold"))
                   for e in doc.get("entries", [])]
        return cls(entries, list(doc.get("label_space", [])))

    @classmethod
    def load(cls, path) -> "Manifest":
        m = cls.from_dict(json.loads(Path(path).read_text()))
        base = Path(path).parent
        for e in m.entries:
            if not Path(e.path).is_absolute():
                e.path = str(base / e.path)
        return m


@dataclass
class FoldAssignment:
    k: int
    assignment: dict[str, int]
    warnings: list[str] = field(default_factory=list)

    def sources_in(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignment.items() if f == fold)

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "assignment": self.assignment,
                           "warnings": self.warnings}, indent=1, sort_keys=True) + "\n"


# --------------------------------------------------------------------------- WAV

def read_wav(path) -> AudioClip:
    """Read a PCM WAV file (16-bit int or 32-bit float) and mix it down to mono.

    Integer samples are divided by 32768 so the result lies in [-1, 1].
    The file stem becomes the clip's ``source_id``.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        size = struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == _EXTENSIBLE and len(body) >= 26:
                sub = struct.unpack("<H", body[24:26])[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    code, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise WavFormatError(f"{path}: bad channel count or rate")
    if code == _PCM and bits == 16:
        x = np.frombuffer(data[:len(data) - len(data) % 2], dtype="<i2").astype(np.float64) / 32768.0
    elif code == _IEEE_FLOAT and bits == 32:
        x = np.frombuffer(data[:len(data) - len(data) % 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: format code {code} with {bits} bits is not supported")
    n = x.size // channels
    if n == 0:
        raise WavFormatError(f"{path}: no samples")
    x = x[:n * channels].reshape(n, channels).mean(axis=1)
    return AudioClip(x, int(rate), source_id=Path(path).stem)


def write_wav(path, samples, sample_rate: int, subtype: str = "float"):
    """Write mono audio as 32-bit float (default) or 16-bit PCM."""
    x = np.asarray(samples, dtype=np.float64)
    if subtype == "float":
        payload = x.astype("<f4").tobytes()
        code, bits = _IEEE_FLOAT, 32
    elif subtype == "pcm16":
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        code, bits = _PCM, 16
    else:
        raise ValueError(f"unknown subtype {subtype!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", code, 1, sample_rate, sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# --------------------------------------------------------------------------- resampling

def resample(clip: AudioClip, target_rate: int, beta: float = 8.0, rolloff: float = 0.9) -> AudioClip:
    """Polyphase windowed-sinc resampling with a Kaiser(``beta``) window.

    The anti-aliasing cutoff sits at ``rolloff`` times the lower of the two
    Nyquist frequencies.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.source_id, clip.label)
    g = gcd(int(clip.sample_rate), int(target_rate))
    up, down = target_rate // g, clip.sample_rate // g
    max_rate = max(up, down)
    half_len = 32 * max_rate  # 64 zero crossings: transition band ~15% of the lower Nyquist
    # resample_poly applies the gain of `up` to custom taps itself
    taps = signal.firwin(2 * half_len + 1, rolloff / max_rate, window=("kaiser", beta))
    y = signal.resample_poly(clip.samples, up, down, window=taps)
    return AudioClip(y, int(target_rate), clip.source_id, clip.label)


# --------------------------------------------------------------------------- segmentation

def segment(clip: AudioClip, seg_len_s: float = 30.0, overlap_s: float = 15.0) -> list[Segment]:
    """Cut ``clip`` into fixed-length overlapping segments.

    A trailing remainder shorter than ``seg_len_s`` is dropped; a clip shorter
    than one segment yields an empty list.
    """
    if not 0 <= overlap_s < seg_len_s:
        raise ValueError("need 0 <= overlap_s < seg_len_s")
    seg_n = int(round(seg_len_s * clip.sample_rate))
    hop_n = int(round((seg_len_s - overlap_s) * clip.sample_rate))
    total = clip.samples.size
    if total < seg_n:
        log.warning("clip %s (%.2f s) shorter than one segment", clip.source_id, clip.duration)
        return []
    out = []
    for i, start in enumerate(range(0, total - seg_n + 1, hop_n)):
        sub = AudioClip(clip.samples[start:start + seg_n].copy(), clip.sample_rate,
                        f"{clip.source_id}#{i}", clip.label)
        out.append(Segment(sub, clip.source_id, start / clip.sample_rate, seg_n / clip.sample_rate, i))
    return out


# --------------------------------------------------------------------------- labels

SHIPSEAR_CLASSES = {
    "Fishboat": "A", "Musselboat": "A", "Dredger": "A",
    "Motorboat": "B", "Sailboat": "B",
    "Passengers": "C",
    "Oceanliner": "D", "RORO": "D",
    "Naturalnoise": "E",
}
CLASS_LETTERS = ("A", "B", "C", "D", "E")

_ALIASES = {
    "roll on/roll off ship": "RORO",
    "ro-ro": "RORO",
    "roro": "RORO",
    "passenger": "Passengers",
    "natural noise": "Naturalnoise",
    "ocean liner": "Oceanliner",
}


def _canonical_type(name: str) -> str | None:
    if name in SHIPSEAR_CLASSES:
        return name
    key = name.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    for t in SHIPSEAR_CLASSES:
        if t.lower() == key:
            return t
    return None


def map_label(vessel_type: str) -> str:
    """Map a Shipsear vessel type to its size class (A-E); class letters pass through."""
    if vessel_type in CLASS_LETTERS:
        return vessel_type
    t = _canonical_type(vessel_type)
    if t is None:
        raise UnknownLabelError(f"unknown vessel type {vessel_type!r}")
    return SHIPSEAR_CLASSES[t]


def is_shipsear_type(name: str) -> bool:
    return _canonical_type(name) is not None


# --------------------------------------------------------------------------- folds

def kfold_split(manifest: Manifest, k: int, seed: int = 0) -> FoldAssignment:
    """Grouped, label-stratified k-fold assignment of source recordings.

    Every segment of a source lands in the same fold. Within each label the
    shuffled sources are dealt round-robin, starting from whichever folds are
    currently lightest, so per-label counts differ by at most one. Entries with
    an explicit ``fold`` keep it.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    label_of: dict[str, str] = {}
    fixed: dict[str, int] = {}
    for e in manifest.entries:
        prev = label_of.setdefault(e.source_id, e.label)
        if prev != e.label:
            raise ValueError(f"source {e.source_id!r} carries two labels ({prev!r}, {e.label!r})")
        if e.fold is not None:
            if not 0 <= e.fold < k:
                raise ValueError(f"predefined fold {e.fold} outside [0, {k})")
            fixed[e.source_id] = int(e.fold)

    rng = np.random.default_rng(seed)
    assignment = dict(fixed)
    totals = np.zeros(k, dtype=int)
    for f in fixed.values():
        totals[f] += 1
    warnings = []
    for label in sorted(set(label_of.values())):
        sources = sorted(s for s, lab in label_of.items() if lab == label and s not in fixed)
        if not sources:
            continue
        if len(sources) < k:
            msg = f"label {label!r} has {len(sources)} sources for {k} folds; stratification relaxed"
            log.warning(msg)
            warnings.append(msg)
        order = [sources[i] for i in rng.permutation(len(sources))]
        folds = sorted(range(k), key=lambda f: (totals[f], f))
        for i, s in enumerate(order):
            f = folds[i % k]
            assignment[s] = f
            totals[f] += 1
    return FoldAssignment(k, dict(sorted(assignment.items())), warnings)
