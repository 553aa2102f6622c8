"""On-disk formats for spectrogram tensors and wavelet-bank trajectories.

Tensor layout: ``b"WSP1"``, u32 rank, u32 dims[rank], float64 payload, all
little-endian, row-major.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import WavFormatError

MAGIC = b"WSP1"


def write_tensor(path, array):
    a = np.array(array, dtype="<f8", order="C")  # ascontiguousarray would promote 0-d to 1-d
    header = MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    Path(path).write_bytes(header + a.tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise WavFormatError(f"{path}: bad magic {raw[:4]!r}")
    rank = struct.unpack("<I", raw[4:8])[0]
    dims = struct.unpack(f"<{rank}I", raw[8:8 + 4 * rank])
    payload = raw[8 + 4 * rank:]
    if len(payload) != 8 * int(np.prod(dims, dtype=np.int64)):
        raise WavFormatError(f"{path}: payload length does not match dims {dims}")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def write_spectrogram(path, spec, extra: dict | None = None):
    """Write ``spec.log_mag`` as a WSP1 tensor plus a ``.json`` sidecar."""
    path = Path(path)
    write_tensor(path, spec.log_mag)
    meta = {
        "frame_spec": asdict(spec.frame_spec) if spec.frame_spec is not None else None,
        "bank": spec.bank_snapshot,
        "shape": list(np.shape(spec.log_mag)),
    }
    if extra:
        meta.update(extra)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def write_bank_csv(path, bank_or_history):
    """Write bank parameters as CSV.

    Accepts a single bank (columns ``bin,f_c,f_b,m``) or a list of per-epoch
    snapshot dicts (columns ``epoch,bin,f_c,f_b,m``).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(bank_or_history, list):
            w.writerow(["epoch", "bin", "f_c", "f_b", "m"])
            for snap in bank_or_history:
                for k, (fc, fb, m) in enumerate(zip(snap["fc"], snap["fb"], snap["m"])):
                    w.writerow([snap["epoch"], k, repr(fc), repr(fb), repr(m)])
        else:
            bank = bank_or_history
            w.writerow(["bin", "f_c", "f_b", "m"])
            for k in range(len(bank)):
                w.writerow([k, repr(float(bank.fc[k])), repr(float(bank.fb[k])), repr(float(bank.m[k]))])
