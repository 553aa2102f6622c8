"""Checkpoint container and its binary file format.

Layout: ``b"AGN1"``, u32 format version, u32 header length, UTF-8 JSON header,
then every tensor as little-endian float64 at the offset listed in the header.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, CorruptCheckpointError, IncompatibleCheckpointError
from ..nn.optim import AdamState
from .config import ExperimentConfig
from .model import AcousticModel, build_model

MAGIC = b"AGN1"
FORMAT_VERSION = 1
HEAD_PREFIX = "classifier.fc."


@dataclass
class Checkpoint:
    config: ExperimentConfig
    label_space: list
    params: dict  # name -> ndarray, learnable tensors
    buffers: dict  # name -> ndarray, running statistics
    adam: AdamState = field(default_factory=AdamState)
    epoch: int = 0
    version: int = FORMAT_VERSION

    @property
    def n_classes(self):
        return len(self.label_space)


def capture(model: AcousticModel, config: ExperimentConfig, label_space, adam: AdamState | None = None,
            epoch: int = 0) -> Checkpoint:
    """Snapshot (deep copy) of a model's tensors and optimizer state."""
    params = {k: p.data.copy() for k, p in model.named_parameters().items()}
    buffers = {k: np.array(b, copy=True) for k, b in model.named_buffers().items()}
    a = adam or AdamState(lr=config.lr, weight_decay=config.weight_decay)
    adam_copy = AdamState(a.lr, a.beta1, a.beta2, a.eps, a.weight_decay, dict(a.step),
                          {k: v.copy() for k, v in a.m.items()}, {k: v.copy() for k, v in a.v.items()})
    return Checkpoint(config, list(label_space), params, buffers, adam_copy, epoch)


def restore(ckpt: Checkpoint) -> AcousticModel:
    """Build a model from ``ckpt`` and copy every tensor into it in place."""
    model = build_model(ckpt.config, ckpt.n_classes)
    load_into(model, ckpt)
    return model


def load_into(model: AcousticModel, ckpt: Checkpoint):
    params = model.named_parameters()
    buffers = model.named_buffers()
    if set(params) != set(ckpt.params) or set(buffers) != set(ckpt.buffers):
        raise IncompatibleCheckpointError("checkpoint tensors do not match the model architecture")
    for k, p in params.items():
        if p.data.shape != ckpt.params[k].shape:
            raise IncompatibleCheckpointError(f"{k}: shape {ckpt.params[k].shape} vs model {p.data.shape}")
        np.copyto(p.data, ckpt.params[k])
    for k, b in buffers.items():
        np.copyto(b, ckpt.buffers[k])


def _tensor_items(ckpt: Checkpoint):
    for k in sorted(ckpt.params):
        yield f"param/{k}", ckpt.params[k]
    for k in sorted(ckpt.buffers):
        yield f"buffer/{k}", ckpt.buffers[k]
    for k in sorted(ckpt.adam.m):
        yield f"adam.m/{k}", ckpt.adam.m[k]
        yield f"adam.v/{k}", ckpt.adam.v[k]


def to_bytes(ckpt: Checkpoint) -> bytes:
    directory, chunks, offset = [], [], 0
    for name, arr in _tensor_items(ckpt):
        a = np.ascontiguousarray(arr, dtype="<f8")
        directory.append({"name": name, "dims": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    a = ckpt.adam
    header = {
        "config": ckpt.config.to_dict(),
        "label_space": ckpt.label_space,
        "epoch": ckpt.epoch,
        "adam": {"lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps,
                 "weight_decay": a.weight_decay, "step": dict(sorted(a.step.items()))},
        "tensors": directory,
        "payload_bytes": offset,
    }
    hb = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<II", ckpt.version, len(hb)) + hb + b"".join(chunks)


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CorruptCheckpointError("missing AGN1 magic")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(raw[12:12 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"unreadable header: {exc}") from None
    payload = raw[12 + hlen:]
    if len(payload) != header.get("payload_bytes", -1):
        raise CorruptCheckpointError(f"payload is {len(payload)} bytes, header says {header.get('payload_bytes')}")
    try:
        config = ExperimentConfig.from_dict(header["config"])
    except (ConfigurationError, TypeError) as exc:
        raise IncompatibleCheckpointError(f"config rejected: {exc}") from None
    params, buffers, m, v = {}, {}, {}, {}
    for t in header["tensors"]:
        n = int(np.prod(t["dims"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=n, offset=t["offset"]).reshape(t["dims"]).astype(np.float64)
        kind, name = t["name"].split("/", 1)
        {"param": params, "buffer": buffers, "adam.m": m, "adam.v": v}[kind][name] = arr
    a = header["adam"]
    adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"], a["weight_decay"],
                     {k: int(s) for k, s in a["step"].items()}, m, v)
    return Checkpoint(config, header["label_space"], params, buffers, adam, header["epoch"], version)


def save_checkpoint(path, ckpt: Checkpoint):
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())


def transfer_swap_head(ckpt: Checkpoint, n_classes_target: int, label_space=None, seed: int = 0) -> Checkpoint:
    """Copy of ``ckpt`` with a freshly initialised fully connected head of ``n_classes_target`` outputs.

    Every other tensor is carried over unchanged; the head's Adam moments and
    step counts are dropped.
    """
    if n_classes_target < 2:
        raise ConfigurationError("target task needs at least 2 classes")
    if label_space is None:
        label_space = [str(i) for i in range(n_classes_target)]
    if len(label_space) != n_classes_target:
        raise ConfigurationError("label_space length must equal n_classes_target")
    params = {k: v.copy() for k, v in ckpt.params.items()}
    w = params[HEAD_PREFIX + "weight"]
    d_in = w.shape[1]
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / d_in)
    params[HEAD_PREFIX + "weight"] = rng.uniform(-bound, bound, size=(n_classes_target, d_in))
    params[HEAD_PREFIX + "bias"] = np.zeros(n_classes_target)
    a = ckpt.adam
    adam = AdamState(a.lr, a.beta1, a.beta2, a.eps, a.weight_decay, dict(a.step),
                     {k: x.copy() for k, x in a.m.items()}, {k: x.copy() for k, x in a.v.items()})
    for k in (HEAD_PREFIX + "weight", HEAD_PREFIX + "bias"):
        adam.reset(k)
    buffers = {k: v.copy() for k, v in ckpt.buffers.items()}
    return Checkpoint(ckpt.config, list(label_space), params, buffers, adam, 0, ckpt.version)
