from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..audio_io import CLASS_LETTERS, is_shipsear_type, map_label
from ..errors import DivergenceError, LabelError
from ..nn.functional import cross_entropy
from ..nn.optim import Adam
from .checkpoint import Checkpoint, capture, load_into, restore
from .config import ExperimentConfig
from .data import SegmentSet
from .model import build_model, predict_logits

log = logging.getLogger(__name__)


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray  # rows = truth, cols = prediction
    labels: list
    per_class: dict = field(default_factory=dict)
    loss_curve: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "loss_curve": list(self.loss_curve),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def write_confusion_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["truth\\pred"] + list(self.labels))
            for lab, row in zip(self.labels, self.confusion):
                w.writerow([lab] + [int(v) for v in row])


def compute_metrics(truth, pred, labels, loss_curve=()) -> Metrics:
    """Accuracy, confusion matrix and per-class precision/recall over ``labels``."""
    idx = {lab: i for i, lab in enumerate(labels)}
    C = len(labels)
    conf = np.zeros((C, C), dtype=np.int64)
    for t, p in zip(truth, pred):
        if t not in idx or p not in idx:
            raise LabelError(f"label {t if t not in idx else p!r} outside evaluation labels")
        conf[idx[t], idx[p]] += 1
    total = int(conf.sum())
    acc = float(np.trace(conf) / total) if total else 0.0
    per = {}
    for i, lab in enumerate(labels):
        tp = int(conf[i, i])
        col, row = int(conf[:, i].sum()), int(conf[i].sum())
        per[lab] = {"precision": tp / col if col else 0.0, "recall": tp / row if row else 0.0, "support": row}
    return Metrics(acc, conf, list(labels), per, list(loss_curve))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    bank: dict | None = None


@dataclass
class TrainResult:
    best: Checkpoint
    final: Checkpoint
    history: list  # EpochRecord per epoch
    initial: Checkpoint | None = None

    @property
    def loss_curve(self):
        return [r.train_loss for r in self.history]

    @property
    def val_curve(self):
        return [r.val_accuracy for r in self.history]

    def bank_history(self):
        return [dict(r.bank, epoch=r.epoch) for r in self.history if r.bank is not None]

    def epochs_to(self, accuracy: float):
        """First epoch (1-based) whose validation accuracy reaches ``accuracy``, else ``None``."""
        for r in self.history:
            if r.val_accuracy >= accuracy:
                return r.epoch
        return None


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    # a lone trailing sample cannot feed batch statistics
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_run(config: ExperimentConfig, train: SegmentSet, val: SegmentSet, label_space=None,
              init: Checkpoint | None = None, progress=None) -> TrainResult:
    """Jointly train front-end and classifier with Adam on cross-entropy.

    The checkpoint with the best validation accuracy (earliest on ties) is
    kept as ``best``; ``final`` is the state after the last epoch. When
    ``init`` is given its tensors and optimizer state seed the run.
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    label_space = list(label_space or (init.label_space if init else sorted(set(train.labels))))
    y_train = train.label_indices(label_space)
    if len(val):
        val.label_indices(label_space)
    model = build_model(config, len(label_space))
    params = model.trainable_parameters()
    opt = Adam(params, lr=config.lr, weight_decay=config.weight_decay)
    if init is not None:
        load_into(model, init)
        opt.state.step = {k: s for k, s in init.adam.step.items() if k in params}
        opt.state.m = {k: v.copy() for k, v in init.adam.m.items() if k in params}
        opt.state.v = {k: v.copy() for k, v in init.adam.v.items() if k in params}
    rng = np.random.default_rng(config.seed)
    bank = model.bank()
    history = []
    initial = capture(model, config, label_space, opt.state, 0)
    best, best_acc = initial, -1.0
    for epoch in range(1, config.epochs + 1):
        model.train()
        losses = []
        for b, idx in enumerate(_batches(len(train), config.batch_size, rng)):
            opt.zero_grad()
            logits = model(train.samples[idx])
            loss, dlogits = cross_entropy(logits.data, y_train[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}", epoch, b)
            logits.backward(dlogits)
            opt.step()
            losses.append(loss * len(idx))
        train_loss = float(np.sum(losses) / len(train))
        val_acc = evaluate_model(model, val, label_space).accuracy if len(val) else float("nan")
        rec = EpochRecord(epoch, train_loss, val_acc, bank.snapshot() if bank is not None else None)
        history.append(rec)
        if progress:
            progress(rec)
        log.info("epoch %d loss %.4f val_acc %.4f", epoch, train_loss, val_acc)
        score = val_acc if len(val) else -train_loss
        if score > best_acc:
            best_acc = score
            best = capture(model, config, label_space, opt.state, epoch)
    final = capture(model, config, label_space, opt.state, config.epochs)
    return TrainResult(best, final, history, initial)


def _scoring_labels(label_space):
    if label_space and all(is_shipsear_type(lab) and lab not in CLASS_LETTERS for lab in label_space):
        return list(CLASS_LETTERS), map_label
    return list(label_space), None


def evaluate_model(model, data: SegmentSet, label_space, loss_curve=()) -> Metrics:
    logits = predict_logits(model, data.samples)
    pred = [label_space[i] for i in np.argmax(logits, axis=1)] if len(data) else []
    truth = list(data.labels)
    for t in truth:
        if t not in label_space:
            raise LabelError(f"unseen label {t!r}")
    labels, mapper = _scoring_labels(label_space)
    if mapper is not None:
        truth = [mapper(t) for t in truth]
        pred = [mapper(p) for p in pred]
    return compute_metrics(truth, pred, labels, loss_curve)


def evaluate(ckpt: Checkpoint, data: SegmentSet) -> Metrics:
    """Eval-mode scoring of ``data``; Shipsear vessel types are scored as classes A-E."""
    return evaluate_model(restore(ckpt), data, ckpt.label_space)
