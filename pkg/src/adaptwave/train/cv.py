"""Grouped cross-validation and robustness sweeps."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..audio_io import FoldAssignment, Manifest, ManifestEntry, kfold_split
from .config import ExperimentConfig
from .data import SegmentSet, add_red_noise, truncate_band
from .loop import Metrics, TrainResult, evaluate, train_run

log = logging.getLogger(__name__)


@dataclass
class FoldResult:
    fold: int
    metrics: Metrics
    train_sources: list
    val_sources: list
    test_sources: list
    result: TrainResult | None = None


@dataclass
class CVResult:
    folds: list = field(default_factory=list)

    @property
    def accuracies(self):
        return [f.metrics.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        acc = self.accuracies
        return float(sum(acc) / len(acc)) if acc else float("nan")

    def audit(self):
        return [{"fold": f.fold, "train": f.train_sources, "val": f.val_sources, "test": f.test_sources}
                for f in self.folds]


def folds_for(data: SegmentSet, k: int, seed: int, predefined: dict | None = None) -> FoldAssignment:
    entries = []
    seen = set()
    for s, lab in zip(data.source_ids, data.labels):
        if s not in seen:
            seen.add(s)
            fold = None if predefined is None else predefined.get(s)
            entries.append(ManifestEntry("", s, lab, fold))
    return kfold_split(Manifest(entries), k, seed)


def split_validation(sources, fraction, seed):
    """Hold out ``fraction`` of the training sources (at least one when fraction > 0)."""
    sources = sorted(sources)
    if fraction <= 0 or len(sources) < 2:
        return sources, []
    rng = np.random.default_rng(seed)
    order = [sources[i] for i in rng.permutation(len(sources))]
    n_val = min(len(sources) - 1, max(1, int(round(fraction * len(sources)))))
    return sorted(order[n_val:]), sorted(order[:n_val])


def run_fold(config: ExperimentConfig, data: SegmentSet, assignment: FoldAssignment, fold: int,
             label_space, keep_result: bool = False) -> FoldResult:
    """One round: fold ``fold`` is the test set, the rest is split into train and validation sources."""
    test_src = assignment.sources_in(fold)
    rest = [s for s, f in assignment.assignment.items() if f != fold]
    train_src, val_src = split_validation(rest, config.val_fraction, config.seed + 1000 * (fold + 1))
    overlap = (set(train_src) | set(val_src)) & set(test_src)
    if overlap:
        raise AssertionError(f"fold {fold}: sources leak between train and test: {sorted(overlap)}")
    result = train_run(config, data.by_sources(train_src), data.by_sources(val_src), label_space)
    metrics = evaluate(result.best, data.by_sources(test_src))
    metrics.loss_curve = result.loss_curve
    return FoldResult(fold, metrics, train_src, val_src, test_src, result if keep_result else None)


def run_cv(config: ExperimentConfig, data: SegmentSet, k: int | None = None,
           assignment: FoldAssignment | None = None, parallel: int = 1, keep_results=False) -> CVResult:
    """Train/evaluate once per fold with fold ``i`` as test; report per-fold and mean accuracy."""
    k = k or config.folds
    assignment = assignment or folds_for(data, k, config.seed)
    label_space = sorted(set(data.labels))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            futs = [ex.submit(run_fold, config, data, assignment, i, label_space, keep_results) for i in range(k)]
            folds = [f.result() for f in futs]
    else:
        folds = [run_fold(config, data, assignment, i, label_space, keep_results) for i in range(k)]
    return CVResult(folds)


@dataclass
class SweepRow:
    condition: str
    fold: int
    accuracy: float


def _sweep(config, data, conditions, corrupt, k, assignment, parallel):
    assignment = assignment or folds_for(data, k or config.folds, config.seed)
    rows = []
    for cond in conditions:
        corrupted = corrupt(data, cond)
        cv = run_cv(config, corrupted, k, assignment, parallel)
        for f in cv.folds:
            rows.append(SweepRow(_fmt(cond), f.fold, f.metrics.accuracy))
        rows.append(SweepRow(_fmt(cond), -1, cv.mean_accuracy))
    return rows


def _fmt(cond):
    if isinstance(cond, float) and np.isposinf(cond):
        return "clean"
    return f"{cond:g}"


def sweep_snr(config: ExperimentConfig, data: SegmentSet, snrs, k=None, assignment=None, parallel=1):
    """Red noise at each SNR on all training and test segments, then a full CV run per point.

    Rows with ``fold = -1`` carry the mean over folds.
    """
    return _sweep(config, data, [float(s) for s in snrs],
                  lambda d, snr: add_red_noise(d, snr, config.seed), k, assignment, parallel)


def sweep_cutoff(config: ExperimentConfig, data: SegmentSet, cutoffs, k=None, assignment=None, parallel=1):
    return _sweep(config, data, [float(c) for c in cutoffs], truncate_band, k, assignment, parallel)


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "fold", "accuracy"])
        for r in rows:
            w.writerow([r.condition, r.fold, repr(r.accuracy)])
