from .checkpoint import (Checkpoint, capture, load_checkpoint, restore, save_checkpoint,
                         transfer_swap_head)
from .config import ExperimentConfig, desk_config
from .cv import (CVResult, FoldResult, folds_for, run_cv, run_fold, split_validation, sweep_cutoff,
                 sweep_snr, write_sweep_csv)
from .data import SegmentSet, add_red_noise, load_manifest_set, truncate_band
from .loop import Metrics, TrainResult, compute_metrics, evaluate, evaluate_model, train_run
from .model import AcousticModel, build_model, predict_logits

__all__ = [
    "AcousticModel", "CVResult", "Checkpoint", "FoldResult", "ExperimentConfig", "Metrics", "SegmentSet", "TrainResult",
    "add_red_noise", "build_model", "capture", "compute_metrics", "desk_config", "evaluate",
    "evaluate_model", "folds_for", "load_checkpoint", "load_manifest_set", "predict_logits", "restore",
    "run_cv", "run_fold", "save_checkpoint", "split_validation", "sweep_cutoff", "sweep_snr", "train_run", "transfer_swap_head",
    "truncate_band", "write_sweep_csv",
]
