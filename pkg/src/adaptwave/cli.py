"""Command-line interface.

Every command reads one flat ``[run]`` section from an INI file (``--config``)
and accepts ``--key=value`` overrides for any key. Results land under
``output_dir``; a relative ``output_dir`` is resolved against
``$ADAPTWAVE_OUTPUT_ROOT`` when that variable is set.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .audio_io import Manifest, ManifestEntry, read_wav, resample, segment, write_wav
from .dsp.export import write_bank_csv, write_spectrogram, write_tensor
from .dsp.framing import frame_signal
from .dsp.transform import wavelet_forward
from .errors import (ConfigurationError, CorruptCheckpointError, DegenerateInputError, IncompatibleCheckpointError,
                     LabelError, NumericError, UnknownLabelError, UnsupportedCodecError, WavFormatError)
from .train import (ExperimentConfig, build_model, desk_config, evaluate, folds_for, load_checkpoint,
                    load_manifest_set, run_cv, run_fold, save_checkpoint, split_validation, sweep_cutoff,
                    sweep_snr, train_run, transfer_swap_head, write_sweep_csv)
from .train.checkpoint import restore

log = logging.getLogger("adaptwave")

ENV_OUTPUT_ROOT = "ADAPTWAVE_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SECTION = "run"
PROFILES = ("published", "desk")

DATA_ERRORS = (WavFormatError, UnsupportedCodecError, UnknownLabelError, LabelError, DegenerateInputError,
               IncompatibleCheckpointError, CorruptCheckpointError, FileNotFoundError, json.JSONDecodeError)


def _k(default, doc, published=False):
    return field(default=default, metadata={"doc": doc, "published": published})


@dataclass
class RunPaths:
    profile: str = _k("published", "base defaults: published (full-scale setup) | desk (small CPU setup)")
    manifest: str = _k("", "manifest JSON written by `prepare`")
    output_dir: str = _k("runs", "directory receiving every artifact of the command")
    checkpoint: str = _k("", "checkpoint file (eval, transfer, export-spec)")
    raw_dir: str = _k("", "directory of WAV files plus labels.json (prepare)")
    wav: str = _k("", "input WAV (export-spec)")
    test_fold: int = _k(0, "fold held out as the test set by train and transfer")
    snr_list: str = _k("clean,20,10,5,0,-5", "SNR points in dB for sweep-snr; 'clean' means no noise")
    cutoff_list: str = _k("8000,4000,2000,1000,500", "cutoff frequencies in Hz for sweep-cutoff")
    n_classes_target: int = _k(0, "head size for transfer; 0 means the number of target labels")
    parallel: int = _k(1, "worker processes for cv and sweeps")
    gradcheck_seed: int = _k(0, "seed of the randomized gradient suite")


@dataclass
class RunConfig:
    experiment: ExperimentConfig
    paths: RunPaths

    def to_dict(self):
        return {"experiment": self.experiment.to_dict(), **{f.name: getattr(self.paths, f.name)
                                                            for f in fields(RunPaths)}}


def _all_fields():
    return [(f, "experiment") for f in fields(ExperimentConfig)] + [(f, "paths") for f in fields(RunPaths)]


def _parse_value(key, raw, default):
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def _fmt_default(v):
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def load_run_config(path=None, overrides=None) -> RunConfig:
    """Profile defaults, then the INI file, then command-line overrides; unknown keys are rejected."""
    values = {}
    if path:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        if not cp.read(path):
            raise ConfigurationError(f"config file {path} not found")
        extra = [s for s in cp.sections() if s != SECTION]
        if extra:
            raise ConfigurationError(f"unknown config sections: {extra}; use [{SECTION}]")
        if cp.has_section(SECTION):
            values.update(cp.items(SECTION))
    values.update(overrides or {})
    known = {f.name: (f, where) for f, where in _all_fields()}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {unknown}")
    profile = values.get("profile", "published")
    if profile not in PROFILES:
        raise ConfigurationError(f"profile: expected one of {PROFILES}, got {profile!r}")
    base = desk_config() if profile == "desk" else ExperimentConfig()
    exp, run = base.to_dict(), {}
    for key, raw in values.items():
        f, where = known[key]
        default = getattr(base, key) if where == "experiment" else f.default
        parsed = _parse_value(key, raw, default)
        (exp if where == "experiment" else run)[key] = parsed
    try:
        experiment = ExperimentConfig.from_dict(exp)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    paths = RunPaths(**run)
    if paths.parallel < 1:
        raise ConfigurationError("parallel: must be >= 1")
    return RunConfig(experiment, paths)


def output_dir(paths: RunPaths) -> Path:
    out = Path(paths.output_dir)
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_run_metadata(out: Path, command: str, rc: RunConfig, extra=None):
    meta = {
        "command": command,
        "config": rc.to_dict(),
        "config_hash": rc.experiment.digest(),
        "seed": rc.experiment.seed,
        "versions": {"adaptwave": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    meta.update(extra or {})
    (out / "run_metadata.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def _parse_list(key, text):
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("clean", "inf"):
            out.append(float("inf"))
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigurationError(f"{key}: bad entry {tok!r}") from None
    if not out:
        raise ConfigurationError(f"{key}: empty list")
    return out


def _require(paths: RunPaths, key):
    value = getattr(paths, key)
    if not value:
        raise ConfigurationError(f"{key}: required by this command")
    return value


def _load_data(rc: RunConfig, cfg=None):
    cfg = cfg or rc.experiment
    manifest = Manifest.load(_require(rc.paths, "manifest"))
    data = load_manifest_set(manifest, cfg.sample_rate, cfg.segment_s, cfg.overlap_s)
    if len(data) == 0:
        raise DegenerateInputError("manifest yields no segments")
    predefined = {e.source_id: e.fold for e in manifest.entries if e.fold is not None}
    return data, predefined or None


def _write_metrics(out: Path, metrics):
    (out / "metrics.json").write_text(metrics.to_json())
    metrics.write_confusion_csv(out / "confusion.csv")


def _write_history(out: Path, result):
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_accuracy"])
        for r in result.history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_accuracy)])
    history = result.bank_history()
    if history:
        write_bank_csv(out / "bank_trajectory.csv", history)


# --------------------------------------------------------------------------- commands

def cmd_prepare(rc: RunConfig, out: Path):
    """Resample and segment every labelled WAV of ``raw_dir``; write segments/ and manifest.json."""
    cfg = rc.experiment
    raw = Path(_require(rc.paths, "raw_dir"))
    if not raw.is_dir():
        raise FileNotFoundError(f"raw_dir {raw} is not a directory")
    sidecar = raw / "labels.json"
    labels = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    wavs = sorted(p for p in raw.iterdir() if p.suffix.lower() == ".wav")
    if not wavs:
        log.warning("no WAV files in %s; writing an empty manifest", raw)
    seg_dir = out / "segments"
    seg_dir.mkdir(exist_ok=True)
    entries, skipped = [], []
    for p in wavs:
        spec = labels.get(p.name, labels.get(p.stem))
        if spec is None:
            skipped.append({"file": p.name, "reason": "no label in labels.json"})
            continue
        label, fold = (spec.get("label"), spec.get("fold")) if isinstance(spec, dict) else (spec, None)
        try:
            clip = read_wav(p)
        except (WavFormatError, UnsupportedCodecError, ValueError) as exc:
            skipped.append({"file": p.name, "reason": str(exc)})
            continue
        clip = resample(clip, cfg.sample_rate)
        segs = segment(clip, cfg.segment_s, cfg.overlap_s)
        if not segs:
            skipped.append({"file": p.name, "reason": f"shorter than {cfg.segment_s} s"})
        for s in segs:
            name = f"{p.stem}__{s.index:04d}.wav"
            write_wav(seg_dir / name, s.clip.samples, s.clip.sample_rate)
            entries.append(ManifestEntry(f"segments/{name}", p.stem, str(label), fold))
    for s in skipped:
        log.warning("skipped %s: %s", s["file"], s["reason"])
    Manifest(entries).save(out / "manifest.json")
    (out / "skip_report.json").write_text(json.dumps(skipped, indent=1) + "\n")
    log.info("%d segments from %d files, %d skipped", len(entries), len(wavs), len(skipped))
    return {"n_segments": len(entries), "n_skipped": len(skipped)}


def cmd_train(rc: RunConfig, out: Path):
    cfg = rc.experiment
    data, predefined = _load_data(rc)
    assignment = folds_for(data, cfg.folds, cfg.seed, predefined)
    if not 0 <= rc.paths.test_fold < assignment.k:
        raise ConfigurationError(f"test_fold: must lie in [0, {assignment.k})")
    label_space = sorted(set(data.labels))
    fr = run_fold(cfg, data, assignment, rc.paths.test_fold, label_space, keep_result=True)
    res = fr.result
    save_checkpoint(out / "initial.agn", res.initial)
    save_checkpoint(out / "best.agn", res.best)
    save_checkpoint(out / "final.agn", res.final)
    _write_metrics(out, fr.metrics)
    _write_history(out, res)
    (out / "split.json").write_text(json.dumps({"train": fr.train_sources, "val": fr.val_sources,
                                                "test": fr.test_sources}, indent=1) + "\n")
    log.info("test accuracy %.4f (best epoch %d)", fr.metrics.accuracy, res.best.epoch)
    return {"accuracy": fr.metrics.accuracy}


def cmd_cv(rc: RunConfig, out: Path):
    cfg = rc.experiment
    data, predefined = _load_data(rc)
    assignment = folds_for(data, cfg.folds, cfg.seed, predefined)
    cv = run_cv(cfg, data, cfg.folds, assignment, rc.paths.parallel)
    for f in cv.folds:
        sub = out / f"fold_{f.fold}"
        sub.mkdir(exist_ok=True)
        _write_metrics(sub, f.metrics)
    summary = {"fold_accuracy": cv.accuracies, "mean_accuracy": cv.mean_accuracy, "audit": cv.audit(),
               "fold_warnings": assignment.warnings}
    (out / "cv.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    log.info("fold accuracies %s, mean %.4f", ["%.4f" % a for a in cv.accuracies], cv.mean_accuracy)
    return {"mean_accuracy": cv.mean_accuracy}


def cmd_eval(rc: RunConfig, out: Path):
    ckpt = load_checkpoint(_require(rc.paths, "checkpoint"))
    data, _ = _load_data(rc, ckpt.config)
    metrics = evaluate(ckpt, data)
    _write_metrics(out, metrics)
    log.info("accuracy %.4f over %d segments", metrics.accuracy, len(data))
    return {"accuracy": metrics.accuracy}


def _sweep(rc: RunConfig, out: Path, key, runner):
    cfg = rc.experiment
    points = _parse_list(key, getattr(rc.paths, key))
    data, predefined = _load_data(rc)
    assignment = folds_for(data, cfg.folds, cfg.seed, predefined)
    rows = runner(cfg, data, points, cfg.folds, assignment, rc.paths.parallel)
    write_sweep_csv(out / "sweep.csv", rows)
    for r in rows:
        if r.fold == -1:
            log.info("%s: mean accuracy %.4f", r.condition, r.accuracy)
    return {"points": len(points)}


def cmd_sweep_snr(rc: RunConfig, out: Path):
    return _sweep(rc, out, "snr_list", sweep_snr)


def cmd_sweep_cutoff(rc: RunConfig, out: Path):
    return _sweep(rc, out, "cutoff_list", sweep_cutoff)


_ARCH_KEYS = ("feature", "basis", "sample_rate", "segment_s", "overlap_s", "frame_ms", "hop_ms", "bank_size",
              "center", "window", "init_fb", "init_m", "n_mels", "preset", "stage_channels", "blocks_per_stage",
              "expansion", "stem_channels", "attention", "gate_sigmoid")


def cmd_transfer(rc: RunConfig, out: Path):
    """Swap the head of a pretrained checkpoint and fine-tune on the target manifest.

    Architecture and front-end keys come from the checkpoint; optimisation
    keys (lr, epochs, batch size, seed, ...) from the run configuration.
    """
    src = load_checkpoint(_require(rc.paths, "checkpoint"))
    arch = {k: v for k, v in src.config.to_dict().items() if k in _ARCH_KEYS}
    cfg = rc.experiment.replace(**arch)
    data, predefined = _load_data(rc, cfg)
    label_space = sorted(set(data.labels))
    n = rc.paths.n_classes_target or len(label_space)
    if n != len(label_space):
        raise ConfigurationError(f"n_classes_target: {n} but the target manifest has {len(label_space)} labels")
    init = transfer_swap_head(src, n, label_space, seed=cfg.seed)
    init.config = cfg
    assignment = folds_for(data, cfg.folds, cfg.seed, predefined)
    test_src = assignment.sources_in(rc.paths.test_fold)
    rest = [s for s, f in assignment.assignment.items() if f != rc.paths.test_fold]
    train_src, val_src = split_validation(rest, cfg.val_fraction, cfg.seed + 1000 * (rc.paths.test_fold + 1))
    res = train_run(cfg, data.by_sources(train_src), data.by_sources(val_src), label_space, init=init)
    metrics = evaluate(res.best, data.by_sources(test_src))
    metrics.loss_curve = res.loss_curve
    save_checkpoint(out / "initial.agn", init)
    save_checkpoint(out / "best.agn", res.best)
    save_checkpoint(out / "final.agn", res.final)
    _write_metrics(out, metrics)
    _write_history(out, res)
    log.info("target test accuracy %.4f", metrics.accuracy)
    return {"accuracy": metrics.accuracy}


def cmd_export_spec(rc: RunConfig, out: Path):
    """Front-end features of one WAV (whole file, no segmentation) plus the bank as CSV."""
    path = _require(rc.paths, "wav")
    if rc.paths.checkpoint:
        ckpt = load_checkpoint(rc.paths.checkpoint)
        model, cfg = restore(ckpt), ckpt.config
    else:
        cfg = rc.experiment
        model = build_model(cfg, 2)
    clip = read_wav(path)
    clip = resample(clip, cfg.sample_rate)
    fe = model.frontend
    frames = frame_signal(clip.samples, fe.frame_spec)
    if frames.shape[0] == 0:
        raise DegenerateInputError(f"{path}: shorter than one frame")
    bank = model.bank()
    if bank is not None:
        spec = wavelet_forward(frames, fe.window, bank, fe.center, frame_spec=fe.frame_spec)
        write_spectrogram(out / "spectrogram.wsp", spec, {"source": Path(path).name, "feature": cfg.feature})
        write_bank_csv(out / "bank.csv", bank)
        feats = spec.log_mag
    else:
        feats = model.features(clip.samples[None]).data[0, 0]
        write_tensor(out / "spectrogram.wsp", feats)
    np.savetxt(out / "spectrogram.csv", feats, delimiter=",", fmt="%.10g")
    log.info("features %s written to %s", feats.shape, out)
    return {"shape": list(feats.shape)}


def cmd_gradcheck(rc: RunConfig, out: Path):
    from .gradsuite import run_suite

    entries = run_suite(seed=rc.paths.gradcheck_seed, log=print)
    report = [{"name": e.name, "trials": e.trials, "max_rel_err": e.max_rel_err, "tolerance": e.tolerance,
               "checked": e.checked, "unresolved": e.unresolved,
               "passed": e.passed} for e in entries]
    (out / "gradcheck.json").write_text(json.dumps(report, indent=1) + "\n")
    worst = max(e.max_rel_err for e in entries)
    ok = all(e.passed for e in entries)
    print(f"gradient suite: {'PASS' if ok else 'FAIL'} (max rel err {worst:.3e})")
    if not ok:
        raise NumericError("gradient suite tolerance breached")
    return {"max_rel_err": worst}


COMMANDS = {
    "prepare": (cmd_prepare, "scan raw_dir, resample, segment, write manifest.json"),
    "train": (cmd_train, "train on all folds but test_fold, evaluate on test_fold"),
    "cv": (cmd_cv, "k-fold cross-validation grouped by recording"),
    "eval": (cmd_eval, "score a checkpoint on every segment of a manifest"),
    "sweep-snr": (cmd_sweep_snr, "cross-validation under red noise at each SNR point"),
    "sweep-cutoff": (cmd_sweep_cutoff, "cross-validation under band truncation at each cutoff"),
    "transfer": (cmd_transfer, "swap the classifier head of a checkpoint and fine-tune"),
    "export-spec": (cmd_export_spec, "write the front-end spectrogram of one WAV and the bank CSV"),
    "gradcheck": (cmd_gradcheck, "randomized finite-difference audit of every gradient"),
}


def _key_help():
    lines = ["configuration keys ([run] section or --key=value; * = published value):"]
    for f, where in _all_fields():
        mark = "*" if f.metadata.get("published") else " "
        lines.append(f"  {mark} {f.name} = {_fmt_default(f.default)}    {f.metadata.get('doc', '')}")
    lines.append("  the desk profile changes: " + ", ".join(
        f"{k}={_fmt_default(v)}" for k, v in desk_config().to_dict().items()
        if v != ExperimentConfig().to_dict()[k]))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="adaptwave", description=__doc__, epilog=_key_help(), formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"adaptwave {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text, formatter_class=fmt)
        p.add_argument("--config", help="INI file with a [run] section")
        p.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors")
        group = p.add_argument_group("configuration keys (* = published value)")
        for f, _ in _all_fields():
            mark = " *" if f.metadata.get("published") else ""
            flags = [f"--{f.name}"] + ([f"--{f.name.replace('_', '-')}"] if "_" in f.name else [])
            group.add_argument(*flags, dest=f"key_{f.name}", metavar="V", default=argparse.SUPPRESS,
                               help=f"{f.metadata.get('doc', '')} (default {_fmt_default(f.default)}){mark}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("key_")}
    fn, _ = COMMANDS[args.command]
    try:
        rc = load_run_config(args.config, overrides)
        out = output_dir(rc.paths)
        extra = fn(rc, out) or {}
        write_run_metadata(out, args.command, rc, {"result": extra})
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("numeric error: %s", exc)
        return EXIT_NUMERIC
    except DATA_ERRORS as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
