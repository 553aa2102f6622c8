import json
import subprocess
import sys

import numpy as np
import pytest

from adaptwave import cli
from adaptwave.audio_io import Manifest, write_wav
from adaptwave.gradsuite import SuiteEntry
from adaptwave.train.checkpoint import load_checkpoint
from adaptwave.train.synthetic import tones_vs_chirps, write_raw_dir

SMALL = ["--profile=desk", "--segment_s=0.5", "--overlap_s=0.25", "--bank_size=16", "--stage_channels=4,4,8,8",
         "--stem_channels=4", "--epochs=2", "--batch_size=8", "--folds=2", "-q"]


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    raw = write_raw_dir(tones_vs_chirps(12, sample_rate=4000, duration_s=0.5, seed=4), base / "raw")
    out = base / "prep"
    assert run("prepare", *SMALL, f"--raw_dir={raw}", f"--output_dir={out}") == 0
    return base, out / "manifest.json"


def test_prepare_empty_dir(tmp_path, capsys):
    (tmp_path / "raw").mkdir()
    assert run("prepare", f"--raw_dir={tmp_path / 'raw'}", f"--output_dir={tmp_path / 'o'}") == 0
    assert Manifest.load(tmp_path / "o" / "manifest.json").entries == []
    assert "no WAV files" in capsys.readouterr().err


def test_prepare_sixty_second_clip(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    fs = 16000
    write_wav(raw / "ship.wav", 0.1 * np.sin(np.arange(60 * fs) * 0.3), fs)
    (raw / "labels.json").write_text(json.dumps({"ship": "Dredger"}))
    assert run("prepare", f"--raw_dir={raw}", f"--output_dir={tmp_path / 'o'}", "-q") == 0
    m = Manifest.load(tmp_path / "o" / "manifest.json")
    assert len(m.entries) == 3
    assert len(list((tmp_path / "o" / "segments").glob("*.wav"))) == 3
    assert {e.label for e in m.entries} == {"Dredger"}


def test_prepare_is_idempotent_and_reports_skips(tmp_path):
    raw = write_raw_dir(tones_vs_chirps(4, sample_rate=4000, duration_s=0.5, seed=1), tmp_path / "raw")
    (raw / "broken.wav").write_bytes(b"RIFFjunk")
    labels = json.loads((raw / "labels.json").read_text())
    labels["broken"] = "tone"
    (raw / "labels.json").write_text(json.dumps(labels))
    args = ["prepare", *SMALL, f"--raw_dir={raw}"]
    assert run(*args, f"--output_dir={tmp_path / 'a'}") == 0
    assert run(*args, f"--output_dir={tmp_path / 'b'}") == 0
    a = (tmp_path / "a" / "manifest.json").read_bytes()
    assert a == (tmp_path / "b" / "manifest.json").read_bytes()
    skipped = json.loads((tmp_path / "a" / "skip_report.json").read_text())
    assert [s["file"] for s in skipped] == ["broken.wav"]


def test_config_errors_exit_2(tmp_path, capsys):
    assert run("cv", "--epochs=abc", f"--output_dir={tmp_path}") == 2
    assert "epochs" in capsys.readouterr().err
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\nnot_a_key = 3\n")
    assert run("cv", f"--config={ini}", f"--output_dir={tmp_path}") == 2
    assert "not_a_key" in capsys.readouterr().err
    assert run("train", "--profile=laptop") == 2
    assert run("train", f"--output_dir={tmp_path}") == 2  # manifest missing


def test_ini_then_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nprofile = desk\nepochs = 7\nlr = 0.01\n")
    rc = cli.load_run_config(ini, {"epochs": "3"})
    assert rc.experiment.epochs == 3
    assert rc.experiment.lr == 0.01
    assert rc.experiment.sample_rate == 4000


def test_data_errors_exit_3(tmp_path, prepared):
    _, manifest = prepared
    bad = tmp_path / "bad.agn"
    bad.write_bytes(b"not a checkpoint")
    assert run("eval", f"--checkpoint={bad}", f"--manifest={manifest}", f"--output_dir={tmp_path}") == 3
    assert run("cv", f"--manifest={tmp_path / 'missing.json'}", f"--output_dir={tmp_path}") == 3


def test_numeric_error_exit_4(tmp_path, prepared):
    _, manifest = prepared
    with np.errstate(all="ignore"):
        code = run("train", *SMALL, "--feature=mel", "--n_mels=20", "--lr=1e300", f"--manifest={manifest}",
                   f"--output_dir={tmp_path}")
    assert code == 4


def test_train_lr_zero_keeps_tensors(tmp_path, prepared):
    _, manifest = prepared
    assert run("train", *SMALL, "--lr=0", f"--manifest={manifest}", f"--output_dir={tmp_path}") == 0
    first, last = load_checkpoint(tmp_path / "initial.agn"), load_checkpoint(tmp_path / "final.agn")
    assert first.params.keys() == last.params.keys()
    for k in first.params:
        np.testing.assert_array_equal(first.params[k], last.params[k])
    meta = json.loads((tmp_path / "run_metadata.json").read_text())
    assert {"config_hash", "seed", "versions", "timestamp"} <= set(meta)


def test_train_is_deterministic(tmp_path, prepared):
    _, manifest = prepared
    for d in ("a", "b"):
        assert run("train", *SMALL, f"--manifest={manifest}", f"--output_dir={tmp_path / d}") == 0
    for name in ("metrics.json", "history.csv", "bank_trajectory.csv", "best.agn"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cutoff_at_nyquist_matches_train(tmp_path, prepared):
    _, manifest = prepared
    common = [*SMALL, f"--manifest={manifest}"]
    assert run("train", *common, "--test_fold=0", f"--output_dir={tmp_path / 't'}") == 0
    assert run("sweep-cutoff", *common, "--cutoff_list=2000", f"--output_dir={tmp_path / 's'}") == 0
    acc = json.loads((tmp_path / "t" / "metrics.json").read_text())["accuracy"]
    rows = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    fold0 = [r.split(",") for r in rows[1:] if r.split(",")[1] == "0"]
    assert float(fold0[0][2]) == acc


def test_cv_and_sweep_snr_outputs(tmp_path, prepared):
    _, manifest = prepared
    common = [*SMALL, f"--manifest={manifest}"]
    assert run("cv", *common, f"--output_dir={tmp_path / 'cv'}") == 0
    summary = json.loads((tmp_path / "cv" / "cv.json").read_text())
    assert summary["mean_accuracy"] == pytest.approx(np.mean(summary["fold_accuracy"]), abs=1e-12)
    assert (tmp_path / "cv" / "fold_1" / "confusion.csv").exists()
    assert run("sweep-snr", *common, "--snr_list=clean,0", f"--output_dir={tmp_path / 'snr'}") == 0
    rows = (tmp_path / "snr" / "sweep.csv").read_text().splitlines()
    assert rows[0] == "condition,fold,accuracy"
    assert len(rows) == 1 + 2 * 3


def test_transfer_and_export(tmp_path, prepared):
    _, manifest = prepared
    common = [*SMALL, f"--manifest={manifest}"]
    assert run("train", *common, f"--output_dir={tmp_path / 'src'}") == 0
    ckpt = tmp_path / "src" / "best.agn"
    assert run("transfer", *common, f"--checkpoint={ckpt}", f"--output_dir={tmp_path / 'ft'}") == 0
    assert (tmp_path / "ft" / "metrics.json").exists()
    assert run("transfer", *common, f"--checkpoint={ckpt}", "--n_classes_target=5",
               f"--output_dir={tmp_path / 'x'}") == 2

    wav = tmp_path / "x.wav"
    write_wav(wav, np.sin(2 * np.pi * 1000 * np.arange(8000) / 4000), 4000)
    assert run("export-spec", f"--checkpoint={ckpt}", f"--wav={wav}", f"--output_dir={tmp_path / 'ex'}", "-q") == 0
    ex = tmp_path / "ex"
    assert (ex / "spectrogram.wsp").read_bytes()[:4] == b"WSP1"
    csv_rows = (ex / "spectrogram.csv").read_text().splitlines()
    assert len(csv_rows) == 16  # one row per bank bin
    assert (ex / "bank.csv").exists() and (ex / "run_metadata.json").exists()


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT_ROOT, str(tmp_path))
    (tmp_path / "raw").mkdir()
    assert run("prepare", f"--raw_dir={tmp_path / 'raw'}", "--output_dir=rel", "-q") == 0
    assert (tmp_path / "rel" / "manifest.json").exists()


def test_gradcheck_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setattr("adaptwave.gradsuite.run_suite",
                        lambda seed, log: [SuiteEntry("wavelet_Cmor", 3, 1e-9, 1e-4)])
    assert run("gradcheck", f"--output_dir={tmp_path / 'ok'}", "-q") == 0
    report = json.loads((tmp_path / "ok" / "gradcheck.json").read_text())
    assert report[0]["passed"]
    monkeypatch.setattr("adaptwave.gradsuite.run_suite",
                        lambda seed, log: [SuiteEntry("conv", 3, 0.5, 1e-4)])
    assert run("gradcheck", f"--output_dir={tmp_path / 'bad'}", "-q") == 4


def test_help_lists_every_key():
    text = subprocess.run([sys.executable, "-m", "adaptwave", "train", "--help"], capture_output=True,
                          text=True, check=True).stdout
    top = cli.build_parser().format_help()
    for f, _ in cli._all_fields():
        assert f"--{f.name}" in text
        assert f" {f.name} = " in top
    assert "* = published value" in text
    assert "(default 0.0005) *" in " ".join(text.split())
