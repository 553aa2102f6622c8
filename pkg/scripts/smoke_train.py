"""Train the desk model on synthetic tones vs chirps and print the validation curve.

    python scripts/smoke_train.py --segments 100 --epochs 30
"""
import argparse
import time

import numpy as np

from adaptwave.train import desk_config, split_validation, train_run
from adaptwave.train.synthetic import tones_vs_chirps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--segments", type=int, default=100)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--snr", type=float, default=10.0)
    ap.add_argument("--basis", default="Fbsp", choices=["Cmor", "Shan", "Fbsp"])
    ap.add_argument("--feature", default="learnable-wavelet")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = tones_vs_chirps(args.segments, snr_db=args.snr, seed=args.seed)
    tr, va = split_validation(sorted(set(data.source_ids)), 0.2, args.seed)
    cfg = desk_config(seed=args.seed, epochs=args.epochs, basis=args.basis, feature=args.feature)
    t0 = time.time()

    def progress(r):
        print(f"epoch {r.epoch:3d}  loss {r.train_loss:.4f}  val acc {r.val_accuracy:.3f}  "
              f"({time.time() - t0:.0f}s)", flush=True)
    res = train_run(cfg, data.by_sources(tr), data.by_sources(va), progress=progress)
    print(f"best val acc {max(res.val_curve):.3f} at epoch {res.best.epoch}")
    if "frontend.fb" in res.final.params:
        print(f"max |f_b - 1| = {np.max(np.abs(res.final.params['frontend.fb'] - 1)):.3e}")


if __name__ == "__main__":
    main()
