"""Train briefly and write the per-epoch wavelet bank (f_c, f_b, m) to CSV."""
import argparse
from pathlib import Path

from adaptwave.dsp.export import write_bank_csv
from adaptwave.train import desk_config, split_validation, train_run
from adaptwave.train.synthetic import tones_vs_chirps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path, help="CSV path")
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--basis", default="Fbsp", choices=["Cmor", "Shan", "Fbsp"])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = tones_vs_chirps(60, seed=args.seed)
    tr, va = split_validation(sorted(set(data.source_ids)), 0.2, args.seed)
    res = train_run(desk_config(epochs=args.epochs, basis=args.basis, seed=args.seed),
                    data.by_sources(tr), data.by_sources(va))
    history = res.bank_history()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_bank_csv(args.out, history)
    print(f"{len(history)} epochs x {len(history[0]['fc'])} bins -> {args.out}")


if __name__ == "__main__":
    main()
