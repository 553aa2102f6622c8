"""Run the randomized finite-difference gradient suite and exit nonzero on any breach."""
import argparse
import sys

from adaptwave.gradsuite import run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--wavelet-trials", type=int, default=40)
    ap.add_argument("--layer-trials", type=int, default=20)
    ap.add_argument("--end-to-end-trials", type=int, default=1)
    args = ap.parse_args()
    entries = run_suite(args.seed, args.wavelet_trials, args.layer_trials, args.end_to_end_trials, log=print)
    ok = all(e.passed for e in entries)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
