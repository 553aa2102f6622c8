"""Regenerate tests/data/frozen_oracles.json from the loop oracles and mpmath.

The package itself is never imported here, so the frozen numbers are an
independent record that the tests compare against.
"""
import json
import math
import sys
from pathlib import Path

import mpmath

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
import oracles  # noqa: E402

mpmath.mp.dps = 40


def mp_basis(kind, n, fc, fb, m):
    n, fc, fb, m = (mpmath.mpf(v) for v in (n, fc, fb, m))
    carrier = mpmath.expj(2 * mpmath.pi * fc * n)
    if kind == "Cmor":
        amp = (mpmath.pi * fb) ** -0.5 * mpmath.exp(-n ** 2 / fb)
    elif kind == "Shan":
        amp = mpmath.sqrt(fb) * mpmath.sincpi(fb * n)
    else:
        amp = mpmath.sqrt(fb) * (1 if m == 0 else abs(mpmath.sincpi(fb * n / m)) ** m)
    return amp * carrier


def fixed_frames(T, L):
    return [[math.sin(0.37 * (n + 1) * (t + 1)) + 0.25 * math.cos(1.3 * n - t) for n in range(L)]
            for t in range(T)]


def main():
    out = {}
    frame = [math.sin(0.7 * n) + 0.3 * math.cos(2.1 * n) + 0.05 * n for n in range(32)]
    out["dft"] = {"frame": frame, "magnitudes": oracles.dft_magnitudes(frame)}

    points = []
    for kind, n, fc, fb, m in [("Cmor", 0, 0.1, 1.0, 0.0), ("Cmor", 2, 0.2, 1.5, 0.0),
                               ("Shan", 0, 0.3, 1.0, 0.0), ("Shan", 3, 0.15, 0.7, 0.0),
                               ("Fbsp", 5, 0.25, 1.0, 0.0), ("Fbsp", 3, 0.1, 1.2, 0.5),
                               ("Fbsp", -4, 0.4, 0.9, 2.0), ("Fbsp", 7, 0.05, 1.1, 3.5)]:
        v = mp_basis(kind, n, fc, fb, m)
        points.append({"kind": kind, "n": n, "fc": fc, "fb": fb, "m": m,
                       "re": float(v.real), "im": float(v.imag)})
    out["basis"] = points

    derivs = []
    for kind, n, fc, fb, m in [("Fbsp", 3, 0.1, 1.2, 0.5), ("Fbsp", -2, 0.3, 0.8, 1.7),
                               ("Cmor", 2, 0.2, 1.5, 0.0), ("Shan", 3, 0.15, 0.7, 0.0)]:
        row = {"kind": kind, "n": n, "fc": fc, "fb": fb, "m": m}
        for name, idx in (("d_fc", 0), ("d_fb", 1), ("d_m", 2)):
            if name == "d_m" and kind != "Fbsp":
                continue

            def f(x, idx=idx):
                args = [fc, fb, m]
                args[idx] = x
                return mp_basis(kind, n, *args)
            d = mpmath.diff(f, mpmath.mpf([fc, fb, m][idx]))
            row[name] = [float(d.real), float(d.imag)]
        derivs.append(row)
    out["basis_derivatives"] = derivs

    xs = [1e-9, 1e-6, 1e-4, 1e-2, 0.1, 0.31, 0.9, 1.5, 2.5, 10.25]
    out["log_abs_sinc"] = {"x": xs, "value": [float(mpmath.log(abs(mpmath.sincpi(x)))) for x in xs]}

    frames = fixed_frames(3, 12)
    window = [0.5 - 0.5 * math.cos(2 * math.pi * n / 12) for n in range(12)]
    bank = {"fc": [0.05, 0.2, 0.37], "fb": [0.9, 1.3, 1.0], "m": [0.0, 0.7, 2.4]}
    direct = {}
    for kind in ("Cmor", "Shan", "Fbsp"):
        m = bank["m"] if kind == "Fbsp" else [0.0, 0.0, 0.0]
        X = oracles.direct_wavelet(frames, window, kind, bank["fc"], bank["fb"], m, 6)
        direct[kind] = {"re": [[v.real for v in row] for row in X], "im": [[v.imag for v in row] for row in X]}
    out["wavelet_direct"] = {"frames": frames, "window": window, "bank": bank, "center": 6, "X": direct}

    x = [[[[math.sin(i + 2 * c + 0.3 * r + 0.7 * s) for s in range(5)] for r in range(5)] for c in range(2)]
         for i in range(1)]
    w = [[[[math.cos(o + c + 0.5 * u - 0.2 * v) for v in range(3)] for u in range(3)] for c in range(2)]
         for o in range(3)]
    b = [0.1, -0.2, 0.3]
    out["conv2d"] = {"x": x, "w": w, "b": b, "stride": 1, "padding": 1,
                     "y": oracles.conv2d_naive(x, w, b, 1, 1),
                     "y_stride2": oracles.conv2d_naive(x, w, b, 2, 1)}

    grads = [[math.sin(t + i) * (1 + 0.5 * i) for i in range(4)] for t in range(10)]
    theta0 = [0.5, -1.0, 2.0, 0.0]
    out["adam"] = {"theta0": theta0, "grads": grads, "lr": 1e-2,
                   "path": oracles.adam_reference(theta0, grads, 1e-2)}

    logits = [[0.3, -1.2, 2.0], [1.0, 1.0, 1.0], [-0.5, 4.0, 0.1]]
    labels = [2, 0, 1]
    out["cross_entropy"] = {"logits": logits, "labels": labels,
                            "loss": oracles.cross_entropy_reference(logits, labels)}

    out["binomial_400_quarter"] = list(oracles.binomial_interval(400, 0.25))

    path = ROOT / "tests" / "data" / "frozen_oracles.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
