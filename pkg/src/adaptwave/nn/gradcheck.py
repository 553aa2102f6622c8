from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    worst: list = field(default_factory=list)  # (name, index, analytic, numeric, rel_err)
    passed: bool = True
    n_skipped: int = 0
    n_unresolved: int = 0

    def __str__(self):
        head = f"max rel err {self.max_rel_err:.3e} over {self.n_checked} coordinates"
        if self.n_skipped:
            head += f" ({self.n_skipped} skipped: probe interval crosses a kink)"
        if self.n_unresolved:
            head += f" ({self.n_unresolved} skipped: difference quotient not resolved)"
        lines = [head] + [f"  {n}{list(i)}: analytic={a:.6e} numeric={d:.6e} rel={r:.2e}"
                          for n, i, a, d, r in self.worst]
        return "\n".join(lines)


def rel_error(analytic, numeric, floor=1e-10):
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def _same_branch(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def fd_uncertainty(loss_fn, arr, idx, h, fp, fm):
    """Error estimate of the central difference at step ``h``, from the function values alone.

    The quotient at ``2h`` carries four times the O(h^2) truncation term and
    independent rounding, so ``|D(2h) - D(h)| / 3`` tracks both error sources.
    """
    old = arr[idx]
    arr[idx] = old + 2 * h
    fp2 = loss_fn()
    arr[idx] = old - 2 * h
    fm2 = loss_fn()
    arr[idx] = old
    d1 = (fp - fm) / (2 * h)
    d2 = (fp2 - fm2) / (4 * h)
    return abs(d2 - d1) / 3


def grad_check(loss_fn, params: dict, analytic: dict, h=1e-5, tolerance=1e-4,
               n_samples=None, seed=0, floor=1e-10, n_worst=5, branches=None,
               resolve=None) -> GradCheckReport:
    """Compare ``analytic`` gradients with central differences of ``loss_fn()``.

    ``params`` maps names to arrays that ``loss_fn`` reads; they are perturbed
    in place and restored. With ``n_samples`` set, that many coordinates are
    drawn uniformly across all parameters; otherwise every coordinate is
    checked. Relative error is ``|a - n| / (|a| + |n|)`` with ``floor`` on the
    denominator.

    For piecewise-smooth closures pass ``branches``, a callable returning the
    branch signature (list of arrays) of the most recent ``loss_fn`` call.
    Coordinates whose ``+h`` or ``-h`` probe lands on a different branch than
    the base point are not differentiable over the probe interval; they are
    skipped and replaced by further draws.

    With ``resolve`` set, coordinates whose difference quotient is itself
    uncertain (see :func:`fd_uncertainty`) by more than ``resolve`` relative
    to ``max(|numeric|, floor)`` are skipped the same way. The screen never
    looks at the analytic value, so it cannot hide a wrong gradient.
    """
    coords = [(name, idx) for name, arr in params.items() for idx in np.ndindex(arr.shape)]
    if n_samples is not None and n_samples < len(coords):
        order = np.random.default_rng(seed).permutation(len(coords))
        coords = [coords[i] for i in order]
    else:
        n_samples = len(coords)
    base = None
    if branches is not None:
        loss_fn()
        base = branches()
    rows, skipped, unresolved = [], 0, 0
    for name, idx in coords:
        if len(rows) >= n_samples:
            break
        arr = params[name]
        old = arr[idx]
        arr[idx] = old + h
        fp = loss_fn()
        bp = branches() if base is not None else None
        arr[idx] = old - h
        fm = loss_fn()
        bm = branches() if base is not None else None
        arr[idx] = old
        if base is not None and not (_same_branch(base, bp) and _same_branch(base, bm)):
            skipped += 1
            continue
        num = (fp - fm) / (2 * h)
        if resolve is not None and fd_uncertainty(loss_fn, arr, idx, h, fp, fm) > resolve * max(abs(num), floor):
            unresolved += 1
            continue
        a = float(analytic[name][idx])
        rows.append((name, idx, a, num, rel_error(a, num, floor)))
    rows.sort(key=lambda r: -r[4])
    worst = max((r[4] for r in rows), default=0.0)
    return GradCheckReport(worst, len(rows), rows[:n_worst], worst < tolerance, skipped, unresolved)
