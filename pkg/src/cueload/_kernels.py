"""Split-search kernels for tree training: numba-jitted with a numpy twin.

Backend is chosen at import time from the CUELOAD_BACKEND environment
variable: "numba" (require numba), "numpy" (force the fallback) or "auto"
(default: numba when importable). Both backends perform the same float64
operations in the same order, so they return bit-identical results; the
equality is covered by tests and benchmarks/bench_kernels.py compares their
speed.

Kernel contract (shared by both backends):

* inputs are value-ascending arrays; ``values`` float64, ``labels`` int64
  class ids (gini) or ``targets`` float64 regression targets (sse);
* a split position ``pos`` puts rows [0, pos) left and [pos, n) right, is
  only legal between distinct values, and must leave >= min_leaf rows on
  each side;
* returns ``(pos, score)`` minimizing the score, first minimum winning;
  ``(-1, inf)`` when no legal split exists.
"""

from __future__ import annotations

import os

import numpy as np


def _gini_best_split_loop(values, labels, n_classes, min_leaf):
    n = values.shape[0]
    total = np.zeros(n_classes)
    for i in range(n):
        total[labels[i]] += 1.0
    counts = np.zeros(n_classes)
    best_pos = -1
    best_score = np.inf
    nf = float(n)
    for i in range(n - 1):
        counts[labels[i]] += 1.0
        pos = i + 1
        if values[i + 1] == values[i]:
            continue
        if pos < min_leaf or pos > n - min_leaf:
            continue
        nl = float(pos)
        nr = float(n - pos)
        sl = 0.0
        sr = 0.0
        for c in range(n_classes):
            pl = counts[c] / nl
            sl += pl * pl
            pr = (total[c] - counts[c]) / nr
            sr += pr * pr
        score = (nl * (1.0 - sl) + nr * (1.0 - sr)) / nf
        if score < best_score:
            best_score = score
            best_pos = pos
    return best_pos, best_score


def _sse_best_split_loop(values, targets, min_leaf):
    n = values.shape[0]
    tot_sum = 0.0
    tot_sq = 0.0
    for i in range(n):
        tot_sum += targets[i]
        tot_sq += targets[i] * targets[i]
    run_sum = 0.0
    run_sq = 0.0
    best_pos = -1
    best_score = np.inf
    for i in range(n - 1):
        run_sum += targets[i]
        run_sq += targets[i] * targets[i]
        pos = i + 1
        if values[i + 1] == values[i]:
            continue
        if pos < min_leaf or pos > n - min_leaf:
            continue
        nl = float(pos)
        nr = float(n - pos)
        sse_l = run_sq - (run_sum * run_sum) / nl
        rs = tot_sum - run_sum
        sse_r = (tot_sq - run_sq) - (rs * rs) / nr
        score = sse_l + sse_r
        if score < best_score:
            best_score = score
            best_pos = pos
    return best_pos, best_score


def _gini_best_split_numpy(values, labels, n_classes, min_leaf):
    n = values.shape[0]
    if n < 2:
        return -1, np.inf
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    cum = np.cumsum(onehot, axis=0)          # exact: integer-valued float64
    total = cum[-1]
    pos = np.arange(1, n)
    nl = pos.astype(np.float64)
    nr = (n - pos).astype(np.float64)
    sl = np.zeros(n - 1)
    sr = np.zeros(n - 1)
    for c in range(n_classes):               # class-order accumulation, as in the loop kernel
        pl = cum[:-1, c] / nl
        sl += pl * pl
        pr = (total[c] - cum[:-1, c]) / nr
        sr += pr * pr
    score = (nl * (1.0 - sl) + nr * (1.0 - sr)) / float(n)
    legal = (values[1:] != values[:-1]) & (pos >= min_leaf) & (pos <= n - min_leaf)
    score = np.where(legal, score, np.inf)
    best = int(np.argmin(score))             # first minimum
    if not np.isfinite(score[best]):
        return -1, np.inf
    return best + 1, float(score[best])


def _sse_best_split_numpy(values, targets, min_leaf):
    n = values.shape[0]
    if n < 2:
        return -1, np.inf
    run_sum = np.cumsum(targets)
    run_sq = np.cumsum(targets * targets)
    tot_sum = run_sum[-1]
    tot_sq = run_sq[-1]
    pos = np.arange(1, n)
    nl = pos.astype(np.float64)
    nr = (n - pos).astype(np.float64)
    sse_l = run_sq[:-1] - (run_sum[:-1] * run_sum[:-1]) / nl
    rs = tot_sum - run_sum[:-1]
    sse_r = (tot_sq - run_sq[:-1]) - (rs * rs) / nr
    score = sse_l + sse_r
    legal = (values[1:] != values[:-1]) & (pos >= min_leaf) & (pos <= n - min_leaf)
    score = np.where(legal, score, np.inf)
    best = int(np.argmin(score))
    if not np.isfinite(score[best]):
        return -1, np.inf
    return best + 1, float(score[best])


def _select_backend():
    requested = os.environ.get("CUELOAD_BACKEND", "auto").lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"CUELOAD_BACKEND must be auto, numba or numpy, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy", _gini_best_split_numpy, _sse_best_split_numpy
    try:
        from numba import njit
    except ImportError:
        if requested == "numba":
            raise
        return "numpy", _gini_best_split_numpy, _sse_best_split_numpy
    gini = njit(cache=True)(_gini_best_split_loop)
    sse = njit(cache=True)(_sse_best_split_loop)
    return "numba", gini, sse


BACKEND, gini_best_split, sse_best_split = _select_backend()


def available_backends():
    """Backend name -> (gini kernel, sse kernel), for benchmarks and tests."""
    backends = {"numpy": (_gini_best_split_numpy, _sse_best_split_numpy)}
    try:
        from numba import njit
    except ImportError:
        return backends
    backends["numba"] = (
        njit(cache=True)(_gini_best_split_loop),
        njit(cache=True)(_sse_best_split_loop),
    )
    return backends
