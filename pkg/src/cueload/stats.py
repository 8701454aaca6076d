"""Rank-based k-group tests: Kruskal-Wallis with eta-squared, Dunn post-hoc.

All tests use average ranks for ties and the standard tie correction. The
chi-square survival function is computed locally from the regularized upper
incomplete gamma so that test oracles (scipy, quadrature) stay independent
of this code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, ValidationError


@dataclass(frozen=True)
class KruskalResult:
    cue: str
    H: float
    p: float
    eta_squared: float          # (H - k + 1) / (n - k); negative when H < k - 1
    group_sizes: tuple[int, ...]


@dataclass(frozen=True)
class DunnResult:
    cue: str
    pair: tuple[str, str]
    z: float
    p_raw: float
    p_adj: float                # min(1, m * p_raw), m = C(k, 2)


def rank_with_ties(values) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise ValidationError("cannot rank an empty sequence")
    order = np.argsort(a, kind="mergesort")
    sorted_vals = a[order]
    ranks = np.empty(a.size, dtype=float)
    i = 0
    n = a.size
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _tie_sum(pooled: np.ndarray) -> float:
    """Sum of t^3 - t over runs of tied values."""
    sorted_vals = np.sort(pooled)
    total = 0.0
    i = 0
    n = sorted_vals.size
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        t = j - i + 1
        total += t * t * t - t
        i = j + 1
    return total


def _check_groups(groups) -> list[np.ndarray]:
    if len(groups) < 2:
        raise ValidationError(f"need at least 2 groups, got {len(groups)}")
    arrays = []
    for idx, g in enumerate(groups):
        a = np.asarray(list(g), dtype=float)
        if a.size == 0:
            raise ValidationError(f"group {idx} is empty")
        arrays.append(a)
    n = sum(a.size for a in arrays)
    if n < len(arrays) + 1:
        raise ValidationError(f"need at least k+1 observations, got {n}")
    return arrays


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if x < 0:
        raise ValidationError(f"chi2_sf requires x >= 0, got {x}")
    if df < 1:
        raise ValidationError(f"chi2_sf requires df >= 1, got {df}")
    return _gammainc_upper(df / 2.0, x / 2.0)


def _gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if x <= 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_contfrac(a, x)


def _gamma_series(a: float, x: float) -> float:
    # power series for P(a, x), converges fast for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a: float, x: float) -> float:
    # modified Lentz continued fraction for Q(a, x), converges for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def normal_sf(z: float) -> float:
    """Upper-tail probability of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def kruskal_wallis(groups, cue: str = "") -> KruskalResult:
    """Tie-corrected Kruskal-Wallis H, chi-square p, and eta-squared."""
    arrays = _check_groups(groups)
    k = len(arrays)
    pooled = np.concatenate(arrays)
    n = pooled.size
    ranks = rank_with_ties(pooled)

    h_raw = 0.0
    offset = 0
    for a in arrays:
        r_sum = float(np.sum(ranks[offset : offset + a.size]))
        h_raw += r_sum * r_sum / a.size
        offset += a.size
    h_raw = 12.0 / (n * (n + 1)) * h_raw - 3.0 * (n + 1)

    correction = 1.0 - _tie_sum(pooled) / (n**3 - n)
    if correction == 0.0:
        raise DegenerateDataError("all observations identical: H undefined")
    h = h_raw / correction
    p = chi2_sf(h, k - 1)
    eta_squared = (h - k + 1) / (n - k)
    return KruskalResult(cue, h, p, eta_squared, tuple(a.size for a in arrays))


def dunn_posthoc(groups, group_names=None, cue: str = "") -> list[DunnResult]:
    """Pairwise rank-mean z tests after Kruskal-Wallis, Bonferroni-adjusted.

    Two-sided p-values; the adjustment multiplies by the number of pairs
    C(k, 2), which is 6 for the four understanding states.
    """
    arrays = _check_groups(groups)
    k = len(arrays)
    if group_names is None:
        group_names = [f"g{i}" for i in range(k)]
    if len(group_names) != k:
        raise ValidationError("group_names length must match group count")

    pooled = np.concatenate(arrays)
    n = pooled.size
    ranks = rank_with_ties(pooled)
    mean_ranks = []
    offset = 0
    for a in arrays:
        mean_ranks.append(float(np.mean(ranks[offset : offset + a.size])))
        offset += a.size

    var_term = n * (n + 1) / 12.0 - _tie_sum(pooled) / (12.0 * (n - 1))
    if var_term <= 0.0:
        raise DegenerateDataError("all observations identical: Dunn z undefined")

    m = k * (k - 1) // 2
    results = []
    for i in range(k):
        for j in range(i + 1, k):
            se = math.sqrt(var_term * (1.0 / arrays[i].size + 1.0 / arrays[j].size))
            z = (mean_ranks[i] - mean_ranks[j]) / se
            p_raw = 2.0 * normal_sf(abs(z))
            results.append(
                DunnResult(
                    cue=cue,
                    pair=(group_names[i], group_names[j]),
                    z=z,
                    p_raw=p_raw,
                    p_adj=min(1.0, m * p_raw),
                )
            )
    return results


def boxplot_stats(values) -> dict:
    """Quartiles, Tukey whiskers and outliers for one group of observations."""
    a = np.sort(np.asarray(list(values), dtype=float))
    if a.size == 0:
        raise ValidationError("no observations")
    q1, med, q3 = (float(np.percentile(a, q)) for q in (25, 50, 75))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = a[(a >= lo_fence) & (a <= hi_fence)]
    outliers = a[(a < lo_fence) | (a > hi_fence)]
    return {
        "q1": q1,
        "median": med,
        "q3": q3,
        "whisker_lo": float(inside[0]),
        "whisker_hi": float(inside[-1]),
        "outliers": [float(x) for x in outliers],
        "n": int(a.size),
    }
