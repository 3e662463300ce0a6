"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test; tails are summed term by term
in arbitrary precision and occupancy is simulated with the stdlib RNG.
"""

from __future__ import annotations

import math
import random

import mpmath

mpmath.mp.dps = 40


def poisson_pmf(k: int, lam) -> mpmath.mpf:
    return mpmath.exp(k * mpmath.log(lam) - lam - mpmath.loggamma(k + 1))


def poisson_upper(t: int, lam) -> mpmath.mpf:
    """P(N >= t) by summing pmf terms until they are negligible."""
    total = mpmath.mpf(0)
    k = max(t, 0)
    while True:
        term = poisson_pmf(k, lam)
        total += term
        if k > lam and term < total * mpmath.mpf(10) ** -30:
            return total
        k += 1


def poisson_lower(t: int, lam) -> mpmath.mpf:
    """P(N < t) by direct summation."""
    return mpmath.fsum(poisson_pmf(k, lam) for k in range(0, max(t, 0)))


def best_threshold(units: int, mean_lo: float, mean_hi: float, alpha: float, beta: float):
    """Scan every integer threshold; return the first meeting both error bounds."""
    lam_lo, lam_hi = units * mean_lo, units * mean_hi
    for t in range(int(lam_lo), int(lam_hi) + 1):
        e1 = poisson_upper(t, lam_lo)
        if e1 > alpha:
            continue
        e2 = poisson_lower(t, lam_hi)
        return (t, float(e1), float(e2)) if e2 <= beta else None
    return None


def min_units(mean_lo: float, mean_hi: float, alpha: float, beta: float, limit: int = 50):
    for m in range(1, limit + 1):
        if best_threshold(m, mean_lo, mean_hi, alpha, beta) is not None:
            return m
    raise RuntimeError("no feasible unit count below limit")


def crowded_bin_fraction(n_items_mean: float, n_bins: int, trials: int, seed: int) -> float:
    """Simulate Poisson(n_items_mean) balls thrown into n_bins; fraction of bins with >= 2."""
    rng = random.Random(seed)
    crowded = 0
    for _ in range(trials):
        # Poisson draw by inversion (mean is small enough for this loop)
        n, p, u = 0, math.exp(-n_items_mean), rng.random()
        cdf = p
        while u > cdf:
            n += 1
            p *= n_items_mean / n
            cdf += p
        counts = {}
        for _ in range(n):
            b = rng.randrange(n_bins)
            counts[b] = counts.get(b, 0) + 1
        crowded += sum(1 for c in counts.values() if c >= 2)
    return crowded / (trials * n_bins)
