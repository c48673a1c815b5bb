"""Independent oracles used by the tests.

These deliberately avoid the package's own algorithms: plain recursion where
the package uses dynamic programming, quadratic DFT where the package uses an
FFT, exact rational arithmetic where the package uses floats, and hand loops
where the package vectorizes.
"""

from __future__ import annotations

import cmath
from fractions import Fraction


def brute_edit_distance(a, b) -> int:
    """Memo-free recursive unit-cost edit distance, all three branches."""

    def rec(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        cost = 0 if a[i] == b[j] else 1
        return min(
            rec(i + 1, j + 1) + cost,
            rec(i + 1, j) + 1,
            rec(i, j + 1) + 1,
        )

    return rec(0, 0)


def brute_edit_distance_match_pruned(a, b) -> int:
    """Memo-free recursion using the unit-cost match lemma: when the leading
    characters are equal, some optimal alignment matches them, so the other
    two branches need not be explored. Cross-checked against the unpruned
    recursion in the acceptance suite."""
    la, lb = len(a), len(b)

    def rec(i: int, j: int) -> int:
        if i == la:
            return lb - j
        if j == lb:
            return la - i
        if a[i] == b[j]:
            return rec(i + 1, j + 1)
        return 1 + min(
            rec(i + 1, j + 1),
            rec(i + 1, j),
            rec(i, j + 1),
        )

    return rec(0, 0)


def naive_dft(values) -> list[complex]:
    """Direct O(n^2) discrete Fourier transform."""
    n = len(values)
    out = []
    for k in range(n):
        acc = 0j
        for t, v in enumerate(values):
            acc += v * cmath.exp(-2j * cmath.pi * k * t / n)
        out.append(acc)
    return out


def exact_stats(values):
    """sum/max/min/avg/median/variance via exact rationals (std left to the
    caller as sqrt of the exact variance)."""
    fracs = sorted(Fraction(v) for v in values)
    m = len(fracs)
    total = sum(fracs, Fraction(0))
    avg = total / m
    if m % 2:
        median = fracs[m // 2]
    else:
        median = (fracs[m // 2 - 1] + fracs[m // 2]) / 2
    var = sum((v - avg) ** 2 for v in fracs) / m
    return {
        "sum": total,
        "max": fracs[-1],
        "min": fracs[0],
        "avg": avg,
        "median": median,
        "var": var,
    }


def recount_confusion(actual, predicted):
    """(tp, tn, fp, fn) with member=0 as the positive class, by plain loop."""
    tp = tn = fp = fn = 0
    for a, p in zip(actual, predicted, strict=True):
        if p == 0 and a == 0:
            tp += 1
        elif p == 1 and a == 1:
            tn += 1
        elif p == 0 and a == 1:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn
