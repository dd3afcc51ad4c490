"""Independent brute-force references used by the tests.

Nothing here imports the engine; every quantity is recomputed from its
definition with plain Python loops.
"""

import math
from fractions import Fraction


def split_gain(gl, hl, gr, hr, lam, gamma):
    g, h = gl + gr, hl + hr
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam)) - gamma


def best_root_split(X, g, h, lam=1.0, gamma=0.0, min_child_weight=0.0):
    """Exhaustive search over every feature and every midpoint between distinct values.

    Returns ``(gain, feature, threshold)``; ties keep the lowest feature, then
    the lowest threshold.  ``None`` when no candidate exists.
    """
    n, d = len(X), len(X[0])
    best = None
    for f in range(d):
        values = sorted({row[f] for row in X})
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            if thr <= a:
                thr = b
            gl = sum(g[i] for i in range(n) if X[i][f] < thr)
            hl = sum(h[i] for i in range(n) if X[i][f] < thr)
            gr = sum(g[i] for i in range(n) if X[i][f] >= thr)
            hr = sum(h[i] for i in range(n) if X[i][f] >= thr)
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gain = split_gain(gl, hl, gr, hr, lam, gamma)
            if best is None or gain > best[0]:
                best = (gain, f, thr)
    return best


def leaf_objective(w, g, h, lam):
    return sum(gi * w + hi * w * w / 2 for gi, hi in zip(g, h)) + lam * w * w / 2


def grid_minimize(fn, lo=-1000, hi=1000, points=201, tol=Fraction(1, 10**12)):
    """Minimize a unimodal scalar function by repeatedly refining a uniform grid.

    Runs in exact rational arithmetic, so flat regions near the minimum
    do not drown in rounding.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    while hi - lo > tol:
        step = (hi - lo) / (points - 1)
        grid = [lo + k * step for k in range(points)]
        k = min(range(points), key=lambda j: fn(grid[j]))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    return (lo + hi) / 2


def rmse(y, yhat):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(y, yhat)) / len(y))


def mae(y, yhat):
    return sum(abs(a - b) for a, b in zip(y, yhat)) / len(y)
