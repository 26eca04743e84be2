"""Independent reference computations used to freeze expected values.

None of these share code with the package under test.
"""

import itertools
import math

import numpy as np


def chi2_max_by_enumeration(z, rho):
    """Exact sup of <p, z> over the chi-square ball by support enumeration.

    On the optimal support S either the chi-square constraint is slack (then
    z is constant on S and the uniform weights on S attain the value) or it
    is tight (then p_S = 1/k + t (z_S - mean) / ||z_S - mean||).  Trying both
    candidates for every nonempty S and keeping the best feasible one gives
    the global optimum.
    """
    z = [float(v) for v in z]
    n = len(z)
    best = -math.inf
    for k in range(1, n + 1):
        base = n * (n - k) / k
        for S in itertools.combinations(range(n), k):
            zs = [z[i] for i in S]
            m = sum(zs) / k
            if 0.5 * base <= rho + 1e-15:
                best = max(best, m)
            dev = [v - m for v in zs]
            norm = math.sqrt(sum(d * d for d in dev))
            t2 = (2.0 * rho - base) / (n * n)
            if norm == 0.0 or t2 < 0:
                continue
            t = math.sqrt(t2)
            if all(1.0 / k + t * d / norm >= -1e-15 for d in dev):
                best = max(best, m + t * norm)
    return best


def chi2_max_by_grid(z, rho, h=1e-3):
    """Dense-grid maximization over the simplex for n in {1, 2, 3}."""
    z = np.asarray(z, dtype=float)
    n = z.size
    if n == 1:
        return float(z[0])
    g = np.arange(0.0, 1.0 + h / 2, h)
    if n == 2:
        P = np.stack([g, 1.0 - g], axis=1)
    else:
        a, b = np.meshgrid(g, g, indexing="ij")
        mask = a + b <= 1.0 + 1e-12
        a, b = a[mask], b[mask]
        P = np.stack([a, b, np.clip(1.0 - a - b, 0.0, None)], axis=1)
    feas = 0.5 * np.sum((n * P - 1.0) ** 2, axis=1) <= rho
    return float(np.max(P[feas] @ z))


def central_diff(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g
