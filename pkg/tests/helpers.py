"""Shared test utilities: independent oracles and table builders."""

import numpy as np

import volfit as vf


def brute_force_moving_average(values, window):
    """Per-window left-to-right mean; the independent slow-path oracle.

    Missing values contribute a zero pad (adding 0.0 never changes a sum)
    and are excluded from the divisor, mirroring the skip-and-renormalize
    convention with plain sequential arithmetic.
    """
    n = len(values)
    k = (window - 1) // 2
    filled = [0.0 if v != v else float(v) for v in values]
    present = [0 if v != v else 1 for v in values]
    out = []
    for i in range(n):
        lo = max(0, i - k)
        hi = min(n, i + k + 1)
        c = sum(present[lo:hi])
        out.append(float("nan") if c == 0 else sum(filled[lo:hi]) / c)
    return np.array(out)


def make_table(x, y, target):
    """FeatureTable with 1-based provenance, for hand-built fixtures."""
    x = np.asarray(x, dtype=float)
    return vf.FeatureTable(x, y, target, np.arange(1, x.size + 1))


def planted_table(terms, beta, n, rng, noise=0.0, y_range=(0.5, 2.0)):
    """Rows whose targets follow the surface defined by (terms, beta)."""
    x = np.linspace(1.0 / n, 1.0, n)
    y = rng.uniform(*y_range, n)
    shell = make_table(x, y, np.zeros(n))
    target = vf.design_matrix(shell, terms) @ np.asarray(beta, dtype=float)
    if noise:
        target = target + rng.normal(0.0, noise, n)
    return make_table(x, y, target)
