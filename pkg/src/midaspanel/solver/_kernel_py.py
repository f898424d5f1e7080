"""NumPy fallback for the solver's inner sweeps.

Mirrors ``_kernel.pyx`` exactly: same update order, same block-prox math.
Selected at import time when the compiled extension is unavailable (or
when MIDASPANEL_BACKEND=python is set).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def sg_sweep(X, r, beta, gstart, gstop, glip, thr1, thr2, active, work):
    """One proximal block-coordinate pass over the listed groups.

    For group G the update is the exact composite prox of the sparse-group
    penalty applied to a gradient step with the block Lipschitz constant
    ``glip[g]`` (the spectral norm of X_G' X_G).  ``r`` and ``beta`` are
    updated in place; returns the largest coefficient change.
    """
    maxd = 0.0
    for g in active:
        gs, ge = gstart[g], gstop[g]
        if glip[g] <= 0.0:
            continue
        block = X[:, gs:ge]
        v = beta[gs:ge] + (block.T @ r) / glip[g]
        u = np.sign(v) * np.maximum(np.abs(v) - thr1[g], 0.0)
        if thr2[g] > 0.0:
            norm = np.sqrt(np.dot(u, u))
            if norm <= thr2[g]:
                u = np.zeros_like(u)
            else:
                u *= 1.0 - thr2[g] / norm
        delta = u - beta[gs:ge]
        dmax = np.abs(delta).max() if delta.size else 0.0
        if dmax > 0.0:
            r -= block @ delta
            beta[gs:ge] = u
        if dmax > maxd:
            maxd = dmax
    return maxd


def en_sweep(X, r, beta, colnorm2, active, thr_l1, ridge, inv_n):
    """One exact coordinate-descent pass of the elastic net.

    Coordinate update: soft(x_j'r/n + (||x_j||^2/n) b_j, thr_l1) divided by
    (||x_j||^2/n + ridge).  The residual is refreshed after every
    coordinate, matching the compiled kernel.
    """
    maxd = 0.0
    for j in active:
        cn = colnorm2[j]
        if cn <= 0.0:
            continue
        z = np.dot(X[:, j], r) * inv_n + cn * beta[j]
        az = abs(z) - thr_l1
        bnew = 0.0 if az <= 0.0 else np.sign(z) * az / (cn + ridge)
        delta = bnew - beta[j]
        if delta != 0.0:
            r -= delta * X[:, j]
            beta[j] = bnew
        ad = abs(delta)
        if ad > maxd:
            maxd = ad
    return maxd
