"""Exact proximal operator of the sparse-group penalty."""

from __future__ import annotations

import numpy as np

__all__ = ["prox_sg", "soft_threshold", "group_soft_threshold"]


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def group_soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm <= threshold:
        return np.zeros_like(v)
    return (1.0 - threshold / norm) * v


def _normalize_groups(groups, size: int) -> list:
    out = []
    seen = np.zeros(size, dtype=int)
    for g in groups:
        if isinstance(g, tuple) and len(g) == 2 and all(np.ndim(x) == 0 for x in g):
            idx = np.arange(int(g[0]), int(g[1]))
        else:
            idx = np.asarray(g, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty group in partition")
        if idx.min() < 0 or idx.max() >= size:
            raise ValueError("group index out of bounds")
        seen[idx] += 1
        out.append(idx)
    if (seen != 1).any():
        raise ValueError("groups must partition the vector indices exactly")
    return out


def prox_sg(v, groups, step: float, lam: float, gamma: float) -> np.ndarray:
    """argmin_u (1/2)||u - v||^2 + step * lam * (gamma |u|_1 + (1-gamma) ||u||_{2,1}).

    Computed exactly: coordinate soft-threshold at ``step * lam * gamma``
    followed by a per-group soft-threshold at ``step * lam * (1-gamma)``.
    Groups may be given as (start, stop) spans or explicit index arrays
    and must partition the vector.
    """
    v = np.asarray(v, dtype=float)
    if step <= 0:
        raise ValueError("step must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    idx_groups = _normalize_groups(groups, v.size)
    out = soft_threshold(v, step * lam * gamma)
    t2 = step * lam * (1.0 - gamma)
    if t2 > 0:
        for idx in idx_groups:
            out[idx] = group_soft_threshold(out[idx], t2)
    return out
