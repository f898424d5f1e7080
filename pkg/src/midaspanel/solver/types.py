"""Penalty specifications and fit results for the panel solvers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PenaltySpec", "FitResult", "RegPath"]

_PENALTIES = ("sg_lasso", "elastic_net")
_MODES = ("pooled", "fixed_effects", "grouped_fixed_effects")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty level, mixing weight, group structure, and intercept mode.

    ``groups`` partitions the penalized design columns into contiguous
    ``(start, stop)`` spans.  ``gamma`` mixes the l1 and group (sg-LASSO)
    or l1 and ridge (elastic net) parts.  ``entity_groups`` maps entity
    index to an intercept group and is required for the grouped
    fixed-effects mode; its group penalty uses weight sqrt(group size)
    and shares ``lam``.  The pooled intercept sits in its own singleton
    penalized group unless ``penalize_intercept`` is cleared.
    """

    lam: float
    gamma: float
    groups: tuple = None
    penalty_kind: str = "sg_lasso"
    intercept_mode: str = "pooled"
    entity_groups: tuple = None
    penalize_intercept: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.penalty_kind not in _PENALTIES:
            raise ValueError(f"penalty_kind must be one of {_PENALTIES}")
        if self.intercept_mode not in _MODES:
            raise ValueError(f"intercept_mode must be one of {_MODES}")
        if self.groups is not None:
            object.__setattr__(
                self,
                "groups",
                tuple((int(a), int(b)) for a, b in self.groups),
            )
        if self.entity_groups is not None:
            object.__setattr__(
                self, "entity_groups", tuple(int(g) for g in self.entity_groups)
            )
        if self.intercept_mode == "grouped_fixed_effects" and self.entity_groups is None:
            raise ValueError("grouped_fixed_effects requires entity_groups")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(
            lam=lam,
            gamma=self.gamma,
            groups=self.groups,
            penalty_kind=self.penalty_kind,
            intercept_mode=self.intercept_mode,
            entity_groups=self.entity_groups,
            penalize_intercept=self.penalize_intercept,
        )

    def validate_groups(self, n_columns: int) -> tuple:
        """Check the spans partition exactly the column set 0..n_columns-1."""
        if self.groups is None:
            raise ValueError("penalty spec has no group structure")
        covered = np.zeros(n_columns, dtype=int)
        for start, stop in self.groups:
            if not (0 <= start < stop <= n_columns):
                raise ValueError(f"group span ({start}, {stop}) out of bounds")
            covered[start:stop] += 1
        if (covered != 1).any():
            raise ValueError("groups must partition the penalized columns exactly")
        return self.groups


@dataclass
class FitResult:
    """Solver output: intercepts, slopes, support, and diagnostics.

    ``objective`` is the value of the solved problem; when the design was
    standardized internally it refers to the standardized coordinates
    (``beta`` itself is always reported on the original scale).
    """

    alpha: object
    beta: np.ndarray
    support: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt: float = np.nan
    lam: float = np.nan
    gamma: float = np.nan
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def predict(self, x: np.ndarray, entity_index=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        base = x @ self.beta
        if np.ndim(self.alpha) == 0:
            return base + float(self.alpha)
        if entity_index is None:
            raise ValueError("entity_index needed to predict with per-entity intercepts")
        return base + np.asarray(self.alpha)[np.asarray(entity_index, dtype=int)]

    def to_json(self) -> str:
        payload = {
            "alpha": (
                float(self.alpha)
                if np.ndim(self.alpha) == 0
                else [float(a) for a in np.asarray(self.alpha)]
            ),
            "beta": [float(b) for b in self.beta],
            "support": [int(i) for i in self.support],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "kkt": float(self.kkt),
            "lambda": float(self.lam),
            "gamma": float(self.gamma),
        }
        return json.dumps(payload, indent=2)

    @staticmethod
    def from_json(text: str) -> "FitResult":
        d = json.loads(text)
        alpha = d["alpha"]
        alpha = float(alpha) if np.ndim(alpha) == 0 else np.asarray(alpha, dtype=float)
        return FitResult(
            alpha=alpha,
            beta=np.asarray(d["beta"], dtype=float),
            support=np.asarray(d["support"], dtype=np.int64),
            objective=d["objective"],
            iterations=d["iterations"],
            converged=d["converged"],
            kkt=d.get("kkt", np.nan),
            lam=d.get("lambda", np.nan),
            gamma=d.get("gamma", np.nan),
        )


@dataclass
class RegPath:
    """Warm-started fits along a decreasing lambda grid."""

    lambda_grid: np.ndarray
    fits: list

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float)
        if len(grid) >= 2 and not (np.diff(grid) < 0).all():
            raise ValueError("lambda grid must be strictly decreasing")
        self.lambda_grid = grid

    def __len__(self) -> int:
        return len(self.fits)
