"""Lag-polynomial dictionaries and MIDAS design construction.

A dictionary maps the ``k_max`` high-frequency lag coefficients of one
covariate onto a small number ``L`` of basis coefficients.  The design
matrix for the regression stacks, per covariate, the lag matrix projected
through the dictionary and scaled by ``1/k_max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dictionary",
    "WeightCurve",
    "legendre_dictionary",
    "unrestricted_dictionary",
    "beta_dictionary",
    "beta_weights",
    "Group",
    "MidasDesign",
    "project_design",
]


@dataclass(frozen=True)
class Dictionary:
    """Basis matrix W of shape (k_max, L) with full column rank."""

    kind: str
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("dictionary weights must be a 2-d matrix")
        k_max, n_cols = w.shape
        if n_cols > k_max:
            raise ValueError(
                f"dictionary has {n_cols} columns but only {k_max} lags; "
                "rank cannot exceed the number of lags"
            )
        if np.linalg.matrix_rank(w) < n_cols:
            raise ValueError("dictionary weight matrix is column-rank deficient")
        object.__setattr__(self, "weights", w)

    @property
    def k_max(self) -> int:
        return self.weights.shape[0]

    @property
    def n_coefficients(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class WeightCurve:
    """Nonnegative lag weights normalised to sum to one."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("weight curve must be a vector")
        if np.any(v < 0):
            raise ValueError("weight curve must be nonnegative")
        if abs(v.sum() - 1.0) > 1e-12:
            raise ValueError("weight curve must sum to one")
        object.__setattr__(self, "values", v)

    @property
    def k_max(self) -> int:
        return self.values.shape[0]


def _shifted_legendre(grid: np.ndarray, n_cols: int) -> np.ndarray:
    """Evaluate shifted Legendre polynomials P_0..P_{n_cols-1} on [0, 1]."""
    t = 2.0 * grid - 1.0
    out = np.empty((grid.size, n_cols))
    out[:, 0] = 1.0
    if n_cols > 1:
        out[:, 1] = t
    for m in range(1, n_cols - 1):
        out[:, m + 1] = ((2 * m + 1) * t * out[:, m] - m * out[:, m - 1]) / (m + 1)
    return out


def legendre_dictionary(k_max: int, degree: int, orthonormal: bool = False) -> Dictionary:
    """Shifted Legendre dictionary on the lag grid ``j / (k_max - 1)``.

    ``degree`` is the number of basis functions, i.e. polynomials
    P_0..P_{degree-1}.  With ``orthonormal=True`` the columns are
    re-orthonormalised in the discrete (grid) inner product, which spans
    the same column space but is exactly orthogonal on the grid.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if degree > k_max:
        raise ValueError(
            f"degree {degree} exceeds k_max {k_max}: dictionary would be rank deficient"
        )
    if k_max == 1:
        grid = np.zeros(1)
    else:
        grid = np.arange(k_max) / (k_max - 1)
    w = _shifted_legendre(grid, degree)
    if not orthonormal:
        return Dictionary(kind=f"legendre({degree})", weights=w)
    q, r = np.linalg.qr(w)
    q = q * np.sign(np.diag(r))  # keep leading column nonnegative
    return Dictionary(kind=f"legendre_ortho({degree})", weights=q)


def unrestricted_dictionary(k_max: int) -> Dictionary:
    """Identity dictionary: one free coefficient per lag (UMIDAS)."""
    return Dictionary(kind="unrestricted", weights=np.eye(k_max))


def beta_weights(k_max: int, a: float, b: float) -> WeightCurve:
    """Beta-density lag weights on the interior grid ``(j + 1) / (k_max + 1)``.

    The density values ``s^(a-1) (1-s)^(b-1)`` are normalised to sum to
    one.  The interior grid keeps the endpoints out so any ``a, b > 0``
    is safe.
    """
    if a <= 0 or b <= 0:
        raise ValueError("beta weight parameters must be positive")
    s = (np.arange(k_max) + 1.0) / (k_max + 1.0)
    w = s ** (a - 1.0) * (1.0 - s) ** (b - 1.0)
    return WeightCurve(values=w / w.sum())


def beta_dictionary(k_max: int, a: float, b: float) -> Dictionary:
    """Single-column dictionary carrying a fixed beta-density weight shape."""
    curve = beta_weights(k_max, a, b)
    return Dictionary(kind=f"beta_density({a},{b})", weights=curve.values[:, None])


@dataclass(frozen=True)
class Group:
    """Contiguous block of design columns penalised together."""

    name: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass
class MidasDesign:
    """Stacked regression design after dictionary projection.

    Rows are (entity, period) pairs; ``entity_index`` maps each row to
    its entity.  ``groups`` partitions all columns: one group per
    covariate (its dictionary columns) followed by one singleton group
    per autoregressive lag of the target.
    """

    matrix: np.ndarray
    y: np.ndarray
    entity_index: np.ndarray
    entity_ids: list
    periods: np.ndarray
    groups: list = field(default_factory=list)
    dropped_rows: int = 0

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    def group_spans(self) -> tuple:
        return tuple((g.start, g.stop) for g in self.groups)

    def column_to_group(self) -> np.ndarray:
        out = np.empty(self.n_columns, dtype=np.int64)
        for gi, g in enumerate(self.groups):
            out[g.start : g.stop] = gi
        return out


def project_design(windows, dictionary, drop_missing: bool = True) -> MidasDesign:
    """Project a window stack through a dictionary into a stacked design.

    ``dictionary`` is either a single :class:`Dictionary` applied to every
    covariate or a list with one entry per covariate.  Each covariate block
    is ``(1/k_max) * lags @ W``; autoregressive target lags, when present,
    are appended as raw columns, one singleton group each.

    Rows whose target or autoregressive lags are missing are dropped when
    ``drop_missing`` is set (the count is recorded); prediction-time
    designs keep them.
    """
    n_cov = len(windows.lags)
    if isinstance(dictionary, Dictionary):
        dictionaries = [dictionary] * n_cov
    else:
        dictionaries = list(dictionary)
        if len(dictionaries) != n_cov:
            raise ValueError(
                f"got {len(dictionaries)} dictionaries for {n_cov} covariates"
            )

    blocks = []
    groups = []
    col = 0
    for k in range(n_cov):
        lags = windows.lags[k]
        w = dictionaries[k].weights
        if lags.shape[1] != w.shape[0]:
            raise ValueError(
                f"covariate {windows.covariate_names[k]!r}: window length "
                f"{lags.shape[1]} does not match dictionary rows {w.shape[0]}"
            )
        blocks.append((lags @ w) / w.shape[0])
        n_cols = w.shape[1]
        groups.append(Group(windows.covariate_names[k], col, col + n_cols))
        col += n_cols
    for lag in range(windows.ar_lags):
        blocks.append(windows.ar[:, lag : lag + 1])
        groups.append(Group(f"ar{lag + 1}", col, col + 1))
        col += 1

    matrix = np.hstack(blocks) if blocks else np.empty((len(windows.y), 0))
    y = windows.y.copy()
    keep = np.ones(len(y), dtype=bool)
    if drop_missing:
        keep &= ~windows.y_missing
        if windows.ar_lags:
            keep &= ~np.isnan(windows.ar).any(axis=1)
    dropped = int((~keep).sum())
    return MidasDesign(
        matrix=matrix[keep],
        y=y[keep],
        entity_index=windows.entity_index[keep].astype(np.int64),
        entity_ids=list(windows.entity_ids),
        periods=windows.periods[keep],
        groups=groups,
        dropped_rows=dropped,
    )
