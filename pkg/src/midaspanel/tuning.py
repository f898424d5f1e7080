"""Tuning-parameter selection over (lambda, gamma).

Cross-validation folds entities, never time points: each entity's whole
series sits in exactly one fold, so the held-out loss respects the panel
structure.  The information criteria (BIC, AIC, AICc) are evaluated on
full-sample regularization paths with panel degrees of freedom.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dictionaries import MidasDesign
from .solver import PenaltySpec, fit_path, lambda_max

__all__ = [
    "FoldPlan",
    "CriterionValue",
    "TuningReport",
    "cv_select",
    "ic_select",
    "tune_all",
    "DEFAULT_GAMMA_GRID",
]

DEFAULT_GAMMA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
CRITERIA = ("cv", "bic", "aic", "aicc")


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every entity to exactly one of K folds."""

    n_folds: int
    assignment: dict

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")
        folds = set(self.assignment.values())
        if not folds.issubset(set(range(self.n_folds))):
            raise ValueError("fold ids must lie in 0..K-1")
        counts = {f: 0 for f in range(self.n_folds)}
        for f in self.assignment.values():
            counts[f] += 1
        empty = [f for f, c in counts.items() if c == 0]
        if empty:
            raise ValueError(f"folds {empty} have no entities")

    @staticmethod
    def contiguous(entity_ids, n_folds: int) -> "FoldPlan":
        """Deterministic plan: consecutive blocks of entities per fold."""
        ids = list(entity_ids)
        if len(ids) < n_folds:
            raise ValueError("more folds than entities")
        blocks = np.array_split(np.arange(len(ids)), n_folds)
        assignment = {}
        for f, block in enumerate(blocks):
            for i in block:
                assignment[ids[i]] = f
        return FoldPlan(n_folds=n_folds, assignment=assignment)

    @staticmethod
    def random(entity_ids, n_folds: int, seed: int) -> "FoldPlan":
        ids = list(entity_ids)
        perm = np.random.default_rng(seed).permutation(len(ids))
        assignment = {ids[i]: f % n_folds for f, i in enumerate(perm)}
        return FoldPlan(n_folds=n_folds, assignment=assignment)

    def fold_of(self, entity_ids) -> np.ndarray:
        missing = [e for e in entity_ids if e not in self.assignment]
        if missing:
            raise ValueError(f"entities without a fold: {missing[:5]}")
        return np.array([self.assignment[e] for e in entity_ids], dtype=np.int64)


@dataclass
class CriterionValue:
    """One point of the tuning surface."""

    criterion: str
    lam: float
    gamma: float
    value: float
    df_hat: float = None
    sigma2_hat: float = None

    def as_row(self):
        return [
            self.criterion,
            format(self.lam, ".17g"),
            format(self.gamma, ".17g"),
            format(self.value, ".17g"),
            "" if self.df_hat is None else format(self.df_hat, ".17g"),
            "" if self.sigma2_hat is None else format(self.sigma2_hat, ".17g"),
        ]


@dataclass
class TuningReport:
    """Full (lambda, gamma) surface and the selected point."""

    criterion: str
    entries: list
    best: CriterionValue
    boundary: bool = False

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["criterion", "lambda", "gamma", "value", "df_hat", "sigma2_hat", "selected"]
            )
            for e in self.entries:
                writer.writerow(e.as_row() + [int(e is self.best)])

    def to_json(self) -> str:
        return json.dumps(
            {
                "criterion": self.criterion,
                "best": dataclasses.asdict(self.best),
                "boundary_warning": self.boundary,
                "surface": [dataclasses.asdict(e) for e in self.entries],
            },
            indent=2,
        )


# ---------------------------------------------------------------------------
# internals shared by cv_select / ic_select / tune_all


def _lambda_grid_for(design, spec, gamma, grid_size, lambda_min_ratio, standardize):
    probe = dataclasses.replace(spec, gamma=float(gamma), lam=0.0)
    lam_hi = lambda_max(design, spec=probe, standardize=standardize)
    if lam_hi <= 0.0:
        lam_hi = 1.0
    return np.geomspace(lam_hi, lam_hi * lambda_min_ratio, grid_size), probe


def _subdesign(design: MidasDesign, rows: np.ndarray) -> MidasDesign:
    return MidasDesign(
        matrix=design.matrix[rows],
        y=design.y[rows],
        entity_index=design.entity_index[rows],
        entity_ids=design.entity_ids,
        periods=design.periods[rows],
        groups=design.groups,
        dropped_rows=0,
    )


def _fold_intercepts(fres, spec, ent_test, resid, rule):
    """Intercepts for held-out entities that the fold-trained fit never saw.

    The fixed-effects rule sets each held-out entity's intercept to the
    mean of its own residuals given the trained slopes (its in-sample span
    only, so the rule stays time-safe inside nowcast pipelines); grouped
    fixed effects borrow the mean trained intercept of the entity's group
    and fall back to the residual rule when the whole group was held out.
    """
    out = np.empty(ent_test.shape[0])
    if rule == "zero":
        out[:] = 0.0
        return out
    if rule != "residual_mean":
        raise ValueError(f"unknown held-out intercept rule {rule!r}")
    if spec.intercept_mode == "grouped_fixed_effects":
        eg = np.asarray(spec.entity_groups)
        trained_alpha = np.asarray(fres.alpha)
        for e in np.unique(ent_test):
            peers = [
                i
                for i in range(len(trained_alpha))
                if i != e and eg[i] == eg[e] and trained_alpha[i] != 0.0
            ]
            val = (
                trained_alpha[peers].mean()
                if peers
                else resid[ent_test == e].mean()
            )
            out[ent_test == e] = val
        return out
    for e in np.unique(ent_test):
        out[ent_test == e] = resid[ent_test == e].mean()
    return out


def _cv_gamma(design, probe, lam_grid, plan, tol, max_iter, standardize,
              heldout_intercept):
    """Pooled held-out SSE per lambda for one gamma."""
    fold_of_row = plan.fold_of(design.entity_ids)[design.entity_index]
    sse = np.zeros(len(lam_grid))
    count = 0
    for f in range(plan.n_folds):
        test_rows = fold_of_row == f
        train_rows = ~test_rows
        if not train_rows.any():
            raise ValueError(f"fold {f} leaves an empty training set")
        if (probe.intercept_mode != "pooled"
                and len(np.unique(design.entity_index[train_rows])) < 2):
            raise ValueError(f"fold {f} leaves fewer than 2 training entities")
        sub = _subdesign(design, train_rows)
        path = fit_path(sub, spec=probe, lambda_grid=lam_grid, tol=tol,
                        max_iter=max_iter, standardize=standardize)
        x_test = design.matrix[test_rows]
        y_test = design.y[test_rows]
        ent_test = design.entity_index[test_rows]
        for li, fres in enumerate(path.fits):
            base = x_test @ fres.beta
            if probe.intercept_mode == "pooled":
                pred = base + fres.alpha
            else:
                pred = base + _fold_intercepts(
                    fres, probe, ent_test, y_test - base, heldout_intercept
                )
            sse[li] += float(((y_test - pred) ** 2).sum())
        count += int(test_rows.sum())
    return sse, count


def _ic_values(design, spec, path, criteria):
    """Criterion values for every fit on a full-sample path."""
    n = design.n_rows
    n_entities = len(np.unique(design.entity_index)) if n else 0
    rows = {c: [] for c in criteria}
    for fres in path.fits:
        resid = design.y - fres.predict(design.matrix, design.entity_index)
        rss = float(resid @ resid)
        df = float(np.count_nonzero(fres.beta))
        if spec.intercept_mode == "pooled":
            df += 1.0
        elif spec.intercept_mode == "fixed_effects":
            df += n_entities
        else:
            df += max(float(np.count_nonzero(np.asarray(fres.alpha))), 1.0)
        sigma2 = max(rss / max(n - df, 1.0), 1e-12)
        fit_term = rss / (n * sigma2)
        values = {
            "bic": fit_term + np.log(n) / n * df,
            "aic": fit_term + 2.0 / n * df,
            "aicc": (
                fit_term + 2.0 * df / (n - df - 1.0)
                if n - df - 1.0 > 0
                else np.inf
            ),
        }
        for c in criteria:
            rows[c].append(
                CriterionValue(
                    criterion=c, lam=fres.lam, gamma=fres.gamma,
                    value=float(values[c]), df_hat=df, sigma2_hat=sigma2,
                )
            )
    return rows


def _select(entries, criterion, grid_edges=None, warn_boundary=False):
    ordered = sorted(entries, key=lambda e: (e.gamma, -e.lam))
    best = min(ordered, key=lambda e: e.value)
    boundary = False
    if warn_boundary and grid_edges is not None:
        hi, lo = grid_edges[best.gamma]
        if best.lam in (hi, lo):
            boundary = True
            warnings.warn(
                f"{criterion} selected a boundary lambda ({best.lam:.3e}); "
                "consider widening the grid"
            )
    return TuningReport(criterion=criterion, entries=ordered, best=best,
                        boundary=boundary)


# ---------------------------------------------------------------------------
# public API


def cv_select(design: MidasDesign, spec: PenaltySpec, plan: FoldPlan, *,
              gammas=DEFAULT_GAMMA_GRID, grid_size: int = 50,
              lambda_min_ratio: float = 1e-3, tol: float = 1e-8,
              max_iter: int = 10000, standardize: bool = True,
              heldout_intercept: str = "residual_mean") -> TuningReport:
    """Blocked K-fold cross-validation over the (lambda, gamma) grid.

    For each point the model is fit on out-of-fold entities and scored on
    the held-out ones; the loss is the pooled mean squared error over all
    held-out observations.  One common lambda grid per gamma (anchored at
    the full-sample lambda_max) is shared across folds, and a selection at
    a grid edge raises a boundary warning.
    """
    entries = []
    grid_edges = {}
    for gamma in gammas:
        lam_grid, probe = _lambda_grid_for(
            design, spec, gamma, grid_size, lambda_min_ratio, standardize
        )
        grid_edges[float(gamma)] = (lam_grid[0], lam_grid[-1])
        sse, count = _cv_gamma(design, probe, lam_grid, plan, tol, max_iter,
                               standardize, heldout_intercept)
        entries.extend(
            CriterionValue("cv", float(lam), float(gamma), sse[li] / count)
            for li, lam in enumerate(lam_grid)
        )
    return _select(entries, "cv", grid_edges, warn_boundary=True)


def ic_select(design: MidasDesign, spec: PenaltySpec, criterion: str, *,
              gammas=DEFAULT_GAMMA_GRID, grid_size: int = 50,
              lambda_min_ratio: float = 1e-3, tol: float = 1e-8,
              max_iter: int = 10000, standardize: bool = True) -> TuningReport:
    """Information-criterion selection on full-sample paths.

    BIC, AIC, and AICc use panel degrees of freedom (support size plus the
    intercept count of the mode) with the plug-in variance
    RSS / (NT - df), floored at 1e-12.  AICc is set to +inf when the
    degrees of freedom exhaust the sample.
    """
    if criterion not in ("bic", "aic", "aicc"):
        raise ValueError("criterion must be bic, aic, or aicc")
    entries = []
    for gamma in gammas:
        lam_grid, probe = _lambda_grid_for(
            design, spec, gamma, grid_size, lambda_min_ratio, standardize
        )
        path = fit_path(design, spec=probe, lambda_grid=lam_grid, tol=tol,
                        max_iter=max_iter, standardize=standardize)
        entries.extend(_ic_values(design, probe, path, (criterion,))[criterion])
    return _select(entries, criterion)


def tune_all(design: MidasDesign, spec: PenaltySpec, plan: FoldPlan = None, *,
             gammas=DEFAULT_GAMMA_GRID, grid_size: int = 50,
             lambda_min_ratio: float = 1e-3, tol: float = 1e-8,
             max_iter: int = 10000, standardize: bool = True,
             heldout_intercept: str = "residual_mean", criteria=CRITERIA):
    """Every criterion from one shared set of path fits.

    Returns ``(reports, full_paths)``: ``reports`` maps criterion name to
    its :class:`TuningReport`; ``full_paths`` maps gamma to the
    full-sample :class:`RegPath`, so the fit at any selected point can be
    looked up without refitting.
    """
    want_cv = "cv" in criteria
    ic_wanted = [c for c in criteria if c != "cv"]
    if want_cv and plan is None:
        raise ValueError("cross-validation requires a FoldPlan")
    full_paths = {}
    lam_grids = {}
    probes = {}
    ic_entries = {c: [] for c in ic_wanted}
    cv_entries = []
    for gamma in gammas:
        lam_grid, probe = _lambda_grid_for(
            design, spec, gamma, grid_size, lambda_min_ratio, standardize
        )
        g = float(gamma)
        lam_grids[g], probes[g] = lam_grid, probe
        path = fit_path(design, spec=probe, lambda_grid=lam_grid, tol=tol,
                        max_iter=max_iter, standardize=standardize)
        full_paths[g] = path
        if ic_wanted:
            vals = _ic_values(design, probe, path, ic_wanted)
            for c in ic_wanted:
                ic_entries[c].extend(vals[c])
        if want_cv:
            sse, count = _cv_gamma(design, probe, lam_grid, plan, tol,
                                   max_iter, standardize, heldout_intercept)
            cv_entries.extend(
                CriterionValue("cv", float(lam), g, sse[li] / count)
                for li, lam in enumerate(lam_grid)
            )
    reports = {c: _select(ic_entries[c], c) for c in ic_wanted}
    if want_cv:
        grid_edges = {g: (grid[0], grid[-1]) for g, grid in lam_grids.items()}
        reports["cv"] = _select(cv_entries, "cv", grid_edges, warn_boundary=True)
    return reports, full_paths
