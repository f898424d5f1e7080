"""Panel sparse-group LASSO and elastic-net solvers.

The solver runs proximal block-coordinate descent over the penalty groups
with an exact composite prox per block, alternating with closed-form
intercept block steps (pooled scalar, per-entity fixed effects, or
group-penalized fixed effects).  A glmnet-style working set keeps sweeps
on the active groups only; convergence is certified by the KKT residual,
which is also exposed standalone so any returned fit can be audited.

Penalized columns are standardized to unit standard deviation internally
and coefficients mapped back to the original scale; ``standardize=False``
solves the problem as given.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from ..dictionaries import MidasDesign
from .backend import kernel
from .types import FitResult, PenaltySpec, RegPath

__all__ = ["fit", "fit_elastic_net", "fit_path", "lambda_max", "kkt_residual"]

_GAMMA_FLOOR_EN = 1e-3  # lambda_max convention for the ridge end of the elastic net


def _as_arrays(design, y, spec, entity_index):
    if isinstance(design, MidasDesign):
        x = design.matrix
        if y is None:
            y = design.y
        if entity_index is None:
            entity_index = design.entity_index
        if spec is not None and spec.groups is None:
            spec = dataclasses.replace(spec, groups=design.group_spans())
    else:
        x = np.asarray(design, dtype=float)
    if spec is None:
        raise ValueError("a PenaltySpec is required")
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("design rows do not match target length")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("design or target contains missing values")
    if spec.penalty_kind == "sg_lasso":
        if spec.groups is None:
            raise ValueError("sg_lasso needs a group partition")
    elif spec.groups is None:
        spec = dataclasses.replace(
            spec, groups=tuple((j, j + 1) for j in range(x.shape[1]))
        )
    spec.validate_groups(x.shape[1])
    return x, y, spec, entity_index


class _Problem:
    """Precomputed, immutable state shared by every fit on one design."""

    def __init__(self, x, y, spec, entity_index=None, standardize=True):
        n, p = x.shape
        self.n, self.p = n, p
        self.y = y
        self.spec = spec
        if standardize and p:
            scales = x.std(axis=0)
            scales[scales == 0.0] = 1.0
        else:
            scales = np.ones(p)
        self.scales = scales
        self.xs = np.asfortranarray(x / scales) if p else np.zeros((n, 0), order="F")

        self.gstart = np.array([g[0] for g in spec.groups], dtype=np.int64)
        self.gstop = np.array([g[1] for g in spec.groups], dtype=np.int64)
        self.n_groups = len(spec.groups)
        self.glip = np.empty(self.n_groups)
        for gi in range(self.n_groups):
            block = self.xs[:, self.gstart[gi] : self.gstop[gi]]
            if block.shape[1] == 1:
                self.glip[gi] = float(block[:, 0] @ block[:, 0])
            else:
                gram = block.T @ block
                self.glip[gi] = float(np.linalg.eigvalsh(gram)[-1])
        self.colnorm2 = (
            np.einsum("ij,ij->j", self.xs, self.xs) / n if p else np.zeros(0)
        )
        self.work = np.empty(max(p, 1))

        mode = spec.intercept_mode
        self.mode = mode
        if mode in ("fixed_effects", "grouped_fixed_effects"):
            if entity_index is None:
                raise ValueError(f"{mode} requires an entity index per row")
            ent = np.asarray(entity_index, dtype=np.int64)
            if ent.shape[0] != n:
                raise ValueError("entity index length mismatch")
            self.entity_index = ent
            self.n_entities = int(ent.max()) + 1 if n else 0
            self.counts = np.bincount(ent, minlength=self.n_entities).astype(float)
        else:
            self.entity_index = None
            self.n_entities = 0
        if mode == "grouped_fixed_effects":
            eg = np.asarray(spec.entity_groups, dtype=np.int64)
            if eg.shape[0] < self.n_entities:
                raise ValueError("entity_groups does not cover all entities")
            self.fe_groups = [
                np.where(eg[: self.n_entities] == g)[0]
                for g in np.unique(eg[: self.n_entities])
            ]
            self.fe_weights = [np.sqrt(len(g)) for g in self.fe_groups]
        self.ybar = float(y.mean()) if n else 0.0

        # cheap z(lambda) evaluation for lambda_max profiling
        self._c0 = self.xs.T @ y / n if p else np.zeros(0)
        if mode == "pooled":
            self._c1 = self.xs.sum(axis=0) / n if p else np.zeros(0)
        else:
            self._esum = np.zeros((self.n_entities, p))
            if p:
                np.add.at(self._esum, self.entity_index, self.xs)

    # -- intercept handling ------------------------------------------------

    def new_alpha(self):
        if self.mode == "pooled":
            return np.zeros(1)
        return np.zeros(self.n_entities)

    def mu(self, alpha):
        if self.mode == "pooled":
            return np.full(self.n, alpha[0])
        return alpha[self.entity_index]

    def _pooled_alpha(self, m, lam):
        spec = self.spec
        if not spec.penalize_intercept:
            return m
        if spec.penalty_kind == "sg_lasso":
            # both penalty parts hit the singleton group: threshold lam
            return np.sign(m) * max(abs(m) - lam, 0.0)
        t = lam * spec.gamma
        return np.sign(m) * max(abs(m) - t, 0.0) / (1.0 + lam * (1.0 - spec.gamma))

    def _grouped_alpha(self, means, counts, lam):
        """Exact minimizer of sum q_i (a_i - m_i)^2 + 2 lam w ||a|| per group."""
        alpha = np.zeros_like(means)
        q = counts / self.n
        for idx, w in zip(self.fe_groups, self.fe_weights):
            m, qg = means[idx], q[idx]
            c = qg * m
            lw = lam * w
            cnorm = np.linalg.norm(c)
            if cnorm <= lw or cnorm == 0.0:
                continue
            if np.allclose(qg, qg[0]):
                alpha[idx] = max(0.0, 1.0 - lw / (qg[0] * np.linalg.norm(m))) * m
                continue
            # unbalanced entities: solve ||a(rho)|| = rho on (0, ||m||]
            from scipy.optimize import brentq

            def gap(rho):
                a = qg * m * rho / (qg * rho + lw)
                return np.linalg.norm(a) - rho

            hi = float(np.linalg.norm(m))
            lo = hi * 1e-12
            if gap(lo) <= 0.0:
                continue
            rho = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-14)
            alpha[idx] = qg * m * rho / (qg * rho + lw)
        return alpha

    def update_alpha(self, r, alpha, lam):
        """Closed-form intercept block step; updates r, returns max change."""
        if self.mode == "pooled":
            m = r.mean() + alpha[0]
            a_new = self._pooled_alpha(m, lam)
            delta = a_new - alpha[0]
            if delta != 0.0:
                r -= delta
                alpha[0] = a_new
            return abs(delta)
        sums = np.bincount(self.entity_index, weights=r, minlength=self.n_entities)
        means = np.divide(
            sums, self.counts, out=np.zeros_like(sums), where=self.counts > 0
        )
        means += alpha
        if self.mode == "fixed_effects":
            a_new = np.where(self.counts > 0, means, alpha)
        else:
            a_new = self._grouped_alpha(
                np.where(self.counts > 0, means, 0.0), self.counts, lam
            )
            a_new = np.where(self.counts > 0, a_new, alpha)
        delta = a_new - alpha
        maxd = float(np.abs(delta).max()) if delta.size else 0.0
        if maxd > 0.0:
            r -= delta[self.entity_index]
            alpha[:] = a_new
        return maxd

    def alpha_profile(self, lam):
        """Intercepts of the empty-support fit, used by lambda_max."""
        if self.mode == "pooled":
            return np.array([self._pooled_alpha(self.ybar, lam)])
        sums = np.bincount(self.entity_index, weights=self.y, minlength=self.n_entities)
        means = np.divide(
            sums, self.counts, out=np.zeros_like(sums), where=self.counts > 0
        )
        if self.mode == "fixed_effects":
            return means
        return self._grouped_alpha(means, self.counts, lam)

    def z_at_profile(self, alpha):
        if self.p == 0:
            return np.zeros(0)
        if self.mode == "pooled":
            return self._c0 - alpha[0] * self._c1
        return self._c0 - (self._esum.T @ alpha) / self.n

    # -- objective and KKT -------------------------------------------------

    def penalty(self, beta, alpha, lam):
        spec = self.spec
        gamma = spec.gamma
        if spec.penalty_kind == "sg_lasso":
            val = gamma * np.abs(beta).sum()
            if gamma < 1.0:
                for gi in range(self.n_groups):
                    val += (1.0 - gamma) * np.linalg.norm(
                        beta[self.gstart[gi] : self.gstop[gi]]
                    )
        else:
            val = gamma * np.abs(beta).sum() + 0.5 * (1.0 - gamma) * float(beta @ beta)
        if self.mode == "pooled" and spec.penalize_intercept:
            a = alpha[0]
            if spec.penalty_kind == "sg_lasso":
                val += abs(a)
            else:
                val += gamma * abs(a) + 0.5 * (1.0 - gamma) * a * a
        elif self.mode == "grouped_fixed_effects":
            for idx, w in zip(self.fe_groups, self.fe_weights):
                val += w * np.linalg.norm(alpha[idx])
        return lam * val

    def objective(self, r, beta, alpha, lam):
        return float(r @ r) / self.n + 2.0 * self.penalty(beta, alpha, lam)

    def residual(self, beta, alpha):
        r = self.y - self.mu(alpha)
        if self.p:
            r -= self.xs @ beta
        return r

    def group_violations(self, z, beta, lam):
        """Optimality violations per working-set unit.

        Sparse-group: one value per penalty group.  Elastic net: one value
        per column (its working set is column-wise).
        """
        spec = self.spec
        gamma = spec.gamma
        viol = np.zeros(self.n_groups)
        if spec.penalty_kind == "elastic_net":
            active = beta != 0.0
            return np.where(
                active,
                np.abs(z - lam * gamma * np.sign(beta) - lam * (1.0 - gamma) * beta),
                np.maximum(np.abs(z) - lam * gamma, 0.0),
            )
        t1 = lam * gamma
        t2 = lam * (1.0 - gamma)
        for gi in range(self.n_groups):
            gs, ge = self.gstart[gi], self.gstop[gi]
            b = beta[gs:ge]
            zg = z[gs:ge]
            norm = np.linalg.norm(b)
            if norm == 0.0:
                shrunk = np.sign(zg) * np.maximum(np.abs(zg) - t1, 0.0)
                viol[gi] = max(np.linalg.norm(shrunk) - t2, 0.0)
            else:
                direction = b / norm
                v = np.where(
                    b != 0.0,
                    np.abs(zg - t1 * np.sign(b) - t2 * direction),
                    np.maximum(np.abs(zg) - t1, 0.0),
                )
                viol[gi] = v.max()
        return viol

    def alpha_violation(self, r, alpha, lam):
        spec = self.spec
        if self.mode == "pooled":
            m = float(r.mean())
            if not spec.penalize_intercept:
                return abs(m)
            if spec.penalty_kind == "sg_lasso":
                t1, t2 = lam, 0.0
            else:
                t1 = lam * spec.gamma
                t2 = lam * (1.0 - spec.gamma)
            a = alpha[0]
            if a != 0.0:
                return abs(m - t1 * np.sign(a) - t2 * a)
            return max(abs(m) - t1, 0.0)
        sums = np.bincount(self.entity_index, weights=r, minlength=self.n_entities)
        if self.mode == "fixed_effects":
            means = np.divide(
                sums, self.counts, out=np.zeros_like(sums), where=self.counts > 0
            )
            return float(np.abs(means).max()) if means.size else 0.0
        worst = 0.0
        u = sums / self.n
        for idx, w in zip(self.fe_groups, self.fe_weights):
            a = alpha[idx]
            norm = np.linalg.norm(a)
            if norm == 0.0:
                worst = max(worst, max(np.linalg.norm(u[idx]) - lam * w, 0.0))
            else:
                worst = max(worst, float(np.linalg.norm(u[idx] - lam * w * a / norm)))
        return worst

    def kkt(self, beta, alpha, lam):
        r = self.residual(beta, alpha)
        z = self.xs.T @ r / self.n if self.p else np.zeros(0)
        gv = self.group_violations(z, beta, lam)
        av = self.alpha_violation(r, alpha, lam)
        return r, gv, av


def _solve(problem, lam, beta, alpha, tol, max_iter):
    """Working-set proximal BCD; beta and alpha are modified in place."""
    spec = problem.spec
    sg = spec.penalty_kind == "sg_lasso"
    n = problem.n
    r = problem.residual(beta, alpha)

    if sg:
        thr1 = np.divide(
            n * lam * spec.gamma,
            problem.glip,
            out=np.zeros_like(problem.glip),
            where=problem.glip > 0,
        )
        thr2 = np.divide(
            n * lam * (1.0 - spec.gamma),
            problem.glip,
            out=np.zeros_like(problem.glip),
            where=problem.glip > 0,
        )
        nonzero = [
            gi
            for gi in range(problem.n_groups)
            if np.any(beta[problem.gstart[gi] : problem.gstop[gi]] != 0.0)
        ]
    else:
        thr_l1 = lam * spec.gamma
        ridge = lam * (1.0 - spec.gamma)
        nonzero = list(np.where(beta != 0.0)[0])
        if spec.gamma == 0.0 and lam > 0.0:
            nonzero = list(range(problem.p))  # ridge: everything is active
    active = np.array(sorted(nonzero), dtype=np.int64)

    trace = []
    sweeps = 0
    converged = False
    kkt_val = np.inf
    sweep_tol = max(tol, 1e-12)
    while True:
        while True:
            ad = problem.update_alpha(r, alpha, lam)
            if active.size and problem.p:
                if sg:
                    md = kernel.sg_sweep(
                        problem.xs, r, beta, problem.gstart, problem.gstop,
                        problem.glip, thr1, thr2, active, problem.work,
                    )
                else:
                    md = kernel.en_sweep(
                        problem.xs, r, beta, problem.colnorm2, active,
                        thr_l1, ridge, 1.0 / n,
                    )
            else:
                md = 0.0
            sweeps += 1
            trace.append(problem.objective(r, beta, alpha, lam))
            if max(md, ad) <= sweep_tol or sweeps >= max_iter:
                break
        r, gv, av = problem.kkt(beta, alpha, lam)
        kkt_val = max(float(gv.max()) if gv.size else 0.0, av)
        if kkt_val <= tol:
            converged = True
            break
        if sweeps >= max_iter:
            break
        violators = np.where(gv > tol)[0]
        fresh = np.setdiff1d(violators, active, assume_unique=False)
        if fresh.size:
            active = np.union1d(active, fresh).astype(np.int64)
        else:
            sweep_tol *= 0.1
    return r, trace, sweeps, converged, kkt_val


def fit(design, y=None, spec: PenaltySpec = None, *, tol: float = 1e-8,
        max_iter: int = 10000, warm_start: FitResult = None,
        standardize: bool = True, entity_index=None) -> FitResult:
    """Solve one penalized panel regression.

    ``design`` is a :class:`MidasDesign` (carrying y, groups and the
    entity index) or a plain matrix, in which case ``y`` and, for the
    fixed-effects modes, ``entity_index`` must be supplied and the group
    partition comes from ``spec.groups``.

    Returns a :class:`FitResult` whose KKT residual is at most ``tol``
    when ``converged`` is set; non-convergence within ``max_iter`` block
    sweeps is flagged, never silently dropped.
    """
    x, y, spec, entity_index = _as_arrays(design, y, spec, entity_index)
    problem = _Problem(x, y, spec, entity_index, standardize)
    return _fit_on(problem, spec.lam, tol, max_iter, warm_start)


def _fit_on(problem, lam, tol, max_iter, warm_start=None, warm_internal=None):
    if warm_internal is not None:
        beta, alpha = warm_internal[0].copy(), warm_internal[1].copy()
    elif warm_start is not None:
        beta = np.asarray(warm_start.beta, dtype=float) * problem.scales
        alpha = np.atleast_1d(np.asarray(warm_start.alpha, dtype=float)).copy()
    else:
        beta = np.zeros(problem.p)
        alpha = problem.new_alpha()
    r, trace, sweeps, converged, kkt_val = _solve(
        problem, lam, beta, alpha, tol, max_iter
    )
    beta_orig = beta / problem.scales
    support = np.flatnonzero(beta_orig)
    alpha_out = float(alpha[0]) if problem.mode == "pooled" else alpha.copy()
    result = FitResult(
        alpha=alpha_out,
        beta=beta_orig,
        support=support,
        objective=trace[-1] if trace else problem.objective(r, beta, alpha, lam),
        iterations=sweeps,
        converged=converged,
        kkt=kkt_val,
        lam=lam,
        gamma=problem.spec.gamma,
        objective_trace=np.asarray(trace),
    )
    result._internal = (beta, alpha)  # warm-start chain for path fits
    return result


def fit_elastic_net(design, y=None, lam: float = 0.0, gamma: float = 1.0,
                    intercept_mode: str = "pooled", *, tol: float = 1e-8,
                    max_iter: int = 10000, standardize: bool = True,
                    entity_index=None, penalize_intercept: bool = True,
                    entity_groups=None) -> FitResult:
    """Elastic-net comparator on an unrestricted (per-lag) design.

    Penalty ``gamma * lam * |b|_1 + (1 - gamma) * (lam / 2) * ||b||_2^2``;
    ``gamma`` interpolates between the LASSO (1) and ridge (0).
    """
    spec = PenaltySpec(
        lam=lam,
        gamma=gamma,
        penalty_kind="elastic_net",
        intercept_mode=intercept_mode,
        penalize_intercept=penalize_intercept,
        entity_groups=entity_groups,
    )
    return fit(design, y, spec, tol=tol, max_iter=max_iter,
               standardize=standardize, entity_index=entity_index)


def lambda_max(design, y=None, spec: PenaltySpec = None, *,
               standardize: bool = True, entity_index=None,
               verify: bool = True) -> float:
    """Smallest penalty level at which the slope support is empty.

    Found by bisection on the exact empty-support optimality condition,
    with the intercepts profiled out in closed form at each candidate
    level (they depend on lambda in the penalized-intercept modes).  A
    conservative upper bound is acceptable; ``verify`` re-checks with an
    actual fit and nudges the bound up if needed.
    """
    x, y, spec, entity_index = _as_arrays(design, y, spec, entity_index)
    problem = _Problem(x, y, spec, entity_index, standardize)
    if problem.p == 0:
        raise ValueError("design has no columns")
    if not np.any(problem.xs):
        raise ValueError("zero design matrix")

    gamma = spec.gamma
    if spec.penalty_kind == "elastic_net":
        gamma_eff = max(gamma, _GAMMA_FLOOR_EN)
    else:
        gamma_eff = gamma

    def empty_support_ok(lam):
        alpha = problem.alpha_profile(lam)
        z = problem.z_at_profile(alpha)
        slack = 1e-12 * (1.0 + lam)
        if spec.penalty_kind == "elastic_net":
            return np.abs(z).max() <= lam * gamma_eff + slack
        t1 = lam * gamma
        t2 = lam * (1.0 - gamma)
        for gi in range(problem.n_groups):
            zg = z[problem.gstart[gi] : problem.gstop[gi]]
            shrunk = np.maximum(np.abs(zg) - t1, 0.0)
            if np.linalg.norm(shrunk) > t2 + slack:
                return False
        return True

    z0 = problem.z_at_profile(problem.alpha_profile(0.0))
    scale = float(np.abs(z0).max()) if z0.size else 0.0
    if scale == 0.0 and empty_support_ok(0.0):
        return 0.0
    hi = max(scale, 1e-300)
    for _ in range(200):
        if empty_support_ok(hi):
            break
        hi *= 2.0
    else:
        raise RuntimeError("lambda_max bracket search failed")
    lo = 0.0
    for _ in range(200):
        if hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        if empty_support_ok(mid):
            hi = mid
        else:
            lo = mid
    lam = hi
    # pure ridge never has exactly empty support; its lambda_max is only a
    # conventional grid anchor (the gamma floor), so skip the fit check there
    ridge_like = spec.penalty_kind == "elastic_net" and gamma < _GAMMA_FLOOR_EN
    if verify and not ridge_like:
        for _ in range(20):
            check = _fit_on(problem, lam, tol=1e-10, max_iter=2000)
            if check.support.size == 0:
                break
            lam *= 1.05
        else:
            raise RuntimeError("could not verify an empty-support lambda")
    return lam


def fit_path(design, y=None, spec: PenaltySpec = None, *, grid_size: int = 50,
             lambda_min_ratio: float = 1e-3, tol: float = 1e-8,
             max_iter: int = 10000, standardize: bool = True,
             entity_index=None, lambda_grid=None) -> RegPath:
    """Warm-started fits on a log-spaced decreasing lambda grid.

    The grid runs from ``lambda_max`` down to ``lambda_max * ratio``;
    ``spec.lam`` is ignored.  An explicit ``lambda_grid`` overrides the
    construction (cross-validation uses one common grid for all folds).
    """
    x, y, spec, entity_index = _as_arrays(design, y, spec, entity_index)
    if lambda_grid is None:
        if grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if not 0.0 < lambda_min_ratio < 1.0:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        lam_hi = lambda_max(x, y, spec, standardize=standardize,
                            entity_index=entity_index)
        if lam_hi <= 0.0:
            lam_hi = 1.0  # degenerate target: any level gives the same fit
        lambda_grid = np.geomspace(lam_hi, lam_hi * lambda_min_ratio, grid_size)
    else:
        lambda_grid = np.asarray(lambda_grid, dtype=float)
    problem = _Problem(x, y, spec, entity_index, standardize)
    fits = []
    warm = None
    for lam in lambda_grid:
        res = _fit_on(problem, float(lam), tol, max_iter, warm_internal=warm)
        if not res.converged:
            warnings.warn(
                f"path point lambda={lam:.3e} did not converge "
                f"(kkt={res.kkt:.2e})"
            )
        warm = res._internal
        fits.append(res)
    return RegPath(lambda_grid=lambda_grid, fits=fits)


def kkt_residual(design, y=None, spec: PenaltySpec = None,
                 result: FitResult = None, *, standardize: bool = True,
                 entity_index=None) -> float:
    """Max subgradient-optimality violation of a fit, recomputed from scratch.

    For every zero group the coordinate-soft-thresholded score must stay
    inside the group threshold; for active coordinates the subgradient
    equation must hold; intercept blocks have the matching conditions for
    their mode.
    """
    x, y, spec, entity_index = _as_arrays(design, y, spec, entity_index)
    problem = _Problem(x, y, spec, entity_index, standardize)
    beta = np.asarray(result.beta, dtype=float) * problem.scales
    alpha = np.atleast_1d(np.asarray(result.alpha, dtype=float))
    _, gv, av = problem.kkt(beta, alpha, spec.lam)
    return max(float(gv.max()) if gv.size else 0.0, av)
