"""Dense convex quadratic programs with box bounds and one sum constraint.

    minimize    0.5 * x'Hx + c'x
    subject to  lower <= x <= upper,   sum(x) = eq_sum

A primal active-set method fixes variables at their bounds and solves the
remaining equality-constrained subproblem through a bordered KKT system.
Singular reduced Hessians (PSD but rank deficient, including H = 0) fall
back to an eigendecomposition of the reduced Hessian and follow directions
of linear descent until a bound blocks; the feasible set is compact, so a
blocking bound always exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import NumericError, ValidationError

# Reject H only when its smallest eigenvalue is below -PSD_EIG_TOL; smaller
# negative curvature is rounding noise from assembling sums of outer products.
PSD_EIG_TOL = 1e-8

_MAX_ITERS_PER_VAR = 100


@dataclass(frozen=True)
class QpProblem:
    """Problem data; the objective convention is 0.5 x'Hx + c'x."""

    h: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_sum: float

    def __post_init__(self):
        object.__setattr__(self, "h", np.array(self.h, dtype=float))
        object.__setattr__(self, "c", np.array(self.c, dtype=float))
        object.__setattr__(self, "lower", np.array(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.array(self.upper, dtype=float))
        object.__setattr__(self, "eq_sum", float(self.eq_sum))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.h @ x + self.c @ x)


def _validate(p: QpProblem) -> None:
    n = p.n
    if p.c.ndim != 1 or p.h.shape != (n, n) or p.lower.shape != (n,) or p.upper.shape != (n,):
        raise ValidationError("QP dimension mismatch")
    if not (np.all(np.isfinite(p.h)) and np.all(np.isfinite(p.c))
            and np.all(np.isfinite(p.lower)) and np.all(np.isfinite(p.upper))
            and np.isfinite(p.eq_sum)):
        raise ValidationError("QP contains non-finite entries")
    scale = max(1.0, float(np.abs(p.h).max(initial=0.0)))
    if float(np.abs(p.h - p.h.T).max(initial=0.0)) > 1e-10 * scale:
        raise ValidationError("H is not symmetric")
    if np.any(p.lower > p.upper):
        raise ValidationError("infeasible bounds: lower > upper")
    slack = 1e-9 * max(1.0, abs(p.eq_sum))
    if not (p.lower.sum() - slack <= p.eq_sum <= p.upper.sum() + slack):
        raise ValidationError("equality constraint infeasible for the given bounds")


def _require_psd(h: np.ndarray) -> None:
    # Cholesky of H + tol*I succeeds iff the smallest eigenvalue exceeds -tol.
    n = h.shape[0]
    try:
        np.linalg.cholesky(h + PSD_EIG_TOL * np.eye(n))
        return
    except np.linalg.LinAlgError:
        pass
    lam_min = float(np.linalg.eigvalsh(h)[0])
    if lam_min < -PSD_EIG_TOL:
        raise NumericError(
            f"H is not positive semidefinite (min eigenvalue {lam_min:.3e})")


def _feasible_start(p: QpProblem, warm_start) -> np.ndarray:
    if warm_start is None:
        x0 = np.full(p.n, p.eq_sum / p.n)
    else:
        x0 = np.asarray(warm_start, dtype=float).copy()
        if x0.shape != (p.n,) or not np.all(np.isfinite(x0)):
            raise ValidationError("warm start has the wrong shape or non-finite entries")
    lo, up = p.lower, p.upper
    # shift-then-clip projection onto the box/sum intersection, by bisection
    t_lo = float((lo - x0).min()) - 1.0
    t_hi = float((up - x0).max()) + 1.0
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        if np.clip(x0 + t_mid, lo, up).sum() < p.eq_sum:
            t_lo = t_mid
        else:
            t_hi = t_mid
    x = np.clip(x0 + t_hi, lo, up)
    interior = (x > lo) & (x < up)
    if interior.any():
        x[interior] += (p.eq_sum - x.sum()) / interior.sum()
    return x


def _sum_nullspace_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x n-1) of the zero-sum subspace."""
    z = np.zeros((n, n - 1))
    for j in range(1, n):
        z[:j, j - 1] = 1.0
        z[j, j - 1] = -float(j)
        z[:, j - 1] /= np.sqrt(j * (j + 1.0))
    return z


def _reduced_step(hff: np.ndarray, gf: np.ndarray):
    """Solve the free subproblem in the zero-sum subspace around the current point.

    Returns (step, is_ray): a bounded step to the subspace minimizer, or an
    unnormalized direction of strict linear descent when the reduced Hessian
    is singular along the gradient.
    """
    z = _sum_nullspace_basis(gf.shape[0])
    hr = z.T @ hff @ z
    gr = z.T @ gf
    lam, vec = np.linalg.eigh(0.5 * (hr + hr.T))
    if lam[0] < -PSD_EIG_TOL:
        raise NumericError(
            "H is not positive semidefinite on the constraint subspace")
    cut = 1e-12 * max(1.0, float(np.abs(lam).max(initial=0.0)))
    pos = lam > cut
    proj = vec[:, pos].T @ gr
    g_null = gr - vec[:, pos] @ proj
    if np.abs(g_null).max(initial=0.0) > 1e-11 * max(1.0, np.abs(gr).max(initial=0.0)):
        return z @ (-g_null), True
    y = -(vec[:, pos] @ (proj / lam[pos])) if pos.any() else np.zeros(gr.shape[0])
    return z @ y, False


def _free_subproblem(p: QpProblem, x, free_idx, grad):
    """Step for the free coordinates holding the rest fixed. Returns (step, is_ray)."""
    nf = free_idx.size
    if nf == 1:
        i = free_idx[0]
        target = p.eq_sum - x.sum() + x[i]
        return np.array([target - x[i]]), False
    hff = p.h[np.ix_(free_idx, free_idx)]
    gf = grad[free_idx]
    # bordered KKT system in absolute coordinates: fast path
    k = np.zeros((nf + 1, nf + 1))
    k[:nf, :nf] = hff
    k[:nf, nf] = 1.0
    k[nf, :nf] = 1.0
    rhs = np.empty(nf + 1)
    rhs[:nf] = hff @ x[free_idx] - gf
    rhs[nf] = p.eq_sum - x.sum() + x[free_idx].sum()
    try:
        sol = np.linalg.solve(k, rhs)
    except np.linalg.LinAlgError:
        sol = None
    if sol is not None and np.all(np.isfinite(sol)):
        step = sol[:nf] - x[free_idx]
        # A near-singular system solves with a tiny backward residual yet a
        # huge, direction-unreliable solution; anything far beyond the box is
        # decided exactly by the eigendecomposition path instead.
        box_scale = max(1.0, float(np.abs(x).max()),
                        float((p.upper[free_idx] - p.lower[free_idx]).max()))
        resid = np.abs(k @ sol - rhs).max()
        scale = max(1.0, np.abs(rhs).max(), np.abs(k).max() * max(1.0, np.abs(sol).max()))
        if resid <= 1e-9 * scale and np.abs(step).max() <= 1e6 * box_scale:
            descent = float(gf @ step)
            if descent <= 1e-10 * max(1.0, np.abs(gf).max()) * max(1.0, np.abs(step).max()):
                return step, False
    return _reduced_step(hff, gf)


def solve(p: QpProblem, warm_start=None) -> np.ndarray:
    """Minimize the QP; deterministic for fixed input.

    The result is feasible to 1e-8 on bounds and sum and satisfies the KKT
    stationarity conditions to well below 1e-6 in max norm.
    """
    _validate(p)
    _require_psd(p.h)
    n = p.n
    lo, up = p.lower, p.upper
    x = _feasible_start(p, warm_start)

    bound_atol = 1e-11 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(up)))
    pinned = up - lo <= bound_atol          # effectively fixed variables
    active_lo = x <= lo + bound_atol
    active_up = (x >= up - bound_atol) & ~active_lo
    x[active_lo] = lo[active_lo]
    x[active_up] = up[active_up]

    for _ in range(_MAX_ITERS_PER_VAR * max(n, 1)):
        free = ~(active_lo | active_up)
        free_idx = np.flatnonzero(free)
        grad = p.h @ x + p.c

        step = None
        if free_idx.size:
            step, is_ray = _free_subproblem(p, x, free_idx, grad)
            if step is not None and not is_ray:
                # Ill-conditioned subproblems bounce by rounding noise instead
                # of shrinking the step; a step predicting no material decrease
                # means the subproblem is solved.
                hd = p.h[np.ix_(free_idx, free_idx)] @ step
                predicted = -(grad[free_idx] @ step + 0.5 * step @ hd)
                tol_pred = 1e-13 * max(1.0, float(np.abs(grad).max(initial=0.0))
                                       * max(1.0, float(np.abs(x).max())))
                if predicted <= tol_pred:
                    step = None

        if step is not None and np.abs(step).max(initial=0.0) > 1e-12 * max(1.0, np.abs(x).max()):
            direction = np.zeros(n)
            direction[free_idx] = step
            # largest feasible fraction of the step before a bound blocks
            limit = 1.0 if not is_ray else np.inf
            ratios = np.full(n, np.inf)
            d_tol = 1e-14 * np.abs(direction).max()
            up_block = direction > d_tol
            lo_block = direction < -d_tol
            ratios[up_block] = (up[up_block] - x[up_block]) / direction[up_block]
            ratios[lo_block] = (lo[lo_block] - x[lo_block]) / direction[lo_block]
            np.maximum(ratios, 0.0, out=ratios)
            blocker = int(np.argmin(ratios))
            alpha = min(limit, float(ratios[blocker]))
            if not np.isfinite(alpha):
                raise NumericError("QP step is unbounded despite finite bounds")
            if alpha < limit:
                x += alpha * direction
                if direction[blocker] > 0:
                    active_up[blocker] = True
                    x[blocker] = up[blocker]
                else:
                    active_lo[blocker] = True
                    x[blocker] = lo[blocker]
            else:
                x[free_idx] += step
            continue

        # current point solves the working-set subproblem: check multipliers
        checkable = ~pinned
        if free_idx.size:
            mu = -float(grad[free_idx].mean())
        else:
            need_lo = -grad[active_lo & checkable]
            need_up = -grad[active_up & checkable]
            lo_req = float(need_lo.max()) if need_lo.size else -np.inf
            up_req = float(need_up.min()) if need_up.size else np.inf
            mu = min(max(0.0, lo_req), up_req) if lo_req <= up_req else 0.5 * (lo_req + up_req)
        shifted = grad + mu
        violation = np.zeros(n)
        sel_lo = active_lo & checkable
        sel_up = active_up & checkable
        violation[sel_lo] = np.maximum(0.0, -shifted[sel_lo])
        violation[sel_up] = np.maximum(0.0, shifted[sel_up])
        worst = int(np.argmax(violation))
        kkt_tol = max(1e-12, 1e-10 * float(np.abs(grad).max(initial=0.0)))
        if violation[worst] <= kkt_tol:
            return np.clip(x, lo, up)
        active_lo[worst] = False
        active_up[worst] = False

    raise NumericError("QP did not converge")
