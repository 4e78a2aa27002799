"""Damped least squares (Levenberg-Marquardt) with finite-difference Jacobians.

Box constraints are enforced by projecting trial points onto the bounds;
parameters that end on a bound are reported rather than silently clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

__all__ = ["LMResult", "numerical_jacobian", "levenberg_marquardt"]


@dataclass
class LMResult:
    params: np.ndarray
    covariance: np.ndarray
    stderr: np.ndarray
    residuals: np.ndarray
    cost: float
    n_iter: int
    n_eval: int
    trace: list = field(default_factory=list)
    at_lower: np.ndarray = None
    at_upper: np.ndarray = None

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(2.0 * self.cost))


def numerical_jacobian(fun, p, r0, steps, lower, upper, central):
    """Finite-difference Jacobian of ``fun`` at ``p`` (columns per parameter).

    Central differences are used where both neighbours lie inside the
    bounds; otherwise a one-sided difference pointing into the box.
    """
    jac = np.empty((r0.size, p.size))
    n_eval = 0
    for j in range(p.size):
        h = steps[j]
        up = p.copy()
        down = p.copy()
        up[j] += h
        down[j] -= h
        can_up = up[j] <= upper[j]
        can_down = down[j] >= lower[j]
        if central and can_up and can_down:
            jac[:, j] = (fun(up) - fun(down)) / (2.0 * h)
            n_eval += 2
        elif can_up:
            jac[:, j] = (fun(up) - r0) / h
            n_eval += 1
        else:
            jac[:, j] = (r0 - fun(down)) / h
            n_eval += 1
    return jac, n_eval


def levenberg_marquardt(
    fun,
    p0,
    lower=None,
    upper=None,
    typical=None,
    diff_step=1e-6,
    central=False,
    max_iter=200,
    ftol=1e-12,
    xtol=1e-12,
):
    """Minimize ``0.5 * ||fun(p)||**2``.

    ``typical`` gives a characteristic magnitude per parameter; finite
    difference steps are ``diff_step * max(|p|, typical)``.  The returned
    covariance is ``s**2 (J^T J)^-1`` with ``s**2`` the residual variance, so
    standard errors are meaningful whether or not residuals were whitened.

    ``trace`` lists the cost after the starting point and every accepted
    step; it is strictly decreasing.
    """
    p = np.array(p0, dtype=float)
    n_par = p.size
    lower = np.full(n_par, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n_par, np.inf) if upper is None else np.asarray(upper, dtype=float)
    typical = np.ones(n_par) if typical is None else np.abs(np.asarray(typical, dtype=float))
    p = np.clip(p, lower, upper)

    def steps_at(q):
        return diff_step * np.maximum(np.abs(q), typical)

    r = np.asarray(fun(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the starting point")
    n_eval = 1
    cost = 0.5 * float(r @ r)
    trace = [cost]
    jac, ne = numerical_jacobian(fun, p, r, steps_at(p), lower, upper, central)
    n_eval += ne
    lam = None
    nu = 2.0
    converged = cost == 0.0
    it = 0
    while not converged and it < max_iter:
        it += 1
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(a), 1e-300)
        if lam is None:
            lam = 1e-3
        p_new = p
        while True:
            try:
                delta = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(a + lam * np.diag(diag), -g, rcond=None)[0]
            p_new = np.clip(p + delta, lower, upper)
            step = p_new - p
            r_new = np.asarray(fun(p_new), dtype=float)
            n_eval += 1
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            predicted = -(g @ step) - 0.5 * step @ (a @ step)
            if cost_new < cost:
                rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                break
            lam *= nu
            nu *= 2.0
            small_step = np.all(np.abs(step) <= xtol * (np.abs(p) + xtol))
            if lam > 1e16 or small_step:
                # No descent possible from here: p is a (bounded) stationary point.
                converged = True
                break
        if converged:
            break
        reduction = cost - cost_new
        small_step = np.all(np.abs(p_new - p) <= xtol * (np.abs(p) + typical))
        p, r, cost = p_new, r_new, cost_new
        trace.append(cost)
        if reduction <= ftol * cost or small_step or cost == 0.0:
            converged = True
        jac, ne = numerical_jacobian(fun, p, r, steps_at(p), lower, upper, central)
        n_eval += ne

    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", trace=trace)

    a = jac.T @ jac
    dof = max(r.size - n_par, 1)
    s2 = 2.0 * cost / dof
    cov = np.linalg.pinv(a) * s2
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return LMResult(
        params=p,
        covariance=cov,
        stderr=stderr,
        residuals=r,
        cost=cost,
        n_iter=it,
        n_eval=n_eval,
        trace=trace,
        at_lower=p <= lower,
        at_upper=p >= upper,
    )
