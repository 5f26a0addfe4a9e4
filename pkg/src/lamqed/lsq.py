"""Damped Gauss-Newton least squares (Levenberg-style).

Shared fit engine for the calibration backbone fit and the JPA
spectrum fit.  Deliberately small: finite-difference Jacobian with a
relative step of 1e-4, multiplicative damping adjusted by factors of
10, convergence when the accepted parameter update falls below 1e-6
relative.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError


@dataclass
class FitResult:
    params: np.ndarray
    residual_rms: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)   # rms after each accepted step


def _jacobian(residual_fn, p, r0, rel_step):
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        step = rel_step * (abs(p[j]) if p[j] != 0.0 else 1.0)
        q = p.copy()
        q[j] += step
        jac[:, j] = (residual_fn(q) - r0) / step
    return jac


def least_squares(residual_fn, p0, rel_step=1e-4, update_tol=1e-6,
                  max_iter=200, lam0=1e-3) -> FitResult:
    """Minimize sum(residual_fn(p)**2) from the starting point p0.

    residual_fn maps a parameter vector to a 1-D residual array.
    Raises ConvergenceError (carrying .last_params and .history) if the
    update tolerance is not reached within max_iter iterations.
    """
    p = np.asarray(p0, dtype=float).copy()
    if p.ndim != 1 or p.size == 0:
        raise ValueError("p0 must be a non-empty 1-D parameter vector")
    r = np.asarray(residual_fn(p), dtype=float)
    cost = float(r @ r)
    lam = float(lam0)
    history = [np.sqrt(cost / r.size)]

    for it in range(1, max_iter + 1):
        jac = _jacobian(residual_fn, p, r, rel_step)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1.0

        accepted = False
        while lam <= 1e12:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + delta
            r_trial = np.asarray(residual_fn(trial), dtype=float)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                p, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        history.append(np.sqrt(cost / r.size))

        if accepted:
            scale = np.maximum(np.abs(p), 1e-300)
            if np.max(np.abs(delta) / scale) < update_tol:
                return FitResult(params=p,
                                 residual_rms=np.sqrt(cost / r.size),
                                 iterations=it, converged=True,
                                 history=history)
        else:
            # damping saturated without any acceptable step: the current
            # point is a (possibly noisy) stationary point
            return FitResult(params=p, residual_rms=np.sqrt(cost / r.size),
                             iterations=it, converged=True, history=history)

    err = ConvergenceError(
        "least squares did not converge in %d iterations "
        "(last rms %.6g)" % (max_iter, history[-1]))
    err.last_params = p
    err.history = history
    raise err
