"""Log-barrier interior method with damped Newton centering.

Small dense problems only. The caller supplies the barrier function
``phi_t(v) = t * f0(v) - sum(log(-g_k(v)))`` through two callbacks:

``value(v, t)``
    barrier value, or ``inf`` when ``v`` is not strictly feasible;
``derivs(v, t)``
    ``(value, gradient, hessian)`` at a strictly feasible ``v``.

An optional ``max_step(v, dv)`` returns the step length at which some
constraint would become active along ``dv``; the line search then starts
just inside it instead of at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BarrierResult:
    x: np.ndarray
    t: float
    gap: float
    newton_steps: int
    stages: int
    converged: bool
    # Newton decrement lambda**2 / 2 when centering last gave up, else 0
    stall: float = 0.0


def _newton_direction(grad, hess):
    # symmetric Jacobi scaling; variables span many orders of magnitude
    d = np.sqrt(np.abs(np.diag(hess)))
    d[d == 0] = 1.0
    scaled = hess / d[:, None] / d[None, :]
    rhs = -grad / d
    try:
        w = np.linalg.solve(scaled, rhs)
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(scaled, rhs, rcond=None)[0]
    return w / d


def barrier_minimize(value, derivs, x0, n_constraints: int, t0: float = 1.0,
                     mu: float = 10.0, tol: float = 1e-8, newton_tol: float = 1e-10,
                     max_newton: int = 200, alpha: float = 0.25, beta: float = 0.5,
                     max_step=None) -> BarrierResult:
    """Minimize ``f0`` subject to ``g_k < 0`` from a strictly feasible ``x0``.

    Stops once the duality measure ``n_constraints / t`` drops below ``tol``.
    """
    x = np.array(x0, dtype=float)
    if not np.isfinite(value(x, t0)):
        raise ValueError("barrier start point is not strictly feasible")
    t = t0
    steps = 0
    stages = 0
    ok = True
    stall = 0.0
    while True:
        stages += 1
        for _ in range(max_newton):
            phi, grad, hess = derivs(x, t)
            dx = _newton_direction(grad, hess)
            lam2 = -float(grad @ dx)
            if lam2 < 0:
                # indefinite model from round-off; fall back to steepest descent
                dx = -grad / max(np.max(np.abs(np.diag(hess))), 1e-300)
                lam2 = -float(grad @ dx)
            if lam2 / 2.0 <= newton_tol:
                break
            s = 1.0
            if max_step is not None:
                s = min(1.0, 0.99 * max_step(x, dx))
            while True:
                trial = x + s * dx
                v = value(trial, t)
                if np.isfinite(v) and v <= phi - alpha * s * lam2:
                    break
                s *= beta
                if s < 1e-16:
                    break
            if s < 1e-16:
                # round-off floor; harmless if the suboptimality it leaves
                # in f0 units (decrement / t) is below the target gap
                if lam2 / (2.0 * t) > tol:
                    ok = False
                stall = max(stall, lam2 / 2.0)
                break
            x = trial
            steps += 1
        else:
            ok = False
            stall = max(stall, lam2 / 2.0)
        gap = n_constraints / t
        if gap < tol:
            return BarrierResult(x, t, gap, steps, stages, ok, stall)
        t *= mu
