"""Bandwidth and power allocation at fixed compression ratios.

Each user's surrogate term ``alpha_i * exp(-arg_i**2 / 2)`` is split with
slack variables

    f <= exp(y),  y <= -x**2/2,  x >= N0 B m / (delta P),
    m >= 2**q - 1,  q >= d0 (1 - o) / (B t0),

and the two non-convex pieces are handled by successive convex
approximation (SCA): ``exp(y)`` is replaced by its tangent, the product
``B m`` is bounded through ``z >= B m`` with the concave half of its
difference-of-squares form linearized, and ``x P`` is bounded below by a
tangent minorant. Every convex subproblem is an inner approximation, so
its solution is feasible for the original constraints and the true
objective never decreases across accepted iterates.

Internally bandwidth and power are measured in units of the equal-split
share (``b_max / U`` and ``p_max / U``). ``SlackState.z`` and the
linearizations live in those units as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .barrier import barrier_minimize
from .errors import AnchorError, DomainError, InfeasibleBudgetError, OracleScaleError
from .models import LN2, UserLink, surrogate_terms

# column layout of the full slack state
B, P, F, Y, X, M, Q, Z = range(8)
_FEAS_RTOL = 1e-9


@dataclass(frozen=True)
class Budgets:
    """Per-user minimums and totals for bandwidth (Hz) and power (W)."""

    b_min: float
    b_max: float
    p_min: float
    p_max: float

    def __post_init__(self):
        for name in ("b_min", "b_max", "p_min", "p_max"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"Budgets.{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)

    def check(self, n_users: int) -> None:
        if n_users < 1:
            raise DomainError("need at least one user")
        if n_users * self.b_min > self.b_max * (1 + 1e-12):
            raise InfeasibleBudgetError(
                f"{n_users} x b_min = {n_users * self.b_min:g} Hz exceeds b_max = {self.b_max:g} Hz")
        if n_users * self.p_min > self.p_max * (1 + 1e-12):
            raise InfeasibleBudgetError(
                f"{n_users} x p_min = {n_users * self.p_min:g} W exceeds p_max = {self.p_max:g} W")

    def satisfied_by(self, bandwidth, power, rtol: float = _FEAS_RTOL) -> bool:
        bw = np.asarray(bandwidth, dtype=float)
        pw = np.asarray(power, dtype=float)
        return bool(
            np.all(bw >= self.b_min * (1 - rtol)) and bw.sum() <= self.b_max * (1 + rtol)
            and np.all(pw >= self.p_min * (1 - rtol)) and pw.sum() <= self.p_max * (1 + rtol))

    def equal_split(self, n_users: int) -> tuple[np.ndarray, np.ndarray]:
        return (np.full(n_users, self.b_max / n_users), np.full(n_users, self.p_max / n_users))


@dataclass
class Allocation:
    bandwidth: np.ndarray
    power: np.ndarray
    objective: float
    iterations: int = 0
    converged: bool = True
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.bandwidth = np.asarray(self.bandwidth, dtype=float)
        self.power = np.asarray(self.power, dtype=float)


@dataclass
class SlackState:
    """Slack variables of the split program, in equal-split units.

    ``bandwidth_ref`` and ``power_ref`` are the Hz and W that one unit of
    bandwidth/power stands for; ``z`` bounds ``(B / bandwidth_ref) * m``.
    """

    f: np.ndarray
    y: np.ndarray
    x: np.ndarray
    m: np.ndarray
    q: np.ndarray
    z: np.ndarray
    bandwidth_ref: float
    power_ref: float

    def violations(self, allocation: Allocation, links: Sequence[UserLink], o) -> dict:
        """Largest violation of each original (unlinearized) constraint, in physical units."""
        bw, pw = allocation.bandwidth, allocation.power
        d0 = np.array([l.d0 for l in links])
        t0 = np.array([l.t0 for l in links])
        n0 = np.array([l.n0 for l in links])
        delta = np.array([l.delta for l in links])
        o = np.asarray(o, dtype=float)
        with np.errstate(over="ignore"):
            out = {
                "f<=exp(y)": self.f - np.exp(self.y),
                "y<=-x^2/2": self.y + 0.5 * self.x ** 2,
                "m>=2^q-1": np.expm1(LN2 * self.q) - self.m,
                "q>=payload": d0 * (1 - o) / (bw * t0) - self.q,
                "x>=N0Bm/(dP)": n0 * bw * self.m / (delta * pw) - self.x,
            }
        return {k: float(np.max(v)) for k, v in out.items()}


@dataclass
class ResourceConfig:
    max_sca_iters: int = 50
    sca_tol: float = 1e-6
    barrier_tol: float = 1e-8
    barrier_mu: float = 10.0
    xp_variant: str = "minorant"
    # users whose surrogate term is below this are parked at the minimums
    dead_tol: float = 1e-12
    monotone_slack: float = 1e-10
    # SCA finds local optima; it is run from each of these starting points
    # ("equal", "fair", "concentrated") and the best result is kept
    starts: tuple = ("equal", "fair", "concentrated")
    # initial barrier duality gap relative to the objective scale
    barrier_start_gap: float = 1e-2

    def __post_init__(self):
        if self.xp_variant not in ("minorant", "affine"):
            raise ValueError(f"unknown xp_variant {self.xp_variant!r}")
        self.starts = tuple(self.starts)
        unknown = set(self.starts) - {"equal", "fair", "concentrated"}
        if unknown:
            raise ValueError(f"unknown start(s) {sorted(unknown)}")


# -- linearizations -----------------------------------------------------------

def linearize_exp(y, y_anchor):
    """Tangent of ``exp`` at ``y_anchor``; a global under-estimator."""
    e = np.exp(y_anchor)
    return e + (np.asarray(y) - y_anchor) * e


def linearize_bilinear_z(B, m, B_anchor, m_anchor, normalized: bool = True):
    """Convex upper bound on ``B * m``, tangent at the anchor.

    Writing ``4 B m = (B+m)**2 - (B-m)**2`` and linearizing the concave
    half gives ``B m + ((B-Ba) - (m-ma))**2 / 4``. With ``normalized`` the
    same split is taken in ``B/Ba`` and ``m/ma``, which gives
    ``B m + Ba ma (dB/Ba - dm/ma)**2 / 4``. That version does not depend on
    the units of either factor, which matters when ``m`` is hundreds of
    times larger than ``B``. Both coincide when ``Ba == ma``.
    """
    B = np.asarray(B, dtype=float)
    m = np.asarray(m, dtype=float)
    if normalized:
        d = (B - B_anchor) / B_anchor - (m - m_anchor) / m_anchor
        return B * m + 0.25 * B_anchor * m_anchor * d * d
    d = (B - B_anchor) - (m - m_anchor)
    return B * m + 0.25 * d * d


def linearize_bilinear_xp(x, P, x_anchor, P_anchor, variant: str = "minorant",
                          normalized: bool = True):
    """Approximation of ``4 x P`` around ``(x_anchor, P_anchor)``.

    ``"minorant"`` keeps the concave half of ``(x+P)**2 - (x-P)**2`` and
    linearizes the convex one, giving ``4 x P - ((x-xa) + (P-Pa))**2``
    (or ``4 x P - xa Pa (dx/xa + dP/Pa)**2`` when ``normalized``): tangent
    at the anchor and never above ``4 x P``. ``"affine"`` is
    ``4 (x Pa + P xa)``, which overshoots ``4 x P`` by ``4 xa Pa`` at the
    anchor and is kept only for comparison runs.
    """
    x = np.asarray(x, dtype=float)
    P = np.asarray(P, dtype=float)
    if variant == "minorant":
        if normalized:
            d = (x - x_anchor) / x_anchor + (P - P_anchor) / P_anchor
            return 4.0 * x * P - x_anchor * P_anchor * d * d
        d = (x - x_anchor) + (P - P_anchor)
        return 4.0 * x * P - d * d
    if variant == "affine":
        return 4.0 * (x * P_anchor + P * x_anchor)
    raise ValueError(f"unknown variant {variant!r}")


# -- problem data -------------------------------------------------------------

class _Problem:
    """Per-user constants of the allocation program in equal-split units."""

    def __init__(self, links: Sequence[UserLink], o, alphas, budgets: Budgets):
        n = len(links)
        budgets.check(n)
        self.n = n
        self.budgets = budgets
        self.o = np.broadcast_to(np.asarray(o, dtype=float), (n,)).copy()
        self.alpha = np.broadcast_to(np.asarray(alphas, dtype=float), (n,)).copy()
        if np.any((self.o < 0) | (self.o > 1)):
            raise DomainError("compression ratios must lie in [0, 1]")
        if np.any(self.alpha < 0):
            raise DomainError("alphas must be non-negative")
        self.d0 = np.array([l.d0 for l in links])
        self.t0 = np.array([l.t0 for l in links])
        self.n0 = np.array([l.n0 for l in links])
        self.delta = np.array([l.delta for l in links])
        self.b_ref = budgets.b_max / n
        self.p_ref = budgets.p_max / n
        self.A = self.d0 * (1.0 - self.o) / (self.b_ref * self.t0)
        self.kappa = self.n0 * self.b_ref / (self.delta * self.p_ref)
        self.b_lo = budgets.b_min / self.b_ref
        self.p_lo = budgets.p_min / self.p_ref
        self.b_tot = float(n)
        self.p_tot = float(n)

    def terms(self, Bs, Ps):
        return surrogate_terms(self.d0, self.t0, self.n0, self.delta,
                               Bs * self.b_ref, Ps * self.p_ref, self.o, self.alpha)

    def objective(self, Bs, Ps) -> float:
        return float(np.sum(self.terms(Bs, Ps)))

    def tight(self, Bs, Ps, idx=slice(None)):
        """Slack values that make every split constraint active at (B, P)."""
        with np.errstate(over="ignore"):
            q = self.A[idx] / Bs
            m = np.expm1(LN2 * q)
            z = Bs * m
            x = self.kappa[idx] * z / Ps
            y = -0.5 * x * x
            f = np.exp(y)
        return f, y, x, m, q, z


# -- convex subproblem --------------------------------------------------------

class _Subproblem:
    """Barrier oracle for the linearized program over a subset of users.

    Every slack is tight at an optimum of the linearized program: ``f`` and
    ``y`` because the objective rewards them, ``q`` and ``m`` because the
    ``z`` bound is increasing in ``m``, ``z`` because it only appears on the
    small side of the ``x P`` minorant, and ``x`` because the objective
    penalizes it. Eliminating them leaves

        minimize  sum_i w_i x_i(B_i, P_i)**2 / 2,   w = alpha e^{yj}

    over the budget polytope, where ``x_i`` is the smallest root of
    ``minorant(x, P) = kappa z_bound(B, 2**(A/B) - 1)``. That root exists
    while ``kappa z_bound < 2 P xj``, which becomes an extra log-barrier
    term. The composition is convex, and this form avoids the curved
    slack valleys that stall Newton in the lifted formulation.
    """

    def __init__(self, prob: _Problem, idx, Bj, Pj, mj, xj, yj, b_tot, p_tot,
                 b_free: bool, p_free: bool, variant: str):
        self.n = len(idx)
        self.alpha = prob.alpha[idx]
        self.A = prob.A[idx]
        self.kappa = prob.kappa[idx]
        self.b_lo, self.p_lo = prob.b_lo, prob.p_lo
        self.b_tot, self.p_tot = b_tot, p_tot
        self.Bj, self.Pj, self.mj, self.xj, self.yj = Bj, Pj, mj, xj, yj
        self.ey = np.exp(yj)
        self.weight = self.alpha * self.ey
        self.b_free, self.p_free = b_free, p_free
        self.affine = variant == "affine"
        n_dom = 0 if self.affine else self.n
        self.n_constraints = n_dom + (self.n + 1) * (b_free + p_free)
        free = np.ones((self.n, 2), dtype=bool)
        free[:, 0] = b_free
        free[:, 1] = p_free
        self.free = free.ravel()

    # K(B) = kappa * z_bound(B, m(B)) and its first two derivatives
    def _k(self, Bv, order=0):
        # clipping keeps exp finite; such points fail the domain check anyway
        r = np.minimum(LN2 * self.A / Bv, 700.0)
        er = np.exp(r)
        m = er - 1.0
        dz = (Bv - self.Bj) / self.Bj - (m - self.mj) / self.mj
        z = Bv * m + 0.25 * self.Bj * self.mj * dz * dz
        if order == 0:
            return self.kappa * z, m
        m1 = -er * r / Bv
        m2 = er * r * (r + 2.0) / Bv ** 2
        dd = 1.0 / self.Bj - m1 / self.mj
        z1 = m + Bv * m1 + 0.5 * self.Bj * self.mj * dz * dd
        z2 = 2.0 * m1 + Bv * m2 + 0.5 * self.Bj * self.mj * dd * dd - 0.5 * self.Bj * dz * m2
        return self.kappa * z, m, self.kappa * z1, self.kappa * z2

    def _x(self, K, Pv):
        """Smallest x with minorant(x, P) >= K, and the domain slack."""
        if self.affine:
            return (K - Pv * self.xj) / self.Pj, np.ones_like(K)
        c = 2.0 - Pv / self.Pj
        k = K / self.xj - Pv * c
        dom = 2.0 * Pv - K / self.xj
        w = 2.0 * k / (Pv + np.sqrt(self.Pj * np.maximum(dom, 0.0)))
        return self.xj * (c + w), dom

    def _budget_slacks(self, Bv, Pv):
        parts = []
        if self.b_free:
            parts += [Bv - self.b_lo, [self.b_tot - Bv.sum()]]
        if self.p_free:
            parts += [Pv - self.p_lo, [self.p_tot - Pv.sum()]]
        return np.concatenate(parts) if parts else None

    def _phi(self, x, dom, budget, t):
        xp = np.maximum(x, 0.0)
        phi = 0.5 * t * float(self.weight @ (xp * xp))
        if not self.affine:
            phi -= float(np.log(dom).sum())
        if budget is not None:
            phi -= float(np.log(budget).sum())
        return phi

    def value(self, v, t):
        Bv, Pv = v[0::2], v[1::2]
        if not Bv.min() > 0:
            return np.inf
        budget = self._budget_slacks(Bv, Pv)
        if budget is not None and not budget.min() > 0:
            return np.inf
        K, _ = self._k(Bv)
        x, dom = self._x(K, Pv)
        if not (self.affine or dom.min() > 0) or not np.isfinite(x).all():
            return np.inf
        return self._phi(x, dom, budget, t)

    def max_step(self, v, dv):
        """Largest step keeping the budget constraints strictly satisfied."""
        V = v.reshape(self.n, 2)
        D = dv.reshape(self.n, 2)
        slack, rate = [], []
        for col, free, lo, tot in ((0, self.b_free, self.b_lo, self.b_tot),
                                   (1, self.p_free, self.p_lo, self.p_tot)):
            if free:
                slack += [V[:, col] - lo, [tot - V[:, col].sum()]]
                rate += [-D[:, col], [D[:, col].sum()]]
        if not slack:
            return np.inf
        slack = np.concatenate(slack)
        rate = np.concatenate(rate)
        hit = rate > 0
        if not hit.any():
            return np.inf
        return float(np.min(slack[hit] / rate[hit]))

    def point_derivs(self, Bv, Pv):
        """x and its gradient/Hessian in (B, P), plus the domain slack terms."""
        K, m, K1, K2 = self._k(Bv, order=2)
        x, dom = self._x(K, Pv)
        if self.affine:
            xb, xq = K1 / self.Pj, -self.xj / self.Pj * np.ones_like(K)
            xbb, xbq, xqq = K2 / self.Pj, np.zeros_like(K), np.zeros_like(K)
        else:
            # implicit differentiation of G(x, B, P) = K(B) - minorant(x, P) = 0
            dxp = (x - self.xj) / self.xj + (Pv - self.Pj) / self.Pj
            gx = -(Pv - 0.5 * self.Pj * dxp)
            gb = K1
            gq = -(x - 0.5 * self.xj * dxp)
            gxx = 0.5 * self.Pj / self.xj
            gqq = 0.5 * self.xj / self.Pj
            gxq = -0.5
            xb = -gb / gx
            xq = -gq / gx
            xbb = -(K2 + gxx * xb * xb) / gx
            xbq = -(gxq * xb + gxx * xb * xq) / gx
            xqq = -(gqq + 2.0 * gxq * xq + gxx * xq * xq) / gx
        return x, (xb, xq), (xbb, xbq, xqq), dom, K1, K2

    def derivs(self, v, t):
        n = self.n
        Bv, Pv = v[0::2], v[1::2]
        x, (xb, xq), (xbb, xbq, xqq), dom, K1, K2 = self.point_derivs(Bv, Pv)
        wx = np.where(x > 0, t * self.weight, 0.0)
        gb = wx * x * xb
        gq = wx * x * xq
        hbb = wx * (xb * xb + x * xbb)
        hbq = wx * (xb * xq + x * xbq)
        hqq = wx * (xq * xq + x * xqq)
        if not self.affine:
            # -log(2P - K(B)/xj)
            db = -K1 / self.xj
            inv = 1.0 / dom
            gb = gb - db * inv
            gq = gq - 2.0 * inv
            hbb = hbb + db * db * inv * inv + (K2 / self.xj) * inv
            hbq = hbq + 2.0 * db * inv * inv
            hqq = hqq + 4.0 * inv * inv
        budget = self._budget_slacks(Bv, Pv)
        full = np.zeros((2 * n, 2 * n))
        if self.b_free:
            s = Bv - self.b_lo
            st = self.b_tot - Bv.sum()
            gb = gb - 1.0 / s + 1.0 / st
            hbb = hbb + 1.0 / s ** 2
            full[0::2, 0::2] = 1.0 / st ** 2
        if self.p_free:
            s = Pv - self.p_lo
            st = self.p_tot - Pv.sum()
            gq = gq - 1.0 / s + 1.0 / st
            hqq = hqq + 1.0 / s ** 2
            full[1::2, 1::2] = 1.0 / st ** 2
        i = np.arange(0, 2 * n, 2)
        full[i, i] += hbb
        full[i + 1, i + 1] += hqq
        full[i, i + 1] += hbq
        full[i + 1, i] += hbq
        grad = np.empty(2 * n)
        grad[0::2], grad[1::2] = gb, gq
        frozen = ~self.free
        if frozen.any():
            grad[frozen] = 0.0
            full[frozen, :] = 0.0
            full[:, frozen] = 0.0
            full[frozen, frozen] = 1.0
        return self._phi(x, dom, budget, t), grad, full

    def slack_state(self, V):
        """Full slack layout ``B, P, f, y, x, m, q, z`` at a reduced point."""
        Bv, Pv = V[:, 0], V[:, 1]
        K, m = self._k(Bv)
        x, _ = self._x(K, Pv)
        y = -0.5 * x * x
        f = self.ey * (1.0 + y - self.yj)
        return np.column_stack([Bv, Pv, f, y, x, m, self.A / Bv, K / self.kappa])


def _interior_start(sp: _Subproblem, Bs, Ps):
    """Strictly feasible point of the reduced program near the anchor."""
    n = sp.n
    b_center = sp.b_lo + (sp.b_tot - n * sp.b_lo) / (n + 1)
    p_center = sp.p_lo + (sp.p_tot - n * sp.p_lo) / (n + 1)
    eps = 1e-3
    for _ in range(60):
        B0 = (1 - eps) * Bs + eps * b_center if sp.b_free else Bs.copy()
        P0 = (1 - eps) * Ps + eps * p_center if sp.p_free else Ps.copy()
        v0 = np.column_stack([B0, P0]).ravel()
        if np.isfinite(sp.value(v0, 1.0)):
            return v0
        eps *= 0.5
    raise AnchorError("could not find a strictly feasible point near the SCA anchor")


def _solve_active(prob: _Problem, Bs, Ps, idx, anchors, cfg: ResourceConfig,
                  tol: float | None = None):
    """Run the barrier method on the users in ``idx``; others stay fixed.

    Returns the new point as an ``(len(idx), 8)`` array in the slack
    layout ``B, P, f, y, x, m, q, z``.
    """
    others = np.setdiff1d(np.arange(prob.n), idx)
    b_tot = prob.b_tot - Bs[others].sum()
    p_tot = prob.p_tot - Ps[others].sum()
    k = len(idx)
    b_free = b_tot - k * prob.b_lo > 1e-12 * prob.b_tot
    p_free = p_tot - k * prob.p_lo > 1e-12 * prob.p_tot
    _, yj, xj, mj, _, _ = anchors
    sp = _Subproblem(prob, idx, Bs[idx], Ps[idx], mj, xj, yj, b_tot, p_tot,
                     b_free, p_free, cfg.xp_variant)
    v0 = _interior_start(sp, Bs[idx], Ps[idx])
    scale = max(float(sp.weight.sum()), 1e-12)
    t0 = sp.n_constraints / (cfg.barrier_start_gap * scale)
    res = barrier_minimize(sp.value, sp.derivs, v0, max(sp.n_constraints, 1), t0=t0,
                           mu=cfg.barrier_mu, tol=tol or cfg.barrier_tol, max_step=sp.max_step)
    return sp.slack_state(res.x.reshape(k, 2)), res


def solve_convex_subproblem(anchor: SlackState, allocation: Allocation, o, alphas,
                            budgets: Budgets, links: Sequence[UserLink],
                            config: ResourceConfig | None = None):
    """One SCA step: solve the linearized program around ``anchor``.

    ``anchor`` supplies the linearization points (y, m, x) and
    ``allocation`` the (B, P) anchor and starting point. Returns the new
    slack state and allocation; the allocation's ``objective`` is the true
    surrogate objective at the new point.
    """
    cfg = config or ResourceConfig()
    prob = _Problem(links, o, alphas, budgets)
    if not budgets.satisfied_by(allocation.bandwidth, allocation.power):
        raise AnchorError("anchor allocation violates the budget constraints")
    if not (math.isclose(anchor.bandwidth_ref, prob.b_ref) and math.isclose(anchor.power_ref, prob.p_ref)):
        raise AnchorError("anchor slack state uses different reference units")
    Bs = np.clip(allocation.bandwidth / prob.b_ref, prob.b_lo, None)
    Ps = np.clip(allocation.power / prob.p_ref, prob.p_lo, None)
    idx = np.arange(prob.n)
    anchors = (anchor.f, anchor.y, anchor.x, anchor.m, anchor.q, anchor.z)
    if not np.all(np.isfinite(np.concatenate(anchors))):
        raise AnchorError("anchor slack state is not finite")
    V, _ = _solve_active(prob, Bs, Ps, idx, anchors, cfg)
    state = SlackState(V[:, F], V[:, Y], V[:, X], V[:, M], V[:, Q], V[:, Z], prob.b_ref, prob.p_ref)
    Bn, Pn = V[:, B], V[:, P]
    alloc = Allocation(Bn * prob.b_ref, Pn * prob.p_ref, prob.objective(Bn, Pn))
    return state, alloc


def tight_slack_state(allocation: Allocation, o, alphas, budgets: Budgets,
                      links: Sequence[UserLink]) -> SlackState:
    """Slack state with every split constraint active at ``allocation``."""
    prob = _Problem(links, o, alphas, budgets)
    f, y, x, m, q, z = prob.tight(allocation.bandwidth / prob.b_ref, allocation.power / prob.p_ref)
    return SlackState(f, y, x, m, q, z, prob.b_ref, prob.p_ref)


# -- SCA driver ---------------------------------------------------------------

def resource_objective(links: Sequence[UserLink], o, alphas) -> float:
    """``sum_i alpha_i * exp(-arg_i**2 / 2)`` at each link's own (B, P)."""
    o = np.broadcast_to(np.asarray(o, dtype=float), (len(links),))
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (len(links),))
    return float(np.sum(surrogate_terms(
        np.array([l.d0 for l in links]), np.array([l.t0 for l in links]),
        np.array([l.n0 for l in links]), np.array([l.delta for l in links]),
        np.array([l.bandwidth for l in links]), np.array([l.power for l in links]),
        o, alphas)))


def solve_resource_allocation(o, alphas, budgets: Budgets, links: Sequence[UserLink],
                              config: ResourceConfig | None = None,
                              init: Allocation | None = None) -> Allocation:
    """SCA loop for the allocation subproblem at fixed ratios.

    SCA only finds a local optimum, so it is run from every start listed
    in ``config.starts`` (plus ``init`` when given) and the best result is
    returned:

    ``equal``
        the equal split;
    ``fair``
        shares that equalize every user's tail argument, so users that
        are hopeless under the equal split start out alive;
    ``concentrated``
        all spare budget with the single user who gains most from it.

    Within one run, iterates are accepted only while the true objective
    does not drop, and ``converged`` tells whether the tolerance was met.
    """
    cfg = config or ResourceConfig()
    prob = _Problem(links, o, alphas, budgets)
    starts = []
    if init is not None:
        if not budgets.satisfied_by(init.bandwidth, init.power):
            raise DomainError("initial allocation violates the budgets")
        starts.append((np.maximum(init.bandwidth / prob.b_ref, prob.b_lo),
                       np.maximum(init.power / prob.p_ref, prob.p_lo)))
    for name in cfg.starts:
        if name == "equal":
            starts.append((np.ones(prob.n), np.ones(prob.n)))
        elif prob.n > 1 and name == "fair":
            starts.append(_fair_split(prob))
        elif prob.n > 1 and name == "concentrated":
            starts.append(_concentrate(prob, None, None, -np.inf)[:2])
    if not starts:
        starts.append((np.ones(prob.n), np.ones(prob.n)))

    best = None
    seen = []
    for Bs, Ps in starts:
        if any(np.array_equal(Bs, b) and np.array_equal(Ps, p) for b, p in seen):
            continue
        seen.append((Bs, Ps))
        obj = prob.objective(Bs, Ps)
        if obj < cfg.dead_tol * max(float(prob.alpha.sum()), 1.0):
            Bs, Ps, obj = _concentrate(prob, Bs, Ps, obj)
        run = _sca(prob, Bs, Ps, cfg)
        if best is None or run.objective > best.objective:
            best = run
    best.bandwidth = best.bandwidth * prob.b_ref
    best.power = best.power * prob.p_ref
    return best


def _fair_split(prob: _Problem, iters: int = 60):
    """Equal-split-unit shares that give every user the same tail argument.

    User ``i`` gets the fraction ``s_i`` of the spare bandwidth and of the
    spare power; its argument is decreasing in ``s_i``. Nested bisection
    finds the common argument level at which the fractions sum to one.
    Zero-payload users get nothing.
    """
    n = prob.n
    b_free = prob.b_tot - n * prob.b_lo
    p_free = prob.p_tot - n * prob.p_lo

    def arg(share):
        Bs = prob.b_lo + share * b_free
        Ps = prob.p_lo + share * p_free
        with np.errstate(over="ignore"):
            return prob.kappa * Bs * np.expm1(LN2 * prob.A / Bs) / Ps

    def shares_for(level):
        lo = np.zeros(n)
        hi = np.ones(n)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = arg(mid) <= level
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return np.where(prob.A > 0, hi, 0.0)

    # bisection on log(level) so that the shares use the whole budget
    a_lo = float(np.log(max(np.min(arg(np.ones(n))), 1e-300)))
    a_hi = float(np.log(max(np.max(arg(np.zeros(n))), 1e-300)))
    if not a_hi > a_lo:
        return np.ones(n), np.ones(n)
    for _ in range(iters):
        mid = 0.5 * (a_lo + a_hi)
        if shares_for(np.exp(mid)).sum() > 1.0:
            a_lo = mid
        else:
            a_hi = mid
    share = shares_for(np.exp(a_hi))
    if share.sum() > 0:
        share = share / share.sum()
    return prob.b_lo + share * b_free, prob.p_lo + share * p_free


def _sca(prob: _Problem, Bs, Ps, cfg: ResourceConfig) -> Allocation:
    obj = prob.objective(Bs, Ps)
    history = [obj]
    converged = False
    it = 0
    zero_payload = prob.A <= 1e-12
    change = np.inf

    while it < cfg.max_sca_iters:
        terms = prob.terms(Bs, Ps)
        active = ~zero_payload & (terms >= cfg.dead_tol) & (prob.alpha > 0)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            converged = True
            break
        Bt, Pt = Bs.copy(), Ps.copy()
        Bt[~active] = prob.b_lo
        Pt[~active] = prob.p_lo
        anchors = prob.tight(Bt[idx], Pt[idx], idx)
        # early subproblems only need to be accurate relative to the progress
        # still being made; the last ones are solved to the full tolerance
        tol = min(max(1e-2 * change, cfg.barrier_tol), 1e-3)
        try:
            V, _ = _solve_active(prob, Bt, Pt, idx, anchors, cfg, tol)
        except AnchorError:
            break
        Bn, Pn = Bt.copy(), Pt.copy()
        Bn[idx] = V[:, B]
        Pn[idx] = V[:, P]
        new = prob.objective(Bn, Pn)
        it += 1
        if new < obj - cfg.monotone_slack:
            # only round-off can cause this; keep the previous iterate
            converged = True
            break
        change = new - obj
        Bs, Ps, obj = Bn, Pn, new
        history.append(obj)
        if change <= cfg.sca_tol * max(abs(obj), 1e-12):
            converged = True
            break

    return Allocation(Bs, Ps, obj, it, converged, history)


def _concentrate(prob: _Problem, Bs, Ps, obj):
    """Give all spare budget to the single user who benefits most.

    Returns the input unchanged unless that beats ``obj``. Also used when
    every term has underflowed at the start, where the objective is flat
    and SCA cannot move.
    """
    n = prob.n
    b_hi = prob.b_tot - (n - 1) * prob.b_lo
    p_hi = prob.p_tot - (n - 1) * prob.p_lo
    solo = prob.terms(np.full(n, b_hi), np.full(n, p_hi))
    k = int(np.argmax(solo))
    if solo[k] <= obj:
        return Bs, Ps, obj
    Bn = np.full(n, prob.b_lo)
    Pn = np.full(n, prob.p_lo)
    Bn[k], Pn[k] = b_hi, p_hi
    return Bn, Pn, prob.objective(Bn, Pn)


# -- brute-force oracle -------------------------------------------------------

def brute_force_allocation(o, alphas, budgets: Budgets, links: Sequence[UserLink],
                           grid_resolution: int = 200) -> Allocation:
    """Exhaustive grid search over full-budget splits (U <= 3).

    The surrogate is nondecreasing in every B_i and P_i, so an optimum
    spends both totals; the scan covers the budget simplices at
    ``grid_resolution`` points per free coordinate.
    """
    n = len(links)
    if n > 3:
        raise OracleScaleError(f"brute force supports at most 3 users, got {n}")
    prob = _Problem(links, o, alphas, budgets)
    if n == 1:
        Bs, Ps = np.array([budgets.b_max]), np.array([budgets.p_max])
        return Allocation(Bs, Ps, prob.objective(Bs / prob.b_ref, Ps / prob.p_ref))
    bw = _simplex_points(n, budgets.b_min, budgets.b_max, grid_resolution)
    pw = _simplex_points(n, budgets.p_min, budgets.p_max, grid_resolution)
    # separable objective: per-user terms on every (bandwidth, power) pair
    total = np.zeros((bw.shape[0], pw.shape[0]))
    for i in range(n):
        total += surrogate_terms(
                prob.d0[i], prob.t0[i], prob.n0[i], prob.delta[i],
                bw[:, i, None], pw[None, :, i], prob.o[i], prob.alpha[i])
    k = np.unravel_index(int(np.argmax(total)), total.shape)
    return Allocation(bw[k[0]], pw[k[1]], float(total[k]), iterations=bw.shape[0] * pw.shape[0])


def _simplex_points(n, lo, total, res):
    """Points with each coordinate >= lo summing to ``total``."""
    free = total - n * lo
    if n == 2:
        s = np.linspace(0.0, 1.0, res)
        first = lo + free * s
        return np.column_stack([first, total - first])
    s = np.linspace(0.0, 1.0, res)
    a, b = np.meshgrid(s, s, indexing="ij")
    keep = a + b <= 1.0 + 1e-15
    a, b = a[keep], b[keep]
    c = np.clip(1.0 - a - b, 0.0, None)
    return lo + free * np.column_stack([a, b, c])
