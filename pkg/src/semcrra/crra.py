"""Alternating compression/allocation driver and the three reference schemes.

``crra_solve`` alternates two blocks until the surrogate objective stops
moving. Each block can only raise the objective: the ratio step is an
exact per-user enumeration, and the allocation step is warm-started at
the current allocation. The baselines fix one block:

FCR
    one fixed ratio for everyone, allocation optimized;
FRA
    equal-split allocation, ratios optimized;
MSR
    allocation that maximizes the sum rate on the mean channel gain,
    then ratios optimized for that allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .barrier import barrier_minimize
from .compression_opt import CompressionGrid, best_ratios
from .errors import DomainError, OracleScaleError
from .models import AccuracyModel, UserLink, success_terms, surrogate_terms
from .resource_opt import (
    Allocation,
    Budgets,
    ResourceConfig,
    _simplex_points,
    solve_resource_allocation,
)

METHODS = ("CRRA", "FCR", "FRA", "MSR")
# E|h| for h ~ N(0, delta^2), per unit delta
_FOLDED_MEAN = math.sqrt(2.0 / math.pi)


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iters: int = 30
    grid: CompressionGrid = field(default_factory=CompressionGrid)
    fixed_o: float = 0.5
    resource: ResourceConfig = field(default_factory=ResourceConfig)
    # probe one-user ratio jumps after convergence (see crra_solve)
    escape: bool = True
    probe_sca_iters: int = 3
    # line search along the last allocation move before each allocation step
    extrapolate: bool = True
    msr_tol: float = 1e-8
    msr_max_iters: int = 20000

    def __post_init__(self):
        if not 0.0 < self.fixed_o < 1.0:
            raise DomainError(f"fixed_o must lie in (0, 1), got {self.fixed_o}")
        if self.tol <= 0 or self.max_iters < 1:
            raise DomainError("tol must be > 0 and max_iters >= 1")


@dataclass
class Solution:
    allocation: Allocation
    o: np.ndarray
    surrogate_objective: float
    exact_objective: float
    iterations: int
    converged: bool
    method_tag: str
    history: list = field(default_factory=list, repr=False)
    # short screening solves spent on escape probes (CRRA only)
    probes: int = 0

    @property
    def n_users(self) -> int:
        return int(self.o.size)


def _model_list(models, n: int) -> list[AccuracyModel]:
    if isinstance(models, AccuracyModel):
        return [models] * n
    models = list(models)
    if len(models) != n:
        raise DomainError(f"expected {n} accuracy models, got {len(models)}")
    return models


def _columns(links: Sequence[UserLink]):
    return tuple(np.array([getattr(l, k) for l in links]) for k in ("d0", "t0", "n0", "delta"))


def _etas(models, o) -> np.ndarray:
    return np.array([m(float(v)) for m, v in zip(models, o)])


def evaluate(links: Sequence[UserLink], models, bandwidth, power, o) -> tuple[float, float]:
    """``(surrogate, exact)`` total effective accuracy of a full solution."""
    models = _model_list(models, len(links))
    d0, t0, n0, delta = _columns(links)
    o = np.asarray(o, dtype=float)
    eta = _etas(models, o)
    sur = surrogate_terms(d0, t0, n0, delta, bandwidth, power, o, eta)
    exact = success_terms(d0, t0, n0, delta, bandwidth, power, o) * eta
    return float(np.sum(sur)), float(np.sum(exact))


def _ratio_step(links, models, bandwidth, power, grid):
    d0, t0, n0, delta = _columns(links)
    o, values = best_ratios(d0, t0, n0, delta, bandwidth, power, models, grid)
    return o, float(np.sum(values))


def _solution(links, models, alloc: Allocation, o, iterations, converged, tag, history=()):
    sur, exact = evaluate(links, models, alloc.bandwidth, alloc.power, o)
    alloc.objective = sur
    return Solution(alloc, np.asarray(o, dtype=float), sur, exact, iterations,
                    converged, tag, list(history))


def _onto_budget(x, lo, total):
    # round-off guard: long steps can push the sum a hair over the total
    extra = np.maximum(x - lo, 0.0)
    room = total - lo * x.size
    if extra.sum() > room:
        extra *= room / extra.sum() * (1.0 - 1e-12)
    return lo + extra


def _extrapolate(links, models, budgets, cfg, last: Allocation, alloc: Allocation):
    """Longest improving doubling step along the last allocation move.

    The move keeps both totals, so only the per-user minimums limit it.
    Returns ``None`` unless some step beats ``alloc`` under best ratios.
    """
    db = alloc.bandwidth - last.bandwidth
    dp = alloc.power - last.power
    limit = math.inf
    for x, d, lo in ((alloc.bandwidth, db, budgets.b_min), (alloc.power, dp, budgets.p_min)):
        neg = d < 0
        if np.any(neg):
            limit = min(limit, float(np.min((x[neg] - lo) / -d[neg])))
    if not limit > 0 or (not np.any(db) and not np.any(dp)):
        return None
    _, base = _ratio_step(links, models, alloc.bandwidth, alloc.power, cfg.grid)
    best, best_val = None, base
    step = 1.0
    while True:
        s = min(step, 0.999 * limit)
        bw = _onto_budget(alloc.bandwidth + s * db, budgets.b_min, budgets.b_max)
        pw = _onto_budget(alloc.power + s * dp, budgets.p_min, budgets.p_max)
        _, val = _ratio_step(links, models, bw, pw, cfg.grid)
        if val <= best_val:
            break
        best, best_val = Allocation(bw, pw, val), val
        if s < step:
            break
        step *= 2.0
    return best


def _alternate(links, models, budgets, cfg, alloc, o, history, budget):
    """Block ascent from ``(alloc, o)`` for at most ``budget`` allocation steps.

    Returns the final pair, the number of steps taken and whether the
    objective settled.
    """
    warm = replace(cfg.resource, starts=())
    steps = 0
    last = None
    while steps < budget:
        jumped = None
        if cfg.extrapolate and last is not None:
            jumped = _extrapolate(links, models, budgets, cfg, last, alloc)
        start = alloc if jumped is None else jumped
        new_o, _ = _ratio_step(links, models, start.bandwidth, start.power, cfg.grid)
        if jumped is None and np.array_equal(new_o, o):
            # same ratios, same warm start: the allocation step is a fixed point
            return alloc, o, steps, True
        steps += 1
        o = new_o
        last = start
        alloc = solve_resource_allocation(o, _etas(models, o), budgets, links, warm, init=start)
        history.append(alloc.objective)
        if history[-1] - history[-2] < cfg.tol:
            return alloc, o, steps, True
    return alloc, o, steps, False


def crra_solve(links: Sequence[UserLink], models, budgets: Budgets,
               config: SolverConfig | None = None) -> Solution:
    """Alternate ratio enumeration and SCA allocation from the equal split.

    The first allocation step runs every configured SCA start; later ones
    continue from the previous allocation only, which keeps the sequence
    monotone. If ``max_iters`` alternations run out the last (and best)
    iterate is returned with ``converged=False``.

    Two additions keep the plain alternation from crawling or stalling:

    * with ``config.extrapolate`` each allocation step starts from the
      best point found by doubling the previous allocation move, judged
      by the objective under best ratios;
    * with ``config.escape`` a converged point is probed by pushing one
      user at a time to the largest ratio (going almost silent) and
      running a short SCA. If the next ratio step would beat the
      incumbent from there, the alternation resumes from that point.

    ``iterations`` counts allocation steps on the accepted path, capped by
    ``max_iters`` in total; ``probes`` counts the short screening solves.
    """
    cfg = config or SolverConfig()
    n = len(links)
    budgets.check(n)
    models = _model_list(models, n)
    bw, pw = budgets.equal_split(n)
    o, _ = _ratio_step(links, models, bw, pw, cfg.grid)
    alloc = solve_resource_allocation(o, _etas(models, o), budgets, links, cfg.resource)
    history = [alloc.objective]
    alloc, o, steps, converged = _alternate(links, models, budgets, cfg, alloc, o, history,
                                            cfg.max_iters - 1)
    steps += 1
    probes = 0
    top = cfg.grid.candidates[-1]
    screen = replace(cfg.resource, starts=(), max_sca_iters=cfg.probe_sca_iters)
    improved = cfg.escape and converged and n > 1
    while improved and steps < cfg.max_iters:
        improved = False
        # users holding the smallest shares are the likeliest to go silent
        for i in np.argsort(alloc.bandwidth / budgets.b_max + alloc.power / budgets.p_max,
                            kind="stable"):
            if o[i] >= top:
                continue
            trial_o = o.copy()
            trial_o[i] = top
            trial = solve_resource_allocation(trial_o, _etas(models, trial_o), budgets, links,
                                              screen, init=alloc)
            probes += 1
            # the next ratio step would already reach this value
            _, ahead = _ratio_step(links, models, trial.bandwidth, trial.power, cfg.grid)
            if ahead <= history[-1] + cfg.tol:
                continue
            history.append(ahead)
            alloc, o, more, converged = _alternate(links, models, budgets, cfg, trial,
                                                   trial_o, history, cfg.max_iters - steps)
            steps += more
            improved = converged
            break
    sol = _solution(links, models, alloc, o, steps, converged, "CRRA", history)
    sol.probes = probes
    return sol


def fcr_solve(links: Sequence[UserLink], models, budgets: Budgets,
              fixed_o=None, config: SolverConfig | None = None) -> Solution:
    """Optimize the allocation with every ratio pinned to ``fixed_o``."""
    cfg = config or SolverConfig()
    n = len(links)
    models = _model_list(models, n)
    o = np.broadcast_to(np.asarray(cfg.fixed_o if fixed_o is None else fixed_o, dtype=float),
                        (n,)).copy()
    if np.any((o <= 0) | (o >= 1)):
        raise DomainError("fixed ratios must lie in (0, 1)")
    alloc = solve_resource_allocation(o, _etas(models, o), budgets, links, cfg.resource)
    return _solution(links, models, alloc, o, alloc.iterations, alloc.converged, "FCR",
                     alloc.history)


def fra_solve(links: Sequence[UserLink], models, budgets: Budgets,
              config: SolverConfig | None = None) -> Solution:
    """Equal-split allocation with per-user best ratios."""
    cfg = config or SolverConfig()
    n = len(links)
    budgets.check(n)
    models = _model_list(models, n)
    bw, pw = budgets.equal_split(n)
    o, _ = _ratio_step(links, models, bw, pw, cfg.grid)
    return _solution(links, models, Allocation(bw, pw, 0.0), o, 1, True, "FRA")


def _project_simplex(v, lo, total):
    """Euclidean projection onto ``{x >= lo, sum(x) = total}``."""
    u = v - lo
    free = total - lo * v.size
    s = np.sort(u)[::-1]
    css = np.cumsum(s) - free
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(s - css / k > 0)[0][-1]
    return lo + np.maximum(u - css[rho] / (rho + 1), 0.0)


def sum_rate(links: Sequence[UserLink], bandwidth, power) -> float:
    """Sum of ``B log2(1 + hbar P / (N0 B))`` with ``hbar = E|h|``."""
    _, _, n0, delta = _columns(links)
    bw = np.asarray(bandwidth, dtype=float)
    snr = _FOLDED_MEAN * delta * np.asarray(power, dtype=float) / (n0 * bw)
    return float(np.sum(bw * np.log2(1.0 + snr)))


def _rate_derivs(B, P, c):
    """Sum rate (nats, equal-split units) with its gradient and Hessian blocks."""
    s = c * P / B
    rate = float(np.sum(B * np.log1p(s)))
    gb = np.log1p(s) - s / (1.0 + s)
    gp = c / (1.0 + s)
    # per-user Hessian is -[s, -c]^T [s, -c] / (B (1 + s)^2)
    h = 1.0 / (B * (1.0 + s) ** 2)
    return rate, gb, gp, -s * s * h, c * s * h, -c * c * h


def msr_allocation(links: Sequence[UserLink], budgets: Budgets,
                   tol: float = 1e-8, max_iters: int = 20000) -> Allocation:
    """Maximize the mean-channel sum rate over the budget simplices.

    Works in equal-split units. Plain projected gradient crawls along the
    nearly flat valleys between users with similar gains, so a log-barrier
    Newton solve supplies the starting point; projected gradient ascent
    then runs until the step ``x - proj(x + g)`` is below ``tol``.
    ``iterations`` counts the projected-gradient steps.
    """
    n = len(links)
    budgets.check(n)
    _, _, n0, delta = _columns(links)
    b_ref, p_ref = budgets.b_max / n, budgets.p_max / n
    b_lo, p_lo = budgets.b_min / b_ref, budgets.p_min / p_ref
    c = _FOLDED_MEAN * delta * p_ref / (n0 * b_ref)
    if n == 1:
        return Allocation(np.array([budgets.b_max]), np.array([budgets.p_max]),
                          b_ref * float(np.log2(1.0 + c[0])), 0, True)
    free = np.array([n - n * b_lo > 1e-12 * n, n - n * p_lo > 1e-12 * n])
    x = _barrier_sum_rate(c, b_lo, p_lo, free)

    def proj(v):
        B = _project_simplex(v[:n], b_lo, float(n)) if free[0] else v[:n]
        P = _project_simplex(v[n:], p_lo, float(n)) if free[1] else v[n:]
        return np.concatenate([B, P])

    def rate_grad(v):
        r, gb, gp, *_ = _rate_derivs(v[:n], v[n:], c)
        return r, np.concatenate([gb, gp])

    f, g = rate_grad(x)
    step = 1.0
    converged = False
    it = 0
    while True:
        if np.max(np.abs(x - proj(x + g))) <= tol:
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        d = proj(x + step * g) - x
        lam = 1.0
        while True:
            trial = x + lam * d
            ft, g_new = rate_grad(trial)
            if ft >= f + 1e-4 * lam * float(g @ d) or lam < 1e-14:
                break
            lam *= 0.5
        s_k, y_k = trial - x, g_new - g
        sy = -float(s_k @ y_k)
        step = min(max(float(s_k @ s_k) / sy, 1e-10), 1e10) if sy > 1e-300 else 1.0
        x, f, g = trial, ft, g_new
    return Allocation(x[:n] * b_ref, x[n:] * p_ref, f * b_ref / math.log(2.0), it, converged)


def _barrier_sum_rate(c, b_lo, p_lo, free):
    n = c.size
    blocks = [(k, lo) for k, lo in ((0, b_lo), (1, p_lo)) if free[k]]
    n_con = (n + 1) * len(blocks)

    def slacks(v):
        parts = [np.append(v[k * n:(k + 1) * n] - lo, n - v[k * n:(k + 1) * n].sum())
                 for k, lo in blocks]
        return np.concatenate(parts) if parts else np.ones(1)

    def value(v, t):
        s = slacks(v)
        if not s.min() > 0:
            return np.inf
        return -t * _rate_derivs(v[:n], v[n:], c)[0] - float(np.log(s).sum())

    def derivs(v, t):
        r, gb, gp, hbb, hbp, hpp = _rate_derivs(v[:n], v[n:], c)
        grad = -t * np.concatenate([gb, gp])
        H = np.zeros((2 * n, 2 * n))
        i = np.arange(n)
        H[i, i] = -t * hbb
        H[i + n, i + n] = -t * hpp
        H[i, i + n] = H[i + n, i] = -t * hbp
        for k, lo in blocks:
            blk = slice(k * n, (k + 1) * n)
            low = v[blk] - lo
            top = n - v[blk].sum()
            grad[blk] += -1.0 / low + 1.0 / top
            H[blk, blk] += np.diag(1.0 / low ** 2) + 1.0 / top ** 2
        for k in range(2):
            if not free[k]:
                blk = slice(k * n, (k + 1) * n)
                grad[blk] = 0.0
                H[blk, :] = 0.0
                H[:, blk] = 0.0
                H[blk, blk] = np.eye(n)
        s = slacks(v)
        return -t * r - float(np.log(s).sum()), grad, H

    def max_step(v, dv):
        out = np.inf
        for k, lo in blocks:
            blk = slice(k * n, (k + 1) * n)
            sl = np.append(v[blk] - lo, n - v[blk].sum())
            rt = np.append(-dv[blk], dv[blk].sum())
            hit = rt > 0
            if hit.any():
                out = min(out, float(np.min(sl[hit] / rt[hit])))
        return out

    x0 = np.ones(2 * n)
    for k, lo in blocks:
        x0[k * n:(k + 1) * n] = lo + (n - n * lo) / (n + 1)
    scale = max(_rate_derivs(x0[:n], x0[n:], c)[0], 1e-12)
    if n_con == 0:
        return x0
    res = barrier_minimize(value, derivs, x0, n_con, t0=n_con / (1e-2 * scale),
                           tol=1e-9 * scale, max_step=max_step)
    return res.x


def msr_solve(links: Sequence[UserLink], models, budgets: Budgets,
              config: SolverConfig | None = None) -> Solution:
    """Sum-rate allocation followed by per-user best ratios."""
    cfg = config or SolverConfig()
    models = _model_list(models, len(links))
    alloc = msr_allocation(links, budgets, cfg.msr_tol, cfg.msr_max_iters)
    o, _ = _ratio_step(links, models, alloc.bandwidth, alloc.power, cfg.grid)
    return _solution(links, models, alloc, o, alloc.iterations, alloc.converged, "MSR")


def solve(method: str, links: Sequence[UserLink], models, budgets: Budgets,
          config: SolverConfig | None = None) -> Solution:
    """Dispatch on a method tag (case-insensitive)."""
    tag = method.upper()
    if tag == "CRRA":
        return crra_solve(links, models, budgets, config)
    if tag == "FCR":
        return fcr_solve(links, models, budgets, config=config)
    if tag == "FRA":
        return fra_solve(links, models, budgets, config)
    if tag == "MSR":
        return msr_solve(links, models, budgets, config)
    raise DomainError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def brute_force_joint(links: Sequence[UserLink], models, budgets: Budgets,
                      grid: CompressionGrid | None = None,
                      grid_resolution: int = 200) -> Solution:
    """Exhaustive search over full-budget (B, P) splits and the ratio grid.

    With the allocation fixed the users decouple, so each grid cell only
    needs every user's own best ratio. Limited to three users.
    """
    n = len(links)
    if n > 3:
        raise OracleScaleError(f"joint brute force supports at most 3 users, got {n}")
    budgets.check(n)
    models = _model_list(models, n)
    cand = (grid or CompressionGrid()).candidates
    d0, t0, n0, delta = _columns(links)
    if n == 1:
        bw, pw = np.array([[budgets.b_max]]), np.array([[budgets.p_max]])
    else:
        bw = _simplex_points(n, budgets.b_min, budgets.b_max, grid_resolution)
        pw = _simplex_points(n, budgets.p_min, budgets.p_max, grid_resolution)
    total = np.zeros((bw.shape[0], pw.shape[0]))
    best_k = []
    for i in range(n):
        terms = surrogate_terms(d0[i], t0[i], n0[i], delta[i], bw[:, i, None, None],
                                pw[None, :, i, None], cand, models[i](cand))
        best_k.append(np.argmax(terms, axis=2))
        total += np.max(terms, axis=2)
    kb, kp = np.unravel_index(int(np.argmax(total)), total.shape)
    o = np.array([cand[k[kb, kp]] for k in best_k])
    alloc = Allocation(bw[kb], pw[kp], float(total[kb, kp]), bw.shape[0] * pw.shape[0])
    return _solution(links, models, alloc, o, alloc.iterations, True, "ORACLE")
