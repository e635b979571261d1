"""Per-user compression-ratio choice at fixed bandwidth and power.

With resources fixed the users decouple, and each one maximizes
``exp(-arg(o)**2 / 2) * eta(o)`` over the feature-map grid
``{k / N : k = 1..N-1}`` by plain enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .models import AccuracyModel, UserLink, _check_ratio, effective_accuracy_bound, surrogate_terms

DEFAULT_FEATURES = 64
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CompressionGrid:
    """Admissible ratios when ``n_features`` feature maps can be dropped one by one."""

    n_features: int = DEFAULT_FEATURES

    def __post_init__(self):
        if int(self.n_features) != self.n_features or self.n_features < 2:
            raise DomainError("n_features must be an integer >= 2")

    @property
    def candidates(self) -> np.ndarray:
        return np.arange(1, self.n_features) / self.n_features

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_features


@dataclass(frozen=True)
class CompressionChoice:
    o_star: float
    value: float


def subproblem_objective(link: UserLink, o: float, model: AccuracyModel) -> float:
    """Surrogate effective accuracy of one user as a function of its ratio."""
    _check_ratio(o, closed=False)
    return effective_accuracy_bound(link, o, model)


def _sorted_candidates(grid, candidates) -> np.ndarray:
    if candidates is None:
        return (grid or CompressionGrid()).candidates
    c = np.unique(np.asarray(candidates, dtype=float))
    if c.size == 0:
        raise DomainError("candidate set is empty")
    _check_ratio(c, closed=False)
    return c


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-10) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def optimize_compression(link: UserLink, model: AccuracyModel,
                         grid: CompressionGrid | None = None, *,
                         candidates: Sequence[float] | None = None,
                         refine: bool = False) -> CompressionChoice:
    """Best grid ratio for one user; ties go to the smaller ratio.

    ``refine=True`` runs a golden-section search on the cells adjacent to
    the grid optimum (continuous ratios, for sensitivity studies only).
    """
    cand = _sorted_candidates(grid, candidates)
    values = surrogate_terms(link.d0, link.t0, link.n0, link.delta,
                             link.bandwidth, link.power, cand, model(cand))
    k = int(np.argmax(values))
    o_star, best = float(cand[k]), float(values[k])
    if refine:
        lo = cand[k - 1] if k > 0 else 0.5 * cand[0]
        hi = cand[k + 1] if k + 1 < cand.size else 0.5 * (1.0 + cand[-1])
        o_ref = _golden_max(lambda o: subproblem_objective(link, o, model), float(lo), float(hi))
        v_ref = subproblem_objective(link, o_ref, model)
        if v_ref > best:
            o_star, best = o_ref, v_ref
    return CompressionChoice(o_star, best)


def best_ratios(d0, t0, n0, delta, bandwidth, power, models,
                grid: CompressionGrid | None = None):
    """Vectorized enumeration for all users at once.

    ``delta``, ``bandwidth``, ``power`` (and optionally ``d0``, ``t0``) are
    per-user arrays; ``models`` is one model or one per user. Returns the
    chosen ratios and their surrogate values.
    """
    cand = (grid or CompressionGrid()).candidates
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    n_users = delta.size
    if isinstance(models, AccuracyModel):
        eta = np.broadcast_to(models(cand), (n_users, cand.size))
    else:
        eta = np.stack([m(cand) for m in models])
    col = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n_users,))[:, None]  # noqa: E731
    values = surrogate_terms(col(d0), col(t0), col(n0), col(delta), col(bandwidth),
                             col(power), cand[None, :], eta)
    k = np.argmax(values, axis=1)
    rows = np.arange(n_users)
    return cand[k], values[rows, k]
