"""Least-squares fitting of the double-exponential accuracy curve.

The fit is gradient descent on the mean squared residual with an Armijo
backtracking line search, so every accepted iterate lowers the objective.
The gradient is scaled by the diagonal of the Gauss-Newton matrix (the
four parameters live on very different scales). ``step_rule="bb"`` seeds
each line search with a Barzilai-Borwein step; ``"armijo"`` doubles the
last accepted step instead.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, UnderdeterminedFitError
from .models import AccuracyModel


@dataclass(frozen=True)
class AccuracySample:
    o: float
    acc: float

    def __post_init__(self):
        for name in ("o", "acc"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"sample {name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)


@dataclass
class FitConfig:
    max_iters: int = 20000
    step_rule: str = "bb"
    precondition: bool = True
    tol_grad: float = 1e-8
    tol_rel: float = 1e-10
    armijo_c: float = 1e-4
    min_step: float = 1e-20
    multistart: bool = False
    n_starts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.step_rule not in ("bb", "armijo"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class FitReport:
    model: AccuracyModel
    rmse: float
    iterations: int
    converged: bool
    grad_norm: float
    stop_reason: str
    history: list = field(default_factory=list, repr=False)
    in_range: bool = field(init=False)

    def __post_init__(self):
        self.in_range = self.model.in_range()


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, np.ndarray):
        arr = np.asarray(samples, dtype=float).reshape(-1, 2)
        return arr[:, 0].copy(), arr[:, 1].copy()
    pts = [s if isinstance(s, AccuracySample) else AccuracySample(*s) for s in samples]
    return (np.array([p.o for p in pts], dtype=float),
            np.array([p.acc for p in pts], dtype=float))


def _curve_and_jacobian(beta: np.ndarray, o: np.ndarray):
    with np.errstate(over="ignore"):
        e2 = np.exp(beta[1] * o)
        e4 = np.exp(beta[3] * o)
    eta = beta[0] * e2 + beta[2] * e4
    jac = np.stack([e2, beta[0] * o * e2, e4, beta[2] * o * e4], axis=1)
    return eta, jac


def _loss_grad(beta, o, acc):
    eta, jac = _curve_and_jacobian(beta, o)
    r = eta - acc
    return float(np.mean(r * r)), (2.0 / o.size) * (jac.T @ r), jac


def _loss(beta, o, acc):
    with np.errstate(over="ignore", invalid="ignore"):
        r = beta[0] * np.exp(beta[1] * o) + beta[2] * np.exp(beta[3] * o) - acc
        return float(np.mean(r * r))


def rmse(model: AccuracyModel, samples) -> float:
    """Root-mean-square residual of ``model`` over ``samples``."""
    o, acc = _as_arrays(samples)
    if o.size == 0:
        raise DomainError("rmse needs at least one sample")
    return math.sqrt(_loss(model.beta, o, acc))


def fit_gradient(model: AccuracyModel, samples) -> np.ndarray:
    """Analytic gradient of the mean squared residual w.r.t. (beta1..beta4)."""
    o, acc = _as_arrays(samples)
    if o.size == 0:
        raise DomainError("gradient needs at least one sample")
    return _loss_grad(model.beta, o, acc)[1]


def default_init(samples) -> AccuracyModel:
    _, acc = _as_arrays(samples)
    lo, hi = float(acc.min()), float(acc.max())
    return AccuracyModel(hi - lo, -1.0, lo, -0.01, check=False)


_WINDOW = 10


def _descend(beta, o, acc, cfg: FitConfig):
    loss, grad, jac = _loss_grad(beta, o, acc)
    history = [loss]
    step = 1.0
    prev = None
    it = 0
    while it < cfg.max_iters:
        if float(np.max(np.abs(grad))) < cfg.tol_grad:
            return beta, history, grad, it, "gradient"
        # diagonal of the Gauss-Newton matrix; keeps the step scale-free
        diag = np.full(4, 1.0)
        if cfg.precondition:
            diag = np.maximum(2.0 * np.mean(jac * jac, axis=0), 1e-12)
        direction = grad / diag
        if cfg.step_rule == "bb" and prev is not None:
            s = beta - prev[0]
            y = grad - prev[1]
            sy = float(s @ y)
            step = float(s @ (diag * s)) / sy if sy > 0 else 2.0 * step
        elif prev is not None:
            step = 2.0 * step
        slope = float(grad @ direction)
        while True:
            trial = beta - step * direction
            trial_loss = _loss(trial, o, acc)
            if math.isfinite(trial_loss) and trial_loss <= loss - cfg.armijo_c * step * slope:
                break
            step *= 0.5
            if step < cfg.min_step:
                return beta, history, grad, it, "line_search_failed"
        prev = (beta, grad)
        beta = trial
        loss, grad, jac = _loss_grad(beta, o, acc)
        history.append(loss)
        it += 1
        # one slow step in a flat valley is not convergence; use a window
        if it >= _WINDOW and history[-1 - _WINDOW] - loss <= _WINDOW * cfg.tol_rel * loss:
            return beta, history, grad, it, "objective"
    return beta, history, grad, it, "max_iters"


def _perturbed_inits(beta0: np.ndarray, cfg: FitConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    starts = [beta0.copy()]
    amp = np.maximum(np.abs(beta0[[0, 2]]), 0.1)
    for _ in range(cfg.n_starts - 1):
        b = beta0.copy()
        b[[0, 2]] += amp * rng.normal(0.0, 0.5, size=2)
        # exponents get an absolute spread so growing tails are reachable
        b[[1, 3]] += rng.normal(0.0, 4.0, size=2)
        starts.append(b)
    return starts


def fit_accuracy_model(samples, init: AccuracyModel | None = None,
                       config: FitConfig | None = None) -> FitReport:
    """Fit ``b1*exp(b2*o) + b3*exp(b4*o)`` to (o, accuracy) samples.

    Needs at least four distinct abscissae. The returned model is not range
    checked; ``report.in_range`` says whether it stays within [0, 1].
    """
    cfg = config or FitConfig()
    o, acc = _as_arrays(samples)
    if np.unique(o).size < 4:
        raise UnderdeterminedFitError(
            f"need >= 4 distinct compression ratios, got {np.unique(o).size}")
    if init is None:
        init = default_init(samples)
    starts = _perturbed_inits(init.beta, cfg) if cfg.multistart else [init.beta]

    best = None
    for beta0 in starts:
        run = _descend(np.array(beta0, dtype=float), o, acc, cfg)
        # strict '<' keeps the lowest restart index on ties
        if best is None or run[1][-1] < best[1][-1]:
            best = run
    beta, history, grad, iters, reason = best
    gnorm = float(np.max(np.abs(grad)))
    return FitReport(
        model=AccuracyModel.from_beta(beta, check=False),
        rmse=math.sqrt(history[-1]),
        iterations=iters,
        converged=reason in ("gradient", "objective"),
        grad_norm=gnorm,
        stop_reason=reason,
        history=history,
    )


_SPLIT = re.compile(r"[,;\s]+")


def read_samples(path) -> list[AccuracySample]:
    """Read a two-column (o, accuracy) text file; '#' starts a comment."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            out.append(AccuracySample(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def write_samples(samples, path) -> None:
    o, acc = _as_arrays(samples)
    lines = ["# o, accuracy"] + [f"{float(a)!r}, {float(b)!r}" for a, b in zip(o, acc)]
    Path(path).write_text("\n".join(lines) + "\n")
