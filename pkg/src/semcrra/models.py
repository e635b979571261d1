"""Closed-form link and task-performance formulas.

Everything here is pure. Scalar entry points take a :class:`UserLink`;
the ``*_terms`` helpers take plain arrays so the optimizers and oracles
can evaluate whole grids at once.

Compression ratio convention: ``o`` is the fraction of semantic features
removed, so a user transmits ``d0 * (1 - o)`` bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from .errors import DomainError, InvalidModelError

LN2 = math.log(2.0)
_RANGE_GRID = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True)
class AccuracyModel:
    """Double-exponential accuracy curve ``b1*exp(b2*o) + b3*exp(b4*o)``.

    Construction checks that the curve stays inside [0, 1] on a 1e-3 grid
    over o in [0, 1]. Pass ``check=False`` to build a model that skips the
    range check (the fitter does this, then reports the violation).
    """

    beta1: float
    beta2: float
    beta3: float
    beta4: float
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "beta4"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidModelError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.check and not self.in_range():
            lo, hi = self.extremes()
            raise InvalidModelError(
                f"accuracy curve leaves [0, 1] on the grid (min {lo:.6g}, max {hi:.6g})")

    @classmethod
    def from_beta(cls, beta, check: bool = True) -> "AccuracyModel":
        b = [float(v) for v in beta]
        if len(b) != 4:
            raise InvalidModelError(f"expected 4 curve parameters, got {len(b)}")
        return cls(*b, check=check)

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta3, self.beta4])

    def __call__(self, o):
        o = np.asarray(o, dtype=float)
        out = self.beta1 * np.exp(self.beta2 * o) + self.beta3 * np.exp(self.beta4 * o)
        return float(out) if out.ndim == 0 else out

    def extremes(self) -> tuple[float, float]:
        values = self(_RANGE_GRID)
        return float(values.min()), float(values.max())

    def in_range(self) -> bool:
        values = self(_RANGE_GRID)
        return bool(np.all(np.isfinite(values)) and values.min() >= 0.0 and values.max() <= 1.0)


@dataclass(frozen=True)
class UserLink:
    """Physical parameters of one uplink plus its current bandwidth/power.

    Units: ``d0`` bits, ``t0`` seconds, ``n0`` W/Hz, ``bandwidth`` Hz,
    ``power`` W. ``delta`` is the standard deviation of the real Gaussian
    channel gain ``h ~ N(0, delta**2)``.
    """

    d0: float
    t0: float
    delta: float
    n0: float
    bandwidth: float
    power: float

    def __post_init__(self):
        for name in ("d0", "t0", "delta", "n0", "bandwidth", "power"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"UserLink.{name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)

    def with_allocation(self, bandwidth: float, power: float) -> "UserLink":
        return replace(self, bandwidth=bandwidth, power=power)

    @property
    def a(self) -> float:
        """Bits per Hz needed to meet the deadline with no compression."""
        return self.d0 / (self.bandwidth * self.t0)

    @property
    def b(self) -> float:
        """SNR per unit channel gain, ``P / (N0 B)``."""
        return self.power / (self.n0 * self.bandwidth)


def _check_ratio(o, closed: bool = True) -> None:
    arr = np.asarray(o, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("compression ratio must be finite")
    if closed:
        bad = np.any((arr < 0.0) | (arr > 1.0))
    else:
        bad = np.any((arr <= 0.0) | (arr >= 1.0))
    if bad:
        interval = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"compression ratio must lie in {interval}, got {o}")


def q_function(x):
    """Standard normal tail probability ``P(Z > x)``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q_function needs a finite argument")
    out = 0.5 * erfc(arr / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_bound(x):
    """Chernoff-type upper bound ``0.5 * exp(-x**2 / 2)``, valid for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise DomainError("q_bound is only valid for x >= 0")
    out = 0.5 * np.exp(-0.5 * arr * arr)
    return float(out) if out.ndim == 0 else out


def transmission_rate(link: UserLink, h: float) -> float:
    if h < 0:
        raise DomainError("channel gain must be non-negative")
    return link.bandwidth * math.log2(1.0 + h * link.power / (link.n0 * link.bandwidth))


def transmission_delay(link: UserLink, o: float, h: float) -> float:
    _check_ratio(o)
    if not h > 0:
        raise DomainError("delay is undefined for a non-positive channel gain")
    return link.d0 * (1.0 - o) / transmission_rate(link, h)


def tail_argument_terms(d0, t0, n0, delta, bandwidth, power, o):
    """Vectorized tail argument ``N0 B (2**(d0(1-o)/(B t0)) - 1) / (delta P)``.

    Overflow of the exponential maps to ``inf`` (the user is cut off).
    """
    with np.errstate(over="ignore", invalid="ignore"):
        expo = LN2 * d0 * (1.0 - np.asarray(o, dtype=float)) / (bandwidth * t0)
        return n0 * bandwidth * np.expm1(expo) / (delta * power)


def surrogate_terms(d0, t0, n0, delta, bandwidth, power, o, eta):
    """Vectorized ``exp(-arg**2 / 2) * eta``; the optimizer's per-user objective."""
    arg = tail_argument_terms(d0, t0, n0, delta, bandwidth, power, o)
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * arg * arg) * eta


def success_terms(d0, t0, n0, delta, bandwidth, power, o):
    arg = tail_argument_terms(d0, t0, n0, delta, bandwidth, power, o)
    arg = np.where(np.isfinite(arg), arg, 1e300)
    return np.clip(erfc(arg / math.sqrt(2.0)), 0.0, 1.0)


def tail_argument(link: UserLink, o: float) -> float:
    _check_ratio(o)
    return float(tail_argument_terms(link.d0, link.t0, link.n0, link.delta,
                                     link.bandwidth, link.power, o))


def success_probability(link: UserLink, o: float) -> float:
    """Probability that the compressed payload meets the deadline: ``2 Q(arg)``."""
    _check_ratio(o)
    return float(success_terms(link.d0, link.t0, link.n0, link.delta,
                               link.bandwidth, link.power, o))


def success_probability_mc(link: UserLink, o: float, samples: int, seed: int,
                           chunk: int = 1_000_000) -> float:
    """Monte-Carlo estimate of the deadline success probability.

    Draws ``h ~ N(0, delta**2)`` and counts draws with ``|h|`` at or above the
    SNR multiplier needed to deliver ``d0 (1 - o)`` bits within ``t0``.
    Independent of the closed form: no Q-function is involved.
    """
    _check_ratio(o)
    if samples < 1:
        raise DomainError("samples must be >= 1")
    threshold = math.expm1(LN2 * link.a * (1.0 - o)) / link.b
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = int(samples)
    while remaining > 0:
        n = min(chunk, remaining)
        h = rng.normal(0.0, link.delta, size=n)
        hits += int(np.count_nonzero(np.abs(h) >= threshold))
        remaining -= n
    return hits / samples


def accuracy(model: AccuracyModel, o) -> float:
    _check_ratio(o)
    return model(o)


def effective_accuracy(link: UserLink, o: float, model: AccuracyModel) -> float:
    """Success probability times post-compression accuracy."""
    return success_probability(link, o) * accuracy(model, o)


def effective_accuracy_bound(link: UserLink, o: float, model: AccuracyModel) -> float:
    """Upper bound on :func:`effective_accuracy` from ``Q(x) <= exp(-x^2/2)/2``."""
    _check_ratio(o)
    return float(surrogate_terms(link.d0, link.t0, link.n0, link.delta,
                                 link.bandwidth, link.power, o, model(o)))
