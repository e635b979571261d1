"""Turn a ScenarioConfig into links, an accuracy model and budgets."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..compression_opt import CompressionGrid
from ..errors import ConfigError, InvalidModelError
from ..fitting import FitConfig, fit_accuracy_model, read_samples
from ..models import AccuracyModel, UserLink
from ..resource_opt import Budgets
from .config import ScenarioConfig


def positions(config: ScenarioConfig) -> np.ndarray:
    """Seeded uniform placement in the square, server at the origin; shape (U, 2)."""
    half = config.side / 2.0
    return np.random.default_rng(config.seed).uniform(-half, half, (config.users, 2))


def channel_deltas(config: ScenarioConfig) -> np.ndarray:
    spec = config.delta
    if spec.kind == "constant":
        return np.full(config.users, float(spec.values[0]))
    if spec.kind == "list":
        return np.asarray(spec.values, dtype=float)
    xy = positions(config)
    d = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), spec.min_distance)
    return spec.c * d ** (-spec.kappa / 2.0)


def generate_users(config: ScenarioConfig) -> list[UserLink]:
    """One link per user, each starting at the equal split of the budgets."""
    b = config.budgets
    d0 = config.per_user(config.d0, "d0")
    t0 = config.per_user(config.t0, "t0")
    deltas = channel_deltas(config)
    bw, pw = b.b_max / config.users, b.p_max / config.users
    return [UserLink(d0[i], t0[i], deltas[i], config.n0, bw, pw) for i in range(config.users)]


def accuracy_model(config: ScenarioConfig) -> AccuracyModel:
    """The literal curve, or a fit to the samples file when one is named."""
    if config.samples is None:
        try:
            return AccuracyModel.from_beta(config.beta)
        except InvalidModelError as exc:
            raise ConfigError(f"[accuracy] beta: {exc}") from None
    try:
        samples = read_samples(config.samples)
    except OSError as exc:
        raise ConfigError(f"cannot read samples {config.samples}: {exc.strerror}") from None
    # restarts matter: a single descent can stall in the beta2 == beta4 valley
    report = fit_accuracy_model(samples, config=FitConfig(multistart=True))
    if not report.in_range:
        raise ConfigError(f"{config.samples}: fitted accuracy curve leaves [0, 1]")
    return AccuracyModel.from_beta(report.model.beta)


def budgets_for(config: ScenarioConfig, param: str | None = None,
                value: float | None = None) -> Budgets:
    """Scenario budgets, with one total replaced when a sweep value is given."""
    b = config.budgets
    if param is None:
        return b
    if param == "bandwidth":
        return replace(b, b_max=value)
    if param == "power":
        return replace(b, p_max=value)
    raise ConfigError(f"unknown sweep parameter {param!r}")


def compression_grid(config: ScenarioConfig) -> CompressionGrid:
    return CompressionGrid(config.features)
