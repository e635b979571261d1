"""Budget sweeps, their CSV/SVG output, and the success-probability check."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..crra import SolverConfig, solve
from ..errors import ConfigError, DomainError, SemcrraError
from ..models import UserLink, success_probability, success_probability_mc
from .config import ScenarioConfig
from .scenario import accuracy_model, budgets_for, compression_grid, generate_users

PARAMS = ("bandwidth", "power")
_ALIASES = {"b_max": "bandwidth", "p_max": "power"}
_FIXED = ["swept_param", "value", "method", "avg_effective_accuracy", "surrogate",
          "iterations", "wall_ms"]
_TAIL = ["converged", "status"]


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    methods: tuple

    def __post_init__(self):
        param = _ALIASES.get(self.param, self.param)
        if param not in PARAMS:
            raise ConfigError(f"sweep parameter must be one of {', '.join(PARAMS)}, got {self.param!r}")
        object.__setattr__(self, "param", param)
        values = tuple(float(v) for v in self.values)
        if not values or any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep values must be nonempty and strictly increasing")
        object.__setattr__(self, "values", values)
        if not self.methods:
            raise ConfigError("no methods to run")
        object.__setattr__(self, "methods", tuple(m.upper() for m in self.methods))

    @classmethod
    def from_config(cls, config: ScenarioConfig, param: str, methods=None) -> "SweepSpec":
        param = _ALIASES.get(param, param)
        if param not in PARAMS:
            raise ConfigError(f"sweep parameter must be one of {', '.join(PARAMS)}, got {param!r}")
        return cls(param, tuple(config.sweep_values(param)), tuple(methods or config.methods))


@dataclass(frozen=True)
class SweepRow:
    """One (value, method) cell. Numeric fields are None when the solve failed."""

    param: str
    value: float
    method: str
    avg_exact: float | None
    surrogate: float | None
    iterations: int | None
    wall_ms: float | None
    bandwidth: tuple
    power: tuple
    o: tuple
    converged: bool | None = None
    status: str = "ok"


@dataclass(frozen=True)
class SweepResult:
    param: str
    n_users: int
    rows: tuple

    def curve(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        """(values, exact average accuracy) for the successful rows of one method."""
        pts = [(r.value, r.avg_exact) for r in self.rows if r.method == method and r.status == "ok"]
        if not pts:
            return np.empty(0), np.empty(0)
        x, y = zip(*pts)
        return np.array(x), np.array(y)

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))


def run_sweep(config: ScenarioConfig, spec: SweepSpec, solver: SolverConfig | None = None,
              timing: bool = True) -> SweepResult:
    """Solve every (value, method) pair; rows ordered by value, then method.

    A solver error at one point is recorded in that row's status and the
    sweep moves on. ``timing=False`` leaves wall_ms empty so repeated runs
    give identical output.
    """
    links = generate_users(config)
    model = accuracy_model(config)
    solver = solver or SolverConfig(grid=compression_grid(config), fixed_o=config.fixed_o)
    blank = (None,) * config.users
    rows = []
    for value in spec.values:
        try:
            budgets = budgets_for(config, spec.param, value)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        for method in spec.methods:
            start = time.perf_counter()
            try:
                sol = solve(method, links, model, budgets, solver)
            except SemcrraError as exc:
                rows.append(SweepRow(spec.param, value, method, None, None, None, None,
                                     blank, blank, blank, None, f"{type(exc).__name__}: {exc}"))
                continue
            wall = (time.perf_counter() - start) * 1e3 if timing else None
            rows.append(SweepRow(
                spec.param, value, method,
                sol.exact_objective / config.users, sol.surrogate_objective / config.users,
                sol.iterations, wall,
                tuple(map(float, sol.allocation.bandwidth)),
                tuple(map(float, sol.allocation.power)),
                tuple(map(float, sol.o)),
                bool(sol.converged)))
    return SweepResult(spec.param, config.users, tuple(rows))


def _header(n: int) -> list[str]:
    per_user = [f"{p}_{i}" for p in ("B", "P", "o") for i in range(1, n + 1)]
    return _FIXED + per_user + _TAIL


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _require_rows(result: SweepResult):
    if not result.rows:
        raise ValueError("sweep result has no rows; nothing to write")


def emit_csv(result: SweepResult, path) -> Path:
    """Write one line per row. Floats use repr, so reading back is exact."""
    _require_rows(result)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(result.n_users))
        for r in result.rows:
            fields = [r.param, r.value, r.method, r.avg_exact, r.surrogate, r.iterations,
                      r.wall_ms, *r.bandwidth, *r.power, *r.o, r.converged, r.status]
            w.writerow([_cell(v) for v in fields])
    return path


def read_csv(path) -> SweepResult:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:len(_FIXED)] != _FIXED or header[-2:] != _TAIL:
            raise ConfigError(f"{path}: not a sweep CSV")
        n = (len(header) - len(_FIXED) - len(_TAIL)) // 3
        if header != _header(n):
            raise ConfigError(f"{path}: malformed per-user columns")

        def num(s, kind=float):
            return None if s == "" else kind(s)

        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            k = len(_FIXED)
            per = [tuple(num(s) for s in rec[k + j * n:k + (j + 1) * n]) for j in range(3)]
            rows.append(SweepRow(rec[0], float(rec[1]), rec[2], num(rec[3]), num(rec[4]),
                                 num(rec[5], int), num(rec[6]), *per,
                                 num(rec[-2], lambda s: s == "True"), rec[-1]))
    param = rows[0].param if rows else ""
    return SweepResult(param, n, tuple(rows))


_AXIS = {
    "bandwidth": ("Maximum bandwidth (MHz)", 1e-6),
    "power": ("Maximum transmit power (W)", 1.0),
}


def emit_plot(result: SweepResult, path) -> Path:
    """Exact average effective accuracy against the swept budget, as SVG."""
    _require_rows(result)
    import matplotlib
    from matplotlib.figure import Figure

    label, scale = _AXIS[result.param]
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.add_subplot()
    for marker, method in zip("osd^vx*+", result.methods()):
        x, y = result.curve(method)
        ax.plot(x * scale, y, marker=marker, label=method)
    ax.set_xscale("log")
    ax.set_xlabel(label)
    ax.set_ylabel("Average effective accuracy")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    # fixed salt and no date keep the file identical between runs
    with matplotlib.rc_context({"svg.hashsalt": "semcrra"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


@dataclass(frozen=True)
class SuccessCheckRow:
    label: str
    a: float
    b: float
    delta: float
    o: float
    closed_form: float
    monte_carlo: float
    sigma: float
    gap: float
    passed: bool


@dataclass(frozen=True)
class SuccessCheckReport:
    rows: tuple
    samples: int
    seed: int

    @property
    def max_gap(self) -> float:
        return max(r.gap for r in self.rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def row_seed(seed: int, index: int) -> int:
    """Per-row seed derived from the run seed and the row index."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def check_success_probability(link: UserLink, o: float, samples: int, seed: int,
                              label: str = "") -> SuccessCheckRow:
    """Closed form vs Monte Carlo at one point.

    Passes when the gap is within 4 standard errors plus one count (1/n),
    the extra count covering p so close to 0 or 1 that sigma vanishes.
    """
    p = success_probability(link, o)
    mc = success_probability_mc(link, o, samples, seed)
    sigma = math.sqrt(p * (1.0 - p) / samples)
    gap = abs(mc - p)
    return SuccessCheckRow(label, link.a, link.b, link.delta, o, p, mc, sigma, gap,
                           gap <= 4.0 * sigma + 1.0 / samples)


def validate_success_probability(config: ScenarioConfig, samples: int = 1_000_000,
                                 seed: int = 0) -> SuccessCheckReport:
    """Compare closed form and Monte Carlo over a (user, B, P, o) grid.

    The grid takes the first and last scenario users at half, one and two
    times the equal split of each budget, and o in {0.25, 0.5, 0.75}. Two
    fixed rows are appended: a = b = delta = 1 at o = 0.5, and o = 1, where
    both estimates are exactly 1.
    """
    if samples < 10_000:
        raise DomainError(f"samples must be >= 1e4, got {samples}")
    links = generate_users(config)
    rows = []
    for i in sorted({0, len(links) - 1}):
        base = links[i]
        for sb in (0.5, 1.0, 2.0):
            for sp in (0.5, 1.0, 2.0):
                link = base.with_allocation(base.bandwidth * sb, base.power * sp)
                for o in (0.25, 0.5, 0.75):
                    rows.append((f"user {i + 1} B x{sb:g} P x{sp:g}", link, o))
    unit = UserLink(d0=1.0, t0=1.0, delta=1.0, n0=1.0, bandwidth=1.0, power=1.0)
    rows.append(("a=b=delta=1", unit, 0.5))
    rows.append(("o=1", links[0], 1.0))
    checked = tuple(check_success_probability(link, o, samples, row_seed(seed, k), label)
                    for k, (label, link, o) in enumerate(rows))
    return SuccessCheckReport(checked, samples, seed)
