import time
from dataclasses import dataclass

import pytest

from semcrra.harness import ScenarioConfig, SweepSpec, emit_csv, emit_plot, run_sweep

# lines recorded by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@dataclass
class DefaultSweeps:
    bandwidth: object
    power: object
    seconds: float
    files: dict


@pytest.fixture(scope="session")
def default_sweeps(tmp_path_factory) -> DefaultSweeps:
    """Both default sweeps, timed end to end including the written files."""
    out = tmp_path_factory.mktemp("default_sweeps")
    config = ScenarioConfig()
    start = time.perf_counter()
    results, files = {}, {}
    for param in ("bandwidth", "power"):
        res = run_sweep(config, SweepSpec.from_config(config, param))
        files[param] = (emit_csv(res, out / f"{param}.csv"), emit_plot(res, out / f"{param}.svg"))
        results[param] = res
    seconds = time.perf_counter() - start
    return DefaultSweeps(results["bandwidth"], results["power"], seconds, files)
