import math

import pytest
from hypothesis import HealthCheck, settings

from dampspec.grid import build_grid, sample_coefficients

settings.register_profile(
    "default",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def interval_grid():
    """(0, pi) with 199 interior points, h = pi/200."""
    return build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": 199}]})


@pytest.fixture(scope="session")
def small_interval():
    return build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": 49}]})


@pytest.fixture(scope="session")
def anti_damped(interval_grid):
    """a = -1, b = 0 on (0, pi)."""
    return sample_coefficients(interval_grid, "-1", "0")


def discrete_dirichlet(n, m, length=math.pi):
    """Eigenvalue n of the 3-point Dirichlet Laplacian with m interior points."""
    h = length / (m + 1)
    return 4.0 / h**2 * math.sin(n * math.pi * h / (2 * length)) ** 2


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", None) != "call":
                continue
            for name, value in getattr(rep, "user_properties", ()):
                if name == "acceptance":
                    lines.append((value[0], f"{value[0]} {'PASS' if rep.passed else 'FAIL'}  {value[1]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
