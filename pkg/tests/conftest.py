import numpy as np
import pytest

from mavplan.dynamics import VehicleParams
from mavplan.spatial_map import WorldSpec, build_instance_map, random_world


@pytest.fixture
def params():
    return VehicleParams()


@pytest.fixture(scope="session")
def world50():
    return random_world(WorldSpec(seed=7))


@pytest.fixture(scope="session")
def world50_map(world50):
    return build_instance_map(world50, np.full(3, 10.0), np.inf)


def random_state(rng, scale=1.0):
    x = np.empty(12)
    x[0:3] = rng.uniform(-5, 5, 3)
    x[3:6] = rng.uniform(-2, 2, 3) * scale
    axis = rng.normal(size=3)
    x[6:9] = axis / np.linalg.norm(axis) * rng.uniform(0.05, 1.2)
    x[9:12] = rng.uniform(-1, 1, 3) * scale
    return x


def random_control(rng, params):
    return params.hover_thrust / 4 * rng.uniform(0.6, 1.4, 4)


ACCEPTANCE_LINES: list = []


def report(criterion: str, ok: bool, detail: str) -> None:
    """Record one acceptance line; printed in the terminal summary and asserted by the caller."""
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0].rstrip("abcd"))):
            terminalreporter.write_line(line)
