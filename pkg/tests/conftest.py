import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def random_triangle(rng, scale=50.0, min_area_frac=0.05):
    """Random leading triangle at a common altitude, not too thin."""
    while True:
        xy = rng.uniform(-scale, scale, size=(3, 2))
        e1, e2 = xy[1] - xy[0], xy[2] - xy[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        longest = max(np.linalg.norm(e1), np.linalg.norm(e2), np.linalg.norm(xy[2] - xy[1]))
        if area > min_area_frac * longest**2:
            z = rng.uniform(0, 100)
            return np.column_stack([xy, np.full(3, z)])


def random_interior_point(rng, tri):
    w = rng.dirichlet(np.ones(3))
    return w @ tri, w


def small_scenario(seed=0, noise=True, duration=2.0, payload=True):
    """Three leaders and one follower translating 2.2 m, with or without a payload."""
    from cdtransport.config import ScenarioConfig
    from cdtransport.dynamics import QuadParams
    from cdtransport.guidance import WaypointSchedule
    from cdtransport.payload import PayloadParams

    tri0 = np.array([[-10.0, -10.0, 50.0], [0.0, 10.0, 50.0], [10.0, -9.0, 50.0]])
    tri1 = tri0 + np.array([2.0, 1.0, 0.0])
    positions = np.vstack([tri0, [[0.5, -3.0, 50.0]]])
    return ScenarioConfig(
        name="small",
        quad=QuadParams(),
        positions=positions,
        leaders=(0, 1, 2),
        schedule=WaypointSchedule([0.0, duration], [tri0, tri1]),
        payload=PayloadParams(mass=4.0) if payload else None,
        cable_k=np.full(4, 100.0) if payload else None,
        hang_depth=20.0,
        noise_enabled=noise,
        seed=seed,
    )


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record the one-line outcome of an acceptance criterion."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
