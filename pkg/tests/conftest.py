import math
from pathlib import Path

import numpy as np
import pytest

from mapbench.gridmap import GridMap

DATA_DIR = Path(__file__).parent / "data"


def ring_map(h: int, w: int, resolution: float = 0.1) -> GridMap:
    """Rectangular room: 1-px occupied border, free interior."""
    cells = np.zeros((h, w), dtype=np.uint8)
    cells[0, :] = 1
    cells[-1, :] = 1
    cells[:, 0] = 1
    cells[:, -1] = 1
    return GridMap(cells, resolution)


def l_map(n: int = 60, arm: int = 24, resolution: float = 0.1) -> GridMap:
    """L-shaped room built from a square with one quadrant walled off."""
    cells = np.zeros((n, n), dtype=np.uint8)
    cells[0, :] = 1
    cells[:, 0] = 1
    cells[-1, : arm + 1] = 1
    cells[: arm + 1, -1] = 1
    cells[arm, arm:] = 1
    cells[arm:, arm] = 1
    return GridMap(cells, resolution)


def two_room_map(h: int = 40, w: int = 80, door: int = 6, resolution: float = 0.1) -> GridMap:
    """Two rooms split by a wall with a centered door gap."""
    cells = np.zeros((h, w), dtype=np.uint8)
    cells[0, :] = 1
    cells[-1, :] = 1
    cells[:, 0] = 1
    cells[:, -1] = 1
    mid = w // 2
    cells[:, mid] = 1
    cells[h // 2 - door // 2 : h // 2 + door // 2, mid] = 0
    return GridMap(cells, resolution)


def make_run(
    t_steps: int,
    noise_t: float = 0.0,
    noise_r: float = 0.0,
    seed: int = 0,
    run_id: str = "run",
):
    """Synthetic wandering trajectory; the estimate is the truth plus
    iid Gaussian noise on every coordinate."""
    from mapbench.trajectory import RunLog

    rng = np.random.default_rng(seed)
    t = np.arange(t_steps, dtype=float)
    heading = np.cumsum(rng.uniform(-0.3, 0.3, size=t_steps))
    steps = rng.uniform(0.05, 0.3, size=t_steps)
    x = np.cumsum(steps * np.cos(heading))
    y = np.cumsum(steps * np.sin(heading))
    gt = np.column_stack([x, y, heading])
    est = gt.copy()
    if noise_t:
        est[:, :2] += rng.normal(scale=noise_t, size=(t_steps, 2))
    if noise_r:
        est[:, 2] += rng.normal(scale=noise_r, size=t_steps)
    return RunLog(run_id, t, est, gt)


@pytest.fixture
def square_room():
    return ring_map(40, 40)


@pytest.fixture
def corridor():
    return ring_map(20, 100)


def assert_angle_close(a: float, b: float, tol: float = 1e-12):
    d = (a - b) % (2 * math.pi)
    if d > math.pi:
        d -= 2 * math.pi
    assert abs(d) <= tol, f"angles differ: {a} vs {b}"
