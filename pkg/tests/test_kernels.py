"""Backend parity: the compiled kernels must match the pure-Python
reference bit for bit."""

import math

import numpy as np
import pytest

from mapbench._kernels import _pyfallback

native = pytest.importorskip(
    "mapbench._kernels._native", reason="compiled kernel extension not built"
)


def random_blobs(rng, shape, density):
    img = (rng.random(shape) < density).astype(np.uint8)
    img[0, :] = img[-1, :] = img[:, 0] = img[:, -1] = 0
    return img


@pytest.mark.parametrize("seed", range(8))
def test_thin_parity(seed):
    rng = np.random.default_rng(seed)
    img = random_blobs(rng, (48, 64), 0.55)
    assert np.array_equal(_pyfallback.thin(img), native.thin(img))


def test_thin_parity_structured():
    img = np.zeros((40, 40), dtype=np.uint8)
    img[5:35, 18:23] = 1  # bar
    img[18:23, 5:35] = 1  # crossing bar
    for i in range(8, 30):
        img[i, i : i + 4] = 1  # diagonal band
    assert np.array_equal(_pyfallback.thin(img), native.thin(img))


@pytest.mark.parametrize("seed", range(5))
def test_line_blocked_parity(seed):
    rng = np.random.default_rng(100 + seed)
    grid = random_blobs(rng, (30, 30), 0.2)
    for _ in range(200):
        r0, c0, r1, c1 = rng.integers(0, 30, size=4)
        assert _pyfallback.line_blocked(grid, r0, c0, r1, c1) == native.line_blocked(
            grid, r0, c0, r1, c1
        )


@pytest.mark.parametrize("seed", range(5))
def test_visible_mask_parity(seed):
    rng = np.random.default_rng(200 + seed)
    grid = random_blobs(rng, (50, 50), 0.15)
    rows = rng.integers(0, 50, size=300).astype(np.int64)
    cols = rng.integers(0, 50, size=300).astype(np.int64)
    heading = rng.uniform(-math.pi, math.pi)
    fov = rng.uniform(0.5, 2 * math.pi)
    a = _pyfallback.visible_mask(
        grid, 25, 25, rows, cols, math.cos(heading), math.sin(heading),
        math.cos(fov / 2), 3.0, 0.1,
    )
    b = native.visible_mask(
        grid, 25, 25, rows, cols, math.cos(heading), math.sin(heading),
        math.cos(fov / 2), 3.0, 0.1,
    )
    assert np.array_equal(np.asarray(a), np.asarray(b))


def test_bresenham_excludes_endpoints():
    grid = np.zeros((5, 9), dtype=np.uint8)
    grid[2, 0] = 1
    grid[2, 8] = 1
    # endpoints blocked, path between them clear
    assert not _pyfallback.line_blocked(grid, 2, 0, 2, 8)
    grid[2, 4] = 1
    assert _pyfallback.line_blocked(grid, 2, 0, 2, 8)


def test_thin_five_block_center_pixel():
    # frozen result of the two-pass rules on a solid 5x5 block
    img = np.zeros((9, 9), dtype=np.uint8)
    img[2:7, 2:7] = 1
    out = _pyfallback.thin(img)
    expected = np.zeros((9, 9), dtype=np.uint8)
    expected[4, 4] = 1
    assert np.array_equal(out, expected)
