import numpy as np
import pytest

from conftest import l_map, ring_map
from oracles import flood_fill_interior

from mapbench.errors import MapLoadError, NoBoundaryError
from mapbench.gridmap import (
    CellState,
    GridMap,
    MapMeta,
    interior_mask,
    load_gridmap,
    longest_contour,
    render_image,
    save_pgm,
    threshold_image,
)


class TestThresholding:
    def test_two_by_two(self):
        gray = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        cells = threshold_image(gray, 50, 200)
        assert cells[0, 0] == CellState.OCCUPIED
        assert cells[0, 1] == CellState.FREE
        assert cells[1, 0] == CellState.FREE
        assert cells[1, 1] == CellState.OCCUPIED

    def test_uniform_free(self):
        cells = threshold_image(np.full((10, 10), 255, dtype=np.uint8), 50, 205)
        assert (cells == CellState.FREE).sum() == 100

    def test_between_thresholds_is_unknown(self):
        cells = threshold_image(np.array([[128]], dtype=np.uint8), 50, 205)
        assert cells[0, 0] == CellState.UNKNOWN

    def test_threshold_boundaries_inclusive(self):
        cells = threshold_image(np.array([[50, 51, 204, 205]], dtype=np.uint8), 50, 205)
        assert list(cells[0]) == [
            CellState.OCCUPIED,
            CellState.UNKNOWN,
            CellState.UNKNOWN,
            CellState.FREE,
        ]

    def test_render_roundtrip_idempotent(self):
        rng = np.random.default_rng(0)
        cells = rng.integers(0, 3, size=(30, 40)).astype(np.uint8)
        gm = GridMap(cells, 0.05)
        again = threshold_image(render_image(gm), 50, 205)
        assert np.array_equal(again, cells)


class TestLoading:
    def test_pgm_roundtrip(self, tmp_path):
        gm = ring_map(12, 15, resolution=0.05)
        path = tmp_path / "room.pgm"
        save_pgm(gm, path)
        loaded = load_gridmap(path, MapMeta(resolution=0.05))
        assert np.array_equal(loaded.cells, gm.cells)
        assert loaded.resolution == 0.05

    def test_png_roundtrip(self, tmp_path):
        from PIL import Image

        gm = ring_map(8, 9)
        path = tmp_path / "room.png"
        Image.fromarray(render_image(gm), mode="L").save(path)
        loaded = load_gridmap(path, MapMeta(resolution=0.1))
        assert np.array_equal(loaded.cells, gm.cells)

    def test_sidecar_metadata(self, tmp_path):
        gm = ring_map(8, 8)
        path = tmp_path / "room.pgm"
        save_pgm(gm, path)
        (tmp_path / "room.pgm.meta").write_text(
            "resolution: 0.25\norigin_x: 1.5\norigin_y: -2.0\n"
        )
        loaded = load_gridmap(path)
        assert loaded.resolution == 0.25
        assert loaded.origin_x == 1.5
        assert loaded.origin_y == -2.0

    def test_missing_resolution_fails(self, tmp_path):
        path = tmp_path / "room.pgm"
        save_pgm(ring_map(8, 8), path)
        with pytest.raises(MapLoadError, match="resolution"):
            load_gridmap(path)

    def test_missing_file_fails(self, tmp_path):
        with pytest.raises(MapLoadError):
            load_gridmap(tmp_path / "nope.pgm", MapMeta(resolution=0.1))

    def test_bad_resolution_fails(self):
        with pytest.raises(MapLoadError):
            GridMap(np.zeros((4, 4), dtype=np.uint8), 0.0)


class TestContours:
    def test_ring_contour_length(self):
        gm = ring_map(10, 10)
        contour = longest_contour(gm)
        assert len(contour) == 36  # every border pixel traversed once

    def test_interior_of_ring(self):
        im = interior_mask(ring_map(10, 10))
        expected = np.zeros((10, 10), dtype=bool)
        expected[1:9, 1:9] = True
        assert np.array_equal(im.mask, expected)

    def test_nested_rectangles_follow_outer(self):
        gm = ring_map(20, 20)
        gm.cells[8:13, 8:13] = CellState.OCCUPIED  # 5x5 island
        gm.cells[9:12, 9:12] = CellState.FREE
        im = interior_mask(gm)
        # mask extends to the outer wall, covering the island's pixels
        assert im.mask[1:19, 1:19].sum() == im.mask.sum()
        assert im.mask[10, 10]  # inside the island, still inside the building
        assert im.mask.sum() == 18 * 18

    def test_l_shape_matches_flood_fill_oracle(self):
        gm = l_map(40, 16)
        im = interior_mask(gm)
        oracle = flood_fill_interior(gm)
        assert np.array_equal(im.mask & gm.free(), oracle)

    def test_no_boundary_error(self):
        gm = GridMap(np.zeros((5, 5), dtype=np.uint8), 0.1)
        with pytest.raises(NoBoundaryError):
            interior_mask(gm)

    def test_translation_equivariance(self):
        gm = l_map(30, 12)
        im = interior_mask(gm)
        shifted = np.zeros((40, 45), dtype=np.uint8)
        shifted[6 : 6 + 30, 9 : 9 + 30] = gm.cells
        im2 = interior_mask(GridMap(shifted, 0.1))
        expected = np.zeros((40, 45), dtype=bool)
        expected[6 : 6 + 30, 9 : 9 + 30] = im.mask
        assert np.array_equal(im2.mask, expected)

    def test_unknown_treated_as_boundary(self):
        gm = ring_map(10, 10)
        gm.cells[gm.cells == CellState.OCCUPIED] = CellState.UNKNOWN
        im = interior_mask(gm)
        assert im.mask.sum() == 64
