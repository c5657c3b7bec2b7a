import numpy as np
import pytest

from conftest import l_map, ring_map, two_room_map
from oracles import brute_force_ridge, graph_components, hausdorff_px

from mapbench.gridmap import GridMap, interior_mask
from mapbench.voronoi import (
    VoronoiGraph,
    build_graph,
    build_pixel_graph,
    dilate,
    prune_spurs,
    skeletonize,
    sparsify,
    tessellate,
    thin,
)


def path_graph(coords):
    pixels = {i: rc for i, rc in enumerate(coords)}
    adj = {i: {} for i in pixels}
    for i in range(len(coords) - 1):
        adj[i][i + 1] = 1.0
        adj[i + 1][i] = 1.0
    return VoronoiGraph(pixels, adj)


class TestTessellate:
    def test_corridor_centerline(self, corridor):
        im = interior_mask(corridor)
        ridge = tessellate(corridor, im)
        rows = np.nonzero(ridge[:, 40:60])[0]  # away from the ends
        assert set(rows) == {9, 10}

    def test_empty_mask_empty_ridge(self):
        gm = ring_map(10, 10)
        gm.cells[:] = 0
        gm.cells[4, 2:8] = 1  # bare wall segment encloses nothing
        im = interior_mask(gm)
        assert not im.mask.any()
        assert not tessellate(gm, im).any()

    def test_solid_interior_is_error(self):
        from mapbench.errors import EmptyFreeSpaceError

        gm = ring_map(10, 10)
        gm.cells[1:-1, 1:-1] = 1  # filled: interior exists but has no free cell
        with pytest.raises(EmptyFreeSpaceError):
            tessellate(gm, interior_mask(gm))

    def test_square_contains_diagonals(self, square_room):
        im = interior_mask(square_room)
        ridge = tessellate(square_room, im)
        # medial axis of a square: both diagonals (within 1 px)
        n = square_room.height
        for t in range(6, n // 2 - 2):
            for r, c in [(t, t), (t, n - 1 - t)]:
                window = ridge[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2]
                assert window.any(), f"no ridge near diagonal point {(r, c)}"

    def test_matches_bruteforce_oracle(self):
        for gm in [ring_map(16, 48), ring_map(30, 30), l_map(36, 14), two_room_map(30, 60, 6)]:
            im = interior_mask(gm)
            assert hausdorff_px(tessellate(gm, im), brute_force_ridge(gm, im)) <= 2.0


class TestDilate:
    def test_single_pixel_becomes_block(self):
        gm = ring_map(20, 20)
        im = interior_mask(gm)
        img = np.zeros((20, 20), dtype=bool)
        img[10, 10] = True
        out = dilate(img, gm, im)
        assert out[8:13, 8:13].all() and out.sum() == 25

    def test_empty_stays_empty(self):
        gm = ring_map(10, 10)
        im = interior_mask(gm)
        assert not dilate(np.zeros((10, 10), dtype=bool), gm, im).any()

    def test_clipped_at_walls(self):
        gm = ring_map(20, 20)
        im = interior_mask(gm)
        img = np.zeros((20, 20), dtype=bool)
        img[2, 2] = True  # next to the corner walls
        out = dilate(img, gm, im)
        assert out.sum() == 16  # 5x5 minus the wall-clipped row and column
        assert not (out & gm.blocked()).any()


class TestThin:
    def test_line_is_fixpoint(self):
        img = np.zeros((7, 20), dtype=bool)
        img[3, 2:18] = True
        assert np.array_equal(thin(img), img)

    def test_dilate_then_thin_recovers_line(self):
        gm = ring_map(30, 30)
        im = interior_mask(gm)
        img = np.zeros((30, 30), dtype=bool)
        img[15, 4:26] = True
        recovered = thin(dilate(img, gm, im))
        assert hausdorff_px(recovered, img) <= 1.0

    def test_one_pixel_wide(self):
        rng = np.random.default_rng(3)
        img = (rng.random((40, 40)) < 0.6).astype(np.uint8)
        out = thin(img)
        # no deletable pixel remains: thinning again changes nothing
        assert np.array_equal(thin(out), out)


class TestSpurPruning:
    def test_short_spur_removed(self):
        img = np.zeros((15, 15), dtype=bool)
        img[7, 2:13] = True  # main line
        img[5:7, 7] = True  # 2-px spur
        out = prune_spurs(img)
        assert not out[5:7, 7].any()
        assert out[7, 2:13].all()

    def test_long_branch_kept(self):
        img = np.zeros((15, 15), dtype=bool)
        img[7, 2:13] = True
        img[1:7, 7] = True  # 6-px branch
        out = prune_spurs(img)
        assert out[1:7, 7].all()
        assert out[7, 2:13].all()

    def test_three_pixel_branch_removed_four_kept(self):
        img = np.zeros((15, 15), dtype=bool)
        img[7, 2:13] = True
        img[4:7, 7] = True  # 3-px branch: shorter than the limit
        assert not prune_spurs(img)[4:7, 7].any()
        img2 = np.zeros((15, 15), dtype=bool)
        img2[7, 2:13] = True
        img2[3:7, 7] = True  # exactly 4 px: kept
        assert prune_spurs(img2)[3:7, 7].all()

    def test_tiny_fragment_removed(self):
        img = np.zeros((10, 10), dtype=bool)
        img[2, 2:4] = True
        assert not prune_spurs(img).any()

    def test_long_fragment_kept(self):
        img = np.zeros((10, 10), dtype=bool)
        img[2, 2:8] = True
        assert np.array_equal(prune_spurs(img), img)


class TestPixelGraph:
    def test_three_collinear(self):
        img = np.zeros((3, 5), dtype=bool)
        img[1, 1:4] = True
        g = build_pixel_graph(img)
        assert g.node_count == 3
        assert sorted((a, b, w) for a, b, w in g.edges()) == [(0, 1, 1.0), (1, 2, 1.0)]

    def test_isolated_pixel(self):
        img = np.zeros((3, 3), dtype=bool)
        img[1, 1] = True
        g = build_pixel_graph(img)
        assert g.node_count == 1 and g.edge_count == 0

    def test_l_corner(self):
        img = np.zeros((4, 4), dtype=bool)
        img[1, 1] = img[1, 2] = img[2, 2] = True
        g = build_pixel_graph(img)
        # corner pixels are mutually 8-adjacent: triangle
        assert g.node_count == 3 and g.edge_count == 3

    def test_diagonal_edges_unit_weight(self):
        img = np.zeros((4, 4), dtype=bool)
        img[1, 1] = img[2, 2] = True
        g = build_pixel_graph(img)
        assert g.edges() == [(0, 1, 1.0)]


class TestSparsify:
    def test_collinear_chain_collapses(self):
        g = path_graph([(1, 1), (1, 2), (1, 3)])
        s = sparsify(g)
        assert sorted(s.pixels.values()) == [(1, 1), (1, 3)]
        assert s.edges() == [(0, 2, 2.0)]

    def test_corner_survives(self):
        g = path_graph([(1, 1), (1, 2), (2, 2)])
        s = sparsify(g)
        assert s.node_count == 3  # the corner node is not collinear

    def test_hundred_pixel_line(self):
        g = path_graph([(5, c) for c in range(100)])
        s = sparsify(g)
        assert s.node_count == 2
        assert s.edges() == [(0, 99, 99.0)]

    def test_gentle_staircase_collapses(self):
        coords = []
        r, c = 0, 0
        for k in range(20):
            coords.append((r, c))
            if k % 2 == 0:
                c += 1
            else:
                r, c = r + 1, c + 1
        s = sparsify(path_graph(coords))
        assert s.node_count == 2
        assert list(s.adj[0].values()) == [19.0]

    def test_component_count_preserved(self):
        for gm in [ring_map(30, 30), two_room_map(30, 60, 6), l_map(36, 14)]:
            im = interior_mask(gm)
            g0 = build_pixel_graph(skeletonize(gm, im))
            g1 = sparsify(g0)
            assert len(graph_components(g0)) == len(graph_components(g1))

    def test_chain_lengths_preserved(self):
        # shortest-path weights between surviving nodes match the
        # pixel-count distances in the unsparsified graph
        from mapbench.traversal import dijkstra

        gm = l_map(36, 14)
        im = interior_mask(gm)
        g0 = build_pixel_graph(skeletonize(gm, im))
        g1 = sparsify(g0)
        survivors = sorted(g1.pixels)
        src = survivors[0]
        d0, _ = dijkstra(g0, src)
        d1, _ = dijkstra(g1, src)
        for node in survivors:
            assert d1[node] == pytest.approx(d0[node])

    def test_no_removable_degree_two_nodes_remain(self):
        from mapbench.voronoi import COLLINEAR_TOLERANCE_PX, _perp_distance

        gm = two_room_map(30, 60, 6)
        im = interior_mask(gm)
        g = build_graph(gm, im)
        for i, nbrs in g.adj.items():
            if len(nbrs) != 2:
                continue
            a, b = sorted(nbrs)
            assert (
                _perp_distance(g.pixels[i], g.pixels[a], g.pixels[b])
                >= COLLINEAR_TOLERANCE_PX
            )

    def test_no_self_loops_positive_weights(self):
        gm = ring_map(40, 40)
        im = interior_mask(gm)
        g = build_graph(gm, im)
        for a, b, w in g.edges():
            assert a != b and w > 0


class TestClearance:
    def test_skeleton_on_corridor_spine_has_max_clearance(self, corridor):
        from scipy import ndimage

        im = interior_mask(corridor)
        sk = skeletonize(corridor, im)
        dist = ndimage.distance_transform_edt(~corridor.blocked())
        mid = sk[:, 30:70]
        dmid = dist[:, 30:70]
        for r, c in np.argwhere(mid):
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < mid.shape[0] and 0 <= nc < mid.shape[1] and not mid[nr, nc]:
                    assert dmid[r, c] >= dmid[nr, nc]


class TestGraphIO:
    def test_json_roundtrip(self, tmp_path):
        gm = two_room_map()
        im = interior_mask(gm)
        g = build_graph(gm, im)
        path = tmp_path / "graph.json"
        g.save(path, gm)
        g2 = VoronoiGraph.load(path)
        assert g2.pixels == g.pixels
        assert g2.adj == g.adj

    def test_metadata_carries_tolerances(self, tmp_path):
        gm = ring_map(12, 12)
        g = build_graph(gm, interior_mask(gm))
        doc = g.to_dict(gm)
        assert doc["params"]["ridge_tolerance_px"] == 1.0
        assert doc["map"]["resolution"] == 0.1
