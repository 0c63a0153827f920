"""二維凸多邊形測試"""
import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection
from scipy.spatial.distance import directed_hausdorff

from calculators.polytope import Polytope2, enumerate_vertices, nearest_point
from utils.errors import GeometryError


def _sorted(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points)
    return points[np.lexsort((points[:, 1], points[:, 0]))]


class TestConstruction:
    def test_box_vertices(self):
        box = Polytope2.box(2.0, 8.0)
        expected = np.array([[-2.0, -8.0], [-2.0, 8.0], [2.0, -8.0], [2.0, 8.0]])
        np.testing.assert_allclose(_sorted(box.vertices), expected)

    def test_vertices_are_counter_clockwise(self):
        box = Polytope2.box(1.0, 1.0)
        V = box.vertices
        edges = np.roll(V, -1, axis=0) - V
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        assert np.all(cross > 0)

    def test_from_vertices_rebuilds_same_region(self):
        tri = Polytope2.from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert tri.contains([0.2, 0.2])
        assert not tri.contains([0.6, 0.6])
        assert tri.vertices.shape == (3, 2)

    def test_unbounded_raises(self):
        with pytest.raises(GeometryError):
            Polytope2.from_halfspaces([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], [1.0, 1.0, 1.0])

    def test_empty_raises(self):
        normals = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        with pytest.raises(GeometryError):
            Polytope2.from_halfspaces(normals, [-1.0, -1.0, 1.0, 1.0])

    def test_arrays_are_read_only(self):
        box = Polytope2.box(1.0, 1.0)
        with pytest.raises(ValueError):
            box.vertices[0, 0] = 5.0

    def test_redundant_halfspace_removed_by_reduced(self):
        normals = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0]]
        poly = Polytope2.from_halfspaces(normals, [1.0, 1.0, 1.0, 1.0, 10.0])
        assert poly.reduced().normals.shape[0] == 4

    def test_vertices_match_scipy(self, rng):
        for _ in range(50):
            k = int(rng.integers(3, 9))
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=k))
            # 保證有界：加上外框
            normals = np.vstack([np.column_stack([np.cos(angles), np.sin(angles)]),
                                 [[1, 0], [-1, 0], [0, 1], [0, -1]]])
            offsets = np.concatenate([rng.uniform(0.2, 2.0, size=k), [3.0, 3.0, 3.0, 3.0]])
            ours = enumerate_vertices(normals, offsets)

            hs = HalfspaceIntersection(np.column_stack([normals, -offsets]), np.zeros(2))
            theirs = hs.intersections
            # 以雙向 Hausdorff 距離比對，避免浮點排序的平手問題
            assert directed_hausdorff(ours, theirs)[0] < 1e-7
            assert directed_hausdorff(theirs, ours)[0] < 1e-7
            gaps = np.linalg.norm(ours[:, None, :] - ours[None, :, :], axis=2)
            np.fill_diagonal(gaps, np.inf)
            assert gaps.min() > 1e-9


class TestNearestPoint:
    def test_inside_target_is_returned(self):
        box = Polytope2.box(1.0, 1.0)
        u, active = nearest_point(box.normals, box.offsets, [0.3, -0.2])
        np.testing.assert_allclose(u, [0.3, -0.2])
        assert active == ()

    def test_corner_projection(self):
        box = Polytope2.box(1.0, 1.0)
        u, active = nearest_point(box.normals, box.offsets, [3.0, 2.0])
        np.testing.assert_allclose(u, [1.0, 1.0])
        assert set(active) == {0, 2}

    def test_edge_projection(self):
        box = Polytope2.box(1.0, 1.0)
        np.testing.assert_allclose(box.project([0.5, 4.0]), [0.5, 1.0])

    def test_infeasible_returns_none(self):
        u, active = nearest_point([[1.0, 0.0], [-1.0, 0.0]], [-1.0, -1.0], [0.0, 0.0])
        assert u is None
        assert active == ()

    def test_parallel_duplicates_keep_tighter(self):
        u, _ = nearest_point([[1.0, 0.0], [2.0, 0.0]], [1.0, 1.0], [3.0, 0.0])
        np.testing.assert_allclose(u, [0.5, 0.0])

    def test_feasibility_matches_linprog(self, rng):
        for _ in range(300):
            m = int(rng.integers(1, 9))
            normals = rng.normal(size=(m, 2))
            offsets = rng.uniform(-1.0, 1.0, size=m)
            u, _ = nearest_point(normals, offsets, rng.normal(size=2))
            lp = linprog(np.zeros(2), A_ub=normals, b_ub=offsets, bounds=[(None, None)] * 2, method="highs")
            assert (u is not None) == (lp.status == 0)
