import math
import os

import numpy as np
import pytest

from qhlab.geometry import Box
from qhlab.domains import (
    build_beta_version,
    build_disk_minus_fractal,
    build_l_shape,
    build_unit_square,
)
from qhlab.whitney import (
    build_cube_graph,
    build_cube_graph_bruteforce,
    coverage_deficit,
    dilated_overlap_counts,
    load_whitney,
    save_census,
    save_whitney,
    whitney_decompose,
)

SQRT2 = math.sqrt(2.0)


def exhaustive_unit_square(j_max):
    """Apply the acceptance rule to every dyadic cube of (0,1)^2 directly.

    For the unit square the boundary distance of a sub-cube is available
    in closed form, so this scan shares no code with the tree builder.
    """

    def dist(level, ax, ay):
        s = 2.0**-level
        lo = (ax * s, ay * s)
        hi = (lo[0] + s, lo[1] + s)
        return min(lo[0], lo[1], 1.0 - hi[0], 1.0 - hi[1])

    def passes(level, ax, ay):
        s = 2.0**-level
        d = dist(level, ax, ay)
        return d >= 0 and d >= math.hypot(s, s)

    accepted = set()
    for level in range(0, j_max + 1):
        for ax in range(2**level):
            for ay in range(2**level):
                if not passes(level, ax, ay):
                    continue
                if level == 0 or not passes(level - 1, ax // 2, ay // 2):
                    accepted.add((level, ax, ay))
    return accepted


class TestUnitSquare:
    def test_spec_examples(self):
        W = whitney_decompose(build_unit_square(), 8)
        cubes = {
            (int(l), int(a), int(b))
            for l, a, b in zip(W.levels, W.ix, W.iy)
        }
        # [3/8, 1/2]^2 accepted at level 3
        assert (3, 3, 3) in cubes
        # [1/4, 1/2]^2 fails the distance test at level 2
        assert (2, 1, 1) not in cubes

    def test_matches_exhaustive_scan(self):
        W = whitney_decompose(build_unit_square(), 8)
        got = {
            (int(l), int(a), int(b))
            for l, a, b in zip(W.levels, W.ix, W.iy)
        }
        assert got == exhaustive_unit_square(8)

    def test_census_matches_scan_and_sums(self):
        W = whitney_decompose(build_unit_square(), 8)
        census = W.level_counts()
        scan = exhaustive_unit_square(8)
        by_level: dict[int, int] = {}
        for level, _, _ in scan:
            by_level[level] = by_level.get(level, 0) + 1
        assert census == by_level  # root side 1, so absolute level = level
        assert sum(census.values()) == W.n_cubes

    def test_distances_exact(self):
        W = whitney_decompose(build_unit_square(), 6)
        for i in range(W.n_cubes):
            b = W.cube_box(i)
            expected = min(
                b.lo[0], b.lo[1], 1.0 - b.hi[0], 1.0 - b.hi[1]
            )
            assert W.dist[i] == expected
            c = W.cube_center(i)
            assert W.center_dist[i] == min(
                c[0], c[1], 1.0 - c[0], 1.0 - c[1]
            )


FIXTURES = {}


def get_fixture(name):
    if name not in FIXTURES:
        if name == "square":
            dom = build_unit_square()
            j = 8
        elif name == "lshape":
            dom = build_l_shape()
            j = 8
        elif name == "disk":
            dom = build_disk_minus_fractal(1.0, 3)
            j = 7
        elif name == "beta":
            base = build_unit_square()
            Wb = whitney_decompose(base, 4)
            dom = build_beta_version(base, Wb, 0.5)
            j = 8
        FIXTURES[name] = (dom, whitney_decompose(dom, j))
    return FIXTURES[name]


@pytest.mark.parametrize("name", ["square", "lshape", "disk", "beta"])
class TestInvariants:
    def test_two_sided_bound(self, name):
        _, W = get_fixture(name)
        assert W.n_cubes > 0
        sides = W.sides()
        diams = np.hypot(sides, sides)
        assert np.all(diams <= W.dist)
        assert np.all(W.dist <= 4.0 * diams)

    def test_membership_of_cube_corners(self, name):
        dom, W = get_fixture(name)
        rng = np.random.default_rng(5)
        for i in rng.choice(W.n_cubes, size=min(200, W.n_cubes), replace=False):
            b = W.cube_box(int(i))
            eps = b.sides[0] * 1e-6
            for p in (
                (b.lo[0] + eps, b.lo[1] + eps),
                (b.hi[0] - eps, b.lo[1] + eps),
                (b.lo[0] + eps, b.hi[1] - eps),
                (b.hi[0] - eps, b.hi[1] - eps),
                b.center,
            ):
                assert dom.membership(p)

    def test_interiors_disjoint(self, name):
        # dyadic interiors meet iff the cells coincide or one cell
        # contains the other, so checking ancestors is exact
        _, W = get_fixture(name)
        cells = set(
            (int(l), int(a), int(b))
            for l, a, b in zip(W.levels, W.ix, W.iy)
        )
        assert len(cells) == W.n_cubes
        for level, ax, ay in cells:
            l, a, b = level, ax, ay
            while l > 0:
                l, a, b = l - 1, a // 2, b // 2
                assert (l, a, b) not in cells

    def test_bounded_overlap(self, name):
        dom, W = get_fixture(name)
        rng = np.random.default_rng(17)
        pts = rng.uniform(dom.bbox.lo, dom.bbox.hi, size=(10_000, 2))
        member = np.array(
            [dom.membership((float(p[0]), float(p[1]))) for p in pts]
        )
        counts = dilated_overlap_counts(W, pts[member])
        assert counts.max() <= 144
        assert counts.min() >= 0

    def test_determinism(self, name):
        dom, W = get_fixture(name)
        W2 = whitney_decompose(dom, W.j_max)
        assert np.array_equal(W.levels, W2.levels)
        assert np.array_equal(W.ix, W2.ix)
        assert np.array_equal(W.iy, W2.iy)
        assert np.array_equal(W.dist, W2.dist)


class _FarBoundaryOracle:
    """Open set much larger than its declared bounding box."""

    bbox = Box((0.0, 0.0), (1.0, 1.0))
    basepoint = (0.5, 0.5)
    scale = 1.0
    provenance = {"builder": "toy"}
    circle = ((0.0, 0.0), 64.0)

    def membership(self, p):
        return math.hypot(*p) < 64.0

    def primitive_arrays(self):
        return np.zeros((0, 2)), np.zeros((0, 2))


class TestEdgeCases:
    def test_single_cube_decomposition(self):
        W = whitney_decompose(_FarBoundaryOracle(), 4)
        assert W.n_cubes == 1
        assert W.level_counts() == {0: 1}
        assert len(W.trunc_levels) == 0

    def test_j_max_validation(self):
        with pytest.raises(ValueError):
            whitney_decompose(build_unit_square(), 0)

    def test_cube_at_point(self):
        W = whitney_decompose(build_unit_square(), 8)
        i = W.cube_at_point((0.5, 0.5))
        assert i is not None
        b = W.cube_box(i)
        assert b.contains((0.5, 0.5))
        assert W.cube_at_point((0.5, 0.5)) == i  # deterministic
        assert W.cube_at_point((1e-9, 1e-9)) is None  # unresolved collar
        assert W.cube_at_point((2.0, 2.0)) is None

    def test_truncation_records_present(self):
        W = whitney_decompose(build_unit_square(), 5)
        assert len(W.trunc_levels) > 0
        assert np.all(W.trunc_levels == 5)
        # truncated cells hug the boundary: dist < diam
        s = 2.0**-5.0
        assert np.all(W.trunc_dist < math.hypot(s, s))


class TestCoverage:
    def test_deficit_matches_exact_residue(self):
        dom = build_unit_square()
        W = whitney_decompose(dom, 6)
        exact = 1.0 - W.total_area()
        rep = coverage_deficit(W, dom, n_points=40_000, seed=3)
        assert abs(rep.area_uncovered - exact) <= 4 * rep.standard_error_area

    def test_deficit_decreases_with_depth(self):
        dom = build_l_shape()
        areas = []
        for j in (4, 6, 8):
            W = whitney_decompose(dom, j)
            areas.append(coverage_deficit(W, dom, seed=1).area_uncovered)
        assert areas[0] >= areas[1] >= areas[2]

    def test_single_cube_deficit(self):
        W = whitney_decompose(_FarBoundaryOracle(), 1)
        rep = coverage_deficit(W, _FarBoundaryOracle(), seed=2)
        assert rep.fraction_uncovered == 0.0


class TestCubeGraph:
    def test_matches_bruteforce_unit_square(self):
        W = whitney_decompose(build_unit_square(), 6)
        fast = build_cube_graph(W)
        slow = build_cube_graph_bruteforce(W)
        assert np.array_equal(fast.edges, slow.edges)
        assert fast.n_edges > 0

    def test_matches_bruteforce_lshape(self):
        W = whitney_decompose(build_l_shape(), 6)
        fast = build_cube_graph(W)
        slow = build_cube_graph_bruteforce(W)
        assert np.array_equal(fast.edges, slow.edges)

    def test_matches_bruteforce_disk(self):
        W = whitney_decompose(build_disk_minus_fractal(1.0, 2), 6)
        fast = build_cube_graph(W)
        slow = build_cube_graph_bruteforce(W)
        assert np.array_equal(fast.edges, slow.edges)

    def test_face_neighbors_connected(self):
        W = whitney_decompose(build_unit_square(), 6)
        g = build_cube_graph(W)
        cells = {
            (int(l), int(a), int(b)): i
            for i, (l, a, b) in enumerate(zip(W.levels, W.ix, W.iy))
        }
        edge_set = {(int(u), int(v)) for u, v in g.edges}
        # equal-level face neighbors must always share an edge
        found = 0
        for (l, a, b), i in cells.items():
            j = cells.get((l, a + 1, b))
            if j is not None:
                assert (min(i, j), max(i, j)) in edge_set
                found += 1
        assert found > 0

    def test_no_self_loops_and_sorted(self):
        W = whitney_decompose(build_l_shape(), 6)
        g = build_cube_graph(W)
        assert np.all(g.edges[:, 0] < g.edges[:, 1])
        assert np.array_equal(
            g.edges, g.edges[np.lexsort((g.edges[:, 1], g.edges[:, 0]))]
        )

    def test_distant_cubes_not_connected(self):
        W = whitney_decompose(build_unit_square(), 6)
        g = build_cube_graph(W)
        adj = g.adjacency()
        i = W.cube_at_point((0.5, 0.5))
        for j in adj[i]:
            bi = W.cube_box(i)
            bj = W.cube_box(int(j))
            gap = max(
                max(bj.lo[0] - bi.hi[0], bi.lo[0] - bj.hi[0]),
                max(bj.lo[1] - bi.hi[1], bi.lo[1] - bj.hi[1]),
            )
            limit = (bi.sides[0] + bj.sides[0]) / 16.0
            assert gap <= limit + 1e-15


class TestWhitneyFiles:
    def test_round_trip(self, tmp_path):
        dom = build_l_shape()
        W = whitney_decompose(dom, 7)
        path = os.path.join(tmp_path, "w.txt")
        save_whitney(W, path, comment="unit test")
        W2 = load_whitney(path, oracle=dom)
        assert np.array_equal(W.levels, W2.levels)
        assert np.array_equal(W.ix, W2.ix)
        assert np.array_equal(W.iy, W2.iy)
        assert np.array_equal(W.dist, W2.dist)
        assert np.array_equal(W.center_dist, W2.center_dist)
        assert np.array_equal(W.trunc_levels, W2.trunc_levels)
        assert W2.root == W.root
        path2 = os.path.join(tmp_path, "w2.txt")
        save_whitney(W2, path2, comment="unit test")
        with open(path) as f1, open(path2) as f2:
            assert f1.read() == f2.read()

    def test_census_csv(self, tmp_path):
        W = whitney_decompose(build_unit_square(), 5)
        path = os.path.join(tmp_path, "census.csv")
        save_census(W, path, comment="unit test")
        with open(path) as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0] == "# unit test"
        assert lines[1] == "j,count"
        rows = [tuple(map(int, line.split(","))) for line in lines[2:]]
        assert dict(rows) == W.level_counts()

    def test_bad_header(self, tmp_path):
        path = os.path.join(tmp_path, "bad.txt")
        with open(path, "w") as fh:
            fh.write("whitney v2\n")
        with pytest.raises(ValueError):
            load_whitney(path)
