import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhlab.geometry import (
    EPS_GEOM,
    Box,
    Segment,
    point_box_distance,
    point_segment_distance,
)
from qhlab.domains import (
    ApartmentGeometry,
    BetaVersionDomain,
    BoxUnionDomain,
    DiskMinusFractal,
    apartment_geometry,
    build_beta_version,
    build_box_union,
    build_disk_minus_fractal,
    build_l_shape,
    build_unit_square,
    ifs_iterate,
    load_domain,
    make_four_corner_ifs,
    save_domain,
)


class TestIfs:
    def test_lambda_one_exact(self):
        ifs = make_four_corner_ifs(1.0)
        assert ifs.ratio == 0.25
        assert ifs.kappa == 0.5
        assert set(ifs.centers) == {
            (0.75, 0.75),
            (-0.75, 0.75),
            (-0.75, -0.75),
            (0.75, -0.75),
        }

    @pytest.mark.parametrize("lam", [1.0, 1.25, 1.5, 1.75, 1.9])
    def test_dimension_matches_lambda(self, lam):
        ifs = make_four_corner_ifs(lam)
        assert abs(ifs.dimension - lam) < 1e-12
        assert 0.0 < ifs.kappa <= 0.5

    def test_lambda_out_of_range(self):
        for lam in (0.5, 2.0, 2.5):
            with pytest.raises(ValueError):
                make_four_corner_ifs(lam)

    def test_iterate_counts_and_sides(self):
        ifs = make_four_corner_ifs(1.0)
        for j in (0, 1, 2, 3):
            boxes = ifs_iterate(ifs, j)
            assert len(boxes) == 4**j
            side = 2.0 * ifs.ratio**j
            for b in boxes:
                assert b.sides == (side, side)

    def test_iterate_level_one_exact(self):
        ifs = make_four_corner_ifs(1.0)
        boxes = ifs_iterate(ifs, 1)
        got = {(b.lo, b.hi) for b in boxes}
        assert got == {
            ((0.5, 0.5), (1.0, 1.0)),
            ((-1.0, 0.5), (-0.5, 1.0)),
            ((-1.0, -1.0), (-0.5, -0.5)),
            ((0.5, -1.0), (1.0, -0.5)),
        }

    def test_iterate_nesting(self):
        ifs = make_four_corner_ifs(1.5)
        parents = ifs_iterate(ifs, 2)
        children = ifs_iterate(ifs, 3)
        for c in children:
            host = [
                p
                for p in parents
                if p.lo[0] <= c.lo[0] + 1e-12
                and p.lo[1] <= c.lo[1] + 1e-12
                and c.hi[0] <= p.hi[0] + 1e-12
                and c.hi[1] <= p.hi[1] + 1e-12
            ]
            assert len(host) == 1

    def test_iterate_separation(self):
        # the four images of any box are pairwise disjoint with gap
        # 2*kappa times the box half-side
        ifs = make_four_corner_ifs(1.25)
        boxes = ifs_iterate(ifs, 3)
        los = np.array([b.lo for b in boxes])
        his = np.array([b.hi for b in boxes])
        n = len(boxes)
        min_gap = math.inf
        for i in range(n):
            dx = np.maximum(
                los[:, 0] - his[i, 0], los[i, 0] - his[:, 0]
            )
            dy = np.maximum(
                los[:, 1] - his[i, 1], los[i, 1] - his[:, 1]
            )
            gap = np.maximum(dx, dy)
            gap[i] = math.inf
            min_gap = min(min_gap, float(gap.min()))
        expected = 2.0 * ifs.kappa * ifs.ratio**3
        assert min_gap > expected - 1e-12

    def test_iterate_cap(self):
        ifs = make_four_corner_ifs(1.0)
        with pytest.raises(ValueError):
            ifs_iterate(ifs, 13)


def _brute_bd_disk(dom: DiskMinusFractal, p):
    circ = dom.radius - math.hypot(*p)
    dk = min(point_box_distance(p, b) for b in dom.boxes)
    return min(circ, dk)


class TestDiskMinusFractal:
    def test_against_brute_force(self):
        dom = build_disk_minus_fractal(1.0, 3)
        rng = np.random.default_rng(7)
        pts = rng.uniform(-2.2, 2.2, size=(400, 2))
        for p in pts:
            p = (float(p[0]), float(p[1]))
            assert dom.boundary_distance(p) == _brute_bd_disk(dom, p)

    def test_signed_values(self):
        dom = build_disk_minus_fractal(1.0, 2)
        assert dom.boundary_distance((0.0, 0.0)) == math.hypot(0.5, 0.5)
        assert dom.membership((0.0, 0.0))
        # center of a level-2 obstacle box
        assert dom.boundary_distance((0.5625, 0.5625)) == 0.0
        assert not dom.membership((0.5625, 0.5625))
        # outside the disc
        assert dom.boundary_distance((2.5, 0.0)) == -0.5
        assert not dom.membership((2.5, 0.0))

    def test_basepoint_and_bbox(self):
        dom = build_disk_minus_fractal(1.0, 2)
        assert dom.basepoint == (0.0, 0.0)
        assert dom.bbox == Box((-2.0, -2.0), (2.0, 2.0))
        assert dom.scale == 1.0

    def test_rescaling_large_radius(self):
        dom = build_disk_minus_fractal(1.0, 1, radius=8.0)
        assert dom.scale == 0.25
        assert dom.radius == 2.0

    @settings(max_examples=200, deadline=None)
    @given(
        x1=st.floats(-2.2, 2.2),
        y1=st.floats(-2.2, 2.2),
        x2=st.floats(-2.2, 2.2),
        y2=st.floats(-2.2, 2.2),
    )
    def test_lipschitz(self, x1, y1, x2, y2):
        dom = _DISK_CACHE
        d1 = dom.boundary_distance((x1, y1))
        d2 = dom.boundary_distance((x2, y2))
        assert abs(d1 - d2) <= math.hypot(x1 - x2, y1 - y2) + 1e-12

    def test_grid_membership_matches_pointwise(self):
        dom = build_disk_minus_fractal(1.0, 2)
        xs = np.arange(-2.0, 2.0 + 1e-9, 0.125)
        ys = xs.copy()
        mask = dom.grid_membership(xs, ys)
        for i in range(0, len(xs), 3):
            for j in range(0, len(ys), 3):
                assert mask[i, j] == dom.membership(
                    (float(xs[i]), float(ys[j]))
                )


_DISK_CACHE = build_disk_minus_fractal(1.0, 2)


def _brute_bd_union(dom: BoxUnionDomain, p):
    d = min(point_segment_distance(p, s) for s in dom.segments)
    inside = any(b.contains(p) for b in dom.boxes)
    return d if inside else -d


class TestBoxUnion:
    def test_unit_square(self):
        dom = build_unit_square()
        assert dom.area == 1.0
        assert len(dom.segments) == 4
        assert dom.basepoint == (0.5, 0.5)
        assert dom.boundary_distance((0.5, 0.5)) == 0.5
        assert dom.boundary_distance((0.25, 0.5)) == 0.25
        assert dom.boundary_distance((1.5, 0.5)) == -0.5
        assert not dom.membership((1.0, 0.5))
        assert not dom.membership((0.0, 0.0))

    def test_l_shape_boundary_extraction(self):
        dom = build_l_shape()
        assert dom.area == 3.0
        assert len(dom.segments) == 6
        assert sum(s.length for s in dom.segments) == 8.0
        # interior face x = 1 between the two lower squares is not boundary
        assert dom.membership((1.0, 0.5))
        assert dom.boundary_distance((1.0, 0.5)) == 0.5

    def test_l_shape_reentrant_corner(self):
        dom = build_l_shape()
        eps = 1.0 / 64
        # outside the notch: the faces through (1, 1) pass on both sides,
        # so the nearest boundary point is a face foot, not the corner
        p = (1.0 + eps, 1.0 + eps)
        assert not dom.membership(p)
        assert dom.boundary_distance(p) == -eps
        # inside, below the notch: the reentrant corner itself is nearest
        q = (1.0 - eps, 1.0 - eps)
        assert dom.membership(q)
        assert dom.boundary_distance(q) == math.hypot(eps, eps)

    def test_against_brute_force(self):
        dom = build_l_shape()
        rng = np.random.default_rng(11)
        pts = rng.uniform(-0.5, 2.5, size=(500, 2))
        for p in pts:
            p = (float(p[0]), float(p[1]))
            assert dom.boundary_distance(p) == _brute_bd_union(dom, p)

    def test_disconnected_union_rejected(self):
        with pytest.raises(ValueError):
            build_box_union(
                [Box((0.0, 0.0), (1.0, 1.0)), Box((2.0, 0.0), (3.0, 1.0))]
            )

    def test_touching_at_corner_rejected(self):
        # corner contact does not connect the interiors
        with pytest.raises(ValueError):
            build_box_union(
                [Box((0.0, 0.0), (1.0, 1.0)), Box((1.0, 1.0), (2.0, 2.0))]
            )

    def test_overlapping_boxes_ok(self):
        dom = build_box_union(
            [Box((0.0, 0.0), (2.0, 1.0)), Box((1.0, 0.0), (3.0, 1.0))]
        )
        assert dom.area == 3.0
        assert dom.membership((1.0, 0.5))
        assert len(dom.segments) == 4

    def test_rescaling(self):
        dom = build_box_union([Box((0.0, 0.0), (8.0, 8.0))])
        assert dom.scale == 0.25
        assert dom.bbox == Box((0.0, 0.0), (2.0, 2.0))
        assert dom.area == 4.0

    def test_grid_membership_matches_pointwise(self):
        dom = build_l_shape()
        xs = np.arange(0.0, 2.0 + 1e-9, 0.25)
        ys = xs.copy()
        mask = dom.grid_membership(xs, ys)
        for i in range(len(xs)):
            for j in range(len(ys)):
                assert mask[i, j] == dom.membership(
                    (float(xs[i]), float(ys[j]))
                )


class TestApartment:
    def test_unit_cube_beta_half_exact(self):
        apt = apartment_geometry(Box((0.0, 0.0), (1.0, 1.0)), 0.5)
        w = (1.0 / 8.0) ** 2
        assert apt.half_width == w
        assert apt.room == Box((0.375, 0.375), (0.625, 0.625))
        assert apt.passage == Box(
            (0.5 - w, 0.625), (0.5 + w, 0.625 + w)
        )
        assert apt.long_passage == Box((0.5 - w, 0.5), (0.5 + w, 1.0))
        assert apt.envelope == Box((0.125, 0.125), (0.875, 0.875))
        assert len(apt.walls) == 7
        assert sum(s.length for s in apt.walls) == 1.0

    @pytest.mark.parametrize("beta", [0.25, 0.5, 0.75, 1.0])
    @pytest.mark.parametrize("side", [0.125, 0.5, 1.0, 2.0])
    def test_containments(self, beta, side):
        cube = Box((0.0, 0.0), (side, side))
        apt = apartment_geometry(cube, beta)
        w = apt.half_width
        assert w <= side / 8.0 + 1e-15
        for corner in (apt.room.lo, apt.room.hi):
            assert apt.envelope.contains(corner)
        for corner in (apt.envelope.lo, apt.envelope.hi):
            assert cube.contains(corner)
        half = Box(
            (cube.center[0] - side / 4, cube.center[1] - side / 4),
            (cube.center[0] + side / 4, cube.center[1] + side / 4),
        )
        for corner in (apt.passage.lo, apt.passage.hi):
            assert half.contains(corner)
        for seg in apt.walls:
            for endpoint in (seg.a, seg.b):
                assert apt.envelope.contains(endpoint)

    def test_walls_leave_door_open(self):
        apt = apartment_geometry(Box((0.0, 0.0), (1.0, 1.0)), 0.5)
        w = apt.half_width
        door = (0.5, 0.625)  # center of the opening in the room top
        assert all(
            point_segment_distance(door, s) >= w for s in apt.walls
        )
        # top of the passage mouth is open as well
        top = (0.5, 0.625 + w)
        assert all(
            point_segment_distance(top, s) >= w for s in apt.walls
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            apartment_geometry(Box((0.0, 0.0), (1.0, 1.0)), 0.0)
        with pytest.raises(ValueError):
            apartment_geometry(Box((0.0, 0.0), (1.0, 1.0)), 1.5)
        with pytest.raises(ValueError):
            apartment_geometry(Box((0.0, 0.0), (8.0, 8.0)), 0.5)
        with pytest.raises(ValueError):
            apartment_geometry(Box((0.0, 0.0), (1.0, 2.0)), 0.5)


class _FakeDecomposition:
    """Stand-in with the attributes build_beta_version needs."""

    def __init__(self, boxes):
        self._boxes = boxes
        self.n_cubes = len(boxes)
        self.j_max = 1

    def cube_box(self, i):
        return self._boxes[i]


class TestBetaVersion:
    def _tiny(self):
        base = build_unit_square()
        dec = _FakeDecomposition(
            [Box((0.0, 0.0), (0.5, 0.5)), Box((0.5, 0.0), (1.0, 0.5))]
        )
        return build_beta_version(base, dec, 0.5)

    def test_wall_count(self):
        dom = self._tiny()
        assert len(dom.walls) == 14
        assert len(dom.apartments) == 2

    def test_membership_and_distance(self):
        dom = self._tiny()
        apt = dom.apartments[0]
        room_center = apt.room.center
        assert dom.membership(room_center)
        # a point on the room's bottom wall is excluded
        wall_pt = (apt.room.center[0], apt.room.lo[1])
        assert not dom.membership(wall_pt)
        assert dom.boundary_distance(wall_pt) == 0.0
        d = dom.boundary_distance((wall_pt[0], wall_pt[1] + 1e-6))
        assert abs(d - 1e-6) < 1e-12
        # base boundary still wins far away from the walls
        assert dom.boundary_distance((0.5, 0.9375)) == 0.0625

    def test_grid_membership_matches_pointwise(self):
        dom = self._tiny()
        xs = np.arange(0.0, 1.0 + 1e-9, 0.015625)
        ys = xs.copy()
        mask = dom.grid_membership(xs, ys)
        for i in range(0, len(xs), 2):
            for j in range(0, len(ys), 2):
                assert mask[i, j] == dom.membership(
                    (float(xs[i]), float(ys[j]))
                )

    def test_edge_blockers_compose(self):
        dom = self._tiny()
        slo, shi, walls = dom.edge_blockers()
        assert len(slo) == 0
        assert len(walls) == len(dom.base.segments) + 14


class TestDomainFiles:
    @pytest.mark.parametrize("make", ["disk", "union", "beta"])
    def test_round_trip(self, make, tmp_path):
        if make == "disk":
            dom = build_disk_minus_fractal(1.25, 3)
        elif make == "union":
            dom = build_l_shape()
        else:
            base = build_unit_square()
            dec = _FakeDecomposition([Box((0.25, 0.25), (0.75, 0.75))])
            dom = build_beta_version(base, dec, 0.5)
        path = os.path.join(tmp_path, "dom.txt")
        save_domain(dom, path)
        loaded = load_domain(path)
        rng = np.random.default_rng(3)
        for p in rng.uniform(-2.0, 2.0, size=(200, 2)):
            p = (float(p[0]), float(p[1]))
            assert loaded.boundary_distance(p) == dom.boundary_distance(p)
            assert loaded.membership(p) == dom.membership(p)
        path2 = os.path.join(tmp_path, "dom2.txt")
        save_domain(loaded, path2)
        with open(path) as f1, open(path2) as f2:
            assert f1.read() == f2.read()

    def test_header_rejected(self, tmp_path):
        path = os.path.join(tmp_path, "bad.txt")
        with open(path, "w") as fh:
            fh.write("domain v2\n")
        with pytest.raises(ValueError):
            load_domain(path)
