"""Domain oracles for the experiment fixtures.

Three families are served, all as open planar sets with exact membership
and signed boundary-distance queries:

* ``B(0, R) \\ K``: a disc with a four-corner Cantor-type obstacle, where
  ``K`` is the level-j iterate of the self-similar system tuned so the
  limit set has a prescribed box dimension ``lam``.
* finite unions of closed axis-aligned boxes (squares, L-shapes, ...),
  with the boundary extracted exactly as axis-aligned face segments.
* the "room and passage" modification: inside every Whitney cube of a
  base domain a walled room is carved out, reachable only through a
  narrow passage whose width is a power ``(side/8)**(1/beta)`` of the
  cube side.  Smaller ``beta`` means disproportionately narrower
  passages at small scales.

``boundary_distance`` is signed: positive inside the domain, zero or
negative outside, and 1-Lipschitz.  Membership is ``distance > EPS_GEOM``
so points within the geometric tolerance of a wall classify as outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EPS_GEOM,
    Box,
    Point,
    Segment,
    SpatialIndex,
    index_from_boxes,
    index_from_segments,
)

MAX_DIAMETER = 4.0  # every oracle is rescaled (by a power of two) below this


# ---------------------------------------------------------------------------
# four-corner iterated function system


@dataclass(frozen=True)
class IfsFourCorner:
    """Four contractions x -> ratio*x + z_i on the square [-1, 1]^2.

    ``ratio = 4**(-1/lam)`` makes the attractor's box dimension equal to
    ``lam``; ``kappa = 1 - 2*ratio`` is the relative gap between the four
    corner images and controls the John constant of the complement.
    """

    lam: float
    kappa: float
    ratio: float
    centers: tuple[tuple[float, float], ...]
    base: Box

    @property
    def dimension(self) -> float:
        return -math.log(4.0) / math.log(self.ratio)


def make_four_corner_ifs(lam: float) -> IfsFourCorner:
    if not (1.0 <= lam < 2.0):
        raise ValueError("lambda must lie in [1,2)")
    ratio = 4.0 ** (-1.0 / lam)
    kappa = 1.0 - 2.0 * ratio
    z = kappa + ratio
    centers = ((z, z), (-z, z), (-z, -z), (z, -z))
    return IfsFourCorner(
        lam, kappa, ratio, centers, Box((-1.0, -1.0), (1.0, 1.0))
    )


def ifs_iterate(ifs: IfsFourCorner, depth: int, cap: int = 4**12) -> list[Box]:
    """All level-`depth` images of the base square: 4**depth boxes of side
    2*ratio**depth, returned in composition-lexicographic order."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if 4**depth > cap:
        raise ValueError("4**depth exceeds the box cap %d" % cap)
    cen = np.array([ifs.base.center], dtype=float)
    half = np.array([ifs.base.sides[0] / 2], dtype=float)
    for _ in range(depth):
        zs = np.array(ifs.centers, dtype=float)
        cen = (ifs.ratio * cen[:, None, :] + zs[None, :, :]).reshape(-1, 2)
        half = np.repeat(half * ifs.ratio, 4)
    return [
        Box((c[0] - h, c[1] - h), (c[0] + h, c[1] + h))
        for c, h in zip(cen, half)
    ]


# ---------------------------------------------------------------------------
# oracle base


class DomainOracle:
    """Shared query surface for all domain families.

    Subclasses fill in ``bbox``, ``basepoint``, ``scale``, ``provenance``
    and the primitive arrays used by exact distance queries.
    """

    bbox: Box
    basepoint: Point
    scale: float = 1.0
    provenance: dict

    def boundary_distance(self, p: Point) -> float:
        raise NotImplementedError

    def membership(self, p: Point) -> bool:
        return self.boundary_distance(p) > EPS_GEOM

    # exact geometry exposed to the Whitney builder -----------------------
    def primitive_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) arrays of boxes whose union contains the boundary.

        Segments appear as degenerate boxes; a circle (if any) is reported
        separately through the ``circle`` attribute.
        """
        raise NotImplementedError

    circle: tuple[Point, float] | None = None

    # vectorized helpers for grid discretizations -------------------------
    def grid_membership(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def edge_blockers(self) -> tuple[np.ndarray, np.ndarray, list[Segment]]:
        """Solid obstacle boxes (lo, hi) plus thin wall segments that grid
        edges must not cross."""
        raise NotImplementedError


def _mark_boxes_false(
    mask: np.ndarray, xs: np.ndarray, ys: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> None:
    """Set mask[i, j] = False for nodes inside the closed boxes (exact)."""
    for k in range(len(lo)):
        i0 = int(np.searchsorted(xs, lo[k, 0], side="left"))
        i1 = int(np.searchsorted(xs, hi[k, 0], side="right"))
        j0 = int(np.searchsorted(ys, lo[k, 1], side="left"))
        j1 = int(np.searchsorted(ys, hi[k, 1], side="right"))
        if i0 < i1 and j0 < j1:
            mask[i0:i1, j0:j1] = False


# ---------------------------------------------------------------------------
# disc minus fractal obstacle


class DiskMinusFractal(DomainOracle):
    def __init__(
        self,
        lam: float,
        depth: int,
        radius: float = 2.0,
        cap: int = 4**12,
    ):
        if radius <= 1.0:
            raise ValueError("radius must exceed the obstacle square")
        self.scale = 1.0
        while 2.0 * radius * self.scale > MAX_DIAMETER:
            self.scale *= 0.5
        self.ifs = make_four_corner_ifs(lam)
        boxes = ifs_iterate(self.ifs, depth, cap=cap)
        if self.scale != 1.0:
            boxes = [
                Box(
                    tuple(a * self.scale for a in b.lo),
                    tuple(a * self.scale for a in b.hi),
                )
                for b in boxes
            ]
        self.radius = radius * self.scale
        self.depth = depth
        self.lam = lam
        self.boxes = boxes
        self.box_lo = np.array([b.lo for b in boxes], dtype=float)
        self.box_hi = np.array([b.hi for b in boxes], dtype=float)
        self.index = index_from_boxes(boxes)
        r = self.radius
        self.bbox = Box((-r, -r), (r, r))
        self.basepoint = (0.0, 0.0)
        self.circle = ((0.0, 0.0), r)
        self.provenance = {
            "builder": "four_corner_complement",
            "lambda": lam,
            "depth": depth,
            "kappa": self.ifs.kappa,
            "ratio": self.ifs.ratio,
            "radius": radius,
            "scale": self.scale,
        }

    @classmethod
    def from_records(cls, params: dict, boxes: list[Box]):
        self = cls.__new__(cls)
        self.lam = float(params["lambda"])
        self.depth = int(params["depth"])
        self.scale = float(params.get("scale", 1.0))
        self.radius = float(params["radius"]) * self.scale
        self.ifs = make_four_corner_ifs(self.lam)
        self.boxes = boxes
        self.box_lo = np.array([b.lo for b in boxes], dtype=float)
        self.box_hi = np.array([b.hi for b in boxes], dtype=float)
        self.index = index_from_boxes(boxes)
        r = self.radius
        self.bbox = Box((-r, -r), (r, r))
        self.basepoint = (0.0, 0.0)
        self.circle = ((0.0, 0.0), r)
        self.provenance = dict(params)
        return self

    def boundary_distance(self, p: Point) -> float:
        circ = self.radius - math.hypot(p[0], p[1])
        return min(circ, self.index.nearest_point_distance(p))

    def primitive_arrays(self):
        return self.box_lo, self.box_hi

    def grid_membership(self, xs, ys):
        r2 = (xs[:, None] ** 2 + ys[None, :] ** 2)
        mask = np.sqrt(r2) < self.radius - EPS_GEOM
        _mark_boxes_false(mask, xs, ys, self.box_lo, self.box_hi)
        return mask

    def edge_blockers(self):
        return self.box_lo, self.box_hi, []


def build_disk_minus_fractal(
    lam: float, depth: int, radius: float = 2.0
) -> DiskMinusFractal:
    return DiskMinusFractal(lam, depth, radius)


# ---------------------------------------------------------------------------
# finite unions of closed boxes


class BoxUnionDomain(DomainOracle):
    """Interior of a finite union of closed axis-aligned boxes.

    The boundary is extracted exactly on the compressed coordinate grid;
    membership and distance then reduce to closed-box containment plus
    distance to the face segments.
    """

    def __init__(self, boxes: list[Box]):
        if not boxes:
            raise ValueError("need at least one box")
        lo = np.array([b.lo for b in boxes], dtype=float)
        hi = np.array([b.hi for b in boxes], dtype=float)
        bb_lo = lo.min(axis=0)
        bb_hi = hi.max(axis=0)
        self.scale = 1.0
        while math.hypot(*(bb_hi - bb_lo)) * self.scale > MAX_DIAMETER:
            self.scale *= 0.5
        if self.scale != 1.0:
            lo = lo * self.scale
            hi = hi * self.scale
            boxes = [
                Box(tuple(a), tuple(b)) for a, b in zip(lo, hi)
            ]
        self.boxes = boxes
        self.box_lo = lo
        self.box_hi = hi
        self.box_index = index_from_boxes(boxes)

        xs = np.unique(np.concatenate([lo[:, 0], hi[:, 0]]))
        ys = np.unique(np.concatenate([lo[:, 1], hi[:, 1]]))
        nx, ny = len(xs) - 1, len(ys) - 1
        filled = np.zeros((nx, ny), dtype=bool)
        for k in range(len(boxes)):
            i0 = int(np.searchsorted(xs, lo[k, 0]))
            i1 = int(np.searchsorted(xs, hi[k, 0]))
            j0 = int(np.searchsorted(ys, lo[k, 1]))
            j1 = int(np.searchsorted(ys, hi[k, 1]))
            filled[i0:i1, j0:j1] = True
        if not filled.any():
            raise ValueError("degenerate box union")
        self._check_connected(filled)

        self.area = float(
            np.sum(
                np.outer(np.diff(xs), np.diff(ys))[filled]
            )
        )
        self.segments = self._extract_boundary(xs, ys, filled)
        self.seg_index = index_from_segments(self.segments)
        self.bbox = Box(tuple(lo.min(axis=0)), tuple(hi.max(axis=0)))
        # basepoint: center of the largest filled cell, lexicographic ties
        areas = np.outer(np.diff(xs), np.diff(ys))
        areas = np.where(filled, areas, -1.0)
        best = np.unravel_index(int(np.argmax(areas)), areas.shape)
        self.basepoint = (
            (xs[best[0]] + xs[best[0] + 1]) / 2,
            (ys[best[1]] + ys[best[1] + 1]) / 2,
        )
        self.provenance = {
            "builder": "box_union",
            "count": len(boxes),
            "scale": self.scale,
        }

    @staticmethod
    def _check_connected(filled: np.ndarray) -> None:
        nx, ny = filled.shape
        seen = np.zeros_like(filled)
        stack = []
        start = np.argwhere(filled)
        stack.append(tuple(start[0]))
        seen[tuple(start[0])] = True
        while stack:
            i, j = stack.pop()
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < nx and 0 <= b < ny and filled[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    stack.append((a, b))
        if seen.sum() != filled.sum():
            raise ValueError("box union has disconnected interior")

    @staticmethod
    def _extract_boundary(xs, ys, filled) -> list[Segment]:
        nx, ny = filled.shape
        segs: list[Segment] = []

        def f(i, j):
            return 0 <= i < nx and 0 <= j < ny and filled[i, j]

        # vertical faces at x = xs[i]; merge runs in j
        for i in range(nx + 1):
            j = 0
            while j < ny:
                if f(i - 1, j) != f(i, j):
                    j0 = j
                    while j < ny and f(i - 1, j) != f(i, j):
                        j += 1
                    segs.append(
                        Segment((xs[i], ys[j0]), (xs[i], ys[j]), "face")
                    )
                else:
                    j += 1
        # horizontal faces at y = ys[j]; merge runs in i
        for j in range(ny + 1):
            i = 0
            while i < nx:
                if f(i, j - 1) != f(i, j):
                    i0 = i
                    while i < nx and f(i, j - 1) != f(i, j):
                        i += 1
                    segs.append(
                        Segment((xs[i0], ys[j]), (xs[i], ys[j]), "face")
                    )
                else:
                    i += 1
        return segs

    def _in_closed_union(self, p: Point) -> bool:
        for k in self.box_index.query_point(p, 0.0):
            if self.boxes[k].contains(p):
                return True
        return False

    def boundary_distance(self, p: Point) -> float:
        d = self.seg_index.nearest_point_distance(p)
        return d if self._in_closed_union(p) else -d

    def primitive_arrays(self):
        return self.seg_index.lo, self.seg_index.hi

    def grid_membership(self, xs, ys):
        mask = np.zeros((len(xs), len(ys)), dtype=bool)
        for k in range(len(self.boxes)):
            i0 = int(np.searchsorted(xs, self.box_lo[k, 0], side="left"))
            i1 = int(np.searchsorted(xs, self.box_hi[k, 0], side="right"))
            j0 = int(np.searchsorted(ys, self.box_lo[k, 1], side="left"))
            j1 = int(np.searchsorted(ys, self.box_hi[k, 1], side="right"))
            mask[i0:i1, j0:j1] = True
        for seg in self.segments:
            b = seg.as_box()
            i0 = int(np.searchsorted(xs, b.lo[0], side="left"))
            i1 = int(np.searchsorted(xs, b.hi[0], side="right"))
            j0 = int(np.searchsorted(ys, b.lo[1], side="left"))
            j1 = int(np.searchsorted(ys, b.hi[1], side="right"))
            mask[i0:i1, j0:j1] = False
        return mask

    def edge_blockers(self):
        empty = np.zeros((0, 2))
        return empty, empty, list(self.segments)


def build_box_union(boxes: list[Box]) -> BoxUnionDomain:
    return BoxUnionDomain(boxes)


def build_unit_square() -> BoxUnionDomain:
    return build_box_union([Box((0.0, 0.0), (1.0, 1.0))])


def build_l_shape() -> BoxUnionDomain:
    """Three unit squares in an L with a reentrant corner at (1, 1)."""
    return build_box_union(
        [
            Box((0.0, 0.0), (1.0, 1.0)),
            Box((1.0, 0.0), (2.0, 1.0)),
            Box((0.0, 1.0), (1.0, 2.0)),
        ]
    )


# ---------------------------------------------------------------------------
# room-and-passage surgery


@dataclass(frozen=True)
class ApartmentGeometry:
    """Room, passage and wall layout carved inside one cube.

    With cube side L centered at c: the room is the open central quarter
    cube; the passage of half-width w = (L/8)**(1/beta) sits on top of the
    room; the long passage is the open column from the cube center line up
    to the top face and its trace re-opens doors through the room wall and
    the passage mouth.  ``walls`` is the closed leftover of the room and
    passage boundaries once the doors are removed.
    """

    cube: Box
    beta: float
    room: Box
    passage: Box
    long_passage: Box
    envelope: Box
    walls: tuple[Segment, ...]

    @property
    def side(self) -> float:
        return self.cube.sides[0]

    @property
    def half_width(self) -> float:
        return (self.side / 8.0) ** (1.0 / self.beta)


def apartment_geometry(cube: Box, beta: float) -> ApartmentGeometry:
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    L = cube.sides[0]
    # dyadic cubes are exactly square; the tolerance only admits the
    # 1-ulp skew of corner arithmetic on arbitrary float centers
    if abs(L - cube.sides[1]) > 1e-12 * max(L, 1.0):
        raise ValueError("apartment surgery needs a square cube")
    if L > 4.0:
        raise ValueError("cube side must be <= 4")
    cx, cy = cube.center
    w = (L / 8.0) ** (1.0 / beta)
    room = Box((cx - L / 8, cy - L / 8), (cx + L / 8, cy + L / 8))
    passage = Box((cx - w, cy + L / 8), (cx + w, cy + L / 8 + w))
    long_passage = Box((cx - w, cy), (cx + w, cy + L / 2))
    envelope = Box(
        (cx - 3 * L / 8, cy - 3 * L / 8), (cx + 3 * L / 8, cy + 3 * L / 8)
    )
    r0, r1 = room.lo, room.hi
    walls = (
        Segment((r0[0], r0[1]), (r1[0], r0[1]), "wall"),  # room bottom
        Segment((r0[0], r0[1]), (r0[0], r1[1]), "wall"),  # room left
        Segment((r1[0], r0[1]), (r1[0], r1[1]), "wall"),  # room right
        Segment((r0[0], r1[1]), (cx - w, r1[1]), "wall"),  # top, left of door
        Segment((cx + w, r1[1]), (r1[0], r1[1]), "wall"),  # top, right of door
        Segment((cx - w, r1[1]), (cx - w, r1[1] + w), "wall"),  # mouth left
        Segment((cx + w, r1[1]), (cx + w, r1[1] + w), "wall"),  # mouth right
    )
    return ApartmentGeometry(
        cube, beta, room, passage, long_passage, envelope, walls
    )


class BetaVersionDomain(DomainOracle):
    """Base domain minus the apartment walls of its Whitney cubes.

    Because adjacent closed Whitney cubes glue across faces and every wall
    is strictly interior to its own cube, the resulting open set equals
    the base domain with the wall segments removed; its boundary is the
    base boundary together with the walls.
    """

    def __init__(
        self,
        base: DomainOracle,
        walls: list[Segment],
        beta: float,
        provenance: dict | None = None,
    ):
        self.base = base
        self.beta = beta
        self.walls = list(walls)
        self.wall_index = index_from_segments(self.walls)
        self.bbox = base.bbox
        self.basepoint = base.basepoint
        self.scale = base.scale
        self.circle = base.circle
        prov = {
            "builder": "beta_version",
            "beta": beta,
            "wall_count": len(self.walls),
        }
        prov.update(
            {("base_" + k): v for k, v in base.provenance.items()}
        )
        if provenance:
            prov.update(provenance)
        self.provenance = prov

    def boundary_distance(self, p: Point) -> float:
        return min(
            self.base.boundary_distance(p),
            self.wall_index.nearest_point_distance(p),
        )

    def primitive_arrays(self):
        blo, bhi = self.base.primitive_arrays()
        return (
            np.concatenate([blo, self.wall_index.lo]),
            np.concatenate([bhi, self.wall_index.hi]),
        )

    def grid_membership(self, xs, ys):
        mask = self.base.grid_membership(xs, ys)
        _mark_boxes_false(
            mask, xs, ys, self.wall_index.lo, self.wall_index.hi
        )
        return mask

    def edge_blockers(self):
        slo, shi, walls = self.base.edge_blockers()
        return slo, shi, walls + list(self.walls)


def build_beta_version(
    base: DomainOracle, decomposition, beta: float
) -> BetaVersionDomain:
    """Carve an apartment into every cube of a Whitney decomposition.

    ``decomposition`` only needs ``n_cubes`` and ``cube_box(i)``; its own
    parameters are recorded so the construction is reproducible.
    """

    walls: list[Segment] = []
    apartments: list[ApartmentGeometry] = []
    for i in range(decomposition.n_cubes):
        apt = apartment_geometry(decomposition.cube_box(i), beta)
        apartments.append(apt)
        walls.extend(apt.walls)
    dom = BetaVersionDomain(
        base,
        walls,
        beta,
        provenance={
            "whitney_j_max": decomposition.j_max,
            "base_cubes": decomposition.n_cubes,
        },
    )
    dom.apartments = apartments
    return dom


# ---------------------------------------------------------------------------
# domain v1 file format


def _fmt(x: float) -> str:
    return repr(float(x))


def save_domain(
    oracle: DomainOracle, path: str, comment: str | None = None
) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("domain v1")
    for k, v in oracle.provenance.items():
        lines.append(f"param {k} {v}")
    if isinstance(oracle, DiskMinusFractal):
        (cx, cy), r = oracle.circle
        lines.append(f"circle {_fmt(cx)} {_fmt(cy)} {_fmt(r)} 1")
        for b in oracle.boxes:
            lines.append(
                "box %s %s %s %s"
                % (_fmt(b.lo[0]), _fmt(b.lo[1]), _fmt(b.hi[0]), _fmt(b.hi[1]))
            )
    elif isinstance(oracle, BoxUnionDomain):
        for b in oracle.boxes:
            lines.append(
                "box %s %s %s %s"
                % (_fmt(b.lo[0]), _fmt(b.lo[1]), _fmt(b.hi[0]), _fmt(b.hi[1]))
            )
        for s in oracle.segments:
            lines.append(
                "segment %s %s %s %s %s"
                % (_fmt(s.a[0]), _fmt(s.a[1]), _fmt(s.b[0]), _fmt(s.b[1]), s.kind)
            )
    elif isinstance(oracle, BetaVersionDomain):
        base = oracle.base
        if isinstance(base, DiskMinusFractal):
            (cx, cy), r = base.circle
            lines.append(f"circle {_fmt(cx)} {_fmt(cy)} {_fmt(r)} 1")
            boxes = base.boxes
        elif isinstance(base, BoxUnionDomain):
            boxes = base.boxes
        else:
            raise ValueError("unsupported base oracle for saving")
        for b in boxes:
            lines.append(
                "box %s %s %s %s"
                % (_fmt(b.lo[0]), _fmt(b.lo[1]), _fmt(b.hi[0]), _fmt(b.hi[1]))
            )
        for s in oracle.walls:
            lines.append(
                "segment %s %s %s %s %s"
                % (_fmt(s.a[0]), _fmt(s.a[1]), _fmt(s.b[0]), _fmt(s.b[1]), s.kind)
            )
    else:
        raise ValueError("unsupported oracle type for saving")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_domain(path: str) -> DomainOracle:
    params: dict = {}
    boxes: list[Box] = []
    segments: list[Segment] = []
    circle = None
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != "domain v1":
            raise ValueError("not a domain v1 file")
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "param":
                params[parts[1]] = " ".join(parts[2:])
            elif parts[0] == "box":
                vals = [float(v) for v in parts[1:5]]
                boxes.append(Box((vals[0], vals[1]), (vals[2], vals[3])))
            elif parts[0] == "segment":
                vals = [float(v) for v in parts[1:5]]
                segments.append(
                    Segment((vals[0], vals[1]), (vals[2], vals[3]), parts[5])
                )
            elif parts[0] == "circle":
                vals = [float(v) for v in parts[1:5]]
                circle = ((vals[0], vals[1]), vals[2], int(vals[3]))
            else:
                raise ValueError("unknown record %r" % parts[0])
    builder = params.get("builder")
    if builder == "four_corner_complement":
        return DiskMinusFractal.from_records(params, boxes)
    if builder == "box_union":
        dom = build_box_union(boxes)
        return dom
    if builder == "beta_version":
        base_builder = params.get("base_builder")
        if base_builder == "four_corner_complement":
            base_params = {
                k[len("base_") :]: v
                for k, v in params.items()
                if k.startswith("base_")
            }
            base = DiskMinusFractal.from_records(base_params, boxes)
        elif base_builder == "box_union":
            base = build_box_union(boxes)
        else:
            raise ValueError("unknown base builder %r" % base_builder)
        walls = [s for s in segments if s.kind == "wall"]
        return BetaVersionDomain(
            base, walls, float(params["beta"]), provenance=params
        )
    raise ValueError("unknown builder %r" % builder)
