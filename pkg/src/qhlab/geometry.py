"""Axis-aligned geometric primitives and a static spatial index.

Everything downstream (domain oracles, Whitney decompositions, chain
statistics) reduces to exact distance queries between points, boxes and
axis-aligned segments.  Coordinates of the fixtures are dyadic rationals,
so all the predicates here are exact in binary floating point.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

EPS_GEOM = 1e-12  # membership tolerance near walls; never used in distances

Point = tuple[float, ...]


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box given by componentwise lo <= hi."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        # normalize to plain floats so repr round-trips and numpy scalars
        # never leak into files
        object.__setattr__(self, "lo", tuple(float(a) for a in self.lo))
        object.__setattr__(self, "hi", tuple(float(b) for b in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box needs lo <= hi in every coordinate")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> Point:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        return math.hypot(*(b - a for a, b in zip(self.lo, self.hi)))

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def contains(self, p: Point, strict: bool = False) -> bool:
        if strict:
            return all(a < x < b for x, a, b in zip(p, self.lo, self.hi))
        return all(a <= x <= b for x, a, b in zip(p, self.lo, self.hi))

    def intersects(self, other: "Box") -> bool:
        """Closed-box intersection test (shared faces count)."""
        return all(
            a <= d and c <= b
            for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def dilate(self, factor: float) -> "Box":
        """Concentric dilation: factor 9/8 grows each side by that ratio."""
        c = self.center
        return Box(
            tuple(x + factor * (a - x) for x, a in zip(c, self.lo)),
            tuple(x + factor * (b - x) for x, b in zip(c, self.hi)),
        )

    def union_bound(self, other: "Box") -> "Box":
        return Box(
            tuple(min(a, c) for a, c in zip(self.lo, other.lo)),
            tuple(max(b, d) for b, d in zip(self.hi, other.hi)),
        )


@dataclass(frozen=True)
class Segment:
    """Axis-aligned closed segment; `kind` tags its role (wall, face, chord)."""

    a: tuple[float, float]
    b: tuple[float, float]
    kind: str = "face"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))

    @property
    def axis(self) -> int:
        """0 if the segment runs along x, 1 if along y."""
        if self.a[1] == self.b[1]:
            return 0
        if self.a[0] == self.b[0]:
            return 1
        raise ValueError("segment is not axis-aligned")

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def as_box(self) -> Box:
        """Degenerate box with the same point set (exact for axis alignment)."""
        return Box(
            (min(self.a[0], self.b[0]), min(self.a[1], self.b[1])),
            (max(self.a[0], self.b[0]), max(self.a[1], self.b[1])),
        )


def point_box_distance(p: Point, box: Box) -> float:
    """Euclidean distance from p to the closed box (0 inside)."""
    # math.hypot throughout so box and segment queries round identically
    return math.hypot(
        *(
            a - x if x < a else (x - b if x > b else 0.0)
            for x, a, b in zip(p, box.lo, box.hi)
        )
    )


def point_box_inner_margin(p: Point, box: Box) -> float:
    """Distance from an interior point to the box boundary (<=0 outside)."""
    return min(min(x - a, b - x) for x, a, b in zip(p, box.lo, box.hi))


def point_segment_distance(p: Point, seg: Segment) -> float:
    """Distance from p to the closed segment (general orientation)."""
    ax, ay = seg.a
    bx, by = seg.b
    dx, dy = bx - ax, by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / l2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def box_box_distance(lo1, hi1, lo2, hi2) -> float:
    """Distance between two closed boxes given as coordinate tuples."""
    return math.hypot(
        *(
            max(a2 - b1, a1 - b2, 0.0)
            for a1, b1, a2, b2 in zip(lo1, hi1, lo2, hi2)
        )
    )


def box_circle_distance(lo, hi, center, radius: float) -> float:
    """Distance from a closed box to the circle |x - center| = radius.

    Exact: uses the min and max of |x - center| over the box.
    """
    near2 = 0.0
    far2 = 0.0
    for a, b, c in zip(lo, hi, center):
        g = max(a - c, c - b, 0.0)
        near2 += g * g
        far2 += max(b - c, c - a) ** 2
    near, far = math.sqrt(near2), math.sqrt(far2)
    if near >= radius:
        return near - radius
    if far <= radius:
        return radius - far
    return 0.0


@dataclass(frozen=True)
class DyadicCube:
    """Cube of the dyadic lattice spanned by a square power-of-two root box.

    `level` counts subdivisions of the root, `index` the lattice position.
    The realization as a Box is exact because the root side is a power of
    two and all fixture corners are dyadic.
    """

    level: int
    index: tuple[int, ...]
    root: Box

    def __post_init__(self):
        sides = self.root.sides
        if len(set(sides)) != 1:
            raise ValueError("root box must be a cube")
        m = math.log2(sides[0])
        if m != round(m):
            raise ValueError("root side must be a power of two")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        n = 1 << self.level
        if any(not (0 <= i < n) for i in self.index):
            raise ValueError("index outside the level-%d lattice" % self.level)

    @property
    def side(self) -> float:
        return self.root.sides[0] / (1 << self.level)

    @property
    def abs_level(self) -> int:
        """Level against side 1: cube side is exactly 2**(-abs_level)."""
        return self.level - round(math.log2(self.root.sides[0]))

    @property
    def box(self) -> Box:
        s = self.side
        lo = tuple(a + i * s for a, i in zip(self.root.lo, self.index))
        return Box(lo, tuple(x + s for x in lo))

    @property
    def center(self) -> Point:
        s = self.side
        return tuple(
            a + i * s + s / 2 for a, i in zip(self.root.lo, self.index)
        )

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("root cube has no parent")
        return DyadicCube(
            self.level - 1, tuple(i // 2 for i in self.index), self.root
        )


def dyadic_children(cube: DyadicCube) -> list[DyadicCube]:
    """The 2**n children, ordered lexicographically by index."""
    n = cube.root.dim
    out = []
    for m in range(1 << n):
        idx = tuple(
            2 * cube.index[k] + ((m >> (n - 1 - k)) & 1) for k in range(n)
        )
        out.append(DyadicCube(cube.level + 1, idx, cube.root))
    return out


class SpatialIndex:
    """Static bounding-volume hierarchy over axis-aligned boxes.

    Built once by recursive longest-axis median split with leaf capacity 8.
    Queries return candidate supersets; distance queries are exact minima
    over the stored boxes.  Segments enter as their degenerate boxes, which
    have the same point set when axis-aligned.
    """

    LEAF = 8

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise ValueError("expected (N, dim) lo/hi arrays")
        self.lo = lo
        self.hi = hi
        self.n = len(lo)
        self.order = np.arange(self.n)
        # flat node arrays: bounds, children (-1 for leaf), leaf slice
        self.node_lo: list[np.ndarray] = []
        self.node_hi: list[np.ndarray] = []
        self.node_left: list[int] = []
        self.node_right: list[int] = []
        self.node_start: list[int] = []
        self.node_count: list[int] = []
        if self.n:
            self._build(0, self.n)

    def _build(self, start: int, stop: int) -> int:
        ids = self.order[start:stop]
        blo = self.lo[ids].min(axis=0)
        bhi = self.hi[ids].max(axis=0)
        node = len(self.node_lo)
        self.node_lo.append(blo)
        self.node_hi.append(bhi)
        self.node_left.append(-1)
        self.node_right.append(-1)
        self.node_start.append(start)
        self.node_count.append(stop - start)
        if stop - start > self.LEAF:
            cen = (self.lo[ids] + self.hi[ids]) / 2
            axis = int(np.argmax(bhi - blo))
            mid = (stop - start) // 2
            part = np.argpartition(cen[:, axis], mid)
            self.order[start:stop] = ids[part]
            self.node_left[node] = self._build(start, start + mid)
            self.node_right[node] = self._build(start + mid, stop)
        return node

    def _node_point_dist(self, node: int, p) -> float:
        # same hypot rounding as the leaf tests keeps the bound admissible
        return math.hypot(
            *(
                a - x if x < a else (x - b if x > b else 0.0)
                for x, a, b in zip(p, self.node_lo[node], self.node_hi[node])
            )
        )

    def query_point(self, p: Point, radius: float) -> list[int]:
        """Ids of all boxes within `radius` of p, plus possibly a few more
        from shared leaves (a candidate superset; callers re-test)."""
        if not self.n:
            return []
        out: list[int] = []
        stack = [0]
        while stack:
            node = stack.pop()
            if self._node_point_dist(node, p) > radius:
                continue
            if self.node_left[node] < 0:
                s = self.node_start[node]
                out.extend(self.order[s : s + self.node_count[node]])
            else:
                stack.append(self.node_left[node])
                stack.append(self.node_right[node])
        return [int(i) for i in out]

    def nearest_point_distance(self, p: Point) -> float:
        """Exact min distance from p to the stored boxes (inf when empty)."""
        if not self.n:
            return math.inf
        best = math.inf
        heap = [(self._node_point_dist(0, p), 0)]
        while heap:
            d, node = heapq.heappop(heap)
            if d >= best:
                break
            if self.node_left[node] < 0:
                s = self.node_start[node]
                for i in self.order[s : s + self.node_count[node]]:
                    di = math.hypot(
                        *(
                            a - x if x < a else (x - b if x > b else 0.0)
                            for x, a, b in zip(p, self.lo[i], self.hi[i])
                        )
                    )
                    if di < best:
                        best = di
            else:
                for child in (self.node_left[node], self.node_right[node]):
                    dc = self._node_point_dist(child, p)
                    if dc < best:
                        heapq.heappush(heap, (dc, child))
        return best

    def nearest_box_distance(self, lo, hi) -> float:
        """Exact min distance from a query box to the stored boxes."""
        if not self.n:
            return math.inf

        def node_dist(node: int) -> float:
            return box_box_distance(
                lo, hi, self.node_lo[node], self.node_hi[node]
            )

        best = math.inf
        heap = [(node_dist(0), 0)]
        while heap:
            d, node = heapq.heappop(heap)
            if d >= best:
                break
            if self.node_left[node] < 0:
                s = self.node_start[node]
                for i in self.order[s : s + self.node_count[node]]:
                    di = box_box_distance(lo, hi, self.lo[i], self.hi[i])
                    if di < best:
                        best = di
            else:
                for child in (self.node_left[node], self.node_right[node]):
                    dc = node_dist(child)
                    if dc < best:
                        heapq.heappush(heap, (dc, child))
        return best


def index_from_boxes(boxes: list[Box]) -> SpatialIndex:
    if not boxes:
        return SpatialIndex(np.zeros((0, 2)), np.zeros((0, 2)))
    lo = np.array([b.lo for b in boxes], dtype=float)
    hi = np.array([b.hi for b in boxes], dtype=float)
    return SpatialIndex(lo, hi)


def index_from_segments(segments: list[Segment]) -> SpatialIndex:
    return index_from_boxes([s.as_box() for s in segments])
