"""Upper Minkowski dimension estimators and the disjoint-ball packer.

The measured set is always a primitive description: solid boxes (fractal
iterates), axis-aligned segments (box-union faces, surgery walls), and at
most one circle, which box counting replaces by its inscribed regular
256-gon chords.  Counting grids are anchored at the origin with half-open
cells [k r, (k+1) r)^2.

Exactness notes: for boxes and axis segments the touched-cell ranges are
integer intervals computed by floor division, so dyadic inputs on dyadic
scales count exactly.  Chords are traversed by marking the cell of the
midpoint between consecutive gridline crossings.  N(r) is exactly
nonincreasing when the scale family is nested (each coarse cell a union
of fine cells, e.g. r halving); for unrelated scale pairs the anchored
grids are not nested and monotonicity can fail by small amounts, so the
series builders below only emit nested or self-similar families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box, Segment

CHORDS = 256  # circle realization: inscribed regular polygon


@dataclass(frozen=True)
class SetDescriptor:
    boxes: tuple[Box, ...] = ()
    segments: tuple[Segment, ...] = ()
    circle: tuple[tuple[float, float], float] | None = None

    def bound(self) -> Box:
        corners = []
        for b in self.boxes:
            corners.extend((b.lo, b.hi))
        for s in self.segments:
            corners.extend((s.a, s.b))
        if self.circle is not None:
            (cx, cy), r = self.circle
            corners.extend(((cx - r, cy - r), (cx + r, cy + r)))
        if not corners:
            raise ValueError("empty set descriptor has no bounding box")
        arr = np.asarray(corners, dtype=float)
        return Box(tuple(arr.min(axis=0)), tuple(arr.max(axis=0)))

    def is_empty(self) -> bool:
        return (
            not self.boxes and not self.segments and self.circle is None
        )


def boundary_descriptor(oracle) -> SetDescriptor:
    """Primitive realization of the boundary of an oracle domain."""
    from .domains import BetaVersionDomain, BoxUnionDomain, DiskMinusFractal

    if isinstance(oracle, DiskMinusFractal):
        return SetDescriptor(boxes=tuple(oracle.boxes), circle=oracle.circle)
    if isinstance(oracle, BoxUnionDomain):
        return SetDescriptor(segments=tuple(oracle.segments))
    if isinstance(oracle, BetaVersionDomain):
        base = boundary_descriptor(oracle.base)
        return SetDescriptor(
            boxes=base.boxes,
            segments=base.segments + tuple(oracle.walls),
            circle=base.circle,
        )
    raise ValueError("no boundary descriptor for %r" % type(oracle).__name__)


def _circle_chords(circle) -> list[tuple[float, float, float, float]]:
    (cx, cy), r = circle
    pts = [
        (
            cx + r * math.cos(2 * math.pi * k / CHORDS),
            cy + r * math.sin(2 * math.pi * k / CHORDS),
        )
        for k in range(CHORDS)
    ]
    return [
        (pts[k][0], pts[k][1], pts[(k + 1) % CHORDS][0], pts[(k + 1) % CHORDS][1])
        for k in range(CHORDS)
    ]


def _mark_box(cells: set, lo, hi, r: float) -> None:
    x0 = math.floor(lo[0] / r)
    x1 = math.floor(hi[0] / r)
    y0 = math.floor(lo[1] / r)
    y1 = math.floor(hi[1] / r)
    for a in range(x0, x1 + 1):
        for b in range(y0, y1 + 1):
            cells.add((a, b))


def _mark_chord(cells: set, x1, y1, x2, y2, r: float) -> None:
    """Cells met by a general segment: split at gridline crossings and
    mark the cell of each piece's midpoint (plus both endpoints)."""
    ts = [0.0, 1.0]
    for p1, p2 in ((x1, x2), (y1, y2)):
        if p1 == p2:
            continue
        k0 = math.floor(min(p1, p2) / r)
        k1 = math.floor(max(p1, p2) / r)
        for k in range(k0 + 1, k1 + 1):
            t = (k * r - p1) / (p2 - p1)
            if 0.0 < t < 1.0:
                ts.append(t)
    ts.sort()
    for p in ((x1, y1), (x2, y2)):
        cells.add((math.floor(p[0] / r), math.floor(p[1] / r)))
    for a, b in zip(ts, ts[1:]):
        t = (a + b) / 2.0
        px = x1 + t * (x2 - x1)
        py = y1 + t * (y2 - y1)
        cells.add((math.floor(px / r), math.floor(py / r)))


def box_count(desc: SetDescriptor, r: float, lam: float = 1.0
              ) -> tuple[int, float]:
    """N(r) and the precontent proxy N(r) * pi * r^2 / r^(2 - lam).

    The factor pi treats every counted cell as one r-ball of mass pi r^2
    in the Minkowski sausage; it is a fixed documented normalization, not
    a sharp constant.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if desc.is_empty():
        return 0, 0.0
    bb = desc.bound()
    if r > max(max(bb.sides), 1.0):
        raise ValueError("r exceeds the bounding box")
    cells: set[tuple[int, int]] = set()
    for b in desc.boxes:
        _mark_box(cells, b.lo, b.hi, r)
    for s in desc.segments:
        if s.a[0] == s.b[0] or s.a[1] == s.b[1]:
            bb = s.as_box()  # axis segment: its bbox is the segment
            _mark_box(cells, bb.lo, bb.hi, r)
        else:
            _mark_chord(cells, s.a[0], s.a[1], s.b[0], s.b[1], r)
    if desc.circle is not None:
        for x1, y1, x2, y2 in _circle_chords(desc.circle):
            _mark_chord(cells, x1, y1, x2, y2, r)
    n = len(cells)
    precontent = n * math.pi * r**2 / r ** (2.0 - lam)
    return n, precontent


@dataclass
class BoxCountSeries:
    scales: np.ndarray
    counts: np.ndarray
    precontents: np.ndarray
    lam: float


def box_count_series(
    desc: SetDescriptor,
    scales,
    lam: float = 1.0,
) -> BoxCountSeries:
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    counts = []
    prec = []
    for r in scales:
        n, m = box_count(desc, float(r), lam)
        counts.append(n)
        prec.append(m)
    return BoxCountSeries(
        scales, np.array(counts, dtype=np.int64), np.array(prec), lam
    )


def dyadic_scales(r_max: float, k: int) -> list[float]:
    """Nested family r_max, r_max/2, ..., r_max * 2^(1-k)."""
    return [r_max * 2.0**-i for i in range(k)]


def natural_scales(desc: SetDescriptor, max_scales: int = 10) -> list[float]:
    """Halving scales from a quarter of the bounding box, floored at the
    smallest box side.  Solid boxes read as 2-dimensional to counting
    grids finer than their side, which would poison the slope; segments
    and chords have no such floor."""
    bb = desc.bound()
    r = max(max(bb.sides) / 4.0, 1e-12)
    floor = min((b.hi[0] - b.lo[0] for b in desc.boxes), default=0.0)
    scales = []
    while r >= floor and len(scales) < max_scales:
        scales.append(r)
        r /= 2.0
    if len(scales) < 4:
        raise ValueError("primitive resolution leaves fewer than 4 scales")
    return scales


def geometric_scales(r0: float, ratio: float, k: int) -> list[float]:
    """Self-similar family r0 * ratio^i, i = 0..k-1 (ratio < 1)."""
    return [r0 * ratio**i for i in range(k)]


@dataclass
class DimensionEstimate:
    slope: float
    residual: float
    r_min: float
    r_max: float
    n_used: int


def minkowski_fit(series: BoxCountSeries) -> DimensionEstimate:
    """Least-squares slope of log N against log(1/r), finest half."""
    scales = series.scales
    counts = series.counts
    if len(scales) < 4:
        raise ValueError("need at least 4 scales")
    half = len(scales) // 2
    r = scales[half:]  # scales are stored coarse -> fine
    n = counts[half:]
    if np.any(n <= 0):
        raise ValueError("degenerate series: empty counts at fine scales")
    x = np.log(1.0 / r)
    y = np.log(n.astype(float))
    if float(x.max() - x.min()) == 0.0:
        raise ValueError("degenerate series: repeated scales")
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return DimensionEstimate(
        float(slope), resid, float(r.min()), float(r.max()), len(r)
    )


def whitney_dim_estimate(census: dict[int, int]) -> DimensionEstimate:
    """Slope of log2(count) against absolute level over the finest half."""
    items = sorted((j, c) for j, c in census.items() if c > 0)
    if len(items) < 4:
        raise ValueError("need at least 4 populated levels")
    half = len(items) // 2
    tail = items[half:]
    x = np.array([j for j, _ in tail], dtype=float)
    y = np.log2(np.array([c for _, c in tail], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return DimensionEstimate(
        float(slope), resid, 2.0 ** -x.max(), 2.0 ** -x.min(), len(tail)
    )


# ---------------------------------------------------------------------------
# greedy disjoint-ball packing


def _perimeter_points(b: Box, step: float) -> list[tuple[float, float]]:
    w = b.hi[0] - b.lo[0]
    h = b.hi[1] - b.lo[1]
    per = 2.0 * (w + h)
    if per == 0.0:
        return [b.lo]
    pts = []
    t = 0.0
    while t < per:
        if t < w:
            pts.append((b.lo[0] + t, b.lo[1]))
        elif t < w + h:
            pts.append((b.hi[0], b.lo[1] + (t - w)))
        elif t < 2 * w + h:
            pts.append((b.hi[0] - (t - w - h), b.hi[1]))
        else:
            pts.append((b.lo[0], b.hi[1] - (t - 2 * w - h)))
        t += step
    return pts


def _segment_points(s: Segment, step: float) -> list[tuple[float, float]]:
    L = s.length
    if L == 0.0:
        return [s.a]
    pts = []
    t = 0.0
    while t <= L:
        u = t / L
        pts.append(
            (s.a[0] + u * (s.b[0] - s.a[0]), s.a[1] + u * (s.b[1] - s.a[1]))
        )
        t += step
    if pts[-1] != s.b:
        pts.append(s.b)
    return pts


def greedy_ball_pack(desc: SetDescriptor, r: float
                     ) -> tuple[int, list[tuple[float, float]]]:
    """Greedy maximal packing of disjoint open r-balls centered in the set.

    Candidates walk each primitive in canonical order with step r/2 and
    are accepted when at least 2r from every accepted center (open balls
    touching at a point are still disjoint).  The count lower-bounds the
    maximal packing number; greedy maximality keeps it within the usual
    constant factor of the optimum.
    """
    if not (0.0 < r <= 1.0):
        raise ValueError("r must lie in (0, 1]")
    step = r / 2.0
    candidates: list[tuple[float, float]] = []
    for b in desc.boxes:
        candidates.extend(_perimeter_points(b, step))
    for s in desc.segments:
        candidates.extend(_segment_points(s, step))
    if desc.circle is not None:
        for x1, y1, x2, y2 in _circle_chords(desc.circle):
            candidates.extend(
                _segment_points(Segment((x1, y1), (x2, y2), "chord"), step)
            )
    accepted: list[tuple[float, float]] = []
    cell = 2.0 * r
    grid: dict[tuple[int, int], list[int]] = {}
    for p in candidates:
        a = math.floor(p[0] / cell)
        b = math.floor(p[1] / cell)
        ok = True
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                for k in grid.get((a + da, b + db), ()):
                    q = accepted[k]
                    if math.hypot(p[0] - q[0], p[1] - q[1]) < 2.0 * r:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            grid.setdefault((a, b), []).append(len(accepted))
            accepted.append(p)
    return len(accepted), accepted


# ---------------------------------------------------------------------------
# CSV writers


def save_boxcount_csv(series: BoxCountSeries, path: str,
                      comment: str | None = None) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("r,N,precontent")
    for r, n, m in zip(series.scales, series.counts, series.precontents):
        lines.append("%s,%d,%s" % (repr(float(r)), n, repr(float(m))))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_dimension_csv(rows: list[tuple[str, DimensionEstimate]], path: str,
                       comment: str | None = None) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("source,slope,residual,r_min,r_max,n_used")
    for name, est in rows:
        lines.append(
            "%s,%s,%s,%s,%s,%d"
            % (
                name,
                repr(est.slope),
                repr(est.residual),
                repr(est.r_min),
                repr(est.r_max),
                est.n_used,
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
