"""Whitney decomposition of an oracle domain and its dilated-cube graph.

The decomposition follows the classical recursive rule on the dyadic
lattice of the normalized bounding box: a closed cube Q is accepted when
Q lies in the domain, ``dist(Q, boundary) >= diam(Q)``, and its dyadic
parent fails that test.  Accepted cubes then satisfy the two-sided bound

    diam(Q) <= dist(Q, boundary) <= 4 * diam(Q)

with pairwise disjoint interiors.  Recursion below level ``j_max`` is cut
off and the unresolved cells are kept as truncation records, so the
unresolved region is always explicit.

Distances are exact: cube-to-primitive gaps are evaluated per axis in
closed form (primitives are boxes, degenerate segment boxes, and at most
one circle) and the recursion narrows the candidate primitive set with an
exclusion bound that provably never drops a minimizer for any descendant
cube.

Levels: ``level`` counts subdivisions from the root cube; the absolute
level ``j = level - log2(root_side)`` indexes the census so that cubes of
absolute level j have side exactly ``2**-j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box, box_circle_distance

DILATION = 9.0 / 8.0


@dataclass
class CoverageReport:
    fraction_uncovered: float
    area_uncovered: float
    standard_error_area: float
    n_points: int
    n_member: int


class WhitneyDecomposition:
    def __init__(
        self,
        root: Box,
        j_max: int,
        levels: np.ndarray,
        ix: np.ndarray,
        iy: np.ndarray,
        dist: np.ndarray,
        center_dist: np.ndarray,
        trunc_levels: np.ndarray,
        trunc_ix: np.ndarray,
        trunc_iy: np.ndarray,
        trunc_dist: np.ndarray,
        provenance: dict,
    ):
        self.root = root
        self.j_max = j_max
        self.levels = levels
        self.ix = ix
        self.iy = iy
        self.dist = dist
        self.center_dist = center_dist
        self.trunc_levels = trunc_levels
        self.trunc_ix = trunc_ix
        self.trunc_iy = trunc_iy
        self.trunc_dist = trunc_dist
        self.provenance = provenance
        side = root.sides[0]
        shift = round(math.log2(side))
        if 2.0**shift != side:
            raise ValueError("root side must be a power of two")
        self.root_shift = shift
        self._cell_map: dict | None = None

    # --- basic accessors --------------------------------------------------
    @property
    def n_cubes(self) -> int:
        return len(self.levels)

    def cube_side(self, i: int) -> float:
        return self.root.sides[0] * 2.0 ** -int(self.levels[i])

    def abs_level(self, i: int) -> int:
        return int(self.levels[i]) - self.root_shift

    def cube_box(self, i: int) -> Box:
        s = self.cube_side(i)
        x = self.root.lo[0] + self.ix[i] * s
        y = self.root.lo[1] + self.iy[i] * s
        return Box((x, y), (x + s, y + s))

    def cube_center(self, i: int) -> tuple[float, float]:
        s = self.cube_side(i)
        return (
            self.root.lo[0] + (self.ix[i] + 0.5) * s,
            self.root.lo[1] + (self.iy[i] + 0.5) * s,
        )

    def abs_levels(self) -> np.ndarray:
        return self.levels - self.root_shift

    def sides(self) -> np.ndarray:
        return self.root.sides[0] * np.exp2(-self.levels.astype(float))

    def total_area(self) -> float:
        return float(np.sum(self.sides() ** 2))

    def level_counts(self) -> dict[int, int]:
        """Census j -> number of cubes of side 2**-j (absolute levels)."""
        js, counts = np.unique(self.abs_levels(), return_counts=True)
        return {int(j): int(c) for j, c in zip(js, counts)}

    # --- point location ---------------------------------------------------
    def _cells(self) -> dict:
        if self._cell_map is None:
            self._cell_map = {
                (int(l), int(a), int(b)): i
                for i, (l, a, b) in enumerate(
                    zip(self.levels, self.ix, self.iy)
                )
            }
        return self._cell_map

    def cube_at_point(self, p) -> int | None:
        """Id of an accepted cube whose closed box contains p.

        Points on shared faces belong to several closed cubes; the
        coarsest match wins, then lexicographic cell order.
        """
        cells = self._cells()
        rx, ry = self.root.lo
        rs = self.root.sides[0]
        for level in sorted(set(int(l) for l in np.unique(self.levels))):
            s = rs * 2.0**-level
            fx = math.floor((p[0] - rx) / s)
            fy = math.floor((p[1] - ry) / s)
            cand_x = [fx]
            if p[0] == rx + fx * s:
                cand_x.append(fx - 1)
            cand_y = [fy]
            if p[1] == ry + fy * s:
                cand_y.append(fy - 1)
            for a in sorted(cand_x):
                for b in sorted(cand_y):
                    hit = cells.get((level, a, b))
                    if hit is not None:
                        return hit
        return None

    def covers_point(self, p) -> bool:
        return self.cube_at_point(p) is not None


def _box_prim_distances(lo, hi, plo, phi) -> np.ndarray:
    gx = np.maximum(np.maximum(plo[:, 0] - hi[0], lo[0] - phi[:, 0]), 0.0)
    gy = np.maximum(np.maximum(plo[:, 1] - hi[1], lo[1] - phi[:, 1]), 0.0)
    return np.hypot(gx, gy)


def whitney_decompose(oracle, j_max: int) -> WhitneyDecomposition:
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    bbox = oracle.bbox
    ext = max(bbox.sides)
    side = 2.0 ** math.ceil(math.log2(ext))
    root = Box(bbox.lo, (bbox.lo[0] + side, bbox.lo[1] + side))
    plo, phi = oracle.primitive_arrays()
    plo = np.asarray(plo, dtype=float).reshape(-1, 2)
    phi = np.asarray(phi, dtype=float).reshape(-1, 2)
    circle = oracle.circle

    acc: list[tuple] = []
    trunc: list[tuple] = []
    all_idx = np.arange(len(plo))
    # node: (level, ix, iy, candidate primitive ids, known_member)
    stack = [(0, 0, 0, all_idx, False)]
    while stack:
        level, ax, ay, cand, known = stack.pop()
        s = side * 2.0**-level
        lo = (root.lo[0] + ax * s, root.lo[1] + ay * s)
        hi = (lo[0] + s, lo[1] + s)
        diam = math.hypot(s, s)
        d_arr = _box_prim_distances(lo, hi, plo[cand], phi[cand])
        m = float(d_arr.min()) if len(d_arr) else math.inf
        if circle is not None:
            m = min(m, box_circle_distance(lo, hi, circle[0], circle[1]))
        center = (lo[0] + s / 2, lo[1] + s / 2)
        member = known or oracle.membership(center)
        if not member:
            if m > 0.0:
                continue  # strictly separated from the domain
            # engulfed by a solid primitive box: no domain points inside
            sub = cand[d_arr == 0.0]
            if len(sub) and bool(
                np.any(
                    (plo[sub, 0] <= lo[0])
                    & (plo[sub, 1] <= lo[1])
                    & (phi[sub, 0] >= hi[0])
                    & (phi[sub, 1] >= hi[1])
                )
            ):
                continue
        if member and m >= diam:
            # parent failed (that is why this node was visited), accept
            cd = _point_prim_distance(center, plo[cand], phi[cand], circle)
            acc.append((level, ax, ay, m, cd))
            continue
        if level == j_max:
            trunc.append((level, ax, ay, m))
            continue
        keep = cand[d_arr <= m + diam]
        child_known = member and m > 0.0
        for dx in (0, 1):
            for dy in (0, 1):
                stack.append(
                    (level + 1, 2 * ax + dx, 2 * ay + dy, keep, child_known)
                )

    acc.sort(key=lambda t: (t[0], t[1], t[2]))
    trunc.sort(key=lambda t: (t[0], t[1], t[2]))
    levels = np.array([t[0] for t in acc], dtype=np.int32)
    ix = np.array([t[1] for t in acc], dtype=np.int64)
    iy = np.array([t[2] for t in acc], dtype=np.int64)
    dist = np.array([t[3] for t in acc], dtype=float)
    cdist = np.array([t[4] for t in acc], dtype=float)
    tl = np.array([t[0] for t in trunc], dtype=np.int32)
    tx = np.array([t[1] for t in trunc], dtype=np.int64)
    ty = np.array([t[2] for t in trunc], dtype=np.int64)
    td = np.array([t[3] for t in trunc], dtype=float)
    prov = dict(oracle.provenance)
    prov["j_max"] = j_max
    return WhitneyDecomposition(
        root, j_max, levels, ix, iy, dist, cdist, tl, tx, ty, td, prov
    )


def _point_prim_distance(p, plo, phi, circle) -> float:
    if len(plo):
        gx = np.maximum(np.maximum(plo[:, 0] - p[0], p[0] - phi[:, 0]), 0.0)
        gy = np.maximum(np.maximum(plo[:, 1] - p[1], p[1] - phi[:, 1]), 0.0)
        best = float(np.min(np.hypot(gx, gy)))
    else:
        best = math.inf
    if circle is not None:
        (cx, cy), r = circle
        best = min(best, abs(r - math.hypot(p[0] - cx, p[1] - cy)))
    return best


def level_counts(W: WhitneyDecomposition) -> dict[int, int]:
    return W.level_counts()


# ---------------------------------------------------------------------------
# dilated-cube intersection graph


class CubeGraph:
    def __init__(self, n: int, edges: np.ndarray):
        self.n = n
        self.edges = edges  # (m, 2) int array, u < v, lex sorted
        self.weights: np.ndarray | None = None
        self._adj: list[np.ndarray] | None = None

    def adjacency(self) -> list[np.ndarray]:
        if self._adj is None:
            nbr: list[list[int]] = [[] for _ in range(self.n)]
            for u, v in self.edges:
                nbr[u].append(v)
                nbr[v].append(u)
            self._adj = [np.array(sorted(a), dtype=np.int64) for a in nbr]
        return self._adj

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _integer_geometry(W: WhitneyDecomposition):
    """Cube boxes and 9/8 dilations on an integer lattice (exact).

    Units are root_side * 2**-(j_max + 4): each cube side becomes
    16 * 2**(j_max - level), so half of the dilated side, 9 * 2**(j_max -
    level - 1) * ... stays integral for every level <= j_max.
    """
    J = int(W.levels.max()) if W.n_cubes else 0
    unit_pow = J + 4
    side_int = np.left_shift(1, unit_pow - W.levels.astype(np.int64))
    lo_x = W.ix * side_int
    lo_y = W.iy * side_int
    cen_x = 2 * lo_x + side_int  # doubled center to stay integral
    cen_y = 2 * lo_y + side_int
    # dilated half-side, doubled: 2 * (9/16) * side = (9/8) * side
    half2 = (9 * side_int) // 8
    assert np.all(half2 * 8 == 9 * side_int)
    return J, cen_x, cen_y, half2


def build_cube_graph(W: WhitneyDecomposition) -> CubeGraph:
    """Edges exactly where closed (9/8)-dilations intersect.

    Each cube probes lattice cells at its own and coarser levels that its
    dilation overlaps; the pair predicate is then checked in exact integer
    arithmetic, so hashing only needs to produce a candidate superset.
    """
    n = W.n_cubes
    if n == 0:
        return CubeGraph(0, np.zeros((0, 2), dtype=np.int64))
    J, cen_x, cen_y, half2 = _integer_geometry(W)
    unit_pow = J + 4
    cells = {
        (int(l), int(a), int(b)): i
        for i, (l, a, b) in enumerate(zip(W.levels, W.ix, W.iy))
    }
    present = sorted(set(int(l) for l in np.unique(W.levels)))
    edges: set[tuple[int, int]] = set()
    lvl = W.levels.astype(int)
    for i in range(n):
        li = lvl[i]
        # doubled coordinates of the closed dilation of cube i
        qlo_x, qhi_x = cen_x[i] - half2[i], cen_x[i] + half2[i]
        qlo_y, qhi_y = cen_y[i] - half2[i], cen_y[i] + half2[i]
        for lj in present:
            if lj > li:
                break
            cell = 1 << (unit_pow - lj + 1)  # doubled cell side
            # widen by one cell: a neighbor's dilation pokes out of its
            # cell by side/16 < cell, and closed contact at an exact cell
            # boundary must not be missed either
            for a in range(qlo_x // cell - 1, qhi_x // cell + 2):
                for b in range(qlo_y // cell - 1, qhi_y // cell + 2):
                    j = cells.get((lj, a, b))
                    if j is None or j == i:
                        continue
                    rlo_x, rhi_x = cen_x[j] - half2[j], cen_x[j] + half2[j]
                    rlo_y, rhi_y = cen_y[j] - half2[j], cen_y[j] + half2[j]
                    if (
                        max(qlo_x, rlo_x) <= min(qhi_x, rhi_x)
                        and max(qlo_y, rlo_y) <= min(qhi_y, rhi_y)
                    ):
                        edges.add((min(i, j), max(i, j)))
    if edges:
        arr = np.array(sorted(edges), dtype=np.int64)
    else:
        arr = np.zeros((0, 2), dtype=np.int64)
    return CubeGraph(n, arr)


def build_cube_graph_bruteforce(W: WhitneyDecomposition) -> CubeGraph:
    """O(N^2) reference used to validate the hashed construction."""
    n = W.n_cubes
    _, cen_x, cen_y, half2 = _integer_geometry(W)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if (
                abs(cen_x[i] - cen_x[j]) <= half2[i] + half2[j]
                and abs(cen_y[i] - cen_y[j]) <= half2[i] + half2[j]
            ):
                edges.append((i, j))
    arr = (
        np.array(sorted(edges), dtype=np.int64)
        if edges
        else np.zeros((0, 2), dtype=np.int64)
    )
    return CubeGraph(n, arr)


def dilated_overlap_counts(
    W: WhitneyDecomposition, points: np.ndarray
) -> np.ndarray:
    """Number of dilated cubes containing each query point (exact)."""
    out = np.zeros(len(points), dtype=np.int64)
    if W.n_cubes == 0:
        return out
    sides = W.sides()
    half = (DILATION / 2.0) * sides
    cx = W.root.lo[0] + (W.ix + 0.5) * sides
    cy = W.root.lo[1] + (W.iy + 0.5) * sides
    for k, p in enumerate(points):
        out[k] = int(
            np.count_nonzero(
                (np.abs(p[0] - cx) <= half) & (np.abs(p[1] - cy) <= half)
            )
        )
    return out


# ---------------------------------------------------------------------------
# truncation diagnostics


def coverage_deficit(
    W: WhitneyDecomposition,
    oracle,
    n_points: int = 20000,
    seed: int = 0,
) -> CoverageReport:
    """Monte-Carlo area of domain points not covered by accepted cubes."""
    rng = np.random.default_rng(seed)
    bb = oracle.bbox
    pts = rng.uniform(bb.lo, bb.hi, size=(n_points, 2))
    bbox_area = bb.volume
    n_member = 0
    n_uncovered = 0
    for p in pts:
        tp = (float(p[0]), float(p[1]))
        if not oracle.membership(tp):
            continue
        n_member += 1
        if W.cube_at_point(tp) is None:
            n_uncovered += 1
    frac = n_uncovered / n_points
    area = bbox_area * frac
    se = bbox_area * math.sqrt(max(frac * (1 - frac), 0.0) / n_points)
    return CoverageReport(
        fraction_uncovered=(n_uncovered / n_member) if n_member else 0.0,
        area_uncovered=area,
        standard_error_area=se,
        n_points=n_points,
        n_member=n_member,
    )


# ---------------------------------------------------------------------------
# whitney v1 file format and census CSV


def save_whitney(
    W: WhitneyDecomposition, path: str, comment: str | None = None
) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("whitney v1")
    lines.append(f"param root_lo_x {W.root.lo[0]!r}")
    lines.append(f"param root_lo_y {W.root.lo[1]!r}")
    lines.append(f"param root_side {W.root.sides[0]!r}")
    lines.append(f"param j_max {W.j_max}")
    for i in range(W.n_cubes):
        lines.append(
            "%d %d %d %s 0"
            % (W.levels[i], W.ix[i], W.iy[i], repr(float(W.dist[i])))
        )
    for i in range(len(W.trunc_levels)):
        lines.append(
            "%d %d %d %s 1"
            % (
                W.trunc_levels[i],
                W.trunc_ix[i],
                W.trunc_iy[i],
                repr(float(W.trunc_dist[i])),
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_whitney(path: str, oracle=None) -> WhitneyDecomposition:
    params: dict = {}
    rows: list[tuple] = []
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != "whitney v1":
            raise ValueError("not a whitney v1 file")
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "param":
                params[parts[1]] = parts[2]
                continue
            rows.append(
                (
                    int(parts[0]),
                    int(parts[1]),
                    int(parts[2]),
                    float(parts[3]),
                    int(parts[4]),
                )
            )
    side = float(params["root_side"])
    root = Box(
        (float(params["root_lo_x"]), float(params["root_lo_y"])),
        (
            float(params["root_lo_x"]) + side,
            float(params["root_lo_y"]) + side,
        ),
    )
    accepted = [r for r in rows if r[4] == 0]
    truncated = [r for r in rows if r[4] == 1]
    prov = dict(oracle.provenance) if oracle is not None else {}
    prov["j_max"] = int(params["j_max"])
    W = WhitneyDecomposition(
        root,
        int(params["j_max"]),
        np.array([r[0] for r in accepted], dtype=np.int32),
        np.array([r[1] for r in accepted], dtype=np.int64),
        np.array([r[2] for r in accepted], dtype=np.int64),
        np.array([r[3] for r in accepted], dtype=float),
        np.zeros(len(accepted), dtype=float),
        np.array([r[0] for r in truncated], dtype=np.int32),
        np.array([r[1] for r in truncated], dtype=np.int64),
        np.array([r[2] for r in truncated], dtype=np.int64),
        np.array([r[3] for r in truncated], dtype=float),
        prov,
    )
    if oracle is not None:
        plo, phi = oracle.primitive_arrays()
        plo = np.asarray(plo, dtype=float).reshape(-1, 2)
        phi = np.asarray(phi, dtype=float).reshape(-1, 2)
        W.center_dist = np.array(
            [
                _point_prim_distance(W.cube_center(i), plo, phi, oracle.circle)
                for i in range(W.n_cubes)
            ]
        )
    return W


def save_census(W: WhitneyDecomposition, path: str, comment: str | None = None
                ) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("j,count")
    for j, c in sorted(W.level_counts().items()):
        lines.append(f"{j},{c}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
