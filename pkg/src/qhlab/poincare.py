"""Threshold algebra, counterexample sequences, and a discrete
lower-bound estimator for the best (q,p)-Poincare constant.

The threshold p0 = q(n - lam*beta)/(q + beta*(n - lam)) is evaluated in
exact rational arithmetic (binary floats are exact fractions, so inputs
like 0.25 lose nothing).  Counterexample sequences sum closed-form norms
of signed room-and-passage bump functions over a plan of Whitney levels;
the ratio A_m/B_m growing like m^(1/q - 1/p) is the refutation signal.
The grid estimator is a certificate machine: any feasible grid function
certifies a lower bound for the discretized extremal quotient, and
ascent only ever improves the certificate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .domains import apartment_geometry
from .geometry import Box

SUPPORTED = "supported"
COUNTEREXAMPLE_REGIME = "counterexample-regime"
UNKNOWN = "unknown"


def _validate_common(q: float, lam: float, beta: float, n: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if q < 1:
        raise ValueError("q must be >= 1")
    if not (n - 1 <= lam < n):
        raise ValueError("lambda must lie in [n-1, n)")
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")


def threshold_p0_exact(q, lam, beta, n: int = 2) -> Fraction:
    _validate_common(q, lam, beta, n)
    qf = Fraction(q)
    lf = Fraction(lam)
    bf = Fraction(beta)
    num = qf * (n - lf * bf)
    den = qf + bf * (n - lf)
    assert den > 0, "denominator positive under the preconditions"
    return num / den


def threshold_p0(q: float, lam: float, beta: float, n: int = 2) -> float:
    return float(threshold_p0_exact(q, lam, beta, n))


def p0_monotonicity_check(q: float, beta: float, n: int, lam_grid) -> bool:
    """Finite differences of p0 in lambda are all positive on the grid.

    Increasing behaviour is only asserted for q < n - n*beta; outside
    that range the check is not defined.
    """
    if not q < n - n * beta:
        raise ValueError("monotonicity check requires q < n - n*beta")
    vals = [threshold_p0(q, lam, beta, n) for lam in sorted(lam_grid)]
    return all(b > a for a, b in zip(vals, vals[1:]))


@dataclass(frozen=True)
class PoincareParams:
    """q = p is admitted solely so boundary cases can be queried; the
    inequality machinery itself requires q < p and revalidates."""

    n: int
    q: float
    p: float
    lam: float
    beta: float

    def __post_init__(self):
        _validate_common(self.q, self.lam, self.beta, self.n)
        if not (self.q <= self.p < math.inf):
            raise ValueError("need 1 <= q <= p < inf")


# ---------------------------------------------------------------------------
# room-and-passage test functions


@dataclass(frozen=True)
class TestFunctionSpec:
    """Bump supported on the room and passage carved into a cube of side
    ell: constant on the room, linear decay to 0 along the vertical
    passage axis."""

    ell: float
    center: tuple[float, float]
    beta: float
    lam: float
    q: float
    n: int = 2

    def __post_init__(self):
        _validate_common(self.q, self.lam, self.beta, self.n)
        if self.ell <= 0:
            raise ValueError("ell must be positive")

    @property
    def value(self) -> float:
        return self.ell ** ((self.lam - self.n) / self.q)

    @property
    def gradient_magnitude(self) -> float:
        return 8.0 ** (1.0 / self.beta) * self.ell ** (
            (self.lam - self.n) / self.q - 1.0 / self.beta
        )

    @property
    def passage_width(self) -> float:
        return (self.ell / 8.0) ** (1.0 / self.beta)

    def geometry(self):
        half = self.ell / 2.0
        cube = Box(
            (self.center[0] - half, self.center[1] - half),
            (self.center[0] + half, self.center[1] + half),
        )
        return apartment_geometry(cube, self.beta)

    def support(self) -> tuple[Box, Box]:
        g = self.geometry()
        return g.room, g.passage


def test_function_eval(spec: TestFunctionSpec, x) -> float:
    room, passage = spec.support()
    px, py = float(x[0]), float(x[1])
    if room.lo[0] <= px <= room.hi[0] and room.lo[1] <= py <= room.hi[1]:
        return spec.value
    if passage.lo[0] <= px <= passage.hi[0] and passage.lo[1] <= py <= passage.hi[1]:
        w = spec.passage_width
        return spec.value * (1.0 - (py - passage.lo[1]) / w)
    return 0.0


def test_function_eval_grid(spec: TestFunctionSpec, xs, ys) -> np.ndarray:
    """Values on the tensor grid xs x ys, shape (len(xs), len(ys))."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    room, passage = spec.support()
    out = np.zeros((len(xs), len(ys)))
    in_rx = (xs >= room.lo[0]) & (xs <= room.hi[0])
    in_ry = (ys >= room.lo[1]) & (ys <= room.hi[1])
    out[np.ix_(in_rx, in_ry)] = spec.value
    in_px = (xs >= passage.lo[0]) & (xs <= passage.hi[0])
    in_py = (ys > passage.lo[1]) & (ys <= passage.hi[1])
    w = spec.passage_width
    decay = spec.value * (1.0 - (ys[in_py] - passage.lo[1]) / w)
    out[np.ix_(in_px, in_py)] = decay[None, :]
    return out


def test_function_norms(spec: TestFunctionSpec, p: float
                        ) -> tuple[float, float]:
    """Closed forms: the room contributes value^q * (ell/4)^n = 4^-n
    ell^lam; the passage is a 1-D power integral; the gradient is
    constant on the passage."""
    n = spec.n
    q = spec.q
    w = spec.passage_width
    vol_passage = 2.0 ** (n - 1) * w**n
    room_term = 4.0**-n * spec.ell**spec.lam
    passage_term = spec.value**q * vol_passage / (q + 1.0)
    uq = room_term + passage_term
    gradp = spec.gradient_magnitude**p * vol_passage
    return uq, gradp


def test_function_norms_quadrature(
    spec: TestFunctionSpec, p: float, slices: int = 4096
) -> tuple[float, float]:
    """Independent midpoint quadrature of both norms.  u is constant on
    the room and varies only along the vertical axis of the passage, so
    one-dimensional midpoint sums converge at second order; the gradient
    is compared on the open passage where u is differentiable."""
    q = spec.q
    room, passage = spec.support()
    w = spec.passage_width
    room_area = (room.hi[0] - room.lo[0]) * (room.hi[1] - room.lo[1])
    uq = spec.value**q * room_area
    t = (np.arange(slices) + 0.5) / slices
    profile = spec.value * (1.0 - t)
    width = passage.hi[0] - passage.lo[0]
    uq += float(np.sum(profile**q)) * (w / slices) * width
    gradp = spec.gradient_magnitude**p * width * w
    return uq, gradp


# ---------------------------------------------------------------------------
# counterexample plans and ratio sequences


@dataclass
class CounterexamplePlan:
    k0: int
    levels: tuple[int, ...]
    Ms: tuple[int, ...]
    sides: tuple[float, ...]
    cube_ids: tuple[tuple[int, ...] | None, ...]
    lam: float
    extrapolated_from: int | None = None

    @property
    def depth(self) -> int:
        return len(self.levels)

    def signs(self, k: int) -> np.ndarray:
        m = self.Ms[k]
        return np.concatenate([np.ones(m), -np.ones(m)])


def build_counterexample_plan(W, lam: float, m_max: int,
                              extrapolate: bool = False) -> CounterexamplePlan:
    """Select levels j(1) < j(2) < ... whose census admits 2*2^(lam*(j-k0))
    cubes, choosing cubes in lexicographic center order, first half
    positive.  When the decomposition runs out of levels the achievable
    prefix is returned with a warning; with extrapolate=True deeper
    levels are admitted on the strength of the census growth rate (their
    cube ids are None, but the sequence norms only need counts and
    sides)."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    from .whitney import level_counts

    census = level_counts(W)
    populated = sorted(j for j, c in census.items() if c >= 2)
    if not populated:
        raise ValueError("no level holds two cubes")
    k0 = populated[0]
    abs_levels = W.abs_levels()
    order = {}
    for j in census:
        idx = np.nonzero(abs_levels == j)[0]
        centers = [W.cube_center(int(i)) for i in idx]
        order[j] = [int(i) for _, i in sorted(zip(centers, idx.tolist()))]

    levels: list[int] = []
    Ms: list[int] = []
    sides: list[float] = []
    ids: list[tuple[int, ...] | None] = []
    j = k0
    j_top = max(census)
    while len(levels) < m_max and j <= j_top:
        need = 2.0 * 2.0 ** (lam * (j - k0))
        if census.get(j, 0) >= need:
            m = 2 ** int(math.floor(lam * (j - k0)))
            chosen = tuple(order[j][: 2 * m])
            assert len(chosen) == 2 * m and len(set(chosen)) == 2 * m
            levels.append(j)
            Ms.append(m)
            sides.append(2.0**-j)
            ids.append(chosen)
        j += 1
    extrapolated_from = None
    if len(levels) < m_max:
        if extrapolate and len(levels) >= 2:
            extrapolated_from = len(levels)
            jj = levels[-1] + 1
            while len(levels) < m_max:
                m = 2 ** int(math.floor(lam * (jj - k0)))
                levels.append(jj)
                Ms.append(m)
                sides.append(2.0**-jj)
                ids.append(None)
                jj += 1
        else:
            warnings.warn(
                "plan truncated at depth %d of %d: no deeper qualifying levels"
                % (len(levels), m_max)
            )
    return CounterexamplePlan(
        k0, tuple(levels), tuple(Ms), tuple(sides), tuple(ids), lam,
        extrapolated_from,
    )


@dataclass
class RatioSequence:
    ms: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.A / self.B

    def fitted_slope(self, m_lo: int = 1, m_hi: int | None = None) -> float:
        hi = len(self.ms) if m_hi is None else m_hi
        sel = (self.ms >= m_lo) & (self.ms <= hi)
        if int(sel.sum()) < 2:
            raise ValueError("need at least two points to fit a slope")
        x = np.log(self.ms[sel].astype(float))
        y = np.log(self.ratios[sel])
        return float(np.polyfit(x, y, 1)[0])


def counterexample_sequence(plan: CounterexamplePlan, beta: float,
                            q: float, p: float) -> RatioSequence:
    """A_m and B_m from exact per-level closed forms; the signed bumps
    have disjoint supports, so q-th and p-th powers add and the signs
    cancel the mean exactly."""
    if not q < p:
        raise ValueError("counterexample sequence requires q < p")
    uq_levels = []
    gp_levels = []
    for m, ell in zip(plan.Ms, plan.sides):
        spec = TestFunctionSpec(ell, (0.0, 0.0), beta, plan.lam, q)
        uq, gp = test_function_norms(spec, p)
        uq_levels.append(2 * m * uq)
        gp_levels.append(2 * m * gp)
    A = np.cumsum(uq_levels) ** (1.0 / q)
    B = np.cumsum(gp_levels) ** (1.0 / p)
    return RatioSequence(np.arange(1, plan.depth + 1), A, B)


def counterexample_function(plan: CounterexamplePlan, W, beta: float,
                            q: float, m: int):
    """The m-th signed sum v_m as per-cube specs with signs; requires the
    plan's first m levels to carry materialized cube ids."""
    if not 1 <= m <= plan.depth:
        raise ValueError("m out of range")
    terms: list[tuple[float, TestFunctionSpec]] = []
    for k in range(m):
        ids = plan.cube_ids[k]
        if ids is None:
            raise ValueError("level %d of the plan is extrapolated" % (k + 1))
        signs = plan.signs(k)
        for s, cid in zip(signs, ids):
            spec = TestFunctionSpec(
                W.cube_side(cid), W.cube_center(cid), beta, plan.lam, q
            )
            terms.append((float(s), spec))
    return terms


def signed_mean_quadrature(terms, slices: int = 512) -> float:
    """Midpoint quadrature of the integral of a signed bump sum; the
    closed-form total is zero by the sign pairing."""
    total = 0.0
    for s, spec in terms:
        uq, _ = test_function_norms_quadrature(
            TestFunctionSpec(spec.ell, spec.center, spec.beta, spec.lam, 1.0),
            1.0,
            slices,
        )
        total += s * uq
    return total


# ---------------------------------------------------------------------------
# grid functions and the ascent estimator


@dataclass
class GridFunction:
    origin: tuple[float, float]
    h: float
    mask: np.ndarray
    values: np.ndarray
    edges_x: np.ndarray  # open edge (i,j)-(i+1,j), shape (nx-1, ny)
    edges_y: np.ndarray  # open edge (i,j)-(i,j+1), shape (nx, ny-1)
    _mean: float = field(default=0.0, repr=False)

    def __post_init__(self):
        self.set_values(self.values)

    @property
    def mean(self) -> float:
        return self._mean

    def set_values(self, arr: np.ndarray) -> None:
        arr = np.where(self.mask, arr, 0.0)
        self.values = arr
        n = int(self.mask.sum())
        self._mean = float(arr[self.mask].sum() / n) if n else 0.0

    def node_xs(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.mask.shape[0]) + 0.5) * self.h

    def node_ys(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.mask.shape[1]) + 0.5) * self.h


def _covered_ranges(centers: np.ndarray, lo: float, hi: float, h: float
                    ) -> slice:
    # indices whose full dual face [c - h/2, c + h/2] lies inside [lo, hi];
    # the slack absorbs rounding on non-dyadic wall endpoints
    eps = 1e-12
    i0 = int(np.searchsorted(centers, lo + h / 2 - eps, side="left"))
    i1 = int(np.searchsorted(centers, hi - h / 2 + eps, side="right"))
    return slice(i0, max(i0, i1))


def build_grid(oracle, h: float) -> GridFunction:
    """Cell-centered grid over the oracle bounding box.

    An edge between member nodes is closed when an obstacle box or a wall
    segment severs the entire dual face between the two cells.  Obstacles
    shorter than a face leave the edge open, so refining the grid only ever
    closes more edges: the blocked set grows monotonically in resolution.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    bb = oracle.bbox
    nx = max(1, int(round((bb.hi[0] - bb.lo[0]) / h)))
    ny = max(1, int(round((bb.hi[1] - bb.lo[1]) / h)))
    xs = bb.lo[0] + (np.arange(nx) + 0.5) * h
    ys = bb.lo[1] + (np.arange(ny) + 0.5) * h
    mask = oracle.grid_membership(xs, ys)
    if not mask.any():
        raise ValueError("empty grid mask")
    edges_x = mask[:-1, :] & mask[1:, :]
    edges_y = mask[:, :-1] & mask[:, 1:]

    box_lo, box_hi, walls = oracle.edge_blockers()
    for lo, hi in zip(box_lo, box_hi):
        ry = _covered_ranges(ys, lo[1], hi[1], h)
        # x-edges whose closed span [x_i, x_{i+1}] meets [lo_x, hi_x]
        i0 = int(np.searchsorted(xs, lo[0], side="left"))
        i1 = int(np.searchsorted(xs, hi[0], side="right"))
        edges_x[max(i0 - 1, 0): i1, ry] = False
        rx = _covered_ranges(xs, lo[0], hi[0], h)
        j0 = int(np.searchsorted(ys, lo[1], side="left"))
        j1 = int(np.searchsorted(ys, hi[1], side="right"))
        edges_y[rx, max(j0 - 1, 0): j1] = False
    for seg in walls:
        if seg.a[0] == seg.b[0]:  # vertical wall blocks x-edges
            wx = seg.a[0]
            y0, y1 = sorted((seg.a[1], seg.b[1]))
            ry = _covered_ranges(ys, y0, y1, h)
            i0 = int(np.searchsorted(xs, wx, side="left"))
            edges_x[max(i0 - 1, 0): i0, ry] = False
        else:  # horizontal wall blocks y-edges
            wy = seg.a[1]
            x0, x1 = sorted((seg.a[0], seg.b[0]))
            rx = _covered_ranges(xs, x0, x1, h)
            j0 = int(np.searchsorted(ys, wy, side="left"))
            edges_y[rx, max(j0 - 1, 0): j0] = False

    # keep only the largest connected component: a room whose passage is
    # narrower than h ends up with every edge blocked, and a function
    # varying there alone has zero gradient, so the quotient would stop
    # being well posed on the full grid
    idx = -np.ones((nx, ny), dtype=np.int64)
    n_in = int(mask.sum())
    idx[mask] = np.arange(n_in)
    ex = edges_x.nonzero()
    ey = edges_y.nonzero()
    rows = np.concatenate([idx[ex[0], ex[1]], idx[ey[0], ey[1]]])
    cols = np.concatenate([idx[ex[0] + 1, ex[1]], idx[ey[0], ey[1] + 1]])
    graph = sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_in, n_in)
    )
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    if n_comp > 1:
        counts = np.bincount(labels, minlength=n_comp)
        keep = int(np.argmax(counts))
        warnings.warn(
            "grid isolates %d of %d cells in %d components; keeping the "
            "largest" % (n_in - int(counts[keep]), n_in, n_comp)
        )
        kept = np.zeros((nx, ny), dtype=bool)
        kept[mask] = labels == keep
        mask = kept
        edges_x &= mask[:-1, :] & mask[1:, :]
        edges_y &= mask[:, :-1] & mask[:, 1:]

    return GridFunction(
        (bb.lo[0], bb.lo[1]), h, mask, np.zeros((nx, ny)), edges_x, edges_y
    )


def _gradient_fields(grid: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    u = grid.values
    h = grid.h
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    dx = (u[1:, :] - u[:-1, :]) / h
    dy = (u[:, 1:] - u[:, :-1]) / h
    gx[:-1, :] = np.where(grid.edges_x, dx, 0.0)
    gy[:, :-1] = np.where(grid.edges_y, dy, 0.0)
    return gx, gy


def quotient(grid: GridFunction, q: float, p: float) -> float:
    """||u - mean||_q / ||grad u||_p with forward differences and cell
    area weights; raises when the gradient vanishes identically."""
    w = grid.h**2
    d = np.abs(grid.values[grid.mask] - grid.mean)
    num = (w * float(np.sum(d**q))) ** (1.0 / q)
    gx, gy = _gradient_fields(grid)
    mag = np.hypot(gx, gy)[grid.mask]
    den_p = w * float(np.sum(mag**p))
    if den_p == 0.0:
        raise ValueError("gradient identically zero on the grid")
    return num / den_p ** (1.0 / p)


def _log_quotient_subgradient(grid: GridFunction, q: float, p: float
                              ) -> np.ndarray:
    mask = grid.mask
    w = grid.h**2
    k = int(mask.sum())
    d = np.where(mask, grid.values - grid.mean, 0.0)
    ad = np.abs(d)
    sq = np.sign(d) * ad ** (q - 1.0)
    F = w * float(np.sum(ad[mask] ** q))
    # derivative of sum w|u - mean|^q through both u_i and the mean
    gN = w * q * (sq - (float(sq[mask].sum()) / k) * mask)
    gx, gy = _gradient_fields(grid)
    mag = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0.0, mag ** (p - 2.0), 0.0)
    G = w * float(np.sum(mag[mask] ** p))
    tx = w * p * scale * gx / grid.h
    ty = w * p * scale * gy / grid.h
    gD = np.zeros_like(grid.values)
    gD[1:, :] += tx[:-1, :]
    gD[:-1, :] -= tx[:-1, :]
    gD[:, 1:] += ty[:, :-1]
    gD[:, :-1] -= ty[:, :-1]
    if F == 0.0 or G == 0.0:
        raise ValueError("degenerate quotient state")
    # gradient of log(N/D) = gF/(qF) - gG/(pG)
    out = gN / (q * F) - gD / (p * G)
    return np.where(mask, out, 0.0)


class _Preconditioner:
    """Approximate inverse of the masked graph Laplacian: a Sobolev
    smoothing of raw subgradients, exact sparse factorization on small
    grids and algebraic multigrid on large ones."""

    def __init__(self, grid: GridFunction):
        from scipy import sparse

        mask = grid.mask
        nx, ny = mask.shape
        idx = -np.ones(mask.shape, dtype=np.int64)
        idx[mask] = np.arange(int(mask.sum()))
        rows = []
        cols = []
        for (ea, off) in ((grid.edges_x, (1, 0)), (grid.edges_y, (0, 1))):
            ii, jj = np.nonzero(ea)
            a = idx[ii, jj]
            b = idx[ii + off[0], jj + off[1]]
            rows.append(a)
            cols.append(b)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        n = int(mask.sum())
        data = np.ones(len(r))
        A = sparse.coo_matrix(
            (np.concatenate([-data, -data]), (np.concatenate([r, c]),
                                              np.concatenate([c, r]))),
            shape=(n, n),
        ).tocsr()
        deg = -np.asarray(A.sum(axis=1)).ravel()
        L = A + sparse.diags(deg + 1e-8)
        self.idx = idx
        self.mask = mask
        self.n = n
        if n <= 120_000:
            from scipy.sparse.linalg import splu

            self._solve = splu(L.tocsc()).solve
        else:
            import pyamg

            # a few V-cycles smooth the subgradient well enough; exact
            # solves would triple the cost without changing the ascent
            ml = pyamg.ruge_stuben_solver(L.tocsr())
            self._solve = lambda b: ml.solve(b, tol=1e-4, maxiter=6)

    def apply(self, g: np.ndarray) -> np.ndarray:
        z = np.zeros_like(g)
        z[self.mask] = self._solve(g[self.mask])
        return z


@dataclass
class AscentResult:
    value: float
    grid: GridFunction
    history: np.ndarray
    restarts: int


def _init_from_test_function(oracle, grid: GridFunction, q: float
                             ) -> np.ndarray:
    prov = oracle.provenance
    beta = float(prov.get("beta", prov.get("base_beta", 1.0)))
    lam = float(prov.get("lambda", prov.get("base_lambda", 1.0)))

    apartments = getattr(oracle, "apartments", None)
    if apartments:
        # a room-and-passage domain carries its extremal profile with it:
        # the bump on the widest apartment, aligned with the actual walls
        apt = max(apartments, key=lambda a: a.cube.sides[0])
        cx = 0.5 * (apt.cube.lo[0] + apt.cube.hi[0])
        cy = 0.5 * (apt.cube.lo[1] + apt.cube.hi[1])
        spec = TestFunctionSpec(apt.cube.sides[0], (cx, cy), beta, lam, q)
        return test_function_eval_grid(spec, grid.node_xs(), grid.node_ys())

    from .whitney import whitney_decompose

    W = whitney_decompose(oracle, 4)
    for deeper in (8, 12):
        # wall-dense domains have no coarse cubes; refine until one shows
        if W.n_cubes:
            break
        W = whitney_decompose(oracle, deeper)
    if W.n_cubes == 0:
        return np.zeros_like(grid.values)
    target = int(np.argmin(W.levels))
    spec = TestFunctionSpec(
        W.cube_side(target), W.cube_center(target), beta, lam, q
    )
    return test_function_eval_grid(spec, grid.node_xs(), grid.node_ys())


def _coarse_random_field(rng: np.random.Generator, grid: GridFunction,
                         cells: int = 64) -> np.ndarray:
    # the draw lives on a fixed lattice over the bounding box so that the
    # same seed explores the same physical start at every resolution;
    # per-grid noise would steer each h into a different ascent basin
    field = rng.standard_normal((cells, cells))
    nx, ny = grid.values.shape
    span_x = nx * grid.h
    span_y = ny * grid.h
    ix = np.minimum(
        ((grid.node_xs() - grid.origin[0]) / span_x * cells).astype(int),
        cells - 1,
    )
    iy = np.minimum(
        ((grid.node_ys() - grid.origin[1]) / span_y * cells).astype(int),
        cells - 1,
    )
    return field[np.ix_(ix, iy)]


def _resample(coarse: GridFunction, grid: GridFunction) -> np.ndarray:
    """Nearest-cell transfer of a coarse solution onto another grid."""
    vals = coarse.values
    if not coarse.mask.all():
        # masked cells hold zeros; serving those to a finer in-domain cell
        # would fake a jump across an open edge, so read through to the
        # nearest in-mask cell instead
        _, (jx, jy) = ndimage.distance_transform_edt(
            ~coarse.mask, return_indices=True
        )
        vals = vals[jx, jy]
    ix = np.clip(
        ((grid.node_xs() - coarse.origin[0]) / coarse.h).astype(int),
        0, vals.shape[0] - 1,
    )
    iy = np.clip(
        ((grid.node_ys() - coarse.origin[1]) / coarse.h).astype(int),
        0, vals.shape[1] - 1,
    )
    return vals[np.ix_(ix, iy)]


def discrete_poincare_lower_bound(
    oracle,
    q: float,
    p: float,
    h: float,
    iters: int = 60,
    seed: int = 0,
    restarts: int = 3,
    warm_start: GridFunction | None = None,
) -> AscentResult:
    """Normalized subgradient ascent on the extremal quotient.

    Callers should keep h at or below a quarter of the narrowest wall
    gap; coarser grids are admitted with a warning because the result is
    still a valid lower bound for the grid functional, just blind to the
    unresolved passages.  A `warm_start` grid (typically the solution at
    a coarser h) replaces the test-function start.
    """
    grid = build_grid(oracle, h)
    _, _, walls = oracle.edge_blockers()
    gaps = [s.length for s in walls if s.length > 0.0]
    if gaps and h > min(gaps) / 4.0:
        warnings.warn("h does not resolve the narrowest passage")
    pre = _Preconditioner(grid)
    rng = np.random.default_rng(seed)

    if warm_start is not None:
        starts = [_resample(warm_start, grid)]
    else:
        starts = [_init_from_test_function(oracle, grid, q)]
    for _ in range(restarts):
        starts.append(_coarse_random_field(rng, grid))

    best_val = -math.inf
    best_u = None
    history = []
    for u0 in starts:
        grid.set_values(np.where(grid.mask, u0, 0.0))
        try:
            val = quotient(grid, q, p)
        except ValueError:
            continue  # constant start carries no information
        t = 1.0
        for _ in range(iters):
            g = pre.apply(_log_quotient_subgradient(grid, q, p))
            norm = float(np.max(np.abs(g[grid.mask])))
            if norm == 0.0:
                break
            g = g / norm
            u = grid.values
            improved = False
            while t >= 1e-12:
                grid.set_values(u + t * g)
                try:
                    cand = quotient(grid, q, p)
                except ValueError:
                    cand = -math.inf
                if cand > val:
                    val = cand
                    t *= 1.6
                    improved = True
                    break
                t /= 2.0
            if not improved:
                grid.set_values(u)
                break
            history.append(max(val, best_val))
        if val > best_val:
            best_val = val
            best_u = grid.values.copy()
    if best_u is None:
        raise ValueError("gradient identically zero on the grid")
    grid.set_values(best_u)
    # the reported value is the exact re-evaluation of the returned state
    final = quotient(grid, q, p)
    return AscentResult(final, grid, np.array(history), len(starts))


# ---------------------------------------------------------------------------
# decision predicates


def supports_poincare_predicate(params: PoincareParams,
                                assumed_c2bar: float | None = None) -> str:
    return predicate_report(params, assumed_c2bar)["verdict"]


def predicate_report(params: PoincareParams,
                     assumed_c2bar: float | None = None) -> dict:
    p0 = threshold_p0(params.q, params.lam, params.beta, params.n)
    report = {
        "n": params.n,
        "q": params.q,
        "p": params.p,
        "lambda": params.lam,
        "beta": params.beta,
        "p0": p0,
        "assumed_c2bar": assumed_c2bar,
    }
    fixed = params.n - params.n * params.beta
    if params.q == params.p:
        if params.q == fixed:
            verdict, rule = UNKNOWN, "boundary case q = p = n - n*beta is open"
        else:
            verdict, rule = UNKNOWN, "q = p outside the inequality's scope"
    elif params.p > p0:
        verdict, rule = SUPPORTED, "p > p0"
    elif (
        params.n == 2
        and assumed_c2bar is not None
        and params.lam <= 2.0 - assumed_c2bar * params.beta
    ):
        verdict, rule = (
            COUNTEREXAMPLE_REGIME,
            "n = 2, p <= p0, lambda <= 2 - c2bar*beta",
        )
    else:
        verdict, rule = UNKNOWN, "p <= p0 without a certified counterexample"
    report["verdict"] = verdict
    report["rule"] = rule
    return report


def neumann_q_solvable(n: int, beta: float, q: float):
    """True when beta >= 1 - 2/n and 1 <= q < 2; the statement is
    one-directional, so everything else is unknown."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    if q < 1:
        raise ValueError("q must be >= 1")
    if beta >= 1.0 - 2.0 / n and q < 2.0:
        return True
    return UNKNOWN


# ---------------------------------------------------------------------------
# writers


def save_ratio_sequence_csv(seq: RatioSequence, path: str,
                            comment: str | None = None) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("m,A,B,ratio")
    for m, a, b, r in zip(seq.ms, seq.A, seq.B, seq.ratios):
        lines.append("%d,%s,%s,%s" % (m, repr(float(a)), repr(float(b)),
                                      repr(float(r))))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def threshold_table(entries) -> list[dict]:
    rows = []
    for q, lam, beta, n in entries:
        rows.append(
            {
                "q": q,
                "lambda": lam,
                "beta": beta,
                "n": n,
                "p0": threshold_p0(q, lam, beta, n),
            }
        )
    return rows


def save_threshold_table_csv(rows: list[dict], path: str,
                             comment: str | None = None) -> None:
    lines = [] if comment is None else ["# " + comment]
    lines.append("q,lambda,beta,n,p0")
    for r in rows:
        lines.append(
            "%s,%s,%s,%d,%s"
            % (repr(float(r["q"])), repr(float(r["lambda"])),
               repr(float(r["beta"])), r["n"], repr(float(r["p0"])))
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_predicate_json(report: dict, path: str,
                        comment: str | None = None) -> None:
    body = json.dumps(report, sort_keys=True, indent=2)
    with open(path, "w") as fh:
        if comment is not None:
            fh.write("# " + comment + "\n")
        fh.write(body + "\n")
