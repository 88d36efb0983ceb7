"""Quasihyperbolic chain structure on the Whitney cube graph.

The continuous quasihyperbolic metric integrates ds / dist(z, boundary)
along curves.  On Whitney cubes this discretizes to a graph metric: an
edge between cubes with intersecting dilations is weighted by the
midpoint rule |x_Q - x_R| / ((d(x_Q) + d(x_R)) / 2), and k̂ denotes the
resulting shortest-path distance.  One fixed shortest-path tree rooted at
a base cube realizes every chain; root-to-cube paths are then greedily
shortcut so consecutive chain cubes have intersecting dilations while
non-consecutive ones do not.  Shadows become subtrees, so their measures,
the level/class census, the summed chain-length certificates, and the
quotient series that decides the Poincare regime all reduce to linear
post-order passes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .whitney import CubeGraph, WhitneyDecomposition


# ---------------------------------------------------------------------------
# edge weights and point-to-point distance


def qh_edge_weights(G: CubeGraph, W: WhitneyDecomposition) -> CubeGraph:
    """Midpoint-rule weights |x_Q - x_R| / ((d(x_Q) + d(x_R)) / 2)."""
    sides = W.sides()
    cx = W.root.lo[0] + (W.ix + 0.5) * sides
    cy = W.root.lo[1] + (W.iy + 0.5) * sides
    u = G.edges[:, 0]
    v = G.edges[:, 1]
    gap = np.hypot(cx[u] - cx[v], cy[u] - cy[v])
    G.weights = gap / ((W.center_dist[u] + W.center_dist[v]) / 2.0)
    G.W = W
    return G


def _dijkstra(G: CubeGraph, source: int) -> tuple[np.ndarray, np.ndarray]:
    """Distances and parent map from `source`; deterministic tie-break by
    cube id (heap keyed on (dist, id), relax only on strict improvement)."""
    n = G.n
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (u, v), w in zip(G.edges, G.weights):
        adj[int(u)].append((int(v), float(w)))
        adj[int(v)].append((int(u), float(w)))
    for lst in adj:
        lst.sort()
    dist = np.full(n, math.inf)
    parent = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent


def qh_distance(G: CubeGraph, x, y) -> float:
    """Discrete quasihyperbolic estimate between member points.

    Shortest path between the host cubes plus the endpoint corrections
    |x - x_Q| / d(x).  Exactly symmetric: the Dijkstra source is the
    smaller host id.
    """
    W: WhitneyDecomposition = G.W
    if tuple(x) == tuple(y):
        return 0.0
    hx = W.cube_at_point(x)
    hy = W.cube_at_point(y)
    if hx is None or hy is None:
        raise ValueError("point lies in no accepted cube (truncation zone)")
    if hx == hy:
        core = 0.0
    else:
        src, dst = (hx, hy) if hx < hy else (hy, hx)
        dist, _ = _dijkstra(G, src)
        core = float(dist[dst])
        if not math.isfinite(core):
            raise ValueError("host cubes lie in different graph components")

    def correction(p, host):
        c = W.cube_center(host)
        return math.hypot(p[0] - c[0], p[1] - c[1]) / W.center_dist[host]

    # add in sorted order so the estimate is bit-for-bit symmetric
    c1, c2 = sorted((correction(x, hx), correction(y, hy)))
    return (c1 + c2) + core


# ---------------------------------------------------------------------------
# chain tree


@dataclass
class ChainTree:
    W: WhitneyDecomposition
    G: CubeGraph
    q0: int
    x0: tuple[float, float]
    parent: np.ndarray  # -1 at the root and on unreachable cubes
    k_hat: np.ndarray  # Dijkstra distance from q0 (inf if unreachable)
    ell: np.ndarray  # shortcut chain length (-1 if unreachable)
    reachable: np.ndarray
    used_fallback_root: bool = False
    _order: np.ndarray | None = field(default=None, repr=False)
    _children: list | None = field(default=None, repr=False)

    @property
    def n_reachable(self) -> int:
        return int(self.reachable.sum())

    def topo_order(self) -> np.ndarray:
        """Reachable cube ids, parents before children."""
        if self._order is None:
            order = np.argsort(self.k_hat, kind="stable")
            self._order = order[self.reachable[order]]
        return self._order

    def children(self) -> list[list[int]]:
        if self._children is None:
            ch: list[list[int]] = [[] for _ in range(self.W.n_cubes)]
            for v in range(self.W.n_cubes):
                p = int(self.parent[v])
                if p >= 0:
                    ch[p].append(v)
            self._children = ch
        return self._children

    def tree_path(self, q: int) -> list[int]:
        """Root-to-q cube ids along tree edges."""
        path = [q]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path[::-1]

    def shortcut_chain(self, q: int) -> list[int]:
        return _shortcut(self.G.adjacency(), self.tree_path(q))

    # --- shadows ---------------------------------------------------------
    def shadow_cubes(self, q: int) -> list[int]:
        """Subtree of q: exactly the cubes whose chain passes through q."""
        out = []
        stack = [q]
        ch = self.children()
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(ch[v])
        return sorted(out)

    def shadow_measures(self) -> np.ndarray:
        """|S(Q)| for every cube: exact dyadic area sums over subtrees."""
        areas = self.W.sides() ** 2
        out = areas.copy()
        out[~self.reachable] = 0.0
        for v in self.topo_order()[::-1]:
            p = int(self.parent[v])
            if p >= 0:
                out[p] += out[v]
        out[~self.reachable] = np.nan
        return out

    def subtree_accumulate(self, values: np.ndarray) -> np.ndarray:
        """Sum `values` over each cube's subtree (reachable part)."""
        out = np.asarray(values, dtype=float).copy()
        out[~self.reachable] = 0.0
        for v in self.topo_order()[::-1]:
            p = int(self.parent[v])
            if p >= 0:
                out[p] += out[v]
        return out

    def shadow_bboxes(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of each shadow (upper bound for its diameter)."""
        sides = self.W.sides()
        lo = np.stack(
            [
                self.W.root.lo[0] + self.W.ix * sides,
                self.W.root.lo[1] + self.W.iy * sides,
            ],
            axis=1,
        )
        hi = lo + sides[:, None]
        for v in self.topo_order()[::-1]:
            p = int(self.parent[v])
            if p >= 0:
                np.minimum(lo[p], lo[v], out=lo[p])
                np.maximum(hi[p], hi[v], out=hi[p])
        return lo, hi


def _shortcut(adj: list[np.ndarray], path: list[int]) -> list[int]:
    """Greedy chain shortcutting along a tree path.

    From each chain cube jump to the farthest later path cube whose
    dilation meets it; dilation contact is exactly graph adjacency.  The
    greedy maximality makes non-consecutive chain dilations disjoint.
    """
    if len(path) <= 1:
        return list(path)
    pos = {c: i for i, c in enumerate(path)}
    chain = [path[0]]
    i = 0
    last = len(path) - 1
    while i < last:
        best = i + 1  # the tree edge itself always qualifies
        for nb in adj[path[i]]:
            t = pos.get(int(nb))
            if t is not None and t > best:
                best = t
        chain.append(path[best])
        i = best
    return chain


def select_base_cube(W: WhitneyDecomposition, G: CubeGraph, oracle
                     ) -> tuple[int, bool]:
    """Largest-side cube containing the distinguished point, falling back
    to the largest graph component when that point is unresolved."""
    q0 = W.cube_at_point(oracle.basepoint)
    if q0 is not None:
        return q0, False
    # component sweep; pick the one with the most cubes, then its
    # largest cube, then lexicographic cell order (all deterministic)
    comp = np.full(W.n_cubes, -1, dtype=np.int64)
    adj = G.adjacency()
    ncomp = 0
    for s in range(W.n_cubes):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = ncomp
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = ncomp
                    stack.append(int(v))
        ncomp += 1
    sizes = np.bincount(comp, minlength=ncomp)
    best_comp = int(np.argmax(sizes))
    members = np.where(comp == best_comp)[0]
    lv = W.levels[members]
    members = members[lv == lv.min()]
    return int(members.min()), True


def chain_tree(
    G: CubeGraph, W: WhitneyDecomposition, q0: int | None = None,
    oracle=None,
) -> ChainTree:
    if G.weights is None:
        qh_edge_weights(G, W)
    used_fallback = False
    if q0 is None:
        if oracle is None:
            raise ValueError("need q0 or an oracle with a basepoint")
        q0, used_fallback = select_base_cube(W, G, oracle)
    k_hat, parent = _dijkstra(G, q0)
    reachable = np.isfinite(k_hat)
    adj = G.adjacency()
    ell = np.full(W.n_cubes, -1, dtype=np.int64)
    ell[q0] = 0

    # iterative depth-first walk keeping the root path on a stack so each
    # cube's greedy shortcut can resolve "farthest later path cube" from
    # its graph neighbors in O(degree) per hop
    children: list[list[int]] = [[] for _ in range(W.n_cubes)]
    for v in range(W.n_cubes):
        if parent[v] >= 0:
            children[int(parent[v])].append(v)
    path: list[int] = []
    pos: dict[int, int] = {}
    stack: list[tuple[int, bool]] = [(q0, True)]
    while stack:
        node, entering = stack.pop()
        if not entering:
            pos.pop(path.pop(), None)
            continue
        pos[node] = len(path)
        path.append(node)
        stack.append((node, False))
        if node != q0:
            # greedy jumps from the root along the current path
            hops = 0
            i = 0
            tip = len(path) - 1
            while i < tip:
                best = i + 1
                for nb in adj[path[i]]:
                    t = pos.get(int(nb))
                    if t is not None and best < t <= tip:
                        best = t
                i = best
                hops += 1
            ell[node] = hops
        for c in sorted(children[node], reverse=True):
            stack.append((c, True))
    return ChainTree(
        W,
        G,
        int(q0),
        W.cube_center(int(q0)),
        parent,
        k_hat,
        ell,
        reachable,
        used_fallback,
    )


# ---------------------------------------------------------------------------
# shadows, classification, fits


def shadow(T: ChainTree, q: int) -> tuple[list[int], float]:
    """Cube ids of S(q) and its exact measure."""
    cubes = T.shadow_cubes(q)
    areas = T.W.sides() ** 2
    return cubes, float(areas[cubes].sum())


@dataclass
class QhbcFit:
    beta_fit: float
    c_fit: float
    slope: float
    intercept: float
    n_fit: int
    residuals: np.ndarray  # over all reachable cubes

    def bound(self, d: float) -> float:
        return (1.0 / self.beta_fit) * math.log(1.0 / d) + self.c_fit


def qhbc_fit(T: ChainTree, W: WhitneyDecomposition | None = None) -> QhbcFit:
    W = T.W if W is None else W
    mask = T.reachable & (W.center_dist < 1.0)
    if int(mask.sum()) < 10:
        raise ValueError("need at least 10 reachable cubes with dist < 1")
    x = np.log(1.0 / W.center_dist[mask])
    y = T.k_hat[mask]
    if float(x.max() - x.min()) == 0.0:
        raise ValueError("degenerate regression: all distances equal")
    slope, intercept = np.polyfit(x, y, 1)
    if slope <= 0:
        raise ValueError("nonpositive slope; no quasihyperbolic growth")
    beta_fit = 1.0 / float(slope)
    xa = np.log(1.0 / W.center_dist[T.reachable])
    ya = T.k_hat[T.reachable]
    residuals = ya - slope * xa
    c_fit = max(float(residuals.max()), 0.0)
    return QhbcFit(
        beta_fit, c_fit, float(slope), float(intercept),
        int(mask.sum()), residuals,
    )


@dataclass
class ShadowStats:
    sigma: float
    beta_used: float
    levels: np.ndarray  # absolute level j per cube (reachable rows valid)
    k_class: np.ndarray  # -1 on unreachable cubes
    measures: np.ndarray
    violations: int
    k_bound_failures: int
    count_table: dict  # (j, k) -> cube count
    max_count_ratio: float
    lam_used: float

    def coverage(self) -> float:
        n = int((self.k_class >= 0).sum())
        total = int(np.sum(np.isfinite(self.measures)))
        return n / total if total else 1.0


def classify_levels(
    T: ChainTree,
    W: WhitneyDecomposition | None = None,
    beta: float | None = None,
    lam: float | None = None,
) -> ShadowStats:
    """Assign each cube its shadow-size class.

    With n = 2: sigma = max(1, max_Q |S(Q)| * 2^(j n beta)); cube Q of
    absolute level j belongs to class k when

        2^(-(j-k) n) <= |S(Q)| <= sigma * 2^(-(j-k-1) n),

    and the smallest such k is taken.  Since |S(Q)| >= |Q| = 2^(-jn) and
    consecutive class windows overlap (sigma >= 1), every cube receives a
    class; k <= [j - j beta] is checked and failures are counted.
    """
    W = T.W if W is None else W
    n = 2
    if beta is None:
        beta = qhbc_fit(T, W).beta_fit
    if lam is None:
        lam = float(W.provenance.get("lambda", W.provenance.get("base_lambda", n)))
    measures = T.shadow_measures()
    js = W.abs_levels()
    k_class = np.full(W.n_cubes, -1, dtype=np.int64)
    violations = 0
    k_bound_failures = 0
    count_table: dict[tuple[int, int], int] = {}
    sigma = 1.0
    for i in np.where(T.reachable)[0]:
        j = int(js[i])
        sigma = max(sigma, float(measures[i]) * 2.0 ** (j * n * beta))
    for i in np.where(T.reachable)[0]:
        j = int(js[i])
        s_m = float(measures[i])
        assigned = -1
        k = 0
        while 2.0 ** (-(j - k) * n) <= s_m:
            if s_m <= sigma * 2.0 ** (-(j - k - 1) * n):
                assigned = k
                break
            k += 1
        if assigned < 0:
            violations += 1
            continue
        if assigned > math.floor(j - j * beta):
            k_bound_failures += 1
        k_class[i] = assigned
        key = (j, assigned)
        count_table[key] = count_table.get(key, 0) + 1
    max_ratio = 0.0
    for (j, k), cnt in count_table.items():
        if j < 1:
            continue
        denom = j * 2.0 ** (n * (j - k) + j * beta * (lam - n))
        max_ratio = max(max_ratio, cnt / denom)
    return ShadowStats(
        sigma, beta, js, k_class, measures, violations,
        k_bound_failures, count_table, max_ratio, lam,
    )


# ---------------------------------------------------------------------------
# chain-length sums over shadows


def _chain_length_density(T: ChainTree, q: float) -> np.ndarray:
    """g(Q) = ell(C(Q))^(q-1) |Q| with the 0^0 = 1 convention at q = 1."""
    areas = T.W.sides() ** 2
    ell = T.ell.astype(float)
    ell[~T.reachable] = np.nan
    with np.errstate(invalid="ignore"):
        g = ell ** (q - 1.0) * areas
    if q == 1.0:
        g[T.reachable] = areas[T.reachable]  # ell^0 = 1 including ell = 0
    return g


def shadow_sum(T: ChainTree, a: int, q: float) -> float:
    """Exact sum of ell(C(Q))^(q-1) |Q| over the shadow of cube `a`."""
    if q < 1:
        raise ValueError("q must be >= 1")
    g = _chain_length_density(T, q)
    cubes = T.shadow_cubes(a)
    return float(np.nansum(g[cubes]))


def shadow_sum_max_ratio(T: ChainTree, q: float, eps: float
                         ) -> tuple[float, int]:
    """max over A of shadow_sum(A) / |S(A)|^(1-eps), and its argmax."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    g = _chain_length_density(T, q)
    sums = T.subtree_accumulate(np.nan_to_num(g))
    measures = T.shadow_measures()
    ratios = np.full(T.W.n_cubes, -np.inf)
    idx = np.where(T.reachable)[0]
    ratios[idx] = sums[idx] / measures[idx] ** (1.0 - eps)
    best = int(np.argmax(ratios))
    return float(ratios[best]), best


@dataclass
class SigmaSeries:
    q: float
    p: float
    levels: np.ndarray  # absolute level of A
    increments: np.ndarray  # sum of terms with A at that level
    partial_sums: np.ndarray
    total: float

    def increment_ratios(self) -> np.ndarray:
        prev = self.increments[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.increments[1:] / prev
        return r


def sigma_chain_sum(
    T: ChainTree, W: WhitneyDecomposition | None = None, *,
    q: float, p: float, n: int = 2,
) -> SigmaSeries:
    """Sigma = sum_A (sum_{Q in S(A)} ell^{q-1}|Q| * |A|^{q/n - q/p})^{p/(p-q)}.

    Partial sums are grouped by the absolute level of A; a decaying
    increment sequence is the empirical signature that the full sum stays
    finite as resolution grows.
    """
    if p <= q:
        raise ValueError("sigma_chain_sum needs p > q")
    W = T.W if W is None else W
    g = _chain_length_density(T, q)
    inner = T.subtree_accumulate(np.nan_to_num(g))
    areas = W.sides() ** 2
    expo = q / n - q / p
    power = p / (p - q)
    js = W.abs_levels()
    idx = np.where(T.reachable)[0]
    terms = (inner[idx] * areas[idx] ** expo) ** power
    lv = js[idx]
    uniq = np.unique(lv)
    increments = np.array(
        [float(terms[lv == j].sum()) for j in uniq], dtype=float
    )
    partial = np.cumsum(increments)
    return SigmaSeries(
        q, p, uniq.astype(np.int64), increments, partial,
        float(partial[-1]) if len(partial) else 0.0,
    )


# ---------------------------------------------------------------------------
# John constant estimate


def john_constant_estimate(T: ChainTree, W: WhitneyDecomposition | None = None
                           ) -> float:
    """Certified lower bound on the John constant from tree polylines.

    Tree paths traversed from each cube back to x0 serve as candidate
    curves.  On the edge (p, c) every point z satisfies dist(z) >=
    (d(x_p) + d(x_c) - |x_p - x_c|) / 2 by 1-Lipschitz continuity from
    both endpoints, while its arclength parameter from the far cube is at
    most maxlen(c) - pathlen(p); the estimate is the min of these ratios.
    """
    W = T.W if W is None else W
    sides = W.sides()
    cx = W.root.lo[0] + (W.ix + 0.5) * sides
    cy = W.root.lo[1] + (W.iy + 0.5) * sides
    d = W.center_dist
    order = T.topo_order()
    pathlen = np.zeros(W.n_cubes)
    for v in order:
        p = int(T.parent[v])
        if p >= 0:
            pathlen[v] = pathlen[p] + math.hypot(cx[v] - cx[p], cy[v] - cy[p])
    maxlen = pathlen.copy()
    for v in order[::-1]:
        p = int(T.parent[v])
        if p >= 0:
            maxlen[p] = max(maxlen[p], maxlen[v])
    best = 1.0
    for v in order:
        p = int(T.parent[v])
        if p < 0:
            continue
        gap = math.hypot(cx[v] - cx[p], cy[v] - cy[p])
        dip = (d[v] + d[p] - gap) / 2.0
        t_max = maxlen[v] - pathlen[p]
        if t_max > 0:
            best = min(best, dip / t_max)
    return float(min(max(best, 0.0), 1.0))


# ---------------------------------------------------------------------------
# lemma-level reports


def eks_constant(T: ChainTree) -> float:
    """max over cubes R, levels j >= 1 of (level-j cubes on C(R)) / j."""
    js = T.W.abs_levels()
    best = 0.0
    for v in T.topo_order():
        if v == T.q0:
            continue
        chain = T.shortcut_chain(int(v))
        per: dict[int, int] = {}
        for c in chain:
            per[int(js[c])] = per.get(int(js[c]), 0) + 1
        for j, cnt in per.items():
            if j >= 1:
                best = max(best, cnt / j)
    return best


def shadow_diameter_constant(T: ChainTree, beta: float) -> float:
    """Fitted C in diam(S(Q)) <= C * diam(Q)^beta (bbox upper bounds)."""
    lo, hi = T.shadow_bboxes()
    diam_s = np.hypot(hi[:, 0] - lo[:, 0], hi[:, 1] - lo[:, 1])
    sides = T.W.sides()
    diam_q = np.hypot(sides, sides)
    idx = np.where(T.reachable)[0]
    return float(np.max(diam_s[idx] / diam_q[idx] ** beta))


def chain_statistics(T: ChainTree) -> dict:
    """Empirical constants tying ell and k̂ together (both directions)."""
    idx = np.where(T.reachable)[0]
    ell = T.ell[idx].astype(float)
    k = T.k_hat[idx]
    c_ell = float(np.max(ell / (k + 1.0)))
    c_k = float(np.max(k / (ell + 1.0)))
    return {
        "n_reachable": int(len(idx)),
        "n_unreachable": int(T.W.n_cubes - len(idx)),
        "max_ell_over_k_plus_1": c_ell,
        "max_k_over_ell_plus_1": c_k,
        "max_ell": int(T.ell[idx].max()),
        "max_k_hat": float(k.max()),
    }


# ---------------------------------------------------------------------------
# CSV writers


def _write_lines(path: str, lines: list[str], comment: str | None) -> None:
    head = [] if comment is None else ["# " + comment]
    with open(path, "w") as fh:
        fh.write("\n".join(head + lines) + "\n")


def save_chains_csv(T: ChainTree, path: str, comment: str | None = None
                    ) -> None:
    lines = ["cube_id,j,ell,k_hat,dist"]
    js = T.W.abs_levels()
    for i in range(T.W.n_cubes):
        if not T.reachable[i]:
            continue
        lines.append(
            "%d,%d,%d,%s,%s"
            % (
                i,
                js[i],
                T.ell[i],
                repr(float(T.k_hat[i])),
                repr(float(T.W.center_dist[i])),
            )
        )
    _write_lines(path, lines, comment)


def save_shadows_csv(T: ChainTree, stats: ShadowStats, path: str,
                     comment: str | None = None) -> None:
    lines = ["cube_id,measure,k_class"]
    for i in range(T.W.n_cubes):
        if not T.reachable[i]:
            continue
        lines.append(
            "%d,%s,%d" % (i, repr(float(stats.measures[i])), stats.k_class[i])
        )
    _write_lines(path, lines, comment)


def save_qhbc_fit_csv(fit: QhbcFit, path: str, comment: str | None = None
                      ) -> None:
    lines = [
        "beta_fit,c_fit,slope,intercept,n_fit",
        "%s,%s,%s,%s,%d"
        % (
            repr(fit.beta_fit),
            repr(fit.c_fit),
            repr(fit.slope),
            repr(fit.intercept),
            fit.n_fit,
        ),
    ]
    _write_lines(path, lines, comment)


def save_sigma_series_csv(series: SigmaSeries, path: str,
                          comment: str | None = None) -> None:
    lines = ["level,increment,partial_sum"]
    for j, inc, ps in zip(series.levels, series.increments,
                          series.partial_sums):
        lines.append("%d,%s,%s" % (j, repr(float(inc)), repr(float(ps))))
    _write_lines(path, lines, comment)
