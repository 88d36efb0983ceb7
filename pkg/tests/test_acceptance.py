"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (run pytest
with ``-s`` to see the lines for passing tests too) and folds its
runtime budget into the verdict.  Heavy shared objects are built lazily
and cached, so the first criterion that touches one pays for it inside
its own stopwatch.
"""

import math
import time

import numpy as np

from qhlab import cli
from qhlab.dimension import (
    SetDescriptor,
    box_count_series,
    geometric_scales,
    greedy_ball_pack,
    minkowski_fit,
    whitney_dim_estimate,
)
from qhlab.domains import (
    build_beta_version,
    build_disk_minus_fractal,
    build_l_shape,
    build_unit_square,
    ifs_iterate,
    make_four_corner_ifs,
)
from qhlab.geometry import box_circle_distance
from qhlab.poincare import (
    TestFunctionSpec as TFSpec,
    build_counterexample_plan,
    counterexample_function,
    counterexample_sequence,
    discrete_poincare_lower_bound,
    p0_monotonicity_check,
    signed_mean_quadrature,
    test_function_norms as tf_norms,
    test_function_norms_quadrature as tf_norms_quadrature,
    threshold_p0,
)
from qhlab.qhchains import (
    chain_statistics,
    chain_tree,
    classify_levels,
    qh_edge_weights,
    qhbc_fit,
    shadow_sum_max_ratio,
    sigma_chain_sum,
)
from qhlab.whitney import (
    build_cube_graph,
    dilated_overlap_counts,
    level_counts,
    whitney_decompose,
)

_CACHE: dict = {}


def cached(key, builder):
    if key not in _CACHE:
        _CACHE[key] = builder()
    return _CACHE[key]


def fc6():
    return cached("fc6", lambda: build_disk_minus_fractal(1.0, 6))


def fc6_w10():
    return cached("fc6_w10", lambda: whitney_decompose(fc6(), 10))


def gbeta():
    return cached(
        "gbeta",
        lambda: build_beta_version(fc6(), whitney_decompose(fc6(), 4), 0.25),
    )


def gbeta_w10():
    return cached("gbeta_w10", lambda: whitney_decompose(gbeta(), 10))


def gbeta_tree():
    def build():
        W = gbeta_w10()
        G = build_cube_graph(W)
        qh_edge_weights(G, W)
        return chain_tree(G, W, oracle=gbeta())

    return cached("gbeta_tree", build)


def beta_square(surgery_j):
    def build():
        sq = build_unit_square()
        return build_beta_version(sq, whitney_decompose(sq, surgery_j), 0.5)

    return cached(("beta_square", surgery_j), build)


def report(num, ok, detail):
    print("ACCEPTANCE %d %s  (%s)" % (num, "PASS" if ok else "FAIL", detail))
    assert ok, "criterion %d: %s" % (num, detail)


def test_criterion_1():
    t0 = time.time()
    rng = np.random.default_rng(20260814)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        beta = float(rng.uniform(0.05, (n - 1.0) / n - 0.01))
        lam = float(rng.uniform(n - 1.0, n - 1e-9))
        q = n - n * beta
        worst = max(worst, abs(threshold_p0(q, lam, beta, n) - q))
    combos = (
        (2, 0.25, 1.2),
        (2, 0.40, 1.0),
        (3, 0.50, 1.2),
        (4, 0.30, 2.0),
        (5, 0.20, 3.5),
    )
    mono = all(
        p0_monotonicity_check(q, beta, n, np.linspace(n - 1.0, n - 1e-6, 50))
        for n, beta, q in combos
    )
    el = time.time() - t0
    ok = worst <= 1e-12 and mono and el < 1.0
    report(1, ok, "fixed point dev %.1e, monotone %s, %.2fs" % (worst, mono, el))


def _recomputed_boundary_distances(W, dom):
    plo, phi = dom.primitive_arrays()
    plo = np.asarray(plo, dtype=float).reshape(-1, 2)
    phi = np.asarray(phi, dtype=float).reshape(-1, 2)
    sides = W.sides()
    lo_x = W.root.lo[0] + W.ix * sides
    lo_y = W.root.lo[1] + W.iy * sides
    out = np.empty(W.n_cubes)
    for i in range(W.n_cubes):
        lo = (lo_x[i], lo_y[i])
        hi = (lo_x[i] + sides[i], lo_y[i] + sides[i])
        if len(plo):
            gx = np.maximum(np.maximum(plo[:, 0] - hi[0], lo[0] - phi[:, 0]), 0.0)
            gy = np.maximum(np.maximum(plo[:, 1] - hi[1], lo[1] - phi[:, 1]), 0.0)
            d = float(np.min(np.hypot(gx, gy)))
        else:
            d = math.inf
        if dom.circle is not None:
            d = min(d, box_circle_distance(lo, hi, dom.circle[0], dom.circle[1]))
        out[i] = d
    return out


def _interiors_disjoint(W):
    cells = {
        (int(l), int(a), int(b))
        for l, a, b in zip(W.levels, W.ix, W.iy)
    }
    if len(cells) != W.n_cubes:
        return False
    lv_min = int(W.levels.min())
    for l, a, b in list(cells):
        while l > lv_min:
            l -= 1
            a >>= 1
            b >>= 1
            if (l, a, b) in cells:
                return False
    return True


def test_criterion_2():
    sq = build_unit_square()
    lsh = build_l_shape()
    cases = [
        ("square", sq, lambda: whitney_decompose(sq, 10)),
        ("l-shape", lsh, lambda: whitney_decompose(lsh, 10)),
        ("fractal", fc6(), fc6_w10),
        ("beta-square", beta_square(4), lambda: whitney_decompose(beta_square(4), 10)),
    ]
    ok = True
    parts = []
    for name, dom, thunk in cases:
        t0 = time.time()
        W = thunk()
        diam = W.sides() * math.sqrt(2.0)
        d = _recomputed_boundary_distances(W, dom)
        sandwich = bool(np.all(diam <= d) and np.all(d <= 4.0 * diam))
        disjoint = _interiors_disjoint(W)
        rng = np.random.default_rng(2)
        pts = rng.uniform(dom.bbox.lo, dom.bbox.hi, size=(10_000, 2))
        overlap = int(dilated_overlap_counts(W, pts).max())
        el = time.time() - t0
        fx_ok = sandwich and disjoint and overlap <= 144 and el < 60.0
        ok = ok and fx_ok
        parts.append(
            "%s: sandwich %s, disjoint %s, overlap %d, %.0fs"
            % (name, sandwich, disjoint, overlap, el)
        )
    report(2, ok, "; ".join(parts))


def test_criterion_3():
    t0 = time.time()
    desc = SetDescriptor(
        boxes=tuple(ifs_iterate(make_four_corner_ifs(1.0), 6))
    )
    s_quarter = minkowski_fit(
        box_count_series(desc, geometric_scales(0.5, 0.25, 6))
    ).slope
    lam38 = math.log(4.0) / math.log(8.0 / 3.0)
    desc38 = SetDescriptor(
        boxes=tuple(ifs_iterate(make_four_corner_ifs(lam38), 6))
    )
    s_38 = minkowski_fit(
        box_count_series(desc38, geometric_scales(0.75, 0.375, 6), lam=lam38)
    ).slope
    s_census = whitney_dim_estimate(level_counts(fc6_w10())).slope
    s_beta = whitney_dim_estimate(level_counts(gbeta_w10())).slope
    el = time.time() - t0
    ok = (
        abs(s_quarter - 1.0) <= 0.05
        and abs(s_38 - 1.41) <= 0.07
        and abs(s_census - 1.0) <= 0.15
        and abs(s_beta - s_census) <= 0.1
        and el < 120.0
    )
    report(
        3,
        ok,
        "quarter %.3f, 3/8 %.3f, census %.3f, beta delta %.3f, %.0fs"
        % (s_quarter, s_38, s_census, abs(s_beta - s_census), el),
    )


def test_criterion_4():
    t0 = time.time()
    results = {}
    for name, dom in (("square", build_unit_square()), ("beta", beta_square(4))):
        W = whitney_decompose(dom, 8)
        G = build_cube_graph(W)
        qh_edge_weights(G, W)
        T = chain_tree(G, W, oracle=dom)
        fit = qhbc_fit(T)
        idx = np.where(T.reachable)[0]
        bound = (1.0 / fit.beta_fit) * np.log(1.0 / W.center_dist[idx]) + fit.c_fit
        certified = bool(np.all(T.k_hat[idx] <= bound + 1e-9))
        results[name] = (fit, certified)
    f_sq, cert_sq = results["square"]
    f_b, cert_b = results["beta"]
    el = time.time() - t0
    ok = (
        0.8 <= f_sq.beta_fit <= 1.2
        and f_b.beta_fit >= 0.125
        and math.isfinite(f_b.c_fit)
        and cert_sq
        and cert_b
        and el < 60.0
    )
    report(
        4,
        ok,
        "square beta_fit %.3f, beta-version beta_fit %.3f c_fit %.2f, "
        "certified %s/%s, %.0fs"
        % (f_sq.beta_fit, f_b.beta_fit, f_b.c_fit, cert_sq, cert_b, el),
    )


def test_criterion_5():
    t0 = time.time()
    dom = beta_square(3)
    cov_ok = True
    comp_ok = True
    sids = []
    l34 = {1.0: [], 2.0: []}
    for J in (6, 8, 10):
        W = whitney_decompose(dom, J)
        G = build_cube_graph(W)
        qh_edge_weights(G, W)
        T = chain_tree(G, W, oracle=dom)
        st = classify_levels(T, W, beta=0.5)
        cov_ok = cov_ok and st.coverage() == 1.0
        sids.append(st.max_count_ratio)
        cs = chain_statistics(T)
        comp_ok = (
            comp_ok
            and cs["max_ell_over_k_plus_1"] <= 10.0
            and cs["max_k_over_ell_plus_1"] <= 10.0
        )
        for q in (1.0, 2.0):
            l34[q].append(shadow_sum_max_ratio(T, q, 0.1)[0])
    sid_ratio = max(sids) / min(sids)
    l34_ratios = {q: max(v) / min(v) for q, v in l34.items()}
    el = time.time() - t0
    ok = (
        cov_ok
        and sid_ratio <= 2.0
        and all(r <= 2.0 for r in l34_ratios.values())
        and comp_ok
        and el < 300.0
    )
    report(
        5,
        ok,
        "coverage %s, sid ratio %.2f, lemma ratios q1 %.2f q2 %.2f, "
        "comparability %s, %.0fs"
        % (cov_ok, sid_ratio, l34_ratios[1.0], l34_ratios[2.0], comp_ok, el),
    )


def test_criterion_6():
    t0 = time.time()
    W = gbeta_w10()
    p0 = threshold_p0(1.0, 1.0, 0.25, 2)
    p = 0.9 * p0
    plan = build_counterexample_plan(W, 1.0, 64, extrapolate=True)
    seq = counterexample_sequence(plan, 0.25, 1.0, p)
    slope = seq.fitted_slope(4, 64)
    target = 0.9 * (1.0 - 1.0 / p)
    depth_mat = plan.extrapolated_from or plan.depth
    rel = 0.0
    for k in range(depth_mat):
        cid = plan.cube_ids[k][0]
        spec = TFSpec(
            W.cube_side(cid), W.cube_center(cid), 0.25, 1.0, 1.0
        )
        c_u, c_g = tf_norms(spec, p)
        q_u, q_g = tf_norms_quadrature(spec, p)
        rel = max(rel, abs(c_u - q_u) / c_u, abs(c_g - q_g) / c_g)
    mean_dev = max(
        abs(signed_mean_quadrature(counterexample_function(plan, W, 0.25, 1.0, m)))
        for m in (2, 4, depth_mat)
    )
    el = time.time() - t0
    ok = slope >= target and rel <= 1e-6 and mean_dev <= 1e-9 and el < 120.0
    report(
        6,
        ok,
        "slope %.3f >= %.3f, quad rel err %.1e, mean dev %.1e, %.0fs"
        % (slope, target, rel, mean_dev, el),
    )


def test_criterion_7():
    t0 = time.time()
    T = gbeta_tree()
    W = gbeta_w10()
    p0 = threshold_p0(1.0, 1.0, 0.25, 2)

    def decays(p):
        S = sigma_chain_sum(T, W, q=1.0, p=p)
        inc = S.increments[-3:]
        ratios = inc[1:] / inc[:-1]
        return bool(np.all(ratios < 1.0)), ratios

    hi, r_hi = decays(1.25 * p0)
    lo, r_lo = decays(0.8 * p0)
    el = time.time() - t0
    ok = hi and not lo and el < 120.0
    report(
        7,
        ok,
        "above threshold decays %s %s, below decays %s %s, %.0fs"
        % (hi, np.round(r_hi, 4), lo, np.round(r_lo, 4), el),
    )


def test_criterion_8():
    t0 = time.time()
    sq_res = discrete_poincare_lower_bound(
        build_unit_square(), 2.0, 2.0, 1.0 / 128.0, iters=60, seed=0, restarts=0
    )
    sq_ok = sq_res.value >= 0.9 / math.pi
    p = 0.9 * threshold_p0(1.0, 1.0, 0.25, 2)
    vals = [
        discrete_poincare_lower_bound(
            gbeta(), 1.0, p, h, iters=60, seed=0, restarts=0
        ).value
        for h in (1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0)
    ]
    mono = vals[0] <= vals[1] <= vals[2]
    el = time.time() - t0
    ok = sq_ok and mono and el < 300.0
    report(
        8,
        ok,
        "square %.4f >= %.4f, beta-version %s nondecreasing %s, %.0fs"
        % (sq_res.value, 0.9 / math.pi, np.round(vals, 4), mono, el),
    )


def test_criterion_9():
    t0 = time.time()
    desc = SetDescriptor(
        boxes=tuple(ifs_iterate(make_four_corner_ifs(1.0), 6))
    )
    vals = [greedy_ball_pack(desc, 4.0**-k)[0] * 4.0**-k for k in range(1, 7)]
    spread = max(vals) / min(vals)
    el = time.time() - t0
    ok = spread <= 4.0 and el < 30.0
    report(9, ok, "N(r)*r spread %.2f, %.0fs" % (spread, el))


def test_criterion_10(tmp_path):
    t0 = time.time()
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        "domain = square\nj_max = 6\nh = 0.03125\niters = 10\n"
        "m_max = 12\nseed = 3\n"
    )
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        rc = cli.main(["pipeline", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        outs.append(out)
    names_a = sorted(p.name for p in outs[0].glob("*.csv"))
    names_b = sorted(p.name for p in outs[1].glob("*.csv"))
    identical = names_a == names_b and all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
        for n in names_a
    )
    el = time.time() - t0
    ok = identical and len(names_a) > 0
    report(
        10,
        ok,
        "%d csv files, byte-identical %s, %.0fs" % (len(names_a), identical, el),
    )
