"""Command line pipelines: build domains, decompose, analyze, report.

Configuration is a flat ``key = value`` file overridden by flags; every
output file starts with a comment line carrying the tool version, a hash
of the effective config, and the seed, so reruns are byte-comparable.
Exit codes: 0 success, 2 usage or precondition violation, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, fields

from . import __version__

_ANALYSES = ("whitney", "chains", "dim", "poincare")


@dataclass
class RunConfig:
    domain: str = "square"  # square | l-shape | four-corner | box-union
    lam: float = 1.0
    depth: int = 4
    radius: float = 2.0
    boxes: str = ""  # box-union cells: "x0,y0,x1,y1;..."
    beta: float = 0.0  # > 0 applies room-and-passage surgery
    surgery_j: int = 4
    j_max: int = 8
    q: float = 1.0
    p: float = 0.0  # <= 0 means 1.25 * p0
    eps: float = 0.1
    h: float = 0.03125
    iters: int = 30
    restarts: int = 2
    m_max: int = 32
    seed: int = 0
    assumed_c2bar: float = 0.0  # <= 0 means not assumed
    analyses: str = "whitney,chains,dim,poincare"
    out_dir: str = "out"
    render_shadow: int = -1  # cube id; -1 picks the deepest reachable cube

    def canonical(self) -> str:
        # out_dir is where results land, not what they are; leaving it out
        # keeps reruns into different directories byte-comparable
        parts = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out_dir":
                continue
            parts.append("%s = %s" % (f.name, getattr(self, f.name)))
        return "\n".join(parts) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def comment(self) -> str:
        return "qhlab %s config=%s seed=%d" % (
            __version__, self.digest(), self.seed
        )

    def toggles(self) -> set[str]:
        names = {t.strip() for t in self.analyses.split(",") if t.strip()}
        bad = names - set(_ANALYSES)
        if bad:
            raise ValueError("unknown analyses: %s" % ", ".join(sorted(bad)))
        return names


def load_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError("config line without '=': %r" % line)
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def make_config(file_values: dict, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    casts = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, val in merged.items():
        if key not in casts:
            raise ValueError("unknown config key: %s" % key)
        setattr(cfg, key, casts[key](val))
    return cfg


def build_oracle(cfg: RunConfig):
    from . import domains

    if cfg.domain == "square":
        base = domains.build_unit_square()
    elif cfg.domain == "l-shape":
        base = domains.build_l_shape()
    elif cfg.domain == "four-corner":
        base = domains.build_disk_minus_fractal(cfg.lam, cfg.depth, cfg.radius)
    elif cfg.domain == "box-union":
        if not cfg.boxes:
            raise ValueError("box-union needs --boxes \"x0,y0,x1,y1;...\"")
        from .geometry import Box

        cells = []
        for chunk in cfg.boxes.split(";"):
            x0, y0, x1, y1 = (float(t) for t in chunk.split(","))
            cells.append(Box((x0, y0), (x1, y1)))
        base = domains.build_box_union(cells)
    else:
        raise ValueError("unknown domain: %s" % cfg.domain)
    if cfg.beta > 0.0:
        from .whitney import whitney_decompose

        Wb = whitney_decompose(base, cfg.surgery_j)
        return domains.build_beta_version(base, Wb, cfg.beta)
    return base


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def cmd_build(cfg: RunConfig) -> int:
    from .domains import save_domain

    oracle = build_oracle(cfg)
    path = _out(cfg, "domain.txt")
    save_domain(oracle, path, comment=cfg.comment())
    prov = dict(oracle.provenance)
    prov["config"] = cfg.digest()
    prov["seed"] = cfg.seed
    prov["version"] = __version__
    with open(_out(cfg, "provenance.json"), "w") as fh:
        fh.write("# " + cfg.comment() + "\n")
        fh.write(json.dumps(prov, sort_keys=True, indent=2, default=str) + "\n")
    print(path)
    return 0


def _decompose(cfg: RunConfig):
    from .whitney import whitney_decompose

    oracle = build_oracle(cfg)
    return oracle, whitney_decompose(oracle, cfg.j_max)


def cmd_whitney(cfg: RunConfig) -> int:
    from .whitney import save_census, save_whitney

    _, W = _decompose(cfg)
    save_whitney(W, _out(cfg, "whitney.txt"), comment=cfg.comment())
    save_census(W, _out(cfg, "census.csv"), comment=cfg.comment())
    print("%d cubes, %d truncated" % (W.n_cubes, len(W.trunc_levels)))
    return 0


def _tree(cfg: RunConfig):
    from .qhchains import chain_tree, qh_edge_weights
    from .whitney import build_cube_graph

    oracle, W = _decompose(cfg)
    G = build_cube_graph(W)
    qh_edge_weights(G, W)
    T = chain_tree(G, W, oracle=oracle)
    return oracle, W, G, T


def cmd_qh_fit(cfg: RunConfig) -> int:
    from .qhchains import qhbc_fit, save_chains_csv, save_qhbc_fit_csv

    _, W, _, T = _tree(cfg)
    fit = qhbc_fit(T, W)
    save_chains_csv(T, _out(cfg, "chains.csv"), comment=cfg.comment())
    save_qhbc_fit_csv(fit, _out(cfg, "qhbc_fit.csv"), comment=cfg.comment())
    print("beta_fit=%.6f c_fit=%.6f" % (fit.beta_fit, fit.c_fit))
    return 0


def cmd_shadow_stats(cfg: RunConfig) -> int:
    from .qhchains import classify_levels, save_shadows_csv

    _, W, _, T = _tree(cfg)
    stats = classify_levels(T, W)
    save_shadows_csv(T, stats, _out(cfg, "shadows.csv"), comment=cfg.comment())
    print(
        "coverage=%.4f sigma=%.6g max_count_ratio=%.6g"
        % (stats.coverage(), stats.sigma, stats.max_count_ratio)
    )
    return 0


def cmd_dim(cfg: RunConfig) -> int:
    from .dimension import (
        boundary_descriptor,
        box_count_series,
        minkowski_fit,
        natural_scales,
        save_boxcount_csv,
        save_dimension_csv,
        whitney_dim_estimate,
    )
    from .whitney import level_counts

    oracle, W = _decompose(cfg)
    desc = boundary_descriptor(oracle)
    series = box_count_series(desc, natural_scales(desc), lam=cfg.lam)
    mink = minkowski_fit(series)
    whit = whitney_dim_estimate(level_counts(W))
    save_boxcount_csv(series, _out(cfg, "boxcount.csv"), comment=cfg.comment())
    save_dimension_csv(
        [("minkowski", mink), ("whitney-census", whit)],
        _out(cfg, "dimension.csv"),
        comment=cfg.comment(),
    )
    print("minkowski=%.4f whitney=%.4f" % (mink.slope, whit.slope))
    return 0


def _beta_eff(cfg: RunConfig) -> float:
    return cfg.beta if cfg.beta > 0.0 else 1.0


def _p_eff(cfg: RunConfig, p0: float) -> float:
    # default sits above both q and the threshold so every analysis applies
    return cfg.p if cfg.p > 0.0 else 1.25 * max(p0, cfg.q)


def cmd_poincare_threshold(cfg: RunConfig) -> int:
    from .poincare import save_threshold_table_csv, threshold_table

    rows = threshold_table([(cfg.q, cfg.lam, _beta_eff(cfg), 2)])
    save_threshold_table_csv(rows, _out(cfg, "threshold_table.csv"),
                             comment=cfg.comment())
    print("p0=%.12g" % rows[0]["p0"])
    return 0


def cmd_poincare_counterexample(cfg: RunConfig) -> int:
    from .poincare import (
        build_counterexample_plan,
        counterexample_sequence,
        save_ratio_sequence_csv,
        threshold_p0,
    )

    _, W = _decompose(cfg)
    beta = _beta_eff(cfg)
    p0 = threshold_p0(cfg.q, cfg.lam, beta, 2)
    p = cfg.p if cfg.p > 0.0 else 0.9 * p0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = build_counterexample_plan(W, cfg.lam, cfg.m_max,
                                         extrapolate=True)
    seq = counterexample_sequence(plan, beta, cfg.q, p)
    save_ratio_sequence_csv(seq, _out(cfg, "ratio_sequence.csv"),
                            comment=cfg.comment())
    lo = min(4, plan.depth)
    print("slope=%.6f depth=%d" % (seq.fitted_slope(lo), plan.depth))
    return 0


def cmd_poincare_estimate(cfg: RunConfig) -> int:
    from .poincare import discrete_poincare_lower_bound, threshold_p0

    oracle = build_oracle(cfg)
    beta = _beta_eff(cfg)
    p0 = threshold_p0(cfg.q, cfg.lam, beta, 2)
    p = _p_eff(cfg, p0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = discrete_poincare_lower_bound(
            oracle, cfg.q, p, cfg.h, iters=cfg.iters, seed=cfg.seed,
            restarts=cfg.restarts,
        )
    with open(_out(cfg, "estimate.json"), "w") as fh:
        fh.write("# " + cfg.comment() + "\n")
        fh.write(
            json.dumps(
                {"q": cfg.q, "p": p, "h": cfg.h, "lower_bound": res.value,
                 "restarts": res.restarts},
                sort_keys=True, indent=2,
            )
            + "\n"
        )
    print("lower_bound=%.8g" % res.value)
    return 0


def cmd_poincare_predicate(cfg: RunConfig) -> int:
    from .poincare import (
        PoincareParams,
        predicate_report,
        save_predicate_json,
        threshold_p0,
    )

    beta = _beta_eff(cfg)
    p0 = threshold_p0(cfg.q, cfg.lam, beta, 2)
    p = _p_eff(cfg, p0)
    c2bar = cfg.assumed_c2bar if cfg.assumed_c2bar > 0.0 else None
    report = predicate_report(PoincareParams(2, cfg.q, p, cfg.lam, beta), c2bar)
    save_predicate_json(report, _out(cfg, "predicate.json"),
                        comment=cfg.comment())
    print("%s (%s)" % (report["verdict"], report["rule"]))
    return 0


def cmd_render(cfg: RunConfig) -> int:
    from .qhchains import chain_tree, qh_edge_weights
    from .render import save_svg
    from .whitney import build_cube_graph

    oracle, W = _decompose(cfg)
    shadow_ids = None
    root = None
    if W.n_cubes:
        G = build_cube_graph(W)
        qh_edge_weights(G, W)
        T = chain_tree(G, W, oracle=oracle)
        root = cfg.render_shadow
        if root < 0:
            reach = [i for i in range(W.n_cubes) if T.reachable[i]]
            root = max(reach, key=lambda i: (W.abs_level(i), -i)) if reach else None
        if root is not None:
            shadow_ids = T.shadow_cubes(int(root))
    save_svg(_out(cfg, "render.svg"), oracle, W, shadow_ids, root,
             comment=cfg.comment())
    print(_out(cfg, "render.svg"))
    return 0


class StageError(RuntimeError):
    def __init__(self, stage: str, err: Exception):
        super().__init__("pipeline failed at stage %s: %s" % (stage, err))
        self.stage = stage
        self.cause = err


def cmd_pipeline(cfg: RunConfig) -> int:
    from .domains import save_domain

    toggles = cfg.toggles()
    summary: dict = {
        "version": __version__,
        "config": cfg.digest(),
        "seed": cfg.seed,
        "domain": cfg.domain,
        "j_max": cfg.j_max,
        "qhlab_threads": os.environ.get("QHLAB_THREADS", ""),
    }

    def stage(name, fn):
        try:
            return fn()
        except Exception as err:  # abort with the failing stage's name
            raise StageError(name, err) from err

    oracle = stage("build", lambda: build_oracle(cfg))
    stage("build", lambda: save_domain(oracle, _out(cfg, "domain.txt"),
                                       comment=cfg.comment()))

    W = None
    if toggles & {"whitney", "chains", "dim"}:
        from .whitney import save_census, save_whitney, whitney_decompose

        W = stage("whitney", lambda: whitney_decompose(oracle, cfg.j_max))
        if "whitney" in toggles:
            stage("whitney", lambda: save_whitney(
                W, _out(cfg, "whitney.txt"), comment=cfg.comment()))
            stage("whitney", lambda: save_census(
                W, _out(cfg, "census.csv"), comment=cfg.comment()))
            summary["n_cubes"] = W.n_cubes

    beta = _beta_eff(cfg)
    from .poincare import threshold_p0

    p0 = stage("poincare", lambda: threshold_p0(cfg.q, cfg.lam, beta, 2))
    p = _p_eff(cfg, p0)
    summary["q"] = cfg.q
    summary["p"] = p
    summary["p0"] = p0

    T = None
    if "chains" in toggles:
        from .qhchains import (
            chain_tree,
            classify_levels,
            john_constant_estimate,
            qh_edge_weights,
            qhbc_fit,
            save_chains_csv,
            save_qhbc_fit_csv,
            save_shadows_csv,
            save_sigma_series_csv,
            sigma_chain_sum,
        )
        from .whitney import build_cube_graph

        def run_chains():
            G = build_cube_graph(W)
            qh_edge_weights(G, W)
            return chain_tree(G, W, oracle=oracle)

        T = stage("chains", run_chains)
        fit = stage("chains", lambda: qhbc_fit(T, W))
        stats = stage("chains", lambda: classify_levels(T, W))
        stage("chains", lambda: save_chains_csv(
            T, _out(cfg, "chains.csv"), comment=cfg.comment()))
        stage("chains", lambda: save_qhbc_fit_csv(
            fit, _out(cfg, "qhbc_fit.csv"), comment=cfg.comment()))
        stage("chains", lambda: save_shadows_csv(
            T, stats, _out(cfg, "shadows.csv"), comment=cfg.comment()))
        summary["beta_fit"] = fit.beta_fit
        summary["c_fit"] = fit.c_fit
        summary["classification_coverage"] = stats.coverage()
        summary["shadow_count_ratio"] = stats.max_count_ratio
        summary["sigma_total"] = None
        summary["sigma_tail_decay"] = None
        if p > cfg.q:
            sigma = stage("chains", lambda: sigma_chain_sum(
                T, W, q=cfg.q, p=p))
            stage("chains", lambda: save_sigma_series_csv(
                sigma, _out(cfg, "sigma_series.csv"), comment=cfg.comment()))
            summary["sigma_total"] = float(sigma.partial_sums[-1])
            ratios = sigma.increment_ratios()
            if len(ratios):
                summary["sigma_tail_decay"] = bool(ratios[-1] < 1.0)
        summary["john_constant"] = john_constant_estimate(T, W)

    if "dim" in toggles:
        from .dimension import (
            boundary_descriptor,
            box_count_series,
            minkowski_fit,
            natural_scales,
            save_boxcount_csv,
            save_dimension_csv,
            whitney_dim_estimate,
        )
        from .whitney import level_counts

        desc = stage("dim", lambda: boundary_descriptor(oracle))
        series = stage("dim", lambda: box_count_series(
            desc, natural_scales(desc), lam=cfg.lam))
        mink = stage("dim", lambda: minkowski_fit(series))
        whit = stage("dim", lambda: whitney_dim_estimate(level_counts(W)))
        stage("dim", lambda: save_boxcount_csv(
            series, _out(cfg, "boxcount.csv"), comment=cfg.comment()))
        stage("dim", lambda: save_dimension_csv(
            [("minkowski", mink), ("whitney-census", whit)],
            _out(cfg, "dimension.csv"), comment=cfg.comment()))
        summary["dim_minkowski"] = mink.slope
        summary["dim_whitney"] = whit.slope

    if "poincare" in toggles:
        from .poincare import (
            PoincareParams,
            build_counterexample_plan,
            counterexample_sequence,
            predicate_report,
            save_predicate_json,
            save_ratio_sequence_csv,
            save_threshold_table_csv,
            threshold_table,
        )

        rows = stage("poincare", lambda: threshold_table(
            [(cfg.q, cfg.lam, beta, 2)]))
        stage("poincare", lambda: save_threshold_table_csv(
            rows, _out(cfg, "threshold_table.csv"), comment=cfg.comment()))
        c2bar = cfg.assumed_c2bar if cfg.assumed_c2bar > 0.0 else None
        report = stage("poincare", lambda: predicate_report(
            PoincareParams(2, cfg.q, p, cfg.lam, beta), c2bar))
        stage("poincare", lambda: save_predicate_json(
            report, _out(cfg, "predicate.json"), comment=cfg.comment()))
        summary["predicate"] = report["verdict"]
        summary["predicate_rule"] = report["rule"]
        summary["ratio_slope"] = None
        if W is not None and W.n_cubes:
            def run_plan():
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    plan = build_counterexample_plan(
                        W, cfg.lam, cfg.m_max, extrapolate=True)
                p_low = 0.9 * p0
                if not cfg.q < p_low:
                    return None
                return counterexample_sequence(plan, beta, cfg.q, p_low)

            seq = stage("poincare", run_plan)
            if seq is not None:
                stage("poincare", lambda: save_ratio_sequence_csv(
                    seq, _out(cfg, "ratio_sequence.csv"),
                    comment=cfg.comment()))
                lo = min(4, len(seq.ms))
                summary["ratio_slope"] = seq.fitted_slope(lo)

    if W is not None:
        from .render import save_svg

        shadow_ids = None
        root = None
        if T is not None:
            root = cfg.render_shadow
            if root < 0:
                reach = [i for i in range(W.n_cubes) if T.reachable[i]]
                root = (
                    max(reach, key=lambda i: (W.abs_level(i), -i))
                    if reach else None
                )
            if root is not None:
                shadow_ids = T.shadow_cubes(int(root))
        stage("render", lambda: save_svg(
            _out(cfg, "render.svg"), oracle, W, shadow_ids, root,
            comment=cfg.comment()))

    with open(_out(cfg, "summary.json"), "w") as fh:
        fh.write("# " + cfg.comment() + "\n")
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(_out(cfg, "summary.json"))
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--domain")
    sub.add_argument("--lambda", dest="lam")
    sub.add_argument("--depth")
    sub.add_argument("--radius")
    sub.add_argument("--boxes")
    sub.add_argument("--beta")
    sub.add_argument("--surgery-j", dest="surgery_j")
    sub.add_argument("--j-max", dest="j_max")
    sub.add_argument("--q")
    sub.add_argument("--p")
    sub.add_argument("--eps")
    sub.add_argument("--h")
    sub.add_argument("--iters")
    sub.add_argument("--restarts")
    sub.add_argument("--m-max", dest="m_max")
    sub.add_argument("--seed")
    sub.add_argument("--assumed-c2bar", dest="assumed_c2bar")
    sub.add_argument("--analyses")
    sub.add_argument("--out", dest="out_dir")
    sub.add_argument("--render-shadow", dest="render_shadow")


def _apply_thread_cap() -> None:
    cap = os.environ.get("QHLAB_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_COMMANDS = {
    "build": cmd_build,
    "whitney": cmd_whitney,
    "qh-fit": cmd_qh_fit,
    "shadow-stats": cmd_shadow_stats,
    "dim": cmd_dim,
    "pipeline": cmd_pipeline,
    "render": cmd_render,
}

_POINCARE = {
    "threshold": cmd_poincare_threshold,
    "counterexample": cmd_poincare_counterexample,
    "estimate": cmd_poincare_estimate,
    "predicate": cmd_poincare_predicate,
}


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = argparse.ArgumentParser(prog="qhlab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(subs.add_parser(name))
    poin = subs.add_parser("poincare")
    poin.add_argument("subcommand", choices=sorted(_POINCARE))
    _add_common(poin)

    ns = parser.parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(ns).items()
        if k not in ("command", "subcommand", "config")
    }
    try:
        file_values = load_config_file(ns.config) if ns.config else {}
        cfg = make_config(file_values, overrides)
        if ns.command == "poincare":
            return _POINCARE[ns.subcommand](cfg)
        return _COMMANDS[ns.command](cfg)
    except StageError as err:
        print(str(err), file=sys.stderr)
        return 2 if isinstance(err.cause, ValueError) else 3
    except ValueError as err:
        print(str(err), file=sys.stderr)
        return 2
    except Exception as err:  # invariant violation, not a usage problem
        print("internal error: %s" % err, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
