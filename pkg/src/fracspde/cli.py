"""Command-line experiment runner.

    fracspde SUBCOMMAND [CONFIG] [--config PATH] [--seed U64] [--replicates N]
                        [--threads N] [--out DIR]

Exit status: 0 when every check passes, 1 when a check fails, 2 for
configuration or precondition errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernel as kmod
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config
from .fields import ForcingSpec, GridSpec, NoiseSpec, field_from_function
from .io import OutputDir, config_hash, versions
from .regularity import (
    PlanError,
    chaining_bound,
    make_plan,
    mixed_pairs,
    moment_increment_scan,
    plan_table,
    space_pairs,
    time_pairs,
)
from .seminorms import DomainSpec, campanato_seminorm, diverges, holder_seminorm
from .solver import SolveConfig, bm_variance_exact, run_ensemble, solve_mild_bm, solve_mild_stwn, stwn_variance_exact

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class CheckFailed(Exception):
    pass


def _kernel_spec(cfg: RunConfig, alpha=None, dim=None) -> kmod.KernelSpec:
    k = cfg["kernel"]
    return kmod.KernelSpec(k["alpha"] if alpha is None else alpha, k["dim"] if dim is None else dim,
                           k["fourier_cutoff"], k["quad_points"])


def _grid(cfg: RunConfig) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(g["t_max"], g["nt"], g["domain_len"], g["nx"])


def _solve_config(cfg: RunConfig, store_every=None, store_start=None) -> SolveConfig:
    sim = cfg["simulate"]
    return SolveConfig(
        _kernel_spec(cfg, dim=1),
        _grid(cfg),
        NoiseSpec(cfg["noise"]["kind"], cfg.seed, 0),
        ForcingSpec(cfg["forcing"]["family"], tuple(cfg["forcing"]["params"])),
        sim["store_every"] if store_every is None else store_every,
        cfg["plan"]["p"],
        sim["store_start"] if store_start is None else store_start,
    )


# --------------------------------------------------------------------------
# kernel-verify


def run_kernel_verify(cfg: RunConfig, out: OutputDir) -> dict:
    tol = cfg["tolerances"]
    kv = cfg["kernel_verify"]
    alpha = cfg["kernel"]["alpha"]
    checks = {}

    if kv["sharp_bound"] and alpha >= 1.0:
        # surfaces the restriction before any work is done
        kmod._require_strict_alpha(_kernel_spec(cfg), "the sharp two-sided kernel bound")

    mass_rows, ss_rows = [], []
    for d in sorted({int(v) for v in kv["dims"]}):
        spec = _kernel_spec(cfg, dim=d)
        lim = tol["mass"] if d == 1 else tol["mass_2d"]
        for t in kv["t_values"]:
            m = kmod.kernel_mass(spec, t)
            mass_rows.append([alpha, d, t, m, m - 1.0, lim, abs(m - 1.0) < lim])
        n = kv["grid_points"]
        if d == 1:
            pts = np.linspace(-10.0, 10.0, n)
        else:
            r = np.linspace(0.0, 10.0, n)
            pts = np.stack([r * 0.6, r * 0.8], axis=-1)
        for t in kv["t_values"]:
            err = kmod.self_similarity_error(spec, [t], pts)
            ss_rows.append([alpha, d, t, n, err, tol["self_similarity"], err < tol["self_similarity"]])
    out.csv("mass.csv", ["alpha", "dim", "t", "mass", "error", "tolerance", "pass"], mass_rows)
    out.csv("self_similarity.csv", ["alpha", "dim", "t", "points", "max_rel_error", "tolerance", "pass"], ss_rows)
    checks["mass"] = all(r[-1] for r in mass_rows)
    checks["self_similarity"] = all(r[-1] for r in ss_rows)

    tg = np.geomspace(0.01, 10.0, 20)
    xg = np.geomspace(0.01, 10.0, 30)
    spec1 = _kernel_spec(cfg, dim=1)
    if kv["sharp_bound"]:
        rep = kmod.sharp_bound_ratio(spec1, tg, xg)
        out.csv("bound_ratio.csv", ["t", "x", "value", "bound", "ratio"], rep.rows(), rep.summary())
        checks["sharp_bound"] = bool(np.all(np.isfinite(rep.ratio)) and rep.min_ratio > 0
                                     and rep.spread < tol["ratio_spread"])
    if kv["derivative"]:
        if alpha < 1.0:
            rep = kmod.derivative_envelope_ratio(spec1, tg, xg)
            out.csv("derivative_envelope.csv", ["t", "x", "value", "bound", "ratio"], rep.rows(), rep.summary())
            checks["derivative_envelope"] = bool(np.all(np.isfinite(rep.ratio)) and rep.min_ratio > 0)
        at0 = kmod.deriv_kernel(spec1, 1, 1.0, 0.0)
        checks["derivative_origin"] = at0 == 0.0
    return checks


# --------------------------------------------------------------------------
# simulate


def _probe_index(grid: GridSpec, xs) -> list:
    return [int(np.argmin(np.abs(grid.x - x))) for x in xs]


def run_simulate(cfg: RunConfig, out: OutputDir) -> dict:
    sc = _solve_config(cfg)
    grid = sc.grid
    probes = _probe_index(grid, cfg["simulate"]["probe_x"])
    times = grid.t[sc.stored_steps]
    n = cfg.replicates
    extra = {"warnings": sc.warnings, "admissibility": sc.admissibility}
    if n == 0:
        return {"_manifest": extra}

    def reducer(block):
        sel = block[:, :, probes]
        return sel.sum(0), (sel**2).sum(0), (sel**4).sum(0), block[:, -1, :][:, probes].copy()

    parts = run_ensemble(sc, n, threads=cfg.threads, reducer=reducer)
    s1 = sum((p[0] for p in parts[1:]), parts[0][0].copy())
    s2 = sum((p[1] for p in parts[1:]), parts[0][1].copy())
    s4 = sum((p[2] for p in parts[1:]), parts[0][2].copy())
    final = np.concatenate([p[3] for p in parts], axis=0)
    mean, m2, m4 = s1 / n, s2 / n, s4 / n
    var = m2 - mean**2
    family = cfg["forcing"]["family"]
    rows = []
    for i, t in enumerate(times):
        step = int(sc.stored_steps[i])
        if sc.noise.kind == "spacetime_white" and family == "constant":
            c = sc.forcing.resolved()[0]
            exact_all = [c * c * stwn_variance_exact(sc.kernel, grid, step)] * len(probes)
        elif sc.noise.kind == "single_bm":
            ev = bm_variance_exact(sc, step) if step > 0 else np.zeros(grid.nx)
            exact_all = [float(ev[j]) for j in probes]
        else:
            exact_all = [""] * len(probes)
        for c, j in enumerate(probes):
            rows.append([t, grid.x[j], mean[i, c], var[i, c], m4[i, c], exact_all[c]])
    out.csv("stats.csv", ["t", "x", "mean", "variance", "fourth_moment", "exact_variance"], rows,
            {"replicates": n})
    out.csv("final.csv", ["replicate", "x", "u"],
            ([r, grid.x[j], final[r, c]] for r in range(n) for c, j in enumerate(probes)))
    if cfg["simulate"]["write_fields"]:
        solver = solve_mild_bm if sc.noise.kind == "single_bm" else solve_mild_stwn
        for r in range(n):
            fs = solver(sc.for_replicate(r))
            rows = ([t, x, u] for t, row in zip(fs.times, fs.values) for x, u in zip(fs.x, row))
            out.csv(f"fields/replicate_{r:05d}.csv", ["t", "x", "u"], rows)
    return {"_manifest": extra}


# --------------------------------------------------------------------------
# estimate


def run_estimate(cfg: RunConfig, out: OutputDir) -> dict:
    sc = _solve_config(cfg)
    est = cfg["estimate"]
    U = run_ensemble(sc, cfg.replicates, threads=cfg.threads)
    times = sc.grid.t[sc.stored_steps]
    x = sc.grid.x
    p = est["moment"]
    beta = cfg["plan"]["beta"]
    margin = cfg["tolerances"]["slope_margin"]
    checks = {}
    n_t, nx = U.shape[1], U.shape[2]
    for cls in est["pair_classes"]:
        if cls == "space":
            pairs = space_pairs(n_t, nx, [int(v) for v in est["space_lags"]])
        elif cls == "time":
            pairs = time_pairs(n_t, nx, [int(v) for v in est["time_lags"]])
        else:
            lags = list(zip([int(v) for v in est["time_lags"]], [int(v) for v in est["space_lags"]]))
            pairs = mixed_pairs(n_t, nx, lags)
        inc = np.abs(U[:, pairs.it1, pairs.ix1] - U[:, pairs.it2, pairs.ix2])
        if float(inc.max(initial=0.0)) < 1e-10:
            out.json(f"fit_{cls}.json", {"pair_class": cls, "status": "saturated",
                                         "note": "increments vanish: the field is flat along these pairs"})
            checks[f"fit_{cls}"] = True
            continue
        fit = moment_increment_scan(U, p, pairs, times, x, min_replicates=est["min_replicates"], label=cls,
                                    period=sc.grid.domain_len)
        info = fit.summary()
        if beta is not None:
            info["required_slope"] = beta * p - margin
            ok = fit.slope >= beta * p - margin
        else:
            ok = not fit.degenerate
        info["pass"] = ok
        out.csv(f"fit_{cls}.csv", ["scale", "statistic", "fitted"], fit.rows(), {"fit": info})
        out.json(f"fit_{cls}.json", info)
        checks[f"fit_{cls}"] = ok
    return checks


# --------------------------------------------------------------------------
# seminorm


def _synthetic(kind: str, gamma: float, n: int):
    if kind in ("abs_power",):
        grid = GridSpec(1.0, n, 2.0, n, -1.0)
        return field_from_function(lambda t, x: np.abs(x) ** gamma + 0 * t, grid, kind)
    grid = GridSpec(1.0, n, 1.0, n, 0.0)
    funcs = {"linear_x": lambda t, x: x + 0 * t, "linear_t": lambda t, x: t + 0 * x,
             "constant": lambda t, x: 1.0 + 0 * (t + x)}
    return field_from_function(funcs[kind], grid, kind)


def run_seminorm(cfg: RunConfig, out: OutputDir) -> dict:
    s = cfg["seminorm"]
    gamma, p = s["gamma"], s["p"]
    theta = 1.0 + gamma * p / 3.0 if s["theta"] is None else s["theta"]
    rows, camp_vals, ratios = [], [], []
    last = None
    for level in range(s["refinements"]):
        n = s["n"] * 2**level
        if s["field"] == "simulated":
            sc = _solve_config(cfg, store_every=1, store_start=0)
            solver = solve_mild_bm if sc.noise.kind == "single_bm" else solve_mild_stwn
            sample = solver(sc)
            if level:
                break
        else:
            sample = _synthetic(s["field"], gamma, n)
        dom = DomainSpec.from_field(sample)
        camp = campanato_seminorm(sample, dom, p, theta)
        hold = holder_seminorm(sample, dom, min(gamma, 1.0))
        ratio = camp.value / hold.value if hold.value > 0 else float("nan")
        rows.append([sample.shape[1], camp.value, hold.value, ratio])
        camp_vals.append(camp.value)
        ratios.append(ratio)
        last = (camp, hold)
    out.csv("seminorm.csv", ["nx", "campanato", "holder", "ratio"], rows, {"p": p, "theta": theta, "gamma": gamma})
    camp, hold = last
    out.csv("campanato_cylinders.csv", ["t", "x", "radius", "volume", "mean", "value"], camp.contributions)
    checks = {}
    summary = {"campanato": camp.summary(), "holder": hold.summary(), "theta": theta}
    if len(camp_vals) > 1:
        summary["diverges"] = diverges(camp_vals)
        checks["refinement_stable"] = not summary["diverges"]
    if s["field"] == "abs_power":
        checks["ratio_within_10"] = all(0.1 <= r <= 10.0 for r in ratios)
    if s["field"] == "constant":
        checks["constant_zero"] = camp.value == 0.0 and hold.value == 0.0
    out.json("seminorm.json", summary)
    return checks


# --------------------------------------------------------------------------
# plan


def run_plan(cfg: RunConfig, out: OutputDir) -> dict:
    pl = cfg["plan"]
    kind = cfg["noise"]["kind"]
    d = cfg["kernel"]["dim"]
    rows = plan_table(pl["alphas"], pl["ps"], d, kind, pl["beta"])
    out.csv("plan_table.csv", ["alpha", "p", "beta_max", "beta", "theta", "beta_star"], rows, {"kind": kind, "d": d})
    if pl["beta"] is None:
        return {}
    gap = pl["delta_gap"] if pl["delta_gap"] is not None else pl["beta"] * pl["p"] / 4.0
    try:
        plan = make_plan(pl["p"], cfg["kernel"]["alpha"], d, kind, pl["beta"], gap)
    except PlanError as exc:
        out.json("plan.json", {"valid": False, "violations": exc.violations})
        return {"plan_admissible": False}
    out.json("plan.json", {"valid": True, **plan.to_dict()})
    return {"plan_admissible": True}


# --------------------------------------------------------------------------
# chaining


def run_chaining(cfg: RunConfig, out: OutputDir) -> dict:
    ch = cfg["chaining"]
    sc = _solve_config(cfg)
    grid = sc.grid
    n_pts = 2 ** ch["level"] + 1
    if n_pts > grid.nx:
        raise ConfigError("2^level + 1 lattice points exceed grid.nx", "chaining", "level")
    j0 = int(np.argmin(np.abs(grid.x - ch["x_start"])))
    idx = (j0 + np.arange(n_pts)) % grid.nx
    length = (n_pts - 1) * grid.dx
    U = run_ensemble(sc, ch["paths"], threads=cfg.threads)
    times = grid.t[sc.stored_steps]
    rows = []
    worst = 0.0
    for r in range(U.shape[0]):
        rep = chaining_bound(U[r][:, idx], ch["alpha_exp"], length=length)
        worst = max(worst, rep.max_ratio)
        for t, l, rr, rg, ok in zip(times, rep.lhs, rep.rhs, rep.rhs_rigorous, rep.passed):
            rows.append([r, t, l, rr, rg, bool(ok)])
    out.csv("chaining.csv", ["path", "t", "lhs", "rhs", "rhs_rigorous", "pass"], rows,
            {"alpha_exp": ch["alpha_exp"], "level": ch["level"]})
    out.json("chaining.json", {"paths": int(U.shape[0]), "times": int(times.size),
                               "failures": sum(1 for r in rows if not r[-1]), "max_lhs_over_rhs": worst})
    return {"chaining": all(r[-1] for r in rows)}


# --------------------------------------------------------------------------
# report


def run_report(cfg: RunConfig, out: OutputDir) -> dict:
    from .plotting import render_all

    src = Path(cfg["report"]["input"] or cfg.out)
    if not src.is_dir():
        raise ConfigError(f"report input directory {src} does not exist", "report", "input")
    figs = render_all(src, Path(cfg.out) / "figures", stamp=f"config_hash={out.hash}")
    out.json("report.json", {"figures": [str(f.relative_to(cfg.out)) for f in figs], "input": str(src)})
    return {"figures_rendered": True}


RUNNERS = {
    "kernel-verify": run_kernel_verify,
    "simulate": run_simulate,
    "estimate": run_estimate,
    "seminorm": run_seminorm,
    "plan": run_plan,
    "chaining": run_chaining,
    "report": run_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracspde", description="Stochastic fractional heat equation laboratory.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("config_path", nargs="?", help="INI configuration file (same as --config)")
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--seed", help="unsigned 64-bit master seed")
    ap.add_argument("--replicates", help="number of Monte Carlo replicates")
    ap.add_argument("--threads", help="worker threads for replicate-level parallelism")
    ap.add_argument("--out", help="output directory")
    return ap


def _emit_error(kind: str, message: str, subcommand: str, extra=None):
    body = {"error": kind, "subcommand": subcommand, "message": message}
    body.update(extra or {})
    print(json.dumps(body, sort_keys=True), file=sys.stderr)


def main(argv=None, env=None) -> int:
    ap = build_parser()
    args = ap.parse_intermixed_args(argv)
    if args.config_path and args.config and args.config_path != args.config:
        ap.error("config path given twice with different values")
    args.config = args.config or args.config_path
    flags = {("run", "seed"): args.seed, ("run", "replicates"): args.replicates,
             ("run", "threads"): args.threads, ("run", "out"): args.out}
    try:
        cfg = load_config(args.subcommand, args.config, env, flags)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), args.subcommand, {"line": exc.line, "section": exc.section,
                                                                "key": exc.key})
        return EXIT_CONFIG

    digest = config_hash(cfg.hashable())
    out = OutputDir(cfg.out, digest, args.subcommand)
    started = time.perf_counter()
    try:
        checks = RUNNERS[args.subcommand](cfg, out)
    except kmod.AlphaRestrictionError as exc:
        _emit_error("AlphaRestrictionError", str(exc), args.subcommand, {"restriction": "alpha < 1"})
        return EXIT_CONFIG
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), args.subcommand, {"section": exc.section, "key": exc.key})
        return EXIT_CONFIG
    except (ValueError, kmod.QuadratureError) as exc:
        _emit_error(type(exc).__name__, f"{args.subcommand}: {exc}", args.subcommand)
        return EXIT_CONFIG
    manifest_extra = checks.pop("_manifest", {})
    ok = all(bool(v) for v in checks.values())
    out.manifest({
        "subcommand": args.subcommand,
        "config_hash": digest,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "checks": checks,
        "status": "pass" if ok else "fail",
        **manifest_extra,
    })
    with open(Path(cfg.out) / "timing.json", "w") as fh:
        json.dump({"config_hash": digest, "wall_seconds": time.perf_counter() - started, "threads": cfg.threads,
                   "versions": versions()}, fh, indent=2)
    for name, val in checks.items():
        print(f"{name}: {'pass' if val else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
