"""Batch entry point: config parsing, experiment dispatch, artifact emission.

Exit codes: 0 success, 2 invalid configuration, 3 invalid gap certificate,
4 solver non-convergence.  Every run writes the fully resolved
configuration next to its outputs; CSV column schemas are emitted once per
output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_INVALID_CERTIFICATE = 3
EXIT_NO_CONVERGENCE = 4

_SCHEMA = {
    "sweep.csv": "q,alpha,kind,level,max_grad,energy — one row per sweep "
                 "cell and refinement level; max_grad is the interior "
                 "max|Du| over (-1/2,1/2)^n",
    "blowup.csv": "p,level,value,growth — cumulative integral of |Du_*|^p "
                  "down to the level's depth and its ratio to the previous "
                  "level",
    "approx.csv": "eps,feasibility_min,sup_norm,sup_bound,modular — one row "
                  "per smoothing radius",
    "solution.csv": "x1..xn,value — nodal values of the computed minimizer",
    "family.csv": "eps,delta,energy — regularized-family energies along the "
                  "schedule",
}


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc))
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _resolve(defaults: dict, file_cfg: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit CLI flags."""
    cfg = dict(defaults)
    for key, val in file_cfg.items():
        if key not in defaults:
            raise ConfigError("unknown config key %r" % key)
        cfg[key] = val
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _prepare_outdir(cfg: dict, subcommand: str) -> str:
    outdir = cfg["out"]
    os.makedirs(outdir, exist_ok=True)
    resolved = dict(cfg)
    resolved["subcommand"] = subcommand
    with open(os.path.join(outdir, "resolved_config.json"), "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
    schema_path = os.path.join(outdir, "schema.json")
    if not os.path.exists(schema_path):
        with open(schema_path, "w") as fh:
            json.dump(_SCHEMA, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return outdir


def _fractal_config(cfg: dict):
    from .fractal import CantorParams, CounterexampleConfig

    return CounterexampleConfig(
        cantor=CantorParams(cfg["n"], cfg["eps"], cfg["depth"]),
        alpha=cfg["alpha"], q=cfg["q"], kappa=cfg["kappa"])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gap(args) -> int:
    defaults = dict(n=2, alpha=0.5, q=1.8, eps=0.15, depth=10, kappa=0.5,
                    margin=0.1, cross_check=False, out="runs/gap", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "gap")
    from .experiments import lavrentiev_certificate, write_svg_lines

    config = _fractal_config(cfg)
    cert = lavrentiev_certificate(config, margin=cfg["margin"],
                                  cross_check=cfg["cross_check"])
    with open(os.path.join(outdir, "certificate.json"), "w") as fh:
        fh.write(cert.to_json() + "\n")
    write_svg_lines(
        os.path.join(outdir, "gap_bounds.svg"),
        {"I1_upper": ([0, 1], [cert.I1_upper] * 2),
         "m*sigma*/2": ([0, 1], [0.5 * cert.m_star * cert.sigma_star] * 2),
         "I_inf_lower": ([0, 1], [cert.I_inf_lower] * 2)},
        title="Lavrentiev gap bounds", ylabel="energy", logy=True)
    print("certificate %s  gap=%.6g  margin=%.3f"
          % ("VALID" if cert.valid else "INVALID", cert.gap, cert.margin))
    return EXIT_OK if cert.valid else EXIT_INVALID_CERTIFICATE


def _cmd_cantor(args) -> int:
    defaults = dict(n=2, eps=0.5, depth=8, out="runs/cantor", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "cantor")
    from .fractal import CantorParams, build_cantor

    params = CantorParams(cfg["n"], cfg["eps"], cfg["depth"])
    approx, measure = build_cantor(params)
    doc = {
        "n": cfg["n"], "eps": cfg["eps"], "depth": cfg["depth"],
        "lambda": params.lam,
        "dimension_target": params.dimension,
        "box_count_slope": approx.box_counting_slope(),
        "dyadic_box_count_slope": approx.dyadic_box_counting_slope(),
        "interval_count": len(approx.lefts),
        "total_length": float(len(approx.lefts) * params.interval_length(cfg["depth"])),
        "atom_count": len(measure.atoms),
        "total_mass": measure.total_mass,
    }
    with open(os.path.join(outdir, "cantor.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("lambda = %.6g  slope = %.4f (target %.4f)"
          % (params.lam, doc["box_count_slope"], params.dimension))
    return EXIT_OK


def _make_problem(cfg: dict):
    from .fractal import CounterexampleConfig, fractal_coefficient_a
    from .grid import Grid
    from .integrand import GrowthFunction, IntegrandSpec
    from .solver import ObstacleProblem

    if cfg["graded_levels"] > 0:
        grid = Grid.graded(cfg["grid"], levels=cfg["graded_levels"],
                           nodes_per_band=2)
    else:
        grid = Grid.uniform(cfg["grid"])
    spec = IntegrandSpec(GrowthFunction(cfg["growth"]), q=cfg["q"], s=cfg["s"])
    alpha = cfg["alpha"]
    if cfg["coefficient"] == "plane":
        coeff = lambda P: np.abs(P[..., -1]) ** alpha
    elif cfg["coefficient"] == "const":
        coeff = lambda P: np.ones(P.shape[:-1])
    elif cfg["coefficient"] == "fractal":
        fc = CounterexampleConfig(alpha=alpha, q=cfg["q"])
        coeff = lambda P: fractal_coefficient_a(
            fc, P.reshape(-1, 2)).reshape(P.shape[:-1])
    else:
        raise ConfigError("coefficient must be plane|const|fractal")
    scale = cfg["datum_scale"]
    if cfg["datum"] == "affine":
        u0 = grid.sample(lambda P: scale * (0.5 * P[..., 0] - 0.2 * P[..., -1]))
    elif cfg["datum"] == "product":
        u0 = grid.sample(lambda P: scale * P[..., 0] * P[..., -1])
    elif cfg["datum"] == "zero":
        u0 = grid.sample(lambda P: 0.0 * P[..., 0])
    else:
        raise ConfigError("datum must be affine|product|zero")
    psi = None
    if cfg["obstacle"] == "bump":
        psi = grid.sample(lambda P: cfg["obstacle_height"] * np.clip(
            1.0 - 2.0 * np.sqrt(np.sum(P * P, axis=-1)), 0.0, None))
    elif cfg["obstacle"] != "none":
        raise ConfigError("obstacle must be none|bump")
    return ObstacleProblem(grid, spec, coeff, u0, obstacle=psi)


def _cmd_solve(args) -> int:
    defaults = dict(grid=33, graded_levels=0, growth="log", q=1.5, s=1.0,
                    alpha=0.5, coefficient="plane", datum="affine",
                    datum_scale=1.0, obstacle="none", obstacle_height=0.3,
                    family=False, out="runs/solve", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "solve")
    from .solver import RegularizationSchedule, regularized_family, solve

    problem = _make_problem(cfg)
    schedule = RegularizationSchedule()
    u, report = solve(problem, schedule)
    with open(os.path.join(outdir, "solution.csv"), "w") as fh:
        fh.write(u.to_csv())
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        fh.write(report.to_json() + "\n")
    if cfg["family"]:
        rows = regularized_family(problem, schedule)
        from .experiments import write_csv

        write_csv(os.path.join(outdir, "family.csv"),
                  [{"eps": e, "delta": d, "energy": en} for e, d, en in rows])
    print("energy %.10g  iterations %d  converged %s"
          % (report.final_energy, report.iterations, report.converged))
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def _cmd_sweep(args) -> int:
    defaults = dict(n=2, alpha=0.5, q=1.8, eps=0.15, depth=10, kappa=0.5,
                    counts="33,65,129", out="runs/sweep", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "sweep")
    from .experiments import regularity_sweep, write_csv, write_svg_lines

    counts = tuple(int(c) for c in str(cfg["counts"]).split(","))
    report = regularity_sweep(counts=counts, config=_fractal_config(cfg))
    write_csv(os.path.join(outdir, "sweep.csv"), report.rows())
    curves = {"%s q=%.2f" % (c["kind"], c["q"]): (c["levels"], c["max_grad"])
              for c in report.cells}
    write_svg_lines(os.path.join(outdir, "max_grad.svg"), curves,
                    title="interior max|Du| under refinement",
                    xlabel="nodes per axis", ylabel="max|Du|", logy=True)
    for c in report.cells:
        print("%s cell (q=%g): max|Du| ratios %s"
              % (c["kind"], c["q"], ["%.3f" % r for r in c["ratios"]]))
    return EXIT_OK


def _cmd_blowup(args) -> int:
    defaults = dict(n=2, alpha=0.5, q=1.8, eps=0.15, depth=10, kappa=0.5,
                    levels=8, out="runs/blowup", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "blowup")
    from .experiments import sobolev_blowup_diagnostic, write_csv, write_svg_lines

    table = sobolev_blowup_diagnostic(_fractal_config(cfg),
                                      levels=cfg["levels"])
    rows, curves = [], {}
    for p, data in table["probes"].items():
        vals = data["values"]
        for lv, v in enumerate(vals):
            growth = "" if lv == 0 else data["growth_per_level"][lv - 1]
            rows.append({"p": p, "level": lv + 1, "value": v,
                         "growth": growth})
        curves["p=%.3f" % p] = (list(range(1, len(vals) + 1)), vals)
    write_csv(os.path.join(outdir, "blowup.csv"), rows)
    with open(os.path.join(outdir, "blowup.json"), "w") as fh:
        json.dump(table, fh, indent=2, default=float)
        fh.write("\n")
    write_svg_lines(os.path.join(outdir, "blowup.svg"), curves,
                    title="integral of |Du_*|^p by grading level",
                    xlabel="grading level", ylabel="integral", logy=True)
    for p, data in table["probes"].items():
        print("p=%.4f final growth/level %.4f"
              % (p, data["growth_per_level"][-1]))
    return EXIT_OK


def _cmd_approx(args) -> int:
    defaults = dict(grid=129, amplitude=0.3, eps_list="0.5,0.25,0.125,0.0625,0.03125",
                    out="runs/approx", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "approx")
    from .experiments import approximation_convergence, write_csv
    from .grid import Grid

    grid = Grid.uniform(cfg["grid"])
    amp = cfg["amplitude"]
    w = grid.sample(lambda P: amp * (np.cos(2 * P[..., 0])
                                     * np.sin(1.5 * P[..., 1]) + 0.2))
    psi = grid.sample(lambda P: 0.0 * P[..., 0] - 1.0)
    eps_list = [float(e) for e in str(cfg["eps_list"]).split(",")]
    rows = approximation_convergence(w, psi, eps_list)
    write_csv(os.path.join(outdir, "approx.csv"), rows)
    for r in rows:
        print("eps %.5f  modular %.3e  feas-min %.2e"
              % (r["eps"], r["modular"], r["feasibility_min"]))
    return EXIT_OK


def _cmd_check(args) -> int:
    defaults = dict(samples=2000, out="runs/check", seed=0)
    cfg = _resolve(defaults, _load_config(args.config), args)
    outdir = _prepare_outdir(cfg, "check")
    rng = np.random.default_rng(cfg["seed"])
    from .integrand import (GrowthFunction, IntegrandSpec, conjugate_H,
                            eval_H, eval_L, hessian_eigenvalues)

    failures = []
    m = cfg["samples"]
    for kind, level in (("log", 1), ("iterated-log", 2)):
        spec = IntegrandSpec(GrowthFunction(kind, level), q=1.8, s=0.5)
        z = rng.standard_normal((m, 2)) * np.exp(rng.uniform(-2, 4, (m, 1)))
        r = np.sqrt(np.sum(z * z, axis=-1))
        # growth sandwich
        L = eval_L(spec, z)
        gr = r * spec.growth.value(r)
        if not (np.all(L <= spec.Lambda * gr + spec.Lambda + 1e-12)
                and np.all(L >= gr / spec.Lambda - 1e-12)):
            failures.append("%s: growth sandwich" % kind)
        # ellipticity sandwich
        lo, hi = hessian_eigenvalues(spec, z)
        low_bound = 1.0 / (spec.Lambda * (1.0 + r * r) ** (spec.mu / 2.0))
        up_bound = spec.Lambda * (spec.growth.value(r) + 1.0) / np.sqrt(1.0 + r * r)
        if not (np.all(np.minimum(lo, hi) >= low_bound - 1e-12)
                and np.all(np.maximum(lo, hi) <= up_bound + 1e-12)):
            failures.append("%s: ellipticity sandwich" % kind)
        # Fenchel-Young on random pairs
        w = rng.standard_normal((64, 2))
        zz = rng.standard_normal((64, 2))
        for wi, zi in zip(w, zz):
            Hs = conjugate_H(spec, 1.0, wi)
            if eval_H(spec, 1.0, zi) + Hs < float(np.dot(wi, zi)) - 1e-8:
                failures.append("%s: Fenchel-Young" % kind)
                break
    from .fractal import CantorParams, build_cantor

    approx, _ = build_cantor(CantorParams(2, 0.5, 8))
    slope = approx.box_counting_slope()
    if abs(slope - 0.5) > 0.05:
        failures.append("cantor: box-count slope %.3f" % slope)
    doc = {"failures": failures, "samples": m, "seed": cfg["seed"]}
    with open(os.path.join(outdir, "check.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if failures:
        for f in failures:
            print("FAIL:", f, file=sys.stderr)
        return EXIT_BAD_CONFIG
    print("all invariants hold (%d samples per check)" % m)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dplab",
        description="numerical laboratory for double-phase variational "
                    "integrals at nearly linear growth")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed for sampled checks")

    p = sub.add_parser("gap", help="Lavrentiev gap duality certificate")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--cross-check", dest="cross_check", action="store_const",
                   const=True)

    p = sub.add_parser("cantor", help="build and report the Cantor construction")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--depth", type=int)

    p = sub.add_parser("solve", help="solve one obstacle/Dirichlet problem")
    common(p)
    p.add_argument("--grid", type=int)
    p.add_argument("--graded-levels", dest="graded_levels", type=int)
    p.add_argument("--growth", choices=["one", "log", "iterated-log"])
    p.add_argument("--q", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--coefficient", choices=["plane", "const", "fractal"])
    p.add_argument("--datum", choices=["affine", "product", "zero"])
    p.add_argument("--datum-scale", dest="datum_scale", type=float)
    p.add_argument("--obstacle", choices=["none", "bump"])
    p.add_argument("--obstacle-height", dest="obstacle_height", type=float)
    p.add_argument("--family", action="store_const", const=True,
                   help="also emit regularized-family energies")

    p = sub.add_parser("sweep", help="regularity refinement sweep")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--counts")

    p = sub.add_parser("blowup", help="Sobolev blow-up diagnostic")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--levels", type=int)

    p = sub.add_parser("approx", help="obstacle-compatible smoothing study")
    common(p)
    p.add_argument("--grid", type=int)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--eps-list", dest="eps_list")

    p = sub.add_parser("check", help="run the quick invariant battery")
    common(p)
    p.add_argument("--samples", type=int)
    return parser


_DISPATCH = {
    "gap": _cmd_gap,
    "cantor": _cmd_cantor,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "blowup": _cmd_blowup,
    "approx": _cmd_approx,
    "check": _cmd_check,
}


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _DISPATCH[args.subcommand](args)
    except (ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as exc:  # solver and quadrature failures
        from .solver import SolverDivergenceError

        if isinstance(exc, SolverDivergenceError):
            print("error: %s" % exc, file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        raise


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
