"""Single batch entry point: every module as a subcommand, JSON configs in,
CSV/JSON artifacts plus a run manifest out.

Exit codes: 0 success, 2 input error, 3 numerical non-convergence.
LAUGHLIN_LAB_SEED overrides the config seed; paths are relative to --out-dir.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import bathtub, config as cfgmod, ed, minimizer, sampler, screening
from .grid import Grid
from .manifest import RunManifest
from .model import PlasmaParams, QuasiHoleSet, SuperharmonicPotential
from .sampler import ProposalDiagnosticsError
from .screening import EnlargeGridError, ToppleConvergenceError

INPUT_ERRORS = (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError,
                NotADirectoryError, bathtub.InsufficientCapacityError)
NUMERIC_ERRORS = (ed.NonConvergenceError, ToppleConvergenceError,
                  ProposalDiagnosticsError, EnlargeGridError)


def _load_config(path):
    cfg = cfgmod.load_config(path)
    if isinstance(cfg, dict) and "subcommand" in cfg and "config" in cfg:
        cfg = cfg["config"]  # accept a manifest: rerun what it recorded
    return cfg


def _seed_override(cfg_seed):
    env = os.environ.get("LAUGHLIN_LAB_SEED")
    return int(env) if env else cfg_seed


def _outpath(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_field_csv(path, grid, values, column):
    xs = grid.x_centers()
    ys = grid.y_centers()
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", column])
        for iy in range(grid.ny):
            for ix in range(grid.nx):
                w.writerow([f"{xs[ix]:.8g}", f"{ys[iy]:.8g}", f"{values[iy, ix]:.10g}"])


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _finish(args, name, cfg, seed, outputs, manifest):
    mpath = _outpath(args, f"{name}_manifest.json")
    manifest.finish(outputs).write(mpath)
    print(f"{name}: wrote {', '.join(os.path.basename(o) for o in outputs)} "
          f"(+ manifest) in {manifest.wall_time_s:.1f}s")
    return 0


# ---------------------------------------------------------------- sampling


def _sampled_density(cfg, seed, threads):
    params = cfgmod.params_from(cfg)
    corr = cfgmod.correlation_from(cfg)
    chain = cfgmod.chain_from(cfg, seed_override=seed)
    grid = cfgmod.grid_from(cfg, params)
    result, density = sampler.run_chains(params, corr, chain, density_grid=grid,
                                         threads=threads, collect_samples=False)
    return params, chain, result, density


def cmd_sample_density(args):
    cfg = _load_config(args.config)
    seed = _seed_override(cfgmod.chain_from(cfg).seed)
    manifest = RunManifest.start("sample-density", cfg, cfgmod.config_hash(cfg), seed)
    params, chain, result, density = _sampled_density(cfg, seed, args.threads)
    out_csv = _outpath(args, args.out)
    _write_field_csv(out_csv, density.grid, density.values, "rho")
    report = {
        "cap": params.cap_density,
        "acceptance_rates": result.per_chain_acceptance,
        "seeds": [chain.seed],
        "chains": chain.chains,
        "mass_on_grid": density.integral(),
    }
    out_json = _outpath(args, args.report)
    _write_json(out_json, report)
    return _finish(args, "sample-density", cfg, seed, [out_csv, out_json], manifest)


def cmd_incompressibility(args):
    cfg = _load_config(args.config)
    seed = _seed_override(cfgmod.chain_from(cfg).seed)
    manifest = RunManifest.start("incompressibility", cfg, cfgmod.config_hash(cfg), seed)
    params, chain, result, density = _sampled_density(cfg, seed, args.threads)
    rep = sampler.incompressibility_check(density, params, args.coarse_radius)
    report = {
        "cap": rep.cap,
        "coarse_radius": rep.coarse_radius,
        "max_coarse_density": rep.max_coarse_density,
        "excess_ratio": rep.excess_ratio,
        "max_locations": rep.max_locations.tolist(),
        "acceptance_rates": result.per_chain_acceptance,
        "seeds": [chain.seed],
    }
    out_json = _outpath(args, args.report)
    _write_json(out_json, report)
    return _finish(args, "incompressibility", cfg, seed, [out_json], manifest)


def cmd_quasihole(args):
    cfg = _load_config(args.config)
    holes = cfgmod.holes_from(cfg)
    if holes.positions.shape[0] == 0:
        raise ValueError("quasihole needs a nonempty quasi_holes list in the config")
    seed = _seed_override(cfgmod.chain_from(cfg).seed)
    manifest = RunManifest.start("quasihole", cfg, cfgmod.config_hash(cfg), seed)
    params, chain, result, density = _sampled_density(cfg, seed, args.threads)
    base_cfg = dict(cfg, quasi_holes=[])
    _, _, base_result, baseline = _sampled_density(base_cfg, seed, args.threads)
    deficits = []
    for pos, mult in zip(holes.positions, holes.multiplicities):
        probe = args.probe_radius or 2.5 * math.sqrt(
            2.0 * (mult + 1.0) / params.B)
        deficits.append({
            "hole": [float(pos[0]), float(pos[1]), int(mult)],
            "probe_radius": probe,
            "deficit": sampler.quasihole_deficit(density, baseline, pos, probe),
            "expected": mult / params.ell,
        })
    report = {
        "cap": params.cap_density,
        "deficits": deficits,
        "acceptance_rates": result.per_chain_acceptance + base_result.per_chain_acceptance,
        "seeds": [chain.seed],
    }
    out_json = _outpath(args, args.report)
    _write_json(out_json, report)
    return _finish(args, "quasihole", cfg, seed, [out_json], manifest)


# ---------------------------------------------------------------- minimizer


def _parse_qh(values):
    holes = []
    for item in values or []:
        parts = [float(t) for t in item.split(",")]
        if len(parts) != 3:
            raise ValueError(f"--qh wants 'x,y,m', got {item!r}")
        holes.append((parts[0], parts[1], int(parts[2])))
    return holes


def cmd_minimize(args):
    holes = _parse_qh(args.qh)
    cfg = {"n": args.n, "quasi_holes": holes, "seed": args.seed,
           "restarts": args.restarts, "gradient_tol": args.gradient_tol}
    seed = _seed_override(args.seed)
    manifest = RunManifest.start("minimize", cfg, cfgmod.config_hash(cfg), seed)
    w_pot = (SuperharmonicPotential.from_quasi_holes(holes) if holes
             else SuperharmonicPotential.zero())
    opts = minimizer.MinimizeOptions(restarts=args.restarts, seed=seed,
                                     gradient_tol=args.gradient_tol)
    res = minimizer.minimize(args.n, w_pot, opts)
    out_cfg = _outpath(args, args.out)
    _write_json(out_cfg, [[float(x), float(y)] for x, y in res.points])
    report = {"energy": res.energy, "grad_sup_norm": res.grad_sup_norm,
              "converged": res.converged, "iterations": res.iterations,
              "restart_energies": res.restart_energies}
    out_rep = _outpath(args, args.report)
    _write_json(out_rep, report)
    code = _finish(args, "minimize", cfg, seed, [out_cfg, out_rep], manifest)
    if not res.converged:
        print("warning: gradient tolerance not met; best-found returned", file=sys.stderr)
        return 3
    return code


def cmd_audit(args):
    with open(args.points) as f:
        pts = json.load(f)
    cfg = {"points_file": args.points, "h": args.h, "seed": args.seed}
    seed = _seed_override(args.seed)
    manifest = RunManifest.start("audit", cfg, cfgmod.config_hash(cfg), seed)
    pts = np.asarray(pts, dtype=float)
    rep = minimizer.audit_exclusion(pts, h=args.h, seed=seed)
    counts = minimizer.count_in_disks(
        pts, np.vstack([[0.0, 0.0], pts[:: max(1, len(pts) // 5)][:5]]),
        [2.0, 3.0, 4.0])
    report = {
        "n_subsets": rep.n_subsets,
        "violations": [
            {"subset_id": v.subset_id, "point_index": v.point_index,
             "depth_cells": v.depth_cells} for v in rep.violations],
        "inconclusive": len(rep.inconclusive),
        "counts": [{"center": e[0], "radius": e[1], "count": e[2],
                    "pi_r2": e[3], "excess": e[4]} for e in counts.entries],
    }
    out_rep = _outpath(args, args.report)
    _write_json(out_rep, report)
    return _finish(args, "audit", cfg, seed, [out_rep], manifest)


# ---------------------------------------------------------------- screening


def _rle(flat):
    runs = []
    i = 0
    n = len(flat)
    while i < n:
        j = i
        while j < n and flat[j] == flat[i]:
            j += 1
        runs.append([float(flat[i]), j - i])
        i = j
    return runs


def cmd_screening(args):
    with open(args.points) as f:
        pts = json.load(f)
    cfg = {"points_file": args.points, "h": args.h}
    manifest = RunManifest.start("screening", cfg, cfgmod.config_hash(cfg), 0)
    region = screening.screening_region(np.asarray(pts, dtype=float), h=args.h)
    g = region.grid
    out = {
        "origin": list(g.origin), "h": g.h, "nx": g.nx, "ny": g.ny,
        "area": region.area, "k": region.k,
        "sources": [[float(x), float(y)] for x, y in region.sources],
        "occupancy_rle": _rle(np.round(region.occupancy, 12).ravel()),
        "sweeps": region.sweeps,
    }
    out_json = _outpath(args, args.out)
    _write_json(out_json, out)
    outputs = [out_json]
    if args.phi_csv:
        field = screening.potential_field(region)
        phi_path = _outpath(args, args.phi_csv)
        _write_field_csv(phi_path, g, field.values, "phi")
        outputs.append(phi_path)
    code = _finish(args, "screening", cfg, 0, outputs, manifest)
    print(f"region area {region.area:.4f} for k={region.k}")
    return code


# ---------------------------------------------------------------- bathtub


def cmd_bathtub(args):
    cfg = {"v": args.v, "v_params": json.loads(args.v_params),
           "w": args.w, "w_params": json.loads(args.w_params),
           "lambda": args.lam, "n": args.n, "ell": args.ell, "B": args.B,
           "grid_cells": args.grid_cells, "cover": args.cover}
    manifest = RunManifest.start(args.command, cfg, cfgmod.config_hash(cfg), 0)
    params = PlasmaParams(B=args.B, ell=args.ell, N=args.n)
    from .model import PotentialSpec, scaled_potentials
    spec = PotentialSpec(v=cfgmod.make_potential(args.v, cfg["v_params"]),
                         w=cfgmod.make_potential(args.w, cfg["w_params"]),
                         lam=args.lam)
    grid = bathtub.default_harness_grid(params, cells=args.grid_cells,
                                        cover=args.cover)
    V, W = scaled_potentials(spec, params.N)
    xs, ys = grid.center_mesh()
    v_vals = V(np.dstack([xs, ys])).reshape(grid.ny, grid.nx)
    wtab = bathtub.kernel_table(W, grid) if args.lam != 0.0 else None
    res = bathtub.flocking_solve(v_vals, grid, params.cap_density, params.N,
                                 lam=args.lam, wtab=wtab)
    out_json = _outpath(args, args.out)
    _write_json(out_json, {
        "energy": res.energy, "multiplier": res.multiplier,
        "iterations": res.iterations, "converged": res.converged,
        "lambda": args.lam, "cap": params.cap_density, "mass": params.N,
    })
    prof_path = _outpath(args, args.profile)
    _write_field_csv(prof_path, grid, res.profile.values, "rho")
    code = _finish(args, args.command, cfg, 0, [out_json, prof_path], manifest)
    if not res.converged:
        print("warning: duality gap tolerance not reached", file=sys.stderr)
        return 3
    return code


def cmd_theorem2(args):
    cfg = _load_config(args.config)
    seed = _seed_override(cfgmod.chain_from(cfg).seed)
    manifest = RunManifest.start("theorem2", cfg, cfgmod.config_hash(cfg), seed)
    params = cfgmod.params_from(cfg)
    spec = cfgmod.potential_spec_from(cfg)
    mc = cfgmod.chain_from(cfg, seed_override=seed)
    lambdas = cfg.get("lambdas", [cfg.get("lambda", 0.0)])
    families = [tuple(f) for f in cfg.get("hole_families", [[], [1], [2]])]
    rep = bathtub.theorem2_harness(params, spec, mc, lambdas=lambdas,
                                   hole_families=families,
                                   nm_maxfev=int(cfg.get("nm_maxfev", 40)),
                                   threads=args.threads)
    out = {
        "note": rep.note,
        "mc_steps": rep.mc_steps,
        "entries": [{
            "lambda": e.lam, "e_flo": e.e_flo, "e_est": e.e_est,
            "stderr": e.stderr, "ratio": e.ratio, "best_holes": e.best_holes,
            "family_energies": {str(list(k)): v for k, v in e.family_energies.items()},
        } for e in rep.entries],
    }
    out_json = _outpath(args, args.report)
    _write_json(out_json, out)
    return _finish(args, "theorem2", cfg, seed, [out_json], manifest)


# ---------------------------------------------------------------- ed


def cmd_gap(args):
    cfg = {"n": args.n, "ell": args.ell, "k": args.k,
           "l_max_factor": args.l_max_factor}
    manifest = RunManifest.start("gap", cfg, cfgmod.config_hash(cfg), 0)
    rep = ed.spectral_gap(args.n, args.ell, k=args.k,
                          l_max_factor=args.l_max_factor)
    out_csv = _outpath(args, args.out)
    with open(out_csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["N", "ell", "L", "dim", "zero_modes", "lowest_nonzero"])
        for r in rep.rows:
            w.writerow([r.N, r.ell, r.L, r.dim, r.zero_modes,
                        "" if math.isnan(r.lowest_nonzero) else f"{r.lowest_nonzero:.12g}"])
    out_json = _outpath(args, args.summary)
    _write_json(out_json, {"N": args.n, "ell": args.ell, "sigma": rep.sigma,
                           "laughlin_momentum": rep.laughlin_momentum})
    code = _finish(args, "gap", cfg, 0, [out_csv, out_json], manifest)
    print(f"sigma({args.n},{args.ell}) = {rep.sigma:.8f}")
    return code


def cmd_delta_check(args):
    cfg = {"n": args.n, "trials": args.trials, "seed": args.seed}
    seed = _seed_override(args.seed)
    manifest = RunManifest.start("delta-check", cfg, cfgmod.config_hash(cfg), seed)
    rng = np.random.default_rng(seed)
    worst = 0.0
    sectors = []
    for L in (args.n * (args.n - 1), args.n * (args.n - 1) + 2, 2 * args.n):
        sector = ed.MomentumSector(args.n, L, "bosonic")
        op = ed.build_hamiltonian(sector, 0)
        h = op.matrix
        for _ in range(args.trials):
            v = rng.standard_normal(op.dimension)
            err = np.max(np.abs(ed.delta_action(sector, v)
                                - ed.PROJECTOR_TO_DELTA * (h @ v)))
            scale = max(1.0, float(np.max(np.abs(v))))
            worst = max(worst, err / scale)
        sectors.append({"L": L, "dim": op.dimension})
    out_json = _outpath(args, args.report)
    _write_json(out_json, {"max_relative_error": worst, "sectors": sectors,
                           "projector_to_delta": ed.PROJECTOR_TO_DELTA,
                           "pass": bool(worst < 1e-10)})
    code = _finish(args, "delta-check", cfg, seed, [out_json], manifest)
    print(f"delta-check: max error {worst:.3e} ({'pass' if worst < 1e-10 else 'FAIL'})")
    return 0 if worst < 1e-10 else 3


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="laughlin-lab",
                                description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default=".", help="directory for all outputs")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="concurrency budget for chains and grids")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-density", help="MC one-body density estimate")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="density.csv")
    s.add_argument("--report", default="density_report.json")
    s.set_defaults(func=cmd_sample_density)

    s = sub.add_parser("incompressibility", help="coarse-grained density vs cap")
    s.add_argument("--config", required=True)
    s.add_argument("--coarse-radius", type=float, default=None)
    s.add_argument("--report", default="incompressibility.json")
    s.set_defaults(func=cmd_incompressibility)

    s = sub.add_parser("quasihole", help="integrated charge deficit around holes")
    s.add_argument("--config", required=True)
    s.add_argument("--probe-radius", type=float, default=None)
    s.add_argument("--report", default="quasihole.json")
    s.set_defaults(func=cmd_quasihole)

    s = sub.add_parser("minimize", help="local minimizer of the cleaned energy")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--qh", action="append", help="quasi-hole 'x,y,m' (repeatable)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=3)
    s.add_argument("--gradient-tol", type=float, default=1e-7)
    s.add_argument("--out", default="config.json")
    s.add_argument("--report", default="minimize_report.json")
    s.set_defaults(func=cmd_minimize)

    s = sub.add_parser("audit", help="exclusion-rule audit of a configuration")
    s.add_argument("--points", required=True, help="JSON list of [x, y]")
    s.add_argument("--h", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", default="audit.json")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("screening", help="screening region of a point set")
    s.add_argument("--points", required=True, help="JSON list of [x, y]")
    s.add_argument("--h", type=float, default=0.02)
    s.add_argument("--out", default="region.json")
    s.add_argument("--phi-csv", default=None)
    s.set_defaults(func=cmd_screening)

    for name in ("bathtub", "flocking"):
        s = sub.add_parser(name, help="capped-density energy minimization")
        s.add_argument("--v", default="quadratic")
        s.add_argument("--v-params", default="{}")
        s.add_argument("--w", default="gaussian")
        s.add_argument("--w-params", default="{}")
        s.add_argument("--lambda", dest="lam", type=float, default=0.0)
        s.add_argument("--n", type=int, required=True)
        s.add_argument("--ell", type=int, required=True)
        s.add_argument("--B", type=float, default=1.0)
        s.add_argument("--grid-cells", type=int, default=256)
        s.add_argument("--cover", type=float, default=1.25)
        s.add_argument("--out", default="flo.json")
        s.add_argument("--profile", default="flo_profile.csv")
        s.set_defaults(func=cmd_bathtub)

    s = sub.add_parser("theorem2", help="capped energy vs quasi-hole trial states")
    s.add_argument("--config", required=True)
    s.add_argument("--report", default="theorem2.json")
    s.set_defaults(func=cmd_theorem2)

    s = sub.add_parser("gap", help="pseudo-potential spectral gap table")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--ell", type=int, required=True)
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--l-max-factor", type=float, default=1.0)
    s.add_argument("--out", default="gaps.csv")
    s.add_argument("--summary", default="gap_summary.json")
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("delta-check", help="zero-range model vs m=0 projector sum")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", default="delta_check.json")
    s.set_defaults(func=cmd_delta_check)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"error (numerical): {exc}", file=sys.stderr)
        return 3
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
