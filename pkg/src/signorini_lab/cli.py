"""Command-line entry point: ``signorini-lab <command> --config PATH --out DIR``."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import free_boundary as fb
from .blowups import BlowupProfile, direction_from_angle
from .epiperimetric import (DEFAULT_SWEEP, base_for, make_datum, mode_from_json,
                            perturbation_sweep, write_sweep_csv)
from .fields import ScalarField, constant, load_field, make_grid, save_field
from .harmonic import Poly2m
from .monotonicity import (check_identities, frequency_limit, is_nondecreasing,
                           nondegeneracy_constant, radial_profile, weiss_decay_fit)
from .solver import SignoriniProblem, optimal_omega, solve
from .validation import _jsonable, run_validation

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2

USAGE = """usage: \
signorini-lab COMMAND [--config PATH] [--out DIR] [--seed N] [--jobs N]
                             [--resolution N] [--tol X] [--quick]

commands:
  solve       boundary datum -> solution field and solver report
  profile     field -> radial profile CSV (r,H,D,N,W) and fits
  epi         sweep spec -> epiperimetric table (CSV and JSON)
  fb          field -> free-boundary chart (JSON and CSV)
  identities  field -> residuals of the H', D' and D identities
  validate    run the acceptance suite and print the pass/fail matrix

config (JSON):
  grid     {"dim": 2, "resolution": 257, "radius": 1.0}
  datum    {"family": "3/2", "angle": 0.0, "amplitude": 1.0, "modes": [...]}
           {"family": "2m", "m": 1, "coefficients": [...], "modes": [...]}
           {"family": "constant", "value": 1.0}
  field    path of a saved field (instead of grid + datum)
  solver   {"tol": 1e-10, "omega": null, "max_iters": null, "red_black": false}
  center   [0.0, 0.0]      radii  [..] or {"start": a, "stop": b, "count": k}
  sweep    sweep spec, or "default"
"""


class ConfigError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signorini-lab", usage=USAGE[len("usage: "):], add_help=True)
    p.add_argument("command", nargs="?", choices=["solve", "profile", "epi", "fb", "identities", "validate"])
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resolution", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--quick", action="store_true")
    return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required for this command")
    text = Path(path).read_text()
    if not text.strip():
        raise ConfigError(f"config {path} is empty")
    cfg = json.loads(text)
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError(f"config {path} must be a nonempty JSON object")
    return cfg


# -- building blocks --------------------------------------------------------------

def build_grid(cfg: dict, args):
    g = dict(cfg.get("grid", {}))
    if args.resolution is not None:
        g["resolution"] = args.resolution
    if "dim" not in g or "resolution" not in g:
        raise ConfigError("grid needs dim and resolution")
    return make_grid(int(g["dim"]), int(g["resolution"]), float(g.get("radius", 1.0)))


def build_datum(spec: dict, grid) -> ScalarField:
    fam = spec.get("family")
    modes = [mode_from_json(m) for m in spec.get("modes", [])]
    if fam == "3/2":
        e = direction_from_angle(float(spec.get("angle", 0.0)), grid.dim)
        base = BlowupProfile(float(spec.get("amplitude", 1.0)), tuple(e))
        return make_datum(base, modes, grid).field
    if fam == "2m":
        m = int(spec.get("m", 1))
        base = (Poly2m(grid.dim, m, tuple(spec["coefficients"])) if "coefficients" in spec
                else base_for("2m", grid.dim, m))
        return make_datum(base, modes, grid).field
    if fam == "constant":
        return constant(grid, float(spec.get("value", 1.0)))
    raise ConfigError(f"unknown datum family {fam!r}")


def _solver_opts(cfg: dict, args, res: int) -> dict:
    s = dict(cfg.get("solver", {}))
    tol = args.tol if args.tol is not None else float(s.get("tol", 1e-10))
    omega = s.get("omega")
    return {"tol": tol, "omega": optimal_omega(res) if omega is None else float(omega),
            "max_iters": s.get("max_iters"), "red_black": bool(s.get("red_black", False))}


def obtain_solution(cfg: dict, args):
    """A solved field: from ``field`` (taken as given) or by solving ``grid`` + ``datum``."""
    if "field" in cfg:
        return load_field(cfg["field"]), None
    if "datum" not in cfg:
        raise ConfigError("config needs a datum (with grid) or a field path")
    grid = build_grid(cfg, args)
    w = build_datum(cfg["datum"], grid)
    sol = solve(SignoriniProblem(grid, w), **_solver_opts(cfg, args, grid.resolution))
    return sol.field, sol


def build_radii(cfg: dict, u: ScalarField, x0):
    r = cfg.get("radii")
    if r is None:
        reach = 1.0 - float(np.linalg.norm(x0))
        return np.linspace(max(0.1, 4 * u.grid.spacing), 0.8 * reach, 20)
    if isinstance(r, dict):
        return np.linspace(float(r["start"]), float(r["stop"]), int(r["count"]))
    return np.asarray(r, dtype=float)


def _center(cfg: dict, u: ScalarField):
    x0 = np.asarray(cfg.get("center", [0.0] * u.grid.dim), dtype=float)
    if x0.shape != (u.grid.dim,):
        raise ConfigError("center has the wrong dimension")
    return x0


# -- commands -----------------------------------------------------------------

def cmd_solve(cfg, args) -> int:
    if "datum" not in cfg:
        raise ConfigError("solve needs grid and datum")
    grid = build_grid(cfg, args)
    w = build_datum(cfg["datum"], grid)
    sol = solve(SignoriniProblem(grid, w), **_solver_opts(cfg, args, grid.resolution))
    save_field(sol.field, args.out / "solution.field", {"converged": sol.converged})
    report = sol.report()
    report["datum"] = cfg["datum"]
    _write_json(args.out / "solve_report.json", report)
    if not sol.converged:
        print("warning: solver did not converge (flag recorded)", file=sys.stderr)
    return EXIT_OK


def cmd_profile(cfg, args) -> int:
    u, _ = obtain_solution(cfg, args)
    x0 = _center(cfg, u)
    prof = radial_profile(u, x0, build_radii(cfg, u, x0))
    prof.to_csv(args.out / "profile.csv")
    fit = weiss_decay_fit(prof)
    nd = nondegeneracy_constant(prof)
    fl = frequency_limit(u, x0)
    _write_json(args.out / "profile.json", {
        "center": x0, "N_nondecreasing": is_nondecreasing(prof.N),
        "W_nondecreasing": is_nondecreasing(prof.W),
        "decay_fit": {"C": fit.C, "gamma": fit.gamma, "points": fit.n_points, "cone_like": fit.cone_like},
        "nondegeneracy": {"H0": nd.H0, "monotone": nd.monotone, "degenerate": nd.degenerate},
        "frequency_limit": {"N0": fl.value, "model": fl.model, "monotone": fl.monotone}})
    return EXIT_OK


def cmd_identities(cfg, args) -> int:
    u, _ = obtain_solution(cfg, args)
    x0 = _center(cfg, u)
    rep = check_identities(u, x0, build_radii(cfg, u, x0))
    _write_json(args.out / "identities.json", {
        "center": x0, "radii": rep.radii, "max_residual": rep.max_residual,
        "H_prime": rep.H_prime, "D_prime": rep.D_prime, "D_surface": rep.D_surface})
    return EXIT_OK


def _override_resolution(spec, res):
    spec = copy.deepcopy(spec)
    if "blocks" in spec:
        spec["blocks"] = [_override_resolution(b, res) for b in spec["blocks"]]
    else:
        spec["resolutions"] = [res]
    return spec


def cmd_epi(cfg, args) -> int:
    spec = cfg.get("sweep")
    if spec is None:
        raise ConfigError("epi needs a sweep spec (or \"default\")")
    if spec == "default":
        spec = DEFAULT_SWEEP
    if args.resolution is not None:
        spec = _override_resolution(spec, args.resolution)
    tol = args.tol if args.tol is not None else 1e-10
    table = perturbation_sweep(spec, jobs=args.jobs, tol=tol, seed=args.seed)
    write_sweep_csv(args.out / "sweep.csv", table)
    _write_json(args.out / "sweep.json", {"spec": spec, "seed": args.seed, "rows": [
        {"row": r.row, "dim": r.dim, "resolution": r.resolution, "family": r.family, "m": r.m,
         "amplitude": r.amplitude, "modes": r.modes, "dist": r.dist, "rel_dist": r.rel_dist,
         "G_c": r.G_c, "G_v": r.G_v, "kappa_obs": r.kappa_obs, "flags": r.flags,
         "extras": r.extras} for r in table]})
    return EXIT_OK


def cmd_fb(cfg, args) -> int:
    u, sol = obtain_solution(cfg, args)
    chart = fb.build_chart(sol if sol is not None else u, max_points=int(cfg.get("max_points", 40)))
    _write_json(args.out / "chart.json", chart.to_dict())
    with open(args.out / "chart.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(u.grid.dim)] + ["N0", "regular", "skipped"])
        for t in chart.tags:
            w.writerow([f"{v:.17g}" for v in t.point] + [f"{t.frequency:.17g}", int(t.regular), int(t.skipped)])
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(args.out, seed=args.seed, jobs=args.jobs, quick=args.quick)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "profile": cmd_profile, "epi": cmd_epi, "fb": cmd_fb,
            "identities": cmd_identities}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command is None:
        print(USAGE, file=sys.stderr)
        return EXIT_ERROR
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "validate":
            return cmd_validate(args)
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, json.JSONDecodeError, KeyError, TypeError, ValueError, OSError) as exc:
        print(f"error: {exc}\n\n{USAGE}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
