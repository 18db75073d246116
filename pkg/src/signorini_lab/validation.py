"""Acceptance checks: one function per criterion, each returning a pass flag and its numbers."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from . import free_boundary as fb
from .blowups import (BlowupProfile, direction_from_angle, eval_h, eval_grad_h, h_field,
                      normal_derivative_h)
from .epiperimetric import (DEFAULT_SWEEP, AngularMode, ConstantMode, HarmonicMode, make_datum,
                            orthogonality_check, perturbation_sweep, write_sweep_csv)
from .fields import ScalarField, make_grid
from .harmonic import basis_H2m_hat
from .monotonicity import (blowup_sequence, frequency_limit, is_nondecreasing,
                           nondegeneracy_constant, radial_profile, weiss_decay_fit,
                           weiss_decomposition)
from .quadrature import _radial_nodes, boundary_adjusted_energy, disk_integral, sphere_sampling
from .solver import SignoriniProblem, kkt_residuals, optimal_omega, solve

# regression floors pinned from the first run of the default sweep at 257^2
KAPPA_FLOOR_32 = 0.25
KAPPA_FLOOR_2M = 0.20

QUICK = (1, 2)
RUNTIME_BUDGET_S = {1: 60.0, 2: 120.0, 3: 600.0, 5: 900.0}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.title}"

    def to_dict(self) -> dict:
        # run time stays out of the files so that reruns are byte-identical
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "details": self.details}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- shared builders -----------------------------------------------------------

def _plain(u: ScalarField) -> ScalarField:
    """Same field without its homogeneity tag: forces ball quadrature."""
    return ScalarField(u.grid, u.values, None, u.sampler, u.order)


def smooth_probe_functions(dim: int) -> list[tuple[str, Callable]]:
    """Five smooth functions with gradients, for the integration-by-parts checks."""

    def const(p):
        return np.ones(len(p)), np.zeros_like(p)

    def affine(p):
        a = np.zeros(dim)
        a[0], a[-1] = 1.0, 0.5
        return p @ a + 0.25, np.broadcast_to(a, p.shape).copy()

    def quadratic(p):
        return np.sum(p * p, axis=1), 2.0 * p

    def wave(p):
        x, z = p[:, 0], p[:, -1]
        g = np.zeros_like(p)
        g[:, 0] = -2.0 * np.sin(2 * x) * (1 + z * z)
        g[:, -1] = np.cos(2 * x) * 2 * z
        return np.cos(2 * x) * (1 + z * z), g

    def expo(p):
        a = np.zeros(dim)
        a[0], a[1] = 0.5, -0.3
        v = np.exp(p @ a)
        return v, v[:, None] * a[None, :]

    return [("one", const), ("affine", affine), ("quadratic", quadratic),
            ("wave", wave), ("exp", expo)]


def _gram(dim, spacing, fns):
    """``int_{B_1} grad f_i . grad f_j`` and ``int_{dB_1} f_i f_j`` for closed-form samplers."""
    zero = np.zeros(dim)
    rho, w, _ = _radial_nodes([1.0], spacing)
    K = np.zeros((len(fns), len(fns)))
    for p, wp in zip(rho, w):
        s = sphere_sampling(dim, zero, p, spacing)
        G = np.stack([f(s.nodes)[1] for f in fns])  # (k, M, n)
        K += wp * np.einsum("imn,jmn,m->ij", G, G, s.weights)
    s = sphere_sampling(dim, zero, 1.0, spacing)
    V = np.stack([f(s.nodes)[0] for f in fns])
    return K, (V * s.weights) @ V.T


def ibp_residuals(dim, spacing, psis, lams, phis, plane_terms):
    """Relative residuals of ``int grad psi.grad phi = lam int_S phi psi - 2 int_{B'} phi d_n psi(0+)``.

    Each residual is divided by the Cauchy-Schwarz scale of its terms, so
    that vanishing sides (``phi = 1`` against a harmonic ``psi``) stay
    meaningful.  Also returns ``G_lam(psi) = K[psi, psi] - lam S[psi, psi]``.
    """
    K, S = _gram(dim, spacing, list(psis) + list(phis))
    k = len(psis)
    zero = np.zeros(dim)
    res = np.zeros((k, len(phis)))
    for i, (lam, dn) in enumerate(zip(lams, plane_terms)):
        for j, phi in enumerate(phis):
            lhs = K[i, k + j]
            rhs = lam * S[i, k + j]
            scale = math.sqrt(K[i, i] * K[k + j, k + j]) + math.sqrt(S[i, i] * S[k + j, k + j])
            if dn is not None:
                pl = disk_integral(lambda q: phi(q)[0] * dn(q), dim, zero, 1.0, spacing)
                rhs -= 2.0 * pl
                scale += 2.0 * abs(pl)
            res[i, j] = abs(lhs - rhs) / scale
    G = np.array([K[i, i] - lam * S[i, i] for i, lam in enumerate(lams)])
    return res, G


def _h_sampler(e):
    return lambda p: (eval_h(e, p), eval_grad_h(e, p))


# -- criterion 1 -----------------------------------------------------------------

def criterion_identities(tol: float = 5e-3, ibp_tol: float = 1e-2) -> CriterionResult:
    details, ok = {}, True
    for dim, res in ((2, 513), (3, 129)):
        grid = make_grid(dim, res)
        e = direction_from_angle(0.4, dim)
        h = _plain(h_field(grid, e))
        G = boundary_adjusted_energy(h, 1.5)
        radii = [0.2, 0.4, 0.6, 0.8]
        N = radial_profile(h, np.zeros(dim), radii).N
        dN = float(np.max(np.abs(N - 1.5)))
        dn = lambda q, e=e: normal_derivative_h(e, q[:, :-1])
        names, phis = zip(*smooth_probe_functions(dim))
        polys = [(m, k, psi) for m in (1, 2) for k, psi in enumerate(basis_H2m_hat(dim, m))]
        res_all, G_all = ibp_residuals(dim, grid.spacing,
                                       [_h_sampler(e)] + [psi.sample for _, _, psi in polys],
                                       [1.5] + [2.0 * m for m, _, _ in polys],
                                       phis, [dn] + [None] * len(polys))
        ibp = dict(zip(names, res_all[0]))
        ibp2m = {f"m{m}_{k}": float(res_all[1 + i].max()) for i, (m, k, _) in enumerate(polys)}
        G2m = {f"m{m}_{k}": float(G_all[1 + i]) for i, (m, k, _) in enumerate(polys)}
        passed = (abs(G) <= tol and dN <= tol and max(ibp.values()) <= ibp_tol
                  and max(ibp2m.values()) <= ibp_tol and max(abs(v) for v in G2m.values()) <= tol)
        ok &= passed
        details[f"n{dim}_res{res}"] = {"G_h": G, "N": N, "max_N_error": dN, "ibp_h": ibp,
                                       "ibp_2m_worst": ibp2m, "G_2m": G2m, "passed": passed}
    return CriterionResult(1, "closed-form identity suite", ok, details)


# -- criterion 2 -----------------------------------------------------------------

def _solver_errors(kind: str, res: int):
    grid = make_grid(2, res)
    if kind == "h":
        exact = h_field(grid)
    else:
        exact = ScalarField(grid, grid.coords()[0] ** 2 - grid.coords()[1] ** 2, 2.0)
    # cold start, so the interior never sees the exact field
    sol = solve(SignoriniProblem(grid, exact), tol=1e-10, omega=optimal_omega(res), initial="zero")
    err = float(np.max(np.abs(sol.field.values - exact.values)))
    return err, kkt_residuals(sol), sol


def criterion_solver(err_tol: float = 5e-3, kkt_tol: float = 1e-6, floor: float = 1e-6) -> CriterionResult:
    details, ok = {}, True
    for kind in ("h", "saddle"):
        e129, _, _ = _solver_errors(kind, 129)
        e257, kkt, sol = _solver_errors(kind, 257)
        ratio = e129 / e257 if e257 > 0 else float("inf")
        # below the floor both errors are at solver tolerance: the scheme is exact
        order_ok = ratio >= 2.0 or max(e129, e257) <= floor
        comp = kkt.max_product <= kkt_tol and kkt.max_dn <= kkt_tol and kkt.min_u >= -1e-12
        passed = e257 <= err_tol and order_ok and comp and sol.converged
        ok &= passed
        details[kind] = {"err_129": e129, "err_257": e257, "ratio": ratio,
                         "exact_at_both": max(e129, e257) <= floor, "kkt": kkt.to_dict(),
                         "iterations": sol.iterations, "passed": passed}
    return CriterionResult(2, "solver against exact solutions", ok, details)


# -- admissible data and their solves -----------------------------------------------

MONO_MODES = ((1.0, 0.15), (2.0, 0.15), (3.0, 0.15), (2.5, 0.1), (3.5, 0.1))


def admissible_modes(seed: int, base_seed: int = 0) -> list[AngularMode]:
    """Seeded angular perturbations of ``h_{e_1}`` (n = 2) whose trace stays
    nonnegative without clipping; draws failing that are rejected."""
    rng = np.random.default_rng([int(base_seed), 1000 + int(seed)])
    while True:
        amps = [float(rng.uniform(-a, a)) for _, a in MONO_MODES]
        left = sum(a * math.cos(nu * math.pi) for (nu, _), a in zip(MONO_MODES, amps))
        if left >= 0.0:
            return [AngularMode(nu, a) for (nu, _), a in zip(MONO_MODES, amps)]


def _solve_datum(c: ScalarField):
    res = c.grid.resolution
    return solve(SignoriniProblem(c.grid, c), tol=1e-10, omega=optimal_omega(res))


def _nearest_gamma(sol):
    mask = fb.coincidence_set(sol)
    pts = fb.free_boundary_points(mask, sol).points
    if len(pts) == 0:
        return None, pts
    return pts[int(np.argmin(np.linalg.norm(pts, axis=1)))], pts


def solved_admissible(seeds, base_seed: int = 0, res: int = 257):
    grid = make_grid(2, res)
    out = []
    for sd in seeds:
        d = make_datum(BlowupProfile(1.0, (1.0, 0.0)), admissible_modes(sd, base_seed), grid)
        out.append((sd, d, _solve_datum(d.field)))
    return out


# -- criteria 3 and 4 -----------------------------------------------------------

def criterion_monotonicity(data, slack: float = 1e-3) -> CriterionResult:
    rows, ok = [], True
    radii = np.linspace(0.1, 0.8, 20)
    for sd, d, sol in data:
        x0, pts = _nearest_gamma(sol)
        if x0 is None or np.linalg.norm(x0) > 0.2:
            rows.append({"seed": sd, "passed": False, "notice": "no free-boundary point in B_0.2"})
            ok = False
            continue
        prof = radial_profile(sol.field, x0, radii)
        n_ok = is_nondecreasing(prof.N, slack)
        w_ok = is_nondecreasing(prof.W, slack)
        heights = []
        for tag in fb.classify_points(sol, pts):
            if not tag.regular:
                continue
            reach = 1.0 - float(np.linalg.norm(tag.point))
            rr = np.geomspace(8 * sol.field.grid.spacing, 0.9 * reach, 10)
            nd = nondegeneracy_constant(radial_profile(sol.field, tag.point, rr), slack)
            heights.append({"point": tag.point, "N0": tag.frequency, "H0": nd.H0,
                            "monotone": nd.monotone})
        h_ok = bool(heights) and all(hh["monotone"] for hh in heights)
        passed = n_ok and w_ok and h_ok and sol.converged
        ok &= passed
        rows.append({"seed": sd, "x0": x0, "N_nondecreasing": n_ok, "W_nondecreasing": w_ok,
                     "min_dN": float(np.min(np.diff(prof.N))), "min_dW": float(np.min(np.diff(prof.W))),
                     "regular_points": heights, "passed": passed})
    return CriterionResult(3, "monotonicity of N, W and H/r^(n+2)", ok, {"data": rows})


def criterion_decomposition(data, tol: float = 5e-2) -> CriterionResult:
    rows, ok = [], True
    for sd, d, sol in data:
        x0, _ = _nearest_gamma(sol)
        dec = weiss_decomposition(sol.field, x0, [0.3, 0.4, 0.5])
        passed = dec.max_residual <= tol
        ok &= passed
        rows.append({"seed": sd, "x0": x0, "lhs": dec.lhs, "rhs": dec.rhs,
                     "residual": dec.residual, "passed": passed})
    return CriterionResult(4, "Weiss derivative decomposition", ok, {"data": rows})


# -- sweep and criteria 5, 6, 7, 10 --------------------------------------------------------

def sweep_row_diagnostics(sol, datum, row) -> dict:
    """Base point, frequency, Weiss decay, nondegeneracy and blowup rate of a sweep solve."""
    lam = datum.lam
    x0, _ = _nearest_gamma(sol)
    if x0 is None or np.linalg.norm(x0) > 0.2:
        return {"base_point": None}
    u = sol.field
    n = u.grid.dim
    fl = frequency_limit(u, x0)
    regular = bool(fl.value <= 1.5 + fb.REGULAR_SLACK)
    radii = np.linspace(0.1, 0.8, 20)
    prof = radial_profile(u, x0, radii, lam=lam)
    fit = weiss_decay_fit(prof)
    out = {"base_point": x0, "N0": fl.value, "regular": regular, "lam": lam,
           "gamma": fit.gamma, "gamma_points": fit.n_points,
           "W_nondecreasing": is_nondecreasing(prof.W)}
    if regular:
        nd = nondegeneracy_constant(radial_profile(u, x0, np.geomspace(8 * u.grid.spacing, 0.8, 10)))
        bs = blowup_sequence(u, x0, 0.8 * (1.0 - float(np.linalg.norm(x0))), 3, with_cone=False)
        out.update({"H0": nd.H0, "H_ratio_monotone": nd.monotone,
                    "blowup_differences": bs.differences, "blowup_ratio": bs.ratio})
    out["n"] = n
    return out


def run_sweep(seed: int = 0, jobs: int = 1, spec: Optional[dict] = None):
    return perturbation_sweep(DEFAULT_SWEEP if spec is None else spec, jobs=jobs,
                              diagnostics=sweep_row_diagnostics, seed=seed)


def _row_summary(r) -> dict:
    keep = ("base_point", "N0", "regular", "gamma", "H0", "blowup_ratio")
    return {"row": r.row, "family": r.family, "rel_dist": r.rel_dist, "G_c": r.G_c,
            "kappa_obs": r.kappa_obs, "flags": r.flags,
            **{k: r.extras.get(k) for k in keep if k in r.extras}}


def criterion_epi(table) -> CriterionResult:
    fam32 = [r for r in table if r.family == "3/2"]
    fam2m = [r for r in table if r.family == "2m"]

    def good(r):
        return (not r.flags and r.rel_dist <= 0.1 + 1e-12 and r.G_c > 1e-6
                and math.isfinite(r.kappa_obs) and r.kappa_obs > 0)

    k32 = min((r.kappa_obs for r in fam32), default=float("nan"))
    k2m = min((r.kappa_obs for r in fam2m), default=float("nan"))
    lowest = all(r.extras.get("projection_lowest_stratum", False) for r in fam2m)
    ok = (len(fam32) == 20 and len(fam2m) == 3 and all(good(r) for r in table) and lowest
          and k32 >= KAPPA_FLOOR_32 and k2m >= KAPPA_FLOOR_2M)
    return CriterionResult(5, "epiperimetric gain on the default sweep", ok, {
        "rows": [_row_summary(r) for r in table], "min_kappa_32": k32, "min_kappa_2m": k2m,
        "floor_32": KAPPA_FLOOR_32, "floor_2m": KAPPA_FLOOR_2M, "lowest_stratum_2m": lowest})


def decay_bound(kappa: float, n: int, lam: float) -> float:
    """``2 (n + 2 lam - 2) kappa / (1 - kappa)``: the decay rate the gain implies."""
    return 2.0 * (n + 2.0 * lam - 2.0) * kappa / (1.0 - kappa)


def criterion_decay(table, factor: float = 0.3, kappa_min: float = 0.02) -> CriterionResult:
    rows, ok = [], True
    for r in table:
        if not (math.isfinite(r.kappa_obs) and r.kappa_obs >= kappa_min):
            continue
        g = r.extras.get("gamma", float("nan"))
        lam = r.extras.get("lam", 1.5)
        bound = factor * decay_bound(r.kappa_obs, r.dim, lam)
        passed = r.extras.get("base_point") is not None and math.isfinite(g) and g > 0 and g >= bound
        ok &= passed
        rows.append({"row": r.row, "family": r.family, "kappa_obs": r.kappa_obs, "gamma": g,
                     "required": bound, "passed": passed})
    return CriterionResult(6, "Weiss decay consistent with the gain", ok and bool(rows), {"rows": rows})


def criterion_blowup(table, limit: float = 0.9) -> CriterionResult:
    rows, ok = [], True
    for r in table:
        if not r.extras.get("regular"):
            continue
        ratio = r.extras["blowup_ratio"]
        passed = math.isfinite(ratio) and ratio <= limit
        ok &= passed
        rows.append({"row": r.row, "ratio": ratio, "differences": r.extras["blowup_differences"],
                     "passed": passed})
    return CriterionResult(7, "geometric blowup convergence", ok and bool(rows), {"rows": rows})


def criterion_nondegeneracy(table, rel: float = 1e-2) -> CriterionResult:
    rows, ok = [], True
    for r in table:
        if not r.extras.get("regular"):
            continue
        passed = r.extras["H0"] > 0
        ok &= passed
        rows.append({"row": r.row, "H0": r.extras["H0"], "passed": passed})
    exact = []
    for dim, res, lam in ((2, 257, 2.0), (3, 65, 0.5)):
        grid = make_grid(dim, res)
        e = direction_from_angle(0.4, dim)
        u = h_field(grid, e, lam)
        H1 = radial_profile(h_field(grid, e), np.zeros(dim), [1.0]).H[0]
        nd = nondegeneracy_constant(radial_profile(u, np.zeros(dim), np.linspace(0.2, 1.0, 10)))
        err = abs(nd.H0 - lam * lam * H1) / (lam * lam * H1)
        exact.append({"dim": dim, "lam": lam, "H0": nd.H0, "expected": lam * lam * H1, "rel_err": err})
        ok &= err <= rel
    return CriterionResult(10, "nondegeneracy", ok and bool(rows), {"sweep": rows, "exact": exact})


# -- criterion 8 -----------------------------------------------------------------

def _draw_admissible(rng, base, grid, draw_modes, max_rel: float = 0.1):
    """Redraw ``draw_modes(rng)`` until the datum needs no clipping and stays near the cone."""
    while True:
        d = make_datum(base, draw_modes(rng), grid)
        if d.clip_scale == 1.0 and 0.0 < d.rel_dist <= max_rel:
            return d


def orthogonality_data(base_seed: int = 0):
    """Ten perturbed cone data, five planar and five spatial.

    Spatial perturbations combine ``|x|^{3/2}``, degree-one and degree-two
    harmonic parts: the degree-one part transverse to ``e`` tilts the
    nearest cone direction, so the tangent residual is not trivially zero.
    """
    out = []
    g2 = make_grid(2, 257)

    def planar(rng):
        return [AngularMode(nu, float(rng.uniform(-0.05, 0.05))) for nu in (1.0, 2.0, 2.5, 3.0, 3.5)]

    for k in range(5):
        rng = np.random.default_rng([int(base_seed), 2000 + k])
        out.append(("n2", k, _draw_admissible(rng, BlowupProfile(1.0, (1.0, 0.0)), g2, planar)))
    g3 = make_grid(3, 65)

    def spatial(rng):
        modes = [ConstantMode(float(rng.uniform(0.02, 0.06)))]
        modes += [HarmonicMode(1, i, float(rng.uniform(-0.03, 0.03))) for i in range(2)]
        modes += [HarmonicMode(2, i, float(rng.uniform(-0.02, 0.02))) for i in range(3)]
        return modes

    for k in range(5):
        rng = np.random.default_rng([int(base_seed), 3000 + k])
        e = direction_from_angle(float(rng.uniform(0, 2 * math.pi)), 3)
        out.append(("n3", k, _draw_admissible(rng, BlowupProfile(1.0, tuple(e)), g3, spatial)))
    return out


def criterion_orthogonality(base_seed: int = 0, tol: float = 1e-3) -> CriterionResult:
    rows, ok = [], True
    for tag, k, d in orthogonality_data(base_seed):
        rep = orthogonality_check(d.field)
        passed = (not rep.skipped) and rep.max_residual <= tol
        ok &= passed
        rows.append({"data": f"{tag}_{k}", "rel_dist": d.rel_dist, "amplitude": rep.amplitude,
                     "direction": rep.direction, "residuals": rep.residuals, "passed": passed})
    return CriterionResult(8, "orthogonality at the nearest cone point", ok, {"data": rows})


# -- criterion 9 -----------------------------------------------------------------

def _angle_deg(a, b) -> float:
    return math.degrees(math.acos(float(np.clip(np.dot(a, b), -1.0, 1.0))))


def lazy_cone_field(grid, e) -> ScalarField:
    """``h_e`` on a large grid: exact sampler, node values computed in slabs."""
    vals = np.empty(grid.shape)
    ax = grid.axis()
    e = np.asarray(e, dtype=float)
    for i, x in enumerate(ax):
        pts = np.stack([np.full(grid.resolution ** (grid.dim - 1), x)]
                       + [c.ravel() for c in np.meshgrid(*([ax] * (grid.dim - 1)), indexing="ij")],
                       axis=1)
        vals[i] = eval_h(e, pts).reshape(grid.shape[1:])
    return ScalarField(grid, vals, 1.5, _h_sampler(e))


def criterion_frames(deg_tol: float = 2.0) -> CriterionResult:
    details, ok = {}, True
    angles = (0.0, 30.0, 45.0, 60.0)
    # planar: the direction is the side of the half-line
    g2 = make_grid(2, 257)
    planar = []
    for a in angles:
        for flip in (0.0, 180.0):
            e = direction_from_angle(math.radians(a + flip), 2)
            sol = _solve_datum(h_field(g2, e))
            fr = fb.local_frame(sol, np.zeros(2))
            passed = _angle_deg(fr.direction, e) <= deg_tol and fr.reliable
            ok &= passed
            planar.append({"angle": a + flip, "direction": fr.direction, "passed": passed})
    details["n2_res257"] = planar
    # spatial: exact cone fields at 257, solved fields at 97
    g3 = make_grid(3, 257)
    spatial = []
    for a in angles:
        e = direction_from_angle(math.radians(a), 3)
        fr = fb.local_frame(lazy_cone_field(g3, e), np.zeros(3))
        err = _angle_deg(fr.direction, e)
        ok &= err <= deg_tol
        spatial.append({"angle": a, "error_deg": err, "amplitude": fr.amplitude, "passed": err <= deg_tol})
    details["n3_res257_exact"] = spatial
    g97 = make_grid(3, 97)
    solved = []
    for a in angles:
        e = direction_from_angle(math.radians(a), 3)
        sol = _solve_datum(h_field(g97, e))
        fr = fb.local_frame(sol, np.zeros(3))
        pts = fb.free_boundary_points(fb.coincidence_set(sol), sol).points
        line_err = float(np.max(np.abs(pts @ e))) / g97.spacing if len(pts) else float("inf")
        err = _angle_deg(fr.direction, e)
        passed = err <= deg_tol and line_err <= 2.0
        ok &= passed
        solved.append({"angle": a, "error_deg": err, "gamma_line_err_spacings": line_err,
                       "n_points": len(pts), "passed": passed})
    details["n3_res97_solved"] = solved
    # coincidence set of the planar cone solve against {x_1 <= 0}
    sol = _solve_datum(h_field(g2))
    mask = fb.coincidence_set(sol)
    ax = g2.axis()
    nodes = ax[mask][:, None]
    exact = np.linspace(-1.0, 0.0, 4001)[:, None]
    haus = max(directed_hausdorff(nodes, exact)[0], directed_hausdorff(exact, nodes)[0])
    ok &= haus <= 2.0 * g2.spacing
    details["lambda_hausdorff_spacings"] = haus / g2.spacing
    return CriterionResult(9, "free-boundary frame recovery", ok, details)


# -- criterion 11 and the driver -----------------------------------------------------

def files_identical(dir_a, dir_b) -> tuple[bool, list]:
    a, b = Path(dir_a), Path(dir_b)
    names = sorted({p.name for p in a.iterdir()} | {p.name for p in b.iterdir()})
    diff = [n for n in names if not ((a / n).exists() and (b / n).exists()
                                      and (a / n).read_bytes() == (b / n).read_bytes())]
    return not diff, diff


def run_validation(out_dir=None, seed: int = 0, jobs: int = 1, quick: bool = False,
                   only=None, echo: Callable[[str], None] = print) -> list[CriterionResult]:
    """Run the acceptance criteria, print one line each, write ``validation.json``
    (and the sweep table) to ``out_dir``."""
    wanted = set(QUICK if quick else range(1, 11)) if only is None else set(only)
    results: list[CriterionResult] = []

    def record(fn, *args, prep: float = 0.0):
        t = time.perf_counter()
        r = fn(*args)
        r.seconds = time.perf_counter() - t + prep
        budget = RUNTIME_BUDGET_S.get(r.number)
        if budget is not None:
            # only the budget is recorded, the measured time would break determinism
            r.details["runtime_budget_s"] = budget
            r.passed = bool(r.passed and r.seconds <= budget)
        results.append(r)
        echo(f"{r.line()}  ({r.seconds:.1f} s)")
        return r

    if 1 in wanted:
        record(criterion_identities)
    if 2 in wanted:
        record(criterion_solver)
    # shared solves are timed once and charged to the first criterion using them
    if wanted & {3, 4}:
        t = time.perf_counter()
        data = solved_admissible(range(10), seed)
        prep = time.perf_counter() - t
        if 3 in wanted:
            record(criterion_monotonicity, data, prep=prep)
        if 4 in wanted:
            record(criterion_decomposition, data[:5])
    table = None
    if wanted & {5, 6, 7, 10}:
        t = time.perf_counter()
        table = run_sweep(seed, jobs)
        prep = time.perf_counter() - t
        if 5 in wanted:
            record(criterion_epi, table, prep=prep)
        if 6 in wanted:
            record(criterion_decay, table)
        if 7 in wanted:
            record(criterion_blowup, table)
    if 8 in wanted:
        record(criterion_orthogonality, seed)
    if 9 in wanted:
        record(criterion_frames)
    if 10 in wanted:
        record(criterion_nondegeneracy, table)
    results.sort(key=lambda r: r.number)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"seed": seed, "quick": quick, "criteria": [r.to_dict() for r in results]}
        (out / "validation.json").write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        if table is not None:
            write_sweep_csv(out / "sweep.csv", table)
    return results
