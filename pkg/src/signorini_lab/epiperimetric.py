"""Measured epiperimetric gain of homogeneous data near the blowup cones."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import eval_legendre

from .blowups import (BlowupProfile, H1Probe, _h_sampler, dist_to_cone32,
                      transverse_directions, eval_tangent)
from .fields import Grid, ScalarField, make_grid
from .harmonic import Poly2m, _eval_monomials, harmonic_basis, is_lowest_stratum, project_H2m
from .quadrature import boundary_mass, dirichlet_energy, sphere_sampling
from .solver import SignoriniProblem, discrete_energy, optimal_omega, solve

G_NOISE_FLOOR = 1e-6
NEAR_CONE = 0.1


# -- perturbation modes --------------------------------------------------------

@dataclass(frozen=True)
class AngularMode:
    """``amp * cos(nu theta)``, ``theta`` the angle from ``e`` in the ``(x.e, |x_2|)``
    half plane (planar only)."""

    nu: float
    amp: float

    def homogeneous(self, e, lam: float, p: np.ndarray):
        s = p[:, 0] * e[0]
        t = np.abs(p[:, 1])
        rho = np.hypot(s, t)
        th = np.arctan2(t, s)
        safe = np.where(rho > 0, rho, 1.0)
        f = np.cos(self.nu * th)
        df = -self.nu * np.sin(self.nu * th)
        val = rho ** lam * f
        # radial and angular parts in (s, t) coordinates
        gr = lam * rho ** (lam - 1) * f
        gth = rho ** (lam - 1) * df
        gs = gr * s / safe - gth * t / safe
        gt = gr * t / safe + gth * s / safe
        sg = np.where(p[:, 1] < 0, -1.0, 1.0)
        grad = np.stack([gs * e[0], gt * sg], axis=1)
        zero = rho == 0
        val[zero] = 0.0
        grad[zero] = 0.0
        return self.amp * val, self.amp * grad

    def to_json(self):
        return {"kind": "angular", "nu": self.nu, "amp": self.amp}


@dataclass(frozen=True)
class HarmonicMode:
    """``amp * |x|^{lam - l} Y(x)`` for the ``index``-th even harmonic polynomial
    ``Y`` of degree ``l`` (unit ``L^2`` norm on the sphere)."""

    degree: int
    index: int
    amp: float

    def homogeneous(self, e, lam: float, p: np.ndarray):
        mons, B = harmonic_basis(p.shape[1], self.degree)
        P, dP = _eval_monomials(mons, B[self.index], p)
        rho = np.linalg.norm(p, axis=1)
        safe = np.where(rho > 0, rho, 1.0)
        k = lam - self.degree
        val = safe ** k * P
        grad = (k * safe ** (k - 2) * P)[:, None] * p + (safe ** k)[:, None] * dP
        zero = rho == 0
        val[zero] = 0.0
        grad[zero] = 0.0
        return self.amp * val, self.amp * grad

    def to_json(self):
        return {"kind": "harmonic", "degree": self.degree, "index": self.index, "amp": self.amp}


@dataclass(frozen=True)
class ConstantMode:
    """``amp * |x|^lam``: a constant trace."""

    amp: float

    def homogeneous(self, e, lam: float, p: np.ndarray):
        rho = np.linalg.norm(p, axis=1)
        safe = np.where(rho > 0, rho, 1.0)
        grad = (lam * safe ** (lam - 2))[:, None] * p
        grad[rho == 0] = 0.0
        return self.amp * rho ** lam, self.amp * grad

    def to_json(self):
        return {"kind": "constant", "amp": self.amp}


@dataclass(frozen=True)
class TangentMode:
    """``amp * v_{e, xi}``: the tangent field that rotates ``h_e`` towards ``xi``
    (``xi`` a unit vector of the thin plane orthogonal to ``e``; needs ``n = 3``)."""

    xi: tuple
    amp: float

    def homogeneous(self, e, lam: float, p: np.ndarray):
        v, g = eval_tangent(e, np.asarray(self.xi, dtype=float), p)
        return self.amp * v, self.amp * g

    def to_json(self):
        return {"kind": "tangent", "xi": list(self.xi), "amp": self.amp}


Mode = Union[AngularMode, HarmonicMode, ConstantMode, TangentMode]


def mode_from_json(d: dict) -> Mode:
    kind = d.get("kind", "angular")
    if kind == "angular":
        return AngularMode(float(d["nu"]), float(d["amp"]))
    if kind == "harmonic":
        return HarmonicMode(int(d["degree"]), int(d.get("index", 0)), float(d["amp"]))
    if kind == "constant":
        return ConstantMode(float(d["amp"]))
    if kind == "tangent":
        return TangentMode(tuple(float(x) for x in d["xi"]), float(d["amp"]))
    raise ValueError(f"unknown mode kind {kind!r}")


# -- data -----------------------------------------------------------------------

@dataclass
class Datum:
    field: ScalarField
    lam: float
    base: Union[BlowupProfile, Poly2m]
    modes: tuple
    clip_scale: float
    degenerate: bool
    dist: float
    c_norm: float

    @property
    def rel_dist(self) -> float:
        return self.dist / self.c_norm if self.c_norm > 0 else 0.0


def _thin_sphere_nodes(dim: int, count: int = 4096) -> np.ndarray:
    if dim == 2:
        return np.array([[1.0, 0.0], [-1.0, 0.0]])
    th = 2 * np.pi * np.arange(count) / count
    return np.stack([np.cos(th), np.sin(th), np.zeros(count)], axis=1)


def _base_lambda(base) -> float:
    return 1.5 if isinstance(base, BlowupProfile) else float(2 * base.m)


def make_datum(base: Union[BlowupProfile, Poly2m], modes: Sequence[Mode], grid: Grid,
               degenerate_below: float = 0.5) -> Datum:
    """Homogeneous datum ``c = base + s * sum(modes)`` with ``s`` in ``[0, 1]``
    the largest factor keeping the thin trace nonnegative."""
    lam = _base_lambda(base)
    e = np.array(base.direction) if isinstance(base, BlowupProfile) else np.eye(grid.dim)[0]
    modes = tuple(modes)

    def pert(p):
        v = np.zeros(len(p))
        g = np.zeros_like(p)
        for md in modes:
            mv, mg = md.homogeneous(e, lam, p)
            v += mv
            g += mg
        return v, g

    thin = _thin_sphere_nodes(grid.dim)
    b = base.sample(thin)[0]
    q = pert(thin)[0] if modes else np.zeros(len(thin))
    s = 1.0
    # round-off in a vanishing trace is not a violation
    tiny = 1e-12 * max(float(np.max(np.abs(q))), float(np.max(np.abs(b))), 1e-300)
    neg = q < -tiny
    if np.any(neg):
        ratios = np.maximum(b[neg], 0.0) / -q[neg]
        s = float(min(1.0, max(0.0, ratios.min())))
        # keep a strictly feasible margin against round-off
        if s < 1.0:
            s = max(0.0, s * (1.0 - 1e-12))

    def sampler(p):
        bv, bg = base.sample(p)
        if not modes or s == 0.0:
            return bv, bg
        pv, pg = pert(p)
        return bv + s * pv, bg + s * pg

    vals, _ = sampler(grid.points())
    c = ScalarField(grid, vals.reshape(grid.shape), lam, sampler)
    degenerate = bool(modes) and s < degenerate_below
    if lam == 1.5:
        cd = dist_to_cone32(c)
        dist, cn = cd.dist, cd.c_norm
    else:
        pr = project_H2m(c, int(round(lam / 2)))
        dist = pr.dist
        probe = H1Probe(c, lam)
        cn = math.sqrt(max(probe.norm2, 0.0))
    return Datum(c, lam, base, modes, s, degenerate, float(dist), float(cn))


def homogeneous_energy(c: ScalarField, lam: float, quality=None) -> float:
    """``G_lam(c) = int_{B_1}|grad c|^2 - lam int_{dB_1} c^2`` for a ``lam``-homogeneous ``c``."""
    n = c.grid.dim
    s = sphere_sampling(n, np.zeros(n), 1.0, c.grid.spacing, quality)
    v, g = c.sample(s.nodes)
    return float(s.integrate(np.sum(g * g, axis=1)) / (n + 2 * lam - 2) - lam * s.integrate(v * v))


def adjusted_energy(u: ScalarField, lam: float, quality=None) -> float:
    """``G_lam(u)`` by ball and sphere quadrature (any field)."""
    zero = np.zeros(u.grid.dim)
    return dirichlet_energy(u, zero, 1.0, quality) - lam * boundary_mass(u, zero, 1.0, quality)


@dataclass
class EpiGain:
    G_c: float
    G_v: float
    kappa_obs: float
    G_v_quadrature: float
    energy_drop: float
    cone_like: bool
    converged: bool
    iterations: int
    flags: list = field(default_factory=list)
    solution: Optional[object] = field(default=None, repr=False)


def epi_gain(c: ScalarField, lam: float, tol: float = 1e-10, omega: Optional[float] = None,
             max_iters: Optional[int] = None, noise: float = G_NOISE_FLOOR) -> EpiGain:
    """Compare ``G(c)`` with ``G(v*)``, ``v*`` the discrete minimizer with trace ``c``.

    For equal traces ``G(u1) - G(u2) = D(u1) - D(u2)``, so ``G(v*)`` is
    ``G(c)`` minus the drop of the discrete Dirichlet energy during the
    solve: both energies live on one grid and the quadrature bias of a
    separate evaluation cancels.  The direct quadrature value of ``G(v*)``
    is reported alongside.
    """
    g = c.grid
    G_c = homogeneous_energy(c, lam)
    omega = optimal_omega(g.resolution) if omega is None else omega
    prob = SignoriniProblem(g, c)
    sol = solve(prob, tol=tol, omega=omega, max_iters=max_iters, initial="datum")
    fixed = prob.fixed_mask()
    drop = discrete_energy(c.values, fixed, g.spacing) - discrete_energy(sol.field.values, fixed, g.spacing)
    G_v = G_c - drop
    G_vq = adjusted_energy(sol.field, lam)
    flags = []
    if not sol.converged:
        flags.append("unconverged")
    cone_like = abs(G_c) <= noise
    if G_c < -noise:
        flags.append("negative_G_c")
    kappa = float("nan") if cone_like else drop / G_c
    if cone_like:
        flags.append("cone_like")
    return EpiGain(G_c, G_v, kappa, G_vq, drop, cone_like, sol.converged, sol.iterations,
                   flags, sol)


@dataclass
class OrthogonalityReport:
    residuals: list
    amplitude: float
    direction: np.ndarray
    dist: float
    skipped: bool
    notice: str = ""

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def orthogonality_check(c: ScalarField, quality=None) -> OrthogonalityReport:
    """Normalized ``<c - lam* h_e*, zeta>`` over the tangent basis at the nearest cone point.

    ``<c, zeta>`` is integrated at the probe nodes.  The cone-only terms
    ``<h_e, zeta>`` and ``|zeta|`` are rotation invariant, so they are
    evaluated with ``e`` turned onto ``e_1``, where the nodes keep the
    reflection symmetry that makes ``<h_e, v_{e,xi}> = 0``; at a rotated ``e``
    the singular gradient of ``v`` where the free boundary meets the sphere
    leaves a quadrature residue that the small distance would amplify.
    """
    probe = H1Probe(c, 1.5, quality)
    cd = dist_to_cone32(c, quality=quality, probe=probe)
    if cd.amplitude <= 0:
        return OrthogonalityReport([], 0.0, cd.direction, cd.dist, True,
                                   "nearest cone point is 0: tangent space degenerate")
    e = cd.direction
    e_ref = np.eye(c.grid.dim)[0]

    def basis_at(d):
        return [_h_sampler(d)] + [(lambda xi: (lambda p: eval_tangent(d, xi, p)))(xi)
                                  for xi in transverse_directions(d)]

    basis = basis_at(e)
    ref = basis_at(e_ref)
    if cd.dist <= 1e-12 * max(cd.c_norm, 1e-300):
        return OrthogonalityReport([0.0] * len(basis), cd.amplitude, e, cd.dist, False,
                                   "datum lies on the cone")
    res = []
    for zeta, zeta_ref in zip(basis, ref):
        zn = math.sqrt(probe.norm2_of(zeta_ref))
        if probe.radial or probe.same_degree:
            cross = probe.pair(ref[0], zeta_ref)
        else:
            cross = _pair_homog(c.grid, ref[0], zeta_ref, quality)
        res.append(abs(probe.inner(zeta) - cd.amplitude * cross) / (cd.dist * zn))
    return OrthogonalityReport(res, cd.amplitude, e, cd.dist, False)


def _pair_homog(grid: Grid, f, g, quality=None, mu: float = 1.5) -> float:
    n = grid.dim
    s = sphere_sampling(n, np.zeros(n), 1.0, grid.spacing, quality)
    fv, fg = f(s.nodes)
    gv, gg = g(s.nodes)
    return float(s.integrate(fv * gv) / (2 * mu + n) + s.integrate(np.einsum("ij,ij->i", fg, gg)) / (2 * mu + n - 2))


# -- sweeps -----------------------------------------------------------------------

@dataclass
class EpiExperiment:
    row: int
    dim: int
    resolution: int
    family: str
    m: int
    amplitude: float
    modes: list
    dist: float
    rel_dist: float
    G_c: float
    G_v: float
    kappa_obs: float
    flags: list
    extras: dict = field(default_factory=dict)

    CSV_COLUMNS = ("dim", "resolution", "family", "m", "amplitude", "dist", "G_c", "G_v",
                   "kappa_obs", "flags")

    def csv_row(self) -> list:
        return [self.dim, self.resolution, self.family, self.m, self.amplitude, self.dist,
                self.G_c, self.G_v, self.kappa_obs, ";".join(self.flags)]


DEFAULT_SWEEP = {"blocks": [
    # single half-integer angular modes on the 3/2 cone
    {"dims": [2], "resolutions": [257], "families": [{"family": "3/2"}],
     "mode_sets": [[{"nu": 2.5}], [{"nu": 3.5}], [{"nu": 4.5}]],
     "amplitudes": [0.02, 0.04, 0.06]},
    # seeded mixtures of the same modes
    {"dims": [2], "resolutions": [257], "families": [{"family": "3/2"}],
     "mode_sets": [[{"nu": 2.5}, {"nu": 3.5}, {"nu": 4.5}]],
     "amplitudes": [0.04], "seeds": list(range(11))},
    # x_1^2 - x_2^2 plus higher integer modes
    {"dims": [2], "resolutions": [257], "families": [{"family": "2m", "m": 1}],
     "mode_sets": [[{"nu": 3}], [{"nu": 4}], [{"nu": 5}]],
     "amplitudes": [0.05]},
]}


def base_for(family: str, dim: int, m: int = 1):
    if family == "3/2":
        return BlowupProfile(1.0, tuple(np.eye(dim)[0]))
    if family == "2m":
        # trace x_1^{2m} in the plane; in space the zonal harmonic about e_n,
        # whose trace is a positive multiple of |x'|^{2m}
        if dim == 2:
            return Poly2m.from_function(2, m, lambda p: np.real((p[:, 0] + 1j * p[:, 1]) ** (2 * m)))

        def zonal(p):
            rho = np.linalg.norm(p, axis=1)
            return (-1) ** m * rho ** (2 * m) * eval_legendre(2 * m, p[:, 2] / np.where(rho > 0, rho, 1.0))

        return Poly2m.from_function(3, m, zonal)
    raise ValueError(f"unknown family {family!r}")


def expand_sweep(spec: dict) -> list[dict]:
    """Rows of a sweep description.

    ``spec`` keys: ``dims``, ``resolutions``, ``families`` (list of
    ``{"family": "3/2"|"2m", "m": int}``), ``mode_sets`` (lists of mode
    dicts without amplitudes, or with relative weights ``w``),
    ``amplitudes`` and ``seeds``.  With a seed the weights of a multi-mode
    set are drawn uniformly in ``[-1, 1]`` from it.  A spec with ``blocks``
    concatenates the rows of its sub-specs.  An empty spec gives no rows.
    """
    if not spec:
        return []
    if "blocks" in spec:
        return [row for block in spec["blocks"] for row in expand_sweep(block)]
    dims = spec.get("dims", [2])
    ress = spec.get("resolutions", [129])
    fams = spec.get("families", [{"family": "3/2"}])
    msets = spec.get("mode_sets", [[]])
    amps = spec.get("amplitudes", [0.0])
    seeds = spec.get("seeds", [None])
    rows = []
    for dim, res, fam, mset, amp, seed in itertools.product(dims, ress, fams, msets, amps, seeds):
        rows.append({"dim": dim, "resolution": res, "family": fam.get("family", "3/2"),
                     "m": int(fam.get("m", 1)), "modes": mset, "amplitude": amp, "seed": seed})
    return rows


def _row_modes(row: dict, base_seed: int = 0) -> list[Mode]:
    out = []
    rng = None
    if row.get("seed") is not None:
        rng = np.random.default_rng([int(base_seed), int(row["seed"])])
    for md in row["modes"]:
        md = dict(md)
        w = float(md.pop("w", 1.0))
        if rng is not None and len(row["modes"]) > 1:
            w = float(rng.uniform(-1.0, 1.0))
        md["amp"] = row["amplitude"] * w
        out.append(mode_from_json(md))
    return out


def run_row(index: int, row: dict, tol: float = 1e-10, diagnostics=None,
            base_seed: int = 0) -> EpiExperiment:
    flags: list = []
    extras: dict = {}
    try:
        grid = make_grid(row["dim"], row["resolution"])
        base = base_for(row["family"], row["dim"], row["m"])
        d = make_datum(base, _row_modes(row, base_seed), grid)
        if d.degenerate:
            flags.append("degenerate_clip")
        if d.rel_dist > NEAR_CONE:
            flags.append("far_from_cone")
        if row["family"] == "2m":
            pr = project_H2m(d.field, row["m"])
            lowest = bool(np.any(pr.poly.coeffs)) and is_lowest_stratum(pr.poly)
            extras["projection_lowest_stratum"] = lowest
            if not lowest:
                flags.append("projection_not_lowest_stratum")
        gain = epi_gain(d.field, d.lam, tol=tol)
        flags += gain.flags
        extras.update({"clip_scale": d.clip_scale, "G_v_quadrature": gain.G_v_quadrature,
                       "iterations": gain.iterations})
        if diagnostics is not None:
            extras.update(diagnostics(gain.solution, d, row))
        return EpiExperiment(index, row["dim"], row["resolution"], row["family"], row["m"],
                             row["amplitude"], [m.to_json() for m in d.modes], d.dist,
                             d.rel_dist, gain.G_c, gain.G_v, gain.kappa_obs, flags, extras)
    except Exception as exc:  # rows fail independently
        return EpiExperiment(index, row.get("dim", 0), row.get("resolution", 0),
                             row.get("family", ""), row.get("m", 0), row.get("amplitude", 0.0),
                             row.get("modes", []), float("nan"), float("nan"), float("nan"),
                             float("nan"), float("nan"), [f"error:{type(exc).__name__}:{exc}"])


def perturbation_sweep(spec: dict, jobs: int = 1, tol: float = 1e-10, diagnostics=None,
                       seed: int = 0) -> list[EpiExperiment]:
    """One :class:`EpiExperiment` per row of ``expand_sweep(spec)``, in row order.

    ``diagnostics(solution, datum, row) -> dict`` adds per-row extras; with
    ``jobs > 1`` it must be a module-level function.
    """
    rows = expand_sweep(spec)
    if jobs <= 1 or len(rows) <= 1:
        return [run_row(i, r, tol, diagnostics, seed) for i, r in enumerate(rows)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(run_row, i, r, tol, diagnostics, seed) for i, r in enumerate(rows)]
        return [f.result() for f in futs]


def write_sweep_csv(path, table: Sequence[EpiExperiment]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EpiExperiment.CSV_COLUMNS)
        for r in table:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r.csv_row()])
