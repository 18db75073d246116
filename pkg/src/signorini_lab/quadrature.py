"""Quadrature on spheres, balls and thin-plane disks.

Sphere integrals use composite 4-point Gauss-Legendre panels in the polar
angle, split where the sphere crosses the thin plane so that the kink of an
even field across ``{x_n = 0}`` always sits on a panel edge.  Ball integrals
are radial Gauss-Legendre panels of sphere integrals, which gives a smooth
dependence on the radius (no cell staircase).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import DomainError, ScalarField

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)

# nodes per grid spacing along the sphere
DEFAULT_QUALITY = {2: 2.0, 3: 1.0}


@dataclass(frozen=True)
class SphereSampling:
    """Quadrature nodes on ``dB_r(center)``.

    ``weights`` sum to the sphere measure; ``normals`` are the outward unit
    normals at ``nodes``.
    """

    center: np.ndarray
    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _panels(a: float, b: float, breaks: Sequence[float], width: float):
    """Gauss-Legendre nodes and weights on ``[a, b]`` with panel edges at ``breaks``."""
    edges = [a] + sorted(t for t in breaks if a < t < b) + [b]
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((hi - lo) / width - 1e-12)))
        e = np.linspace(lo, hi, k + 1)
        half = 0.5 * np.diff(e)
        midp = 0.5 * (e[1:] + e[:-1])
        xs.append((midp[:, None] + half[:, None] * _GL_X).ravel())
        ws.append((half[:, None] * _GL_W).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _plane_angles(c_n: float, r: float):
    """Angle(s) in the polar variable where the sphere meets the thin plane."""
    if abs(c_n) >= r:
        return None
    return math.asin(-c_n / r)


def sphere_sampling(dim: int, center, r: float, spacing: float,
                    quality: float | None = None) -> SphereSampling:
    """Nodes and weights for ``int_{dB_r(center)} f dH^{n-1}``.

    Node separation along the sphere is roughly ``spacing / quality``.
    """
    if r <= 0:
        raise ValueError("sphere radius must be positive")
    center = np.asarray(center, dtype=float)
    q = DEFAULT_QUALITY[dim] if quality is None else float(quality)
    # 4 nodes per panel
    dphi = 4.0 * spacing / (q * r)
    if dim == 2:
        # theta measured from +x_1, x_n = c_n + r sin(theta); cover [-pi/2, 3pi/2)
        breaks = [-0.5 * math.pi, 0.5 * math.pi, 1.5 * math.pi]
        a = _plane_angles(center[1], r)
        if a is not None:
            breaks += [a, math.pi - a]
        th, w = _panels(-0.5 * math.pi, 1.5 * math.pi, breaks, dphi)
        normals = np.stack([np.cos(th), np.sin(th)], axis=1)
        weights = w * r
    else:
        # latitude phi in [-pi/2, pi/2] measured from the thin plane
        breaks = [0.0]
        a = _plane_angles(center[2], r)
        if a is not None:
            breaks.append(a)
        phi, wphi = _panels(-0.5 * math.pi, 0.5 * math.pi, breaks, dphi)
        normals_l, weights_l = [], []
        for p, wp in zip(phi, wphi):
            cp = math.cos(p)
            m = max(8, int(math.ceil(2.0 * math.pi * r * cp * q / spacing)))
            psi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
            normals_l.append(np.stack([cp * np.cos(psi), cp * np.sin(psi),
                                       np.full(m, math.sin(p))], axis=1))
            weights_l.append(np.full(m, wp * cp * 2.0 * math.pi / m * r * r))
        normals = np.concatenate(normals_l)
        weights = np.concatenate(weights_l)
    nodes = center + r * normals
    return SphereSampling(center, float(r), nodes, weights, normals)


def sphere_measure(dim: int, r: float = 1.0) -> float:
    return 2.0 * math.pi * r if dim == 2 else 4.0 * math.pi * r * r


def _check_ball(u: ScalarField, x0, r):
    if not u.grid.contains_ball(x0, r) and u.sampler is None:
        raise DomainError(f"ball of radius {r} at {np.asarray(x0).tolist()} leaves the grid box")


def sphere_integral(fn: Callable[[SphereSampling], np.ndarray], dim: int, x0, r: float,
                    spacing: float, quality: float | None = None) -> float:
    s = sphere_sampling(dim, x0, r, spacing, quality)
    return s.integrate(fn(s))


def _radial_nodes(radii: Sequence[float], spacing: float):
    """Radial GL nodes on ``[0, max(radii)]`` and the index ranges ending at each radius."""
    radii = np.asarray(radii, dtype=float)
    order = np.argsort(radii)
    edges = np.concatenate([[0.0], radii[order]])
    nodes, weights, ends = [], [], []
    count = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            x, w = _panels(lo, hi, [], 2.0 * spacing)
            nodes.append(x)
            weights.append(w)
            count += len(x)
        ends.append(count)
    ends_sorted = np.empty(len(radii), dtype=int)
    ends_sorted[order] = ends
    if nodes:
        return np.concatenate(nodes), np.concatenate(weights), ends_sorted
    return np.zeros(0), np.zeros(0), ends_sorted


def ball_integrals(fn: Callable[[SphereSampling], np.ndarray], dim: int, x0, radii,
                   spacing: float, quality: float | None = None) -> np.ndarray:
    """``int_{B_r(x0)} f`` for every ``r`` in ``radii`` (cumulative radial panels)."""
    rho, w, ends = _radial_nodes(radii, spacing)
    shell = np.array([sphere_integral(fn, dim, x0, p, spacing, quality) for p in rho])
    partial = np.concatenate([[0.0], np.cumsum(w * shell)])
    return partial[ends]


def disk_integral(fn: Callable[[np.ndarray], np.ndarray], dim: int, x0, r: float,
                  spacing: float) -> float:
    """``int_{B_r(x0) cap {x_n = 0}} f dH^{n-1}`` for ``x0`` on the thin plane."""
    x0 = np.asarray(x0, dtype=float)
    if dim == 2:
        t, w = _panels(-r, r, [0.0], spacing)
        pts = np.zeros((len(t), 2))
        pts[:, 0] = x0[0] + t
        return float(np.dot(w, fn(pts)))
    rho, wr = _panels(0.0, r, [], spacing)
    total = 0.0
    for p, wp in zip(rho, wr):
        m = max(8, int(math.ceil(4.0 * math.pi * p / spacing)))
        psi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        pts = np.stack([x0[0] + p * np.cos(psi), x0[1] + p * np.sin(psi), np.zeros(m)], axis=1)
        total += wp * p * (2.0 * math.pi / m) * float(np.sum(fn(pts)))
    return total


# -- energies -------------------------------------------------------------

def _at_origin(x0) -> bool:
    return not np.any(np.asarray(x0, dtype=float))


def _sq_values(u):
    return lambda s: u(s.nodes) ** 2


def _sq_grad(u):
    return lambda s: np.sum(u.sample(s.nodes)[1] ** 2, axis=1)


def boundary_mass(u: ScalarField, x0, r: float, quality: float | None = None) -> float:
    """``H(r) = int_{dB_r(x0)} u^2``."""
    _check_ball(u, x0, r)
    g = u.grid
    return sphere_integral(_sq_values(u), g.dim, x0, r, g.spacing, quality)


def dirichlet_energies(u: ScalarField, x0, radii, quality: float | None = None) -> np.ndarray:
    """``D(r) = int_{B_r(x0)} |grad u|^2`` at each radius."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    for r in radii:
        _check_ball(u, x0, r)
    g = u.grid
    lam = u.homogeneity
    if lam is not None and _at_origin(x0) and g.dim + 2 * lam - 2 > 0:
        s1 = sphere_integral(_sq_grad(u), g.dim, x0, 1.0, g.spacing, quality)
        p = g.dim + 2 * lam - 2
        return s1 * radii ** p / p
    return ball_integrals(_sq_grad(u), g.dim, x0, radii, g.spacing, quality)


def dirichlet_energy(u: ScalarField, x0, r: float, quality: float | None = None) -> float:
    return float(dirichlet_energies(u, x0, [r], quality)[0])


def h1_inner(u: ScalarField, v: ScalarField, quality: float | None = None) -> float:
    """``<u, v> = int_{B_1} (u v + grad u . grad v)``."""
    if u.grid != v.grid:
        raise ValueError("h1_inner needs fields on the same grid")
    g = u.grid
    zero = np.zeros(g.dim)
    a, b = u.homogeneity, v.homogeneity
    if a is not None and b is not None and a + b + g.dim - 2 > 0:
        def fn(s):
            uv, ug = u.sample(s.nodes)
            vv, vg = v.sample(s.nodes)
            return np.stack([uv * vv, np.einsum("ij,ij->i", ug, vg)])
        sm = sphere_sampling(g.dim, zero, 1.0, g.spacing, quality)
        l2, gr = (fn(sm) @ sm.weights)
        return float(l2 / (a + b + g.dim) + gr / (a + b + g.dim - 2))

    def integrand(s):
        uv, ug = u.sample(s.nodes)
        vv, vg = v.sample(s.nodes)
        return uv * vv + np.einsum("ij,ij->i", ug, vg)

    return float(ball_integrals(integrand, g.dim, zero, [1.0], g.spacing, quality)[0])


def h1_norm(u: ScalarField, quality: float | None = None) -> float:
    return math.sqrt(max(h1_inner(u, u, quality), 0.0))


def boundary_adjusted_energy(u: ScalarField, lam: float, quality: float | None = None) -> float:
    """``G_lam(u) = int_{B_1} |grad u|^2 - lam int_{dB_1} u^2``."""
    zero = np.zeros(u.grid.dim)
    return dirichlet_energy(u, zero, 1.0, quality) - lam * boundary_mass(u, zero, 1.0, quality)
