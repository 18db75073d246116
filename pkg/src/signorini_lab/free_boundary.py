"""Coincidence set, free boundary, frequency classification, blowup frames and graph charts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .blowups import H1Probe, dist_to_cone32
from .fields import ScalarField, homogeneous_extension
from .monotonicity import default_small_radii, frequency_limit

REGULAR_SLACK = 0.05


def _field(sol) -> ScalarField:
    return sol.field if hasattr(sol, "field") else sol


def _plane_coords(u: ScalarField) -> list[np.ndarray]:
    ax = u.grid.axis()
    return np.meshgrid(*([ax] * (u.grid.dim - 1)), indexing="ij")


def _inside_ball(u: ScalarField) -> np.ndarray:
    return sum(c * c for c in _plane_coords(u)) < 1.0 - 1e-12


def coincidence_set(sol, zero_tol: Optional[float] = None) -> np.ndarray:
    """Thin-plane nodes of the open unit ball where ``u <= zero_tol``.

    ``zero_tol`` defaults to ten times the solver tolerance (``1e-9`` for a
    bare field).
    """
    u = _field(sol)
    if zero_tol is None:
        zero_tol = 10.0 * getattr(sol, "tol", 1e-10)
    return (u.plane_values() <= zero_tol) & _inside_ball(u)


@dataclass
class FreeBoundaryPoints:
    points: np.ndarray      # (k, n) points on the thin plane
    nodes: np.ndarray       # (k, n-1) index of the coincidence node of each point
    directions: np.ndarray  # (k, n-1) lattice direction of the crossing edge

    def __len__(self):
        return len(self.points)


def free_boundary_points(mask: np.ndarray, sol=None, zero_tol: Optional[float] = None) -> FreeBoundaryPoints:
    """Coincidence nodes with a noncoincidence neighbour in the ball, one point per
    crossing edge.

    With a solution the point is moved along the edge to the zero of the
    straight line through ``u^{2/3}`` at the first two positive nodes (exact
    for a ``3/2``-power profile); without one it stays at the node.
    """
    dim1 = mask.ndim
    if sol is not None:
        u = _field(sol)
        n = u.grid.resolution
        h = u.grid.spacing
        lo = -u.grid.radius
        plane = u.plane_values()
        inside = _inside_ball(u)
        if zero_tol is None:
            zero_tol = 10.0 * getattr(sol, "tol", 1e-10)
    else:
        n = mask.shape[0]
        h = 2.0 / (n - 1)
        lo = -1.0
        plane = None
        inside = np.ones_like(mask)
    pts, nodes, dirs = [], [], []
    idx = np.argwhere(mask)
    for node in idx:
        for ax in range(dim1):
            for sgn in (1, -1):
                nb = node.copy()
                nb[ax] += sgn
                if nb[ax] < 0 or nb[ax] >= n:
                    continue
                if mask[tuple(nb)] or not inside[tuple(nb)]:
                    continue
                t = 0.0
                if plane is not None:
                    nb2 = nb.copy()
                    nb2[ax] += sgn
                    u1 = plane[tuple(nb)]
                    if 0 <= nb2[ax] < n and plane[tuple(nb2)] > u1 > zero_tol:
                        a = u1 ** (2.0 / 3.0)
                        b = plane[tuple(nb2)] ** (2.0 / 3.0)
                        t = float(np.clip(1.0 - a / (b - a), 0.0, 1.0))
                x = lo + h * node.astype(float)
                x[ax] += sgn * t * h
                d = np.zeros(dim1)
                d[ax] = sgn
                pts.append(np.append(x, 0.0))
                nodes.append(node)
                dirs.append(d)
    if not pts:
        return FreeBoundaryPoints(np.zeros((0, dim1 + 1)), np.zeros((0, dim1), int), np.zeros((0, dim1)))
    return FreeBoundaryPoints(np.array(pts), np.array(nodes), np.array(dirs))


@dataclass
class TaggedPoint:
    point: np.ndarray
    frequency: float
    regular: bool
    monotone: bool
    skipped: bool = False
    notice: str = ""


def classify_points(sol, points, slack: float = REGULAR_SLACK, max_radius: float = 0.8,
                    radii=None) -> list[TaggedPoint]:
    """Frequency limit at each point; regular iff ``N(0+) <= 3/2 + slack``.

    Points beyond ``max_radius``, or whose radii do not fit inside the ball,
    are tagged as skipped.
    """
    u = _field(sol)
    out = []
    for p in np.atleast_2d(points):
        p = np.asarray(p, dtype=float)
        if np.linalg.norm(p) > max_radius:
            out.append(TaggedPoint(p, float("nan"), False, False, True,
                                   f"|x0| > {max_radius}: too close to the sphere"))
            continue
        rr = default_small_radii(u, p) if radii is None else np.asarray(radii, dtype=float)
        if rr[-1] > 1.0 - np.linalg.norm(p):
            out.append(TaggedPoint(p, float("nan"), False, False, True,
                                   "blow-up radii exceed the distance to the sphere"))
            continue
        fl = frequency_limit(u, p, rr)
        out.append(TaggedPoint(p, fl.value, bool(fl.value <= 1.5 + slack), fl.monotone))
    return out


@dataclass
class Frame:
    amplitude: float
    direction: np.ndarray
    dist: float
    rel_dist: float
    radius: float
    reliable: bool


def local_frame(sol, x0, r: Optional[float] = None, unreliable_above: float = 0.5,
                n_angles: int = 720) -> Frame:
    """``(lam*, e*)`` of the nearest ``3/2`` cone point to the homogeneous extension
    of ``u_r`` at ``x0``; ``r`` defaults to eight grid spacings."""
    u = _field(sol)
    x0 = np.asarray(x0, dtype=float)
    r = 8.0 * u.grid.spacing if r is None else float(r)
    c = homogeneous_extension(u, x0, r, 1.5)
    cd = dist_to_cone32(c, n_angles=n_angles)
    rel = cd.dist / cd.c_norm if cd.c_norm > 0 else float("inf")
    return Frame(cd.amplitude, cd.direction, cd.dist, rel, r, bool(rel <= unreliable_above and cd.amplitude > 0))


def refine_center(u: ScalarField, x0, r_ref: float, span: Optional[float] = None,
                  direction=None) -> np.ndarray:
    """Move ``x0`` along the thin plane to maximize ``W_{3/2}^{x0}(r_ref)``.

    A misplaced center lowers the Weiss energy at second order in the offset,
    so the maximizer is a sharper free-boundary location than a lattice edge.
    """
    from scipy.optimize import minimize_scalar

    from .monotonicity import radial_profile

    x0 = np.asarray(x0, dtype=float)
    h = u.grid.spacing
    span = h if span is None else span
    d = np.zeros_like(x0)
    if direction is None:
        d[0] = 1.0
    else:
        d[: len(direction)] = direction
        d /= np.linalg.norm(d)

    def negW(t):
        return -float(radial_profile(u, x0 + t * d, [r_ref]).W[0])

    res = minimize_scalar(negW, bounds=(-span, span), method="bounded", options={"xatol": 1e-4 * h})
    return x0 + float(res.x) * d


# -- charts ----------------------------------------------------------------------

@dataclass
class GraphFit:
    base_point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    xprime: np.ndarray
    g: np.ndarray
    holder_exponent: float
    holder_constant: float
    degenerate: bool
    spread_deg: float
    cone_pass_fraction: float
    cone_samples: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"base_point": self.base_point.tolist(), "normal": self.normal.tolist(),
                "tangent": self.tangent.tolist(), "xprime": self.xprime.tolist(),
                "g": self.g.tolist(), "holder_exponent": self.holder_exponent,
                "holder_constant": self.holder_constant, "degenerate": self.degenerate,
                "spread_deg": self.spread_deg, "cone_pass_fraction": self.cone_pass_fraction,
                "cone_samples": self.cone_samples, "flags": self.flags}


def _angle(a, b) -> float:
    return math.degrees(math.acos(float(np.clip(np.dot(a, b), -1.0, 1.0))))


def cone_condition(sol, x0, e, eps: float = 0.5, delta: float = 0.2,
                   zero_tol: Optional[float] = None, exclude: Optional[float] = None) -> tuple[int, int]:
    """Check ``u > 0`` on ``C^+(x0, eps) cap B_delta`` and ``u <= zero_tol`` on
    ``C^-(x0, eps) cap B_delta`` at the thin-plane lattice nodes, skipping
    nodes within ``exclude`` (two spacings) of ``x0``.  Returns (passed, total)."""
    u = _field(sol)
    if zero_tol is None:
        zero_tol = 10.0 * getattr(sol, "tol", 1e-10)
    exclude = 2.0 * u.grid.spacing if exclude is None else exclude
    coords = _plane_coords(u)
    X = np.stack([c.ravel() for c in coords], axis=1)
    vals = u.plane_values().ravel()
    x0 = np.asarray(x0, dtype=float)[:-1]
    e = np.asarray(e, dtype=float)[:-1]
    d = X - x0
    dist = np.linalg.norm(d, axis=1)
    inside = (dist <= delta) & (dist >= exclude) & (np.linalg.norm(X, axis=1) < 1.0)
    proj = d @ e
    plus = inside & (proj >= eps * dist)
    minus = inside & (-proj >= eps * dist)
    passed = int(np.sum(vals[plus] > zero_tol) + np.sum(vals[minus] <= zero_tol))
    return passed, int(plus.sum() + minus.sum())


def graph_fit(sol, points, frames: Sequence[Frame], eps: float = 0.5, delta: float = 0.2,
              zero_tol: Optional[float] = None, max_spread_deg: float = 45.0,
              direction_floor: float = 1e-2) -> GraphFit:
    """Express free-boundary points as a graph over the tangent line of the medoid frame.

    Also fits ``log |e(x) - e(y)| = log C + alpha log |x - y|`` over all pairs
    and checks the cone conditions at every point.  Directions that vary by
    less than ``direction_floor`` (about half a degree, the frame accuracy)
    make the fit degenerate.
    """
    u = _field(sol)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    E = np.array([f.direction for f in frames])
    flags = []
    if len(P) < 5:
        flags.append("fewer_than_5_points")
    if u.grid.dim == 2:
        flags.append("planar: free boundary is a set of isolated points")
    cosines = np.clip(E @ E.T, -1.0, 1.0)
    ang = np.arccos(cosines)
    k = int(np.argmin(ang.sum(axis=1)))
    base, normal = P[k], E[k]
    spread = float(np.degrees(ang[k].max())) if len(E) else 0.0
    if spread > max_spread_deg:
        flags.append("directions spread beyond 45 degrees: partition required")
    if u.grid.dim == 3:
        tangent = np.array([-normal[1], normal[0], 0.0])
    else:
        tangent = np.zeros(2)
    rel = P - base
    xprime = rel @ tangent
    g = rel @ normal
    order = np.argsort(xprime, kind="stable")
    xprime, g = xprime[order], g[order]
    # Hoelder fit of x -> e(x)
    iu = np.triu_indices(len(P), 1)
    dx = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)[iu]
    de = np.linalg.norm(E[:, None, :] - E[None, :, :], axis=2)[iu]
    keep = (dx > 0) & (de > 1e-9)
    if de.size and de.max() > direction_floor and keep.sum() >= 2 and np.ptp(np.log(dx[keep])) > 0:
        alpha, logc = np.polyfit(np.log(dx[keep]), np.log(de[keep]), 1)
        alpha, cst, degenerate = float(alpha), float(math.exp(logc)), False
    else:
        alpha, cst, degenerate = float("nan"), 0.0, True
    passed = total = 0
    for p, f in zip(P, frames):
        a, b = cone_condition(sol, p, f.direction, eps, delta, zero_tol)
        passed += a
        total += b
    frac = passed / total if total else 1.0
    return GraphFit(base, normal, tangent, xprime, g, alpha, cst, degenerate, spread, frac, total, flags)


@dataclass
class FreeBoundaryChart:
    mask: np.ndarray
    points: FreeBoundaryPoints
    tags: list
    frames: list
    graph: Optional[GraphFit]

    def to_dict(self) -> dict:
        return {
            "coincidence_nodes": int(self.mask.sum()),
            "points": self.points.points.tolist(),
            "tags": [{"point": t.point.tolist(), "frequency": t.frequency, "regular": t.regular,
                      "monotone": t.monotone, "skipped": t.skipped, "notice": t.notice}
                     for t in self.tags],
            "frames": [None if f is None else {"amplitude": f.amplitude, "direction": f.direction.tolist(),
                                               "dist": f.dist, "rel_dist": f.rel_dist,
                                               "reliable": f.reliable} for f in self.frames],
            "graph": None if self.graph is None else self.graph.to_dict(),
        }


def build_chart(sol, max_points: int = 40, zero_tol: Optional[float] = None) -> FreeBoundaryChart:
    """The whole pipeline: coincidence set, free boundary, tags, frames and graph."""
    mask = coincidence_set(sol, zero_tol)
    fb = free_boundary_points(mask, sol, zero_tol)
    pts = fb.points
    if len(pts) > max_points:
        sel = np.linspace(0, len(pts) - 1, max_points).round().astype(int)
        pts = pts[sel]
    tags = classify_points(sol, pts) if len(pts) else []
    frames = [local_frame(sol, t.point) if t.regular else None for t in tags]
    reg = [(t.point, f) for t, f in zip(tags, frames) if f is not None and f.reliable]
    graph = None
    if reg:
        graph = graph_fit(sol, [p for p, _ in reg], [f for _, f in reg], zero_tol=zero_tol)
    return FreeBoundaryChart(mask, fb, tags, frames, graph)
