"""The 3/2-homogeneous blowup cone, its tangent fields and the H^1 distance to it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fields import Grid, ScalarField, from_function
from .quadrature import _radial_nodes, sphere_sampling

SQRT2 = math.sqrt(2.0)


def _unit_dir(e, dim: int) -> np.ndarray:
    e = np.asarray(e, dtype=float).ravel()
    if e.size == dim - 1:
        e = np.append(e, 0.0)
    if e.size != dim:
        raise ValueError(f"direction must have {dim - 1} or {dim} components")
    if e[-1] != 0.0:
        raise ValueError("direction must lie in the thin plane (e_n component 0)")
    nrm = np.linalg.norm(e)
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector, |e| = {nrm}")
    return e


def direction_from_angle(theta: float, dim: int) -> np.ndarray:
    """Unit thin-plane direction; for ``dim == 2`` only ``cos(theta)`` sign matters."""
    if dim == 2:
        return np.array([1.0 if math.cos(theta) >= 0 else -1.0, 0.0])
    return np.array([math.cos(theta), math.sin(theta), 0.0])


def _st(e, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = x[:, :-1] @ e[:-1]
    t = np.abs(x[:, -1])
    rho = np.hypot(s, t)
    return x, s, t, rho


def eval_h(e, x) -> np.ndarray:
    """``h_e(x) = (2s - rho) sqrt(rho + s)`` with ``s = x.e``, ``rho = |(s, x_n)|``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = _unit_dir(e, x.shape[1])
    _, s, _, rho = _st(e, x)
    return (2.0 * s - rho) * np.sqrt(np.maximum(rho + s, 0.0))


def eval_grad_h(e, x) -> np.ndarray:
    """Gradient of ``h_e``; on the thin plane the ``x_n`` component is the ``0+`` limit."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = _unit_dir(e, x.shape[1])
    _, s, _, rho = _st(e, x)
    sg = np.where(x[:, -1] < 0.0, -1.0, 1.0)
    g = 1.5 * np.sqrt(np.maximum(rho + s, 0.0))[:, None] * e[None, :]
    g[:, -1] = -1.5 * np.sqrt(np.maximum(rho - s, 0.0)) * sg
    return g


def normal_derivative_h(e, xhat) -> np.ndarray:
    """One-sided limit ``d h_e / d x_n (xhat, 0+) = -(3/sqrt 2) |xhat.e|^{1/2}`` where ``xhat.e < 0``."""
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    e = np.asarray(e, dtype=float).ravel()
    s = xhat @ e[: xhat.shape[1]]
    return np.where(s < 0.0, -(3.0 / SQRT2) * np.sqrt(np.abs(s)), 0.0)


def eval_tangent(e, xi, x) -> tuple[np.ndarray, np.ndarray]:
    """``v_{e,xi}(x) = (x.xi) sqrt(rho + s)`` and its gradient."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dim = x.shape[1]
    e = _unit_dir(e, dim)
    xi = _unit_dir(xi, dim)
    if abs(xi @ e) > 1e-12:
        raise ValueError("xi must be orthogonal to e")
    _, s, _, rho = _st(e, x)
    a = x @ xi
    sp = np.sqrt(np.maximum(rho + s, 0.0))
    sm = np.sqrt(np.maximum(rho - s, 0.0))
    sg = np.where(x[:, -1] < 0.0, -1.0, 1.0)
    safe = np.where(rho > 0, rho, 1.0)
    dsq = (sp[:, None] * e[None, :]) / (2.0 * safe[:, None])
    dsq[:, -1] = sm * sg / (2.0 * safe)
    dsq[rho == 0] = 0.0
    grad = sp[:, None] * xi[None, :] + a[:, None] * dsq
    return a * sp, grad


@dataclass(frozen=True)
class BlowupProfile:
    """Element ``amplitude * h_e`` of the 3/2-homogeneous cone."""

    amplitude: float
    direction: tuple

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        e = _unit_dir(self.direction, len(self.direction))
        object.__setattr__(self, "direction", tuple(float(v) for v in e))

    @property
    def dim(self) -> int:
        return len(self.direction)

    def sample(self, x):
        e = np.array(self.direction)
        return self.amplitude * eval_h(e, x), self.amplitude * eval_grad_h(e, x)

    def field(self, grid: Grid) -> ScalarField:
        return from_function(grid, self.sample, 1.5)

    def to_json(self) -> dict:
        return {"lambda": self.amplitude, "e": list(self.direction)}

    @classmethod
    def from_json(cls, d: dict) -> "BlowupProfile":
        return cls(float(d["lambda"]), tuple(d["e"]))


def h_field(grid: Grid, e=None, amplitude: float = 1.0) -> ScalarField:
    e = np.eye(grid.dim)[0] if e is None else e
    return BlowupProfile(amplitude, tuple(np.asarray(e, float))).field(grid)


def tangent_field(grid: Grid, e, xi) -> ScalarField:
    e = np.asarray(e, float)
    xi = np.asarray(xi, float)
    return from_function(grid, lambda p: eval_tangent(e, xi, p), 1.5)


def transverse_directions(e) -> list[np.ndarray]:
    """Orthonormal basis of ``{e, e_n}^perp``."""
    e = np.asarray(e, float)
    dim = e.size
    if dim == 2:
        return []
    return [np.array([-e[1], e[0], 0.0])]


def tangent_basis32(e, grid: Grid) -> list[ScalarField]:
    """``[h_e, v_{e,xi_1}, ...]`` spanning the tangent space at ``lam h_e``."""
    e = _unit_dir(e, grid.dim)
    return [h_field(grid, e)] + [tangent_field(grid, e, xi) for xi in transverse_directions(e)]


# -- H^1 geometry -----------------------------------------------------------

class H1Probe:
    """Quadrature of ``<c, f>_{H^1(B_1)}`` for a fixed field ``c``.

    ``c`` is sampled once.  If ``c`` is homogeneous of degree ``lam`` and the
    probing functions are homogeneous of degree ``mu``, the ball integrals
    reduce to the unit sphere.
    """

    def __init__(self, c: ScalarField, mu: float | None = 1.5, quality: float | None = None):
        g = c.grid
        self.dim = g.dim
        zero = np.zeros(g.dim)
        lam = c.homogeneity
        self.spacing = g.spacing
        self.quality = quality
        self.radial = not (lam is not None and mu is not None and lam + mu + g.dim - 2 > 0)
        self.same_degree = not self.radial and lam == mu
        if not self.radial:
            s = sphere_sampling(g.dim, zero, 1.0, g.spacing, quality)
            self.nodes = s.nodes
            self.wv = s.weights / (lam + mu + g.dim)
            self.wg = s.weights / (lam + mu + g.dim - 2)
        else:
            rho, wr, _ = _radial_nodes([1.0], g.spacing)
            nodes, wts = [], []
            for p, wp in zip(rho, wr):
                s = sphere_sampling(g.dim, zero, p, g.spacing, quality)
                nodes.append(s.nodes)
                wts.append(wp * s.weights)
            self.nodes = np.concatenate(nodes)
            self.wv = self.wg = np.concatenate(wts)
        self.cv, self.cg = c.sample(self.nodes)
        self.norm2 = self.inner_arrays(self.cv, self.cg)

    def inner_arrays(self, v, g) -> float:
        return float(np.dot(self.wv, self.cv * v) + np.dot(self.wg, np.einsum("ij,ij->i", self.cg, g)))

    def inner(self, fn) -> float:
        v, g = fn(self.nodes)
        return self.inner_arrays(v, g)

    def pair(self, fn1, fn2) -> float:
        v1, g1 = fn1(self.nodes)
        v2, g2 = fn2(self.nodes)
        return float(np.dot(self.wv, v1 * v2) + np.dot(self.wg, np.einsum("ij,ij->i", g1, g2)))

    def norm2_of(self, fn, mu: float = 1.5) -> float:
        """``|f|^2`` for a probing function, with this probe's nodes when they apply."""
        if self.radial or self.same_degree:
            return self.pair(fn, fn)
        s = sphere_sampling(self.dim, np.zeros(self.dim), 1.0, self.spacing, self.quality)
        v, g = fn(s.nodes)
        return float(np.dot(s.weights, v * v) / (2 * mu + self.dim)
                     + np.dot(s.weights, np.sum(g * g, axis=1)) / (2 * mu + self.dim - 2))


def _h_sampler(e):
    return lambda p: (eval_h(e, p), eval_grad_h(e, p))


@dataclass
class ConeDistance:
    amplitude: float
    direction: np.ndarray
    dist: float
    c_norm: float

    def __iter__(self):
        return iter((self.amplitude, self.direction, self.dist))


def dist_to_cone32(c: ScalarField, n_angles: int = 720, quality: float | None = None,
                   probe: H1Probe | None = None) -> ConeDistance:
    """Nearest point ``lam h_e`` to ``c`` in ``H^1(B_1)`` and the distance.

    For each ``e`` the optimal amplitude is ``max(0, <c,h_e>/<h_e,h_e>)``, so
    the search maximizes ``<c,h_e>/|h_e|`` over the directions of the thin
    plane: the two points ``+-e_1`` when ``n = 2``, a circle of angles when
    ``n = 3`` (coarse grid, then bounded Brent polish).  Ties, including
    ``c = 0``, resolve to ``e_1``.
    """
    dim = c.grid.dim
    probe = probe or H1Probe(c, 1.5, quality)
    hn2 = probe.norm2_of(_h_sampler(np.eye(dim)[0]))

    def score(theta):
        e = direction_from_angle(theta, dim)
        return probe.inner(_h_sampler(e))

    if dim == 2:
        cand = [0.0, math.pi]
        scores = [score(t) for t in cand]
        k = int(np.argmax(scores))
        theta = cand[k]
        best = scores[k]
    else:
        cand = 2.0 * math.pi * np.arange(n_angles) / n_angles
        scores = np.array([score(t) for t in cand])
        k = int(np.argmax(scores))
        theta, best = float(cand[k]), float(scores[k])
        if best > 0:
            step = 2.0 * math.pi / n_angles
            res = minimize_scalar(lambda t: -score(t), bounds=(theta - step, theta + step),
                                  method="bounded", options={"xatol": 1e-10})
            if -res.fun >= best:
                theta, best = float(res.x), float(-res.fun)
            theta = math.remainder(theta, 2.0 * math.pi)
    tiny = 1e-14 * max(probe.norm2, 1e-300)
    if best <= tiny:
        e = np.eye(dim)[0]
        lam = 0.0
        d2 = probe.norm2
    else:
        e = direction_from_angle(theta, dim)
        lam = best / hn2
        d2 = probe.norm2 - 2.0 * lam * best + lam * lam * hn2
    return ConeDistance(float(lam), e, math.sqrt(max(d2, 0.0)), math.sqrt(max(probe.norm2, 0.0)))


def exact_profile_2d(kind, x) -> tuple[np.ndarray, np.ndarray]:
    """Exact homogeneous global solutions in the plane.

    ``kind`` is a frequency.  For ``kind`` in ``{3/2, 7/2, 11/2, ...}`` this
    is the even extension of ``Re[(x_1 + i|x_2|)^kind]``, whose thin trace is
    nonnegative and whose one-sided normal derivative is nonpositive.  (The
    frequencies 5/2, 9/2, ... give no such sign pattern and are rejected.)  An
    even integer ``2m`` gives the polynomial ``Re[(x_1 + i x_2)^{2m}]``.
    Returns values and gradients.
    """
    k = float(kind)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 2:
        raise ValueError("exact profiles are planar")
    z = x[:, 0] + 1j * np.abs(x[:, 1])
    sg = np.where(x[:, 1] < 0.0, -1.0, 1.0)
    if k == round(k) and int(k) % 2 == 0 and k >= 2:
        n = int(k)
        zz = x[:, 0] + 1j * x[:, 1]
        d = n * zz ** (n - 1)
        return np.real(zz ** n), np.stack([np.real(d), -np.imag(d)], axis=1)
    two_k = int(round(2 * k))
    if two_k == 2 * k and two_k % 4 == 3:
        # k = 3/2, 7/2, 11/2, ...: the trace vanishes on x_1 < 0 and the one-sided
        # normal derivative there is k |x_1|^{k-1} sin(k pi) = -k |x_1|^{k-1}
        d = k * z ** (k - 1)
        return np.real(z ** k), np.stack([np.real(d), -np.imag(d) * sg], axis=1)
    raise ValueError(f"unsupported frequency {kind!r}: use 2m or 3/2, 7/2, 11/2, ...")
