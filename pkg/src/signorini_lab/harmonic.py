"""Even harmonic 2m-homogeneous polynomials and the cone of those with nonnegative thin trace."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.optimize import lsq_linear, minimize_scalar

from .fields import Grid, ScalarField, from_function
from .quadrature import sphere_sampling

THIN_SAMPLES = 4096


class ConeViolation(ValueError):
    """A polynomial that should lie in the cone has a negative thin trace."""


def even_monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Exponents of degree ``degree`` with even power of ``x_n``, lexicographic."""
    out = []
    for a in itertools.product(range(degree + 1), repeat=dim):
        if sum(a) == degree and a[-1] % 2 == 0:
            out.append(a)
    return sorted(out, reverse=True)


def sphere_moment(alpha) -> float:
    """``int_{S^{n-1}} x^alpha``: zero unless every exponent is even."""
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    lg = sum(math.lgamma((a + 1) / 2.0) for a in alpha) - math.lgamma((sum(alpha) + n) / 2.0)
    return 2.0 * math.exp(lg)


def _laplacian_matrix(dim, degree):
    src = even_monomials(dim, degree)
    dst = even_monomials(dim, degree - 2)
    idx = {a: i for i, a in enumerate(dst)}
    L = sp.zeros(len(dst), len(src))
    for j, a in enumerate(src):
        for k in range(dim):
            if a[k] >= 2:
                b = list(a)
                b[k] -= 2
                L[idx[tuple(b)], j] += a[k] * (a[k] - 1)
    return L, src


def _basis(dim: int, m: int):
    if dim not in (2, 3) or m < 1:
        raise ValueError("need dim in {2, 3} and m >= 1")
    return harmonic_basis(dim, 2 * m)


@lru_cache(maxsize=None)
def harmonic_basis(dim: int, degree: int):
    """Monomials and sphere-orthonormal coefficient rows of the even harmonic
    polynomials of the given degree; harmonicity is checked in exact arithmetic."""
    if degree < 2:
        mons = even_monomials(dim, degree)
        V = np.eye(len(mons))
    else:
        L, mons = _laplacian_matrix(dim, degree)
        null = L.nullspace()
        for v in null:
            assert all(x == 0 for x in (L * v))
        V = np.array([[float(x) for x in v] for v in null])
    # Gram-Schmidt in L^2(S^{n-1})
    G = np.array([[sphere_moment(tuple(a + b for a, b in zip(p, q))) for q in mons] for p in mons])
    B = []
    for v in V:
        w = v.copy()
        for b in B:
            w -= (b @ G @ w) * b
        w /= math.sqrt(w @ G @ w)
        B.append(w)
    # sign convention: first nonzero monomial coefficient positive
    for k, w in enumerate(B):
        lead = w[np.flatnonzero(np.abs(w) > 1e-12)[0]]
        if lead < 0:
            B[k] = -w
    return tuple(mons), np.array(B)


def basis_H2m_hat(dim: int, m: int) -> list["Poly2m"]:
    """Orthonormal (on the unit sphere) basis of even harmonic 2m-homogeneous polynomials."""
    _, B = _basis(dim, m)
    return [Poly2m(dim, m, tuple(np.eye(len(B))[k])) for k in range(len(B))]


def _eval_monomials(mons, coeffs, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    val = np.zeros(len(x))
    grad = np.zeros_like(x)
    for a, c in zip(mons, coeffs):
        if c == 0.0:
            continue
        terms = [x[:, k] ** a[k] for k in range(n)]
        val += c * np.prod(terms, axis=0)
        for k in range(n):
            if a[k] == 0:
                continue
            d = a[k] * x[:, k] ** (a[k] - 1)
            other = np.prod([terms[j] for j in range(n) if j != k], axis=0) if n > 1 else 1.0
            grad[:, k] += c * d * other
    return val, grad


@dataclass(frozen=True)
class Poly2m:
    """``sum_k coeffs[k] p_k`` over ``basis_H2m_hat(dim, m)``."""

    dim: int
    m: int
    coeffs: tuple

    def __post_init__(self):
        _, B = _basis(self.dim, self.m)
        if len(self.coeffs) != len(B):
            raise ValueError(f"expected {len(B)} coefficients, got {len(self.coeffs)}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return 2 * self.m

    def monomial_coeffs(self) -> np.ndarray:
        _, B = _basis(self.dim, self.m)
        return np.asarray(self.coeffs) @ B

    def sample(self, x):
        mons, _ = _basis(self.dim, self.m)
        return _eval_monomials(mons, self.monomial_coeffs(), x)

    def __call__(self, x):
        return self.sample(x)[0]

    def field(self, grid: Grid) -> ScalarField:
        return from_function(grid, self.sample, float(2 * self.m))

    def trace(self, xhat):
        """Values on the thin plane at points ``xhat`` (``n - 1`` coordinates)."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        return self(np.column_stack([xhat, np.zeros(len(xhat))]))

    def sympy_expr(self):
        mons, _ = _basis(self.dim, self.m)
        xs = sp.symbols(f"x1:{self.dim + 1}")
        return sum(sp.Float(c) * sp.Mul(*[x ** a for x, a in zip(xs, mon)])
                   for mon, c in zip(mons, self.monomial_coeffs())), xs

    def to_json(self) -> dict:
        return {"basis": f"even-harmonic-sphere-orthonormal/dim{self.dim}/deg{2 * self.m}",
                "m": self.m, "dim": self.dim, "coefficients": list(self.coeffs)}

    @classmethod
    def from_json(cls, d: dict) -> "Poly2m":
        return cls(int(d["dim"]), int(d["m"]), tuple(d["coefficients"]))

    @classmethod
    def from_function(cls, dim: int, m: int, fn) -> "Poly2m":
        """Coefficients of a polynomial given by ``fn(points)`` (L^2(S) projection)."""
        _, B = _basis(dim, m)
        s = sphere_sampling(dim, np.zeros(dim), 1.0, 0.01, 2.0)
        basis_vals = np.array([p(s.nodes) for p in basis_H2m_hat(dim, m)])
        f = fn(s.nodes)
        return cls(dim, m, tuple(basis_vals @ (s.weights * f)))


def thin_sphere_points(dim: int, count: int = THIN_SAMPLES) -> np.ndarray:
    """Points of the unit sphere of the thin plane (``n - 1`` coordinates)."""
    if dim == 2:
        return np.array([[1.0], [-1.0]])
    th = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def _trace_min(psi: Poly2m):
    pts = thin_sphere_points(psi.dim)
    vals = psi.trace(pts)
    k = int(np.argmin(vals))
    tmin = float(vals[k])
    if psi.dim == 3:
        step = 2.0 * np.pi / len(pts)
        th0 = 2.0 * np.pi * k / len(pts)
        res = minimize_scalar(lambda t: float(psi.trace([[np.cos(t), np.sin(t)]])[0]),
                              bounds=(th0 - step, th0 + step), method="bounded",
                              options={"xatol": 1e-12})
        tmin = min(tmin, float(res.fun))
    return tmin, float(np.max(np.abs(vals)))


def stratum_dimension(psi: Poly2m) -> int:
    """``dim`` of the translation invariance space of the thin trace."""
    tmin, scale = _check_cone_member(psi)
    if psi.dim == 2:
        return 0
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(64, psi.dim))
    pts[:, -1] = 0.0
    grads = psi.sample(pts)[1][:, :-1]
    sv = np.linalg.svd(grads, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * max(sv[0], 1e-300)))
    return psi.dim - 1 - rank


def _check_cone_member(psi: Poly2m):
    if not np.any(np.asarray(psi.coeffs)):
        raise ConeViolation("the zero polynomial has no stratum")
    tmin, scale = _trace_min(psi)
    if scale == 0.0:
        # trace vanishes identically on the sample: still defined, highest stratum
        return tmin, scale
    if tmin < -1e-10 * scale:
        raise ConeViolation(f"thin trace is negative (min {tmin:.3e})")
    return tmin, scale


def is_lowest_stratum(psi: Poly2m, floor: float = 1e-8) -> bool:
    """True iff the thin trace is strictly positive away from the origin."""
    tmin, scale = _check_cone_member(psi)
    return scale > 0 and tmin > floor * scale


# -- projection onto the cone -------------------------------------------------

@dataclass
class Projection:
    poly: Poly2m
    multipliers: np.ndarray
    kkt_residual: float
    dist: float


def _gram(dim: int, m: int, spacing: float, quality):
    basis = basis_H2m_hat(dim, m)
    lam = 2.0 * m
    s = sphere_sampling(dim, np.zeros(dim), 1.0, spacing, quality)
    vals, grads = zip(*[p.sample(s.nodes) for p in basis])
    G = np.empty((len(basis), len(basis)))
    for i in range(len(basis)):
        for j in range(len(basis)):
            G[i, j] = (np.dot(s.weights, vals[i] * vals[j]) / (2 * lam + dim)
                       + np.dot(s.weights, np.einsum("ij,ij->i", grads[i], grads[j])) / (2 * lam + dim - 2))
    return basis, G


def project_H2m(c: ScalarField, m: int, quality: float | None = None) -> Projection:
    """H^1(B_1)-nearest point of the cone ``{psi : psi(x, 0) >= 0}``.

    The coefficient problem ``min |c - sum a_k p_k|^2`` subject to a
    nonnegative trace at the thin-sphere sample is solved exactly: with
    ``G = L L^T`` it becomes a projection onto a polyhedral cone, done by
    the Moreau decomposition with a nonnegative least-squares solve for the
    multipliers (bounded-variable least squares; the dual has thousands of
    nearly parallel columns, on which the Lawson-Hanson solver can stall).
    """
    from .blowups import H1Probe

    dim = c.grid.dim
    basis, G = _gram(dim, m, c.grid.spacing, quality)
    probe = H1Probe(c, float(2 * m), quality)
    b = np.array([probe.inner(p.sample) for p in basis])
    L = np.linalg.cholesky(G)
    y0 = np.linalg.solve(L, b)
    pts = thin_sphere_points(dim)
    T = np.array([p.trace(pts) for p in basis]).T
    A = np.linalg.solve(L, T.T).T  # T L^{-T}
    if np.all(A @ y0 >= 0):
        mu = np.zeros(len(pts))
        y = y0
    else:
        mu = lsq_linear(A.T, -y0, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
        y = y0 + A.T @ mu
    a = np.linalg.solve(L.T, y)
    cons = A @ y
    scale = max(np.linalg.norm(y0), 1e-300)
    kkt = max(float(np.max(np.maximum(-cons, 0.0))), float(np.abs(mu @ cons))) / scale
    d2 = probe.norm2 - 2.0 * a @ b + a @ G @ a
    return Projection(Poly2m(dim, m, tuple(a)), mu, kkt, math.sqrt(max(d2, 0.0)))
