"""Projected SOR for the discrete Signorini problem on the half box ``x_n >= 0``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .fields import Grid, ScalarField


class InfeasibleDatum(ValueError):
    """Boundary datum negative on the thin plane where it is imposed."""


@dataclass(frozen=True, eq=False)
class SignoriniProblem:
    """Dirichlet datum ``w`` (a field on the whole box) and the thin constraint.

    Nodes with ``|x| >= 1`` form the fixed collar and take the values of
    ``w``; the unknowns are the nodes of the open unit ball.
    """

    grid: Grid
    datum: ScalarField

    def __post_init__(self):
        if self.datum.grid != self.grid:
            raise ValueError("datum lives on a different grid")
        if self.grid.radius < 1.0:
            raise ValueError("the grid box must contain the closed unit ball")
        if not self.datum.is_even(atol=1e-12 * max(1.0, float(np.max(np.abs(self.datum.values))))):
            raise ValueError("datum must be even in x_n")

    def fixed_mask(self) -> np.ndarray:
        r2 = sum(c * c for c in self.grid.coords())
        return r2 >= 1.0 - 1e-12

    def check_feasible(self) -> None:
        fixed = np.take(self.fixed_mask(), self.grid.mid, axis=-1)
        trace = self.datum.plane_values()[fixed]
        scale = max(1.0, float(np.max(np.abs(self.datum.values))))
        if trace.size and trace.min() < -1e-12 * scale:
            raise InfeasibleDatum(
                f"datum is negative on the thin plane outside the ball (min {trace.min():.3e})")


@dataclass(eq=False)
class Solution:
    field: ScalarField
    iterations: int
    final_update: float
    converged: bool
    omega: float
    tol: float
    energy_history: Optional[np.ndarray] = None
    problem: Optional[SignoriniProblem] = field(default=None, repr=False)

    def report(self) -> dict:
        kkt = kkt_residuals(self)
        return {"iterations": self.iterations, "final_update": self.final_update,
                "converged": self.converged, "omega": self.omega, "tol": self.tol,
                "kkt": kkt.to_dict()}


@njit(cache=True)
def _sweep2(U, fixed, omega, parity):
    # U: (N, M) half-domain, column 0 is the thin plane
    n, m = U.shape
    du = 0.0
    for i in range(1, n - 1):
        for j in range(0, m - 1):
            if fixed[i, j]:
                continue
            if parity >= 0 and (i + j) % 2 != parity:
                continue
            below = U[i, j - 1] if j > 0 else U[i, j + 1]
            avg = 0.25 * (U[i - 1, j] + U[i + 1, j] + U[i, j + 1] + below)
            old = U[i, j]
            new = old + omega * (avg - old)
            if j == 0 and new < 0.0:
                new = 0.0
            d = abs(new - old)
            if d > du:
                du = d
            U[i, j] = new
    return du


@njit(cache=True)
def _sweep3(U, fixed, omega, parity):
    n, _, m = U.shape
    du = 0.0
    sixth = 1.0 / 6.0
    for i in range(1, n - 1):
        for k in range(1, n - 1):
            for j in range(0, m - 1):
                if fixed[i, k, j]:
                    continue
                if parity >= 0 and (i + k + j) % 2 != parity:
                    continue
                below = U[i, k, j - 1] if j > 0 else U[i, k, j + 1]
                avg = sixth * (U[i - 1, k, j] + U[i + 1, k, j] + U[i, k - 1, j]
                               + U[i, k + 1, j] + U[i, k, j + 1] + below)
                old = U[i, k, j]
                new = old + omega * (avg - old)
                if j == 0 and new < 0.0:
                    new = 0.0
                d = abs(new - old)
                if d > du:
                    du = d
                U[i, k, j] = new
    return du


@njit(cache=True)
def _run2(U, fixed, omega, tol, max_iters, red_black):
    it = 0
    du = np.inf
    while it < max_iters:
        if red_black:
            du = max(_sweep2(U, fixed, omega, 0), _sweep2(U, fixed, omega, 1))
        else:
            du = _sweep2(U, fixed, omega, -1)
        it += 1
        if du < tol:
            break
    return it, du


@njit(cache=True)
def _run3(U, fixed, omega, tol, max_iters, red_black):
    it = 0
    du = np.inf
    while it < max_iters:
        if red_black:
            du = max(_sweep3(U, fixed, omega, 0), _sweep3(U, fixed, omega, 1))
        else:
            du = _sweep3(U, fixed, omega, -1)
        it += 1
        if du < tol:
            break
    return it, du


def optimal_omega(resolution: int) -> float:
    """SOR parameter optimal for the Laplacian on a square of this resolution."""
    return 2.0 / (1.0 + math.sin(math.pi / (resolution - 1)))


def mirror(half: np.ndarray) -> np.ndarray:
    """Even extension of a half-domain array (last axis starts at the plane)."""
    return np.concatenate([np.flip(half[..., 1:], axis=-1), half], axis=-1)


def discrete_energy(values: np.ndarray, fixed: np.ndarray, spacing: float) -> float:
    """``sum (du)^2 h^{n-2}`` over lattice edges touching an unknown node."""
    dim = values.ndim
    free = ~fixed
    total = 0.0
    for ax in range(dim):
        d = np.diff(values, axis=ax)
        sl_a = [slice(None)] * dim
        sl_b = [slice(None)] * dim
        sl_a[ax] = slice(0, -1)
        sl_b[ax] = slice(1, None)
        touch = free[tuple(sl_a)] | free[tuple(sl_b)]
        total += float(np.sum(d[touch] ** 2))
    return total * spacing ** (dim - 2)


def solve(problem: SignoriniProblem, tol: float = 1e-10, max_iters: Optional[int] = None,
          omega: float = 1.8, red_black: bool = False, initial: str | np.ndarray = "datum",
          record_energy: bool = False) -> Solution:
    """Projected SOR: relax to the discrete harmonic average, clamp thin nodes at 0.

    The sweep runs on ``x_n >= 0``; the node below the plane is the mirror
    image of the node above, so unclamped plane nodes satisfy the even
    (zero normal derivative) condition.  Iteration stops once the largest
    nodal update of a sweep drops below ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 1.0 <= omega < 2.0:
        raise ValueError("omega must lie in [1, 2)")
    problem.check_feasible()
    g = problem.grid
    max_iters = 200 * g.resolution if max_iters is None else int(max_iters)
    mid = g.mid
    fixed_full = problem.fixed_mask()
    fixed = np.ascontiguousarray(fixed_full[..., mid:])
    w = problem.datum.values[..., mid:]
    if isinstance(initial, str):
        if initial == "datum":
            U = np.array(w, dtype=float)
        elif initial == "zero":
            U = np.where(fixed, w, 0.0)
        else:
            raise ValueError(f"unknown initial guess {initial!r}")
    else:
        U = np.array(np.asarray(initial, dtype=float)[..., mid:])
        U[fixed] = w[fixed]
    plane = U[..., 0]
    plane[~fixed[..., 0]] = np.maximum(plane[~fixed[..., 0]], 0.0)
    U = np.ascontiguousarray(U)

    history = None
    run = _run2 if g.dim == 2 else _run3
    if record_energy:
        energies = [discrete_energy(mirror(U), fixed_full, g.spacing)]
        it, du = 0, np.inf
        while it < max_iters:
            k, du = run(U, fixed, omega, tol, 1, red_black)
            it += k
            energies.append(discrete_energy(mirror(U), fixed_full, g.spacing))
            if du < tol:
                break
        history = np.array(energies)
    else:
        it, du = run(U, fixed, omega, tol, max_iters, red_black)
    full = mirror(U)
    return Solution(ScalarField(g, full), int(it), float(du), bool(du < tol), omega, tol,
                    history, problem)


# -- complementarity -----------------------------------------------------------

def plane_normal_derivative(values: np.ndarray, spacing: float) -> np.ndarray:
    """Scheme-consistent one-sided ``du/dx_n(., 0+)`` at thin-plane nodes.

    Half the jump of the discrete Laplacian across the plane:
    ``(2 (u_1 - u_0) + sum_t (tangential second difference)) / (2 h)``.
    It vanishes exactly where the discrete equation holds.  Box-face nodes
    get ``nan``.
    """
    mid = (values.shape[-1] - 1) // 2
    u0 = values[..., mid]
    u1 = values[..., mid + 1]
    out = np.full(u0.shape, np.nan)
    inner = tuple(slice(1, -1) for _ in range(u0.ndim))
    acc = 2.0 * (u1 - u0)
    tang = np.zeros_like(u0)
    for ax in range(u0.ndim):
        lo = [slice(1, -1)] * u0.ndim
        hi = [slice(1, -1)] * u0.ndim
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        tang[inner] += u0[tuple(lo)] - 2.0 * u0[inner] + u0[tuple(hi)]
    out[inner] = (acc[inner] + tang[inner]) / (2.0 * spacing)
    return out


@dataclass
class ComplementarityReport:
    min_u: float
    max_dn: float
    max_product: float
    max_interior_residual: float
    n_plane_nodes: int
    feasible: bool
    sign_ok: bool

    @property
    def ok(self) -> bool:
        return self.feasible and self.sign_ok

    def to_dict(self) -> dict:
        return {"min_u": self.min_u, "max_dn": self.max_dn, "max_product": self.max_product,
                "max_interior_residual": self.max_interior_residual,
                "n_plane_nodes": self.n_plane_nodes, "feasible": self.feasible,
                "sign_ok": self.sign_ok}


def kkt_residuals(sol, dn_tol: float = 1e-6, fixed: Optional[np.ndarray] = None) -> ComplementarityReport:
    """``u >= 0``, ``du/dx_n(0+) <= 0`` and ``u du/dx_n = 0`` over thin nodes in ``B_1``.

    ``sol`` is a :class:`Solution` or a bare :class:`ScalarField`.
    """
    u = sol.field if isinstance(sol, Solution) else sol
    g = u.grid
    vals = u.values
    if fixed is None:
        fixed = sum(c * c for c in g.coords()) >= 1.0 - 1e-12
    free_plane = ~np.take(fixed, g.mid, axis=-1)
    u0 = u.plane_values()[free_plane]
    dn = plane_normal_derivative(vals, g.spacing)[free_plane]
    # discrete harmonic residual at free interior nodes
    lap = np.zeros_like(vals)
    inner = tuple(slice(1, -1) for _ in range(g.dim))
    for ax in range(g.dim):
        lo = [slice(1, -1)] * g.dim
        hi = [slice(1, -1)] * g.dim
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        lap[inner] += vals[tuple(lo)] + vals[tuple(hi)] - 2.0 * vals[inner]
    off = np.ones(vals.shape, dtype=bool)
    idx = [slice(None)] * g.dim
    idx[-1] = g.mid
    off[tuple(idx)] = False
    interior = off & ~fixed
    res = float(np.max(np.abs(lap[interior]))) / (2 * g.dim) if np.any(interior) else 0.0
    min_u = float(u0.min()) if u0.size else 0.0
    max_dn = float(np.nanmax(dn)) if dn.size else 0.0
    prod = float(np.nanmax(np.abs(u0 * dn))) if u0.size else 0.0
    return ComplementarityReport(min_u, max_dn, prod, res, int(u0.size),
                                 min_u >= -1e-12, max_dn <= dn_tol)
