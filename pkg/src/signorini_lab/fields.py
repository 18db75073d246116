"""Grids and even scalar fields on a box containing the unit ball."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .interp import sample_grid

Sampler = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class DomainError(ValueError):
    """A ball or sample point falls outside the grid box."""


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on the cube ``[-radius, radius]^dim``.

    The resolution is odd so that every coordinate plane ``{x_i = 0}``, in
    particular the thin plane ``{x_n = 0}``, is a grid plane.
    """

    dim: int
    resolution: int
    radius: float = 1.0

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / (self.resolution - 1)

    @property
    def mid(self) -> int:
        return (self.resolution - 1) // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dim

    def axis(self) -> np.ndarray:
        return -self.radius + self.spacing * np.arange(self.resolution)

    def coords(self) -> list[np.ndarray]:
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dim), indexing="ij")

    def points(self) -> np.ndarray:
        """All lattice points as an ``(N, dim)`` array in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def plane_points(self) -> np.ndarray:
        """Lattice points of the thin plane, shape ``(N**(dim-1), dim)``."""
        ax = self.axis()
        tang = np.meshgrid(*([ax] * (self.dim - 1)), indexing="ij")
        cols = [t.ravel() for t in tang] + [np.zeros(tang[0].size)]
        return np.stack(cols, axis=1)

    def contains_ball(self, x0, r: float) -> bool:
        x0 = np.asarray(x0, dtype=float)
        return bool(np.all(np.abs(x0) + r <= self.radius + 1e-12))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "resolution": self.resolution, "radius": self.radius}


def make_grid(dim: int, resolution: int, radius: float = 1.0) -> Grid:
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if resolution % 2 == 0:
        raise ValueError(
            f"resolution must be odd so the thin plane x_n = 0 is a grid plane (got {resolution})"
        )
    if resolution < 17:
        raise ValueError(f"resolution must be at least 17, got {resolution}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return Grid(dim, int(resolution), float(radius))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of an even function on a :class:`Grid`.

    ``sampler`` optionally evaluates the underlying function exactly (closed
    forms, or compositions such as rescalings); when absent, point values
    come from the cubic interpolant of ``values``.  ``homogeneity`` records a
    degree ``lam`` with ``f(t x) = t**lam f(x)``, used by the quadrature to
    reduce ball integrals to the unit sphere.
    """

    grid: Grid
    values: np.ndarray
    homogeneity: Optional[float] = None
    sampler: Optional[Sampler] = field(default=None, repr=False)
    order: int = 3

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def sample(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients at ``points`` (shape ``(M, dim)``)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.sampler is not None:
            return self.sampler(points)
        r = self.grid.radius
        if np.any(np.abs(points) > r + 1e-9):
            raise DomainError("sample point outside the grid box")
        return sample_grid(self.values, -r, self.grid.spacing, points, self.order)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.sample(points)[0]

    def plane_values(self) -> np.ndarray:
        return np.take(self.values, self.grid.mid, axis=-1)

    def is_even(self, atol: float = 0.0) -> bool:
        return bool(np.allclose(self.values, np.flip(self.values, axis=-1), rtol=0.0, atol=atol))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def scaled(self, alpha: float) -> "ScalarField":
        sampler = None
        if self.sampler is not None:
            inner = self.sampler

            def sampler(p):
                v, g = inner(p)
                return alpha * v, alpha * g

        return ScalarField(self.grid, alpha * self.values, self.homogeneity, sampler, self.order)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return combine([(1.0, self), (-1.0, other)])


def combine(terms: list[tuple[float, ScalarField]]) -> ScalarField:
    """Linear combination ``sum a_k f_k`` of fields on a common grid."""
    grid = terms[0][1].grid
    for _, f in terms:
        if f.grid != grid:
            raise ValueError("grid mismatch")
    values = sum(a * f.values for a, f in terms)
    homs = {f.homogeneity for _, f in terms}
    hom = homs.pop() if len(homs) == 1 else None

    def sampler(p):
        v = np.zeros(len(p))
        g = np.zeros((len(p), grid.dim))
        for a, f in terms:
            fv, fg = f.sample(p)
            v += a * fv
            g += a * fg
        return v, g

    exact = any(f.sampler is not None for _, f in terms)
    return ScalarField(grid, values, hom, sampler if exact else None, terms[0][1].order)


def from_function(grid: Grid, fn: Sampler, homogeneity: Optional[float] = None) -> ScalarField:
    """Field whose point values come from ``fn`` (returning values, gradients)."""
    vals, _ = fn(grid.points())
    return ScalarField(grid, vals.reshape(grid.shape), homogeneity, fn)


def constant(grid: Grid, value: float) -> ScalarField:
    def fn(p):
        return np.full(len(p), float(value)), np.zeros((len(p), grid.dim))

    return from_function(grid, fn, 0.0 if value != 0 else None)


def linear(grid: Grid, coeffs) -> ScalarField:
    a = np.asarray(coeffs, dtype=float)

    def fn(p):
        return p @ a, np.broadcast_to(a, p.shape).copy()

    return from_function(grid, fn, 1.0)


def _check_map(u: ScalarField, x0: np.ndarray, r: float):
    if r <= 0:
        raise ValueError("radius must be positive")
    if not u.grid.contains_ball(x0, r):
        raise DomainError(f"ball B_{r}({x0.tolist()}) is not contained in the grid box")


def rescale(u: ScalarField, x0, r: float, lambda_hom: float, grid: Optional[Grid] = None) -> ScalarField:
    """The rescaling ``u_r(x) = u(x0 + r x) / r**lambda_hom``.

    Grid values are taken at ``x0 + r x``; preimages that leave the box are
    clamped to it (only the unit ball is meaningful).
    """
    x0 = np.asarray(x0, dtype=float)
    _check_map(u, x0, r)
    grid = grid or u.grid
    box = u.grid.radius
    scale = r ** lambda_hom

    def sampler(p):
        q = np.clip(x0 + r * p, -box, box)
        v, g = u.sample(q)
        return v / scale, g * (r / scale)

    vals, _ = sampler(grid.points())
    return ScalarField(grid, vals.reshape(grid.shape), None, sampler, u.order)


def homogeneous_extension(u: ScalarField, x0, r: float, lambda_hom: float,
                          grid: Optional[Grid] = None) -> ScalarField:
    """The ``lambda_hom``-homogeneous field equal to ``u_r`` on the unit sphere.

    ``c(x) = |x|**lam * u(x0 + r x/|x|) / r**lam``, with ``c(0) = 0``.
    """
    x0 = np.asarray(x0, dtype=float)
    _check_map(u, x0, r)
    grid = grid or u.grid
    lam = float(lambda_hom)
    scale = r ** lam

    def sampler(p):
        rho = np.linalg.norm(p, axis=1)
        safe = np.where(rho > 0, rho, 1.0)
        theta = p / safe[:, None]
        v, g = u.sample(x0 + r * theta)
        g = g * r
        # tangential part of the trace gradient, radial part from homogeneity
        gr = np.einsum("ij,ij->i", g, theta)
        gt = g - gr[:, None] * theta
        val = rho ** lam * v / scale
        grad = (lam * rho ** (lam - 1.0) * v)[:, None] * theta + (rho ** (lam - 1.0))[:, None] * gt
        grad = grad / scale
        zero = rho == 0
        val[zero] = 0.0
        grad[zero] = 0.0
        return val, grad

    vals, _ = sampler(grid.points())
    return ScalarField(grid, vals.reshape(grid.shape), lam, sampler, u.order)


# -- serialization ---------------------------------------------------------

_HEADER = struct.Struct("<iid")


def save_field(u: ScalarField, path, metadata: Optional[dict] = None) -> None:
    """Write ``path`` (binary) and ``path.json`` (sidecar metadata).

    Binary layout: little-endian int32 dim, int32 resolution, float64
    radius, then the values as row-major float64.
    """
    path = Path(path)
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dim, g.resolution, g.radius))
        fh.write(np.asarray(u.values, dtype="<f8").tobytes(order="C"))
    meta = {"grid": g.to_dict(), "spacing": g.spacing, "even": True,
            "homogeneity": u.homogeneity, "layout": "header <iid> then row-major <f8"}
    if metadata:
        meta.update(metadata)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    dim, res, radius = _HEADER.unpack_from(raw, 0)
    grid = make_grid(dim, res, radius)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != res ** dim:
        raise ValueError("truncated field file")
    return ScalarField(grid, vals.reshape(grid.shape).copy())


def export_csv(path, fields: dict[str, ScalarField]) -> None:
    """Coordinates plus one value column per named field."""
    items = list(fields.items())
    grid = items[0][1].grid
    pts = grid.points()
    names = ["x%d" % (i + 1) for i in range(grid.dim)] + [k for k, _ in items]
    cols = [pts[:, i] for i in range(grid.dim)] + [f.values.ravel() for _, f in items]
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
