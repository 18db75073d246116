import math

import numpy as np
import pytest
import sympy as sp

from signorini_lab.fields import from_function, make_grid
from signorini_lab.harmonic import (ConeViolation, Poly2m, basis_H2m_hat, is_lowest_stratum,
                                    project_H2m, stratum_dimension)
from signorini_lab.quadrature import h1_inner


def test_basis_dimensions():
    assert len(basis_H2m_hat(2, 1)) == 1
    assert len(basis_H2m_hat(2, 2)) == 1
    # even harmonic quadratics in 3 variables: x1^2 - x2^2, x1^2 - x3^2 and x1 x2
    assert len(basis_H2m_hat(3, 1)) == 3


def test_planar_quadratic_is_x1sq_minus_x2sq():
    p = basis_H2m_hat(2, 1)[0]
    x = np.random.default_rng(0).normal(size=(20, 2))
    ratio = p(x) / (x[:, 0] ** 2 - x[:, 1] ** 2)
    assert np.ptp(ratio) < 1e-12 and ratio[0] > 0


@pytest.mark.parametrize("dim,m", [(2, 1), (2, 2), (3, 1), (3, 2)])
def test_basis_harmonic_even_orthonormal(dim, m):
    basis = basis_H2m_hat(dim, m)
    for p in basis:
        expr, xs = p.sympy_expr()
        lap = sum(sp.diff(expr, x, 2) for x in xs)
        assert abs(float(sp.Poly(sp.expand(lap), *xs).max_norm())) < 1e-12 if lap != 0 else True
        flipped = expr.subs(xs[-1], -xs[-1])
        assert sp.expand(expr - flipped) == 0
    # sphere orthonormality, by a fine quadrature in angle
    if dim == 2:
        th = np.linspace(0, 2 * np.pi, 4001)[:-1]
        pts = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(len(th), 2 * np.pi / len(th))
    else:
        xg, wg = np.polynomial.legendre.leggauss(40)
        ph = np.linspace(0, 2 * np.pi, 81)[:-1]
        Z, P = np.meshgrid(xg, ph, indexing="ij")
        R = np.sqrt(1 - Z ** 2)
        pts = np.stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel(), Z.ravel()], axis=1)
        w = np.outer(wg, np.full(len(ph), 2 * np.pi / len(ph))).ravel()
    V = np.array([p(pts) for p in basis])
    G = (V * w) @ V.T
    assert np.allclose(G, np.eye(len(basis)), atol=1e-10)


def test_poly_json_round_trip():
    p = Poly2m(3, 1, (0.3, -0.2, 0.1))
    q = Poly2m.from_json(p.to_json())
    assert q == p
    with pytest.raises(ValueError):
        Poly2m(3, 1, (1.0,))


def test_lowest_stratum():
    psi = basis_H2m_hat(2, 1)[0]
    assert is_lowest_stratum(psi)
    assert stratum_dimension(psi) == 0
    # trace proportional to x1^2 in space: invariant along x2
    q = Poly2m.from_function(3, 1, lambda p: p[:, 0] ** 2 - p[:, 2] ** 2)
    assert not is_lowest_stratum(q)
    assert stratum_dimension(q) == 1
    zonal = Poly2m.from_function(3, 1, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2 - 2 * p[:, 2] ** 2)
    assert is_lowest_stratum(zonal) and stratum_dimension(zonal) == 0


def test_stratum_rejects_zero_and_negative_trace():
    with pytest.raises(ConeViolation):
        is_lowest_stratum(Poly2m(2, 1, (0.0,)))
    with pytest.raises(ConeViolation):
        is_lowest_stratum(Poly2m(2, 1, (-1.0,)))
    with pytest.raises(ConeViolation):
        stratum_dimension(Poly2m.from_function(3, 1, lambda p: p[:, 0] * p[:, 1]))


def _poly_field(grid, poly):
    return from_function(grid, poly.sample, float(poly.degree))


def test_projection_fixes_cone_members():
    g = make_grid(3, 33)
    psi = Poly2m.from_function(3, 1, lambda p: p[:, 0] ** 2 + 0.5 * p[:, 1] ** 2 - 1.5 * p[:, 2] ** 2)
    pr = project_H2m(_poly_field(g, psi), 1)
    assert np.allclose(pr.poly.coeffs, psi.coeffs, atol=1e-8)
    assert pr.dist < 1e-6


def test_projection_of_negative_member_is_zero():
    g = make_grid(2, 65)
    psi = basis_H2m_hat(2, 1)[0]
    pr = project_H2m(_poly_field(g, Poly2m(2, 1, (-1.0,))), 1)
    assert np.max(np.abs(pr.poly.coeffs)) <= 1e-8
    assert pr.kkt_residual <= 1e-10
    assert math.isclose(pr.dist, math.sqrt(h1_inner(_poly_field(g, psi), _poly_field(g, psi))), rel_tol=1e-8)


def test_projection_is_nonexpansive():
    g = make_grid(3, 33)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = (Poly2m(3, 1, tuple(rng.normal(size=3))) for _ in range(2))
        fa, fb = _poly_field(g, a), _poly_field(g, b)
        pa, pb = project_H2m(fa, 1), project_H2m(fb, 1)
        assert pa.kkt_residual <= 1e-10 and pb.kkt_residual <= 1e-10
        da = _poly_field(g, Poly2m(3, 1, tuple(np.subtract(pa.poly.coeffs, pb.poly.coeffs))))
        d = _poly_field(g, Poly2m(3, 1, tuple(np.subtract(a.coeffs, b.coeffs))))
        assert math.sqrt(h1_inner(da, da)) <= math.sqrt(h1_inner(d, d)) * (1 + 1e-9)
        # nonnegative trace, up to the dip between the 4096 enforcement angles
        th = np.linspace(0, 2 * np.pi, 720)
        tr = pa.poly.trace(np.stack([np.cos(th), np.sin(th)], axis=1))
        assert np.min(tr) >= -1e-6 * np.max(np.abs(tr)) - 1e-12
