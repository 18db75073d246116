import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signorini_lab.blowups import eval_h, h_field
from signorini_lab.fields import (DomainError, ScalarField, constant, export_csv, from_function,
                                  homogeneous_extension, linear, load_field, make_grid, rescale,
                                  save_field)
from signorini_lab.quadrature import (boundary_mass, dirichlet_energy, h1_inner, sphere_measure,
                                      sphere_sampling)


def test_grid_rejects_even_and_small_resolution():
    with pytest.raises(ValueError):
        make_grid(2, 64)
    with pytest.raises(ValueError):
        make_grid(2, 15)
    with pytest.raises(ValueError):
        make_grid(4, 33)


def test_thin_plane_is_a_grid_plane():
    g = make_grid(3, 33)
    assert g.axis()[g.mid] == 0.0
    assert np.all(g.plane_points()[:, -1] == 0.0)


def test_field_rejects_nonfinite_and_wrong_shape():
    g = make_grid(2, 17)
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((17, 16)))


def test_save_load_round_trip(tmp_path):
    g = make_grid(3, 17)
    u = h_field(g)
    save_field(u, tmp_path / "u.field", {"note": "x"})
    v = load_field(tmp_path / "u.field")
    assert v.grid == g
    assert np.array_equal(v.values, u.values)
    meta = json.loads((tmp_path / "u.field.json").read_text())
    assert meta["grid"]["resolution"] == 17 and meta["note"] == "x"


def test_load_rejects_truncated_file(tmp_path):
    g = make_grid(2, 17)
    save_field(constant(g, 1.0), tmp_path / "u.field")
    raw = (tmp_path / "u.field").read_bytes()
    (tmp_path / "u.field").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_field(tmp_path / "u.field")


def test_export_csv_header(tmp_path):
    g = make_grid(2, 17)
    export_csv(tmp_path / "f.csv", {"u": constant(g, 2.0)})
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,u"
    assert len(lines) == 1 + 17 * 17


def test_rescale_of_cone_is_cone():
    g = make_grid(2, 65)
    u = h_field(g)
    ur = rescale(u, np.zeros(2), 0.5, 1.5)
    x = np.random.default_rng(0).uniform(-0.7, 0.7, size=(50, 2))
    assert np.allclose(ur(x), eval_h([1.0, 0.0], x), atol=1e-12)


def test_rescale_rejects_ball_outside_box():
    g = make_grid(2, 33)
    with pytest.raises(DomainError):
        rescale(constant(g, 1.0), np.array([0.5, 0.0]), 0.6, 1.5)


def test_homogeneous_extension_is_homogeneous_and_keeps_trace():
    g = make_grid(2, 65)
    u = from_function(g, lambda p: (1.0 + p[:, 0] + p[:, 0] * p[:, 1] ** 2,
                                    np.stack([1.0 + p[:, 1] ** 2, 2 * p[:, 0] * p[:, 1]], axis=1)))
    x0, r = np.array([0.1, 0.0]), 0.5
    c = homogeneous_extension(u, x0, r, 1.5)
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, size=(40, 2))
    for t in (0.5, 0.25):
        assert np.allclose(c(t * x), t ** 1.5 * c(x), rtol=1e-8, atol=1e-12)
    s = sphere_sampling(2, np.zeros(2), 1.0, g.spacing)
    ur = rescale(u, x0, r, 1.5)
    assert np.max(np.abs(c(s.nodes) - ur(s.nodes))) < 1e-12
    assert c(np.zeros((1, 2)))[0] == 0.0


def test_homogeneous_extension_of_cone():
    g = make_grid(3, 33)
    c = homogeneous_extension(h_field(g), np.zeros(3), 0.5, 1.5)
    assert np.allclose(c.values, h_field(g).values, atol=1e-12)


def test_even_symmetry_preserved():
    g = make_grid(2, 33)
    u = h_field(g)
    assert u.is_even()
    assert rescale(u, np.zeros(2), 0.5, 1.5).is_even(atol=1e-14)
    assert (u + constant(g, 1.0)).is_even()


def test_sphere_weights_sum_to_measure():
    for dim in (2, 3):
        s = sphere_sampling(dim, np.zeros(dim), 0.7, 2.0 / 64)
        assert math.isclose(s.weights.sum(), sphere_measure(dim, 0.7), rel_tol=1e-12)


def test_boundary_mass_and_energy_of_constant_and_linear():
    for dim in (2, 3):
        g = make_grid(dim, 33)
        one = constant(g, 1.0)
        assert math.isclose(boundary_mass(one, np.zeros(dim), 0.5), sphere_measure(dim, 0.5), rel_tol=1e-12)
        assert dirichlet_energy(one, np.zeros(dim), 0.5) == 0.0
        lin = linear(g, np.eye(dim)[0])
        vol = math.pi * 0.25 if dim == 2 else 4.0 / 3.0 * math.pi * 0.125
        assert math.isclose(dirichlet_energy(lin, np.zeros(dim), 0.5), vol, rel_tol=1e-10)


def test_boundary_mass_scales_homogeneously_for_h():
    for dim in (2, 3):
        g = make_grid(dim, 65)
        u = h_field(g)
        H1 = boundary_mass(u, np.zeros(dim), 1.0)
        for r in (0.2, 0.45, 0.8):
            assert math.isclose(boundary_mass(u, np.zeros(dim), r), r ** (dim + 2) * H1, rel_tol=1e-6)


def test_grid_quadrature_converges():
    # interpolated (no sampler) smooth field: energy error shrinks at order >= 1.5
    exact = None
    errs = []
    for res in (33, 65, 129):
        g = make_grid(2, res)
        x, y = g.coords()
        u = ScalarField(g, np.cos(x) * np.cosh(y))
        e = dirichlet_energy(u, np.zeros(2), 0.6)
        if exact is None:
            # |grad|^2 = cosh(2y) ... integrate exactly in polar form with a fine Gauss rule
            pts, wts = np.polynomial.legendre.leggauss(80)
            rr = 0.3 * (pts + 1)
            th = math.pi * (pts + 1)
            R, T = np.meshgrid(rr, th, indexing="ij")
            W = np.outer(0.3 * wts, math.pi * wts)
            Y = R * np.sin(T)
            X = R * np.cos(T)
            integrand = np.sin(X) ** 2 * np.cosh(Y) ** 2 + np.cos(X) ** 2 * np.sinh(Y) ** 2
            exact = float(np.sum(W * integrand * R))
        errs.append(abs(e - exact))
    order = math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])
    assert min(order) >= 1.5 or errs[-1] < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_h1_inner_bilinear_symmetric(a, b):
    g = make_grid(2, 33)
    x, y = g.coords()
    basis = [ScalarField(g, np.ones(g.shape)), ScalarField(g, x), ScalarField(g, x * x - y * y)]

    def comb(c):
        return ScalarField(g, sum(ci * f.values for ci, f in zip(c, basis)))

    u, v = comb(a), comb(b)
    uv, vu = h1_inner(u, v), h1_inner(v, u)
    assert math.isclose(uv, vu, rel_tol=1e-10, abs_tol=1e-10)
    assert h1_inner(u, u) >= -1e-12
    # linearity in the first slot
    w = comb([ai + bi for ai, bi in zip(a, b)])
    assert math.isclose(h1_inner(w, v), h1_inner(u, v) + h1_inner(v, v), rel_tol=1e-8, abs_tol=1e-8)


def test_h1_inner_positive_definite_gram():
    g = make_grid(2, 33)
    x, y = g.coords()
    fs = [ScalarField(g, np.ones(g.shape)), ScalarField(g, x), ScalarField(g, x * x - y * y)]
    G = np.array([[h1_inner(f, k) for k in fs] for f in fs])
    assert np.all(np.linalg.eigvalsh(G) > 0)
