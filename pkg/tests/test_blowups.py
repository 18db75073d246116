import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signorini_lab.blowups import (BlowupProfile, dist_to_cone32, eval_grad_h, eval_h, eval_tangent,
                                   exact_profile_2d, h_field, normal_derivative_h, tangent_basis32)
from signorini_lab.fields import ScalarField, constant, from_function, make_grid
from signorini_lab.monotonicity import radial_profile
from signorini_lab.quadrature import h1_inner

E1_2 = np.array([1.0, 0.0])
E1_3 = np.array([1.0, 0.0, 0.0])


def test_h_point_values():
    assert math.isclose(eval_h(E1_2, [[1.0, 0.0]])[0], math.sqrt(2.0), rel_tol=1e-15)
    assert eval_h(E1_2, [[-1.0, 0.0]])[0] == 0.0
    assert math.isclose(eval_h(E1_3, [[0.0, 0.0, 1.0]])[0], -1.0, rel_tol=1e-14)


def test_h_matches_complex_form():
    rng = np.random.default_rng(0)
    for dim in (2, 3):
        x = rng.normal(size=(1000, dim))
        th = rng.uniform(0, 2 * math.pi)
        e = np.array([math.cos(th), 0.0]) if dim == 2 else np.array([math.cos(th), math.sin(th), 0.0])
        e /= np.linalg.norm(e)
        s = x[:, :-1] @ e[:-1]
        z = s + 1j * np.abs(x[:, -1])
        ref = math.sqrt(2.0) * np.real(z ** 1.5)
        assert np.max(np.abs(eval_h(e, x) - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_grad_h_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(200, 3))
    x[:, -1] = np.where(np.abs(x[:, -1]) < 0.05, 0.1, x[:, -1])
    g = eval_grad_h(E1_3, x)
    step = 1e-6
    for k in range(3):
        d = np.zeros(3)
        d[k] = step
        fd = (eval_h(E1_3, x + d) - eval_h(E1_3, x - d)) / (2 * step)
        assert np.max(np.abs(fd - g[:, k])) < 1e-6


def test_normal_derivative_values():
    assert normal_derivative_h(E1_2[:1], [[1.0]])[0] == 0.0
    assert math.isclose(normal_derivative_h(E1_2[:1], [[-1.0]])[0], -3.0 / math.sqrt(2.0), rel_tol=1e-14)
    # one-sided finite difference of the closed form
    # (a smaller step loses the difference to cancellation in rho + s)
    t = 1e-4
    fd = (eval_h(E1_2, [[-1.0, t]])[0] - eval_h(E1_2, [[-1.0, 0.0]])[0]) / t
    assert abs(fd + 3.0 / math.sqrt(2.0)) < 1e-5


def test_trace_times_normal_derivative_vanishes():
    xh = np.random.default_rng(2).normal(size=(100, 2))
    e = np.array([math.cos(0.3), math.sin(0.3), 0.0])
    tr = eval_h(e, np.column_stack([xh, np.zeros(100)]))
    assert np.all(tr >= 0)
    assert np.all(tr * normal_derivative_h(e, xh) == 0.0)


def test_h_harmonic_off_plane():
    # 5-point Laplacian of sampled h_e away from the plane is O(h^2)
    for h in (1e-2, 5e-3):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, size=(50, 2))
        x[:, 1] = np.sign(x[:, 1]) * (0.3 + 0.5 * np.abs(x[:, 1]))
        lap = sum(eval_h(E1_2, x + d) for d in ([h, 0], [-h, 0], [0, h], [0, -h])) - 4 * eval_h(E1_2, x)
        assert np.max(np.abs(lap / h ** 2)) < 50 * h ** 2


def test_tangent_field_values():
    xi = np.array([0.0, 1.0, 0.0])
    assert eval_tangent(E1_3, xi, [[1.0, 0.0, 0.5]])[0][0] == 0.0
    assert math.isclose(eval_tangent(E1_3, xi, [[1.0, 1.0, 0.0]])[0][0], math.sqrt(2.0), rel_tol=1e-15)
    assert math.isclose(eval_tangent(E1_3, xi, [[1.0, -1.0, 0.0]])[0][0], -math.sqrt(2.0), rel_tol=1e-15)
    assert eval_tangent(E1_3, xi, [[-1.0, 1.0, 0.0]])[0][0] == 0.0
    with pytest.raises(ValueError):
        eval_tangent(E1_3, E1_3, [[1.0, 1.0, 0.0]])


def test_tangent_field_is_rotation_derivative():
    # d/dtheta h_{e(theta)} at theta = 0 is (3/2) v_{e1, e2}
    x = np.random.default_rng(4).normal(size=(100, 3))
    d = 1e-6
    ep = np.array([math.cos(d), math.sin(d), 0.0])
    em = np.array([math.cos(d), -math.sin(d), 0.0])
    fd = (eval_h(ep, x) - eval_h(em, x)) / (2 * d)
    v = eval_tangent(E1_3, np.array([0.0, 1.0, 0.0]), x)[0]
    assert np.max(np.abs(fd - 1.5 * v)) < 1e-6


def test_profile_validation_and_json():
    with pytest.raises(ValueError):
        BlowupProfile(-1.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        BlowupProfile(1.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        BlowupProfile(1.0, (2.0, 0.0, 0.0))
    p = BlowupProfile(0.7, (0.6, 0.8, 0.0))
    assert BlowupProfile.from_json(p.to_json()) == p


def test_exact_profiles():
    x = np.random.default_rng(5).normal(size=(100, 2))
    v32, _ = exact_profile_2d(1.5, x)
    assert np.allclose(v32, eval_h(E1_2, x) / math.sqrt(2.0), atol=1e-12)
    v2, _ = exact_profile_2d(2, x)
    assert np.allclose(v2, x[:, 0] ** 2 - x[:, 1] ** 2, atol=1e-12)
    assert abs(exact_profile_2d(3.5, [[-1.0, 0.0]])[0][0]) < 1e-15
    plane = np.column_stack([np.linspace(-1, 1, 100), np.zeros(100)])
    assert np.all(exact_profile_2d(3.5, plane)[0] >= -1e-15)
    with pytest.raises(ValueError):
        exact_profile_2d(2.5, x)
    with pytest.raises(ValueError):
        exact_profile_2d(3, x)


def test_frequency_of_h():
    for dim in (2, 3):
        g = make_grid(dim, 65)
        prof = radial_profile(h_field(g), np.zeros(dim), [0.2, 0.4, 0.6, 0.8])
        assert np.all(np.abs(prof.N - 1.5) <= 5e-3)
        assert np.all(np.abs(prof.W) <= 5e-3)


def test_tangent_basis_sizes_and_conditioning():
    assert len(tangent_basis32(E1_2, make_grid(2, 33))) == 1
    g = make_grid(3, 33)
    basis = tangent_basis32(E1_3, g)
    assert len(basis) == 2
    G = np.array([[h1_inner(a, b) for b in basis] for a in basis])
    assert np.linalg.cond(G) < 1e6


def test_dist_to_cone_of_members():
    for dim in (2, 3):
        g = make_grid(dim, 65)
        cd = dist_to_cone32(h_field(g))
        assert abs(cd.amplitude - 1.0) < 1e-6
        assert np.allclose(cd.direction, np.eye(dim)[0], atol=1e-6)
        assert cd.dist < 1e-6 * cd.c_norm
    zero = dist_to_cone32(constant(make_grid(3, 33), 0.0))
    assert zero.amplitude == 0.0 and zero.dist == 0.0
    assert np.array_equal(zero.direction, E1_3)


def test_dist_to_cone_rotated_direction():
    th = math.radians(37.0)
    e = np.array([math.cos(th), math.sin(th), 0.0])
    cd = dist_to_cone32(h_field(make_grid(3, 65), e, 0.4))
    assert math.degrees(math.acos(min(1.0, cd.direction @ e))) < 1e-2
    assert abs(cd.amplitude - 0.4) < 1e-6


def _bumped(g, eps):
    def bump(p):
        r2 = np.sum((p - [0.0, 0.5]) ** 2, axis=1)
        pm = p * [1, -1]
        r2m = np.sum((pm - [0.0, 0.5]) ** 2, axis=1)
        v = np.exp(-r2 / 0.02) + np.exp(-r2m / 0.02)
        gr = (-2 / 0.02) * (np.exp(-r2 / 0.02)[:, None] * (p - [0.0, 0.5])
                            + (np.exp(-r2m / 0.02)[:, None] * (pm - [0.0, 0.5])) * [1, -1])
        return v, gr

    hb = BlowupProfile(1.0, (1.0, 0.0))
    c = from_function(g, lambda p: tuple(a + eps * b for a, b in zip(hb.sample(p), bump(p))))
    return c, from_function(g, bump)


def test_dist_to_cone_bump_against_brute_force():
    g = make_grid(2, 129)
    eps = 0.05
    c, bump = _bumped(g, eps)
    cd = dist_to_cone32(c)
    assert 0.0 < cd.dist <= eps * math.sqrt(h1_inner(bump, bump)) + 1e-9
    # brute force over amplitudes and the two directions
    h = {s: h_field(g, [s, 0.0]) for s in (1.0, -1.0)}
    cc, best = h1_inner(c, c), math.inf
    for s, hf in h.items():
        ch, hh = h1_inner(c, hf), h1_inner(hf, hf)
        for lam in np.linspace(0.0, 2.0, 20001):
            best = min(best, cc - 2 * lam * ch + lam * lam * hh)
    assert abs(cd.dist - math.sqrt(max(best, 0.0))) < 1e-4


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([0.5, 2.0, 3.7]))
def test_dist_to_cone_is_one_homogeneous(alpha):
    g = make_grid(2, 65)
    c, _ = _bumped(g, 0.05)
    d1 = dist_to_cone32(c).dist
    d2 = dist_to_cone32(c.scaled(alpha)).dist
    assert abs(d2 - alpha * d1) <= 1e-8 * alpha * d1
