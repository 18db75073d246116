import math

import numpy as np
import pytest

from signorini_lab.blowups import BlowupProfile, eval_grad_h, eval_h, h_field
from signorini_lab.epiperimetric import (AngularMode, ConstantMode, HarmonicMode, TangentMode,
                                         adjusted_energy, base_for, epi_gain, expand_sweep,
                                         homogeneous_energy, make_datum, mode_from_json,
                                         orthogonality_check, perturbation_sweep, write_sweep_csv)
from signorini_lab.fields import ScalarField, from_function, make_grid
from signorini_lab.quadrature import dirichlet_energy

H32 = BlowupProfile(1.0, (1.0, 0.0))
H32_3 = BlowupProfile(1.0, (1.0, 0.0, 0.0))


@pytest.fixture(scope="module")
def grid129():
    return make_grid(2, 129)


def test_modes_are_homogeneous():
    rng = np.random.default_rng(0)
    e2 = np.array([1.0, 0.0])
    e3 = np.array([1.0, 0.0, 0.0])
    cases = [(AngularMode(2.5, 1.0), e2, 1.5), (HarmonicMode(1, 0, 1.0), e3, 1.5),
             (ConstantMode(1.0), e3, 2.0), (TangentMode((0.0, 1.0, 0.0), 1.0), e3, 1.5)]
    for mode, e, lam in cases:
        x = rng.normal(size=(30, e.size))
        v1 = mode.homogeneous(e, lam, x)[0]
        v2 = mode.homogeneous(e, lam, 0.5 * x)[0]
        assert np.allclose(v2, 0.5 ** lam * v1, rtol=1e-12, atol=1e-14)
        assert mode_from_json(mode.to_json()) == mode


def test_mode_gradients_match_finite_differences():
    e = np.array([1.0, 0.0])
    x = np.random.default_rng(1).normal(size=(40, 2))
    x[:, 1] = np.where(np.abs(x[:, 1]) < 0.1, 0.3, x[:, 1])
    mode = AngularMode(3.5, 0.7)
    g = mode.homogeneous(e, 1.5, x)[1]
    for k in range(2):
        d = np.zeros(2)
        d[k] = 1e-6
        fd = (mode.homogeneous(e, 1.5, x + d)[0] - mode.homogeneous(e, 1.5, x - d)[0]) / 2e-6
        assert np.max(np.abs(fd - g[:, k])) < 1e-6


def test_zero_perturbation_is_the_cone(grid129):
    d = make_datum(H32, [], grid129)
    assert d.dist < 1e-8 and not d.degenerate
    assert np.allclose(d.field.values, h_field(grid129).values)


def test_single_mode_datum(grid129):
    d = make_datum(H32, [AngularMode(3.0, -0.05)], grid129)
    assert 0.0 < d.rel_dist < 0.2
    assert d.clip_scale == 1.0
    assert np.min(d.field.plane_values()) >= -1e-12


def test_negative_trace_datum_is_degenerate(grid129):
    # |x|^{3/2} with a negative amplitude: the trace is negative everywhere
    d = make_datum(H32, [ConstantMode(-0.5)], grid129)
    assert d.degenerate and d.clip_scale < 0.5
    assert np.min(d.field.plane_values()) >= -1e-12


def test_cone_datum_gain_is_cone_like(grid129):
    gain = epi_gain(h_field(grid129), 1.5)
    assert gain.cone_like and math.isnan(gain.kappa_obs)
    assert abs(gain.G_c) <= 1e-6
    assert np.max(np.abs(gain.solution.field.values - h_field(grid129).values)) <= 5e-3


def test_perturbed_cone_has_positive_gain(grid129):
    d = make_datum(H32, [AngularMode(2.5, 0.05)], grid129)
    gain = epi_gain(d.field, 1.5)
    assert gain.G_c > 1e-6 and gain.kappa_obs > 0
    assert gain.G_v <= gain.G_c


def test_quadratic_datum_has_positive_gain(grid129):
    base = base_for("2m", 2, 1)
    d = make_datum(base, [AngularMode(4.0, 0.05)], grid129)
    gain = epi_gain(d.field, 2.0)
    assert gain.kappa_obs > 0


def test_gain_is_scale_invariant(grid129):
    d = make_datum(H32, [AngularMode(3.5, 0.04)], grid129)
    k = epi_gain(d.field, 1.5, tol=1e-12).kappa_obs
    for alpha in (0.5, 2.0):
        ka = epi_gain(d.field.scaled(alpha), 1.5, tol=1e-12 * alpha).kappa_obs
        assert abs(ka - k) <= 1e-8


def test_energy_difference_equals_dirichlet_difference(grid129):
    # two fields with the same trace: c and c + (1 - |x|^2) x_1^2
    c = make_datum(H32, [AngularMode(4.5, 0.05)], grid129).field

    def bumped(p):
        v, g = c.sample(p)
        r2 = np.sum(p * p, axis=1)
        phi = (1.0 - r2) * p[:, 0] ** 2
        dphi = -2.0 * p * (p[:, 0] ** 2)[:, None]
        dphi[:, 0] += 2.0 * (1.0 - r2) * p[:, 0]
        return v + phi, g + dphi

    u = from_function(grid129, bumped)
    cp = ScalarField(grid129, c.values, None, c.sampler)
    zero = np.zeros(2)
    lhs = adjusted_energy(cp, 1.5) - adjusted_energy(u, 1.5)
    rhs = dirichlet_energy(cp, zero, 1.0) - dirichlet_energy(u, zero, 1.0)
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)
    # the homogeneous formula agrees with ball quadrature for the datum
    assert abs(homogeneous_energy(c, 1.5) - adjusted_energy(cp, 1.5)) <= 5e-3


def test_orthogonality_of_cone_is_vacuous(grid129):
    rep = orthogonality_check(h_field(grid129))
    assert rep.max_residual == 0.0 and not rep.skipped


def test_orthogonality_skipped_when_nearest_point_is_zero(grid129):
    # -(h_{e_1} + h_{-e_1}) has a negative inner product with both cone directions
    def neg(p):
        return (-eval_h([1.0, 0.0], p) - eval_h([-1.0, 0.0], p),
                -eval_grad_h([1.0, 0.0], p) - eval_grad_h([-1.0, 0.0], p))

    rep = orthogonality_check(from_function(grid129, neg, 1.5))
    assert rep.skipped and rep.amplitude == 0.0


def test_orthogonality_on_perturbed_cone():
    g = make_grid(2, 257)
    d = make_datum(H32, [AngularMode(2.5, 0.05), AngularMode(4.5, -0.03)], g)
    rep = orthogonality_check(d.field)
    assert not rep.skipped and rep.max_residual <= 1e-3


def test_orthogonality_3d_tangent_shift():
    # h + 0.05 v turns the nearest direction towards e_2 (not admissible, not needed here)
    g = make_grid(3, 65)
    tm = TangentMode((0.0, 1.0, 0.0), 0.05)
    e = np.array([1.0, 0.0, 0.0])

    def fn(p):
        hv, hg = H32_3.sample(p)
        tv, tg = tm.homogeneous(e, 1.5, p)
        return hv + tv, hg + tg

    rep = orthogonality_check(from_function(g, fn, 1.5))
    assert not rep.skipped
    assert rep.direction[1] > 1e-3
    assert rep.max_residual <= 1e-3


def test_sweep_cardinality_and_empty():
    assert expand_sweep({}) == []
    assert perturbation_sweep({}) == []
    spec = {"dims": [2, 3], "resolutions": [33], "mode_sets": [[{"kind": "constant"}]],
            "amplitudes": [0.01, 0.02, 0.03]}
    assert len(expand_sweep(spec)) == 6


def test_sweep_rows_fail_independently(tmp_path):
    spec = {"blocks": [
        {"dims": [2], "resolutions": [33], "mode_sets": [[{"nu": 2.5}]], "amplitudes": [0.05]},
        {"dims": [2], "resolutions": [32], "mode_sets": [[{"nu": 2.5}]], "amplitudes": [0.05]},
    ]}
    table = perturbation_sweep(spec)
    assert len(table) == 2
    assert table[0].kappa_obs > 0 and not any(f.startswith("error") for f in table[0].flags)
    assert table[1].flags[0].startswith("error:ValueError")
    write_sweep_csv(tmp_path / "s.csv", table)
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "dim,resolution,family,m,amplitude,dist,G_c,G_v,kappa_obs,flags"


def test_sweep_deterministic_and_parallel_equal():
    spec = {"dims": [2], "resolutions": [33], "mode_sets": [[{"nu": 2.5}, {"nu": 3.5}]],
            "amplitudes": [0.04], "seeds": [0, 1, 2]}
    a = perturbation_sweep(spec, seed=5)
    b = perturbation_sweep(spec, seed=5, jobs=2)
    c = perturbation_sweep(spec, seed=6)
    assert [r.kappa_obs for r in a] == [r.kappa_obs for r in b]
    assert [r.modes for r in a] == [r.modes for r in b]
    assert [r.modes for r in a] != [r.modes for r in c]
