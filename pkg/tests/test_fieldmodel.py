import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from ionaddress import fieldmodel as fm
from ionaddress import hyperfine as hf
from ionaddress import optimizer as opt

from .conftest import random_bases, random_drive

DRIVE = fm.DriveConfiguration({"MW1": 0.3, "MW2": -0.2 + 0.05j, "MW3": 0.1j})


def test_fixture_bases_satisfy_maxwell_constraints(bases):
    assert [b.electrode_id for b in bases] == ["MW1", "MW2", "MW3"]
    for b in bases:
        g = b.quadrupole_matrix
        scale = np.abs(g).max()
        assert np.allclose(g, g.T, atol=1e-12 * scale)
        assert abs(np.trace(g)) <= 1e-12 * scale


@pytest.mark.parametrize("g", [
    [[1.0, 2.0], [0.0, -1.0]],  # not symmetric
    [[1.0, 0.0], [0.0, 1.0]],  # not traceless
    [[1j, 0.0], [0.0, 1j]],  # imaginary part not traceless
])
def test_basis_rejects_non_maxwell_quadrupoles(g):
    with pytest.raises(ValueError):
        fm.ElectrodeBasisField("MW1", np.zeros(2), np.array(g, dtype=complex))


def test_basis_round_trip_through_mapping(bases):
    again = fm.bases_from_mapping(fm.bases_to_mapping(bases))
    for a, b in zip(bases, again):
        assert np.array_equal(a.uniform_term, b.uniform_term)
        assert np.array_equal(a.quadrupole_matrix, b.quadrupole_matrix)


# -- field_at -----------------------------------------------------------------


def test_zero_currents_zero_field(bases):
    drive = fm.DriveConfiguration({"MW1": 0, "MW2": 0, "MW3": 0})
    assert not drive.is_active
    pts = fm.grid_positions((-2e-6, 2e-6), (-2e-6, 2e-6), 5, 5)
    assert np.all(fm.field_at(bases, drive, pts) == 0)


def test_single_electrode_at_origin(bases):
    drive = fm.DriveConfiguration({"MW2": 0.5 - 0.25j})
    assert np.allclose(fm.field_at(bases, drive, (0.0, 0.0)), (0.5 - 0.25j) * bases[1].uniform_term, rtol=0,
                       atol=1e-20)


def test_optimizer_null_has_negligible_field(bases):
    drive = opt.solve_currents(bases, opt.DesignTarget((0.2e-6, -0.1e-6), 7.1))
    assert np.linalg.norm(fm.field_at(bases, drive, (0.2e-6, -0.1e-6))) < 1e-12


def test_three_component_positions_ignore_y(bases):
    a = fm.field_at(bases, DRIVE, (1e-7, 0.0, 2e-7))
    b = fm.field_at(bases, DRIVE, (1e-7, 5e-6, 2e-7))
    assert np.array_equal(a, b)


def test_outside_validity_warns(bases):
    with pytest.warns(fm.OutsideValidityWarning):
        fm.field_at(bases, DRIVE, (4e-6, 0.0))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_superposition(seed):
    rng = np.random.default_rng(seed)
    bs = random_bases(rng)
    d1, d2 = random_drive(rng), random_drive(rng)
    both = fm.DriveConfiguration({k: d1.current(k) + d2.current(k) for k in fm.ELECTRODES})
    r = rng.uniform(-2e-6, 2e-6, size=2)
    lhs = fm.field_at(bs, both, r)
    rhs = fm.field_at(bs, d1, r) + fm.field_at(bs, d2, r)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(lhs).max())


@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
@settings(max_examples=30, deadline=None)
def test_global_phase_invariance(seed, theta):
    rng = np.random.default_rng(seed)
    bs = random_bases(rng)
    d = random_drive(rng)
    dr = d.scaled(np.exp(1j * theta))
    r = rng.uniform(-2e-6, 2e-6, size=2)
    f0, f1 = fm.field_at(bs, d, r), fm.field_at(bs, dr, r)
    p0, q0 = fm.decompose(f0)
    p1, q1 = fm.decompose(f1)
    assert np.linalg.norm(f1) == pytest.approx(np.linalg.norm(f0), rel=1e-12)
    assert abs(p1) == pytest.approx(abs(p0), rel=1e-9, abs=1e-20)
    assert q1 == pytest.approx(q0, rel=1e-9, abs=1e-20)
    assert np.allclose(fm.find_null(bs, dr).position, fm.find_null(bs, d).position, rtol=0, atol=1e-15)


# -- decompose ----------------------------------------------------------------


def test_decompose_field_along_x():
    par, perp = fm.decompose(np.array([3e-6 + 1e-6j, 0.0]))
    assert par == 0
    assert perp == pytest.approx(abs(3e-6 + 1e-6j), rel=1e-14)


def test_decompose_field_along_z():
    par, _ = fm.decompose(np.array([0.0, 2e-6 - 1e-6j]))
    assert par == pytest.approx((2e-6 - 1e-6j) * math.cos(math.radians(15)), rel=1e-14)


@given(st.lists(st.floats(-1e-5, 1e-5), min_size=4, max_size=4), st.floats(0, 180))
@settings(max_examples=100, deadline=None)
def test_decompose_pythagoras(parts, angle):
    f = np.array([parts[0] + 1j * parts[1], parts[2] + 1j * parts[3]])
    par, perp = fm.decompose(f, fm.QuantizationAxis.from_angle(angle))
    total = np.sum(np.abs(f) ** 2)
    assert abs(par) ** 2 + perp**2 == pytest.approx(total, rel=1e-12, abs=1e-40)


def test_axis_normalised():
    ax = fm.QuantizationAxis(np.array([0.0, 3.0, 4.0]))
    assert np.linalg.norm(ax.vector) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fm.QuantizationAxis(np.zeros(3))


def test_sample_consistency(bases):
    s = fm.sample(bases, DRIVE, (0.3e-6, -0.2e-6))
    assert abs(s.parallel_amplitude) ** 2 + s.perpendicular_amplitude**2 == pytest.approx(
        np.sum(np.abs(s.field) ** 2), rel=1e-12)
    # the gradient of |B_par| matches a finite difference
    h = 1e-10
    for k in range(2):
        dr = np.zeros(2)
        dr[k] = h
        fp = abs(fm.decompose(fm.field_at(bases, DRIVE, s.position + dr))[0])
        fmn = abs(fm.decompose(fm.field_at(bases, DRIVE, s.position - dr))[0])
        assert s.gradient_parallel[k] == pytest.approx((fp - fmn) / (2 * h), rel=1e-5)


# -- find_null ----------------------------------------------------------------


def test_null_at_origin_without_uniform_terms(bases):
    bs = [fm.ElectrodeBasisField(b.electrode_id, np.zeros(2), b.quadrupole_matrix) for b in bases]
    res = fm.find_null(bs, DRIVE)
    assert np.allclose(res.position, 0.0, atol=1e-18)
    assert not res.imperfect


def test_null_round_trip_through_optimizer(bases):
    target = np.array([0.0, 0.0])
    drive = opt.solve_currents(bases, opt.DesignTarget(target, 7.1))
    res = fm.find_null(bases, drive)
    assert np.linalg.norm(res.position - target) < 1e-12
    assert not res.imperfect


def test_singular_gradient(bases):
    bs = [fm.ElectrodeBasisField(b.electrode_id, b.uniform_term, np.zeros((2, 2))) for b in bases]
    with pytest.raises(fm.SingularGradient):
        fm.find_null(bs, DRIVE)


def _grid_descent_null(bs, drive):
    u, g = fm.combined(bs, drive)

    def f(r):
        return float(np.sum(np.abs(u + g @ r) ** 2))

    # coarse 400 x 400 grid inside the validity disc, then local descent
    xs = np.linspace(-3e-6, 3e-6, 400)
    X, Z = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Z.ravel()], axis=1)
    vals = np.sum(np.abs(u[None, :] + pts @ g.T) ** 2, axis=1)
    start = pts[np.argmin(vals)]
    scale = 1e-6
    res = minimize(lambda s: f(s * scale) / f(start), start / scale, method="BFGS",
                   options={"gtol": 1e-14, "maxiter": 10000})
    return res.x * scale


@pytest.mark.parametrize("seed", range(10))
def test_find_null_against_grid_search(seed):
    rng = np.random.default_rng(1000 + seed)
    while True:
        bs = random_bases(rng)
        d = random_drive(rng)
        res = fm.find_null(bs, d)
        if np.linalg.norm(res.position) < 2.5e-6:
            break
    ref = _grid_descent_null(bs, d)
    assert np.linalg.norm(res.position - ref) < 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_find_null_is_stationary(seed):
    rng = np.random.default_rng(seed)
    bs = random_bases(rng)
    d = random_drive(rng)
    res = fm.find_null(bs, d)
    u, g = fm.combined(bs, d)
    grad = 2 * np.real(g.conj().T @ (u + g @ res.position))
    typical = 2 * np.linalg.norm(g) * np.linalg.norm(u)
    assert np.linalg.norm(grad) < 1e-12 * typical


# -- pi_time_map --------------------------------------------------------------


def test_pi_time_infinite_at_perfect_null(bases, levels):
    bs = [fm.ElectrodeBasisField(b.electrode_id, np.zeros(2), b.quadrupole_matrix) for b in bases]
    fmap = fm.pi_time_map(bs, DRIVE, levels, hf.QUBIT, np.zeros((1, 2)))
    assert np.isinf(fmap.pi_time[0])


def test_pi_time_falls_away_from_null(bases, levels):
    # reference: gradient 7.1 T/m with 0.14 uT residual parallel field at ion 1
    drive = opt.solve_currents(bases, opt.DesignTarget((0.0, -0.14e-6 / 7.1), 7.1))
    zs = np.linspace(0, 0.35e-6, 8)
    grid = np.stack([np.zeros_like(zs), zs], axis=1)
    fmap = fm.pi_time_map(bases, drive, levels, hf.QUBIT, grid)
    assert np.all(np.diff(fmap.pi_time) < 0)
    ratio = fmap.pi_time[-1] / fmap.pi_time[0]
    expected = 0.14 / (0.14 + 7.1 * 0.35)
    assert ratio == pytest.approx(expected, rel=0.05)


def test_doubling_currents_halves_pi_times(bases, levels):
    grid = fm.grid_positions((-1e-6, 1e-6), (-1e-6, 1e-6), 6, 5)
    a = fm.pi_time_map(bases, DRIVE, levels, hf.QUBIT, grid).pi_time
    b = fm.pi_time_map(bases, DRIVE.scaled(2.0), levels, hf.QUBIT, grid).pi_time
    finite = np.isfinite(a)
    assert np.allclose(b[finite], a[finite] / 2, rtol=1e-12)


def test_pi_time_map_validity_flag(bases, levels):
    inside = fm.pi_time_map(bases, DRIVE, levels, hf.QUBIT, [[0.0, 1e-6]])
    outside = fm.pi_time_map(bases, DRIVE, levels, hf.QUBIT, [[0.0, 5e-6]])
    assert not inside.outside_validity and outside.outside_validity


def test_grid_positions_shape():
    g = fm.grid_positions((-1.5e-6, 1.5e-6), (-1.5e-6, 1.5e-6), 12, 10)
    assert g.shape == (120, 2)
