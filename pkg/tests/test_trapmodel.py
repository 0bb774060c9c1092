import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from ionaddress import trapmodel as tm
from ionaddress.constants import MG25
from ionaddress.units import TWO_PI


def _trap(axial=1.4e6, radial=7.0e6, rf=71.6e6, mass=MG25.mass):
    return tm.TrapParameters(TWO_PI * rf, TWO_PI * axial, TWO_PI * radial, mass, MG25.charge)


def brute_force_spacing(trap):
    """Minimise U(s) = m w^2 s^2 / 4 + k q^2 / s on a dense grid, then polish."""
    k = 8.9875517923e9
    scale = (k * trap.ion_charge**2 / (trap.ion_mass * trap.axial_frequency**2)) ** (1 / 3)

    def u(x):  # dimensionless
        return x**2 / 4 + 1 / x

    xs = np.linspace(0.1, 10, 100001)
    x0 = xs[np.argmin(u(xs))]
    res = minimize_scalar(u, bracket=(x0 - 1e-3, x0, x0 + 1e-3), method="brent", tol=1e-12)
    return res.x * scale


def test_spacing_at_1p88_mhz():
    assert tm.two_ion_spacing(_trap(axial=1.88e6)) == pytest.approx(4.3e-6, rel=0.01)


def test_spacing_at_1p4_mhz():
    d = tm.two_ion_spacing(_trap())
    assert d == pytest.approx(5.2e-6, rel=0.01)
    assert d == pytest.approx(brute_force_spacing(_trap()), rel=1e-6)


def test_spacing_scaling_law():
    assert tm.two_ion_spacing(_trap(axial=8 * 1.4e6)) == pytest.approx(tm.two_ion_spacing(_trap()) / 4, rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_spacing_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mass = rng.uniform(1, 200) * 1.66053906660e-27
    axial = rng.uniform(0.2e6, 5e6)
    trap = _trap(axial=axial, radial=max(7e6, 2 * axial), rf=100e6, mass=mass)
    assert tm.two_ion_spacing(trap) == pytest.approx(brute_force_spacing(trap), rel=1e-6)


def test_mathieu_q_default():
    assert tm.mathieu_q(_trap()) == pytest.approx(0.277, abs=5e-4)


def test_mathieu_q_linear_and_vanishing():
    assert tm.mathieu_q(_trap(radial=14e6)) == pytest.approx(2 * tm.mathieu_q(_trap()), rel=1e-14)
    # zero radial frequency is outside the trap type, so approach it
    assert tm.mathieu_q(_trap(radial=1e-9)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("kwargs", [dict(axial=0.0), dict(radial=-1.0), dict(radial=40e6), dict(mass=0.0)])
def test_trap_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        _trap(**kwargs)


def test_micromotion_at_350nm():
    amp = tm.micromotion_amplitude(_trap(), (0.0, 350e-9), residual_floor=0.0)
    assert np.linalg.norm(amp) == pytest.approx(48e-9, rel=0.02)
    assert amp[0] == 0.0


def test_micromotion_floor_only():
    amp = tm.micromotion_amplitude(_trap(), (0.0, 0.0), residual_floor=0.42e-9)
    assert np.linalg.norm(amp) == pytest.approx(0.42e-9, rel=1e-14)


def test_micromotion_zero():
    assert np.all(tm.micromotion_amplitude(_trap(), (0.0, 0.0), residual_floor=0.0) == 0)


def test_micromotion_outside_harmonic_region():
    with pytest.raises(ValueError):
        tm.micromotion_amplitude(_trap(), (0.0, 2.5e-6))


@given(st.floats(-2e-6, 2e-6), st.floats(-2e-6, 2e-6), st.floats(0.1, 3.0))
@settings(max_examples=100, deadline=None)
def test_micromotion_linear_without_floor(x, z, k):
    if math.hypot(k * x, k * z) > 2e-6 or math.hypot(x, z) > 2e-6:
        return
    a = tm.micromotion_amplitude(_trap(), (x, z), residual_floor=0.0)
    b = tm.micromotion_amplitude(_trap(), (k * x, k * z), residual_floor=0.0)
    assert np.allclose(b, k * a, rtol=1e-12, atol=1e-24)


def test_micromotion_tends_to_linear_above_floor():
    trap = _trap()
    big = tm.micromotion_amplitude(trap, (0.0, 1e-6), residual_floor=0.42e-9)
    assert np.linalg.norm(big) == pytest.approx(0.5 * tm.mathieu_q(trap) * 1e-6, rel=1e-5)


def test_layout_a():
    lay = tm.make_layout(_trap(), "A")
    assert np.all(lay.radial(1) == 0) and np.all(lay.radial(2) == 0)
    for mm in lay.micromotion_amplitudes:
        assert np.linalg.norm(mm) == pytest.approx(tm.RESIDUAL_MICROMOTION, rel=1e-14)


def test_layout_b():
    lay = tm.make_layout(_trap(), "B")
    assert np.linalg.norm(lay.radial(2)) == pytest.approx(350e-9, rel=1e-14)
    assert np.linalg.norm(lay.micromotion_amplitudes[1]) > 40e-9
    assert lay.switch_time == pytest.approx(80e-6)


@pytest.mark.parametrize("label", ["A", "B"])
def test_layout_spacing(label):
    trap = _trap()
    assert tm.make_layout(trap, label).axial_separation == pytest.approx(tm.two_ion_spacing(trap), rel=1e-14)


def test_layout_relabel_symmetry():
    lay = tm.make_layout(_trap(), "B", ion2_offset=(0.0, 0.0))
    p1, p2 = lay.positions
    flip = np.array([1.0, -1.0, 1.0])
    assert np.allclose(p2 * flip, p1) and np.allclose(p1 * flip, p2)
    assert np.allclose(lay.micromotion_amplitudes[0], lay.micromotion_amplitudes[1])


def test_layout_rejects_unknown_label():
    with pytest.raises(ValueError):
        tm.make_layout(_trap(), "C")
