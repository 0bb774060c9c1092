import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionaddress import spindynamics as sd
from ionaddress.units import TWO_PI

from . import oracles

KHZ = TWO_PI * 1e3


def _random_pulse(rng):
    return (rng.uniform(0, 20 * KHZ), rng.uniform(-50 * KHZ, 50 * KHZ), rng.uniform(0, TWO_PI),
            rng.uniform(0, 200e-6))


def _random_state(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def test_state_validation():
    with pytest.raises(ValueError):
        sd.QubitState(1.0, 1.0)
    s = sd.QubitState.from_vector([3.0, 4.0j], renormalize=True)
    assert s.p_down == pytest.approx(0.36) and s.p_up == pytest.approx(0.64)


def test_pulse_validation():
    with pytest.raises(ValueError):
        sd.PulseParams(rabi_rate=-1.0, duration=1.0)
    with pytest.raises(ValueError):
        sd.PulseParams(rabi_rate=1.0, duration=-1.0)


def test_identity_without_drive():
    s = sd.QubitState.from_vector(_random_state(np.random.default_rng(1)))
    out = sd.evolve(s, sd.PulseParams(0.0, 1e-3))
    assert np.allclose(out.vector, s.vector, atol=1e-15)


def test_pi_pulse_flips():
    om = 12.84 * KHZ
    out = sd.evolve(sd.QubitState.down(), sd.PulseParams(om, math.pi / om))
    assert out.p_up == pytest.approx(1.0, abs=1e-15)


def test_evolve_against_ode_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        om, de, ph, t = _random_pulse(rng)
        v = _random_state(rng)
        ref = oracles.schrodinger_ode(om, de, ph, t, v)
        got = sd.evolve(sd.QubitState.from_vector(v), sd.PulseParams(om, t, de, ph)).vector
        assert abs(np.vdot(ref, got)) ** 2 >= 1 - 1e-9


def test_unitarity_over_a_million_pulses():
    rng = np.random.default_rng(11)
    n = 10**6
    u = sd.unitary(rng.uniform(0, 20 * KHZ, n), rng.uniform(-50 * KHZ, 50 * KHZ, n), rng.uniform(0, TWO_PI, n),
                   rng.uniform(0, 1e-3, n))
    v = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    out = np.einsum("nij,nj->ni", u, v)
    assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1)) < 1e-12


@given(st.floats(0, 1e5), st.floats(-1e5, 1e5), st.floats(0, 7), st.floats(0, 1e-3), st.floats(0, 1e-3))
@settings(max_examples=200, deadline=None)
def test_composition(om, de, ph, t1, t2):
    u = sd.unitary(om, de, ph, t1 + t2)
    uu = sd.unitary(om, de, ph, t2) @ sd.unitary(om, de, ph, t1)
    assert np.allclose(u, uu, atol=1e-12)


# -- flip probability ---------------------------------------------------------


def test_flip_probability_resonant_pi():
    om = 3.11 * KHZ
    assert sd.flip_probability(om, 0.0, math.pi / om) == pytest.approx(1.0, abs=1e-15)


def test_flip_probability_method_four_envelope():
    # reference: Omega = 2pi x 2.08 kHz, splitting 2pi x 32.1 kHz, measured crosstalk 1.1(9)e-3
    om, de = 2.08 * KHZ, 32.1 * KHZ
    p = sd.flip_probability(om, de, math.pi / om)
    env = sd.flip_envelope(om, de)
    assert env == pytest.approx(4.2e-3, abs=0.05e-3)
    assert 0 < p <= env
    assert 1e-4 < p < 1e-2


@given(st.floats(0, 1e5), st.floats(-1e5, 1e5), st.floats(0, 1e-2))
@settings(max_examples=200, deadline=None)
def test_flip_probability_matches_evolve_and_bound(om, de, t):
    p = sd.flip_probability(om, de, t)
    ref = sd.evolve(sd.QubitState.down(), sd.PulseParams(om, t, de)).p_up
    assert p == pytest.approx(ref, abs=1e-12)
    if om > 0:
        assert p <= sd.flip_envelope(om, de) * (1 + 1e-12)


# -- crosstalk ----------------------------------------------------------------


def test_crosstalk_method_one():
    # reference: method I, 0.32 kHz and 12.84 kHz, crosstalk 1.5(2)e-3
    p = sd.crosstalk_resonant_pi(12.84 * KHZ, 0.32 * KHZ)
    assert p == pytest.approx(1.53e-3, abs=0.005e-3)
    assert 1.3e-3 <= p <= 1.7e-3


def test_crosstalk_method_two():
    # reference: method II, 0.05 kHz and 3.11 kHz, crosstalk 0.6(3)e-3
    p = sd.crosstalk_resonant_pi(3.11 * KHZ, 0.05 * KHZ)
    assert p == pytest.approx(6.4e-4, abs=0.05e-4)
    assert 0.3e-3 <= p <= 0.9e-3


def test_crosstalk_zero_spectator():
    assert sd.crosstalk_resonant_pi(1.0, 0.0) == 0.0


def test_crosstalk_requires_addressed_rate():
    with pytest.raises(ZeroDivisionError):
        sd.crosstalk_resonant_pi(0.0, 1.0)


def test_crosstalk_small_ratio_limit():
    for r in (1e-2, 1e-3, 1e-4):
        p = sd.crosstalk_resonant_pi(1.0, r)
        lead = (math.pi * r / 2) ** 2
        # next term is -(pi r / 2)^4 / 3
        assert abs(p - lead) <= 0.34 * (math.pi * r / 2) ** 4 + 1e-18


@given(st.floats(1.0, 1e5), st.floats(0.0, 1e5))
@settings(max_examples=100, deadline=None)
def test_crosstalk_equals_unitary_simulation(a, s):
    p = sd.crosstalk_resonant_pi(a, s)
    ref = sd.evolve(sd.QubitState.down(), sd.PulseParams(s, math.pi / a)).p_up
    assert p == pytest.approx(ref, abs=1e-10)


# -- ac Zeeman phase ----------------------------------------------------------


def test_acz_phase_pi_time():
    # reference: 2pi x 4.7 kHz sigma_z rate
    t = math.pi / (4.7 * KHZ)
    assert t == pytest.approx(106e-6, rel=0.005)
    assert sd.acz_phase(4.7 * KHZ, t) == pytest.approx(math.pi)


def test_acz_phase_zero_and_additive():
    assert sd.acz_phase(5.0, 0.0) == 0.0
    assert sd.acz_phase(5.0, 0.3) + sd.acz_phase(5.0, 0.7) == pytest.approx(sd.acz_phase(5.0, 1.0))


def test_apply_acz_equals_negative_detuning():
    s = sd.QubitState.from_vector(_random_state(np.random.default_rng(3)))
    a = sd.apply_acz(s, 4.7 * KHZ, 37e-6).vector
    b = sd.evolve(s, sd.PulseParams(0.0, 37e-6, detuning=-4.7 * KHZ)).vector
    assert np.allclose(a, b, atol=1e-15)


# -- Ramsey -------------------------------------------------------------------


def test_ramsey_resonant_composes_to_pi():
    assert sd.ramsey_probability(12.84 * KHZ, 0.0, 13e-3) == pytest.approx(1.0, abs=1e-14)


def test_ramsey_fringe_period():
    t_r = 13e-3
    det = TWO_PI * np.linspace(-300, 300, 12001)
    p = sd.ramsey_probability(12.84 * KHZ, det, t_r)
    # maxima of the fringe pattern are spaced by 1/T_R in ordinary frequency
    peaks = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])) + 1
    spacing = np.diff(det[peaks] / TWO_PI)
    assert np.mean(spacing) == pytest.approx(1 / t_r, rel=0.01)


def test_ramsey_decay():
    det = TWO_PI * 20.0
    p0 = sd.ramsey_probability(12.84 * KHZ, det, 13e-3)
    p1 = sd.ramsey_probability(12.84 * KHZ, det, 13e-3, contrast_decay_time=13e-3)
    assert p1 - 0.5 == pytest.approx((p0 - 0.5) * math.exp(-1), abs=1e-14)


def test_ramsey_against_ode():
    om, det, t_r = 12.84 * KHZ, TWO_PI * 31.0, 2e-3
    th = 0.5 * math.pi / om
    psi = np.array([1.0, 0.0], dtype=complex)
    for args in ((om, det, 0.0, th), (0.0, det, 0.0, t_r), (om, det, 0.0, th)):
        psi = oracles.schrodinger_ode(*args, psi)
    assert sd.ramsey_probability(om, det, t_r) == pytest.approx(abs(psi[1]) ** 2, abs=1e-9)
