"""Closed-form two-level dynamics for single hyperfine qubits.

State vectors are ordered (down, up). In the frame rotating with the drive
the Hamiltonian is

    H / hbar = (Omega/2)(cos(phi) sx + sin(phi) sy) + (Delta/2) sz,

with sz = diag(1, -1) in that ordering and Delta = w_drive - w_qubit.
"""

import math
from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class QubitState:
    amplitude_down: complex = 1.0
    amplitude_up: complex = 0.0

    def __post_init__(self):
        n = abs(self.amplitude_down) ** 2 + abs(self.amplitude_up) ** 2
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"qubit state not normalised (norm^2 = {n!r})")

    @classmethod
    def down(cls):
        return cls(1.0 + 0j, 0j)

    @classmethod
    def up(cls):
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_vector(cls, v, renormalize=False):
        v = np.asarray(v, dtype=complex)
        if renormalize:
            v = v / np.linalg.norm(v)
        return cls(complex(v[0]), complex(v[1]))

    @property
    def vector(self):
        return np.array([self.amplitude_down, self.amplitude_up], dtype=complex)

    @property
    def p_down(self):
        return abs(self.amplitude_down) ** 2

    @property
    def p_up(self):
        return abs(self.amplitude_up) ** 2


@dataclass(frozen=True)
class PulseParams:
    rabi_rate: float  # rad/s
    duration: float  # s
    detuning: float = 0.0  # rad/s
    drive_phase: float = 0.0  # rad

    def __post_init__(self):
        if self.duration < 0 or self.rabi_rate < 0:
            raise ValueError("duration and Rabi rate must be non-negative")


def unitary(rabi_rate, detuning, phase, duration):
    """Propagator(s) for the rotating-frame Hamiltonian; broadcasts over array inputs.

    Returns an array of shape (..., 2, 2).
    """
    om, de, ph, t = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (rabi_rate, detuning, phase, duration))
    )
    w = np.hypot(om, de)
    half = 0.5 * w * t
    c = np.cos(half)
    # sin(wt/2)/w, finite as w -> 0
    s_over_w = np.where(w > 0, np.sin(half) / np.where(w > 0, w, 1.0), 0.5 * t)
    nx = om * np.cos(ph) * s_over_w
    ny = om * np.sin(ph) * s_over_w
    nz = de * s_over_w
    u = np.empty(om.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * nz
    u[..., 1, 1] = c + 1j * nz
    u[..., 0, 1] = -1j * nx - ny
    u[..., 1, 0] = -1j * nx + ny
    return u


def evolve(state, p):
    u = unitary(p.rabi_rate, p.detuning, p.drive_phase, p.duration)
    return QubitState.from_vector(u @ state.vector, renormalize=True)


def flip_probability(rabi_rate, detuning, t):
    """Off-resonant Rabi formula: Omega^2/W^2 sin^2(W t / 2), W^2 = Omega^2 + Delta^2."""
    w = np.hypot(rabi_rate, detuning)
    if np.ndim(w) == 0 and w == 0:
        return 0.0
    return flip_envelope(rabi_rate, detuning) * np.sin(w * t / 2) ** 2


def flip_envelope(rabi_rate, detuning):
    """Omega^2 / (Omega^2 + Delta^2), written to avoid under/overflow."""
    w = np.hypot(rabi_rate, detuning)
    with np.errstate(invalid="ignore", divide="ignore"):
        env = np.where(w > 0, (np.asarray(rabi_rate, float) / np.where(w > 0, w, 1.0)) ** 2, 0.0)
    return float(env) if np.ndim(env) == 0 else env


def crosstalk_resonant_pi(rate_addressed, rate_spectator):
    """Spin-flip probability of a resonant spectator during a pi pulse on the addressed qubit."""
    if rate_addressed <= 0:
        raise ZeroDivisionError("addressed Rabi rate must be positive")
    return math.sin(0.5 * math.pi * rate_spectator / rate_addressed) ** 2


def acz_phase(acz_rate, t):
    """Relative phase of up vs down accumulated from a frequency shift."""
    return acz_rate * t


def apply_acz(state, acz_rate, t):
    """z rotation from raising the qubit frequency by ``acz_rate`` for time ``t``."""
    phi = acz_phase(acz_rate, t)
    return QubitState(
        state.amplitude_down * np.exp(0.5j * phi),
        state.amplitude_up * np.exp(-0.5j * phi),
    )


def ramsey_probability(rabi_rate, detuning, ramsey_time, contrast_decay_time=None, initial=None):
    """P(up) after pi/2 - free precession - pi/2, starting from down.

    The optional decay shrinks the fringe about 1/2 by exp(-T_R / tau).
    """
    if rabi_rate <= 0:
        raise ValueError("pulse Rabi rate must be positive")
    t_half = 0.5 * math.pi / rabi_rate
    u_pulse = unitary(rabi_rate, detuning, 0.0, t_half)
    u_free = unitary(0.0, detuning, 0.0, ramsey_time)
    psi = (initial or QubitState.down()).vector
    u = u_pulse @ u_free @ u_pulse
    p_up = np.abs(np.einsum("...ij,j->...i", u, psi)[..., 1]) ** 2
    if contrast_decay_time is not None:
        p_up = 0.5 + (p_up - 0.5) * np.exp(-np.asarray(ramsey_time) / contrast_decay_time)
    return p_up if np.ndim(p_up) else float(p_up)
