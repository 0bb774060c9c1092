"""Two-ion crystal geometry, Mathieu q and micromotion amplitudes."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import epsilon_0

K_COULOMB = 1.0 / (4.0 * math.pi * epsilon_0)
HARMONIC_VALIDITY = 2e-6  # m
RESIDUAL_MICROMOTION = 0.42e-9  # m, ion 1 floor in the experiment
SWITCH_TIME = 80e-6  # s, adiabatic A <-> B reconfiguration


@dataclass(frozen=True)
class TrapParameters:
    rf_frequency: float  # rad/s
    axial_frequency: float  # rad/s
    radial_frequency: float  # rad/s
    ion_mass: float  # kg
    ion_charge: float  # C

    def __post_init__(self):
        if min(self.rf_frequency, self.axial_frequency) <= 0 or self.radial_frequency < 0:
            raise ValueError("trap frequencies must be positive")
        if self.radial_frequency >= self.rf_frequency / 2:
            raise ValueError("radial frequency must stay below half the rf drive frequency")
        if self.ion_mass <= 0:
            raise ValueError("ion mass must be positive")


def default_trap(atom=None):
    """Trap frequencies of the surface-electrode trap (rf 71.6 MHz, axial 1.4 MHz, radial 7.0 MHz)."""
    if atom is None:
        from .constants import MG25 as atom
    two_pi = 2 * math.pi
    return TrapParameters(two_pi * 71.6e6, two_pi * 1.4e6, two_pi * 7.0e6, atom.mass, atom.charge)


def two_ion_spacing(trap):
    """Equilibrium separation of two ions in a harmonic axial well.

    Stationary point of U(s) = m w^2 s^2 / 4 + k_e q^2 / s.
    """
    if trap.axial_frequency <= 0:
        raise ValueError("axial frequency must be positive")
    return (2 * K_COULOMB * trap.ion_charge**2 / (trap.ion_mass * trap.axial_frequency**2)) ** (1 / 3)


def mathieu_q(trap):
    """Lowest-order pseudopotential q for pure rf radial confinement: 2 sqrt(2) w_r / W_rf."""
    return 2 * math.sqrt(2) * trap.radial_frequency / trap.rf_frequency


def micromotion_amplitude(trap, radial_offset, residual_floor=RESIDUAL_MICROMOTION, validity=HARMONIC_VALIDITY):
    """Excess micromotion amplitude vector (x, z) for an ion displaced from the rf null.

    (q/2) * offset along the offset direction, with an isotropic residual
    floor added in quadrature per component (floor/sqrt(2) on each axis, so
    the magnitude at zero offset equals the floor).
    """
    off = np.asarray(radial_offset, dtype=float).reshape(2)
    if np.linalg.norm(off) > validity * (1 + 1e-12):
        raise ValueError(f"radial offset {np.linalg.norm(off):.3g} m beyond harmonic validity {validity:.3g} m")
    driven = 0.5 * mathieu_q(trap) * off
    floor = residual_floor / math.sqrt(2)
    return np.where(driven < 0, -1.0, 1.0) * np.sqrt(driven**2 + floor**2)


@dataclass(frozen=True, eq=False)
class IonLayout:
    label: str  # "A", "B" or "custom"
    positions: tuple  # per ion (x, y, z), m
    micromotion_amplitudes: tuple  # per ion (x, z), m
    switch_time: float = SWITCH_TIME
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.positions) != 2 or len(self.micromotion_amplitudes) != 2:
            raise ValueError("layouts hold exactly two ions")

    def radial(self, ion):
        """(x, z) of ion 1 or 2."""
        p = self.positions[ion - 1]
        return np.array([p[0], p[2]])

    @property
    def axial_separation(self):
        return abs(self.positions[1][1] - self.positions[0][1])


def make_layout(trap, config_label, ion2_offset=(0.0, 350e-9), residual_floor=RESIDUAL_MICROMOTION,
                switch_time=SWITCH_TIME):
    """Ion positions for configuration A (both on axis) or B (ion 2 pushed off axis).

    Ion 1 sits at y = -d/2 and ion 2 at y = +d/2. ``ion2_offset`` is the
    (x, z) displacement of ion 2 in configuration B.
    """
    if config_label not in ("A", "B"):
        raise ValueError(f"configuration must be 'A' or 'B', got {config_label!r}")
    d = two_ion_spacing(trap)
    off = np.zeros(2) if config_label == "A" else np.asarray(ion2_offset, dtype=float).reshape(2)
    positions = (
        np.array([0.0, -d / 2, 0.0]),
        np.array([off[0], d / 2, off[1]]),
    )
    mm = (
        micromotion_amplitude(trap, (0.0, 0.0), residual_floor),
        micromotion_amplitude(trap, off, residual_floor),
    )
    return IonLayout(config_label, positions, mm, switch_time, {"residual_floor": residual_floor})
