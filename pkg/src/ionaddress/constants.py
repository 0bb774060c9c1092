"""Atomic constants and their loader."""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml
from scipy.constants import atomic_mass, e, electron_mass, physical_constants

from .units import TWO_PI

MU_B = physical_constants["Bohr magneton"][0]
MU_N = physical_constants["nuclear magneton"][0]
ELEMENTARY_CHARGE = e


@dataclass(frozen=True)
class AtomParameters:
    """Ground-state parameters of a one-valence-electron ion.

    ``nuclear_g_factor`` follows the sign convention of the Zeeman term
    ``mu_B * B * (g_J J_z + g_I I_z)``, so a negative nuclear moment gives a
    positive ``g_I`` of order 1e-4.
    """

    nuclear_spin: float
    electron_spin: float
    hyperfine_constant_A: float  # rad/s
    electronic_g_factor: float
    nuclear_g_factor: float
    mass: float  # kg
    charge: float = ELEMENTARY_CHARGE

    def __post_init__(self):
        for name in ("nuclear_spin", "electron_spin"):
            v = getattr(self, name)
            if v < 0 or abs(2 * v - round(2 * v)) > 1e-12:
                raise ValueError(f"{name} must be a non-negative half-integer, got {v}")
        if self.mass <= 0:
            raise ValueError("mass must be positive")


def atom_from_mapping(d):
    spin_i = float(d["nuclear_spin"])
    g_i = -float(d["nuclear_magnetic_moment_muN"]) * MU_N / (spin_i * MU_B) if spin_i else 0.0
    return AtomParameters(
        nuclear_spin=spin_i,
        electron_spin=float(d["electron_spin"]),
        hyperfine_constant_A=TWO_PI * float(d["hyperfine_constant_A_MHz"]) * 1e6,
        electronic_g_factor=float(d["electronic_g_factor"]),
        nuclear_g_factor=g_i,
        mass=float(d["atomic_mass_u"]) * atomic_mass - electron_mass,
    )


def load_atom(path=None):
    """Load atomic constants; the bundled 25Mg+ file is used by default."""
    if path is None:
        text = resources.files("ionaddress.data").joinpath("mg25_plus.yaml").read_text()
    else:
        text = Path(path).read_text()
    return atom_from_mapping(yaml.safe_load(text))


MG25 = load_atom()
