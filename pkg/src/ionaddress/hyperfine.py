"""Ground-state hyperfine/Zeeman structure, magnetic-dipole couplings and ac Zeeman shifts.

Energies are angular frequencies (rad/s) with the zero at the centre of
gravity of the ground manifold (the Hamiltonian is traceless). Levels are
addressed by their low-field labels ``(F, mF)``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.constants import hbar
from scipy.optimize import bisect

from .constants import MU_B
from .units import TWO_PI

# qubit states: |F=3, mF=1> = down, |F=2, mF=1> = up
DOWN = (3, 1)
UP = (2, 1)
QUBIT = (DOWN, UP)


class NoStationaryPoint(ValueError):
    pass


class MultipleStationaryPoints(ValueError):
    pass


class ResonantIntermediateState(ValueError):
    """Drive frequency sits on a dipole-allowed transition of a qubit level."""

    def __init__(self, transition, frequency, drive_frequency):
        self.transition = transition
        self.frequency = frequency
        self.drive_frequency = drive_frequency
        super().__init__(
            f"drive at 2pi x {drive_frequency / TWO_PI:.6g} Hz is within 2pi x 1 kHz of the "
            f"{transition[0]}<->{transition[1]} transition at 2pi x {frequency / TWO_PI:.6g} Hz"
        )


def spin_matrices(j):
    """(J_z, J_+, J_-) in the |j, m> basis ordered m = j, j-1, ..., -j."""
    m = np.arange(j, -j - 1, -1)
    n = len(m)
    jp = np.zeros((n, n))
    for k in range(1, n):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return np.diag(m), jp, jp.T.copy()


@dataclass(frozen=True)
class _Operators:
    i_vec: tuple
    j_vec: tuple
    m_i: np.ndarray
    m_j: np.ndarray


def _operators(atom):
    iz, ip, im = spin_matrices(atom.nuclear_spin)
    jz, jp, jm = spin_matrices(atom.electron_spin)
    ei, ej = np.eye(iz.shape[0]), np.eye(jz.shape[0])

    def lift_i(op):
        return np.kron(op, ej)

    def lift_j(op):
        return np.kron(ei, op)

    i_vec = (lift_i((ip + im) / 2), lift_i((ip - im) / 2j), lift_i(iz))
    j_vec = (lift_j((jp + jm) / 2), lift_j((jp - jm) / 2j), lift_j(jz))
    m_i = np.repeat(np.diag(iz), jz.shape[0])
    m_j = np.tile(np.diag(jz), iz.shape[0])
    return _Operators(i_vec, j_vec, m_i, m_j)


def hamiltonian(atom, B0):
    """Ground-state Hamiltonian / hbar in the |m_I, m_J> product basis."""
    ops = _operators(atom)
    i_dot_j = sum(i @ j for i, j in zip(ops.i_vec, ops.j_vec))
    zeeman = atom.electronic_g_factor * ops.j_vec[2] + atom.nuclear_g_factor * ops.i_vec[2]
    h = atom.hyperfine_constant_A * i_dot_j + MU_B * B0 / hbar * zeeman
    return np.real_if_close(h)


def coupling_operators(atom):
    """Cartesian components of mu_B (g_J J + g_I I) / hbar, in rad/s per tesla."""
    ops = _operators(atom)
    return tuple(
        MU_B / hbar * (atom.electronic_g_factor * j + atom.nuclear_g_factor * i)
        for i, j in zip(ops.i_vec, ops.j_vec)
    )


@dataclass(frozen=True, eq=False)
class HyperfineLevel:
    F: float
    mF: float
    energy: float
    amplitudes: np.ndarray

    @property
    def label(self):
        return (_compact(self.F), _compact(self.mF))


def _compact(x):
    return int(x) if float(x).is_integer() else float(x)


@dataclass(frozen=True, eq=False)
class LevelSet:
    atom: object
    static_field_B0: float
    levels: tuple
    _index: dict = field(repr=False)

    def index(self, label):
        if isinstance(label, HyperfineLevel):
            label = label.label
        try:
            return self._index[(_compact(label[0]), _compact(label[1]))]
        except (KeyError, TypeError, IndexError):
            raise KeyError(f"unknown level {label!r}") from None

    def level(self, label):
        return self.levels[self.index(label)]

    @property
    def energies(self):
        return np.array([lv.energy for lv in self.levels])

    @cached_property
    def eigenvectors(self):
        """Columns are level amplitudes in the product basis."""
        return np.column_stack([lv.amplitudes for lv in self.levels])

    @cached_property
    def couplings(self):
        """(V_x, V_y, V_z) in the level basis, rad/s per tesla."""
        v = self.eigenvectors
        return tuple(v.conj().T @ op @ v for op in coupling_operators(self.atom))

    def __len__(self):
        return len(self.levels)


def diagonalize(atom, B0):
    """All eigenstates of the ground-state Hamiltonian at static field ``B0`` (tesla).

    The Hamiltonian conserves m_F, so each m_F block is diagonalised on its
    own; this keeps labels well defined at B0 = 0 where F manifolds are
    degenerate.
    """
    if B0 < 0:
        raise ValueError("B0 must be non-negative")
    h = hamiltonian(atom, B0)
    ops = _operators(atom)
    m_f = ops.m_i + ops.m_j
    spin_i, spin_j = atom.nuclear_spin, atom.electron_spin
    f_values = np.arange(abs(spin_i - spin_j), spin_i + spin_j + 0.5)
    upper_first = atom.hyperfine_constant_A < 0  # inverted: largest F lowest

    found = []
    for mf in np.unique(m_f):
        idx = np.flatnonzero(np.isclose(m_f, mf))
        w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
        fs = sorted((f for f in f_values if f >= abs(mf) - 1e-9), reverse=upper_first)
        for k in range(len(idx)):
            amp = np.zeros(len(m_f), dtype=complex)
            amp[idx] = v[:, k]
            # fix the arbitrary eigenvector sign: largest component real positive
            p = np.argmax(np.abs(amp))
            amp *= np.conj(amp[p]) / abs(amp[p])
            found.append(HyperfineLevel(F=fs[k], mF=mf, energy=float(w[k]), amplitudes=amp))

    found.sort(key=lambda lv: (lv.energy, -lv.F, lv.mF))
    index = {lv.label: k for k, lv in enumerate(found)}
    return LevelSet(atom=atom, static_field_B0=float(B0), levels=tuple(found), _index=index)


def transition_frequency(levels, a, b):
    """|E_a - E_b| in rad/s."""
    ia, ib = levels.index(a), levels.index(b)
    if ia == ib:
        raise ValueError("transition needs two distinct levels")
    return abs(levels.levels[ia].energy - levels.levels[ib].energy)


def _block_energy(atom, label):
    """E(B0) of one level from its m_F block alone; H is affine in B0, so the block is split once."""
    f_label, mf = label
    ops = _operators(atom)
    idx = np.flatnonzero(np.isclose(ops.m_i + ops.m_j, mf))
    spin_i, spin_j = atom.nuclear_spin, atom.electron_spin
    fs = sorted((f for f in np.arange(abs(spin_i - spin_j), spin_i + spin_j + 0.5) if f >= abs(mf) - 1e-9),
                reverse=atom.hyperfine_constant_A < 0)
    match = [k for k, f in enumerate(fs) if abs(f - f_label) < 1e-9]
    if len(idx) == 0 or not match:
        raise KeyError(f"no level {label}")
    h0 = hamiltonian(atom, 0.0)[np.ix_(idx, idx)]
    h1 = hamiltonian(atom, 1.0)[np.ix_(idx, idx)] - h0
    k = match[0]

    def energy(B):
        return np.linalg.eigvalsh(h0 + B * h1)[k]

    return energy


def _frequency_vs_field(atom, a, b):
    if tuple(a) == tuple(b):
        raise ValueError("transition needs two distinct levels")
    ea, eb = _block_energy(atom, a), _block_energy(atom, b)

    def f(B):
        return abs(ea(B) - eb(B))

    return f


def field_independent_point(atom, a, b, search_range, step=1e-5, scan_points=401):
    """Static field where the a<->b transition frequency is stationary in B0.

    The slope is a central difference with ``step``; the range is first
    scanned to make sure exactly one sign change of the slope is bracketed,
    then the root is bisected to well below 1e-6 T.
    """
    lo, hi = map(float, search_range)
    if not hi > lo:
        raise ValueError("search range must be an increasing interval")
    f = _frequency_vs_field(atom, a, b)

    def slope(B):
        h = min(step, B) if B > 0 else step
        return (f(B + h) - f(max(B - h, 0.0))) / (B + h - max(B - h, 0.0))

    grid = np.linspace(lo, hi, scan_points)
    s = np.array([slope(B) for B in grid])
    changes = np.flatnonzero(np.sign(s[:-1]) * np.sign(s[1:]) < 0)
    if len(changes) == 0:
        raise NoStationaryPoint(f"transition {a}<->{b} has no stationary point in [{lo}, {hi}] T")
    if len(changes) > 1:
        raise MultipleStationaryPoints(
            f"transition {a}<->{b} has {len(changes)} stationary points in [{lo}, {hi}] T"
        )
    k = changes[0]
    return bisect(slope, grid[k], grid[k + 1], xtol=1e-10)


def _mf_change(levels, a, b):
    return abs(levels.level(a).mF - levels.level(b).mF)


def rabi_rate(levels, a, b, field_parallel, field_perpendicular=0.0):
    """Resonant Rabi rate (rad/s) for a single-tone field with the given amplitudes.

    Convention: spin-flip probability sin^2(Omega t / 2), so T_pi = pi / Omega.
    The parallel amplitude couples through mu_z, the perpendicular one
    through mu_x (linear polarisation transverse to the quantisation axis).
    """
    ia, ib = levels.index(a), levels.index(b)
    if ia == ib:
        raise ValueError("Rabi rate needs two distinct levels")
    if _mf_change(levels, a, b) > 1 + 1e-9:
        return 0.0
    vx, _, vz = levels.couplings
    return float(abs(vz[ia, ib] * field_parallel + vx[ia, ib] * field_perpendicular))


@dataclass(frozen=True)
class AcZeemanCoefficients:
    c_parallel: float  # rad/s per T^2
    c_perpendicular: float  # rad/s per T^2
    detuning: float  # rad/s

    def shift(self, b_parallel, b_perpendicular):
        return self.c_parallel * abs(b_parallel) ** 2 + self.c_perpendicular * abs(b_perpendicular) ** 2


RESONANCE_GUARD = TWO_PI * 1e3


def _level_shift(levels, l, coupling, omega, counter_rotating=True):
    """Second-order shift of level index ``l`` per unit field squared."""
    e = levels.energies
    total = 0.0
    for k in range(len(e)):
        if k == l:
            continue
        v2 = abs(coupling[k, l]) ** 2 / 4.0
        if v2 == 0.0:
            continue
        w = e[l] - e[k]
        total += v2 / (w + omega)
        if counter_rotating:
            total += v2 / (w - omega)
    return total


def ac_zeeman_coefficients(levels, a, b, detuning, counter_rotating=True):
    """Coefficients of the differential ac Zeeman shift of the a<->b transition.

    The drive is at ``omega_ab + detuning``. The returned shift is that of the
    upper level minus that of the lower level, i.e. the change of the
    transition frequency, summed over every dipole-coupled level with both
    rotating and counter-rotating terms.
    """
    ia, ib = levels.index(a), levels.index(b)
    if ia == ib:
        raise ValueError("ac Zeeman shift needs two distinct levels")
    e = levels.energies
    omega = abs(e[ia] - e[ib]) + detuning
    vx, _, vz = levels.couplings

    for l in (ia, ib):
        for k in range(len(e)):
            if k == l:
                continue
            if max(abs(vx[k, l]), abs(vz[k, l])) < 1e-9 * MU_B / hbar:
                continue
            w = abs(e[k] - e[l])
            if abs(omega - w) < RESONANCE_GUARD:
                raise ResonantIntermediateState(
                    (levels.levels[l].label, levels.levels[k].label), w, omega
                )

    upper, lower = (ia, ib) if e[ia] > e[ib] else (ib, ia)

    def differential(coupling):
        return _level_shift(levels, upper, coupling, omega, counter_rotating) - _level_shift(
            levels, lower, coupling, omega, counter_rotating
        )

    return AcZeemanCoefficients(
        c_parallel=float(differential(vz)),
        c_perpendicular=float(differential(vx)),
        detuning=float(detuning),
    )
