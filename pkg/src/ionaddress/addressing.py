"""The four microwave addressing methods, each reduced to a rate and crosstalk report.

Ion 2 is the addressed ion and ion 1 the spectator throughout. Every method
comes in two flavours: a physical pipeline (currents -> fields -> rates) and
a ``*_from_rates`` constructor that takes rates directly.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import fieldmodel as fm
from .hyperfine import QUBIT, ac_zeeman_coefficients, rabi_rate, transition_frequency
from .spindynamics import crosstalk_resonant_pi, flip_probability
from .units import TWO_PI

METHODS = ("I", "II", "III", "IV")
FREQUENCY_MATCH = TWO_PI * 1e3


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class MethodReport:
    method: str
    rate_q1: float  # rad/s
    rate_q2: float  # rad/s
    crosstalk: float | None
    differential_acz: float | None  # rad/s
    notes: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.rate_q1 < 0 or self.rate_q2 < 0:
            raise ValueError("rates must be non-negative")
        if self.crosstalk is not None and not 0.0 <= self.crosstalk <= 1.0:
            raise ValueError("crosstalk must be a probability")
        if self.method == "I" and self.differential_acz is not None:
            raise ValueError("method I carries no differential ac Zeeman shift")


def _resonant_crosstalk(rate_q1, rate_q2):
    if rate_q2 == 0:
        if rate_q1 == 0:
            return 0.0, "degenerate input: both rates vanish"
        raise PreconditionViolated("addressed ion has zero Rabi rate")
    return crosstalk_resonant_pi(rate_q2, rate_q1), ""


def method_I_from_rates(rate_q1, rate_q2, notes=""):
    xt, note = _resonant_crosstalk(rate_q1, rate_q2)
    return MethodReport("I", rate_q1, rate_q2, xt, None, "; ".join(n for n in (notes, note) if n))


def method_II_from_rates(rate_q1, rate_q2, differential_acz=None, notes=""):
    xt, note = _resonant_crosstalk(rate_q1, rate_q2)
    return MethodReport("II", rate_q1, rate_q2, xt, differential_acz, "; ".join(n for n in (notes, note) if n))


def method_III_from_shifts(acz_q1, acz_q2, notes="crosstalk set by how well the qubit-1 phase is known"):
    """Rates are the sigma_z rotation rates |w_acz,i|; the differential keeps its sign."""
    return MethodReport("III", abs(acz_q1), abs(acz_q2), None, acz_q2 - acz_q1, notes)


def method_IV_from_rates(drive_rate, differential_acz, notes=""):
    if not drive_rate < abs(differential_acz):
        raise PreconditionViolated(
            "frequency-selective addressing needs the drive Rabi rate below the ac Zeeman splitting"
        )
    xt = float(flip_probability(drive_rate, differential_acz, math.pi / drive_rate))
    return MethodReport("IV", drive_rate, drive_rate, xt, differential_acz, notes)


def _check_drive_frequency(drive, expected, what):
    if drive.drive_frequency and abs(drive.drive_frequency - expected) > FREQUENCY_MATCH:
        raise PreconditionViolated(
            f"{what}: drive at 2pi x {drive.drive_frequency / TWO_PI:.9g} Hz, expected 2pi x {expected / TWO_PI:.9g} Hz"
        )


def _samples(bases, drive, layout, axis):
    return [fm.sample(bases, drive, layout.radial(i), axis) for i in (1, 2)]


def method_I(bases, drive, layout, levels, axis=fm.DEFAULT_AXIS, pair=QUBIT):
    """Resonant drive with the field null on ion 1."""
    _check_drive_frequency(drive, transition_frequency(levels, *pair), "method I")
    s1, s2 = _samples(bases, drive, layout, axis)
    r1 = rabi_rate(levels, *pair, s1.parallel_amplitude, s1.perpendicular_amplitude)
    r2 = rabi_rate(levels, *pair, s2.parallel_amplitude, s2.perpendicular_amplitude)
    notes = f"|B_par| ion1 {abs(s1.parallel_amplitude):.4g} T, ion2 {abs(s2.parallel_amplitude):.4g} T"
    return method_I_from_rates(r1, r2, notes)


def sideband_field(bases, drive, micromotion, axis=fm.DEFAULT_AXIS):
    """Amplitude of B_par at the lower rf sideband seen along a micromotion trajectory.

    B_par(r + r_mm cos(W t)) = B_par(r) + (grad B_par . r_mm) cos(W t). The
    cosine splits into two tones of half amplitude, and only the one that
    lifts a w_q - W drive onto resonance matters.
    """
    grad = fm.parallel_gradient(bases, drive, axis)
    return 0.5 * abs(grad @ np.asarray(micromotion, dtype=float))


def method_II(bases, drive, layout, levels, trap, axis=fm.DEFAULT_AXIS, pair=QUBIT, efficiency=1.0):
    """Micromotion-sideband drive at w_q - w_rf."""
    w_q = transition_frequency(levels, *pair)
    _check_drive_frequency(drive, w_q - trap.rf_frequency, "method II")
    rates = [
        efficiency * rabi_rate(levels, *pair, sideband_field(bases, drive, layout.micromotion_amplitudes[i], axis), 0.0)
        for i in (0, 1)
    ]
    s1, s2 = _samples(bases, drive, layout, axis)
    c = ac_zeeman_coefficients(levels, *pair, -trap.rf_frequency)
    acz = [c.shift(s.parallel_amplitude, s.perpendicular_amplitude) for s in (s1, s2)]
    b1, b2 = (float(np.linalg.norm(s.field)) for s in (s1, s2))
    notes = f"|B_MW| ion1 {b1 * 1e6:.4g} uT, ion2 {b2 * 1e6:.4g} uT"
    return method_II_from_rates(rates[0], rates[1], acz[1] - acz[0], notes)


def per_ion_shifts(bases, drive, layout, levels, detuning, axis=fm.DEFAULT_AXIS, pair=QUBIT):
    c = ac_zeeman_coefficients(levels, *pair, detuning)
    return tuple(
        c.shift(s.parallel_amplitude, s.perpendicular_amplitude) for s in _samples(bases, drive, layout, axis)
    )


def method_III(bases, drive, layout, levels, detuning, axis=fm.DEFAULT_AXIS, pair=QUBIT):
    """Differential ac Zeeman sigma_z control from a detuned gradient drive."""
    acz1, acz2 = per_ion_shifts(bases, drive, layout, levels, detuning, axis, pair)
    if abs(detuning) < 10 * max(abs(acz1), abs(acz2)):
        raise PreconditionViolated("detuning must exceed both ac Zeeman rates by at least a factor 10")
    return method_III_from_shifts(acz1, acz2)


def method_IV(bases, drive_gradient, drive_global_rate, layout, levels, detuning, axis=fm.DEFAULT_AXIS,
              pair=QUBIT):
    """Global drive resolving the two qubits by their ac Zeeman splitting."""
    acz1, acz2 = per_ion_shifts(bases, drive_gradient, layout, levels, detuning, axis, pair)
    return method_IV_from_rates(drive_global_rate, acz2 - acz1)


def spectrum_scan(drive_rate, differential_acz, drive_detunings):
    """Spectroscopy scan: P(down,1) + P(down,2) after a resonant-length pi pulse.

    Detunings are relative to qubit 1; qubit 2 sits ``differential_acz`` higher.
    """
    d = np.asarray(drive_detunings, dtype=float)
    t = math.pi / drive_rate
    p1 = flip_probability(drive_rate, d, t)
    p2 = flip_probability(drive_rate, d - differential_acz, t)
    return (1 - p1) + (1 - p2)


def _khz(x):
    return None if x is None else x / TWO_PI / 1e3


def table_comparison(reports):
    """Aligned text table in the layout of the method comparison (rates in kHz)."""
    header = f"{'method':>6}  {'Omega_q1/2pi':>12}  {'Omega_q2/2pi':>12}  {'crosstalk':>9}  {'dw_acz/2pi':>10}"
    units = f"{'':>6}  {'(kHz)':>12}  {'(kHz)':>12}  {'(1e-3)':>9}  {'(kHz)':>10}"
    lines = [header, units]
    for r in reports:
        xt = "--" if r.crosstalk is None else f"{r.crosstalk * 1e3:.3g}"
        dacz = "--" if r.differential_acz is None else f"{_khz(r.differential_acz):.4g}"
        lines.append(f"{r.method:>6}  {_khz(r.rate_q1):>12.4g}  {_khz(r.rate_q2):>12.4g}  {xt:>9}  {dacz:>10}")
    return "\n".join(lines) + "\n"


def reports_to_json(reports):
    """One JSON object per line; SI fields are authoritative, kHz fields are for reading."""
    out = []
    for r in reports:
        d = asdict(r)
        d.update(
            rate_q1_kHz=_khz(r.rate_q1),
            rate_q2_kHz=_khz(r.rate_q2),
            differential_acz_kHz=_khz(r.differential_acz),
        )
        out.append(json.dumps(d, sort_keys=True))
    return "\n".join(out) + ("\n" if out else "")


def reports_from_json(text):
    """Inverse of ``reports_to_json``; lines without a ``method`` key (headers) are skipped."""
    fields = ("method", "rate_q1", "rate_q2", "crosstalk", "differential_acz", "notes")
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        if "method" in d:
            out.append(MethodReport(**{k: d[k] for k in fields}))
    return out
