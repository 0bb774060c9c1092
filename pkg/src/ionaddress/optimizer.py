"""Electrode-current design for a field null with a prescribed gradient, plus error budgets."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import fieldmodel as fm
from .addressing import method_I, method_II
from .hyperfine import QUBIT, rabi_rate
from .spindynamics import crosstalk_resonant_pi
from .trapmodel import make_layout

GRADIENT_RANGE = (1.0, 100.0)  # T/m
CONDITION_LIMIT = 1e10


class SingularSystem(ValueError):
    def __init__(self, message, condition_number):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3e})")


class InfeasibleGradient(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DesignTarget:
    null_position: np.ndarray  # (x, z), m
    gradient_target: float  # T/m, |d B_par / d s| along direction
    direction: np.ndarray = None  # unit (x, z); default z
    frequency: float = 0.0  # rad/s
    gradient_range: tuple = GRADIENT_RANGE

    def __post_init__(self):
        lo, hi = self.gradient_range
        if not lo <= self.gradient_target <= hi:
            raise ValueError(f"gradient target {self.gradient_target} T/m outside [{lo}, {hi}] T/m")
        d = np.array([0.0, 1.0]) if self.direction is None else np.asarray(self.direction, float).reshape(2)
        object.__setattr__(self, "direction", d / np.linalg.norm(d))
        object.__setattr__(self, "null_position", np.asarray(self.null_position, float).reshape(2))


def design_matrix(bases, target, axis=fm.DEFAULT_AXIS):
    """Rows: B_x and B_z at the null position, then d B_par / d s along the target direction."""
    r0 = target.null_position
    cols = []
    for b in bases:
        f = b.uniform_term + b.quadrupole_matrix @ r0
        grad = axis.xz @ b.quadrupole_matrix @ target.direction
        cols.append([f[0], f[1], grad])
    return np.array(cols, dtype=complex).T


def _row_scaled_condition(m):
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        return math.inf
    return np.linalg.cond(m / norms[:, None])


def solve_currents(bases, target, axis=fm.DEFAULT_AXIS):
    """Currents giving zero field at the target and the requested gradient.

    A square 3x3 complex solve. The global phase is fixed afterwards so the
    first non-zero current is real and positive.
    """
    if len(bases) != 3:
        raise ValueError("the design needs exactly three electrodes")
    m = design_matrix(bases, target, axis)
    null_rows = m[:2]
    if np.linalg.matrix_rank(null_rows / np.linalg.norm(null_rows, axis=1, keepdims=True).clip(1e-300),
                             tol=1.0 / CONDITION_LIMIT) < 2:
        raise SingularSystem("null constraints are degenerate", _row_scaled_condition(m))
    cond = _row_scaled_condition(m)
    if cond > CONDITION_LIMIT:
        raise InfeasibleGradient(
            f"with a null at {target.null_position} the gradient along {target.direction} is fixed at zero "
            f"(condition number {cond:.3e})"
        )
    currents = np.linalg.solve(m, np.array([0.0, 0.0, target.gradient_target], dtype=complex))
    k = next(i for i, c in enumerate(currents) if abs(c) > 0)
    currents = currents * (abs(currents[k]) / currents[k])
    currents[k] = abs(currents[k])
    return fm.DriveConfiguration(
        {b.electrode_id: complex(c) for b, c in zip(bases, currents)}, target.frequency
    )


def measured_gradient(bases, drive, direction, axis=fm.DEFAULT_AXIS):
    """|d B_par / d s| along ``direction``."""
    d = np.asarray(direction, float)
    return float(abs(fm.parallel_gradient(bases, drive, axis) @ (d / np.linalg.norm(d))))


def tune_to_rates(bases, levels, rate_spectator, rate_addressed, offset, axis=fm.DEFAULT_AXIS, pair=QUBIT,
                  frequency=0.0):
    """Drive whose B_par gives the requested resonant rates at the origin and at ``offset``.

    The null is placed just behind the spectator on the line through the
    addressed ion, so B_par grows linearly from the spectator outwards.
    """
    off = np.asarray(offset, float).reshape(2)
    dist = np.linalg.norm(off)
    per_tesla = rabi_rate(levels, *pair, 1.0, 0.0)
    b_spec = rate_spectator / per_tesla
    b_addr = rate_addressed / per_tesla
    grad = (b_addr - b_spec) / dist
    direction = off / dist
    target = DesignTarget(-direction * b_spec / grad, grad, direction, frequency)
    return solve_currents(bases, target, axis)


@dataclass(frozen=True)
class SensitivityReport:
    amplitude_error_rms: float
    phase_error_rms: float
    residual_parallel_field_quantiles: tuple  # (median, 90th percentile), T
    implied_spectator_rate_quantiles: tuple  # (median, 90th percentile), rad/s
    trials: int
    seed: int


def _trial_errors(seed, trials, n_electrodes):
    """Per-trial substreams so any split of the trials reproduces the same draws."""
    children = np.random.SeedSequence(seed).spawn(trials)
    draws = np.empty((trials, 2, n_electrodes))
    for k, child in enumerate(children):
        draws[k] = np.random.default_rng(child).standard_normal((2, n_electrodes))
    return draws


def perturbed_parallel_fields(bases, nominal, position, amplitude_error_rms, phase_error_rms, trials, seed,
                              axis=fm.DEFAULT_AXIS):
    draws = _trial_errors(seed, trials, len(bases))
    i0 = np.array([nominal.current(b.electrode_id) for b in bases])
    currents = i0 * (1 + amplitude_error_rms * draws[:, 0]) * np.exp(1j * phase_error_rms * draws[:, 1])
    r = fm._xz(position)
    # B_par per unit current for each electrode at the probe position
    per_amp = np.array([axis.xz @ (b.uniform_term + b.quadrupole_matrix @ r) for b in bases])
    return currents @ per_amp


def sensitivity(bases, nominal, layout, levels, amplitude_error_rms, phase_error_rms, trials=1000, seed=0,
                axis=fm.DEFAULT_AXIS, pair=QUBIT):
    """Monte-Carlo spread of the spectator's B_par and Rabi rate under current errors.

    Amplitude errors are multiplicative Gaussian, phase errors additive
    Gaussian, independent per electrode. The probe is ion 1 of ``layout``.
    """
    if trials < 100:
        raise ValueError("at least 100 trials are required")
    if amplitude_error_rms < 0 or phase_error_rms < 0:
        raise ValueError("error magnitudes must be non-negative")
    b_par = perturbed_parallel_fields(bases, nominal, layout.radial(1), amplitude_error_rms, phase_error_rms,
                                      trials, seed, axis)
    residual = np.sort(np.abs(b_par))
    per_tesla = rabi_rate(levels, *pair, 1.0, 0.0)
    q = np.quantile(residual, [0.5, 0.9])
    return SensitivityReport(
        float(amplitude_error_rms),
        float(phase_error_rms),
        (float(q[0]), float(q[1])),
        (float(q[0] * per_tesla), float(q[1] * per_tesla)),
        int(trials),
        int(seed),
    )


def calibrate_error_level(bases, nominal, layout, levels, target_median, phase_per_amplitude=1.0, trials=1000,
                          seed=0, bracket=(1e-8, 1.0)):
    """Amplitude error rms (phase rms tied to it) whose median residual B_par hits ``target_median``."""

    def gap(a):
        rep = sensitivity(bases, nominal, layout, levels, a, a * phase_per_amplitude, trials, seed)
        return rep.residual_parallel_field_quantiles[0] - target_median

    return brentq(gap, *bracket, xtol=1e-14, rtol=1e-10)


@dataclass(frozen=True)
class SweepRow:
    offset: float  # m
    rate_addressed: float  # rad/s
    rate_spectator: float  # rad/s
    crosstalk: float


def offset_sweep(bases, drive, levels, trap, offsets, direction=(0.0, 1.0), method="I",
                 residual_floor=None, axis=fm.DEFAULT_AXIS):
    """Crosstalk as ion 2 is pushed further off axis (configuration B per offset).

    Returns the rows and whether crosstalk decreases monotonically with offset.
    """
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    rows = []
    for s in offsets:
        kwargs = {} if residual_floor is None else {"residual_floor": residual_floor}
        layout = make_layout(trap, "B", ion2_offset=s * d, **kwargs)
        plain = replace(drive, drive_frequency=0.0)
        if method == "I":
            rep = method_I(bases, plain, layout, levels, axis)
        elif method == "II":
            rep = method_II(bases, plain, layout, levels, trap, axis)
        else:
            raise ValueError("offset sweeps support methods I and II")
        if rep.rate_q2 > 0:
            xt = crosstalk_resonant_pi(rep.rate_q2, rep.rate_q1)
        else:
            xt = rep.crosstalk
        rows.append(SweepRow(float(s), rep.rate_q2, rep.rate_q1, xt))
    ordered = sorted(rows, key=lambda r: r.offset)
    monotone = all(b.crosstalk <= a.crosstalk for a, b in zip(ordered, ordered[1:]))
    return rows, monotone
