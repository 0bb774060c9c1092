"""Microwave near-field model: per-electrode uniform + x-z quadrupole terms.

Positions are (x, z) in metres; a 3-vector (x, y, z) is accepted and its y
component dropped, since the field is modelled as y-independent. Fields are
complex amplitudes (B_x, B_z) in tesla.
"""

import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

ELECTRODES = ("MW1", "MW2", "MW3")
VALIDITY_RADIUS = 3e-6


class SingularGradient(ValueError):
    pass


class OutsideValidityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ElectrodeBasisField:
    electrode_id: str
    uniform_term: np.ndarray  # complex (2,), T/A
    quadrupole_matrix: np.ndarray  # complex (2, 2), T/m/A

    def __post_init__(self):
        u = np.asarray(self.uniform_term, dtype=complex).reshape(2)
        g = np.asarray(self.quadrupole_matrix, dtype=complex).reshape(2, 2)
        scale = max(np.abs(g).max(), 1e-300)
        if abs(g[0, 1] - g[1, 0]) > 1e-12 * scale:
            raise ValueError(f"{self.electrode_id}: quadrupole matrix is not symmetric")
        if abs(g[0, 0] + g[1, 1]) > 1e-12 * scale:
            raise ValueError(f"{self.electrode_id}: quadrupole matrix is not traceless")
        object.__setattr__(self, "uniform_term", u)
        object.__setattr__(self, "quadrupole_matrix", g)


@dataclass(frozen=True)
class DriveConfiguration:
    currents: dict  # electrode id -> complex amplitude (A)
    drive_frequency: float = 0.0  # rad/s

    @property
    def is_active(self):
        return any(abs(c) > 0 for c in self.currents.values())

    def current(self, electrode_id):
        return complex(self.currents.get(electrode_id, 0.0))

    def scaled(self, factor):
        return DriveConfiguration({k: factor * complex(v) for k, v in self.currents.items()}, self.drive_frequency)


@dataclass(frozen=True, eq=False)
class QuantizationAxis:
    vector: np.ndarray  # (x, y, z)

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float).reshape(3)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("quantization axis must be non-zero")
        object.__setattr__(self, "vector", v / n)

    @classmethod
    def from_angle(cls, degrees_from_z=15.0):
        """Axis in the y-z plane, tilted from z towards y."""
        t = math.radians(degrees_from_z)
        return cls(np.array([0.0, math.sin(t), math.cos(t)]))

    @property
    def xz(self):
        """Projection weights onto a field with components (B_x, B_z)."""
        return self.vector[[0, 2]]


DEFAULT_AXIS = QuantizationAxis.from_angle(15.0)


@dataclass(frozen=True, eq=False)
class FieldSample:
    position: np.ndarray
    field: np.ndarray
    parallel_amplitude: complex
    perpendicular_amplitude: float
    gradient_parallel: np.ndarray  # real, T/m, d|B_par|/d(x, z)


def load_bases(path=None):
    """Read the basis-field fixture; the bundled synthetic one by default."""
    if path is None:
        text = resources.files("ionaddress.data").joinpath("fixture_bases.yaml").read_text()
    else:
        text = Path(path).read_text()
    return bases_from_mapping(yaml.safe_load(text))


def bases_from_mapping(doc):
    out = []
    for name, e in doc["electrodes"].items():
        u = np.asarray(e["uniform_re"], float) + 1j * np.asarray(e.get("uniform_im", [0.0, 0.0]), float)
        g = np.asarray(e["quadrupole_re"], float) + 1j * np.asarray(
            e.get("quadrupole_im", [[0.0, 0.0], [0.0, 0.0]]), float
        )
        out.append(ElectrodeBasisField(name, u, g))
    return tuple(out)


def bases_to_mapping(bases):
    return {
        "electrodes": {
            b.electrode_id: {
                "uniform_re": b.uniform_term.real.tolist(),
                "uniform_im": b.uniform_term.imag.tolist(),
                "quadrupole_re": b.quadrupole_matrix.real.tolist(),
                "quadrupole_im": b.quadrupole_matrix.imag.tolist(),
            }
            for b in bases
        }
    }


def _xz(position):
    p = np.asarray(position, dtype=float)
    if p.shape[-1] == 3:
        p = p[..., [0, 2]]
    return p


def combined(bases, drive):
    """Total uniform term and quadrupole matrix for the drive currents."""
    u = np.zeros(2, dtype=complex)
    g = np.zeros((2, 2), dtype=complex)
    for b in bases:
        c = drive.current(b.electrode_id)
        u += c * b.uniform_term
        g += c * b.quadrupole_matrix
    return u, g


def field_at(bases, drive, position, validity_radius=VALIDITY_RADIUS):
    """B(r) = sum_k I_k (u_k + G_k r). Works on one position or an (N, 2) array."""
    r = _xz(position)
    if np.any(np.linalg.norm(np.atleast_2d(r), axis=-1) > validity_radius * (1 + 1e-12)):
        warnings.warn(
            f"position beyond the {validity_radius:.3g} m quadrupole-validity radius",
            OutsideValidityWarning,
            stacklevel=2,
        )
    u, g = combined(bases, drive)
    return u + r @ g.T


def decompose(field, axis=DEFAULT_AXIS):
    """Split a complex (B_x, B_z) field into parallel amplitude and perpendicular magnitude."""
    f = np.asarray(field, dtype=complex)
    b3 = np.stack([f[..., 0], np.zeros_like(f[..., 0]), f[..., 1]], axis=-1)
    par = b3 @ axis.vector
    perp_vec = b3 - par[..., None] * axis.vector
    perp = np.sqrt(np.sum(np.abs(perp_vec) ** 2, axis=-1))
    if np.ndim(par) == 0:
        return complex(par), float(perp)
    return par, perp


def parallel_gradient(bases, drive, axis=DEFAULT_AXIS):
    """Gradient (d/dx, d/dz) of the complex parallel amplitude; constant in this model."""
    _, g = combined(bases, drive)
    return axis.xz @ g


def sample(bases, drive, position, axis=DEFAULT_AXIS, validity_radius=VALIDITY_RADIUS):
    r = _xz(position)
    f = field_at(bases, drive, r, validity_radius)
    par, perp = decompose(f, axis)
    grad = parallel_gradient(bases, drive, axis)
    if abs(par) > 0:
        gpar = np.real(np.conj(par) * grad) / abs(par)
    else:
        gpar = np.abs(grad)
    return FieldSample(r, f, par, perp, gpar)


@dataclass(frozen=True, eq=False)
class NullResult:
    position: np.ndarray  # (x, z), m
    min_field_squared: float  # T^2
    imperfect: bool

    def __iter__(self):
        return iter(self.position)


IMPERFECT_NULL_THRESHOLD = 1e-15  # T^2


def find_null(bases, drive):
    """Minimiser of |B(r)|^2 over the x-z plane.

    |u + G r|^2 is quadratic in the real vector r, so the minimum solves
    Re(G^H G) r = -Re(G^H u).
    """
    u, g = combined(bases, drive)
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < 1e-14:
        raise SingularGradient(f"combined quadrupole matrix is singular (singular values {sv})")
    normal = np.real(g.conj().T @ g)
    rhs = -np.real(g.conj().T @ u)
    r = np.linalg.solve(normal, rhs)
    resid = float(np.sum(np.abs(u + g @ r) ** 2))
    return NullResult(r, resid, resid > IMPERFECT_NULL_THRESHOLD)


@dataclass(frozen=True, eq=False)
class FieldMap:
    positions: np.ndarray  # (N, 2)
    parallel: np.ndarray  # complex (N,)
    perpendicular: np.ndarray  # (N,)
    pi_time: np.ndarray  # (N,), inf where the rate vanishes
    outside_validity: bool


def pi_time_map(bases, drive, levels, pair, grid, axis=DEFAULT_AXIS, validity_radius=VALIDITY_RADIUS):
    """pi times over a grid of positions for the transition ``pair``."""
    from .hyperfine import rabi_rate

    pts = np.atleast_2d(_xz(grid))
    outside = bool(np.any(np.linalg.norm(pts, axis=1) > validity_radius * (1 + 1e-12)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideValidityWarning)
        fields = field_at(bases, drive, pts, validity_radius)
    par, perp = decompose(fields, axis)
    par, perp = np.atleast_1d(par), np.atleast_1d(perp)
    rates = np.array([rabi_rate(levels, pair[0], pair[1], p, q) for p, q in zip(par, perp)])
    with np.errstate(divide="ignore"):
        t = np.where(rates > 0, math.pi / np.where(rates > 0, rates, 1.0), np.inf)
    return FieldMap(pts, par, perp, t, outside)


def grid_positions(x_range, z_range, nx, nz):
    xs = np.linspace(*x_range, nx)
    zs = np.linspace(*z_range, nz)
    xx, zz = np.meshgrid(xs, zs, indexing="ij")
    return np.column_stack([xx.ravel(), zz.ravel()])
