"""Unit handling at the I/O boundary.

Everything inside the package is SI with angular frequencies in rad/s.
Human-facing inputs carry explicit suffixes ("71.6 MHz", "350 nm", "13ms").
"""

import math
import re

TWO_PI = 2.0 * math.pi

# scale to SI; frequencies are ordinary (Hz) here and become angular on request
_SCALES = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "μT": 1e-6, "nT": 1e-9, "G": 1e-4},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0, "pi": math.pi},
    "gradient": {"T/m": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*)?\s*$")


class UnitError(ValueError):
    pass


def unit_kind(unit):
    for kind, table in _SCALES.items():
        if unit in table:
            return kind
    return None


def parse_quantity(text, kind, default_unit=None, angular=True):
    """Parse ``"<number><unit>"`` into SI.

    Frequencies are returned as angular frequencies unless ``angular`` is
    False. A bare number is accepted only when ``default_unit`` is given.
    """
    if isinstance(text, (int, float)):
        if default_unit is None:
            raise UnitError(f"missing unit for {kind} value {text!r}")
        value, unit = float(text), default_unit
    else:
        m = _QUANTITY.match(str(text))
        if not m:
            raise UnitError(f"cannot parse {kind} quantity {text!r}")
        value = float(m.group(1))
        unit = (m.group(2) or "").strip() or default_unit
        if unit is None:
            raise UnitError(f"missing unit for {kind} value {text!r}")
    table = _SCALES[kind]
    if unit not in table:
        raise UnitError(f"unit {unit!r} is not a {kind} unit (expected one of {sorted(table)})")
    si = value * table[unit]
    if kind == "frequency" and angular:
        si *= TWO_PI
    return si


def parse_angle(text):
    """Angle in radians; accepts ``pi``, ``pi/2``, ``3pi/4``, ``90deg``, ``1.2rad`` or a bare number (rad)."""
    s = str(text).strip().replace(" ", "")
    m = re.fullmatch(r"([-+]?(?:\d+\.?\d*|\.\d+)?)\*?pi(?:/(\d+\.?\d*))?", s)
    if m:
        coeff = m.group(1)
        if coeff in ("", "+"):
            c = 1.0
        elif coeff == "-":
            c = -1.0
        else:
            c = float(coeff)
        denom = float(m.group(2)) if m.group(2) else 1.0
        return c * math.pi / denom
    return parse_quantity(s, "angle", default_unit="rad")


def format_quantity(value, unit, kind, angular=True):
    """Inverse of :func:`parse_quantity` with a shortest round-trip repr."""
    si = value / TWO_PI if (kind == "frequency" and angular) else value
    return f"{si / _SCALES[kind][unit]!r}{unit}"
