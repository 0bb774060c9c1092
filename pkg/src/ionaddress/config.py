"""Run configuration: YAML with unit-suffixed values, converted to SI on load."""

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import fieldmodel as fm
from .constants import load_atom
from .trapmodel import TrapParameters
from .units import UnitError, parse_quantity


class ConfigError(ValueError):
    def __init__(self, message, source=None, line=None, key=None):
        self.source, self.line, self.key = source, line, key
        where = ""
        if source:
            where = f"{source}" + (f":{line}" if line else "") + ": "
        if key:
            where += f"[{key}] "
        super().__init__(where + message)


def _key_lines(text):
    """Map dotted key paths to 1-based line numbers."""
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                path = f"{prefix}.{i}"
                lines[path] = v.start_mark.line + 1
                walk(v, path)

    walk(yaml.compose(text), "")
    return lines


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    source: str
    text: str
    lines: dict
    base_dir: Path

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]

    def error(self, message, key):
        return ConfigError(message, self.source, self.lines.get(key), key)

    def get(self, key, default=None):
        node = self.raw
        for part in key.split("."):
            if isinstance(node, dict) and part in node:
                node = node[part]
            elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
                node = node[int(part)]
            else:
                return default
        return node

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise self.error("missing value", key)
        return v

    def quantity(self, key, kind, default=None, angular=True):
        v = self.get(key, default)
        if v is None:
            raise self.error(f"missing {kind} value", key)
        try:
            return parse_quantity(v, kind, angular=angular)
        except UnitError as exc:
            raise self.error(str(exc), key) from None

    def vector(self, key, kind, default=None):
        v = self.get(key, default)
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise self.error(f"expected a two-element list of {kind} values", key)
        try:
            return np.array([parse_quantity(x, kind) for x in v])
        except UnitError as exc:
            raise self.error(str(exc), key) from None

    def number(self, key, default=None, positive=False):
        v = self.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise self.error(f"expected a number, got {v!r}", key)
        if positive and v <= 0:
            raise self.error("must be positive", key)
        return float(v)

    def path(self, key):
        v = self.get(key)
        if v is None:
            return None
        p = Path(v)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise self.error(f"file {str(p)!r} does not exist", key)
        return p

    # -- physics objects -------------------------------------------------------

    def atom(self):
        p = self.path("atom_constants")
        try:
            return load_atom(p)
        except (KeyError, ValueError, yaml.YAMLError) as exc:
            raise self.error(f"bad atom constants file: {exc}", "atom_constants") from None

    def bases(self):
        p = self.path("basis_fixture")
        try:
            return fm.load_bases(p)
        except (KeyError, ValueError, yaml.YAMLError) as exc:
            raise self.error(f"bad basis fixture: {exc}", "basis_fixture") from None

    def axis(self):
        return fm.QuantizationAxis.from_angle(self.number("quantization_axis_deg", 15.0))

    def trap(self, atom):
        try:
            return TrapParameters(
                self.quantity("trap.rf_frequency", "frequency"),
                self.quantity("trap.axial_frequency", "frequency"),
                self.quantity("trap.radial_frequency", "frequency"),
                atom.mass,
                atom.charge,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise self.error(str(exc), "trap") from None


def load_config(path=None):
    if path is None:
        text = resources.files("ionaddress.data").joinpath("default_config.yaml").read_text()
        source, base = "<default config>", Path.cwd()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {str(p)!r} does not exist")
        text, source, base = p.read_text(), str(p), p.parent
    try:
        raw = yaml.safe_load(text) or {}
        lines = _key_lines(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML error: {exc.problem}", source, line) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    _check_keys(yaml.compose(text), source)
    return RunConfig(raw, source, text, lines, base)


def _check_keys(node, source, prefix=""):
    """Reject keys YAML resolves to non-strings (``null:``, ``yes:``, ``1:``), which would never be found."""
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.tag != "tag:yaml.org,2002:str":
                raise ConfigError(f"key {k.value!r} under '{prefix or '<top>'}' is not a string; quote it", source,
                                  k.start_mark.line + 1)
            _check_keys(v, source, f"{prefix}.{k.value}" if prefix else k.value)
    elif isinstance(node, yaml.SequenceNode):
        for v in node.value:
            _check_keys(v, source, prefix)
