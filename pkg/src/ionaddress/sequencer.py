"""A small line-oriented pulse-sequence language for two addressed ion qubits.

Example (Ramsey on qubit 2)::

    @name ramsey
    prepare dd
    config B
    pulse q2 angle=pi/2
    config A
    wait 13ms
    config B
    pulse q2 angle=pi/2
    config A
    detect

Statements: ``prepare <dd|du|ud|uu>`` (ion 1 first), ``config <A|B>``,
``pulse <global|q1|q2> [angle=..|duration=..] [rate=..] [detuning=..]
[phase=..]``, ``wait <time>``, ``detect`` and ``branch <bright count>`` ...
``end``. Directives ``@name`` and ``@seed`` set metadata; ``#`` starts a
comment.
"""

import math
import re
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .spindynamics import unitary
from .trapmodel import SWITCH_TIME
from .units import UnitError, parse_quantity

TARGETS = ("global", "q1", "q2")
STATES = ("dd", "du", "ud", "uu")
PULSE_KEYS = {"angle": "angle", "duration": "time", "rate": "frequency", "detuning": "frequency", "phase": "angle"}
_PI_EXPR = re.compile(r"([-+]?(?:\d+\.?\d*|\.\d+)?)\*?pi(?:/(\d+\.?\d*))?")


class ScriptSyntaxError(ValueError):
    def __init__(self, message, line, column):
        self.line, self.column = line, column
        super().__init__(f"line {line}, column {column}: {message}")


class ValidationError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class ExecutionError(RuntimeError):
    def __init__(self, index, instruction, cause):
        self.index, self.instruction, self.cause = index, instruction, cause
        super().__init__(f"instruction {index} ({format_instruction(instruction)}): {cause}")


class Quantity(NamedTuple):
    value: float
    unit: str

    @property
    def si(self):
        return parse_quantity(self.value, _kind_of(self.unit), default_unit=self.unit)

    def __str__(self):
        return f"{self.value!r}{self.unit}"


def _kind_of(unit):
    from .units import unit_kind

    kind = unit_kind(unit)
    if kind is None:
        raise UnitError(f"unknown unit {unit!r}")
    return kind


# -- instructions -------------------------------------------------------------


@dataclass(frozen=True)
class Prepare:
    state: str = "dd"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SetConfig:
    label: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pulse:
    target: str
    angle: Quantity | None = None
    duration: Quantity | None = None
    rate: Quantity | None = None
    detuning: Quantity | None = None
    phase: Quantity | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Wait:
    duration: Quantity
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Detect:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Branch:
    bright_count: int
    body: tuple = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SequenceProgram:
    instructions: tuple = ()
    name: str | None = None
    seed: int | None = None


# -- parsing ------------------------------------------------------------------


def _parse_value(key, text, line, col):
    kind = PULSE_KEYS[key]
    try:
        if kind == "angle":
            m = _PI_EXPR.fullmatch(text)
            if m:
                coeff = {"": 1.0, "+": 1.0, "-": -1.0}.get(m.group(1))
                coeff = float(m.group(1)) if coeff is None else coeff
                return Quantity(coeff / float(m.group(2) or 1.0), "pi")
        m = re.fullmatch(r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)([^\d\s].*)?", text)
        if not m:
            raise UnitError(f"cannot read {text!r}")
        unit = m.group(2) or ("rad" if kind == "angle" else None)
        if unit is None:
            raise UnitError(f"{key} needs a unit")
        q = Quantity(float(m.group(1)), unit)
        parse_quantity(q.value, kind, default_unit=q.unit)
        return q
    except UnitError as exc:
        raise ScriptSyntaxError(f"bad {key} value: {exc}", line, col) from None


def _tokens(text):
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", text)]


def parse(text):
    """Parse and validate a script. Raises ScriptSyntaxError or ValidationError."""
    name, seed = None, None
    stack = [[]]
    opened = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = _tokens(body)
        if not toks:
            continue
        word, col = toks[0]
        args = toks[1:]
        if word == "@name":
            name = body[body.index("@name") + len("@name"):].strip() or None
            continue
        if word == "@seed":
            if len(args) != 1 or not re.fullmatch(r"\d+", args[0][0]):
                raise ScriptSyntaxError("@seed takes one non-negative integer", lineno, col)
            seed = int(args[0][0])
            continue
        if word == "end":
            if args:
                raise ScriptSyntaxError("'end' takes no arguments", lineno, args[0][1])
            if not opened:
                raise ScriptSyntaxError("'end' without 'branch'", lineno, col)
            count, bline = opened.pop()
            inner = stack.pop()
            stack[-1].append(Branch(count, tuple(inner), line=bline))
            continue
        if word == "branch":
            if len(args) != 1 or not re.fullmatch(r"[-+]?\d+", args[0][0]):
                raise ScriptSyntaxError("'branch' takes one integer bright count", lineno, col)
            opened.append((int(args[0][0]), lineno))
            stack.append([])
            continue
        stack[-1].append(_parse_statement(word, col, args, lineno))
    if opened:
        raise ScriptSyntaxError("'branch' without matching 'end'", opened[-1][1], 1)
    program = SequenceProgram(tuple(stack[0]), name, seed)
    validate(program)
    return program


def _parse_statement(word, col, args, lineno):
    if word == "prepare":
        if len(args) > 1:
            raise ScriptSyntaxError("'prepare' takes one state", lineno, args[1][1])
        return Prepare(args[0][0] if args else "dd", line=lineno)
    if word == "config":
        if len(args) != 1:
            raise ScriptSyntaxError("'config' takes one label", lineno, col)
        return SetConfig(args[0][0], line=lineno)
    if word == "detect":
        if args:
            raise ScriptSyntaxError("'detect' takes no arguments", lineno, args[0][1])
        return Detect(line=lineno)
    if word == "wait":
        if len(args) != 1:
            raise ScriptSyntaxError("'wait' takes one duration", lineno, col)
        tok, tcol = args[0]
        if tok.startswith("duration="):
            tok, tcol = tok[len("duration="):], tcol + len("duration=")
        return Wait(_parse_value("duration", tok, lineno, tcol), line=lineno)
    if word == "pulse":
        if not args:
            raise ScriptSyntaxError("'pulse' needs a target", lineno, col)
        target = args[0][0]
        kw = {}
        for tok, tcol in args[1:]:
            if "=" not in tok:
                raise ScriptSyntaxError(f"expected key=value, got {tok!r}", lineno, tcol)
            key, val = tok.split("=", 1)
            if key not in PULSE_KEYS:
                raise ScriptSyntaxError(f"unknown pulse argument {key!r}", lineno, tcol)
            if key in kw:
                raise ScriptSyntaxError(f"repeated pulse argument {key!r}", lineno, tcol)
            kw[key] = _parse_value(key, val, lineno, tcol + len(key) + 1)
        return Pulse(target, line=lineno, **kw)
    raise ScriptSyntaxError(f"unknown statement {word!r}", lineno, col)


def validate(program):
    _validate_block(program.instructions, config="A", prepared=False, detected=False)


def _validate_block(instructions, config, prepared, detected):
    for ins in instructions:
        if isinstance(ins, Prepare):
            if ins.state not in STATES:
                raise ValidationError(f"unknown state {ins.state!r}; expected one of {STATES}", ins.line)
            prepared = True
        elif isinstance(ins, SetConfig):
            if ins.label not in ("A", "B"):
                raise ValidationError(f"unknown configuration {ins.label!r}", ins.line)
            if ins.label == config:
                raise ValidationError(f"already in configuration {config}", ins.line)
            config = ins.label
        elif isinstance(ins, Pulse):
            if ins.target not in TARGETS:
                raise ValidationError(f"unknown pulse target {ins.target!r}; expected one of {TARGETS}", ins.line)
            if (ins.angle is None) == (ins.duration is None):
                raise ValidationError("a pulse needs exactly one of angle= or duration=", ins.line)
            if ins.duration is not None and ins.duration.value < 0:
                raise ValidationError("pulse duration must be non-negative", ins.line)
            if ins.rate is not None and ins.rate.value < 0:
                raise ValidationError("pulse rate must be non-negative", ins.line)
        elif isinstance(ins, Wait):
            if ins.duration.value < 0:
                raise ValidationError("wait duration must be non-negative", ins.line)
        elif isinstance(ins, Detect):
            if not prepared:
                raise ValidationError("detection before any prepare", ins.line)
            detected = True
        elif isinstance(ins, Branch):
            if not prepared or not detected:
                raise ValidationError("branch needs a preceding prepare and detect", ins.line)
            if ins.bright_count not in (0, 1, 2):
                raise ValidationError("bright count must be 0, 1 or 2", ins.line)
            end_config = _validate_block(ins.body, config, prepared, detected)
            if end_config != config:
                raise ValidationError("a branch body must end in the configuration it started in", ins.line)
    return config


# -- formatting ---------------------------------------------------------------


def format_instruction(ins):
    if isinstance(ins, Prepare):
        return f"prepare {ins.state}"
    if isinstance(ins, SetConfig):
        return f"config {ins.label}"
    if isinstance(ins, Wait):
        return f"wait {ins.duration}"
    if isinstance(ins, Detect):
        return "detect"
    if isinstance(ins, Pulse):
        parts = [f"pulse {ins.target}"]
        for key in PULSE_KEYS:
            q = getattr(ins, key)
            if q is not None:
                parts.append(f"{key}={q}")
        return " ".join(parts)
    if isinstance(ins, Branch):
        return f"branch {ins.bright_count}"
    raise TypeError(f"not an instruction: {ins!r}")


def format(program):
    """Canonical text; ``parse(format(p)) == p``."""
    lines = ["# ionaddress pulse sequence"]
    if program.name is not None:
        lines.append(f"@name {program.name}")
    if program.seed is not None:
        lines.append(f"@seed {program.seed}")

    def emit(block, depth):
        for ins in block:
            lines.append("  " * depth + format_instruction(ins))
            if isinstance(ins, Branch):
                emit(ins.body, depth + 1)
                lines.append("  " * depth + "end")

    emit(program.instructions, 0)
    return "\n".join(lines) + "\n"


def with_pulse_argument(program, key, value):
    """Copy of ``program`` with ``key`` set to ``value`` on every pulse.

    Setting ``angle`` clears ``duration`` and vice versa.
    """
    if key not in PULSE_KEYS:
        raise ValueError(f"unknown pulse argument {key!r}")

    def patch(block):
        out = []
        for ins in block:
            if isinstance(ins, Pulse):
                kw = {key: value}
                if key == "angle":
                    kw["duration"] = None
                elif key == "duration":
                    kw["angle"] = None
                ins = replace(ins, **kw)
            elif isinstance(ins, Branch):
                ins = replace(ins, body=patch(ins.body))
            out.append(ins)
        return tuple(out)

    return replace(program, instructions=patch(program.instructions))


# -- execution ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelBundle:
    """Per-method rates the executor resolves pulses against (all rad/s).

    ``addressed_rates`` maps a target ("q1"/"q2") to the (ion 1, ion 2) Rabi
    rates of an addressed pulse in configuration B (methods I and II).
    ``acz_rates`` are the per-ion ac Zeeman shifts of method III and
    ``splitting`` the qubit-2 minus qubit-1 resonance offset of method IV.
    """

    method: str = "I"
    addressed_rates: dict = field(default_factory=dict)
    global_rate: float = 0.0
    acz_rates: tuple = (0.0, 0.0)
    splitting: float = 0.0
    switch_time: float = SWITCH_TIME
    detection_error: float = 0.0
    preparation_error: float = 0.0
    phase_slip: float = 0.0

    @classmethod
    def from_report(cls, report, global_rate=None, **kwargs):
        if report.method in ("I", "II"):
            return cls(report.method, {"q2": (report.rate_q1, report.rate_q2)},
                       global_rate if global_rate is not None else report.rate_q2, **kwargs)
        if report.method == "III":
            # signed shifts are not in the report; rebuild them from the differential
            a1 = report.rate_q1
            return cls("III", {}, global_rate or 0.0, (a1, a1 + report.differential_acz), **kwargs)
        return cls("IV", {}, global_rate if global_rate is not None else report.rate_q1,
                   splitting=report.differential_acz, **kwargs)


@dataclass
class _Ensemble:
    """Weighted rows of product states: exact branches or sampled shots."""

    psi: np.ndarray  # (N, 2 ions, 2) complex, (down, up)
    weight: np.ndarray  # (N,)
    time: np.ndarray  # (N,)
    records: np.ndarray  # (N, n_detect) observed bright counts, -1 = not executed

    def take(self, mask):
        return _Ensemble(self.psi[mask], self.weight[mask], self.time[mask], self.records[mask])

    @staticmethod
    def concat(parts):
        parts = [p for p in parts if len(p.weight)]
        width = max(p.records.shape[1] for p in parts)
        recs = [np.pad(p.records, ((0, 0), (0, width - p.records.shape[1])), constant_values=-1) for p in parts]
        return _Ensemble(
            np.concatenate([p.psi for p in parts]),
            np.concatenate([p.weight for p in parts]),
            np.concatenate([p.time for p in parts]),
            np.concatenate(recs),
        )


@dataclass(frozen=True)
class TraceRow:
    step: str
    time: float  # s
    p_down_q1: float
    p_down_q2: float


@dataclass(frozen=True, eq=False)
class ExecutionTrace:
    rows: tuple
    records: np.ndarray  # (N, n_detect)
    weights: np.ndarray  # (N,)
    p_down_final: tuple

    def detection_distribution(self):
        """Probability of each tuple of observed bright counts (-1: that detection was skipped)."""
        out = {}
        for rec, w in zip(map(tuple, self.records.tolist()), self.weights):
            out[rec] = out.get(rec, 0.0) + float(w)
        return dict(sorted(out.items()))

    def final_count_distribution(self):
        """Distribution of the last executed detection per row."""
        out = {0: 0.0, 1: 0.0, 2: 0.0}
        for rec, w in zip(self.records, self.weights):
            done = rec[rec >= 0]
            if len(done):
                out[int(done[-1])] += float(w)
        return out

    @property
    def total_bright_expectation(self):
        return self.p_down_final[0] + self.p_down_final[1]


_BASIS = {"d": np.array([1.0, 0.0], complex), "u": np.array([0.0, 1.0], complex)}


class _Runner:
    def __init__(self, bundle, rng):
        self.bundle = bundle
        self.rng = rng
        self.trace = []

    def run(self, block, ens, config, prefix=""):
        for k, ins in enumerate(block, start=1):
            step = f"{prefix}{k}"
            try:
                if isinstance(ins, Branch):
                    last = ens.records[:, -1] if ens.records.shape[1] else np.full(len(ens.weight), -1)
                    hit = last == ins.bright_count
                    taken = self.run(ins.body, ens.take(hit), config, prefix=step + ".")[0] if hit.any() else None
                    ens = _Ensemble.concat([p for p in (taken, ens.take(~hit)) if p is not None])
                else:
                    ens, config = self.apply(ins, ens, config)
            except ExecutionError:
                raise
            except (ValueError, KeyError, ZeroDivisionError) as exc:
                raise ExecutionError(step, ins, exc) from exc
            self.record(step, ens)
        return ens, config

    def record(self, step, ens):
        if not len(ens.weight):
            return
        w = ens.weight / ens.weight.sum()
        pd = np.abs(ens.psi[:, :, 0]) ** 2
        self.trace.append(TraceRow(step, float(ens.time.max()), float(w @ pd[:, 0]), float(w @ pd[:, 1])))

    def apply(self, ins, ens, config):
        b = self.bundle
        if isinstance(ins, Prepare):
            return self.prepare(ins.state, ens), config
        if isinstance(ins, SetConfig):
            ens.time = ens.time + b.switch_time
            self.slip = getattr(self, "slip", 0.0) + b.phase_slip
            return ens, ins.label
        if isinstance(ins, Wait):
            t = ins.duration.si
            # free precession in the drive frame at the drive detuning last used
            u = unitary(0.0, getattr(self, "last_detuning", 0.0), 0.0, t)
            ens.psi = np.einsum("ij,nkj->nki", u, ens.psi)
            ens.time = ens.time + t
            return ens, config
        if isinstance(ins, Detect):
            return self.detect(ens), config
        if isinstance(ins, Pulse):
            rates, detunings, phase, duration = self.resolve(ins, config)
            for ion in (0, 1):
                u = unitary(rates[ion], detunings[ion], phase, duration)
                ens.psi[:, ion] = ens.psi[:, ion] @ u.T
            ens.time = ens.time + duration
            return ens, config
        raise TypeError(f"cannot execute {ins!r}")

    def resolve(self, p, config):
        """(per-ion rates, per-ion detunings, phase, duration) for a pulse."""
        b = self.bundle
        det = p.detuning.si if p.detuning is not None else 0.0
        phase = p.phase.si if p.phase is not None else 0.0
        self.last_detuning = det
        split = b.splitting if (b.method == "IV" and config == "B") else 0.0

        if p.target == "global":
            r = p.rate.si if p.rate is not None else b.global_rate
            rates, dets, ref = (r, r), (det, det - split), r
        elif config != "B":
            raise ValidationError(f"addressed pulse on {p.target} requires configuration B", p.line)
        elif b.method in ("I", "II"):
            if p.target not in b.addressed_rates:
                raise KeyError(f"method {b.method} bundle has no addressed rates for {p.target}")
            r1, r2 = b.addressed_rates[p.target]
            ref = r1 if p.target == "q1" else r2
            scale = p.rate.si / ref if p.rate is not None else 1.0
            rates, dets, ref = (r1 * scale, r2 * scale), (det, det), ref * scale
            phase += getattr(self, "slip", 0.0)
        elif b.method == "III":
            a1, a2 = b.acz_rates
            rates, dets = (0.0, 0.0), (-a1, -a2)
            ref = abs(a1 if p.target == "q1" else a2)
        elif b.method == "IV":
            r = p.rate.si if p.rate is not None else b.global_rate
            dets = (det, det - split) if p.target == "q1" else (det + split, det)
            rates, ref = (r, r), r
        else:
            raise ValueError(f"unknown method {b.method!r}")

        if p.duration is not None:
            duration = p.duration.si
        else:
            if ref <= 0:
                raise ZeroDivisionError(f"angle pulse on {p.target} with zero rate")
            angle = p.angle.si
            duration = abs(angle) / ref
            if angle < 0:
                phase += math.pi
        return rates, dets, phase, duration

    def prepare(self, state, ens):
        eps = self.bundle.preparation_error
        n = len(ens.weight)
        target = np.stack([_BASIS[state[0]], _BASIS[state[1]]])
        if eps == 0:
            ens.psi = np.broadcast_to(target, (n, 2, 2)).copy()
            return ens
        flip = {"d": "u", "u": "d"}
        options = []
        for f1 in (0, 1):
            for f2 in (0, 1):
                s1 = flip[state[0]] if f1 else state[0]
                s2 = flip[state[1]] if f2 else state[1]
                p = (eps if f1 else 1 - eps) * (eps if f2 else 1 - eps)
                options.append((np.stack([_BASIS[s1], _BASIS[s2]]), p))
        if self.rng is None:
            parts = []
            for psi, p in options:
                part = ens.take(np.ones(n, bool))
                part.psi = np.broadcast_to(psi, (n, 2, 2)).copy()
                part.weight = part.weight * p
                parts.append(part)
            return _Ensemble.concat(parts)
        pick = self.rng.choice(4, size=n, p=[p for _, p in options])
        ens.psi = np.stack([options[k][0] for k in pick]) if n else ens.psi
        return ens

    def detect(self, ens):
        eps = self.bundle.detection_error
        p_down = np.abs(ens.psi[:, :, 0]) ** 2
        if self.rng is None:
            parts = []
            for s1 in (0, 1):  # 1 = down (bright)
                for s2 in (0, 1):
                    pt = np.where(s1, p_down[:, 0], 1 - p_down[:, 0]) * np.where(s2, p_down[:, 1], 1 - p_down[:, 1])
                    for o1 in (0, 1):
                        for o2 in (0, 1):
                            pr = (1 - eps if o1 == s1 else eps) * (1 - eps if o2 == s2 else eps)
                            w = ens.weight * pt * pr
                            keep = w > 0
                            if not keep.any():
                                continue
                            part = ens.take(keep)
                            part.weight = w[keep]
                            part.psi = np.broadcast_to(
                                np.stack([_BASIS["d" if s1 else "u"], _BASIS["d" if s2 else "u"]]),
                                part.psi.shape,
                            ).copy()
                            part.records = np.column_stack([part.records, np.full(keep.sum(), o1 + o2)])
                            parts.append(part)
            return _merge(_Ensemble.concat(parts))
        bright = self.rng.random(p_down.shape) < p_down
        misread = self.rng.random(p_down.shape) < eps
        observed = bright ^ misread
        ens.psi = np.where(bright[..., None], _BASIS["d"], _BASIS["u"]).astype(complex)
        ens.records = np.column_stack([ens.records, observed.sum(axis=1)])
        return ens


def _merge(ens):
    """Combine rows with identical basis states and records (exact mode only)."""
    keys = {}
    order = []
    for i in range(len(ens.weight)):
        key = (tuple(np.round(np.abs(ens.psi[i, :, 0]) ** 2).astype(int)), tuple(ens.records[i]), ens.time[i])
        if key in keys:
            keys[key].append(i)
        else:
            keys[key] = [i]
            order.append(key)
    idx = [keys[k][0] for k in order]
    out = ens.take(np.array(idx, dtype=int))
    out.weight = np.array([ens.weight[keys[k]].sum() for k in order])
    return out


def execute(program, bundle, shots=None, seed=None):
    """Run ``program``.

    With ``shots=None`` the result is exact: detections split the state into
    weighted branches. Otherwise ``shots`` trajectories are sampled with
    ``seed`` (falling back to the program's seed).
    """
    if shots is None:
        rng, n = None, 1
    else:
        s = seed if seed is not None else program.seed
        rng, n = np.random.default_rng(s), int(shots)
    ens = _Ensemble(
        np.broadcast_to(np.stack([_BASIS["d"], _BASIS["d"]]), (n, 2, 2)).copy(),
        np.full(n, 1.0 / n),
        np.zeros(n),
        np.zeros((n, 0), dtype=int),
    )
    runner = _Runner(bundle, rng)
    ens, _ = runner.run(program.instructions, ens, "A")
    w = ens.weight / ens.weight.sum()
    pd = np.abs(ens.psi[:, :, 0]) ** 2
    return ExecutionTrace(tuple(runner.trace), ens.records, w, (float(w @ pd[:, 0]), float(w @ pd[:, 1])))


def scan(program, bundle, key, values):
    """Final P(down) per ion for each value of a pulse argument (exact mode)."""
    out = []
    for v in values:
        tr = execute(with_pulse_argument(program, key, v), bundle)
        out.append(tr.p_down_final)
    return np.array(out)


# -- conditional two-ion detection ----------------------------------------------


@dataclass(frozen=True)
class DetectionRecord:
    stage: int
    bright_count: int
    inferred_states: tuple  # per ion: "down", "up", "pending" or "ambiguous"


_INFER_STAGE1 = {2: ("down", "down"), 0: ("up", "up"), 1: ("pending", "pending")}
_INFER_STAGE2 = {2: ("down", "up"), 0: ("up", "down")}


def records_for(count1, count2=None):
    recs = [DetectionRecord(1, count1, _INFER_STAGE1[count1])]
    if count1 == 1:
        recs.append(DetectionRecord(2, count2, _INFER_STAGE2.get(count2, ("ambiguous", "ambiguous"))))
    return recs


def conditional_distribution(p_down1, p_down2, detection_error=0.0):
    """Exact probability of each (stage-1 count, stage-2 count or None) outcome."""
    eps = detection_error
    out = {}
    for s1 in (1, 0):
        for s2 in (1, 0):
            p = (p_down1 if s1 else 1 - p_down1) * (p_down2 if s2 else 1 - p_down2)
            if p == 0:
                continue
            for o in _readout(s1, s2, eps):
                c1, q1 = o
                if c1 != 1:
                    out[(c1, None)] = out.get((c1, None), 0.0) + p * q1
                    continue
                # ideal pi pulse on qubit 2, then read again
                for c2, q2 in _readout(s1, 1 - s2, eps):
                    out[(1, c2)] = out.get((1, c2), 0.0) + p * q1 * q2
    return out


def _readout(s1, s2, eps):
    res = {}
    for o1 in (0, 1):
        for o2 in (0, 1):
            q = (1 - eps if o1 == s1 else eps) * (1 - eps if o2 == s2 else eps)
            if q:
                res[o1 + o2] = res.get(o1 + o2, 0.0) + q
    return list(res.items())


def conditional_detection(p_down1, p_down2, rng=None, detection_error=0.0):
    """Two-stage readout of two ions, with a pi pulse on qubit 2 in between when exactly one is bright.

    Deterministic (``rng=None``) mode requires computational basis inputs
    and ideal readout; otherwise one shot is drawn from ``rng``.
    """
    if rng is None:
        dist = conditional_distribution(p_down1, p_down2, detection_error)
        if len(dist) != 1:
            raise ValueError("deterministic conditional detection needs basis states and ideal readout")
        (c1, c2), = dist
        return records_for(c1, c2)
    bright = rng.random(2) < np.array([p_down1, p_down2])
    misread = rng.random(2) < detection_error
    c1 = int((bright ^ misread).sum())
    if c1 != 1:
        return records_for(c1)
    bright[1] = not bright[1]
    misread = rng.random(2) < detection_error
    return records_for(1, int((bright ^ misread).sum()))


def sample_conditional(p_down1, p_down2, shots, seed, detection_error=0.0):
    """Outcome frequencies of many independent conditional detections."""
    rng = np.random.default_rng(seed)
    bright = rng.random((shots, 2)) < np.array([p_down1, p_down2])
    c1 = (bright ^ (rng.random((shots, 2)) < detection_error)).sum(axis=1)
    bright[:, 1] = ~bright[:, 1]
    c2 = (bright ^ (rng.random((shots, 2)) < detection_error)).sum(axis=1)
    counts = {}
    for a, b in zip(c1.tolist(), c2.tolist()):
        key = (a, b if a == 1 else None)
        counts[key] = counts.get(key, 0) + 1
    return counts


def ramsey_script(ramsey_time="13ms"):
    return "\n".join([
        "@name ramsey-qubit2",
        "prepare dd",
        "config B",
        "pulse q2 angle=pi/2",
        "config A",
        f"wait {ramsey_time}",
        "config B",
        "pulse q2 angle=pi/2",
        "config A",
        "detect",
    ]) + "\n"


def conditional_detection_script(state="du"):
    return "\n".join([
        "@name conditional-detection",
        f"prepare {state}",
        "detect",
        "branch 1",
        "  config B",
        "  pulse q2 angle=pi",
        "  config A",
        "  detect",
        "end",
    ]) + "\n"
