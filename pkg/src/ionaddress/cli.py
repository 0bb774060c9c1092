"""``ionaddress`` command line: one executable, one subcommand per analysis.

All physics inputs come from the config file; flags only pick actions,
sweeps, the output directory, the format and the seed.

Exit codes: 0 success, 2 usage/config error, 3 model error. Errors are also
written to stderr as one JSON record.
"""

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import addressing as ad
from . import fieldmodel as fm
from . import hyperfine as hf
from . import optimizer as opt
from . import output
from . import sequencer as sq
from .config import ConfigError, load_config
from .trapmodel import make_layout
from .units import TWO_PI, UnitError, parse_quantity


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers --------------------------------------------------------------------


def parse_range(text, kind):
    """``START:STOP:STEPS`` with unit-suffixed endpoints."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range {text!r} is not START:STOP:STEPS")
    try:
        start = parse_quantity(parts[0], kind)
        stop = parse_quantity(parts[1], kind)
        steps = int(parts[2])
    except (UnitError, ValueError) as exc:
        raise UsageError(f"bad range {text!r}: {exc}") from None
    if steps < 1:
        raise UsageError(f"range {text!r} has no points")
    return start, stop, steps


def parse_scan(text):
    if "=" not in text:
        raise UsageError(f"--scan expects KEY=START:STOP:STEPS, got {text!r}")
    key, rng = text.split("=", 1)
    if key not in sq.PULSE_KEYS:
        raise UsageError(f"cannot scan {key!r}; choose one of {sorted(sq.PULSE_KEYS)}")
    parts = rng.split(":")
    if len(parts) != 3:
        raise UsageError(f"--scan range {rng!r} is not START:STOP:STEPS")
    try:
        q0 = sq._parse_value(key, parts[0], 0, 0)
        q1 = sq._parse_value(key, parts[1], 0, 0)
        steps = int(parts[2])
    except (sq.ScriptSyntaxError, ValueError) as exc:
        raise UsageError(f"bad --scan value: {exc}") from None
    if q0.unit != q1.unit:
        raise UsageError("--scan endpoints must use the same unit")
    if steps < 1:
        raise UsageError("--scan needs at least one step")
    values = [sq.Quantity(float(v), q0.unit) for v in np.linspace(q0.value, q1.value, steps)]
    return key, q0.unit, values


def _levels(cfg, atom):
    if cfg.get("static_field") is None:
        b0 = hf.field_independent_point(atom, hf.DOWN, hf.UP, (5e-3, 40e-3))
    else:
        b0 = cfg.quantity("static_field", "field")
    return hf.diagonalize(atom, b0)


def _layout(cfg, trap, label="B", offset=None):
    off = cfg.vector("layout.ion2_offset", "length", ["0 nm", "350 nm"]) if offset is None else offset
    return make_layout(
        trap,
        label,
        ion2_offset=off,
        residual_floor=cfg.quantity("layout.residual_micromotion", "length", "0.42 nm"),
        switch_time=cfg.quantity("layout.switch_time", "time", "80 us"),
    )


def _direction(cfg, key):
    v = cfg.get(key, [0, 1])
    if not isinstance(v, list) or len(v) != 2 or not all(isinstance(x, (int, float)) for x in v):
        raise cfg.error("direction must be two numbers (x, z)", key)
    return np.array(v, float)


def build_drive(cfg, key, bases, levels, layout, axis, frequency=0.0):
    entry = cfg.get(key)
    if not isinstance(entry, dict):
        raise cfg.error("drive must be a mapping with 'rates', 'null_position'/'gradient' or 'currents'", key)
    unknown = set(entry) - {"currents", "rates", "null_position", "gradient", "direction"}
    if unknown:
        raise cfg.error(f"unknown drive keys {sorted(unknown)}", key)
    if "currents" in entry:
        cur = {}
        for name, v in entry["currents"].items():
            if not isinstance(v, list) or len(v) != 2:
                raise cfg.error("currents are [re, im] pairs in amperes", f"{key}.currents.{name}")
            cur[name] = complex(float(v[0]), float(v[1]))
        return fm.DriveConfiguration(cur, frequency)
    if "rates" in entry:
        r = cfg.vector(f"{key}.rates", "frequency")
        offset = layout.radial(2) - layout.radial(1)
        return opt.tune_to_rates(bases, levels, r[0], r[1], offset, axis, frequency=frequency)
    null = cfg.vector(f"{key}.null_position", "length", ["0 nm", "0 nm"])
    grad = cfg.quantity(f"{key}.gradient", "gradient")
    target = opt.DesignTarget(null, grad, _direction(cfg, f"{key}.direction"), frequency)
    return opt.solve_currents(bases, target, axis)


class Context:
    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config)
        self.atom = self.cfg.atom()
        self.bases = self.cfg.bases()
        self.axis = self.cfg.axis()
        self.trap = self.cfg.trap(self.atom)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self._levels = None

    @property
    def levels(self):
        if self._levels is None:
            self._levels = _levels(self.cfg, self.atom)
        return self._levels

    def header(self, **extra):
        return output.header_fields(self.cfg.digest, self.args.seed, extra)


# -- method reports -----------------------------------------------------------


def method_report(ctx, name):
    cfg, key = ctx.cfg, f"methods.{name}"
    if cfg.get(key) is None:
        raise cfg.error("method not configured", key)
    layout = _layout(cfg, ctx.trap)
    levels = ctx.levels
    if name == "I":
        if cfg.get(f"{key}.rates") is not None:
            r = cfg.vector(f"{key}.rates", "frequency")
            return ad.method_I_from_rates(r[0], r[1])
        drive = build_drive(cfg, f"{key}.drive", ctx.bases, levels, layout, ctx.axis)
        return ad.method_I(ctx.bases, drive, layout, levels, ctx.axis)
    if name == "II":
        if cfg.get(f"{key}.rates") is not None:
            r = cfg.vector(f"{key}.rates", "frequency")
            dacz = cfg.quantity(f"{key}.differential_acz", "frequency") if cfg.get(f"{key}.differential_acz") else None
            return ad.method_II_from_rates(r[0], r[1], dacz)
        drive = build_drive(cfg, f"{key}.drive", ctx.bases, levels, layout, ctx.axis)
        eff = cfg.number("layout.micromotion_efficiency", 1.0, positive=True)
        return ad.method_II(ctx.bases, drive, layout, levels, ctx.trap, ctx.axis, efficiency=eff)
    if name == "III":
        if cfg.get(f"{key}.shifts") is not None:
            s = cfg.vector(f"{key}.shifts", "frequency")
            return ad.method_III_from_shifts(s[0], s[1])
        drive = build_drive(cfg, f"{key}.drive", ctx.bases, levels, layout, ctx.axis)
        return ad.method_III(ctx.bases, drive, layout, levels, cfg.quantity(f"{key}.detuning", "frequency"), ctx.axis)
    if name == "IV":
        rate = cfg.quantity(f"{key}.drive_rate", "frequency")
        if cfg.get(f"{key}.splitting") is not None:
            return ad.method_IV_from_rates(rate, cfg.quantity(f"{key}.splitting", "frequency"))
        drive = build_drive(cfg, f"{key}.drive", ctx.bases, levels, layout, ctx.axis)
        return ad.method_IV(ctx.bases, drive, rate, layout, levels, cfg.quantity(f"{key}.detuning", "frequency"),
                            ctx.axis)
    raise UsageError(f"unknown method {name!r}")


# -- subcommands --------------------------------------------------------------


def cmd_hyperfine(ctx):
    cfg = ctx.cfg
    if ctx.args.range:
        lo, hi, n = parse_range(ctx.args.range, "field")
    else:
        scan = cfg.get("hyperfine.scan", ["5 mT", "40 mT", 351])
        lo, hi, n = cfg.quantity("hyperfine.scan.0", "field"), cfg.quantity("hyperfine.scan.1", "field"), int(scan[2])
    if not hi > lo or n < 2:
        raise UsageError("field range must be increasing with at least two points")
    fields = np.linspace(lo, hi, n)
    freqs = np.array([hf.transition_frequency(hf.diagonalize(ctx.atom, b), hf.DOWN, hf.UP) for b in fields])
    slope = np.gradient(freqs, fields)
    rows = [(b * 1e3, f / TWO_PI, s / TWO_PI * 1e-3) for b, f, s in zip(fields, freqs, slope)]
    hdr = ctx.header(transition="|3,1> <-> |2,1>")
    output.write_table(ctx.out, "hyperfine_scan", ["B0_mT", "f_qubit_Hz", "df_dB_Hz_per_mT"], rows,
                       ctx.args.format, hdr)
    b_star = hf.field_independent_point(ctx.atom, hf.DOWN, hf.UP, (lo, hi))
    f_star = hf.transition_frequency(hf.diagonalize(ctx.atom, b_star), hf.DOWN, hf.UP)
    output.write_json(ctx.out, "hyperfine_point.json",
                      {"field_independent_B0_mT": b_star * 1e3, "qubit_frequency_Hz": f_star / TWO_PI}, hdr)
    return {"B0_mT": b_star * 1e3, "f_Hz": f_star / TWO_PI}


def cmd_fieldmap(ctx):
    cfg = ctx.cfg
    if ctx.args.grid:
        parts = ctx.args.grid.split(",")
        if len(parts) != 2:
            raise UsageError("--grid expects XSTART:XSTOP:NX,ZSTART:ZSTOP:NZ")
        x0, x1, nx = parse_range(parts[0], "length")
        z0, z1, nz = parse_range(parts[1], "length")
    else:
        x0, x1 = cfg.quantity("fieldmap.x.0", "length"), cfg.quantity("fieldmap.x.1", "length")
        z0, z1 = cfg.quantity("fieldmap.z.0", "length"), cfg.quantity("fieldmap.z.1", "length")
        nx, nz = int(cfg.require("fieldmap.x.2")), int(cfg.require("fieldmap.z.2"))
    grid = fm.grid_positions((x0, x1), (z0, z1), nx, nz)
    layout = _layout(cfg, ctx.trap)
    drive = build_drive(cfg, "fieldmap.drive", ctx.bases, ctx.levels, layout, ctx.axis)
    fmap = fm.pi_time_map(ctx.bases, drive, ctx.levels, hf.QUBIT, grid, ctx.axis)
    null = fm.find_null(ctx.bases, drive)
    hdr = ctx.header(
        field_unit="uT",
        outside_validity_radius=fmap.outside_validity,
        null_x_um=float(null.position[0] * 1e6),
        null_z_um=float(null.position[1] * 1e6),
        imperfect_null=null.imperfect,
    )
    rows = [
        (float(p[0] * 1e6), float(p[1] * 1e6), float(b.real * 1e6), float(b.imag * 1e6), float(q * 1e6),
         float(t * 1e6))
        for p, b, q, t in zip(fmap.positions, fmap.parallel, fmap.perpendicular, fmap.pi_time)
    ]
    output.write_table(ctx.out, "fieldmap", ["x_um", "z_um", "B_par_re", "B_par_im", "B_perp", "T_pi_us"], rows,
                       ctx.args.format, hdr)
    return {"points": len(rows), "outside_validity": fmap.outside_validity}


def cmd_methods(ctx):
    names = ctx.args.method or list(ad.METHODS)
    reports = [method_report(ctx, n) for n in names]
    hdr = ctx.header()
    output.write_text(ctx.out, "methods_table.txt", ad.table_comparison(reports), hdr)
    output.write_text(ctx.out, "methods.jsonl", json.dumps({"header": hdr}, sort_keys=True) + "\n"
                      + ad.reports_to_json(reports))
    iv = next((r for r in reports if r.method == "IV"), None)
    if iv is not None and ctx.cfg.get("methods.IV.scan") is not None:
        lo = ctx.cfg.quantity("methods.IV.scan.0", "frequency")
        hi = ctx.cfg.quantity("methods.IV.scan.1", "frequency")
        n = int(ctx.cfg.require("methods.IV.scan.2"))
        det = np.linspace(lo, hi, n)
        p = ad.spectrum_scan(iv.rate_q1, iv.differential_acz, det)
        output.write_table(ctx.out, "spectrum_scan", ["detuning_kHz", "P_down_total"],
                           [(d / TWO_PI * 1e-3, float(v)) for d, v in zip(det, p)], ctx.args.format, hdr)
    return {"methods": [r.method for r in reports]}


def sequence_bundle(ctx):
    cfg = ctx.cfg
    method = cfg.get("sequence.method", "I")
    if method not in ad.METHODS:
        raise cfg.error(f"unknown method {method!r}", "sequence.method")
    report = method_report(ctx, method)
    g = cfg.quantity("sequence.global_rate", "frequency") if cfg.get("sequence.global_rate") else None
    return sq.ModelBundle.from_report(
        report,
        global_rate=g,
        switch_time=cfg.quantity("layout.switch_time", "time", "80 us"),
        detection_error=cfg.number("sequence.detection_error", 0.0),
        preparation_error=cfg.number("sequence.preparation_error", 0.0),
        phase_slip=cfg.number("sequence.phase_slip", 0.0),
    )


_SCAN_COLUMNS = {"duration": ("t_us", 1e6), "detuning": ("detuning_kHz", 1e-3 / TWO_PI),
                 "rate": ("rate_kHz", 1e-3 / TWO_PI), "phase": ("phase_rad", 1.0), "angle": ("angle_rad", 1.0)}


def cmd_sequence(ctx):
    path = Path(ctx.args.script)
    if not path.exists():
        raise UsageError(f"script {str(path)!r} does not exist")
    program = sq.parse(path.read_text())
    bundle = sequence_bundle(ctx)
    shots = ctx.args.shots if ctx.args.shots is not None else ctx.cfg.get("sequence.shots")
    seed = ctx.args.seed if program.seed is None else program.seed
    hdr = ctx.header(script=path.name, shots=shots)
    if ctx.args.scan:
        key, unit, values = parse_scan(ctx.args.scan)
        col, scale = _SCAN_COLUMNS[key]
        rows = []
        for v in values:
            tr = sq.execute(sq.with_pulse_argument(program, key, v), bundle, shots=shots, seed=seed)
            p1, p2 = tr.p_down_final
            rows.append((v.si * scale, p1, p2, p1 + p2))
        output.write_table(ctx.out, "scan", [col, "P_down_ion1", "P_down_ion2", "total_bright_expectation"], rows,
                           ctx.args.format, hdr)
        return {"scan_points": len(rows)}
    tr = sq.execute(program, bundle, shots=shots, seed=seed)
    rows = [(r.step, r.time * 1e6, r.p_down_q1, r.p_down_q2) for r in tr.rows]
    output.write_table(ctx.out, "trace", ["step", "time_us", "P_down_q1", "P_down_q2"], rows, ctx.args.format, hdr)
    dist = {",".join(map(str, k)): v for k, v in tr.detection_distribution().items()}
    output.write_json(ctx.out, "detection.json", {
        "final_bright_count_distribution": {str(k): v for k, v in tr.final_count_distribution().items()},
        "detection_record_distribution": dist,
        "p_down_final": list(tr.p_down_final),
    }, hdr)
    return {"steps": len(rows)}


def cmd_optimize(ctx):
    cfg = ctx.cfg
    null = cfg.vector("optimize.null_position", "length", ["0 nm", "0 nm"])
    target = opt.DesignTarget(null, cfg.quantity("optimize.gradient", "gradient"), _direction(cfg, "optimize.direction"))
    drive = opt.solve_currents(ctx.bases, target, ctx.axis)
    found = fm.find_null(ctx.bases, drive)
    hdr = ctx.header(
        residual_field_T=float(np.linalg.norm(fm.field_at(ctx.bases, drive, null))),
        gradient_T_per_m=opt.measured_gradient(ctx.bases, drive, target.direction, ctx.axis),
        null_found_x_um=float(found.position[0] * 1e6),
        null_found_z_um=float(found.position[1] * 1e6),
    )
    rows = [(k, c.real, c.imag, abs(c), math.atan2(c.imag, c.real)) for k, c in drive.currents.items()]
    output.write_table(ctx.out, "currents", ["electrode", "re_A", "im_A", "amplitude_A", "phase_rad"], rows,
                       ctx.args.format, hdr)
    result = {"currents": {k: [c.real, c.imag] for k, c in drive.currents.items()}}

    layout = _layout(cfg, ctx.trap)
    if cfg.get("optimize.sensitivity") is not None:
        a = cfg.number("optimize.sensitivity.amplitude_error", 0.0)
        p = cfg.number("optimize.sensitivity.phase_error", 0.0)
        n = int(cfg.number("optimize.sensitivity.trials", 1000))
        rep = opt.sensitivity(ctx.bases, drive, layout, ctx.levels, a, p, n, ctx.args.seed, ctx.axis)
        payload = {
            "amplitude_error_rms": rep.amplitude_error_rms,
            "phase_error_rms": rep.phase_error_rms,
            "residual_parallel_field_T": {"median": rep.residual_parallel_field_quantiles[0],
                                          "p90": rep.residual_parallel_field_quantiles[1]},
            "implied_spectator_rate_Hz": {"median": rep.implied_spectator_rate_quantiles[0] / TWO_PI,
                                          "p90": rep.implied_spectator_rate_quantiles[1] / TWO_PI},
            "trials": rep.trials,
            "seed": rep.seed,
        }
        if cfg.get("optimize.sensitivity.calibrate_median") is not None:
            goal = cfg.quantity("optimize.sensitivity.calibrate_median", "field")
            payload["calibrated_error_rms"] = opt.calibrate_error_level(
                ctx.bases, drive, layout, ctx.levels, goal, 1.0, n, ctx.args.seed)
            payload["calibration_target_T"] = goal
        output.write_json(ctx.out, "sensitivity.json", payload, hdr)
        result["sensitivity"] = payload
    if cfg.get("optimize.sweep_offsets") is not None:
        offsets = [cfg.quantity(f"optimize.sweep_offsets.{i}", "length")
                   for i in range(len(cfg.get("optimize.sweep_offsets")))]
        sweep_drive = build_drive(cfg, "optimize.sweep_drive", ctx.bases, ctx.levels, layout, ctx.axis) \
            if cfg.get("optimize.sweep_drive") is not None else drive
        off = layout.radial(2) - layout.radial(1)
        direction = off / np.linalg.norm(off) if np.linalg.norm(off) else np.array([0.0, 1.0])
        rows, monotone = opt.offset_sweep(ctx.bases, sweep_drive, ctx.levels, ctx.trap, offsets, direction,
                                          axis=ctx.axis)
        output.write_table(
            ctx.out, "sweep", ["offset_nm", "rate_addr_kHz", "rate_spec_kHz", "crosstalk"],
            [(r.offset * 1e9, r.rate_addressed / TWO_PI * 1e-3, r.rate_spectator / TWO_PI * 1e-3, r.crosstalk)
             for r in rows],
            ctx.args.format, ctx.header(monotone_decreasing_beyond_first=_monotone_tail(rows)),
        )
        result["sweep_monotone"] = monotone
    return result


def _monotone_tail(rows):
    xs = [r.crosstalk for r in sorted(rows, key=lambda r: r.offset) if r.offset > 0]
    return all(b <= a for a, b in zip(xs, xs[1:]))


COMMANDS = {
    "hyperfine": cmd_hyperfine,
    "fieldmap": cmd_fieldmap,
    "methods": cmd_methods,
    "sequence": cmd_sequence,
    "optimize": cmd_optimize,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="run configuration (YAML); bundled default if omitted")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json-lines"), default="csv")

    p = _Parser(prog="ionaddress", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ionaddress {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    h = sub.add_parser("hyperfine", parents=[common], help="qubit frequency vs static field")
    h.add_argument("--range", help="B0 sweep START:STOP:STEPS, e.g. 5mT:40mT:351")

    f = sub.add_parser("fieldmap", parents=[common], help="pi-time map over the x-z plane")
    f.add_argument("--grid", help="XSTART:XSTOP:NX,ZSTART:ZSTOP:NZ")

    m = sub.add_parser("methods", parents=[common], help="compare the four addressing methods")
    m.add_argument("--method", action="append", choices=ad.METHODS)

    s = sub.add_parser("sequence", parents=[common], help="run a pulse-sequence script")
    s.add_argument("script")
    s.add_argument("--scan", help="KEY=START:STOP:STEPS over a pulse argument, e.g. duration=0us:600us:121")
    s.add_argument("--shots", type=int, default=None, help="sample this many shots instead of exact probabilities")

    sub.add_parser("optimize", parents=[common], help="solve electrode currents and error budget")
    return p


def _fail(kind, exc, code):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        ctx = Context(args)
        result = COMMANDS[args.command](ctx)
    except (UsageError, ConfigError, UnitError, sq.ScriptSyntaxError, sq.ValidationError) as exc:
        return _fail("usage", exc, 2)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return _fail("model", exc, 3)
    sys.stdout.write(json.dumps({"command": args.command, "out": str(ctx.out), **result}, default=float) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
