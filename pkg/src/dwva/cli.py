"""Command line entry point: ``dwva <verb> ...``.

Exit codes: 0 success, 1 verification mismatch, 2 config error,
3 physics-precondition error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .errors import ConfigError, PhysicsError
from .spectrum_lab import export_psd, peak_snr_db, synthesize_dual_port, welch_psd

log = logging.getLogger("dwva")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 1, 2, 3, 4

#: The two 3 dB angles read at 800 uW, used by ``calibrate`` as a cross-check.
HIGH_POWER_CHECK = {"yaw": (0.1e-3, 83e-12), "pitch": (0.04e-3, 89e-12)}


def _load(args) -> ex.Experiment:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"trace.seed={args.seed}")
    if getattr(args, "trials", None) is not None:
        overrides.append(f"sweep.trials={args.trials}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"sweep.workers={args.workers}")
    return ex.load_experiment(args.config, args.preset, overrides)


def _write(table, args, exp, command, notes=()) -> None:
    meta = ex.metadata(exp, command, args.format, notes)
    if args.out:
        digest = ex.emit(table, args.format, args.out, meta)
        log.info("wrote %s (sha256 %s)", args.out, digest)
    else:
        sys.stdout.write(ex.render(table, args.format, meta))


def _notes(exp) -> list:
    note = exp.resolved["sweep"].get("grid_note")
    return [note] if note else []


def cmd_sweep(args) -> int:
    exp = _load(args)
    table = ex.run_sweeps(exp)
    _write(table, args, exp, "sweep", _notes(exp))
    return EXIT_OK


def cmd_min_angle(args) -> int:
    exp = _load(args)
    _write(ex.min_angle_table(exp), args, exp, "min-angle")
    return EXIT_OK


def cmd_simulate_spectrum(args) -> int:
    exp = _load(args)
    cfg, cal, tc = exp.system, exp.calibration, exp.trace
    sweep = exp.resolved["sweep"]
    yaw_mv = args.yaw_mv if args.yaw_mv is not None else sweep["drive_yaw_mv"]
    pitch_mv = args.pitch_mv if args.pitch_mv is not None else sweep["drive_pitch_mv"]
    budget = exp.budget()
    traces = synthesize_dual_port(cfg, budget, cal.angle("yaw", yaw_mv * 1e-3), cal.angle("pitch", pitch_mv * 1e-3), tc)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config": exp.resolved, "config_digest": exp.digest, "seed": tc.seed,
            "drive_yaw_mv": yaw_mv, "drive_pitch_mv": pitch_mv}
    for label, trace, f_mod, angle_port in (
        ("I", traces[0], cfg.mod_freq_yaw, "yaw"),
        ("II", traces[1], cfg.mod_freq_pitch, "pitch"),
    ):
        ps = welch_psd(trace, tc)
        export_psd(ps, out / f"psd_port{label}.txt", dict(meta, port=label))
        reading = peak_snr_db(ps, f_mod)
        print(f"port {label} ({angle_port}): peak {reading:.2f} dB at {f_mod:g} Hz, "
              f"RBW {ps.rbw:.3f} Hz, {ps.n_segments} segments")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    anchors = dict(ex.REFERENCE_ANCHORS)
    if args.from_table:
        slopes = {}
        with open(args.from_table, encoding="utf-8") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            rows = list(reader)
        for port in ("yaw", "pitch"):
            sel = [r for r in rows if r.get("port") == port and r.get("angle_mc_rad") not in (None, "nan")]
            if not sel:
                raise ConfigError(f"no {port} rows with angle_mc_rad", "--from-table")
            volts = [float(r["voltage_mV"]) * 1e-3 for r in sel]
            angles = [float(r["angle_mc_rad"]) for r in sel]
            slopes[port] = ex.fit_slope(volts, angles)
        cal = ex.Calibration(slopes["yaw"], slopes["pitch"])
    else:
        if args.yaw_anchor:
            anchors["yaw"] = _anchor(args.yaw_anchor)
        if args.pitch_anchor:
            anchors["pitch"] = _anchor(args.pitch_anchor)
        cal = ex.Calibration.from_anchors(anchors)
    print(f"yaw_nrad_per_mv = {cal.yaw_slope * 1e6:.6g}")
    print(f"pitch_nrad_per_mv = {cal.pitch_slope * 1e6:.6g}")
    for port, (volts, measured) in HIGH_POWER_CHECK.items():
        predicted = cal.angle(port, volts)
        print(f"{port}: {volts * 1e3:g} mV -> {predicted * 1e12:.1f} prad "
              f"(reference {measured * 1e12:.0f} prad, {100 * abs(predicted / measured - 1):.1f} % off)")
    return EXIT_OK


def _anchor(text: str):
    try:
        mv, nrad = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"anchor {text!r} is not MV:NRAD", "--anchor") from exc
    return mv * 1e-3, nrad * 1e-9


def cmd_verify(args) -> int:
    path = Path(args.file)
    original = path.read_bytes()
    meta = ex.read_metadata(path)
    exp = ex.experiment_from_metadata(meta)
    command = meta.get("command")
    if command == "sweep":
        table = ex.run_sweeps(exp, workers=args.workers)
    elif command == "min-angle":
        table = ex.min_angle_table(exp)
    else:
        raise ConfigError(f"cannot verify output of {command!r}", "command")
    regenerated = ex.render(table, meta["format"], ex.metadata(exp, command, meta["format"], meta.get("notes", ())))
    old = hashlib.sha256(original).hexdigest()
    new = hashlib.sha256(regenerated.encode("utf-8")).hexdigest()
    if old == new:
        print(f"OK {path} sha256 {old}")
        return EXIT_OK
    print(f"MISMATCH {path}: file {old} != rerun {new}")
    return EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwva", description="Double weak-value beam-deflection simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p, mc=False):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="INI config file")
        src.add_argument("--preset", help=f"bundled preset ({', '.join(ex.list_presets())})")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (directory for simulate-spectrum)")
        if mc:
            p.add_argument("--trials", type=int)
            p.add_argument("--workers", type=int)

    p = sub.add_parser("sweep", help="run the sweep defined in the config")
    config_args(p, mc=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("min-angle", help="closed-form minimum measurable angles")
    config_args(p)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_min_angle)

    p = sub.add_parser("simulate-spectrum", help="one simultaneous two-port run, PSD files per port")
    config_args(p)
    p.add_argument("--yaw-mv", type=float)
    p.add_argument("--pitch-mv", type=float)
    p.set_defaults(func=cmd_simulate_spectrum)

    p = sub.add_parser("calibrate", help="voltage-to-angle slopes from anchors or a voltage-sweep table")
    p.add_argument("--yaw-anchor", metavar="MV:NRAD")
    p.add_argument("--pitch-anchor", metavar="MV:NRAD")
    p.add_argument("--from-table", metavar="CSV")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="re-run an output file from its embedded config and compare digests")
    p.add_argument("file")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
