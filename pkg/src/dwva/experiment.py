"""Configuration, calibration and the three sweep experiments.

Config files are INI-style (``configparser``). Every key carries its unit
in the name. Sections:

``[system]``
    wavelength_nm, waist_mm, input_power_uw, lo_power_mw (required);
    postselection_yaw | phi1_rad, postselection_pitch | phi2_rad (one of
    each pair required); eta_optical (1.0), eta_effective (unset),
    lever_arm_mm (19), mod_freq_yaw_hz (5000), mod_freq_pitch_hz (6000),
    integration_time_s (unset: 1/rbw).
``[calibration]``
    yaw_nrad_per_mv (0.8), pitch_nrad_per_mv (2.15).
``[trace]``
    sample_rate_hz (100000), duration_s (10), rbw_hz (10), window (hann),
    seed (0).
``[sweep]``
    kind (voltage | postselection | power), ports (yaw, pitch),
    points_yaw, points_pitch (comma lists; mV, probability or uW by kind),
    drive_yaw_mv, drive_pitch_mv, trials (20), workers (1), grid_note.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import detection as det
from .errors import ConfigError, DegeneratePostselection
from .hg_pointer import BeamGeometry, Deflection
from .selection_states import phase_for_probability
from .spectrum_lab import (
    TraceConfig,
    expected_reading_db,
    peak_snr_db,
    synthesize_trace,
    welch_psd,
)
from .wva_pipeline import DarkPort, SystemConfig, dark_port, stage_power_budget

SCHEMA_VERSION = 1
SWEEP_KINDS = ("voltage", "postselection", "power")
PORTS = {"yaw": DarkPort.I, "pitch": DarkPort.II}
SETTING_COLUMN = {"voltage": "voltage_mV", "postselection": "postselection", "power": "input_power_uW"}

#: (voltage [V], angle [rad]) at which the 3 dB peak was read at 50 uW.
REFERENCE_ANCHORS = {"yaw": (0.4e-3, 0.32e-9), "pitch": (0.2e-3, 0.43e-9)}

DEFAULTS = {
    "system": {
        "eta_optical": 1.0,
        "eta_effective": None,
        "lever_arm_mm": 19.0,
        "mod_freq_yaw_hz": 5000.0,
        "mod_freq_pitch_hz": 6000.0,
        "integration_time_s": None,
    },
    "calibration": {"yaw_nrad_per_mv": 0.8, "pitch_nrad_per_mv": 2.15},
    "trace": {"sample_rate_hz": 100000.0, "duration_s": 10.0, "rbw_hz": 10.0, "window": "hann", "seed": 0},
    "sweep": {
        "kind": None,
        "ports": ["yaw", "pitch"],
        "points_yaw": [],
        "points_pitch": [],
        "drive_yaw_mv": 0.0,
        "drive_pitch_mv": 0.0,
        "trials": 20,
        "workers": 1,
        "grid_note": "",
    },
}
REQUIRED = {"system": ("wavelength_nm", "waist_mm", "input_power_uw", "lo_power_mw")}
_SELECTION_KEYS = ("postselection_yaw", "phi1_rad", "postselection_pitch", "phi2_rad")
KNOWN_KEYS = {
    section: set(values) | set(REQUIRED.get(section, ())) | (set(_SELECTION_KEYS) if section == "system" else set())
    for section, values in DEFAULTS.items()
}
LIST_KEYS = {"ports", "points_yaw", "points_pitch"}
STRING_KEYS = {"window", "kind", "grid_note", "preset"}
INT_KEYS = {"seed", "trials", "workers", "schema_version"}


@dataclass(frozen=True)
class Calibration:
    """Linear, zero-intercept PZT voltage to angle map [rad/V]."""

    yaw_slope: float
    pitch_slope: float

    def __post_init__(self):
        if not (self.yaw_slope > 0 and self.pitch_slope > 0):
            raise ConfigError("slopes must be positive", "calibration")

    @classmethod
    def from_anchors(cls, anchors=REFERENCE_ANCHORS) -> "Calibration":
        return cls(
            yaw_slope=fit_slope([anchors["yaw"][0]], [anchors["yaw"][1]]),
            pitch_slope=fit_slope([anchors["pitch"][0]], [anchors["pitch"][1]]),
        )

    def slope(self, port: str) -> float:
        return self.yaw_slope if port == "yaw" else self.pitch_slope

    def angle(self, port: str, voltage: float) -> float:
        return self.slope(port) * voltage


def fit_slope(x, y) -> float:
    """Least-squares slope of a line through the origin."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    denom = float(np.dot(x, x))
    if denom == 0:
        raise ValueError("need at least one non-zero abscissa")
    return float(np.dot(x, y)) / denom


@dataclass
class SweepSpec:
    kind: str
    port: str
    points: list
    trials: int
    base: SystemConfig
    drive_mv: float = 0.0
    integration_time: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}", "sweep.kind")
        if self.port not in PORTS:
            raise ConfigError(f"unknown port {self.port!r}", "sweep.ports")
        if not self.points:
            raise ConfigError("no sweep points", f"sweep.points_{self.port}")
        if self.trials < 1:
            raise ConfigError("must be >= 1", "sweep.trials")


@dataclass
class Experiment:
    system: SystemConfig
    calibration: Calibration
    trace: TraceConfig
    resolved: dict
    integration_time: Optional[float] = None
    sweeps: list = field(default_factory=list)
    workers: int = 1

    @property
    def digest(self) -> str:
        return config_digest(self.resolved)

    def budget(self, cfg: SystemConfig | None = None) -> det.PhotonBudget:
        return det.photon_budget(cfg or self.system, self.integration_time or 1 / self.trace.rbw)


# -- config parsing ---------------------------------------------------------


def _coerce(section: str, key: str, value):
    path = f"{section}.{key}"
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        if key in LIST_KEYS:
            return []
        return None if key not in STRING_KEYS else ""
    try:
        if key in LIST_KEYS:
            items = value if isinstance(value, (list, tuple)) else [v for v in str(value).split(",")]
            items = [str(v).strip() if key == "ports" else float(v) for v in items if str(v).strip()]
            return items
        if key in STRING_KEYS:
            return str(value).strip()
        if key in INT_KEYS:
            return int(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {value!r}", path) from exc


def resolve_mapping(raw: dict) -> dict:
    """Fill defaults, coerce types and validate presence of required keys."""
    out = copy.deepcopy(DEFAULTS)
    meta = {"schema_version": SCHEMA_VERSION}
    for section, values in raw.items():
        if section == "meta":
            for key, value in values.items():
                meta[key] = _coerce("meta", key, value) if key == "schema_version" else str(value)
            continue
        if section not in out:
            raise ConfigError("unknown section", section)
        target = out[section]
        for key, value in values.items():
            if key not in KNOWN_KEYS[section]:
                raise ConfigError("unknown key", f"{section}.{key}")
            target[key] = _coerce(section, key, value)
    for section, keys in REQUIRED.items():
        for key in keys:
            if out.get(section, {}).get(key) is None:
                raise ConfigError("required field missing", f"{section}.{key}")
    system = out["system"]
    for prob, phase in (("postselection_yaw", "phi1_rad"), ("postselection_pitch", "phi2_rad")):
        have = [k for k in (prob, phase) if system.get(k) is not None]
        if len(have) != 1:
            raise ConfigError(f"give exactly one of {prob} or {phase}", f"system.{prob}")
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {meta.get('schema_version')}", "meta.schema_version")
    out["meta"] = meta
    return out


def _phase(system: dict, prob_key: str, phase_key: str) -> float:
    if system.get(phase_key) is not None:
        return system[phase_key]
    p = system[prob_key]
    if not 0 < p < 1:
        raise DegeneratePostselection(f"system.{prob_key} = {p} outside (0, 1)")
    return phase_for_probability(p)


def build_experiment(resolved: dict) -> Experiment:
    s, c, t, w = resolved["system"], resolved["calibration"], resolved["trace"], resolved["sweep"]
    try:
        geom = BeamGeometry(waist=s["waist_mm"] * 1e-3, wavelength=s["wavelength_nm"] * 1e-9)
    except ValueError as exc:
        raise ConfigError(str(exc), "system") from exc
    system = SystemConfig(
        geom=geom,
        phi1=_phase(s, "postselection_yaw", "phi1_rad"),
        phi2=_phase(s, "postselection_pitch", "phi2_rad"),
        eta=s["eta_optical"],
        eta_effective=s["eta_effective"],
        input_power=s["input_power_uw"] * 1e-6,
        lo_power=s["lo_power_mw"] * 1e-3,
        lever_arm=s["lever_arm_mm"] * 1e-3,
        mod_freq_yaw=s["mod_freq_yaw_hz"],
        mod_freq_pitch=s["mod_freq_pitch_hz"],
    )
    cal = Calibration(yaw_slope=c["yaw_nrad_per_mv"] * 1e-6, pitch_slope=c["pitch_nrad_per_mv"] * 1e-6)
    trace = TraceConfig(
        sample_rate=t["sample_rate_hz"],
        duration=t["duration_s"],
        rbw=t["rbw_hz"],
        seed=t["seed"],
        window=t["window"],
    )
    exp = Experiment(system, cal, trace, resolved, s.get("integration_time_s"), workers=max(1, w["workers"]))
    if w["kind"]:
        for port in w["ports"]:
            exp.sweeps.append(
                SweepSpec(
                    kind=w["kind"],
                    port=port,
                    points=list(w[f"points_{port}"]),
                    trials=w["trials"],
                    base=system,
                    drive_mv=w[f"drive_{port}_mv"],
                    integration_time=exp.integration_time,
                )
            )
    return exp


def parse_ini(text: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return {name: dict(parser[name]) for name in parser.sections()}


def preset_path(name: str) -> Path:
    path = resources.files("dwva") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ConfigError(f"no preset named {name!r}", "preset")
    return Path(str(path))


def list_presets() -> list:
    return sorted(p.name[:-4] for p in (resources.files("dwva") / "presets").iterdir() if p.name.endswith(".ini"))


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value", "--set")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        raw.setdefault(section, {})[key] = value
    return raw


def load_experiment(path=None, preset=None, overrides=None) -> Experiment:
    """Read a config file or a named preset, apply ``section.key=value`` overrides."""
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config path or a preset")
    path = preset_path(preset) if preset else Path(path)
    text = Path(path).read_text(encoding="utf-8")  # OSError propagates as I/O error
    raw = apply_overrides(parse_ini(text), overrides)
    return build_experiment(resolve_mapping(raw))


def load_config(path) -> SystemConfig:
    return load_experiment(path).system


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_digest(resolved: dict) -> str:
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()


# -- Monte-Carlo machinery ------------------------------------------------------


def trial_seed(base_seed: int, port: str, point: int, trial: int) -> int:
    """Independent 64-bit seed for one (port, point, trial) cell."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(list(PORTS).index(port), point, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def _mc_trial(task) -> float:
    cfg, port, angle, tc, integration_time = task
    budget = det.photon_budget(cfg, integration_time or 1 / tc.rbw)
    lam = cfg.geom.wavelength
    state = dark_port(cfg, Deflection(wavelength=lam), PORTS[port])
    f_mod = cfg.mod_freq_yaw if port == "yaw" else cfg.mod_freq_pitch
    ps = welch_psd(synthesize_trace(state, budget, f_mod, angle, tc), tc)
    return peak_snr_db(ps, f_mod)


def _run_tasks(tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_mc_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_mc_trial(t) for t in tasks]


def _finite(x: float):
    return float(x) if math.isfinite(x) else None


def _mc_columns(readings, cfg, budget, port) -> dict:
    readings = np.asarray(readings, dtype=float)
    mean_lin = float(np.mean(np.power(10.0, readings / 10)))
    snr_mc = mean_lin - 1
    return {
        "peak_snr_db_mc": 10 * math.log10(mean_lin),
        "mc_std": float(np.std(readings, ddof=1)) if readings.size > 1 else 0.0,
        "snr_db_mc": det.to_db(snr_mc),
        "angle_mc_rad": det.angle_from_snr(cfg, budget, PORTS[port], snr_mc),
    }


def _analytic_columns(cfg, budget, port, angle) -> dict:
    snr_lin = det.snr_at_angle(cfg, budget, PORTS[port], angle)
    return {
        "snr_db_ideal": det.to_db(snr_lin),
        "peak_snr_db_analytic": expected_reading_db(snr_lin),
    }


def _sweep(spec: SweepSpec, tc: TraceConfig, workers: int, cells) -> list:
    """``cells`` yields ``(setting, cfg, angle, extra_columns)`` per sweep point."""
    cells = list(cells)
    tasks = []
    for i, (_, cfg, angle, _) in enumerate(cells):
        for trial in range(spec.trials):
            tc_trial = TraceConfig(tc.sample_rate, tc.duration, tc.rbw, trial_seed(tc.seed, spec.port, i, trial), tc.window)
            tasks.append((cfg, spec.port, angle, tc_trial, spec.integration_time))
    readings = _run_tasks(tasks, workers)
    rows = []
    for i, (setting, cfg, angle, extra) in enumerate(cells):
        budget = det.photon_budget(cfg, spec.integration_time or 1 / tc.rbw)
        row = {"sweep": spec.kind, "port": spec.port, SETTING_COLUMN[spec.kind]: setting, "angle_rad": angle}
        row.update(extra)
        row.update(_analytic_columns(cfg, budget, spec.port, angle))
        row.update(_mc_columns(readings[i * spec.trials : (i + 1) * spec.trials], cfg, budget, spec.port))
        row["trials"] = spec.trials
        rows.append({k: (_finite(v) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return rows


def run_voltage_sweep(spec: SweepSpec, cal: Calibration, tc: TraceConfig, workers: int = 1) -> list:
    """Peak SNR versus PZT drive voltage; ``spec.points`` in mV."""
    if spec.kind != "voltage":
        raise ConfigError("expected a voltage sweep", "sweep.kind")
    cells = ((v, spec.base, cal.angle(spec.port, v * 1e-3), {}) for v in spec.points)
    return _sweep(spec, tc, workers, cells)


def run_postselection_sweep(spec: SweepSpec, cal: Calibration, tc: TraceConfig, workers: int = 1) -> list:
    """Peak SNR versus post-selection probability at fixed input power and drive."""
    if spec.kind != "postselection":
        raise ConfigError("expected a postselection sweep", "sweep.kind")
    angle = cal.angle(spec.port, spec.drive_mv * 1e-3)
    cells = []
    for p in spec.points:
        if not 0 < p < 1:
            raise DegeneratePostselection(f"post-selection probability {p} outside (0, 1)")
        key = "phi1" if spec.port == "yaw" else "phi2"
        cfg = spec.base.replace(**{key: phase_for_probability(p)})
        powers = stage_power_budget(cfg)
        out_power = powers.dark_I if spec.port == "yaw" else powers.dark_II
        extra = {"output_power_uW": out_power * 1e6, "snr_rel_db_analytic": 10 * math.log10(1 - p)}
        cells.append((p, cfg, angle, extra))
    return _sweep(spec, tc, workers, cells)


def run_power_sweep(spec: SweepSpec, cal: Calibration, tc: TraceConfig, workers: int = 1) -> list:
    """Peak SNR and minimum angle versus input power; ``spec.points`` in uW."""
    if spec.kind != "power":
        raise ConfigError("expected a power sweep", "sweep.kind")
    angle = cal.angle(spec.port, spec.drive_mv * 1e-3)
    cells = []
    for p_uw in spec.points:
        cfg = spec.base.replace(input_power=p_uw * 1e-6)
        mins = det.min_angles(cfg, det.photon_budget(cfg, spec.integration_time or 1 / tc.rbw))
        if spec.port == "yaw":
            extra = {"min_angle_rad": mins.yaw_min, "displacement_m": mins.displacement_yaw}
        else:
            extra = {"min_angle_rad": mins.pitch_min, "displacement_m": mins.displacement_pitch}
        cells.append((p_uw, cfg, angle, extra))
    return _sweep(spec, tc, workers, cells)


RUNNERS = {"voltage": run_voltage_sweep, "postselection": run_postselection_sweep, "power": run_power_sweep}


def run_sweeps(exp: Experiment, workers: int | None = None) -> list:
    if not exp.sweeps:
        raise ConfigError("config defines no sweep", "sweep.kind")
    rows = []
    for spec in exp.sweeps:
        rows.extend(RUNNERS[spec.kind](spec, exp.calibration, exp.trace, workers or exp.workers))
    return rows


def min_angle_table(exp: Experiment) -> list:
    mins = det.min_angles(exp.system, exp.budget())
    return [
        {"port": "yaw", "min_angle_rad": mins.yaw_min, "displacement_m": mins.displacement_yaw,
         "postselection": exp.system.p_yaw},
        {"port": "pitch", "min_angle_rad": mins.pitch_min, "displacement_m": mins.displacement_pitch,
         "postselection": exp.system.p_pitch},
    ]


# -- output -----------------------------------------------------------------------


def metadata(exp: Experiment, command: str, fmt: str, notes=()) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "format": fmt,
        "seed": exp.trace.seed,
        "config_digest": exp.digest,
        "config": exp.resolved,
        "notes": list(notes),
    }


def _columns(table) -> list:
    cols = []
    for row in table:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def _cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(table, fmt: str, meta: dict) -> str:
    """Serialise ``table`` (list of dict rows) with its metadata header."""
    if fmt == "csv":
        lines = [
            f"# schema_version: {meta['schema_version']}",
            f"# command: {meta['command']}",
            f"# seed: {meta['seed']}",
            f"# config_digest: {meta['config_digest']}",
            "# config: " + canonical_json(meta["config"]),
        ]
        lines += [f"# note: {n}" for n in meta["notes"]]
        cols = _columns(table)
        lines.append(",".join(cols))
        lines += [",".join(_cell(row.get(c)) for c in cols) for row in table]
        return "\n".join(lines) + "\n"
    if fmt == "jsonl":
        lines = [canonical_json({"_meta": meta})]
        lines += [canonical_json(row) for row in table]
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}", "--format")


def emit(table, fmt: str, path, meta: dict) -> str:
    """Write the rendered table to ``path`` and return its sha256."""
    text = render(table, fmt, meta)
    Path(path).write_bytes(text.encode("utf-8"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_metadata(path) -> dict:
    """Recover the metadata block from a file produced by ``emit``."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("{"):
            return json.loads(first)["_meta"]
        meta = {"notes": []}
        line = first
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            if key == "config":
                meta["config"] = json.loads(value)
            elif key == "note":
                meta["notes"].append(value)
            elif key in ("schema_version", "seed"):
                meta[key] = int(value)
            else:
                meta[key] = value
            line = fh.readline()
    meta["format"] = "csv"
    return meta


def experiment_from_metadata(meta: dict) -> Experiment:
    resolved = copy.deepcopy(meta["config"])
    return build_experiment(resolve_mapping(resolved))
