"""
Command-line runner for the simulated experiments and fits.

    nvres run --config CONFIG.json [--out DIR] [--seed N] [--best-effort]
    nvres fit DATA.csv --model {sinusoid,hahn,lorentzian,sqrtp,s11}
    nvres budget [--config CHAIN.json] [--slope S] [--alpha A]
    nvres tune-loop [--config CONFIG.json] --out DIR

Exit status: 0 success, 2 invalid input (schema, malformed data), 3 a fit did
not converge (outputs are still written and flagged; ``--best-effort``
turns this into 0).

Every ``run`` writes its datasets plus ``metadata.json`` holding the fully
resolved configuration and package version. Nothing time-dependent goes into
the outputs, so repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from dataclasses import asdict
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import budget as bud
from . import ensemble as ens_mod
from . import fitting
from .fields import BeamModel, ParametricB1, load_field_grid
from .resonator import (CHEVRON_ENHANCEMENT, CHEVRON_RESONATOR, ControllerState, ResonatorState,
                        ThermalPlant, CalibrationTable, duty_cycle_compensation,
                        simulate_tuning_loop)
from .spin import SpinParams

EXIT_OK, EXIT_INPUT, EXIT_NOCONV = 0, 2, 3

EXPERIMENTS = ("rabi", "power-sweep", "chevron", "position-sweep", "odmr-map",
               "tune-loop", "fit", "budget")
FIT_MODELS = ("sinusoid", "hahn", "lorentzian", "sqrtp", "s11")


class InputError(Exception):
    """Bad configuration or data; maps to exit status 2."""


# --------------------------------------------------------------------------
# Schema
# --------------------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_numlist = {"type": "array", "items": _num, "minItems": 1}


def _block(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _block({
    "experiment": {"enum": list(EXPERIMENTS)},
    "description": {"type": "string"},
    "output": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "b0_mt": _vec3,
    "spin": _block({"d_z": _pos, "hyperfine_a": {"type": "number", "minimum": 0},
                    "gamma_e": _pos}),
    "beam": _block({"d_collimated": _pos, "wavelength": _pos, "focal_length": _pos,
                    "ellipticity_m": {"type": "number", "minimum": 1}, "mu_x": _num, "mu_y": _num}),
    "ensemble": _block({
        "broadening_sigma": {"type": "number", "minimum": 0},
        "n_detuning_samples": {"type": "integer", "minimum": 1},
        "volume_bounds": {"type": "array", "items": _vec3, "minItems": 2, "maxItems": 2},
        "quadrature_points": {"type": "array", "items": {"type": "integer", "minimum": 2},
                              "minItems": 3, "maxItems": 3},
        "orientations": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 3},
                         "minItems": 1, "uniqueItems": True},
        "transverse_extent": _pos,
    }),
    "field": _block({"kind": {"enum": ["parametric", "grid"]}, "slope": _pos, "b1_center": _pos,
                     "falloff_scale": _pos, "tilt": {"type": "number", "minimum": 0, "exclusiveMaximum": 90},
                     "path": {"type": "string"}}, ["kind"]),
    "resonator": _block({"f0": _pos, "q_loaded": _pos, "q_internal": _pos, "q_external": _pos}, ["f0"]),
    "rabi": _block({"power": _pos, "t_max": _pos, "n_samples": {"type": "integer", "minimum": 8},
                    "drive_freq": _pos, "noise": {"type": "number", "minimum": 0}}),
    "power_sweep": _block({"powers": {"type": "array", "items": _pos, "minItems": 1},
                           "cycles": _pos, "n_samples": {"type": "integer", "minimum": 8},
                           "save_traces": {"type": "boolean"}}, ["powers"]),
    "chevron": _block({"detunings": _numlist, "power": _pos, "enhancement": {"type": "number", "exclusiveMinimum": 1},
                       "cycles": _pos, "n_samples": {"type": "integer", "minimum": 8}}, ["detunings"]),
    "position_sweep": _block({"positions": _numlist, "s11_db": {"oneOf": [_num, _numlist]},
                              "axis": {"enum": ["x", "y"]}, "power": _pos,
                              "cycles": _pos, "n_samples": {"type": "integer", "minimum": 8}},
                             ["positions"]),
    "odmr_map": _block({"b0_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                        "n_b0": {"type": "integer", "minimum": 2},
                        "freq_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                        "n_freq": {"type": "integer", "minimum": 2},
                        "target_ratio": {"type": "number", "exclusiveMinimum": 1},
                        "s_sat": _pos, "omega_on": _pos, "enhancement": {"type": "number", "exclusiveMinimum": 1},
                        "direction": _vec3}),
    "tune_loop": _block({"setpoint": _pos, "k_p": _num, "k_d": _num, "tau_thermal": _pos,
                         "duration": _pos, "dt": _pos, "disturbance_mhz": _num,
                         "disturbance_time": {"type": "number", "minimum": 0},
                         "settle_tolerance_mhz": _pos,
                         "temperature_table": {"type": "string"}, "laser_table": {"type": "string"},
                         "duty_cycle": _block({"total_us": _pos, "t1_us": {"type": "array", "items": {"type": "number", "minimum": 0}}})}),
    "fit": _block({"data": {"type": "string"}, "model": {"enum": list(FIT_MODELS)},
                   "budget": {"type": "integer", "minimum": 1}}, ["data", "model"]),
    "budget": _block({"slope": _pos, "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                      "chain": {"type": "array", "minItems": 1, "items": _block(
                          {"label": {"type": "string"}, "gain_db": _num}, ["label", "gain_db"])},
                      "reference_freq_ghz": _pos}),
}, ["experiment"])


def _line_of(text: str, path) -> int:
    """Best-effort 1-based line of the JSON node at ``path`` (keys and indices)."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if m is None:
                break
            pos = m.end()
        else:
            # step over ``part`` top-level items of the array that starts here
            i = text.find("[", pos)
            if i < 0:
                break
            depth, k, j = 0, 0, i + 1
            while j < len(text) and k < part:
                c = text[j]
                if c in "[{":
                    depth += 1
                elif c in "]}":
                    depth -= 1
                elif c == "," and depth == 0:
                    k += 1
                j += 1
            pos = j
    return text.count("\n", 0, pos) + 1


def load_config(path) -> dict:
    """Parse and validate a config file; raises InputError with line-anchored messages."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        lines = []
        for e in errors:
            loc = list(e.absolute_path)
            if e.validator == "additionalProperties":
                m = re.search(r"'([^']+)' was unexpected|'([^']+)'", e.message)
                if m:
                    loc.append(m.group(1) or m.group(2))
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}:{_line_of(text, loc)}: {where}: {e.message}")
        raise InputError("\n".join(lines))
    cfg["_base_dir"] = str(path.parent.resolve())
    _check_semantics(cfg)
    return cfg


def _resolve_path(cfg: dict, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else Path(cfg.get("_base_dir", ".")) / p


def _check_semantics(cfg: dict) -> None:
    """Cross-field checks the schema cannot express; run before any computation."""
    kind = cfg["experiment"]
    block = {"power-sweep": "power_sweep", "chevron": "chevron",
             "position-sweep": "position_sweep", "fit": "fit"}.get(kind)
    if block and block not in cfg:
        raise InputError(f"experiment '{kind}' needs a '{block}' block")
    files = []
    if cfg.get("field", {}).get("kind") == "grid":
        if "path" not in cfg["field"]:
            raise InputError("field: kind 'grid' needs a 'path'")
        files.append(("field/path", cfg["field"]["path"]))
    if kind == "fit":
        files.append(("fit/data", cfg["fit"]["data"]))
    for key in ("temperature_table", "laser_table"):
        if key in cfg.get("tune_loop", {}):
            files.append((f"tune_loop/{key}", cfg["tune_loop"][key]))
    for where, rel in files:
        if not _resolve_path(cfg, rel).is_file():
            raise InputError(f"{where}: file not found: {rel}")
    res = cfg.get("resonator")
    if res is not None and sum(k in res for k in ("q_loaded", "q_internal", "q_external")) != 2:
        raise InputError("resonator: give exactly two of q_loaded, q_internal, q_external")
    ps = cfg.get("position_sweep")
    if ps is not None and isinstance(ps.get("s11_db"), list) and len(ps["s11_db"]) != len(ps["positions"]):
        raise InputError("position_sweep: s11_db must be a number or match positions in length")
    # dataclass invariants
    try:
        _build_common(cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from None


# --------------------------------------------------------------------------
# Building model objects from config blocks
# --------------------------------------------------------------------------

def _build_common(cfg: dict) -> dict:
    spin = SpinParams(**cfg.get("spin", {}))
    beam = BeamModel(**cfg.get("beam", {}))
    e = dict(cfg.get("ensemble", {}))
    for k in ("volume_bounds", "quadrature_points", "orientations"):
        if k in e:
            e[k] = tuple(tuple(v) if isinstance(v, list) else v for v in e[k])
    ens = ens_mod.EnsembleParams(rng_seed=cfg.get("seed", 0), **e)
    f = cfg.get("field", {"kind": "parametric"})
    if f["kind"] == "grid":
        field = load_field_grid(_resolve_path(cfg, f["path"]))
    else:
        kw = {k: f[k] for k in ("falloff_scale", "tilt") if k in f}
        if "b1_center" in f:
            field = ParametricB1(f["b1_center"], **kw)
        else:
            field = ParametricB1.calibrated(f.get("slope", 211.6), **kw)
    r = cfg.get("resonator")
    if r is None:
        res = CHEVRON_RESONATOR
    elif "q_loaded" in r:
        if "q_internal" in r:
            res = ResonatorState.from_loaded(r["f0"], r["q_loaded"], r["q_internal"])
        else:
            q_i = 1.0 / (1.0 / r["q_loaded"] - 1.0 / r["q_external"])
            if q_i <= 0:
                raise ValueError("resonator: q_loaded must be below q_external")
            res = ResonatorState(r["f0"], q_i, r["q_external"])
    else:
        res = ResonatorState(r["f0"], r["q_internal"], r["q_external"])
    b0 = tuple(cfg.get("b0_mt", ens_mod.B0_DEFAULT))
    return {"spin": spin, "beam": beam, "ens": ens, "field": field, "resonator": res, "b0": b0}


def _resolved_echo(cfg: dict, objs: dict) -> dict:
    """Configuration with every default filled in, for the metadata sidecar."""
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    echo["spin"] = asdict(objs["spin"])
    echo["beam"] = asdict(objs["beam"])
    e = asdict(objs["ens"])
    e.pop("detunings")
    echo["seed"] = e.pop("rng_seed")
    echo["ensemble"] = e
    echo["b0_mt"] = list(objs["b0"])
    field = objs["field"]
    if isinstance(field, ParametricB1):
        echo["field"] = {"kind": "parametric", "b1_center": field.b1_center,
                         "falloff_scale": field.falloff_scale, "tilt": field.tilt}
    r = objs["resonator"]
    echo["resonator"] = {"f0": r.f0, "q_internal": r.q_internal, "q_external": r.q_external}
    # referenced files as absolute paths so the echo runs from anywhere
    if echo.get("field", {}).get("kind") == "grid":
        echo["field"] = dict(echo["field"], path=str(_resolve_path(cfg, echo["field"]["path"])))
    if "fit" in echo:
        echo["fit"] = dict(echo["fit"], data=str(_resolve_path(cfg, echo["fit"]["data"])))
    for key in ("temperature_table", "laser_table"):
        if key in echo.get("tune_loop", {}):
            echo["tune_loop"] = dict(echo["tune_loop"],
                                     **{key: str(_resolve_path(cfg, echo["tune_loop"][key]))})
    return _jsonable(echo)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# Experiments; each returns (files written, converged)
# --------------------------------------------------------------------------

def _exp_rabi(cfg, objs, out: Path):
    p = cfg.get("rabi", {})
    power = p.get("power", 0.0015)
    om = ens_mod.center_rabi_estimate(objs["field"], power, objs["beam"], objs["spin"],
                                      objs["ens"].orientations)
    n = p.get("n_samples", 400)
    t = np.linspace(0.0, p["t_max"], n) if "t_max" in p else ens_mod.rabi_time_grid(om, 10, n)
    trace = ens_mod.total_rabi_signal(t, objs["b0"], objs["field"], objs["beam"], objs["ens"],
                                      objs["spin"], p.get("drive_freq"), power, p.get("noise", 0.0))
    with open(out / "rabi_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "population"])
        for a, b in zip(trace.times, trace.population):
            w.writerow([f"{a:.10g}", f"{b:.10g}"])
    fit = fitting.fit_decaying_sinusoid(trace, seed=cfg.get("seed", 0))
    _dump(out / "fit.json", fit.to_dict())
    return ["rabi_trace.csv", "fit.json"], fit.converged


def _sweep_outputs(res, out: Path, stem: str, save_traces: bool):
    res.write_csv(out / f"{stem}.csv")
    _dump(out / "fits.json", [f.to_dict() if f else None for f in res.fits])
    files = [f"{stem}.csv", "fits.json"]
    if save_traces:
        res.write_traces(out / f"{stem}_traces.csv")
        files.append(f"{stem}_traces.csv")
    return files, bool(np.all(res.converged))


def _exp_power_sweep(cfg, objs, out: Path):
    p = cfg["power_sweep"]
    res = ens_mod.simulate_power_sweep(p["powers"], b0=objs["b0"], field=objs["field"],
                                       beam=objs["beam"], ens=objs["ens"], spin=objs["spin"],
                                       cycles=p.get("cycles", 10.0), n_samples=p.get("n_samples", 400))
    files, ok = _sweep_outputs(res, out, "power_sweep", p.get("save_traces", False))
    conv = fitting.fit_sqrt_power_line(res.axis[res.converged], res.omega_r[res.converged]) \
        if res.converged.sum() >= 3 else None
    if conv is not None:
        _dump(out / "sqrt_power_fit.json", conv.to_dict())
        files.append("sqrt_power_fit.json")
    return files, ok


def _exp_chevron(cfg, objs, out: Path):
    p = cfg["chevron"]
    res = ens_mod.simulate_chevron(p["detunings"], objs["resonator"], power=p.get("power", 0.2),
                                   enhancement=p.get("enhancement", CHEVRON_ENHANCEMENT),
                                   b0=objs["b0"], field=objs["field"], beam=objs["beam"],
                                   ens=objs["ens"], spin=objs["spin"], cycles=p.get("cycles", 10.0),
                                   n_samples=p.get("n_samples", 400))
    files, ok = _sweep_outputs(res, out, "chevron", False)
    if np.isfinite(res.omega_r).sum() >= 5:
        q_l, ratio, fit = ens_mod.chevron_quality_factor(res, objs["resonator"].f0)
        _dump(out / "chevron_summary.json", {"q_loaded": q_l, "enhancement": ratio,
                                             "lorentzian": fit.to_dict()})
        files.append("chevron_summary.json")
        ok = ok and fit.converged
    return files, ok


def _exp_position_sweep(cfg, objs, out: Path):
    p = cfg["position_sweep"]
    try:
        res = ens_mod.simulate_position_sweep(p["positions"], p.get("s11_db", float("-inf")),
                                              axis=p.get("axis", "x"), power=p.get("power", 0.0015),
                                              b0=objs["b0"], field=objs["field"], beam=objs["beam"],
                                              ens=objs["ens"], spin=objs["spin"],
                                              cycles=p.get("cycles", 10.0),
                                              n_samples=p.get("n_samples", 400))
    except ValueError as exc:
        raise InputError(f"position_sweep: {exc}") from None
    return _sweep_outputs(res, out, "position_sweep", False)


def _exp_odmr_map(cfg, objs, out: Path):
    p = cfg.get("odmr_map", {})
    b = np.linspace(*p.get("b0_range", (0.5, 9.5)), p.get("n_b0", 91))
    f = np.linspace(*p.get("freq_range", (2.85, 3.07)), p.get("n_freq", 441))
    kw = dict(omega_on=p.get("omega_on", 1.0), enhancement=p.get("enhancement", CHEVRON_ENHANCEMENT),
              b0_direction=tuple(p.get("direction", (0.0, 0.0, 1.0))), ens=objs["ens"], spin=objs["spin"])
    if "s_sat" in p:
        sat = ens_mod.SaturationParams(p["s_sat"])
    else:
        try:
            sat = ens_mod.calibrate_odmr_saturation(p.get("target_ratio", 1.7), b, f, objs["resonator"], **kw)
        except ValueError as exc:
            raise InputError(f"odmr_map: {exc}") from None
    m = ens_mod.simulate_odmr_map(b, f, objs["resonator"], sat, **kw)
    m.write_csv(out / "odmr_map.csv")
    with open(out / "odmr_integrated.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b0_mt", "integrated_signal"])
        for a, s in zip(m.b0_values, m.integrated):
            w.writerow([f"{a:.10g}", f"{s:.10g}"])
    _dump(out / "odmr_summary.json", {"s_sat_mhz": sat.s_sat, "contrast": sat.contrast,
                                      "incoherent_enhancement": m.enhancement_ratio(),
                                      "coherent_enhancement": kw["enhancement"]})
    return ["odmr_map.csv", "odmr_integrated.csv", "odmr_summary.json"], True


def _tune_loop_objects(cfg):
    p = cfg.get("tune_loop", {})
    tables = {}
    for key, arg in (("temperature_table", "freq_vs_temp"), ("laser_table", "freq_vs_laser_power")):
        if key in p:
            try:
                tables[arg] = CalibrationTable.from_csv(_resolve_path(cfg, p[key]))
            except ValueError as exc:
                raise InputError(f"tune_loop/{key}: {exc}") from None
    plant = ThermalPlant(p.get("tau_thermal", 2.0), **tables)
    gains = {k: p[k] for k in ("k_p", "k_d") if k in p}
    try:
        ctrl = ControllerState.for_plant(plant, p.get("setpoint", 2.967), **gains)
    except ValueError as exc:
        raise InputError(f"tune_loop: {exc}") from None
    return p, plant, ctrl


def _exp_tune_loop(cfg, objs, out: Path):
    p, plant, ctrl = _tune_loop_objects(cfg)
    duration = p.get("duration", 20 * plant.tau_thermal)
    t_dist = p.get("disturbance_time", 1.0)
    trace = simulate_tuning_loop(plant, ctrl, duration, p.get("dt", 0.05),
                                 p.get("disturbance_mhz", 10.0) * 1e-3, t_dist)
    trace.write_csv(out / "tune_loop.csv")
    tol = p.get("settle_tolerance_mhz", 0.5) * 1e-3
    settle = trace.settling_time(tol, after=t_dist)
    summary = {"settling_time_s": settle, "settled": bool(np.isfinite(settle)),
               "final_error_mhz": float(trace.error[-1] * 1e3),
               "tau_thermal_s": plant.tau_thermal}
    files = ["tune_loop.csv", "tune_loop_summary.json"]
    if "duty_cycle" in p:
        dc = p["duty_cycle"]
        try:
            pad = [duty_cycle_compensation(t1, dc["total_us"]) for t1 in dc.get("t1_us", [])]
        except ValueError as exc:
            raise InputError(f"tune_loop/duty_cycle: {exc}") from None
        summary["duty_cycle"] = [{"t1_us": t1, "t2_us": t2} for t1, t2 in zip(dc.get("t1_us", []), pad)]
    _dump(out / "tune_loop_summary.json", summary)
    return files, bool(np.isfinite(settle))


def _exp_fit(cfg, objs, out: Path):
    p = cfg["fit"]
    res = fit_file(_resolve_path(cfg, p["data"]), p["model"], seed=cfg.get("seed", 0),
                   budget=p.get("budget"))
    _dump(out / "fit.json", res.to_dict())
    return ["fit.json"], res.converged


def budget_report(chain: bud.LossChain, slope: float = 211.6, alpha: float | None = None) -> dict:
    kw = {} if alpha is None else {"alpha": alpha}
    conv = bud.conversion_pipeline(slope, **kw)
    return {"chain": chain.to_dict(), "net_gain_db": bud.chain_gain(chain),
            "power_at_antenna_per_w": bud.power_at_antenna(1.0, chain),
            "conversion": conv.to_dict()}


def _exp_budget(cfg, objs, out: Path):
    p = cfg.get("budget", {})
    chain = (bud.LossChain(tuple((s["label"], s["gain_db"]) for s in p["chain"]),
                           p.get("reference_freq_ghz", 2.967))
             if "chain" in p else bud.MEASURED_LOSS_CHAIN)
    _dump(out / "budget.json", budget_report(chain, p.get("slope", 211.6), p.get("alpha")))
    return ["budget.json"], True


RUNNERS = {"rabi": _exp_rabi, "power-sweep": _exp_power_sweep, "chevron": _exp_chevron,
           "position-sweep": _exp_position_sweep, "odmr-map": _exp_odmr_map,
           "tune-loop": _exp_tune_loop, "fit": _exp_fit, "budget": _exp_budget}


def run_experiment(cfg: dict, out_dir, seed: int | None = None) -> tuple:
    """Run a validated config into ``out_dir``; returns (files, converged)."""
    if seed is not None:
        cfg = dict(cfg, seed=seed)
    objs = _build_common(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, ok = RUNNERS[cfg["experiment"]](cfg, objs, out)
    meta = {"tool": "nvres", "version": __version__, "experiment": cfg["experiment"],
            "converged": bool(ok), "files": sorted(files), "config": _resolved_echo(cfg, objs)}
    _dump(out / "metadata.json", meta)
    return files + ["metadata.json"], ok


# --------------------------------------------------------------------------
# Data files for `fit`
# --------------------------------------------------------------------------

def read_table(path) -> np.ndarray:
    """
    Numeric CSV reader: '#' comments and one optional header row are skipped.

    Raises InputError on unreadable or ragged files and on files with no rows.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise InputError(f"{path}: cannot read data ({exc.strerror})") from None
    if rows:
        try:
            [float(v) for v in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no rows")
    width = len(rows[0])
    try:
        data = np.array([[float(v) for v in r] for r in rows if len(r) == width])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if data.shape[0] != len(rows):
        raise InputError(f"{path}: rows have inconsistent column counts")
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: non-finite values")
    return data


def fit_file(path, model: str, seed: int = 0, budget: int | None = None) -> fitting.FitResult:
    """Fit a CSV file with one of the named models."""
    data = read_table(path)
    need = {"sinusoid": 2, "hahn": 2, "lorentzian": 2, "sqrtp": 2, "s11": 3}[model]
    if data.shape[1] < need:
        raise InputError(f"{path}: model '{model}' needs at least {need} columns")
    x, y = data[:, 0], data[:, 1]
    sigma = data[:, 2] if data.shape[1] > 2 and model != "s11" else None
    kw = {} if budget is None else {"budget": budget}
    try:
        if model == "sinusoid":
            return fitting.fit_decaying_sinusoid(x, y, sigma=sigma, seed=seed, **kw)
        if model == "hahn":
            return fitting.fit_hahn_echo(x, y, sigma=sigma, seed=seed, **kw)
        if model == "lorentzian":
            return fitting.fit_lorentzian(x, y, sigma=sigma, seed=seed, **kw)
        if model == "sqrtp":
            return fitting.fit_sqrt_power_line(x, y, sigma=sigma)
        return fitting.fit_s11_resonance(x, data[:, 1] + 1j * data[:, 2], seed=seed, **kw)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvres", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=f"nvres {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides the config's 'output')")
        p.add_argument("--seed", type=int, help="seed for noise injection and fit multi-starts")
        p.add_argument("--best-effort", action="store_true",
                       help="exit 0 even when a fit does not converge")

    common(sub.add_parser("run", help="run the experiment described by a config"), True)

    p = sub.add_parser("fit", help="fit a CSV data file and print the result as JSON")
    p.add_argument("data", help="CSV file: x, y[, sigma]; s11 files use freq_ghz, re, im")
    p.add_argument("--model", required=True, choices=FIT_MODELS)
    p.add_argument("--budget", type=int, help="objective evaluation budget")
    common(p)

    p = sub.add_parser("budget", help="loss chain and B1 conversion factors")
    p.add_argument("--slope", type=float, help="measured Rabi slope, MHz per sqrt(W)")
    p.add_argument("--alpha", type=float, help="B1 to NV-axis angle, degrees")
    common(p)

    common(sub.add_parser("tune-loop", help="closed-loop resonator frequency stabilisation"))
    return ap


def _out_dir(args, cfg) -> Path:
    out = args.out or cfg.get("output")
    if not out:
        raise InputError("no output directory: pass --out or set 'output' in the config")
    return Path(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            files, ok = run_experiment(cfg, _out_dir(args, cfg), args.seed)
        elif args.command == "tune-loop":
            cfg = load_config(args.config) if args.config else {"experiment": "tune-loop"}
            if cfg["experiment"] != "tune-loop":
                raise InputError(f"config describes '{cfg['experiment']}', not 'tune-loop'")
            files, ok = run_experiment(cfg, _out_dir(args, cfg), args.seed)
        elif args.command == "budget":
            cfg = load_config(args.config) if args.config else {"experiment": "budget"}
            if cfg["experiment"] != "budget":
                raise InputError(f"config describes '{cfg['experiment']}', not 'budget'")
            block = dict(cfg.get("budget", {}))
            if args.slope is not None:
                block["slope"] = args.slope
            if args.alpha is not None:
                block["alpha"] = args.alpha
            cfg = dict(cfg, budget=block)
            try:
                report = budget_report(
                    bud.LossChain(tuple((s["label"], s["gain_db"]) for s in block["chain"]),
                                  block.get("reference_freq_ghz", 2.967))
                    if "chain" in block else bud.MEASURED_LOSS_CHAIN,
                    block.get("slope", 211.6), block.get("alpha"))
            except ValueError as exc:
                raise InputError(str(exc)) from None
            if args.out or cfg.get("output"):
                run_experiment(cfg, _out_dir(args, cfg), args.seed)
            print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
            return EXIT_OK
        else:  # fit
            res = fit_file(args.data, args.model, seed=args.seed or 0, budget=args.budget)
            print(json.dumps(res.to_dict(), indent=2, sort_keys=True))
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                _dump(out / "fit.json", res.to_dict())
            ok = res.converged
            files = []
    except InputError as exc:
        print(f"nvres: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not ok:
        print("nvres: warning: a fit did not converge; outputs are flagged", file=sys.stderr)
        return EXIT_OK if args.best_effort else EXIT_NOCONV
    for f in files:
        print(f, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
