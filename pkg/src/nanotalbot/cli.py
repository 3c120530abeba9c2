"""Command-line front end.

Every subcommand reads an optional JSON config (defaults reproduce the
proposed silicon experiment), writes ``<name>.csv`` plus a
``<name>.meta.json`` sidecar with the fully resolved config, and exits with
0 on success, 2 on configuration errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from . import constants as const
from .config import Experiment, ExperimentConfig, ScanConfig, json_schema, load_config, parse_quantity, with_value
from .decoherence import csl_bound, total_reduction
from .dynamics import carpet, detection_probability, fringe_pattern, trap_readout, visibility_sin
from .errors import NanotalbotError, NumericError, SpectrumError, UnsupportedMaterialError, ValidityWarning
from .materials import optical_response
from .thermal import Phase, equilibrium_temperature, evolve_temperature, heating_rhs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


# --- output helpers ---------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_meta(path: Path, command, config: ExperimentConfig, extra=None):
    meta = {
        "command": command,
        "version": __version__,
        "config": config.model_dump(mode="json"),
    }
    if extra:
        meta["results"] = extra
    path.with_suffix("").with_suffix(".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _out(args, config, name):
    prefix = config.output.prefix
    fname = f"{prefix}_{name}.csv" if prefix else f"{name}.csv"
    base = Path(args.out) if args.out else Path(config.output.directory)
    return base / fname


# --- argument handling ------------------------------------------------------


def parse_scan(text):
    """``var=start:stop:steps`` -> ScanConfig. Start/stop accept unit strings."""
    try:
        var, rng = text.split("=", 1)
        start, stop, steps = rng.split(":")
        return ScanConfig(variable=var.strip(), start=parse_quantity(start), stop=parse_quantity(stop),
                          steps=int(steps))
    except ValidationError:
        raise
    except Exception as exc:
        raise ConfigError(f"--scan {text!r}: expected var=start:stop:steps ({exc})") from exc


def _channels(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else None


def build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    data = cfg.model_dump()
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "classical", False):
        data["mode"] = "classical"
    if getattr(args, "no_decoherence", False):
        data["decoherence"] = {k: False for k in data["decoherence"]}
    chans = _channels(getattr(args, "channels", None))
    if chans is not None:
        from .decoherence import SHORT_NAMES

        full = [SHORT_NAMES.get(c, c) for c in chans]
        unknown = [c for c in full if c not in data["decoherence"]]
        if unknown:
            raise ConfigError(f"--channels: unknown channel(s) {', '.join(unknown)}")
        data["decoherence"] = {k: (k in full) for k in data["decoherence"]}
    for item in getattr(args, "set", None) or []:
        key, _, value = item.partition("=")
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass
        cfg = ExperimentConfig.model_validate(data)
        cfg = with_value(cfg, key, value)
        data = cfg.model_dump()
    if getattr(args, "scan", None):
        data["scan"] = [parse_scan(s).model_dump() for s in args.scan]
    return ExperimentConfig.model_validate(data)


def _pool_map(fn, values, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, values))
    return [fn(v) for v in values]


def _quiet(fn):
    def wrapped(*a, **k):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            return fn(*a, **k)
    return wrapped


# --- subcommands ------------------------------------------------------------


def cmd_pattern(args, cfg):
    ex = Experiment(cfg)
    pat = fringe_pattern(ex.source, ex.timeline, ex.pulse, ex.decoherence(), cfg.acceleration or None,
                         mode=cfg.mode)
    x = pat.grid(tuple(cfg.output.periods), cfg.output.points_per_period)
    w = pat.density(x)
    path = _out(args, cfg, "pattern")
    write_csv(path, ["x_m", "x_over_D", "w_per_m"], zip(x, x / pat.period, w))
    info = {"visibility": pat.visibility, "period_m": pat.period, "shift_m": pat.shift,
            "talbot_time_s": ex.talbot_time, "t1_s": ex.timeline.t1, "t2_s": ex.timeline.t2,
            "detection_probability": detection_probability(ex.source, ex.timeline, cfg.detection_window),
            "cutoff": pat.meta["cutoff"]}
    write_meta(path, "pattern", cfg, info)
    print(f"visibility {pat.visibility:.6g}  period {pat.period:.6g} m  -> {path}")


def cmd_carpet(args, cfg):
    ex = Experiment(cfg)
    if cfg.scan:
        sc = cfg.scan[0]
        var = {"grating.phi0": "phi0", "phi0": "phi0", "timeline.t2": "t2", "t2": "t2",
               "t2_talbot": "t2_talbot", "timeline.t2_talbot": "t2_talbot"}.get(sc.variable)
        if var is None:
            raise ConfigError("carpet scans t2, t2_talbot or phi0")
        values = sc.values()
    else:
        var, values = "t2_talbot", np.linspace(0.01, 2.0, 200)
    if var == "t2_talbot":
        var, values = "t2", values * ex.talbot_time
    if var == "t2" and np.any(values <= 0):
        raise ConfigError("t2 scan values must be positive")
    modes = ["classical"] if cfg.mode == "classical" else ["quantum", "classical"]
    path = _out(args, cfg, "carpet")
    rows = []
    vis = {}
    for mode in modes:
        c = _quiet(carpet)(var, values, ex.source, ex.timeline, ex.pulse, ex.decoherence(), mode=mode,
                           periods=tuple(cfg.output.periods), points_per_period=cfg.output.points_per_period,
                           threads=args.threads)
        vis[mode] = c.visibility
        for i, v in enumerate(c.values):
            for u, w in zip(c.x_over_D, c.density[i]):
                rows.append((mode, v, c.periods[i], u, u * c.periods[i], w))
    write_csv(path, ["mode", var, "period_m", "x_over_D", "x_m", "w_per_m"], rows)
    write_meta(path, "carpet", cfg, {"variable": var, "talbot_time_s": ex.talbot_time,
                                     "max_visibility": {k: float(np.max(v)) for k, v in vis.items()}})
    print(f"carpet over {var} ({len(values)} rows, modes {', '.join(modes)}) -> {path}")


def _visibility_row(cfg, var, value):
    c = with_value(cfg, var, float(value))
    ex = Experiment(c)
    dm = ex.decoherence()
    q = _quiet(visibility_sin)(ex.source, ex.timeline, ex.pulse, dm, mode="quantum")
    cl = _quiet(visibility_sin)(ex.source, ex.timeline, ex.pulse, dm, mode="classical")
    return q, cl


def cmd_visibility(args, cfg):
    sc = cfg.scan[0] if cfg.scan else ScanConfig(variable="phi0", start=0.0, stop=4 * math.pi, steps=200)
    values = sc.values()
    if sc.variable in ("phi0", "grating.phi0"):
        # visibility depends on phi0 only through the coefficients; reuse one experiment
        ex = Experiment(cfg)
        dm = ex.decoherence()

        def row(v):
            p = ex.pulse.replace(phi0=float(v))
            return (_quiet(visibility_sin)(ex.source, ex.timeline, p, dm, mode="quantum"),
                    _quiet(visibility_sin)(ex.source, ex.timeline, p, dm, mode="classical"))
    else:
        def row(v):
            return _visibility_row(cfg, sc.variable, v)
    res = _pool_map(row, values, args.threads)
    q = np.array([r[0] for r in res])
    cl = np.array([r[1] for r in res])
    path = _out(args, cfg, "visibility")
    write_csv(path, [sc.variable, "visibility_quantum", "visibility_classical"], zip(values, q, cl))
    i = int(np.argmax(q))
    info = {"max_quantum": float(q[i]), "argmax": float(values[i])}
    write_meta(path, "visibility", cfg, info)
    print(f"max quantum visibility {q[i]:.4f} at {sc.variable} = {values[i]:.6g} -> {path}")


def cmd_surface(args, cfg):
    ex = Experiment(cfg)
    scans = {s.variable: s for s in cfg.scan}
    phi = scans.get("phi0") or scans.get("grating.phi0") or ScanConfig(variable="phi0", start=0.0,
                                                                        stop=4 * math.pi, steps=41)
    t2s = scans.get("t2_talbot") or scans.get("timeline.t2_talbot")
    if t2s is not None:
        t2_vals = t2s.values() * ex.talbot_time
    else:
        t2s = scans.get("t2") or scans.get("timeline.t2")
        t2_vals = t2s.values() if t2s else np.linspace(0.05, 3.0, 60) * ex.talbot_time
    if np.any(t2_vals <= 0):
        raise ConfigError("t2 values must be positive")
    dm = ex.decoherence()
    modes = ["classical"] if cfg.mode == "classical" else ["quantum", "classical"]

    def row(t2):
        tl = ex.timeline.replace(t2=float(t2))
        out = []
        for p in phi.values():
            pulse = ex.pulse.replace(phi0=float(p))
            out.append([_quiet(visibility_sin)(ex.source, tl, pulse, dm, mode=m) for m in modes])
        return out

    grid = _pool_map(row, t2_vals, args.threads)
    rows = []
    for t2, line in zip(t2_vals, grid):
        for p, vals in zip(phi.values(), line):
            rows.append((p, t2, t2 / ex.talbot_time, *vals))
    path = _out(args, cfg, "surface")
    write_csv(path, ["phi0", "t2_s", "t2_over_tT", *[f"visibility_{m}" for m in modes]], rows)
    write_meta(path, "surface", cfg, {"talbot_time_s": ex.talbot_time})
    print(f"surface {len(t2_vals)} x {phi.steps} -> {path}")


def cmd_heating(args, cfg):
    ex = Experiment(cfg)
    tr = cfg.trap
    free = args.free_fall if args.free_fall is not None else ex.timeline.total
    phases = []
    if tr.duration > 0:
        phases.append(Phase(tr.duration, tr.intensity, tr.wavelength))
    if free > 0:
        phases.append(Phase(free, 0.0, tr.wavelength))
    if not phases:
        raise ConfigError("nothing to integrate: trap.duration and free-fall time are both zero")
    T_env = ex.environment.temperature
    tl = evolve_temperature(ex.particle, phases, tr.initial_internal_temperature, T_env, t_start=-tr.duration)
    path = _out(args, cfg, "heating")
    write_csv(path, ["t_s", "T_int_K"], zip(tl.t, tl.T))
    slope = heating_rhs(ex.particle, tr.intensity, tr.wavelength, T_env, tr.initial_internal_temperature)
    info = {"initial_slope_K_per_s": slope, "release_temperature_K": float(tl.temperature_at(0.0)),
            "final_temperature_K": tl.final_temperature}
    try:
        info["equilibrium_K"] = equilibrium_temperature(ex.particle, tr.intensity, tr.wavelength, T_env)
    except NumericError as exc:
        info["equilibrium_K"] = None
        info["equilibrium_error"] = str(exc)
    write_meta(path, "heating", cfg, info)
    eq = info["equilibrium_K"]
    print(f"initial slope {slope:.4g} K/s, equilibrium {eq if eq is None else f'{eq:.5g} K'} -> {path}")


def cmd_decoherence_map(args, cfg):
    """R_1 over initial internal temperature and total flight time at fixed t1/t2."""
    ex = Experiment(cfg)
    scans = {s.variable: s for s in cfg.scan}
    T0s = scans.get("trap.initial_internal_temperature")
    T0_vals = T0s.values() if T0s else np.linspace(300.0, 2000.0, 18)
    ts = scans.get("timeline.t1")
    ratio = ex.timeline.t1 / ex.timeline.total
    totals = ts.values() / ratio if ts else np.linspace(0.05, 1.5, 30)
    if np.any(totals <= 0) or np.any(T0_vals <= 0):
        raise ConfigError("temperatures and times must be positive")
    chans = cfg.decoherence.channels()

    def row(T0):
        tl = evolve_temperature(ex.particle, [Phase(float(totals.max()) * 1.001, 0.0)], float(T0),
                                ex.environment.temperature)
        out = []
        for total in totals:
            timeline = ex.timeline.replace(t1=ratio * total, t2=(1.0 - ratio) * total)
            red = total_reduction(ex.particle, ex.environment, timeline, np.array([1]),
                                  temperature=tl.temperature_at if "emission" in chans else None,
                                  channels=chans, csl=ex.csl)
            out.append((float(red.combined[0]), {k: float(v[0]) for k, v in red.log.items()}))
        return out

    grid = _pool_map(row, T0_vals, args.threads)
    rows = []
    for T0, line in zip(T0_vals, grid):
        for total, (R1, logs) in zip(totals, line):
            rows.append((T0, total, R1, 1.0 - R1, *[logs[c] for c in chans]))
    path = _out(args, cfg, "decoherence_map")
    write_csv(path, ["T_int0_K", "total_time_s", "R1", "visibility_reduction", *[f"lnR1_{c}" for c in chans]],
              rows)
    write_meta(path, "decoherence-map", cfg, {"t1_over_total": ratio})
    print(f"decoherence map {len(T0_vals)} x {len(totals)} -> {path}")


def cmd_csl(args, cfg):
    ex = Experiment(cfg)
    ratio = args.visibility_ratio
    lam = csl_bound(ratio, ex.particle, ex.timeline, length=cfg.csl.length)
    path = _out(args, cfg, "csl")
    write_csv(path, ["visibility_ratio", "lambda_csl_bound_Hz", "r_c_m", "total_time_s"],
              [(ratio, lam, cfg.csl.length, ex.timeline.total)])
    write_meta(path, "csl", cfg, {"lambda_csl_bound_Hz": lam})
    print(f"lambda_CSL < {lam:.4g} Hz")


def cmd_material_info(args, cfg):
    ex = Experiment(cfg)
    wavelengths = args.wavelength or [cfg.grating.wavelength, cfg.trap.wavelength]
    rows = []
    for wl in wavelengths:
        r = optical_response(ex.particle, wl)
        rows.append((wl, r.alpha.real, r.alpha.imag, r.beta, r.eta, r.sigma_abs, r.sigma_sca, r.clamped))
        print(f"lambda {wl:.6g} m: Re a/(4 pi eps0 R^3) {r.alpha.real / (4 * math.pi * const.epsilon_0 * ex.particle.radius**3):.5g}"
              f"  beta {r.beta:.5g}  eta {r.eta:.5g}  sigma_abs {r.sigma_abs:.4g} m^2  sigma_sca {r.sigma_sca:.4g} m^2")
    readout = trap_readout(ex.particle, cfg.trap.waist, cfg.trap.wavelength, cfg.trap.power or 53e-3,
                           cfg.trap.responsivity, 100, cfg.trap.frequency)
    path = _out(args, cfg, "material_info")
    write_csv(path, ["wavelength_m", "alpha_real", "alpha_imag", "beta", "eta", "sigma_abs_m2", "sigma_sca_m2",
                     "clamped"], rows)
    write_meta(path, "material-info", cfg, {
        "radius_m": ex.particle.radius, "mass_kg": ex.particle.mass,
        "readout_sensitivity_per_m": readout.sensitivity, "readout_shot_noise_per_rtHz": readout.shot_noise,
        "readout_position_resolution_m": readout.position_resolution})
    print(f"radius {ex.particle.radius:.5g} m -> {path}")


def cmd_validate(args, cfg):
    from .oracle import classical_monte_carlo, coeff_convolution, propagate_point_source
    from .grating import coeff_with_absorption

    if args.samples < 10_000:
        raise ConfigError("--samples must be at least 10000")
    ex = Experiment(cfg)
    s, tl, d = ex.source, ex.timeline, ex.period
    m = ex.particle.mass
    results = []

    pulse = ex.pulse.replace(beta=0.0, eta=0.0)
    pat = _quiet(fringe_pattern)(s, tl, pulse)
    wave = propagate_point_source(s.sigma_x, s.sigma_p, m, tl.t1, tl.t2, pulse.phi0, d)
    x = np.linspace(-0.5, 0.5, 257) * pat.period
    err = float(np.max(np.abs(pat.density(x) - wave.density(x))) / pat.mean)
    results.append(("wave oracle vs closed form (rel. Linf)", err, err < 1e-3))

    mc = classical_monte_carlo(args.samples, s.sigma_x, s.sigma_p, m, tl.t1, tl.t2, pulse.phi0, d, cfg.seed)
    v_mc, se = mc.visibility()
    v_cl = _quiet(visibility_sin)(s, tl, pulse, mode="classical")
    results.append(("Monte Carlo vs classical visibility (|dV|/sigma)", abs(v_mc - v_cl) / se,
                    abs(v_mc - v_cl) < 3 * se))

    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for phi0 in (math.pi, 1.4 * math.pi, 4 * math.pi):
            for xi in (0.1, 0.5, 0.881, 0.99):
                for n in range(-6, 7):
                    a = coeff_with_absorption(n, xi, phi0, 0.06)
                    b = coeff_convolution(n, xi, phi0, 0.06, 0.0).real
                    worst = max(worst, abs(a - b))
    results.append(("Graf closed form vs convolution (max abs)", worst, worst < 1e-10))

    path = _out(args, cfg, "validate")
    write_csv(path, ["check", "value", "pass"], results)
    write_meta(path, "validate", cfg)
    for name, val, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {val:.3g}")
    return EXIT_OK if all(ok for *_, ok in results) else EXIT_NUMERIC


COMMANDS = {
    "pattern": (cmd_pattern, "single fringe pattern w(x)"),
    "carpet": (cmd_carpet, "w(x) rows over a t2 or phi0 scan"),
    "visibility": (cmd_visibility, "quantum and classical visibility over a scan"),
    "surface": (cmd_surface, "visibility over (phi0, t2)"),
    "heating": (cmd_heating, "internal temperature through trap and free fall"),
    "decoherence-map": (cmd_decoherence_map, "R_1 over initial temperature and flight time"),
    "csl": (cmd_csl, "CSL rate bound from a visibility ratio"),
    "material-info": (cmd_material_info, "polarizability, beta, eta and cross sections"),
    "validate": (cmd_validate, "oracle agreement report"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="nanotalbot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed (u64)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for scans")
        p.add_argument("--scan", action="append", metavar="VAR=START:STOP:STEPS",
                       help="scan a config variable; may be repeated")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="override a config value, e.g. grating.phi0='1.4 pi'")
        p.add_argument("--classical", action="store_true", help="classical (ballistic) model only")
        p.add_argument("--no-decoherence", action="store_true", help="disable all decoherence channels")
        p.add_argument("--channels", help="comma list of col,abs,sca,emi,csl")
        if name == "csl":
            p.add_argument("--visibility-ratio", type=float, required=True)
        if name == "material-info":
            p.add_argument("--wavelength", type=parse_quantity, action="append",
                           help="wavelength (repeatable, accepts units)")
        if name == "heating":
            p.add_argument("--free-fall", type=parse_quantity, default=None,
                           help="free-fall time after release (default t1 + t2)")
        if name == "validate":
            p.add_argument("--samples", type=int, default=1_000_000)
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def _field_path(err):
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return "; ".join(out)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(json_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    fn = COMMANDS[args.command][0]
    try:
        cfg = build_config(args)
        status = fn(args, cfg)
    except ValidationError as exc:
        print(f"config error: {_field_path(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, SpectrumError, UnsupportedMaterialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NanotalbotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return status if status is not None else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
