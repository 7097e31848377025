"""Command-line front end: simulate, estimate, identify, freqresp.

Exit statuses: 0 success, 2 parse error, 3 validation error, 4 missing
channel/data, 5 numerical failure.  All commands are deterministic given
identical inputs (including seeds); re-running overwrites outputs
bit-identically.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources

import numpy as np

from .identify import (EstimatorConfig, estimate_force, identify_L,
                       identify_shaper_friction)
from .plant import (Dataset, LoadProfile, PlantParams, TrackingControl,
                    simulate, simulate_tracking)
from .shaping import discretize, invert_shaper
from .signals import (LeadLagShaper, RationalTF, SamplingConfig, TimeSeries,
                      freq_response, shaper_to_tf, write_channels_csv)
from .sta import gains_from_L, StaGains

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CHANNEL = 4
EXIT_NUMERIC = 5


class _CliError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


def _fail(status, message):
    raise _CliError(status, message)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        _fail(EXIT_PARSE, f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_PARSE, f"{path}: malformed JSON: {exc}")


def _check_keys(obj, allowed, required, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        _fail(EXIT_VALIDATION, f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        _fail(EXIT_VALIDATION, f"{where}: missing keys {sorted(missing)}")


def _parse_shaper(obj, where):
    _check_keys(obj, ("a", "stages"), ("a", "stages"), where)
    try:
        return LeadLagShaper(a=float(obj["a"]),
                             stages=tuple((float(s["b"]), float(s["c"]))
                                          for s in obj["stages"]))
    except (KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_VALIDATION, f"{where}: {exc}")


def _parse_scenario(obj, seed_override=None):
    _check_keys(obj, ("plant", "load", "control", "sampling"),
                ("plant", "load", "control", "sampling"), "scenario")
    p = obj["plant"]
    _check_keys(p, ("m", "gamma", "coupling", "noise_std", "load_sign"),
                ("m", "gamma", "coupling"), "scenario.plant")
    try:
        params = PlantParams(
            m=float(p["m"]), gamma=float(p["gamma"]),
            coupling=_parse_shaper(p["coupling"], "scenario.plant.coupling"),
            noise_std=float(p.get("noise_std", 0.0)),
            load_sign=float(p.get("load_sign", -1.0)),
        )
    except ValueError as exc:
        _fail(EXIT_VALIDATION, f"scenario.plant: {exc}")

    lo = obj["load"]
    _check_keys(lo, ("kind", "amplitude", "period", "offset", "onset",
                     "levels", "dwell", "smooth_tau"), ("kind",), "scenario.load")
    try:
        load = LoadProfile(kind=lo["kind"],
                           amplitude=float(lo.get("amplitude", 0.0)),
                           period=float(lo.get("period", 1.0)),
                           offset=float(lo.get("offset", 0.0)),
                           onset=float(lo.get("onset", 0.0)),
                           levels=tuple(lo.get("levels", ())),
                           dwell=float(lo.get("dwell", 0.0)),
                           smooth_tau=float(lo.get("smooth_tau", 0.0)))
    except ValueError as exc:
        _fail(EXIT_VALIDATION, f"scenario.load: {exc}")

    sa = obj["sampling"]
    _check_keys(sa, ("dt", "duration", "seed"), ("dt", "duration"), "scenario.sampling")
    seed = int(sa.get("seed", 0)) if seed_override is None else int(seed_override)
    try:
        config = SamplingConfig(dt=float(sa["dt"]),
                                duration=float(sa["duration"]), seed=seed)
    except ValueError as exc:
        _fail(EXIT_VALIDATION, f"scenario.sampling: {exc}")

    co = obj["control"]
    kind = co.get("kind")
    if kind == "tracking":
        _check_keys(co, ("kind", "kp", "kd", "ref_rate", "ref_amp",
                         "ref_freq", "ref_offset"), ("kind", "kp"),
                    "scenario.control")
        try:
            control = TrackingControl(kp=float(co["kp"]),
                                      kd=float(co.get("kd", 0.0)),
                                      ref_rate=float(co.get("ref_rate", 0.0)),
                                      ref_amp=float(co.get("ref_amp", 0.0)),
                                      ref_freq=float(co.get("ref_freq", 0.0)),
                                      ref_offset=float(co.get("ref_offset", 0.0)))
        except ValueError as exc:
            _fail(EXIT_VALIDATION, f"scenario.control: {exc}")
        return params, load, control, config
    if kind == "constant":
        _check_keys(co, ("kind", "value"), ("kind", "value"), "scenario.control")
        u = TimeSeries(config.dt, np.full(config.n_samples, float(co["value"])))
        return params, load, u, config
    _fail(EXIT_VALIDATION,
          f"scenario.control: kind must be 'tracking' or 'constant', got {kind!r}")


def default_scenario_path():
    """Path of the bundled test-stand-like scenario file."""
    return resources.files("forcest.scenarios") / "stand-default.json"


def _run_scenario(obj, seed_override=None):
    params, load, drive, config = _parse_scenario(obj, seed_override)
    if isinstance(drive, TrackingControl):
        return simulate_tracking(params, drive, load, config)
    return simulate(params, drive, load, config)


def cmd_simulate(args):
    obj = _load_json(args.scenario)
    try:
        ds = _run_scenario(obj, args.seed_override)
    except (ValueError, FloatingPointError) as exc:
        _fail(EXIT_NUMERIC, f"simulation failed: {exc}")
    ds.to_csv(args.out)
    if not args.quiet:
        peak_f2 = float(np.max(np.abs(ds.f2_ref)))
        peak_v = float(np.max(np.abs(ds.v_true)))
        print(f"simulated {len(ds)} samples over {len(ds) * ds.dt:g} s "
              f"-> {args.out}")
        print(f"peak |F2| = {peak_f2:.6g} N, peak |v| = {peak_v:.6g} m/s")
    return EXIT_OK


def _parse_estimator_config(obj, dt):
    allowed = ("L", "k1", "k2", "m", "gamma", "shaper", "use_fir",
               "fir_cutoff", "transient_skip")
    _check_keys(obj, allowed, ("m", "gamma", "shaper"), "estimator config")
    if "L" in obj:
        gains = gains_from_L(float(obj["L"]))
    elif "k1" in obj and "k2" in obj:
        k2 = float(obj["k2"])
        gains = StaGains(L=k2 / 1.1, k1=float(obj["k1"]), k2=k2)
    else:
        _fail(EXIT_VALIDATION, "estimator config: needs 'L' or both 'k1' and 'k2'")
    shaper = _parse_shaper(obj["shaper"], "estimator config shaper")
    m = float(obj["m"])
    try:
        g_filter = discretize(invert_shaper(shaper, m), dt)
        return EstimatorConfig(
            gains=gains, m=m, gamma=float(obj["gamma"]), g_filter=g_filter,
            use_fir=bool(obj.get("use_fir", False)),
            fir_cutoff=float(obj.get("fir_cutoff", 50.0)),
            transient_skip=(float(obj["transient_skip"])
                            if obj.get("transient_skip") is not None else None))
    except ValueError as exc:
        _fail(EXIT_VALIDATION, f"estimator config: {exc}")


def _read_dataset(path):
    try:
        return Dataset.from_csv(path)
    except OSError as exc:
        _fail(EXIT_PARSE, f"cannot read {path}: {exc}")
    except KeyError as exc:
        _fail(EXIT_CHANNEL, f"{exc.args[0]}")
    except ValueError as exc:
        _fail(EXIT_PARSE, f"{exc}")


def cmd_estimate(args):
    ds = _read_dataset(args.dataset)
    cfg_obj = _load_json(args.config)
    config = _parse_estimator_config(cfg_obj, ds.dt)
    try:
        f2_hat, diag = estimate_force(ds, config)
    except (ValueError, FloatingPointError) as exc:
        _fail(EXIT_NUMERIC, f"estimation failed: {exc}")
    channels = {"f2_hat": f2_hat, "e": diag["e"], "x2_hat": diag["x2_hat"],
                "chi": diag["chi"]}
    write_channels_csv(args.out, channels)
    if not args.quiet:
        if diag["T_conv"] is None:
            print("warning: differentiator convergence never detected")
        else:
            print(f"convergence detected at T = {diag['T_conv']:.6g} s")
        if ds.f2_ref is not None:
            k0 = f2_hat.index_at(diag["transient_skip"])
            err = f2_hat.values[k0:] - ds.f2_ref[k0:]
            rmse = float(np.sqrt(np.mean(err ** 2)))
            print(f"post-transient RMSE(F2_hat, f2_ref) = {rmse:.6g} N, "
                  f"peak error = {float(np.max(np.abs(err))):.6g} N")
    if args.plots:
        plot_path = args.out.rsplit(".", 1)[0] + ".svg"
        series = [("f2_hat", f2_hat.values)]
        if ds.f2_ref is not None:
            series.append(("f2_ref", ds.f2_ref))
        write_overlay_svg(plot_path, f2_hat.t, series,
                          title="Estimated vs reference interactive force")
        if not args.quiet:
            print(f"plot written to {plot_path}")
    return EXIT_OK


def cmd_identify(args):
    ds = _read_dataset(args.dataset)
    if args.mode == "L":
        if args.grid_points < 1 or args.grid_min <= 0 or args.grid_max < args.grid_min:
            _fail(EXIT_VALIDATION, "invalid L grid specification")
        grid = np.geomspace(args.grid_min, args.grid_max, args.grid_points)
        report = identify_L(ds, grid=grid, transient_skip=args.transient_skip)
        report.curve_to_csv(args.out.rsplit(".", 1)[0] + "_curve.csv")
    else:
        if ds.f2_ref is None:
            _fail(EXIT_CHANNEL, "shaper identification needs the f2_ref channel")
        if args.init is None:
            _fail(EXIT_VALIDATION, "shaper mode needs --init JSON "
                  '{"a":..,"b":[..],"c":[..],"gamma":..}')
        try:
            init_obj = json.loads(args.init)
            init = (float(init_obj["a"]), init_obj["b"], init_obj["c"],
                    float(init_obj["gamma"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            _fail(EXIT_PARSE, f"--init: {exc}")
        try:
            report = identify_shaper_friction(
                ds, gains_from_L(args.L), args.m, init, n=args.n,
                budget=args.budget)
        except (KeyError, ValueError) as exc:
            _fail(EXIT_VALIDATION, f"{exc}")
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
    if not args.quiet:
        print(f"optimum: {report.optimum}")
        print(f"objective: {report.objective:.9g} "
              f"({report.evaluations} evaluations, converged={report.converged})")
    return EXIT_OK


def cmd_freqresp(args):
    if args.shaper is not None:
        text = args.shaper
        if not text.lstrip().startswith("{"):
            try:
                with open(text) as fh:
                    text = fh.read()
            except OSError as exc:
                _fail(EXIT_PARSE, f"cannot read {args.shaper}: {exc}")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            _fail(EXIT_PARSE, f"shaper JSON: {exc}")
        shaper = _parse_shaper(obj, "freqresp shaper")
        try:
            tf = shaper_to_tf(shaper)
        except ValueError as exc:
            _fail(EXIT_VALIDATION, f"{exc}")
    else:
        _fail(EXIT_VALIDATION, "freqresp needs a shaper (inline JSON or path)")
    omega = np.geomspace(args.omega_min, args.omega_max, args.points)
    h = freq_response(tf, omega)
    with open(args.out, "w", newline="") as fh:
        fh.write("omega,magnitude,phase_deg\n")
        for w, hv in zip(omega, h):
            fh.write("%.9g,%.9g,%.9g\n"
                     % (w, abs(hv), math.degrees(np.angle(hv))))
    if not args.quiet:
        dc = tf.dc_gain
        if len(tf.num) == len(tf.den):
            hf = tf.num[-1] / tf.den[-1]
            print(f"DC gain = {dc:.6g}, high-frequency gain = {hf:.6g}")
        else:
            print(f"DC gain = {dc:.6g}, high-frequency gain -> 0 "
                  f"(relative degree {len(tf.den) - len(tf.num)})")
    return EXIT_OK


def write_overlay_svg(path, t, series, title="", width=900, height=420):
    """Self-contained SVG line plot with overlaid named series."""
    colors = ["#1f6fb4", "#d0443b", "#3a9c52", "#8a58b5"]
    margin = 55
    t = np.asarray(t, dtype=float)
    ys = [np.asarray(y, dtype=float) for _, y in series]
    ymin = min(float(np.min(y)) for y in ys)
    ymax = max(float(np.max(y)) for y in ys)
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    def sx(x):
        return margin + (x - t0) / (t1 - t0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin)

    # decimate long series so files stay small
    step = max(1, len(t) // 2000)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>',
             f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
             f'height="{height - 2 * margin}" fill="none" stroke="#888"/>']
    for i, ((name, y), color) in enumerate(zip(series, colors)):
        pts = " ".join(f"{sx(x):.2f},{sy(v):.2f}"
                       for x, v in zip(t[::step], y[::step]))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.2"/>')
        parts.append(f'<text x="{width - margin - 10}" y="{margin + 18 + 16 * i}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="12" '
                     f'fill="{color}">{name}</text>')
    for frac in (0.0, 0.5, 1.0):
        yv = ymin + frac * (ymax - ymin)
        xv = t0 + frac * (t1 - t0)
        parts.append(f'<text x="{margin - 6}" y="{sy(yv):.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{yv:.4g}</text>')
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - margin + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{xv:.4g}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="forcest",
        description="Sliding-mode interactive force estimation toolkit")
    parser.add_argument("--quiet", action="store_true", help="suppress summaries")
    parser.add_argument("--seed-override", type=int, default=None,
                        help="override the scenario noise seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the interactive force")
    p.add_argument("dataset", help="dataset CSV path")
    p.add_argument("--config", required=True, help="estimator config JSON")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--plots", action="store_true", help="emit an SVG overlay")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("identify", help="run an identification procedure")
    p.add_argument("--mode", choices=("L", "shaper"), required=True)
    p.add_argument("dataset", help="dataset CSV path")
    p.add_argument("--out", required=True, help="fit report JSON")
    p.add_argument("--grid-min", type=float, default=0.5)
    p.add_argument("--grid-max", type=float, default=50.0)
    p.add_argument("--grid-points", type=int, default=30)
    p.add_argument("--transient-skip", type=float, default=2.0)
    p.add_argument("--L", type=float, default=3.1,
                   help="fixed Lipschitz bound for shaper mode")
    p.add_argument("--m", type=float, default=1.0 / 0.5882)
    p.add_argument("--n", type=int, default=2, help="shaper order")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--init", default=None, help="initial guess JSON")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("freqresp", help="frequency response of a shaper")
    p.add_argument("shaper", help="inline shaper JSON or a path")
    p.add_argument("--out", required=True, help="output CSV (omega, mag, phase)")
    p.add_argument("--omega-min", type=float, default=1e-2)
    p.add_argument("--omega-max", type=float, default=1e5)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_freqresp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status


def console_main():  # pragma: no cover
    sys.exit(main())
