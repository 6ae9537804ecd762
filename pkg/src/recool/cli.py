"""Command-line front end.

Every subcommand composes library calls, writes its results to the output
directory and prints a JSON summary on stdout. Failures print a JSON error
object on stderr and exit with the code of the error class.
"""

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig
from .errors import ConfigError, MissingFileError, RecoolError, UsageError
from .lock import run_lock_sim
from .pipeline import heating_rate, noise_density, scaling_fit, simulate_traces
from .trap import ResonatorSpec, coupling_fraction, fixtures, resonator_power, resonator_voltage
from .transitions import ISOTOPES, TRANSITIONS, all_transitions, lookup_transition

OUT_ENV = "RECOOL_OUT"
DEFAULT_OUT = "recool_out"
INTERNAL_ERROR_CODE = 70


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--species", help="ion species, e.g. 174Yb+")
    p.add_argument("--format", choices=("csv", "json"), help="table output format")
    p.add_argument("--svg", action="store_true", default=None, help="also write SVG line charts")


def build_parser():
    ap = _Parser(prog="recool", description="Doppler recooling thermometry and lab tooling")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-recool", help="Monte Carlo recooling traces for each delay")
    _common(p)
    p.add_argument("--delay", type=float, action="append", help="dark delay in s (repeatable)")
    p.add_argument("--ndot", type=float, help="true heating rate, quanta/s")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--axial", type=float, help="axial frequency in Hz")

    p = sub.add_parser("fit-heating", help="fit traces and derive the heating rate")
    _common(p)
    p.add_argument("--trace", action="append", help="trace CSV (repeatable); simulated if omitted")
    p.add_argument("--axial", type=float, help="axial frequency in Hz")

    p = sub.add_parser("scaling-fit", help="heating rate against trap frequency, power-law fit")
    _common(p)
    p.add_argument("--points", help="CSV of omega_rad_s, ndot_quanta_s, ndot_err; simulated if omitted")
    p.add_argument("--fixed-exponent", type=float)

    p = sub.add_parser("noise-density", help="electric-field noise density from a heating series")
    _common(p)
    p.add_argument("--series", help="heating series CSV; simulated if omitted")
    p.add_argument("--target", type=float, help="target frequency in Hz (default 1 MHz)")
    p.add_argument("--exponent", type=float, help="heating-rate scaling exponent (default -2)")

    p = sub.add_parser("lock-sim", help="transfer-cavity lock simulation")
    _common(p)
    p.add_argument("--scans", type=int)
    p.add_argument("--drift", type=float, help="cavity drift rate, Hz/s")
    p.add_argument("--noise", type=float, help="photodiode noise rms relative to peak height")

    p = sub.add_parser("resonator", help="RF resonator voltage/power and coupling")
    _common(p)
    p.add_argument("--power", type=float, help="input power, W")
    p.add_argument("--voltage", type=float, help="electrode RF amplitude, V")
    p.add_argument("--forward", type=float, help="forward power, W")
    p.add_argument("--reflected", type=float, help="reflected power, W")
    p.add_argument("--Q", type=float)
    p.add_argument("--kappa", type=float)

    p = sub.add_parser("fixtures", help="reference trap and resonator values")
    _common(p)

    p = sub.add_parser("transitions", help="Yb+ transition wavelengths")
    _common(p)
    p.add_argument("--isotope", help=f"one of {list(ISOTOPES)}")
    p.add_argument("--transition", help=f"one of {list(TRANSITIONS)}")
    return ap


def _resolve(args):
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise MissingFileError(f"config file not found: {path}")
        cfg = RunConfig.load(path)
    else:
        cfg = RunConfig.from_dict({})
    cfg = cfg.override(seed=args.seed, species=args.species, format=args.format, svg=args.svg)
    out = args.out or cfg.data.get("out") or os.environ.get(OUT_ENV) or DEFAULT_OUT
    cfg = cfg.override(out=str(out))
    return cfg, Path(out)


def _need(path):
    p = Path(path)
    if not p.exists():
        raise MissingFileError(f"input file not found: {p}")
    return p


def _meta(cfg, command):
    # the output directory is left out so results do not depend on where they are written
    resolved = {k: v for k, v in cfg.data.items() if k != "out"}
    return {"command": command, "config": resolved, "seed": cfg["seed"]}


def _write_rows(cfg, out, stem, columns, meta):
    if cfg["format"] == "json":
        return io.write_json(out / f"{stem}.json", {"meta": meta, "columns": columns})
    return io.write_table(out / f"{stem}.csv", columns, meta)


def _trace_stem(delay):
    return f"trace_delay_{delay:g}s"


def _save_trace(cfg, out, trace, delay, meta):
    trace.metadata = {**trace.metadata, "run": meta}
    if cfg["format"] == "json":
        return io.write_json(out / f"{_trace_stem(delay)}.json", {
            "meta": trace.metadata, "bin_width_s": trace.bin_width, "repetitions": trace.repetitions,
            "bin_start_s": trace.bin_starts, "mean_counts": trace.mean_counts, "stderr": trace.stderr,
        })
    return io.save_trace(trace, out / f"{_trace_stem(delay)}.csv")


def cmd_simulate_recool(args, cfg, out):
    exp = dict(cfg["experiment"])
    if args.delay:
        exp["delays_s"] = args.delay
    if args.ndot is not None:
        exp["ndot_quanta_s"] = args.ndot
        exp.pop("ndot_reference", None)
    cfg = cfg.override(experiment=exp)
    if args.repetitions is not None:
        cfg = cfg.override(mc={**cfg["mc"], "repetitions": args.repetitions})
    if args.axial is not None:
        cfg = cfg.override(trap={"axial_frequency_Hz": args.axial})
    meta = _meta(cfg, "simulate-recool")
    _, traces = simulate_traces(cfg)
    files = [_save_trace(cfg, out, tr, d, meta).name for d, tr in traces.items()]
    summary = {"files": files, "delays_s": sorted(traces),
               "first_bin_counts": {f"{d:g}": float(traces[d].mean_counts[0]) for d in sorted(traces)}}
    if cfg["svg"]:
        d0 = sorted(traces)
        io.write_svg(out / "traces.svg", traces[d0[0]].bin_starts * 1e3,
                     [traces[d].mean_counts for d in d0], [f"{d:g} s" for d in d0],
                     "Recooling traces", "time (ms)", "counts per bin")
    io.write_json(out / "simulate_recool.json", {**meta, **summary})
    return summary


def _heating(cfg, out, traces=None, axial=None, command="fit-heating"):
    hr = heating_rate(cfg, axial, traces)
    meta = _meta(cfg, command)
    s = hr.series
    _write_rows(cfg, out, "series", {"delay_s": s.delays, "n_mean": s.n_mean, "n_err": s.n_err},
                {**meta, "omega_z_rad_s": s.omega_z})
    io.write_json(out / "fits.json", {**meta, "fits": [f.to_dict() for f in hr.fits]})
    return hr, meta


def cmd_fit_heating(args, cfg, out):
    if args.axial is not None:
        cfg = cfg.override(trap={"axial_frequency_Hz": args.axial})
    paths = args.trace or cfg["inputs"].get("traces")
    traces = None
    if paths:
        traces = {}
        for path in paths:
            tr = io.load_trace(_need(path))
            delay = tr.metadata.get("delay_s")
            if delay is None:
                raise ConfigError(f"{path}: trace metadata has no delay_s")
            traces[float(delay)] = tr
    hr, meta = _heating(cfg, out, traces)
    summary = {"ndot_quanta_s": hr.ndot, "ndot_err": hr.ndot_err, "axial_frequency_Hz": hr.axial_Hz,
               "n_points": len(hr.series.points)}
    io.write_json(out / "heating_rate.json", {**meta, **summary})
    return summary


def cmd_scaling_fit(args, cfg, out):
    fixed = args.fixed_exponent if args.fixed_exponent is not None else cfg["scaling"].get("fixed_exponent")
    path = args.points or cfg["inputs"].get("points")
    points = io.load_points(_need(path)) if path else None
    fit, points, _ = scaling_fit(cfg, points, fixed)
    meta = _meta(cfg, "scaling-fit")
    _write_rows(cfg, out, "points", {
        "omega_rad_s": [p[0] for p in points], "ndot_quanta_s": [p[1] for p in points],
        "ndot_err": [p[2] for p in points]}, meta)
    summary = fit.to_dict()
    io.write_json(out / "power_law.json", {**meta, **summary})
    return summary


def cmd_noise_density(args, cfg, out):
    nd = cfg["noise_density"]
    target = args.target if args.target is not None else nd["target_frequency_Hz"]
    exponent = args.exponent if args.exponent is not None else nd["ndot_scaling_exponent"]
    path = args.series or cfg["inputs"].get("series")
    if path:
        series = io.load_series(_need(path))
        meta = _meta(cfg, "noise-density")
    else:
        hr, meta = _heating(cfg, out, command="noise-density")
        series = hr.series
    summary = noise_density(series, cfg.species(), target, exponent)
    io.write_json(out / "noise_density.json", {**meta, **summary})
    return summary


def cmd_lock_sim(args, cfg, out):
    lock = dict(cfg["lock"])
    if args.scans is not None:
        lock["n_scans"] = args.scans
    if args.drift is not None:
        lock["cavity_drift_rate"] = args.drift
    if args.noise is not None:
        lock["noise_rms"] = args.noise
    cfg = cfg.override(lock=lock)
    run = run_lock_sim(cfg.scenario())
    meta = _meta(cfg, "lock-sim")
    cols = run.columns()
    cols["scan_index"] = [int(v) for v in cols["scan_index"]]
    cols["lock_ok"] = [bool(v) for v in cols["lock_ok"]]
    _write_rows(cfg, out, "lock_run", cols, meta)
    settle = min(run.scenario.gains.settling_scans, run.scenario.n_scans - 1)
    tail = run.true_laser_error_Hz[settle:]
    summary = {
        "n_scans": run.scenario.n_scans,
        "lock_lost_scans": [int(i) for i in run.lock_lost_events],
        "rms_laser_error_Hz_after_settling": float(np.sqrt(np.mean(tail**2))),
        "controller": "velocity-form PI on both loops, conditional-integration anti-windup",
    }
    if cfg["svg"]:
        io.write_svg(out / "lock_run.svg", run.scan_index, [run.true_laser_error_Hz / 1e6],
                     ["laser error"], "Transfer lock", "scan", "MHz")
    io.write_json(out / "lock_summary.json", {**meta, **summary})
    return summary


def cmd_resonator(args, cfg, out):
    r = dict(cfg["resonator"])
    for key, flag in (("Q", args.Q), ("kappa", args.kappa), ("power_W", args.power),
                      ("voltage_V", args.voltage), ("forward_W", args.forward), ("reflected_W", args.reflected)):
        if flag is not None:
            r[key] = flag
    spec = ResonatorSpec(r["Q"], r["kappa"])
    summary = {"Q": spec.quality_factor, "kappa": spec.geometric_factor}
    if "power_W" in r:
        summary["voltage_V_from_power"] = resonator_voltage(r["power_W"], spec)
    if "voltage_V" in r:
        summary["power_W_from_voltage"] = resonator_power(r["voltage_V"], spec)
    if "forward_W" in r:
        chk = coupling_fraction(r["forward_W"], r.get("reflected_W", 0.0), r.get("coupling_threshold", 0.95))
        summary["coupling_fraction"] = chk.fraction
        summary["coupling_ok"] = chk.ok
    if len(summary) == 2:
        raise UsageError("resonator: give --power, --voltage or --forward/--reflected")
    io.write_json(out / "resonator.json", {**_meta(cfg, "resonator"), **summary})
    return summary


def _fixtures_dict():
    fx = fixtures()

    def conv(v):
        if hasattr(v, "__dataclass_fields__"):
            return {k: conv(getattr(v, k)) for k in v.__dataclass_fields__}
        if hasattr(v, "items"):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v

    return conv(fx)


def cmd_fixtures(args, cfg, out):
    summary = _fixtures_dict()
    io.write_json(out / "fixtures.json", {**_meta(cfg, "fixtures"), "fixtures": summary})
    return summary


def cmd_transitions(args, cfg, out):
    if args.isotope is not None and args.transition is not None:
        recs = [lookup_transition(args.isotope, args.transition)]
    elif args.isotope is not None:
        recs = [lookup_transition(args.isotope, t) for t in TRANSITIONS]
    elif args.transition is not None:
        recs = [lookup_transition(i, args.transition) for i in ISOTOPES]
    else:
        recs = all_transitions()
    rows = [r.to_dict() for r in recs]
    meta = _meta(cfg, "transitions")
    if cfg["format"] == "json":
        io.write_json(out / "transitions.json", {"meta": meta, "rows": rows})
    else:
        # text columns, so not write_table
        import csv
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "transitions.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write("# meta: " + json.dumps(io._jsonable(meta), sort_keys=True) + "\n")
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return {"rows": rows}


COMMANDS = {
    "simulate-recool": cmd_simulate_recool,
    "fit-heating": cmd_fit_heating,
    "scaling-fit": cmd_scaling_fit,
    "noise-density": cmd_noise_density,
    "lock-sim": cmd_lock_sim,
    "resonator": cmd_resonator,
    "fixtures": cmd_fixtures,
    "transitions": cmd_transitions,
}


def _error_json(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "column", "diagnostics"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    return json.dumps(io._jsonable(err), sort_keys=True)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg, out = _resolve(args)
        summary = COMMANDS[args.command](args, cfg, out)
        sys.stdout.write(io.dumps(summary))
        return 0
    except RecoolError as exc:
        sys.stderr.write(_error_json(exc, exc.exit_code) + "\n")
        return exc.exit_code
    except FileNotFoundError as exc:
        sys.stderr.write(_error_json(exc, MissingFileError.exit_code) + "\n")
        return MissingFileError.exit_code
    except Exception as exc:  # noqa: BLE001 - report anything else as an internal error
        sys.stderr.write(_error_json(exc, INTERNAL_ERROR_CODE) + "\n")
        if os.environ.get("RECOOL_DEBUG"):
            traceback.print_exc()
        return INTERNAL_ERROR_CODE


if __name__ == "__main__":
    sys.exit(main())
