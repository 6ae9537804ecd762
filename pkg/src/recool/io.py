"""CSV and JSON serialisation of traces, heating series, power-law points and
lock runs.

CSV files start with one ``# meta: {...}`` comment line holding the resolved
configuration, then a header row and data rows. Floats are written with
``repr``-exact 17 significant digits and read back with ``float``, which is
locale independent, so load(save(x)) reproduces every number bit for bit.
Traces additionally get a JSON sidecar (same stem, ``.json``).
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError
from .fitting import HeatingSeries
from .montecarlo import FluorescenceTrace

TRACE_COLUMNS = ("bin_start_s", "mean_counts", "stderr")
SERIES_COLUMNS = ("delay_s", "n_mean", "n_err")
POINT_COLUMNS = ("omega_rad_s", "ndot_quanta_s", "ndot_err")
LOCK_COLUMNS = ("scan_index", "ratio", "laser_error_Hz", "cavity_error_samples", "lock_ok",
                "true_laser_error_Hz", "laser_output_Hz", "cavity_output_Hz")


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_table(path, columns, meta=None):
    """Write equal-length columns (a name -> sequence mapping) as CSV."""
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("columns must have equal length")
    buf = io.StringIO()
    if meta is not None:
        buf.write("# meta: " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_table(path, required):
    """Read a CSV written by :func:`write_table`.

    Returns ``(columns, meta)`` with float arrays for the ``required``
    columns (extra columns are kept too). Raises ParseError naming the line
    and column on missing columns or malformed numbers.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        text = lines[start][1:].strip()
        if text.startswith("meta:"):
            try:
                meta = json.loads(text[5:])
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad metadata JSON: {exc.msg}", line=start + 1) from None
        start += 1
    if start >= len(lines):
        raise ParseError(f"{path.name}: no header row", line=start + 1)
    rows = list(csv.reader(lines[start:]))
    header = [h.strip() for h in rows[0]]
    for col in required:
        if col not in header:
            raise ParseError(f"{path.name}: missing column {col!r}", line=start + 1, column=col)
    data = {h: [] for h in header}
    for i, row in enumerate(rows[1:], start=start + 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path.name}: expected {len(header)} fields, got {len(row)}", line=i)
        for h, cell in zip(header, row):
            try:
                data[h].append(float(cell))
            except ValueError:
                raise ParseError(f"{path.name}: column {h!r}: cannot parse {cell!r} as a number",
                                 line=i, column=h) from None
    return {h: np.array(v, dtype=float) for h, v in data.items()}, meta


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def save_trace(trace, path):
    """Trace CSV plus a JSON sidecar with bin width, repetitions and metadata."""
    meta = {"bin_width_s": trace.bin_width, "repetitions": trace.repetitions, **trace.metadata}
    write_table(path, {
        "bin_start_s": trace.bin_starts,
        "mean_counts": trace.mean_counts,
        "stderr": trace.stderr,
    }, meta)
    side = dict(meta)
    if trace.mean_energy is not None:
        side["mean_energy_J"] = trace.mean_energy
    write_json(sidecar_path(path), side)
    return Path(path)


def load_trace(path):
    cols, meta = read_table(path, TRACE_COLUMNS)
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
    starts = cols["bin_start_s"]
    if "bin_width_s" in meta:
        width = float(meta["bin_width_s"])
    elif starts.size > 1:
        width = float(starts[1] - starts[0])
    else:
        raise ParseError(f"{Path(path).name}: cannot infer the bin width from a single bin")
    energy = meta.pop("mean_energy_J", None)
    reps = int(meta.pop("repetitions", 1))
    meta.pop("bin_width_s", None)
    return FluorescenceTrace(width, cols["mean_counts"], cols["stderr"], reps,
                             mean_energy=None if energy is None else np.asarray(energy, dtype=float),
                             metadata=meta)


def save_series(series, path, meta=None):
    m = {"omega_z_rad_s": series.omega_z, **(meta or {})}
    write_table(path, {"delay_s": series.delays, "n_mean": series.n_mean, "n_err": series.n_err}, m)
    return Path(path)


def load_series(path, omega_z=None):
    cols, meta = read_table(path, SERIES_COLUMNS)
    if omega_z is None:
        if "omega_z_rad_s" not in meta:
            raise ParseError(f"{Path(path).name}: omega_z_rad_s missing from metadata; pass omega_z")
        omega_z = float(meta["omega_z_rad_s"])
    pts = tuple(zip(cols["delay_s"], cols["n_mean"], cols["n_err"]))
    return HeatingSeries(pts, omega_z)


def save_points(points, path, meta=None):
    pts = [tuple(p) for p in points]
    write_table(path, {
        "omega_rad_s": [p[0] for p in pts],
        "ndot_quanta_s": [p[1] for p in pts],
        "ndot_err": [p[2] for p in pts],
    }, meta or {})
    return Path(path)


def load_points(path):
    cols, _ = read_table(path, POINT_COLUMNS)
    return tuple(zip(cols["omega_rad_s"], cols["ndot_quanta_s"], cols["ndot_err"]))


def save_lock_run(run, path, meta=None):
    cols = run.columns()
    cols["scan_index"] = [int(v) for v in cols["scan_index"]]
    cols["lock_ok"] = [bool(v) for v in cols["lock_ok"]]
    write_table(path, cols, {"scenario": run.scenario.to_dict(), **(meta or {})})
    return Path(path)


def load_lock_run(path):
    """Columns of a lock-run CSV as arrays (``lock_ok`` as bool)."""
    cols, meta = read_table(path, LOCK_COLUMNS[:5])
    cols["scan_index"] = cols["scan_index"].astype(np.int64)
    cols["lock_ok"] = cols["lock_ok"] != 0
    return cols, meta


def write_svg(path, x, ys, labels=None, title="", xlabel="", ylabel="", width=640, height=400):
    """Minimal SVG line chart of one or more series against ``x``."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in (ys if isinstance(ys, (list, tuple)) else [ys])]
    labels = labels or [""] * len(ys)
    pad_l, pad_r, pad_t, pad_b = 70, 20, 30, 50
    allv = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0])
    x0, x1 = float(np.min(x)), float(np.max(x))
    y0, y1 = float(np.min(allv)), float(np.max(allv))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    sx = lambda v: pad_l + (v - x0) / (x1 - x0) * (width - pad_l - pad_r)
    sy = lambda v: height - pad_b - (v - y0) / (y1 - y0) * (height - pad_t - pad_b)
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{width - pad_l - pad_r}" height="{height - pad_t - pad_b}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="18" text-anchor="middle">{title}</text>',
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" text-anchor="middle">{ylabel}</text>',
           f'<text x="{pad_l - 5}" y="{height - pad_b}" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{pad_l - 5}" y="{pad_t + 10}" text-anchor="end">{y1:.3g}</text>',
           f'<text x="{pad_l}" y="{height - pad_b + 15}" text-anchor="middle">{x0:.3g}</text>',
           f'<text x="{width - pad_r}" y="{height - pad_b + 15}" text-anchor="middle">{x1:.3g}</text>']
    for j, (y, lab) in enumerate(zip(ys, labels)):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        c = colours[j % len(colours)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        if lab:
            out.append(f'<text x="{width - pad_r - 5}" y="{pad_t + 15 + 15 * j}" text-anchor="end" fill="{c}">{lab}</text>')
    out.append("</svg>\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out), encoding="utf-8")
    return path
