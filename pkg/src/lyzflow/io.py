"""Persistence: the diagnostics time series, field snapshots and run summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .integrator import COLUMNS, RunResult

SERIES_HEADER = list(COLUMNS)
# functionals that must not increase along a run, per formulation
MONOTONE = {"surface": ("E", "E_hat"), "potential": ("M",)}


def format_value(x: float) -> str:
    return format(float(x), ".17g")


class SeriesWriter:
    """Streams diagnostics rows to ``series.csv`` with a fixed header."""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        fresh = not (append and self.path.exists())
        self._fh = open(self.path, "w" if fresh else "a", newline="")
        self._writer = csv.writer(self._fh)
        if fresh:
            self._writer.writerow(SERIES_HEADER)

    def write(self, row: dict) -> None:
        self._writer.writerow([format_value(row.get(k, math.nan)) for k in SERIES_HEADER])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_series(path, rows) -> None:
    with SeriesWriter(path) as w:
        for row in rows:
            w.write(row)


def read_series(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


# -- snapshots --------------------------------------------------------------

def snapshot_name(t: float) -> str:
    return f"snapshot_{t:.6f}.fld"


def write_snapshot(path, state, system, control: dict | None = None) -> Path:
    """JSON header line followed by little-endian float64 fields in row-major order."""
    g = system.grid
    header = {
        "t": float(state.t),
        "n_complex": g.n_complex,
        "N": g.N,
        "fields": list(system.field_names),
        "formulation": system.formulation,
        "lambda": float(system.lam),
        "kappa": float(system.kappa),
    }
    if control:
        header["control"] = {k: (float(v) if k == "dt" else int(v)) for k, v in control.items()}
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        for f in system.fields(state):
            fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    header = json.loads(raw[:cut])
    shape = (header["N"],) * (2 * header["n_complex"])
    data = np.frombuffer(raw[cut + 1:], dtype="<f8")
    size = int(np.prod(shape))
    if data.size != size * len(header["fields"]):
        raise ValueError(f"{path}: expected {len(header['fields'])} fields of shape {shape}")
    fields = {name: data[i * size:(i + 1) * size].reshape(shape).astype(float)
              for i, name in enumerate(header["fields"])}
    return header, fields


def restore_state(path, system, template):
    """Rebuild a state from a snapshot, reusing the non-field data of ``template``."""
    header, fields = read_snapshot(path)
    g = system.grid
    if (header["n_complex"], header["N"]) != (g.n_complex, g.N):
        raise ValueError(f"{path}: grid mismatch with the configured run")
    if header["fields"] != list(system.field_names):
        raise ValueError(f"{path}: fields {header['fields']} do not match {system.field_names}")
    state = system.make(template, tuple(fields[k] for k in system.field_names), header["t"])
    return state, header.get("control")


# -- summary ----------------------------------------------------------------

def monotonicity_violation(samples, formulation: str) -> float:
    """Largest observed increase of the monotone functionals (0 if none)."""
    worst = 0.0
    for name in MONOTONE[formulation]:
        x = np.array([r[name] for r in samples], dtype=float)
        x = x[np.isfinite(x)]
        if x.size > 1:
            worst = max(worst, float(np.max(np.diff(x))))
    return worst


def _clean(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def summary_dict(result: RunResult, formulation: str) -> dict:
    last = result.samples[-1] if result.samples else {}
    return {
        "termination": result.termination.value,
        "message": result.message,
        "steps": result.steps,
        "t_final": float(result.final_state.t),
        "samples": len(result.samples),
        "final": {k: _clean(float(v)) for k, v in last.items()},
        "max_monotonicity_violation": monotonicity_violation(result.samples, formulation),
    }


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")
