"""Run artifacts: diagnostics CSV, binary snapshots, manifests, error records.

Floats are written with repr (shortest round-trip form), so identical runs
produce bit-identical files regardless of thread count.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SNAP_MAGIC = "KAPSNAP1"

# Diagnostics schema.  Units (velocity units c, length L, time L/c):
#   x      cell center                 [L]
#   rho    density                     [mass / L]
#   ux,uy  bulk velocity               [c]
#   T      temperature                 [c^2]
#   qx     heat flux x-component       [mass c^3 / L / eps]
#   dist_m per-cell L1 distance of f to its local Maxwellian  [mass / L]
DIAG_COLUMNS = ["x", "rho", "ux", "uy", "T", "qx", "dist_m"]


def write_diagnostics(path, x, macro, flux, dist_per_cell) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(DIAG_COLUMNS)
        u = macro.velocity
        T = macro.temperature
        for i in range(len(x)):
            wr.writerow(
                [
                    repr(float(v))
                    for v in (x[i], macro.rho[i], u[i, 0], u[i, 1], T[i], flux[i, 0], dist_per_cell[i])
                ]
            )


def read_diagnostics(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(v) for v in row] for row in rd]
    data = np.array(rows)
    return {name: data[:, k] for k, name in enumerate(header)}


def write_series(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) for v in row])


def read_series(path) -> dict[str, np.ndarray]:
    return read_diagnostics(path)


def save_snapshot(path, f: np.ndarray, n_x: int, n_v: int, v_max: float, t: float) -> None:
    """Flat binary distribution with a one-line text header."""
    header = f"{SNAP_MAGIC} n_x={n_x} n_v={n_v} v_max={v_max!r} t={t!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f, dtype=np.float64).tobytes())


def load_snapshot(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[0] != SNAP_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        meta = dict(kv.split("=") for kv in header[1:])
        n_x, n_v = int(meta["n_x"]), int(meta["n_v"])
        f = np.frombuffer(fh.read(), dtype=np.float64)
    return f.reshape(n_x, n_v, n_v), float(meta["v_max"]), float(meta["t"])


def write_manifest(out_dir, payload: dict) -> None:
    with open(Path(out_dir) / "run_manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def read_manifest(run_dir) -> dict:
    with open(Path(run_dir) / "run_manifest.json") as fh:
        return json.load(fh)


def write_error_record(out_dir, kind: str, message: str, context: dict | None = None) -> None:
    rec = {"error": kind, "message": message}
    if context:
        rec["context"] = context
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "error.json", "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
        fh.write("\n")
