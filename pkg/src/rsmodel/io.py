"""Deterministic artifact output: CSV suites, binary field dumps, and the
run manifest.

Every writer formats numbers with repr-faithful 17 significant digits and
never embeds wall-clock state, so reruns with identical configuration
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .fields import GridField, GridSpec

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_json",
    "dump_field",
    "load_field",
    "content_hash",
    "write_manifest",
]

CSV_SCHEMAS = {
    "enumerate": ["beta", "homogeneity", "noise_homogeneity", "ordinal", "populated", "purely_polynomial"],
    "moments": ["beta", "radius", "p", "estimate", "stderr", "n"],
    "exponents": ["beta", "slope", "stderr", "r2"],
    "cauchy": ["beta", "tau", "tau_prime", "distance", "stderr"],
    "counterterm_ladder": ["beta", "tau", "value", "stderr", "n"],
    "universality": ["beta", "radius", "tau", "ensemble_a", "ensemble_b", "estimate_a", "stderr_a", "estimate_b", "stderr_b", "standardized_difference"],
    "sg": ["ensemble", "functional", "variance", "gradient_norm_sq", "ratio", "n"],
    "gamma": ["beta", "gamma", "value"],
}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: str, header: list, rows: list) -> None:
    """Deterministic CSV: index strings carry commas, so fields are quoted
    by the standard csv rules."""
    import csv

    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path: str) -> tuple:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    return rows[0], rows[1:]


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_field(path: str, f: GridField, header: dict) -> None:
    """One JSON header line, then raw little-endian float64, row-major."""
    spec = f.spec
    meta = {
        "grid": {"L0": spec.L0, "L": spec.L, "N0": spec.N0, "N1": spec.N1, "d": spec.d},
        **header,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(meta, sort_keys=True).encode())
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: str) -> tuple:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        g = header["grid"]
        spec = GridSpec(g["L0"], g["L"], g["N0"], g["N1"], g["d"])
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(spec.shape)
    return GridField(np.array(data), spec), header


def write_field_slice_csv(path: str, f: GridField, axis: int, index: int) -> None:
    """One-dimensional slice through a field along `axis` at the given
    orthogonal index, as (coordinate, value) rows."""
    spec = f.spec
    sel = [index] * (spec.d + 1)
    sel[axis] = slice(None)
    vals = f.values[tuple(sel)]
    step = spec.steps[axis]
    rows = [(i * step, v) for i, v in enumerate(vals)]
    write_csv(path, ["coordinate", "value"], rows)


def content_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir: str, config_obj: dict, extra: dict | None = None) -> None:
    manifest = {
        "config": config_obj,
        "input_hash": content_hash(config_obj),
    }
    if extra:
        manifest.update(extra)
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
