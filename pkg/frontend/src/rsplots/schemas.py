"""CSV schemas of the model pipeline and strict readers.

Each reader validates the header against the documented schema and fails
naming the offending column; an empty body is an error so that no figure
is ever rendered from vacuous input.
"""

from __future__ import annotations

import csv

SCHEMAS = {
    "enumerate": ["beta", "homogeneity", "noise_homogeneity", "ordinal", "populated", "purely_polynomial"],
    "moments": ["beta", "radius", "p", "estimate", "stderr", "n"],
    "exponents": ["beta", "slope", "stderr", "r2"],
    "cauchy": ["beta", "tau", "tau_prime", "distance", "stderr"],
    "counterterm_ladder": ["beta", "tau", "value", "stderr", "n"],
    "universality": ["beta", "radius", "tau", "ensemble_a", "ensemble_b", "estimate_a", "stderr_a", "estimate_b", "stderr_b", "standardized_difference"],
}


class SchemaError(ValueError):
    pass


def read_table(path: str, kind: str) -> list:
    expected = SCHEMAS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a {kind} table")
    header = rows[0]
    for col in expected:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r} for the {kind} schema")
    idx = {col: header.index(col) for col in expected}
    out = []
    for row in rows[1:]:
        out.append({col: row[idx[col]] for col in expected})
    if not out:
        raise SchemaError(f"{path}: no data rows in the {kind} table")
    return out


def homogeneity_map(enumerate_rows: list) -> dict:
    return {r["beta"]: float(r["homogeneity"]) for r in enumerate_rows}
