"""Deterministic CSV/metadata emission for experiment runs.

All CSV files start with a schema comment line, then a header row; fields
are comma-separated with '.' decimal point and LF endings.  Floats are
written with shortest round-trip formatting, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import os

__all__ = ["SCHEMA_VERSION", "write_csv", "write_summary", "write_meta", "fmt"]

SCHEMA_VERSION = "1"


def fmt(value) -> str:
    import numpy as np

    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip, plain-Python repr
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, kind: str, header, rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# stacknash-csv v{SCHEMA_VERSION} kind={kind}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_summary(path: str, pairs) -> None:
    write_csv(path, "summary", ["key", "value"], pairs)


def write_meta(path: str, config_hash: str, seed: int, version: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"config_hash={config_hash}\n")
        fh.write(f"seed={seed}\n")
        fh.write(f"version={version}\n")
        fh.write(f"csv_schema={SCHEMA_VERSION}\n")
