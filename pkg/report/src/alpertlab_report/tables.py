"""Parsed experiment CSVs with schema validation.

Each table keeps the raw string fields alongside float views, so downstream
rendering can quote numbers verbatim from the source file.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass

SCHEMAS = {
    "inner_decay": ["case", "kappa", "beta", "eta", "ratio", "value", "slope",
                    "expected", "pass"],
    "frame": ["beta", "eta", "metric", "f", "p", "value", "eta0_ok"],
    "marcin": ["p", "beta", "eta", "f", "ratio", "bound", "pass",
               "fitted_exponent", "gamma_p"],
    "verify_wavelets": ["level", "cube", "index", "check", "value", "bound", "pass"],
}


class SchemaError(ValueError):
    pass


@dataclass
class SweepTable:
    path: str
    kind: str
    columns: list[str]
    rows: list[dict[str, str]]

    @classmethod
    def load(cls, path: str, kind: str) -> "SweepTable":
        expected = SCHEMAS[kind]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            if header != expected:
                raise SchemaError(
                    f"{path}: header {header!r} does not match the {kind} schema {expected!r}"
                )
            rows = [dict(zip(expected, row)) for row in reader]
        if not rows:
            raise SchemaError(f"{path}: no data rows")
        return cls(path, kind, expected, rows)

    def floats(self, column: str) -> list[float]:
        return [float(r[column]) for r in self.rows]

    def groups(self, column: str) -> dict[str, list[dict[str, str]]]:
        out: dict[str, list[dict[str, str]]] = {}
        for r in self.rows:
            out.setdefault(r[column], []).append(r)
        return out

    def pass_counts(self) -> tuple[int, int, int]:
        """(passed, failed, unasserted) over the 'pass' column if present."""
        if "pass" not in self.columns:
            return 0, 0, len(self.rows)
        good = sum(1 for r in self.rows if r["pass"] == "1")
        bad = sum(1 for r in self.rows if r["pass"] == "0")
        return good, bad, len(self.rows) - good - bad

    def content_hash(self) -> str:
        with open(self.path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()[:10]


def detect_kind(path: str) -> str | None:
    name = os.path.basename(path)
    for kind in SCHEMAS:
        if name == f"{kind}.csv":
            return kind
    return None
