"""Experiment reports: table container, JSON/CSV writers, provenance."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from morphaeus.errors import MorphaeusError


@dataclass
class ExperimentReport:
    """One table of per-model (or per-variant, per-depth) result rows.

    Rows are plain mappings so the column set can differ per experiment;
    the writers derive a stable column order from first appearance. Cells
    must be finite unless the row is marked failed.
    """

    experiment: str
    rows: list[dict]
    provenance: dict
    details: dict = field(default_factory=dict)
    # persisted so a reloaded report prints columns in the original order
    # (the JSON writer sorts mapping keys)
    column_order: list[str] | None = None

    def validate(self) -> "ExperimentReport":
        for row in self.rows:
            if row.get("failed"):
                continue
            for key, value in row.items():
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    continue
                if not math.isfinite(value):
                    raise MorphaeusError(
                        f"non-finite cell {key}={value!r} in row "
                        f"{row.get('model', row.get('variant', '?'))!r}"
                    )
        return self

    def columns(self) -> list[str]:
        if self.column_order is not None:
            return list(self.column_order)
        cols: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in cols:
                    cols.append(key)
        return cols

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "provenance": dict(sorted(self.provenance.items())),
            "columns": self.columns(),
            "rows": self.rows,
            "details": self.details,
        }

    def write(self, directory: str | Path) -> tuple[Path, Path]:
        """Write report.json and report.csv; byte-stable for equal content."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        json_path = directory / "report.json"
        csv_path = directory / "report.csv"
        json_path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        csv_path.write_text(self.to_csv_text())
        return json_path, csv_path

    def to_csv_text(self) -> str:
        cols = self.columns()
        lines = [",".join(cols)]
        for row in self.rows:
            cells = []
            for col in cols:
                value = row.get(col)
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append(repr(value))
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def load_report(directory: str | Path) -> ExperimentReport:
    path = Path(directory) / "report.json"
    if not path.is_file():
        raise MorphaeusError(
            f"no report.json under {directory}; run the experiment first"
        )
    payload = json.loads(path.read_text())
    return ExperimentReport(
        experiment=payload["experiment"],
        rows=payload["rows"],
        provenance=payload["provenance"],
        details=payload.get("details", {}),
        column_order=payload.get("columns"),
    )


def median_rows(per_seed_rows: list[dict]) -> dict:
    """Median of numeric cells across seed replicates of one row.

    Non-numeric cells must agree across seeds and pass through; booleans
    take the majority (median rounded at 0.5).
    """
    if len(per_seed_rows) == 1:
        return dict(per_seed_rows[0])
    out: dict = {}
    for key in per_seed_rows[0]:
        values = [row[key] for row in per_seed_rows]
        first = values[0]
        if isinstance(first, bool):
            out[key] = bool(np.median([float(v) for v in values]) >= 0.5)
        elif isinstance(first, (int, float)):
            med = float(np.median(values))
            out[key] = int(med) if isinstance(first, int) and med.is_integer() else med
        else:
            out[key] = first
    return out
