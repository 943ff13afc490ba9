"""Per-epoch training records and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

LEAD_COLUMNS = ("epoch", "beta", "capacity", "train_total", "val_total")


@dataclass
class TrainHistory:
    """Epoch rows plus where the best-validation checkpoint lives.

    Rows are plain dicts; kinds contribute different loss columns, so the
    CSV header is the union of observed keys with the shared columns
    first. ``epoch`` is 1-based in rows for readability.
    """

    rows: list[dict] = field(default_factory=list)
    best_checkpoint: str | None = None

    def add(self, row: dict) -> None:
        self.rows.append(dict(row))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, key: str) -> list:
        return [r.get(key) for r in self.rows]

    @property
    def best_epoch(self) -> int:
        vals = self.column("val_total")
        return int(min(range(len(vals)), key=vals.__getitem__)) + 1

    @property
    def best_val(self) -> float:
        return min(self.column("val_total"))

    def columns(self) -> list[str]:
        seen: list[str] = [c for c in LEAD_COLUMNS]
        for row in self.rows:
            for key in row:
                if key not in seen:
                    seen.append(key)
        used = {k for row in self.rows for k in row}
        return [c for c in seen if c in used]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = self.columns()
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([_fmt(row.get(c)) for c in cols])
        return path


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value
