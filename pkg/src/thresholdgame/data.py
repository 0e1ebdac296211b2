"""Column-oriented dataset with the fixed experiment CSV schema.

The CSV uses comma delimiter, '.' decimal, UTF-8, one header row; lines
starting with '#' before the header carry run metadata and are skipped on
read.  Externally collected data with the same schema loads the same way.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

#: Column order: ids, covariates, then game outcomes.
CSV_COLUMNS = (
    "subject_id", "treatment", "group_id",
    "age", "female", "education", "patience", "crt", "math_ability",
    "altruism", "envy", "ideology", "gravity", "number_actions",
    "unemployed", "social_transfer", "risk_aversion", "ambiguity_aversion",
    "belief", "perception_accuracy", "pivotal",
    "contribution", "group_total", "threshold_drawn", "success", "earnings",
)


@dataclass
class Dataset:
    """Aligned columns of strings/numbers; the analysis side of the pipeline."""

    columns: dict[str, list]

    def __post_init__(self) -> None:
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def column(self, name: str) -> list:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"no column {name!r}; have {list(self.columns)}") from None

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64, blanks as NaN."""
        out = np.empty(len(self), dtype=float)
        for i, v in enumerate(self.column(name)):
            if v is None or v == "":
                out[i] = math.nan
            else:
                out[i] = float(v)
        return out

    def strings(self, name: str) -> list[str]:
        return [str(v) for v in self.column(name)]

    def subset(self, mask: Sequence[bool]) -> Dataset:
        return Dataset({k: [v for v, m in zip(col, mask) if m]
                        for k, col in self.columns.items()})

    @classmethod
    def from_rows(cls, rows: Iterable[Mapping], columns: Sequence[str]) -> Dataset:
        cols: dict[str, list] = {c: [] for c in columns}
        for row in rows:
            for c in columns:
                cols[c].append(row[c])
        return cls(cols)

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv_text(header_comment))

    def to_csv_text(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            for line in header_comment.splitlines():
                buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        writer.writerow(names)
        for i in range(len(self)):
            writer.writerow([self.columns[c][i] for c in names])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path, column_map: Mapping[str, str] | None = None) -> Dataset:
        """Load a CSV; ``column_map`` renames file columns to schema names."""
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.reader(lines)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        if column_map:
            header = [column_map.get(h, h) for h in header]
        cols: dict[str, list] = {h: [] for h in header}
        for row in reader:
            if len(row) != len(header):
                raise ValueError(f"{path}: row width {len(row)} != header {len(header)}")
            for h, v in zip(header, row):
                cols[h].append(v)
        return cls(cols)
