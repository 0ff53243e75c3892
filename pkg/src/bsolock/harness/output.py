"""CSV tables and run manifests."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from pathlib import Path


class OutputError(RuntimeError):
    pass


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        v = float(value)
        if not math.isfinite(v):
            return repr(v)
        return format(v, ".17g")
    raise TypeError(f"non-numeric CSV value {value!r}")


@dataclass
class CsvTable:
    header: list
    rows: list = field(default_factory=list)

    def validate(self) -> None:
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} columns, header has {width}")

    def render(self) -> str:
        self.validate()
        lines = [",".join(self.header)]
        lines += [",".join(format_value(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_records(cls, records: list, header=None) -> "CsvTable":
        if header is None:
            if not records:
                raise ValueError("cannot infer a header from no records")
            header = list(records[0])
        return cls(list(header), [[rec[k] for k in header] for rec in records])


def emit_csv(table: CsvTable, path) -> None:
    text = table.render()  # raises before the file is touched
    path = Path(path)
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_manifest(manifest: dict, path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
