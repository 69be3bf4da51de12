"""Rectangular result tables with a metadata header, serialized as CSV."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from . import __version__

SIGNIFICANT_DIGITS = 12


def format_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool,)):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIGNIFICANT_DIGITS}g}"


@dataclass
class ExperimentTable:
    columns: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_row(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"row has {len(cells)} cells, expected {len(self.columns)}")
        self.rows.append(tuple(cells))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        """CSV text; metadata lines come first, prefixed with ``#``."""
        out = io.StringIO()
        out.write(f"# version={__version__}\n")
        for key in sorted(self.metadata):
            out.write(f"# {key}={format_metadata(self.metadata[key])}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(format_cell(c) for c in row) + "\n")
        return out.getvalue()


def format_metadata(value) -> str:
    """Metadata values round-trip exactly, so floats use repr rather than 12 digits."""
    if isinstance(value, (list, tuple)):
        return ",".join(format_metadata(v) for v in value)
    if isinstance(value, float) and math.isfinite(value):
        return repr(float(value))
    return format_cell(value)
