"""Time-series CSV files: lossless writing, and ingestion with simple stationarising transforms."""
from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError
from .var_model import TimeSeries

TRANSFORMS = ("none", "diff", "logdiff")


class CsvParseError(ConfigError):
    """A CSV cell could not be parsed; ``row`` is 1-based including the header."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


def write_series(path, series: TimeSeries):
    """Header ``t,z1,...,zd`` then one row per time index; floats in round-trip precision."""
    vals = series.values
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"z{j + 1}" for j in range(vals.shape[1])])
        for t, row in enumerate(vals, start=1):
            w.writerow([t] + [repr(float(v)) for v in row])


def _select(header, columns):
    if columns is None:
        cols = [i for i, h in enumerate(header) if h.strip().lower() != "t"]
        if not cols:
            raise CsvParseError("no data columns besides 't'", row=1)
        return cols
    out = []
    for c in columns:
        if isinstance(c, int) or (isinstance(c, str) and c.isdigit()):
            i = int(c)
            if not 0 <= i < len(header):
                raise CsvParseError(f"column index {i} out of range (0..{len(header) - 1})", row=1, column=i)
            out.append(i)
        elif c in header:
            out.append(header.index(c))
        else:
            raise CsvParseError(f"column {c!r} not in header {header}", row=1)
    return out


def apply_transform(values: np.ndarray, transform: str) -> np.ndarray:
    if transform == "none":
        return values
    if values.shape[0] < 2:
        raise DimensionError(f"{transform} needs at least two rows")
    if transform == "diff":
        return np.diff(values, axis=0)
    if transform == "logdiff":
        bad = np.argwhere(~(values > 0))
        if bad.size:
            r, c = bad[0]
            raise ParameterError(f"logdiff needs positive values; row {r + 1}, column {c + 1} is {values[r, c]}")
        return np.diff(np.log(values), axis=0)
    raise ParameterError(f"transform must be one of {TRANSFORMS}, got {transform!r}")


def ingest_csv(path, transform: str = "none", columns=None) -> TimeSeries:
    """Read a headered numeric CSV into a series.

    ``columns`` selects by header name or 0-based index; by default every
    column except one named ``t``.  ``diff`` and ``logdiff`` drop the first row.

    Raises
    ------
    CsvParseError
        With the offending row (1-based, header is row 1) and column.
    """
    if transform not in TRANSFORMS:
        raise ParameterError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CsvParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError("empty file", row=1)
        cols = _select(header, columns)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise CsvParseError(f"row {lineno} has {len(rec)} fields, header has {len(header)}", row=lineno)
            vals = []
            for c in cols:
                try:
                    v = float(rec[c])
                except ValueError:
                    raise CsvParseError(
                        f"row {lineno}, column {header[c]!r}: cannot parse {rec[c]!r} as a number",
                        row=lineno, column=header[c]) from None
                if not math.isfinite(v):
                    raise CsvParseError(f"row {lineno}, column {header[c]!r}: non-finite value", row=lineno,
                                        column=header[c])
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise CsvParseError("no data rows", row=2)
    values = apply_transform(np.array(rows, dtype=float), transform)
    return TimeSeries(values, {"source": str(path), "transform": transform,
                               "columns": [header[c] for c in cols]})
