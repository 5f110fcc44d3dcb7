"""Dataset ingestion, embedding output and static scatter plots."""

import csv
import math
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .errors import DatasetTooSmallError, DimensionError, ParseError


@dataclass
class DataMatrix:
    """n points in d dimensions, one row per point."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {values.shape}")
        if values.shape[0] < 2:
            raise DatasetTooSmallError(f"need at least 2 points, got {values.shape[0]}")
        if values.shape[1] < 1:
            raise DimensionError("need at least one column")
        if not np.all(np.isfinite(values)):
            raise ParseError("data contains NaN or Inf")
        self.values = values

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


@dataclass
class Embedding:
    """n points in p dimensions; the optimizer mutates ``coords`` in place."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {self.coords.shape}")

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def p(self):
        return self.coords.shape[1]


def as_array(x):
    """Return the raw float matrix behind a DataMatrix, Embedding or array."""
    if isinstance(x, DataMatrix):
        return x.values
    if isinstance(x, Embedding):
        return x.coords
    return np.asarray(x, dtype=np.float64)


def load_csv(path, has_header=False):
    """Read a numeric CSV file (rows are points) into a DataMatrix.

    Raises
    ------
    ParseError
        On ragged rows or cells that are not finite reals; the message
        names the 1-based line number.
    DatasetTooSmallError
        If fewer than two data rows are present.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, found {len(row)}", line=lineno)
            try:
                parsed = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(f"non-numeric cell ({exc})", line=lineno) from None
            if not all(math.isfinite(v) for v in parsed):
                raise ParseError("non-finite value", line=lineno)
            rows.append(parsed)
    if len(rows) < 2:
        raise DatasetTooSmallError(f"need at least 2 data rows in {path}, found {len(rows)}")
    return DataMatrix(np.array(rows, dtype=np.float64))


def load_labels(path):
    """Read one integer label per line (first column of a CSV)."""
    labels = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                labels.append(int(float(row[0])))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(f"label {row[0]!r} is not an integer", line=lineno) from None
    return np.array(labels, dtype=np.int64)


def _fmt(x):
    # shortest repr that round-trips; integral values drop the trailing ".0"
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def format_row(row):
    return ",".join(_fmt(v) for v in row)


def write_embedding(emb, path):
    """Write an embedding as CSV with round-trippable precision."""
    coords = as_array(emb)
    if not np.all(np.isfinite(coords)):
        raise ValueError("embedding contains non-finite coordinates")
    with open(path, "w") as fh:
        for row in coords:
            fh.write(format_row(row))
            fh.write("\n")


_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def emit_scatter_svg(emb, path, labels=None, size=600, radius=3.0):
    """Write a 2-D embedding as an SVG scatter plot.

    Axes span the data bounding box plus a 5% margin.  A degenerate box
    (all points equal along an axis) falls back to a unit-width span.
    """
    coords = as_array(emb)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise DimensionError(f"scatter plot needs p = 2, got shape {coords.shape}")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != coords.shape[0]:
            raise DimensionError("labels length does not match number of points")

    lo = coords.min(axis=0) if len(coords) else np.zeros(2)
    hi = coords.max(axis=0) if len(coords) else np.ones(2)
    span = hi - lo
    for ax in range(2):
        if span[ax] <= 0:
            lo[ax] -= 0.5
            span[ax] = 1.0
    lo = lo - 0.05 * span
    span = span * 1.1

    codes = {}
    if labels is not None:
        for lab in sorted(set(labels.tolist())):
            codes[lab] = _PALETTE[len(codes) % len(_PALETTE)]

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for idx, (x, y) in enumerate(coords):
        px = (x - lo[0]) / span[0] * size
        py = size - (y - lo[1]) / span[1] * size
        color = codes[labels[idx].item()] if labels is not None else _PALETTE[0]
        out.append(
            f'<circle cx="{px:.3f}" cy="{py:.3f}" r="{radius}" fill={quoteattr(color)}/>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
        fh.write("\n")
