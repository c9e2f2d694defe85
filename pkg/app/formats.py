"""Point-cloud file formats.

CSV: one point per row, an optional leading label column (detected when no
value in the first column is a number; a column mixing both is an error).

Raw: a 16-byte little-endian header, magic ``EMB1``, u32 N, u32 n and u32
element size (4 or 8), followed by N*n row-major little-endian floats.
"""
import enum
import logging
import math
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from app.geometry.core import PointCloud
from app.geometry.errors import DimensionMismatch, FormatError, MalformedHeader, NonFiniteValue

logger = logging.getLogger(__name__)

MAGIC = b"EMB1"
HEADER = struct.Struct("<4sIII")


class CloudFormat(str, enum.Enum):
    CSV = "csv"
    RAW_F32 = "raw-f32"
    RAW_F64 = "raw-f64"

    @property
    def itemsize(self):
        return {CloudFormat.RAW_F32: 4, CloudFormat.RAW_F64: 8}.get(self)

    @classmethod
    def from_path(cls, path):
        suffix = Path(path).suffix.lower()
        if suffix == ".csv":
            return cls.CSV
        if suffix == ".f32":
            return cls.RAW_F32
        if suffix in (".f64", ".bin", ".emb"):
            return cls.RAW_F64
        raise FormatError(f"cannot infer the format of {path}; pass --format")


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_csv(path):
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise FormatError(f"{path}: no data rows") from None
    except pd.errors.ParserError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if frame.empty:
        raise FormatError(f"{path}: no data rows")
    frame = frame.fillna("").apply(lambda column: column.str.strip())
    numeric = frame[0].map(_is_number).to_numpy(dtype=bool)
    if numeric.any() and not numeric.all():
        row = int(np.argmax(numeric != numeric[0]))
        raise FormatError(f"{path}: row {row}, column 0: {frame.iat[row, 0]!r} mixes labels and numbers "
                          "in the first column")
    labelled = not numeric.any()
    cells = frame.iloc[:, 1:] if labelled else frame
    width = cells.shape[1]
    if width == 0:
        raise FormatError(f"{path}: no coordinate columns")
    # short rows come back padded with empty cells
    text = cells.to_numpy(dtype=object)
    filled = text != ""
    sizes = np.where(filled.any(axis=1), width - np.argmax(filled[:, ::-1], axis=1), 0)
    short = np.flatnonzero(sizes < width)
    if len(short):
        row = int(short[0])
        raise DimensionMismatch(width, int(sizes[row]), row=row)
    numbers = cells.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.argwhere(~np.isfinite(numbers))
    if len(bad):
        r, c = (int(i) for i in bad[0])
        if _is_number(text[r, c]) and not math.isfinite(float(text[r, c])):
            raise NonFiniteValue(r, c)
        raise FormatError(f"{path}: row {r}, column {c}: {text[r, c]!r} is not a number")
    points = text.astype(np.float64)
    return PointCloud(points, frame[0].tolist() if labelled else None)


def _read_raw(path, fmt):
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise MalformedHeader(f"{path}: file shorter than the {HEADER.size}-byte header",
                              HEADER.size, len(data))
    magic, count, dim, itemsize = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")
    if itemsize != fmt.itemsize:
        raise MalformedHeader(f"{path}: element size {itemsize}, expected {fmt.itemsize}",
                              fmt.itemsize, itemsize)
    expected = count * dim * itemsize
    actual = len(data) - HEADER.size
    if actual != expected:
        raise MalformedHeader(f"{path}: payload is {actual} bytes, expected {expected}", expected, actual)
    points = np.frombuffer(data, dtype=f"<f{itemsize}", offset=HEADER.size).reshape(count, dim)
    bad = np.argwhere(~np.isfinite(points))
    if len(bad):
        raise NonFiniteValue(int(bad[0][0]), int(bad[0][1]))
    return PointCloud(points.astype(np.float64))


def ingest(path, fmt=None) -> PointCloud:
    fmt = CloudFormat(fmt) if fmt is not None else CloudFormat.from_path(path)
    cloud = _read_csv(path) if fmt is CloudFormat.CSV else _read_raw(path, fmt)
    logger.info("ingested %s (%s): N=%d, n=%d", path, fmt.value, len(cloud), cloud.n)
    return cloud


def write_cloud(cloud: PointCloud, path, fmt=None):
    fmt = CloudFormat(fmt) if fmt is not None else CloudFormat.from_path(path)
    path = Path(path)
    if fmt is CloudFormat.CSV:
        frame = pd.DataFrame(cloud.points)
        if cloud.labels is not None:
            frame.insert(0, "label", list(cloud.labels))
        frame.to_csv(path, header=False, index=False)
    else:
        header = HEADER.pack(MAGIC, len(cloud), cloud.n, fmt.itemsize)
        payload = np.ascontiguousarray(cloud.points, dtype=f"<f{fmt.itemsize}").tobytes()
        path.write_bytes(header + payload)
    logger.info("wrote %d points to %s (%s)", len(cloud), path, fmt.value)
    return path
