"""On-disk formats: snapshot matrices, ROM artifacts and diagnostic CSV.

Snapshot file layout (little endian)::

    b"HROM1" | u32 version | u64 rows | u64 cols | f64 dt | u8 tag | f64 data...

with the data stored column by column.  Tag 0 marks states, 1 nonlinearities.
"""
from __future__ import annotations

import csv
import io
import json
import struct
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

MAGIC = b"HROM1"
VERSION = 1
_HEADER = struct.Struct("<5sIQQdB")
TAGS = {"state": 0, "nonlinearity": 1}
_TAG_NAMES = {v: k for k, v in TAGS.items()}


class SnapshotFormatError(ConfigurationError):
    """A snapshot file is truncated or has a foreign header."""


@dataclass
class SnapshotFile:
    matrix: np.ndarray
    dt: float
    tag: str = "state"

    def to_bytes(self) -> bytes:
        X = np.asarray(self.matrix, dtype="<f8")
        if X.ndim != 2:
            raise ConfigurationError("snapshot matrix must be two-dimensional")
        rows, cols = X.shape
        head = _HEADER.pack(MAGIC, VERSION, rows, cols, float(self.dt), TAGS[self.tag])
        return head + X.tobytes(order="F")

    @classmethod
    def from_bytes(cls, buf: bytes) -> "SnapshotFile":
        if len(buf) < _HEADER.size:
            raise SnapshotFormatError("snapshot file shorter than its header")
        magic, version, rows, cols, dt, tag = _HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise SnapshotFormatError(f"unsupported snapshot format version {version}")
        if tag not in _TAG_NAMES:
            raise SnapshotFormatError(f"unknown content tag {tag}")
        payload = memoryview(buf)[_HEADER.size:]
        if len(payload) != rows * cols * 8:
            raise SnapshotFormatError(
                f"payload has {len(payload)} bytes, expected {rows * cols * 8}")
        X = np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F").astype(float)
        return cls(X, dt, _TAG_NAMES[tag])

    def write(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "SnapshotFile":
        return cls.from_bytes(Path(path).read_bytes())


def write_snapshots(path, matrix, dt, tag="state"):
    SnapshotFile(matrix, dt, tag).write(path)


def read_snapshots(path) -> SnapshotFile:
    return SnapshotFile.read(path)


# ROM artifact ----------------------------------------------------------------

_FIXED_DATE = (2000, 1, 1, 0, 0, 0)


def save_artifact(path, arrays: dict, meta: dict):
    """Zip of ``.npy`` members plus ``meta.json``; byte-identical for equal input."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            zf.writestr(_entry(f"{name}.npy"), buf.getvalue())
        zf.writestr(_entry("meta.json"), json.dumps(meta, sort_keys=True, indent=1).encode())


def load_artifact(path):
    arrays = {}
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        for name in zf.namelist():
            if name.endswith(".npy"):
                arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)),
                                                             allow_pickle=False)
    return arrays, meta


def _entry(name):
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


# CSV ---------------------------------------------------------------------------

def fmt_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]
