"""NODF: a small little-endian container for paired input/output fields.

Layout (all integers little-endian)::

    offset  size        field
    0       4           magic b"NODF"
    4       1           version (u8, currently 1)
    5       1           dtype (u8: 0 = float64, 1 = complex128)
    6       8           sample_count (u64)
    14      1           input ndim (u8), then ndim x u64 axis lengths
    ..      1           output ndim (u8), then ndim x u64 axis lengths
    ..      ...         payload: all inputs (row-major), then all outputs

Shapes are per sample, ordered (temporal?, spatial..., variate).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, TruncatedFile

MAGIC = b"NODF"
VERSION = 1
DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}
DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("complex128"): 1}


def _dtype_code(arr: np.ndarray) -> int:
    try:
        return DTYPE_CODES[np.dtype(arr.dtype).newbyteorder("=")]
    except KeyError:
        raise FormatError(f"unsupported dtype {arr.dtype}") from None


def pack_shape(shape) -> bytes:
    if len(shape) > 255:
        raise FormatError("too many axes")
    return struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}Q", *shape)


def unpack_shape(buf: bytes, offset: int) -> tuple[tuple[int, ...], int]:
    if offset + 1 > len(buf):
        raise TruncatedFile("header ends inside a shape")
    (ndim,) = struct.unpack_from("<B", buf, offset)
    offset += 1
    if offset + 8 * ndim > len(buf):
        raise TruncatedFile("header ends inside a shape")
    shape = struct.unpack_from(f"<{ndim}Q", buf, offset)
    return tuple(int(s) for s in shape), offset + 8 * ndim


@dataclass
class DatasetFile:
    inputs: np.ndarray   # (sample_count, *input_shape)
    outputs: np.ndarray  # (sample_count, *output_shape)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.outputs = np.asarray(self.outputs)
        if len(self.inputs) != len(self.outputs):
            raise FormatError("inputs and outputs disagree on sample count")
        complex_ = np.iscomplexobj(self.inputs) or np.iscomplexobj(self.outputs)
        dt = np.complex128 if complex_ else np.float64
        self.inputs = np.ascontiguousarray(self.inputs, dtype=dt)
        self.outputs = np.ascontiguousarray(self.outputs, dtype=dt)
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise FormatError("dataset contains non-finite values")

    @property
    def sample_count(self) -> int:
        return len(self.inputs)

    @property
    def input_shape(self) -> tuple:
        return self.inputs.shape[1:]

    @property
    def output_shape(self) -> tuple:
        return self.outputs.shape[1:]

    @property
    def dtype(self) -> np.dtype:
        return self.inputs.dtype

    def to_bytes(self) -> bytes:
        code = _dtype_code(self.inputs)
        le = DTYPES[code]
        header = (MAGIC + struct.pack("<BBQ", VERSION, code, self.sample_count)
                  + pack_shape(self.input_shape) + pack_shape(self.output_shape))
        return header + self.inputs.astype(le).tobytes() + self.outputs.astype(le).tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "DatasetFile":
        if len(buf) < 14:
            raise TruncatedFile("file shorter than the fixed header")
        if buf[:4] != MAGIC:
            raise FormatError(f"bad magic {buf[:4]!r}")
        version, code, count = struct.unpack_from("<BBQ", buf, 4)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if code not in DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        in_shape, off = unpack_shape(buf, 14)
        out_shape, off = unpack_shape(buf, off)
        dt = DTYPES[code]
        n_in, n_out = math.prod(in_shape), math.prod(out_shape)
        expected = count * (n_in + n_out) * dt.itemsize
        have = len(buf) - off
        if have < expected:
            raise TruncatedFile(f"payload has {have} bytes, header implies {expected}")
        if have > expected:
            raise FormatError(f"payload has {have - expected} trailing bytes (wrong endianness?)")
        data = np.frombuffer(buf, dtype=dt, offset=off)
        inputs = data[: count * n_in].reshape((count,) + in_shape)
        outputs = data[count * n_in:].reshape((count,) + out_shape)
        native = np.complex128 if code == 1 else np.float64
        return cls(inputs.astype(native), outputs.astype(native))

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "DatasetFile":
        return cls.from_bytes(Path(path).read_bytes())

    def subsample(self, ratio: float) -> "DatasetFile":
        """The first ``ceil(ratio * n)`` samples."""
        if not 0.0 < ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {ratio}")
        k = math.ceil(ratio * self.sample_count)
        return DatasetFile(self.inputs[:k].copy(), self.outputs[:k].copy())

    def add_noise(self, gamma: float, seed: int = 0) -> "DatasetFile":
        """Add ``gamma * N(0, sigma_D^2)`` to the inputs.

        ``sigma_D`` is the standard deviation of the whole input block.
        Outputs are left untouched.
        """
        if gamma < 0:
            raise ValueError("gamma must be >= 0")
        if gamma == 0:
            return DatasetFile(self.inputs.copy(), self.outputs.copy())
        rng = np.random.default_rng(seed)
        sigma = float(np.std(self.inputs))
        noise = rng.standard_normal(self.inputs.shape)
        if np.iscomplexobj(self.inputs):
            noise = (noise + 1j * rng.standard_normal(self.inputs.shape)) / np.sqrt(2.0)
        return DatasetFile(self.inputs + gamma * sigma * noise, self.outputs.copy())

    def split(self, test_fraction: float = 1.0 / 6.0):
        """(train, test): the final ``round(test_fraction * n)`` samples are test."""
        n_test = int(round(test_fraction * self.sample_count))
        n_test = min(max(n_test, 1), self.sample_count - 1)
        cut = self.sample_count - n_test
        return (DatasetFile(self.inputs[:cut], self.outputs[:cut]),
                DatasetFile(self.inputs[cut:], self.outputs[cut:]))

    def describe(self) -> str:
        return (f"samples={self.sample_count} input_shape={self.input_shape} "
                f"output_shape={self.output_shape} dtype={self.dtype}")


def write_field_csv(path, field) -> None:
    """Write a 1-D or 2-D real field as CSV (one row per leading index)."""
    arr = np.asarray(field)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or np.iscomplexobj(arr):
        raise ValueError("CSV export takes a real 1-D or 2-D field")
    with open(path, "w", newline="") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_field_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: not a rectangular numeric CSV")
    arr = np.array(rows)
    return arr[:, 0] if arr.shape[1] == 1 else arr
