"""Model checkpoints in the NODF primitive encoding.

Layout (little-endian)::

    magic b"NOCK" | version u8
    config: u32 byte length, UTF-8 ``key=value`` lines
    u32 tensor count, then per tensor:
        u16 name length, UTF-8 name, u8 dtype code (0 f64, 1 c128),
        shape (u8 ndim + ndim x u64), row-major payload
"""
from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .data.nodf import DTYPES, _dtype_code, pack_shape, unpack_shape
from .errors import FormatError, TruncatedFile
from .model import ConoConfig, ConoModel, is_order_name

MAGIC = b"NOCK"
VERSION = 1


def config_to_text(cfg: ConoConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in cfg.to_dict().items())


def config_from_text(text: str) -> ConoConfig:
    d = {}
    for line in text.splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            d[k.strip()] = v.strip()
    return ConoConfig.from_dict(d)


def checkpoint_bytes(model: ConoModel) -> bytes:
    cfg = config_to_text(model.config).encode()
    parts = [MAGIC, struct.pack("<B", VERSION), struct.pack("<I", len(cfg)), cfg,
             struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        arr = np.asarray(arr)
        code = _dtype_code(arr)
        raw = name.encode()
        parts += [struct.pack("<H", len(raw)), raw, struct.pack("<B", code),
                  pack_shape(arr.shape), np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()]
    return b"".join(parts)


def model_from_bytes(buf: bytes) -> ConoModel:
    def need(off, size):
        if off + size > len(buf):
            raise TruncatedFile("checkpoint ends early")

    need(0, 9)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {buf[:4]!r}")
    if buf[4] != VERSION:
        raise FormatError(f"unsupported checkpoint version {buf[4]}")
    (clen,) = struct.unpack_from("<I", buf, 5)
    off = 9
    need(off, clen + 4)
    cfg = config_from_text(buf[off:off + clen].decode())
    off += clen
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    params = {}
    for _ in range(count):
        need(off, 2)
        (nlen,) = struct.unpack_from("<H", buf, off)
        off += 2
        need(off, nlen + 1)
        name = buf[off:off + nlen].decode()
        code = buf[off + nlen]
        off += nlen + 1
        if code not in DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        shape, off = unpack_shape(buf, off)
        size = math.prod(shape) * DTYPES[code].itemsize
        need(off, size)
        native = np.complex128 if code == 1 else np.float64
        params[name] = np.frombuffer(buf, DTYPES[code], math.prod(shape), off).reshape(shape).astype(native)
        off += size
    if off != len(buf):
        raise FormatError("trailing bytes after checkpoint tensors")
    frozen = frozenset(k for k in params if is_order_name(k)) \
        if not cfg.learn_orders else frozenset()
    return ConoModel(cfg, params, frozen)


def save_checkpoint(path, model: ConoModel) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path) -> ConoModel:
    return model_from_bytes(Path(path).read_bytes())
