"""Dense complex tensors.

A ``ComplexTensor`` is a C-contiguous ``numpy.ndarray`` of dtype ``complex128``.
The helpers here add the shape contracts and finiteness checks the rest of the
package relies on; numpy does the arithmetic.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import NonFiniteValue, ShapeMismatch

ComplexTensor = np.ndarray

# Set to False to skip the per-op finiteness scan (it costs one pass over data).
CHECK_FINITE = True

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _checked(t: np.ndarray) -> np.ndarray:
    if CHECK_FINITE and not np.all(np.isfinite(t)):
        raise NonFiniteValue("tensor contains NaN or Inf")
    return t


def ctensor(data, shape=None) -> ComplexTensor:
    """Build a contiguous complex128 tensor, optionally reshaped to ``shape``."""
    t = np.ascontiguousarray(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != t.size:
            raise ShapeMismatch(f"cannot view {t.size} elements as {shape}")
        t = t.reshape(shape)
    return _checked(t)


def elementwise(op: str, a, b=None) -> ComplexTensor:
    """Complex elementwise arithmetic.

    ``op`` is one of ``add``, ``sub``, ``mul``, ``conj`` or ``scale``. ``b`` may
    be a tensor of the same shape or a scalar; nothing else broadcasts.
    """
    a = np.asarray(a, dtype=np.complex128)
    if op == "conj":
        return _checked(np.conj(a))
    if b is None:
        raise ShapeMismatch(f"{op} needs a second operand")
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 0 and b.shape != a.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")
    if op == "add":
        out = a + b
    elif op == "sub":
        out = a - b
    elif op in ("mul", "scale"):
        if op == "scale" and b.ndim != 0:
            raise ShapeMismatch("scale takes a scalar")
        out = a * b
    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return _checked(out)


def matmul(a, b) -> ComplexTensor:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    return _checked(a @ b)


def axis_apply(t, axis: int, m) -> ComplexTensor:
    """Contract ``m`` (N x N or M x N) against ``axis`` of ``t``.

    Every other axis is treated as batch: ``out[..., i, ...] = sum_j m[i, j] t[..., j, ...]``.
    """
    t = np.asarray(t)
    m = np.asarray(m)
    axis = axis % t.ndim if t.ndim else 0
    if m.ndim != 2 or t.ndim == 0 or m.shape[1] != t.shape[axis]:
        raise ShapeMismatch(f"axis_apply: matrix {m.shape} on axis {axis} of {t.shape}")
    moved = np.moveaxis(t, axis, -1)
    out = moved @ m.T
    return _checked(np.ascontiguousarray(np.moveaxis(out, -1, axis)))


def reduce(t, op: str):
    """``sum`` (complex) or ``sq_l2_norm`` (real) over every element."""
    flat = np.asarray(t).reshape(-1)
    if op == "sum":
        return complex(np.sum(flat.astype(np.complex128)))
    if op == "sq_l2_norm":
        return float(np.sum(flat.real ** 2 + flat.imag ** 2))
    raise ValueError(f"unknown reduction {op!r}")


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GeLU, ``x * Phi(x)`` with the Gaussian CDF written via erf."""
    return 0.5 * x * (1.0 + erf(x * _SQRT1_2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * _SQRT1_2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def cgelu(t) -> np.ndarray:
    """GeLU applied separately to the real and imaginary parts.

    Real input stays real (the imaginary channel would be GeLU(0) = 0).
    """
    t = np.asarray(t)
    if not np.iscomplexobj(t):
        return _checked(gelu(t.astype(np.float64)))
    out = gelu(t.real) + 1j * gelu(t.imag)
    return _checked(out)
