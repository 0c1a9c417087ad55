"""Differentiable operations recorded on a :class:`~fracop.autodiff.Tape`.

Each op computes its forward value with numpy and registers the adjoint of its
linearisation (see the convention note in :mod:`fracop.autodiff`).
"""
from __future__ import annotations

import numpy as np

from . import ctensor
from .autodiff import Node
from .errors import ShapeMismatch, ZeroTarget
from .frft import fractional_matrix, fractional_matrix_derivative, get_plan


def _const(tape, x) -> Node:
    return x if isinstance(x, Node) else tape.leaf(np.asarray(x))


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    raise TypeError("at least one operand must be a Node")


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _const(tape, a), _const(tape, b)
    if b.value.ndim == 0 and a.value.ndim:
        return tape.record("add_scalar", (a, b), a.value + b.value,
                           lambda g: (g, np.sum(g)))
    _same_shape("add", a, b)
    return tape.record("add", (a, b), a.value + b.value, lambda g: (g, g))


def sub(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _const(tape, a), _const(tape, b)
    _same_shape("sub", a, b)
    return tape.record("sub", (a, b), a.value - b.value, lambda g: (g, -g))


def mul(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _const(tape, a), _const(tape, b)
    av, bv = a.value, b.value
    if bv.ndim == 0 and av.ndim:
        return tape.record("mul_scalar", (a, b), av * bv,
                           lambda g: (g * np.conj(bv), np.sum(g * np.conj(av))))
    _same_shape("mul", a, b)
    return tape.record("mul", (a, b), av * bv,
                       lambda g: (g * np.conj(bv), g * np.conj(av)))


def scale(a: Node, c) -> Node:
    c = complex(c) if np.iscomplexobj(c) else float(c)
    return a.tape.record("scale", (a,), a.value * c, lambda g: (g * np.conj(c),))


def conj(a: Node) -> Node:
    return a.tape.record("conj", (a,), np.conj(a.value), lambda g: (np.conj(g),))


def real(a: Node) -> Node:
    return a.tape.record("real", (a,), np.real(a.value).copy(), lambda g: (g,))


def to_complex(re: Node, im: Node | None = None) -> Node:
    """``re + 1j*im`` from real nodes (``im`` defaults to zero)."""
    if im is None:
        return re.tape.record("to_complex", (re,), re.value.astype(np.complex128),
                              lambda g: (np.real(g),))
    _same_shape("to_complex", re, im)
    return re.tape.record("to_complex", (re, im), re.value + 1j * im.value,
                          lambda g: (np.real(g), np.imag(g)))


def add_bias(x: Node, b: Node) -> Node:
    """Add a per-channel vector ``b`` along the last axis of ``x``."""
    if b.value.shape != x.value.shape[-1:]:
        raise ShapeMismatch(f"bias {b.shape} vs channels of {x.shape}")
    lead = tuple(range(x.value.ndim - 1))
    return x.tape.record("add_bias", (x, b), x.value + b.value,
                         lambda g: (g, np.sum(g, axis=lead)))


def linear(x: Node, w: Node) -> Node:
    """Channel mixing ``x[..., i] @ w[i, o]``."""
    xv, wv = x.value, w.value
    if wv.ndim != 2 or xv.shape[-1] != wv.shape[0]:
        raise ShapeMismatch(f"linear: {xv.shape} @ {wv.shape}")

    def vjp(g):
        gx = g @ np.conj(wv).T
        gw = np.conj(xv.reshape(-1, xv.shape[-1])).T @ g.reshape(-1, g.shape[-1])
        return gx, gw

    return x.tape.record("linear", (x, w), xv @ wv, vjp)


def mode_mix(x: Node, r: Node) -> Node:
    """Per-mode channel mixing: ``y[b, m, o] = sum_i x[b, m, i] r[m, i, o]``.

    ``x`` is (batch, *modes, cin) and ``r`` is (*modes, cin, cout).
    """
    xv, rv = x.value, r.value
    if xv.shape[1:] != rv.shape[:-1]:
        raise ShapeMismatch(f"mode_mix: {xv.shape} vs {rv.shape}")
    b, cin, cout = xv.shape[0], rv.shape[-2], rv.shape[-1]
    modes = rv.shape[:-2]
    xf = np.moveaxis(xv.reshape(b, -1, cin), 1, 0)       # (M, B, cin)
    rf = rv.reshape(-1, cin, cout)                        # (M, cin, cout)
    y = np.moveaxis(xf @ rf, 0, 1).reshape((b,) + modes + (cout,))

    def vjp(g):
        gf = np.moveaxis(g.reshape(b, -1, cout), 1, 0)    # (M, B, cout)
        gx = gf @ np.conj(np.swapaxes(rf, 1, 2))
        gr = np.conj(np.swapaxes(xf, 1, 2)) @ gf
        return np.moveaxis(gx, 0, 1).reshape(xv.shape), gr.reshape(rv.shape)

    return x.tape.record("mode_mix", (x, r), y, vjp)


def matrix_axis(x: Node, axis: int, m: np.ndarray) -> Node:
    """Apply a constant matrix along ``axis``; adjoint applies ``m^H``."""
    m = np.asarray(m)
    value = ctensor.axis_apply(x.value, axis, m)
    if not np.iscomplexobj(x.value) and not np.iscomplexobj(m):
        value = value.real
    return x.tape.record("matrix_axis", (x,), value,
                         lambda g: (ctensor.axis_apply(g, axis, np.conj(m).T),))


def frft_axis(x: Node, axis: int, order) -> Node:
    """FrFT along ``axis``; ``order`` is a real scalar Node or a fixed float.

    The adjoint with respect to ``x`` is ``F^-a`` (the transform is unitary);
    with respect to the order it is ``Re sum(conj(g) * dF/da x)``.
    """
    n = x.value.shape[axis]
    plan = get_plan(n)
    a = float(np.real(order.value)) if isinstance(order, Node) else float(order)
    fwd = fractional_matrix(plan, a)
    xv = x.value
    value = ctensor.axis_apply(xv, axis, fwd)
    inv = np.conj(fwd).T

    if isinstance(order, Node):
        def vjp(g):
            gx = ctensor.axis_apply(g, axis, inv)
            dy = ctensor.axis_apply(xv, axis, fractional_matrix_derivative(plan, a))
            ga = np.sum(np.conj(g) * dy).real
            return gx, np.reshape(ga, order.shape)
        return x.tape.record("frft", (x, order), value, vjp)
    return x.tape.record("frft", (x,), value,
                         lambda g: (ctensor.axis_apply(g, axis, inv),))


def take(x: Node, index) -> Node:
    """Basic-indexing slice; the adjoint scatters into zeros."""
    index = index if isinstance(index, tuple) else (index,)
    shape = x.value.shape
    dtype = x.value.dtype

    def vjp(g):
        out = np.zeros(shape, dtype=np.result_type(dtype, g.dtype))
        out[index] = g
        return (out,)

    return x.tape.record("take", (x,), np.array(x.value[index]), vjp)


def embed(x: Node, shape, index) -> Node:
    """Place ``x`` at ``index`` inside a zero tensor of ``shape`` (adjoint of take)."""
    index = index if isinstance(index, tuple) else (index,)
    out = np.zeros(shape, dtype=x.value.dtype)
    out[index] = x.value
    return x.tape.record("embed", (x,), out, lambda g: (g[index],))


def pad(x: Node, widths) -> Node:
    """Zero-pad at the high end: ``widths`` is one count per axis."""
    widths = tuple(int(w) for w in widths)
    if not any(widths):
        return x
    shape = tuple(s + w for s, w in zip(x.value.shape, widths))
    index = tuple(slice(0, s) for s in x.value.shape)
    return embed(x, shape, index)


def crop(x: Node, widths) -> Node:
    """Remove ``widths`` cells from the high end of each axis."""
    widths = tuple(int(w) for w in widths)
    if not any(widths):
        return x
    return take(x, tuple(slice(0, s - w) for s, w in zip(x.value.shape, widths)))


def cgelu(x: Node) -> Node:
    xv = x.value
    if np.iscomplexobj(xv):
        dre, dim = ctensor.gelu_grad(xv.real), ctensor.gelu_grad(xv.imag)
        return x.tape.record("cgelu", (x,), ctensor.cgelu(xv),
                             lambda g: (np.real(g) * dre + 1j * np.imag(g) * dim,))
    d = ctensor.gelu_grad(xv)
    return x.tape.record("gelu", (x,), ctensor.gelu(xv), lambda g: (np.real(g) * d,))


def sum_all(x: Node) -> Node:
    shape = x.value.shape
    return x.tape.record("sum", (x,), np.sum(x.value),
                         lambda g: (np.broadcast_to(g, shape),))


def sq_norm(x: Node) -> Node:
    xv = x.value
    val = np.sum(np.real(xv) ** 2 + np.imag(xv) ** 2)
    return x.tape.record("sq_norm", (x,), val, lambda g: (2.0 * np.real(g) * xv,))


def rel_l2(pred: Node, target) -> Node:
    """Mean over the leading axis of ``||pred_i - target_i|| / ||target_i||``."""
    tv = np.asarray(target.value if isinstance(target, Node) else target)
    pv = pred.value
    if pv.shape != tv.shape:
        raise ShapeMismatch(f"rel_l2: {pv.shape} vs {tv.shape}")
    n = pv.shape[0]
    axes = tuple(range(1, pv.ndim))
    tnorm = np.sqrt(np.sum(np.abs(tv) ** 2, axis=axes))
    if np.any(tnorm < 1e-14):
        raise ZeroTarget("a target sample has (near) zero norm")
    diff = pv - tv
    dnorm = np.sqrt(np.sum(np.abs(diff) ** 2, axis=axes))
    value = np.mean(dnorm / tnorm)

    def vjp(g):
        safe = np.where(dnorm > 0, dnorm, 1.0)
        coef = np.where(dnorm > 0, 1.0 / (safe * tnorm * n), 0.0)
        return (np.real(g) * diff * coef.reshape((n,) + (1,) * len(axes)),)

    return pred.tape.record("rel_l2", (pred,), value, vjp)
