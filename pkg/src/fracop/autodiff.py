"""Define-by-run reverse-mode differentiation for complex computations.

Cotangents follow the Wirtinger-style convention used for real losses: for a
complex value ``z`` the stored gradient is ``dL/dRe(z) + 1j * dL/dIm(z)``. Under
this convention a first-order change of the loss is ``Re(sum(conj(g) * dz))``,
so every vector-Jacobian product below is the adjoint of the forward linear
map with respect to the real inner product ``Re <a, b>``. Real-valued nodes
receive the real part of whatever cotangent reaches them.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import CycleDetected, NonRealLoss

VJP = Callable[[np.ndarray], Sequence]


class Node:
    __slots__ = ("tape", "index", "op_kind", "inputs", "value", "adjoint",
                 "vjp", "trainable", "name")

    def __init__(self, tape, index, op_kind, inputs, value, vjp, trainable=False, name=None):
        self.tape = tape
        self.index = index
        self.op_kind = op_kind
        self.inputs = tuple(inputs)
        self.value = value
        self.adjoint = None
        self.vjp = vjp
        self.trainable = trainable
        self.name = name

    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.value)

    def __repr__(self):
        return f"Node({self.op_kind}, shape={self.shape}, index={self.index})"

    # A few operators for readability in model code.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)


class Tape:
    """Ordered record of a forward computation."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.parameter_slots: list[int] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, name=None, trainable=False) -> Node:
        value = np.asarray(value)
        if value.dtype.kind not in "fc":
            value = value.astype(np.float64)
        node = Node(self, len(self.nodes), "leaf", (), value, None, trainable, name)
        self.nodes.append(node)
        if trainable:
            self.parameter_slots.append(node.index)
        return node

    def record(self, op_kind: str, inputs: Sequence[Node], value, vjp: VJP) -> Node:
        for inp in inputs:
            if inp.tape is not self or inp.index >= len(self.nodes) or self.nodes[inp.index] is not inp:
                raise CycleDetected(f"{op_kind}: input {inp!r} is not already on this tape")
        node = Node(self, len(self.nodes), op_kind, inputs, value, vjp)
        self.nodes.append(node)
        return node

    def parameters(self) -> dict:
        return {self.nodes[i].name or i: self.nodes[i] for i in self.parameter_slots}

    def backward(self, loss: Node | None = None) -> dict:
        """Propagate cotangents from ``loss`` and return trainable-leaf gradients.

        Keys are leaf names (or tape indices for unnamed leaves). Leaves that
        the loss does not depend on get zero gradients.
        """
        if loss is None:
            if not self.nodes:
                return {}
            loss = self.nodes[-1]
        value = np.asarray(loss.value)
        if value.size != 1:
            raise NonRealLoss(f"loss must be scalar, got shape {value.shape}")
        if abs(complex(value.reshape(())).imag) >= 1e-12:
            raise NonRealLoss(f"loss has imaginary part {complex(value.reshape(())).imag:g}")
        for node in self.nodes:
            node.adjoint = None
        loss.adjoint = np.ones_like(np.real(value))
        for node in reversed(self.nodes[: loss.index + 1]):
            if node.adjoint is None or node.vjp is None:
                continue
            cots = node.vjp(node.adjoint)
            for inp, cot in zip(node.inputs, cots):
                if cot is None:
                    continue
                if inp.is_real:
                    cot = np.real(cot)
                cot = np.reshape(cot, inp.shape)
                inp.adjoint = cot if inp.adjoint is None else inp.adjoint + cot
        grads = {}
        for i in self.parameter_slots:
            node = self.nodes[i]
            g = node.adjoint if node.adjoint is not None else np.zeros_like(node.value)
            grads[node.name if node.name is not None else i] = np.array(g, dtype=node.value.dtype)
        return grads


def value_and_grad(loss_fn, params: dict, trainable=None):
    """Run ``loss_fn(tape, leaves)`` on a fresh tape; return (loss, grads)."""
    tape = Tape()
    names = set(params) if trainable is None else set(trainable)
    leaves = {k: tape.leaf(v, name=k, trainable=k in names) for k, v in params.items()}
    loss = loss_fn(tape, leaves)
    grads = tape.backward(loss)
    return float(np.real(loss.value)), grads


def _loss_value(loss_fn, params):
    tape = Tape()
    leaves = {k: tape.leaf(v, name=k) for k, v in params.items()}
    return float(np.real(loss_fn(tape, leaves).value))


def grad_check(loss_fn, params: dict, names=None, h: float = 1e-5, floor: float = 1e-8) -> float:
    """Max relative error between tape gradients and central differences.

    Re and Im of every element of each checked parameter are perturbed
    independently. Only elements whose analytic gradient magnitude exceeds
    ``floor`` are scored.
    """
    names = list(params) if names is None else list(names)
    _, grads = value_and_grad(loss_fn, params, trainable=names)
    worst = 0.0
    for name in names:
        base = np.asarray(params[name])
        is_complex = np.iscomplexobj(base)
        numeric = np.zeros(base.shape, dtype=base.dtype)
        for idx in np.ndindex(base.shape):
            parts = (1.0, 1j) if is_complex else (1.0,)
            for unit in parts:
                vals = []
                for sign in (1.0, -1.0):
                    p = base.copy()
                    p[idx] = p[idx] + sign * h * unit
                    vals.append(_loss_value(loss_fn, {**params, name: p}))
                numeric[idx] += unit * (vals[0] - vals[1]) / (2.0 * h)
        analytic = grads[name]
        mag = np.abs(analytic)
        mask = mag > floor
        if np.any(mask):
            rel = np.abs(numeric - analytic)[mask] / mag[mask]
            worst = max(worst, float(rel.max()))
    return worst
