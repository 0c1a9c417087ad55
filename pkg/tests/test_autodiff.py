import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracop import ops
from fracop.autodiff import Tape, grad_check, value_and_grad
from fracop.errors import CycleDetected, NonRealLoss, ShapeMismatch
from fracop.frft import fractional_matrix, get_plan

TOL = 1e-5


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def probe(out):
    """Real scalar loss with a non-trivial gradient: ||out - t||^2 for a fixed t."""
    rng = np.random.default_rng(1234)
    shape = out.value.shape
    t = rng.standard_normal(shape)
    if np.iscomplexobj(out.value):
        t = t + 1j * rng.standard_normal(shape)
    return ops.sq_norm(ops.sub(out, out.tape.leaf(t)))


rng0 = np.random.default_rng(0)
CASES = {
    "add": ({"a": rand_c(rng0, 3, 4), "b": rand_c(rng0, 3, 4)}, lambda t, p: ops.add(p["a"], p["b"])),
    "add_scalar": ({"a": rand_c(rng0, 5), "s": np.array(0.3 - 0.2j)},
                   lambda t, p: ops.add(p["a"], p["s"])),
    "sub": ({"a": rand_c(rng0, 3, 4), "b": rand_c(rng0, 3, 4)}, lambda t, p: ops.sub(p["a"], p["b"])),
    "mul": ({"a": rand_c(rng0, 6), "b": rand_c(rng0, 6)}, lambda t, p: ops.mul(p["a"], p["b"])),
    "mul_real_complex": ({"a": rng0.standard_normal(6), "b": rand_c(rng0, 6)},
                         lambda t, p: ops.mul(p["a"], p["b"])),
    "mul_scalar": ({"a": rand_c(rng0, 6), "s": np.array(1.2 + 0.4j)},
                   lambda t, p: ops.mul(p["a"], p["s"])),
    "scale": ({"a": rand_c(rng0, 4)}, lambda t, p: ops.scale(p["a"], 0.5 - 2j)),
    "conj": ({"a": rand_c(rng0, 4)}, lambda t, p: ops.mul(ops.conj(p["a"]), t.leaf(rand_c(np.random.default_rng(2), 4)))),
    "real": ({"a": rand_c(rng0, 4)}, lambda t, p: ops.real(ops.mul(p["a"], p["a"]))),
    "to_complex": ({"re": rng0.standard_normal(5), "im": rng0.standard_normal(5)},
                   lambda t, p: ops.mul(ops.to_complex(p["re"], p["im"]), ops.to_complex(p["re"]))),
    "add_bias": ({"x": rand_c(rng0, 2, 3, 4), "b": rand_c(rng0, 4)},
                 lambda t, p: ops.add_bias(p["x"], p["b"])),
    "linear": ({"x": rand_c(rng0, 2, 5, 3), "w": rand_c(rng0, 3, 4)},
               lambda t, p: ops.linear(p["x"], p["w"])),
    "linear_real": ({"x": rng0.standard_normal((4, 3)), "w": rng0.standard_normal((3, 2))},
                    lambda t, p: ops.linear(p["x"], p["w"])),
    "mode_mix": ({"x": rand_c(rng0, 2, 3, 2, 3), "r": rand_c(rng0, 3, 2, 3, 4)},
                 lambda t, p: ops.mode_mix(p["x"], p["r"])),
    "matrix_axis": ({"x": rand_c(rng0, 3, 6, 2)},
                    lambda t, p: ops.matrix_axis(p["x"], 1, rand_c(np.random.default_rng(3), 9, 6))),
    "frft_x": ({"x": rand_c(rng0, 2, 8, 3)}, lambda t, p: ops.frft_axis(p["x"], 1, 0.37)),
    "frft_order": ({"x": rand_c(rng0, 2, 8), "a": np.array([0.71])},
                   lambda t, p: ops.frft_axis(p["x"], 1, ops.take(p["a"], (0,)))),
    "take_embed": ({"x": rand_c(rng0, 4, 6)},
                   lambda t, p: ops.embed(ops.take(p["x"], (slice(1, 3), slice(None))), (5, 6),
                                          (slice(2, 4), slice(None)))),
    "pad_crop": ({"x": rand_c(rng0, 2, 5, 3)},
                 lambda t, p: ops.mul(ops.crop(ops.pad(p["x"], (0, 3, 0)), (0, 2, 0)),
                                      t.leaf(rand_c(np.random.default_rng(4), 2, 6, 3)))),
    "cgelu": ({"x": rand_c(rng0, 3, 4)}, lambda t, p: ops.cgelu(p["x"])),
    "gelu": ({"x": rng0.standard_normal((3, 4))}, lambda t, p: ops.cgelu(p["x"])),
    "sum_all": ({"x": rand_c(rng0, 3, 4)}, lambda t, p: ops.sum_all(p["x"])),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_adjoint_matches_finite_differences(name):
    params, fn = CASES[name]
    err = grad_check(lambda t, p: probe(fn(t, p)), params)
    assert err < TOL, f"{name}: {err:.2e}"


def test_rel_l2_adjoint():
    rng = np.random.default_rng(5)
    target = rng.standard_normal((3, 7))
    params = {"x": rng.standard_normal((3, 7))}
    assert grad_check(lambda t, p: ops.rel_l2(p["x"], target), params) < TOL


def test_sq_norm_gradient_is_two_z():
    z = rand_c(np.random.default_rng(6), 5)
    _, g = value_and_grad(lambda t, p: ops.sq_norm(p["z"]), {"z": z})
    np.testing.assert_allclose(g["z"], 2 * z, rtol=1e-14)


def test_real_inner_product_gradient_convention():
    rng = np.random.default_rng(7)
    w, x = rand_c(rng, 4), rand_c(rng, 4)
    loss = lambda t, p: ops.real(ops.sum_all(ops.mul(p["w"], t.leaf(x))))
    _, g = value_and_grad(loss, {"w": w})
    # dL/dRe(w) = Re(x), dL/dIm(w) = -Im(x)  ->  conj(x)
    np.testing.assert_allclose(g["w"], np.conj(x), rtol=1e-14)
    assert grad_check(loss, {"w": w}) < 1e-8


def test_linear_quadratic_check_is_tight():
    rng = np.random.default_rng(8)
    x = rand_c(rng, 6, 3)
    y = rand_c(rng, 6, 2)
    loss = lambda t, p: ops.sq_norm(ops.sub(ops.linear(t.leaf(x), p["w"]), t.leaf(y)))
    assert grad_check(loss, {"w": rand_c(rng, 3, 2)}) < 1e-8


def test_zero_upstream_gives_zero_gradients():
    rng = np.random.default_rng(9)
    tape = Tape()
    w = tape.leaf(rand_c(rng, 3, 3), name="w", trainable=True)
    x = tape.leaf(rand_c(rng, 2, 3))
    out = ops.linear(x, w)
    loss = ops.scale(ops.sq_norm(out), 0.0)
    grads = tape.backward(loss)
    assert np.all(grads["w"] == 0)


def test_order_gradient_is_real():
    x = rand_c(np.random.default_rng(10), 8)
    _, g = value_and_grad(lambda t, p: probe(ops.frft_axis(t.leaf(x), 0, p["a"])),
                          {"a": np.array(0.4)})
    assert g["a"].dtype == np.float64


def test_frft_adjoint_is_inverse():
    rng = np.random.default_rng(11)
    plan = get_plan(16)
    x, y = rand_c(rng, 16), rand_c(rng, 16)
    a = 0.83
    lhs = np.vdot(y, fractional_matrix(plan, a) @ x)
    rhs = np.vdot(fractional_matrix(plan, -a) @ y, x)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


def test_tape_bookkeeping():
    tape = Tape()
    assert tape.backward() == {}
    a = tape.leaf(np.ones(3), name="a", trainable=True)
    ops.add(a, a)
    assert len(tape) == 2 and tape.nodes[1].inputs == (a, a)
    grads = tape.backward(ops.sum_all(tape.nodes[1]))
    np.testing.assert_array_equal(grads["a"], [2.0, 2.0, 2.0])


def test_foreign_node_is_rejected():
    t1, t2 = Tape(), Tape()
    a = t1.leaf(np.ones(2))
    b = t2.leaf(np.ones(2))
    with pytest.raises(CycleDetected):
        t1.record("add", (a, b), a.value + b.value, lambda g: (g, g))


def test_non_real_loss_is_rejected():
    tape = Tape()
    z = tape.leaf(np.array([1 + 1j]), trainable=True)
    with pytest.raises(NonRealLoss):
        tape.backward(ops.sum_all(z))
    with pytest.raises(NonRealLoss):
        tape.backward(z if z.value.size > 1 else ops.embed(z, (2,), (slice(0, 1),)))


def test_shape_errors():
    tape = Tape()
    with pytest.raises(ShapeMismatch):
        ops.add(tape.leaf(np.ones(3)), tape.leaf(np.ones(4)))
    with pytest.raises(ShapeMismatch):
        ops.linear(tape.leaf(np.ones((2, 3))), tape.leaf(np.ones((4, 2))))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(5, 60))
def test_topological_order_property(seed, count):
    rng = np.random.default_rng(seed)
    tape = Tape()
    nodes = [tape.leaf(rng.standard_normal(3)) for _ in range(2)]
    for _ in range(count):
        i, j = rng.integers(0, len(nodes), size=2)
        op = (ops.add, ops.mul, ops.sub)[rng.integers(0, 3)]
        nodes.append(op(nodes[i], nodes[j]))
    for node in tape.nodes:
        assert all(inp.index < node.index for inp in node.inputs)


def test_sibling_order_does_not_change_gradients():
    rng = np.random.default_rng(12)
    x = rand_c(rng, 4, 3)
    w1, w2 = rand_c(rng, 3, 3), rand_c(rng, 3, 3)

    def loss(order):
        def fn(t, p):
            a = ops.linear(p["x"], p["w1"])
            b = ops.linear(p["x"], p["w2"])
            s = ops.add(a, b) if order else ops.add(b, a)
            return ops.sq_norm(s)
        return fn

    _, g1 = value_and_grad(loss(True), {"x": x, "w1": w1, "w2": w2})
    _, g2 = value_and_grad(loss(False), {"x": x, "w1": w1, "w2": w2})
    for k in g1:
        assert np.linalg.norm(g1[k] - g2[k]) <= 1e-12 * np.linalg.norm(g1[k])
