"""Complex neural operator with learnable-order fractional spectral layers.

Forward pass for an input batch ``x`` of shape ``(batch, *spatial, in_channels)``::

    lift -> pad -> layer_1 ... layer_l -> crop -> project -> real part

Each layer computes ``act(W v + b + A(v) + B(v))`` (no activation on the last
layer) with

* ``A(v) = F^-alpha( R_alpha . truncate(F^alpha v) )``: per-mode channel mixing
  on the central ``2 * modes`` fractional-domain coefficients of every axis;
* ``B(v) = F^-alpha' ( R_alpha' F^alpha' v )``: one channel-mixing matrix
  shared by every ``alpha'``-domain coefficient (a 1x1 convolution there).
  As written this commutes with the transform, so ``alpha'`` has no effect
  unless ``alpha_prime_bias`` adds a constant in that domain or
  ``truncate_alpha_prime`` keeps only the central ``2 * modes`` coefficients.

``alpha`` and ``alpha'`` are per-axis learnable orders.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import ops
from .autodiff import Node, Tape
from .errors import ConfigError, ShapeMismatch, UnknownVariant

ABLATIONS = ("no_bias", "no_frft", "no_complex", "no_alias_free")


def is_order_name(name: str) -> bool:
    """True for fractional-order parameters (``layerK.alpha`` / ``layerK.alpha_prime``)."""
    return name.rsplit(".", 1)[-1] in ("alpha", "alpha_prime")


@dataclass(frozen=True)
class ConoConfig:
    in_channels: int = 1
    out_channels: int = 1
    width: int = 16
    n_layers: int = 2
    modes: int = 8
    alpha_init: float = 1.0
    alpha_prime_init: float = 0.5
    use_alias_free: bool = True
    grid_ndim: int = 1
    padding: int = 0
    n_branches: int = 2
    complex_latent: bool = True
    use_bias: bool = True
    learn_orders: bool = True
    alpha_prime_bias: bool = False
    proj_width: int = 0          # 0 -> 2 * width
    grid_endpoint: bool = False  # coordinates i/(S-1) instead of i/S
    truncate_alpha_prime: bool = False  # alpha' branch keeps only the central 2*modes

    def __post_init__(self):
        if self.n_layers < 1 or self.width < 1 or self.modes < 1:
            raise ConfigError("n_layers, width and modes must be positive")
        if self.grid_ndim not in (1, 2):
            raise ConfigError("grid_ndim must be 1 or 2")
        if self.n_branches not in (1, 2):
            raise ConfigError("n_branches must be 1 or 2")
        if self.padding < 0:
            raise ConfigError("padding must be >= 0")

    @property
    def q_width(self) -> int:
        return self.proj_width or 2 * self.width

    @property
    def retained_modes(self) -> int:
        return (2 * self.modes) ** self.grid_ndim

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConoConfig":
        names = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in names:
                raise ConfigError(f"unknown model setting {k!r}")
            kwargs[k] = _coerce(v, type(getattr(cls(), k)))
        return cls(**kwargs)


def _coerce(v, typ):
    if isinstance(v, str):
        if typ is bool:
            if v.lower() in ("1", "true", "yes", "on"):
                return True
            if v.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"not a boolean: {v!r}")
        return typ(v)
    return typ(v)


def parameter_count(cfg: ConoConfig) -> int:
    """Number of real scalars in the parameter store (a complex entry counts 2).

    With ``c = 2`` for a complex latent (else 1), ``d = width``,
    ``din = in_channels + grid_ndim``, ``q = q_width``, ``M = (2 modes)^ndim``::

        lift  = din d + d + [c == 2] (d^2 + d) + c (2 d^2 + 2 d)
        layer = c (d^2 + [bias] d) + 2 M d^2 + ndim
                + [2 branches] (2 d^2 + ndim + [alpha_prime_bias] 2 d)
        proj  = c (d q + q + q out + out)
        total = lift + n_layers * layer + proj

    Spectral weights ``R`` are complex in every variant.
    """
    c = 2 if cfg.complex_latent else 1
    d, q, nd = cfg.width, cfg.q_width, cfg.grid_ndim
    din = cfg.in_channels + nd
    m = cfg.retained_modes
    lift = din * d + d + (d * d + d if c == 2 else 0) + c * (2 * d * d + 2 * d)
    layer = c * (d * d + (d if cfg.use_bias else 0)) + 2 * m * d * d + nd
    if cfg.n_branches == 2:
        layer += 2 * d * d + nd + (2 * d if cfg.alpha_prime_bias else 0)
    proj = c * (d * q + q + q * cfg.out_channels + cfg.out_channels)
    return lift + cfg.n_layers * layer + proj


def init_params(cfg: ConoConfig, seed: int = 0) -> dict:
    """Gaussian initialisation with total variance ``1/fan_in`` per weight.

    Complex weights split that variance evenly over Re and Im. Spectral
    multipliers ``R_alpha`` are further scaled by ``1 / retained_modes``.
    Biases start at zero, orders at ``alpha_init`` / ``alpha_prime_init``.
    """
    rng = np.random.default_rng(seed)
    d, q, nd = cfg.width, cfg.q_width, cfg.grid_ndim
    din = cfg.in_channels + nd
    latent_complex = cfg.complex_latent

    def real_w(fan_in, shape):
        return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape)

    def cplx_w(fan_in, shape):
        s = np.sqrt(0.5 / fan_in)
        return rng.normal(0.0, s, size=shape) + 1j * rng.normal(0.0, s, size=shape)

    def latent_w(fan_in, shape):
        return cplx_w(fan_in, shape) if latent_complex else real_w(fan_in, shape)

    def latent_zeros(n):
        return np.zeros(n, dtype=np.complex128 if latent_complex else np.float64)

    p = {
        "lift.embed.w": real_w(din, (din, d)),
        "lift.embed.b": np.zeros(d),
    }
    if latent_complex:
        p["lift.imag.w"] = real_w(d, (d, d))
        p["lift.imag.b"] = np.zeros(d)
    p["lift.res.w1"] = latent_w(d, (d, d))
    p["lift.res.b1"] = latent_zeros(d)
    p["lift.res.w2"] = latent_w(d, (d, d))
    p["lift.res.b2"] = latent_zeros(d)
    mode_shape = (2 * cfg.modes,) * nd
    for layer in range(cfg.n_layers):
        pre = f"layer{layer}."
        p[pre + "w"] = latent_w(d, (d, d))
        if cfg.use_bias:
            p[pre + "b"] = latent_zeros(d)
        p[pre + "r_alpha"] = cplx_w(d, mode_shape + (d, d)) / cfg.retained_modes
        p[pre + "alpha"] = np.full(nd, float(cfg.alpha_init))
        if cfg.n_branches == 2:
            p[pre + "r_alpha_prime"] = cplx_w(d, (d, d))
            p[pre + "alpha_prime"] = np.full(nd, float(cfg.alpha_prime_init))
            if cfg.alpha_prime_bias:
                p[pre + "c_alpha_prime"] = np.zeros(d, dtype=np.complex128)
    p["proj.w1"] = latent_w(d, (d, q))
    p["proj.b1"] = latent_zeros(q)
    p["proj.w2"] = latent_w(q, (q, cfg.out_channels))
    p["proj.b2"] = latent_zeros(cfg.out_channels)
    return p


# ---------------------------------------------------------------------------
# alias-free activation


@lru_cache(maxsize=64)
def resample_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Real (2n x n) band-limited upsampler and (n x 2n) low-pass downsampler.

    The Nyquist bin is split evenly between +-n/2 on the way up and merged on
    the way down, so both maps are real and ``down @ up == I``.
    """
    if n % 2:
        raise ShapeMismatch(f"alias-free activation needs even lengths, got {n}")
    h = n // 2
    eye = np.eye(n)
    x = np.fft.fft(eye, axis=0)
    y = np.zeros((2 * n, n), dtype=np.complex128)
    y[:h] = x[:h]
    y[2 * n - h + 1:] = x[h + 1:]
    y[h] = y[2 * n - h] = 0.5 * x[h]
    up = np.fft.ifft(y, axis=0).real * 2.0
    eye2 = np.eye(2 * n)
    z = np.fft.fft(eye2, axis=0)
    w = np.zeros((n, 2 * n), dtype=np.complex128)
    w[:h] = z[:h]
    w[h + 1:] = z[2 * n - h + 1:]
    w[h] = z[h] + z[2 * n - h]
    down = np.fft.ifft(w, axis=0).real * 0.5
    up.setflags(write=False)
    down.setflags(write=False)
    return up, down


def activate(v: Node, alias_free: bool, spatial_axes) -> Node:
    """CGeLU, optionally evaluated on a 2x band-limited upsampling.

    With ``alias_free`` the field is upsampled along every spatial axis,
    passed through the activation, ideally low-passed back to the original
    band and downsampled.
    """
    if not alias_free:
        return ops.cgelu(v)
    for ax in spatial_axes:
        up, _ = resample_matrices(v.value.shape[ax])
        v = ops.matrix_axis(v, ax, up)
    v = ops.cgelu(v)
    for ax in spatial_axes:
        _, down = resample_matrices(v.value.shape[ax] // 2)
        v = ops.matrix_axis(v, ax, down)
    return v


# ---------------------------------------------------------------------------
# spectral layer


def mode_slices(shape, modes: int):
    """Central ``2 * modes`` indices of each axis in ``shape``."""
    out = []
    for n in shape:
        if 2 * modes > n:
            raise ConfigError(f"{modes} modes exceed Nyquist for axis length {n}")
        h = n // 2
        out.append(slice(h - modes, h + modes))
    return tuple(out)


def _order(o, j):
    if isinstance(o, Node):
        return ops.take(o, (j,))
    return float(np.asarray(o).reshape(-1)[j])


def _neg(o):
    return ops.scale(o, -1.0) if isinstance(o, Node) else -o


def fractional_transform(v: Node, orders, spatial_axes, inverse=False) -> Node:
    for j, ax in enumerate(spatial_axes):
        a = _order(orders, j)
        v = ops.frft_axis(v, ax, _neg(a) if inverse else a)
    return v


def branch_alpha(v: Node, r: Node, alpha, modes: int, spatial_axes) -> Node:
    vhat = fractional_transform(v, alpha, spatial_axes)
    spatial = [v.value.shape[ax] for ax in spatial_axes]
    window = (slice(None),) + mode_slices(spatial, modes) + (slice(None),)
    mixed = ops.mode_mix(ops.take(vhat, window), r)
    full = vhat.value.shape[:-1] + (r.value.shape[-1],)
    return fractional_transform(ops.embed(mixed, full, window), alpha, spatial_axes,
                                inverse=True)


def branch_alpha_prime(v: Node, r: Node, alpha_prime, spatial_axes, bias=None,
                       modes: int | None = None) -> Node:
    """Shared channel mixing in the ``alpha'`` domain.

    Without ``modes`` every coefficient is mixed, so the branch commutes with
    the transform and ``alpha'`` only matters through ``bias``. With
    ``modes`` only the central ``2 * modes`` coefficients per axis are kept.
    """
    vhat = fractional_transform(v, alpha_prime, spatial_axes)
    window = None
    if modes is not None:
        spatial = [v.value.shape[ax] for ax in spatial_axes]
        window = (slice(None),) + mode_slices(spatial, modes) + (slice(None),)
        vhat = ops.take(vhat, window)
    y = ops.linear(vhat, r)
    if bias is not None:
        y = ops.add_bias(y, bias)
    if window is not None:
        y = ops.embed(y, v.value.shape[:-1] + (r.value.shape[-1],), window)
    return fractional_transform(y, alpha_prime, spatial_axes, inverse=True)


def spectral_layer(v: Node, p: dict, cfg: ConoConfig, is_last: bool, prefix: str = "") -> Node:
    """One fractional operator layer on a padded latent ``v`` of shape (B, *S, d).

    ``p`` maps parameter names (without ``prefix``) to Nodes, or holds plain
    floats/arrays for orders that should stay fixed.
    """
    spatial_axes = tuple(range(1, v.value.ndim - 1))
    out = ops.linear(v, p[prefix + "w"])
    if prefix + "b" in p:
        out = ops.add_bias(out, p[prefix + "b"])
    a = branch_alpha(v, p[prefix + "r_alpha"], p[prefix + "alpha"], cfg.modes, spatial_axes)
    branches = [a]
    if prefix + "r_alpha_prime" in p:
        branches.append(branch_alpha_prime(v, p[prefix + "r_alpha_prime"],
                                           p[prefix + "alpha_prime"], spatial_axes,
                                           p.get(prefix + "c_alpha_prime"),
                                           cfg.modes if cfg.truncate_alpha_prime else None))
    for br in branches:
        if out.is_real:
            br = ops.real(br)
        out = ops.add(out, br)
    if not is_last:
        out = activate(out, cfg.use_alias_free, spatial_axes)
    return out


# ---------------------------------------------------------------------------
# model


def grid_features(spatial_shape, endpoint: bool = False) -> np.ndarray:
    """Coordinate channels in [0, 1], one per spatial axis."""
    axes = [np.linspace(0.0, 1.0, n) if endpoint else np.arange(n) / n for n in spatial_shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


@dataclass
class ConoModel:
    config: ConoConfig
    params: dict
    frozen: frozenset = field(default_factory=frozenset)

    @classmethod
    def create(cls, config: ConoConfig, seed: int = 0) -> "ConoModel":
        frozen = set()
        if not config.learn_orders:
            frozen = {k for k in init_params(config, seed) if is_order_name(k)}
        return cls(config, init_params(config, seed), frozenset(frozen))

    def trainable_names(self) -> list[str]:
        return [k for k in self.params if k not in self.frozen]

    def n_parameters(self) -> int:
        return int(sum(v.size * (2 if np.iscomplexobj(v) else 1) for v in self.params.values()))

    def order_values(self) -> dict:
        return {k: np.array(v) for k, v in self.params.items() if is_order_name(k)}

    def check_input(self, x: np.ndarray):
        cfg = self.config
        if x.ndim != cfg.grid_ndim + 2 or x.shape[-1] != cfg.in_channels:
            raise ShapeMismatch(
                f"expected (batch, {cfg.grid_ndim} spatial axes, {cfg.in_channels}), got {x.shape}")
        for n in x.shape[1:-1]:
            if 2 * cfg.modes > n + cfg.padding:
                raise ConfigError(f"{cfg.modes} modes exceed Nyquist for grid {n}")
            if cfg.use_alias_free and (n + cfg.padding) % 2:
                raise ShapeMismatch(f"alias-free activation needs even padded length, got {n + cfg.padding}")

    def lift(self, x: Node, p: dict) -> Node:
        e = ops.add_bias(ops.linear(x, p["lift.embed.w"]), p["lift.embed.b"])
        if self.config.complex_latent:
            im = ops.add_bias(ops.linear(e, p["lift.imag.w"]), p["lift.imag.b"])
            z = ops.to_complex(e, im)
        else:
            z = e
        hidden = ops.cgelu(ops.add_bias(ops.linear(z, p["lift.res.w1"]), p["lift.res.b1"]))
        hidden = ops.cgelu(ops.add_bias(ops.linear(hidden, p["lift.res.w2"]), p["lift.res.b2"]))
        return ops.add(z, hidden)

    def project(self, v: Node, p: dict) -> Node:
        h = ops.cgelu(ops.add_bias(ops.linear(v, p["proj.w1"]), p["proj.b1"]))
        out = ops.add_bias(ops.linear(h, p["proj.w2"]), p["proj.b2"])
        return out if out.is_real else ops.real(out)

    def build(self, tape: Tape, leaves: dict, x: np.ndarray) -> Node:
        """Record the forward pass for input batch ``x`` on ``tape``."""
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        self.check_input(x)
        spatial = x.shape[1:-1]
        coords = np.broadcast_to(grid_features(spatial, cfg.grid_endpoint),
                                 (x.shape[0],) + spatial + (cfg.grid_ndim,))
        inp = tape.leaf(np.concatenate([x, coords], axis=-1))
        p = dict(leaves)
        for k in self.frozen:
            p[k] = np.asarray(leaves[k].value if isinstance(leaves[k], Node) else leaves[k])
        v = self.lift(inp, p)
        widths = (0,) + (cfg.padding,) * cfg.grid_ndim + (0,)
        v = ops.pad(v, widths)
        for layer in range(cfg.n_layers):
            v = spectral_layer(v, p, cfg, is_last=layer == cfg.n_layers - 1,
                               prefix=f"layer{layer}.")
        v = ops.crop(v, widths)
        return self.project(v, p)

    def forward(self, x: np.ndarray, params: dict | None = None) -> np.ndarray:
        params = self.params if params is None else params
        tape = Tape()
        leaves = {k: tape.leaf(v, name=k) for k, v in params.items()}
        return np.array(self.build(tape, leaves, x).value)

    def predict(self, x: np.ndarray, batch_size: int = 50) -> np.ndarray:
        outs = [self.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0)


def make_ablation(model: ConoModel, variant: str) -> ConoModel:
    """Copy of ``model`` with one component removed.

    ``no_bias`` drops the layer biases, ``no_frft`` pins every order at 1 and
    freezes it, ``no_complex`` switches to a real latent (real lift, real
    weights, real GeLU; spectral multipliers stay complex and each branch
    keeps its real part), ``no_alias_free`` uses the plain activation.
    Parameters the variant keeps are copied unchanged where shapes allow.
    """
    cfg = model.config
    if variant == "no_bias":
        new_cfg = dataclasses.replace(cfg, use_bias=False)
    elif variant == "no_frft":
        new_cfg = dataclasses.replace(cfg, alpha_init=1.0, alpha_prime_init=1.0, learn_orders=False)
    elif variant == "no_complex":
        new_cfg = dataclasses.replace(cfg, complex_latent=False)
    elif variant == "no_alias_free":
        new_cfg = dataclasses.replace(cfg, use_alias_free=False)
    else:
        raise UnknownVariant(f"unknown ablation {variant!r}; choose from {ABLATIONS}")
    fresh = ConoModel.create(new_cfg)
    params = {}
    for k, v in fresh.params.items():
        old = model.params.get(k)
        if variant == "no_frft" and is_order_name(k):
            params[k] = v
        elif old is not None and old.shape == v.shape and old.dtype == v.dtype:
            params[k] = old.copy()
        elif old is not None and old.shape == v.shape:
            params[k] = np.real(old).copy()
        else:
            params[k] = v
    frozen = set(fresh.frozen) | {k for k in model.frozen if k in params}
    return ConoModel(new_cfg, params, frozenset(frozen))


def fno_config(**overrides) -> ConoConfig:
    """Settings that turn the architecture into a plain FNO.

    Real latent, one truncated Fourier branch (orders pinned at 1), plain
    GeLU. The spectral multipliers remain complex.
    """
    base = dict(complex_latent=False, n_branches=1, learn_orders=False,
                alpha_init=1.0, use_alias_free=False)
    base.update(overrides)
    return ConoConfig(**base)
