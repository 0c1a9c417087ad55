"""Loss, Adam, step-decay schedule and the training loop."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ops
from .autodiff import Tape
from .data.nodf import DatasetFile
from .errors import ConfigError, NonFiniteLoss, ShapeMismatch, ZeroTarget
from .model import ConoModel, is_order_name

log = logging.getLogger(__name__)

BETA1, BETA2, EPS = 0.9, 0.999, 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 20
    lr: float = 1e-3
    step_size: int = 100
    gamma: float = 0.5
    seed: int = 0
    alpha_lr_multiplier: float = 1.0
    noise_gamma: float = 0.0
    data_ratio: float = 1.0
    test_fraction: float = 1.0 / 6.0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.step_size) < 1:
            raise ConfigError("epochs, batch_size and step_size must be >= 1")
        if self.lr <= 0 or self.gamma <= 0 or self.alpha_lr_multiplier < 0:
            raise ConfigError("lr and gamma must be positive")
        if not 0.0 < self.data_ratio <= 1.0:
            raise ConfigError("data_ratio must be in (0, 1]")
        if self.noise_gamma < 0:
            raise ConfigError("noise_gamma must be >= 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")

    def lr_at(self, epoch: int) -> float:
        """Step decay: multiply by ``gamma`` every ``step_size`` epochs (0-based)."""
        return self.lr * self.gamma ** (epoch // self.step_size)


def rel_l2(pred, target) -> float:
    """Mean over samples of ``||pred_i - target_i|| / ||target_i||``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"rel_l2: {pred.shape} vs {target.shape}")
    p = pred.reshape(len(pred), -1)
    t = target.reshape(len(target), -1)
    tn = np.linalg.norm(t, axis=1)
    if np.any(tn < 1e-14):
        raise ZeroTarget("a target sample has (near) zero norm")
    return float(np.mean(np.linalg.norm(p - t, axis=1) / tn))


# ---------------------------------------------------------------------------
# Adam


def adam_init(params: dict) -> dict:
    return {"t": 0,
            "m": {k: np.zeros_like(v) for k, v in params.items()},
            "v": {k: np.zeros_like(v) for k, v in params.items()}}


def _as_real(a: np.ndarray) -> np.ndarray:
    return a.view(np.float64) if np.iscomplexobj(a) else a


def adam_step(params: dict, grads: dict, state: dict, lr_t: float,
              alpha_lr_multiplier: float = 1.0) -> None:
    """One in-place Adam update.

    Complex parameters are updated as independent (Re, Im) pairs. Fractional
    orders use ``lr_t * alpha_lr_multiplier``. Parameters without a gradient
    entry are left alone.
    """
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - BETA1 ** t
    c2 = 1.0 - BETA2 ** t
    for name, g in grads.items():
        p = params[name]
        if not p.flags.c_contiguous:
            p = params[name] = np.ascontiguousarray(p)
        m = _as_real(state["m"][name])
        v = _as_real(state["v"][name])
        gr = _as_real(np.ascontiguousarray(g, dtype=p.dtype))
        m *= BETA1
        m += (1.0 - BETA1) * gr
        v *= BETA2
        v += (1.0 - BETA2) * gr * gr
        lr = lr_t * (alpha_lr_multiplier if is_order_name(name) else 1.0)
        _as_real(p)[...] -= lr * (m / c1) / (np.sqrt(v / c2) + EPS)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and row["epoch"] <= self.rows[-1]["epoch"]:
            raise ValueError("epochs must increase")
        self.rows.append(row)

    def columns(self) -> list[str]:
        fixed = ["epoch", "lr", "train_rel_l2", "test_rel_l2"]
        extra = [k for k in (self.rows[0] if self.rows else {}) if k not in fixed and k != "wall_time"]
        return fixed + extra

    def to_csv(self) -> str:
        """Deterministic CSV (wall-clock time is kept out; see :meth:`timing_csv`)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()

    def timing_csv(self) -> str:
        lines = ["epoch,wall_time"]
        lines += [f"{r['epoch']},{r.get('wall_time', 0.0):.6f}" for r in self.rows]
        return "\n".join(lines) + "\n"

    @property
    def best_test(self) -> float:
        return min(r["test_rel_l2"] for r in self.rows)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def order_columns(model: ConoModel) -> dict:
    out = {}
    for name, v in model.order_values().items():
        for j, a in enumerate(np.ravel(v)):
            out[f"{name}[{j}]"] = float(a)
    return out


# ---------------------------------------------------------------------------
# loop


def evaluate(model: ConoModel, data: DatasetFile, batch_size: int = 50) -> float:
    return rel_l2(model.predict(data.inputs, batch_size), data.outputs)


def prepare_data(data: DatasetFile, cfg: TrainConfig):
    """Noise (whole file), split, then data-ratio subsampling of the train part."""
    if cfg.noise_gamma > 0:
        data = data.add_noise(cfg.noise_gamma, seed=cfg.seed)
    train, test = data.split(cfg.test_fraction)
    if cfg.data_ratio < 1.0:
        train = train.subsample(cfg.data_ratio)
    return train, test


@dataclass
class TrainResult:
    metrics: MetricsLog
    model: ConoModel          # final parameters
    best_params: dict
    best_epoch: int


def train_loop(model: ConoModel, train: DatasetFile, test: DatasetFile, cfg: TrainConfig,
               run_dir=None, progress: bool = False) -> TrainResult:
    """Minibatch Adam on the relative L2 loss with step-decayed learning rate.

    Shuffling uses its own random stream (``(seed, 1)``), separate from model
    initialisation and data generation. The parameters with the lowest test
    error are kept; with ``run_dir`` they are written to ``best.ckpt`` next to
    ``metrics.csv``.
    """
    from .checkpoint import save_checkpoint

    rng = np.random.default_rng([cfg.seed, 1])
    state = adam_init(model.params)
    trainable = model.trainable_names()
    metrics = MetricsLog()
    best = (np.inf, -1, None)
    n = train.sample_count
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        lr_t = cfg.lr_at(epoch)
        perm = rng.permutation(n)
        total = 0.0
        for b0 in range(0, n, cfg.batch_size):
            idx = perm[b0:b0 + cfg.batch_size]
            xb, yb = train.inputs[idx], train.outputs[idx]
            last = metrics.rows[-1]["epoch"] if metrics.rows else None
            tape = Tape()
            leaves = {k: tape.leaf(v, name=k, trainable=k in trainable)
                      for k, v in model.params.items()}
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    loss = ops.rel_l2(model.build(tape, leaves, xb), yb)
                    value = float(loss.value)
                    if not np.isfinite(value):
                        raise FloatingPointError("loss is not finite")
                    grads = tape.backward(loss)
            except FloatingPointError as exc:
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}: {exc}",
                                    last_good_epoch=last) from exc
            adam_step(model.params, grads, state, lr_t, cfg.alpha_lr_multiplier)
            total += value * len(idx)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                test_err = evaluate(model, test)
            if not np.isfinite(test_err):
                raise FloatingPointError("test error is not finite")
        except FloatingPointError as exc:
            raise NonFiniteLoss(f"non-finite test error at epoch {epoch}: {exc}",
                                last_good_epoch=last) from exc
        row = {"epoch": epoch, "lr": lr_t, "train_rel_l2": total / n, "test_rel_l2": test_err}
        row.update(order_columns(model))
        row["wall_time"] = time.perf_counter() - start
        metrics.append(row)
        if test_err < best[0]:
            best = (test_err, epoch, {k: v.copy() for k, v in model.params.items()})
        if progress:
            log.info("epoch %d lr %.2e train %.5f test %.5f", epoch, lr_t, row["train_rel_l2"], test_err)
    result = TrainResult(metrics, model, best[2], best[1])
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "metrics.csv").write_text(metrics.to_csv())
        (run_dir / "timing.csv").write_text(metrics.timing_csv())
        save_checkpoint(run_dir / "best.ckpt", best_model(result))
    return result


def best_model(result: TrainResult) -> ConoModel:
    return dataclasses.replace(result.model, params=result.best_params)
