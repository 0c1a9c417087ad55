"""Evaluation protocols: resolution sweep, noise, data ratio and ablations.

Every protocol returns a list of flat dict rows; :func:`rows_to_csv` turns
them into a table with a header line.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from typing import Callable, Iterable, Mapping

import numpy as np

from .data.nodf import DatasetFile
from .errors import ConfigError
from .model import ABLATIONS, ConoConfig, ConoModel, make_ablation
from .train import TrainConfig, evaluate, prepare_data, train_loop


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                    for k, v in r.items()})
    return buf.getvalue()


def downsample(data: DatasetFile, factor: int) -> DatasetFile:
    """Keep every ``factor``-th grid point along each spatial axis."""
    if factor == 1:
        return data
    nd = data.inputs.ndim - 2
    idx = (slice(None),) + (slice(None, None, factor),) * nd + (slice(None),)
    return DatasetFile(np.ascontiguousarray(data.inputs[idx]),
                       np.ascontiguousarray(data.outputs[idx]))


def resolution_family(generate: Callable[[int], DatasetFile], resolutions: Iterable[int],
                      endpoint: bool = False) -> dict[int, DatasetFile]:
    """Datasets at several resolutions that sample the same underlying functions.

    ``generate(n)`` is called once at the finest grid; coarser grids are
    strided views of it. Periodic grids need ``finest % n == 0``; grids that
    include both end points (``endpoint=True``) need ``(finest - 1) % (n - 1) == 0``.
    """
    resolutions = sorted(set(int(r) for r in resolutions))
    finest = resolutions[-1]
    fine = generate(finest)
    out = {}
    for n in resolutions:
        num, den = (finest - 1, n - 1) if endpoint else (finest, n)
        if num % den:
            raise ConfigError(f"resolution {n} does not divide the finest grid {finest}")
        out[n] = downsample(fine, num // den)
    return out


def protocol_resolution(model: ConoModel, datasets: Mapping[int, DatasetFile],
                        test_fraction: float | None = 1.0 / 6.0) -> list[dict]:
    """Evaluate one fixed model on every dataset; one row per resolution.

    With ``test_fraction`` only the held-out tail of each dataset is scored,
    which matches the split used during training.
    """
    if not datasets:
        return []
    smallest = min(datasets)
    if 2 * model.config.modes > smallest + model.config.padding:
        raise ConfigError(f"{model.config.modes} modes exceed Nyquist at resolution {smallest}")
    rows = []
    for n in sorted(datasets):
        data = datasets[n]
        if test_fraction is not None:
            data = data.split(test_fraction)[1]
        rows.append({"resolution": n, "rel_l2": evaluate(model, data)})
    return rows


def _train_one(data: DatasetFile, model: ConoModel, tcfg: TrainConfig) -> dict:
    train, test = prepare_data(data, tcfg)
    res = train_loop(model, train, test, tcfg)
    last = res.metrics.rows[-1]
    return {"rel_l2": last["test_rel_l2"], "best_rel_l2": res.metrics.best_test,
            "train_rel_l2": last["train_rel_l2"]}


def protocol_noise(data: DatasetFile, model_cfg: ConoConfig, train_cfg: TrainConfig,
                   gammas: Iterable[float], seeds: Iterable[int] = (0,)) -> list[dict]:
    """Train one model per (gamma, seed); ``rel_l2`` is the final-epoch test error."""
    rows = []
    for g in gammas:
        for s in seeds:
            tcfg = dataclasses.replace(train_cfg, noise_gamma=float(g), seed=s)
            rows.append({"gamma": float(g), "seed": s,
                         **_train_one(data, ConoModel.create(model_cfg, s), tcfg)})
    return rows


def protocol_data_ratio(data: DatasetFile, model_cfg: ConoConfig, train_cfg: TrainConfig,
                        ratios: Iterable[float], seeds: Iterable[int] = (0,)) -> list[dict]:
    rows = []
    for r in ratios:
        for s in seeds:
            tcfg = dataclasses.replace(train_cfg, data_ratio=float(r), seed=s)
            rows.append({"ratio": float(r), "seed": s,
                         **_train_one(data, ConoModel.create(model_cfg, s), tcfg)})
    return rows


def protocol_ablation(data: DatasetFile, model_cfg: ConoConfig, train_cfg: TrainConfig,
                      variants: Iterable[str] = ("full",) + ABLATIONS,
                      seeds: Iterable[int] = (0,)) -> list[dict]:
    """``"full"`` is the unmodified model; other names go through :func:`make_ablation`."""
    rows = []
    for v in variants:
        for s in seeds:
            model = ConoModel.create(model_cfg, s)
            if v != "full":
                model = make_ablation(model, v)
            tcfg = dataclasses.replace(train_cfg, seed=s)
            rows.append({"variant": v, "seed": s, **_train_one(data, model, tcfg)})
    return rows


def mean_by(rows: list[dict], key: str, value: str = "rel_l2") -> dict:
    """Average ``value`` over rows sharing the same ``key`` (e.g. over seeds)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r[value])
    return {k: float(np.mean(v)) for k, v in groups.items()}
