"""``fracop`` command line: gen, train, eval, frft, inspect.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric failure, 5 incompatible inputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import DatasetFile, read_field_csv, write_field_csv
from .data.generators import gen_burgers1d, gen_chirp_operator, gen_darcy2d, gen_heat1d
from .errors import (BlowUp, ConfigError, DegenerateEigenspace, FormatError, FracopError,
                     NonFiniteLoss, NonFiniteValue, ShapeMismatch, SolverDivergence,
                     UnknownVariant)
from .frft import fractional_matrix, frft, get_plan
from .model import ABLATIONS, ConoConfig, ConoModel, make_ablation
from .protocols import (protocol_ablation, protocol_data_ratio, protocol_noise,
                        protocol_resolution, resolution_family, rows_to_csv)
from .train import TrainConfig, evaluate, prepare_data, train_loop

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_INCOMPATIBLE = 0, 2, 3, 4, 5

GENERATORS = {
    "heat1d": gen_heat1d,
    "burgers1d": gen_burgers1d,
    "darcy2d": gen_darcy2d,
    "chirp": gen_chirp_operator,
}
DEFAULT_GRID = {"heat1d": 64, "burgers1d": 256, "darcy2d": 85, "chirp": 128}

MODEL_KEYS = {f.name for f in dataclasses.fields(ConoConfig)}
TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}

log = logging.getLogger("fracop")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """What was run, with which resolved settings, and what it produced."""
    command: str
    argv: list
    config_path: str | None = None
    settings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    version: str = __version__
    started: str = ""
    finished: str = ""

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# settings


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def split_settings(settings: dict) -> tuple[dict, dict]:
    model, train = {}, {}
    for k, v in settings.items():
        if k in MODEL_KEYS:
            model[k] = v
        elif k in TRAIN_KEYS:
            train[k] = v
        else:
            raise UsageError(f"unknown setting {k!r}")
    return model, train


def train_config_from(d: dict) -> TrainConfig:
    kwargs = {}
    for f in dataclasses.fields(TrainConfig):
        if f.name in d:
            kwargs[f.name] = type(f.default)(d[f.name])
    return TrainConfig(**kwargs)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated number list: {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated integer list: {text!r}") from None


def _threads(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def _read_dataset(path) -> DatasetFile:
    try:
        return DatasetFile.read(path)
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# gen


def generate(task: str, n: int, grid: int | None, seed: int) -> DatasetFile:
    if task not in GENERATORS:
        raise UsageError(f"unknown task {task!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[task](n, grid_n=grid or DEFAULT_GRID[task], seed=seed)


def cmd_gen(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    out = Path(args.output or f"{args.task}.nodf")
    manifest = RunManifest("gen", list(args.argv), started=_now(),
                           settings={"task": args.task, "n": args.n,
                                     "grid": args.grid or DEFAULT_GRID[args.task],
                                     "seed": args.seed})
    with _threads(args.threads):
        data = generate(args.task, args.n, args.grid, args.seed)
    data.write(out)
    manifest.artifacts = [str(out)]
    manifest.finished = _now()
    manifest.write(out.with_name(out.name + ".manifest.json"))
    print(f"{out}: {data.describe()} seed={args.seed}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def resolve_train_settings(args, data: DatasetFile) -> tuple[ConoConfig, TrainConfig, dict]:
    settings = {}
    if args.config:
        settings.update(parse_config_text(Path(args.config).read_text()))
    settings.update(parse_overrides(args.set))
    if args.epochs is not None:
        settings["epochs"] = args.epochs
    if args.seed is not None:
        settings["seed"] = args.seed
    model_d, train_d = split_settings(settings)
    model_d.setdefault("in_channels", data.input_shape[-1])
    model_d.setdefault("out_channels", data.output_shape[-1])
    model_d.setdefault("grid_ndim", len(data.input_shape) - 1)
    model_d.setdefault("grid_endpoint", len(data.input_shape) == 3)
    try:
        mcfg = ConoConfig.from_dict(model_d)
        tcfg = train_config_from(train_d)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    resolved = {**mcfg.to_dict(), **dataclasses.asdict(tcfg)}
    return mcfg, tcfg, resolved


def check_compatible(cfg: ConoConfig, data: DatasetFile) -> None:
    if np.iscomplexobj(data.inputs):
        raise ShapeMismatch("complex-valued datasets are not supported by the model")
    if len(data.input_shape) != cfg.grid_ndim + 1:
        raise ShapeMismatch(f"model expects {cfg.grid_ndim} spatial axes, data has "
                            f"{len(data.input_shape) - 1}")
    if data.input_shape[-1] != cfg.in_channels or data.output_shape[-1] != cfg.out_channels:
        raise ShapeMismatch(f"model channels ({cfg.in_channels} -> {cfg.out_channels}) do not "
                            f"match data ({data.input_shape[-1]} -> {data.output_shape[-1]})")


def cmd_train(args) -> int:
    data = _read_dataset(args.data)
    mcfg, tcfg, resolved = resolve_train_settings(args, data)
    check_compatible(mcfg, data)
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("train", list(args.argv), args.config, started=_now(),
                           settings={**resolved, "data": str(args.data),
                                     "ablation": args.ablation, "model_seed": tcfg.seed,
                                     "threads": args.threads})
    model = ConoModel.create(mcfg, tcfg.seed)
    if args.ablation:
        model = make_ablation(model, args.ablation)
    train, test = prepare_data(data, tcfg)
    try:
        with _threads(args.threads):
            result = train_loop(model, train, test, tcfg, run_dir=run_dir, progress=args.verbose)
    except NonFiniteLoss as exc:
        manifest.finished = _now()
        manifest.settings["failed"] = f"{exc} (last good epoch: {exc.last_good_epoch})"
        manifest.write(run_dir / "manifest.json")
        raise
    save_checkpoint(run_dir / "final.ckpt", result.model)
    manifest.artifacts = [str(run_dir / n) for n in
                          ("metrics.csv", "timing.csv", "best.ckpt", "final.ckpt")]
    manifest.finished = _now()
    manifest.write(run_dir / "manifest.json")
    last = result.metrics.rows[-1]
    print(f"{run_dir}: epochs={len(result.metrics.rows)} final_test_rel_l2={last['test_rel_l2']:.6g} "
          f"best_test_rel_l2={result.metrics.best_test:.6g} (epoch {result.best_epoch})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    model = load_checkpoint(args.ckpt)
    cfg = model.config
    settings = parse_overrides(args.set)
    if args.epochs is not None:
        settings["epochs"] = args.epochs
    model_over, train_d = split_settings(settings)
    if model_over:
        raise UsageError("model settings come from the checkpoint; only training keys may be set")
    try:
        tcfg = train_config_from(train_d)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    seeds = _ints(args.seeds) if args.seeds else [tcfg.seed]

    data = None
    if args.data:
        data = _read_dataset(args.data)
        check_compatible(cfg, data)
    elif args.protocol != "resolution" or not args.task:
        raise UsageError("--data is required (or --task for the resolution protocol)")

    with _threads(args.threads):
        if args.protocol == "test":
            rows = [{"split": "test", "rel_l2": evaluate(model, data.split(tcfg.test_fraction)[1])}]
        elif args.protocol == "resolution":
            if not args.res:
                raise UsageError("--res is required for the resolution protocol")
            res = _ints(args.res)
            endpoint = cfg.grid_endpoint
            if args.task:
                family = resolution_family(
                    lambda n: generate(args.task, args.n, n, args.gen_seed), res, endpoint)
            else:
                finest = data.input_shape[0]
                if max(res) != finest:
                    raise UsageError(f"finest --res must equal the data grid {finest} "
                                     "(or pass --task to generate data)")
                family = resolution_family(lambda n: data, res, endpoint)
            rows = protocol_resolution(model, family, tcfg.test_fraction)
        elif args.protocol == "noise":
            rows = protocol_noise(data, cfg, tcfg, _floats(args.gamma or "0"), seeds)
        elif args.protocol == "ratio":
            rows = protocol_data_ratio(data, cfg, tcfg, _floats(args.ratio or "1"), seeds)
        elif args.protocol == "ablation":
            variants = args.variants.split(",") if args.variants else ("full",) + ABLATIONS
            rows = protocol_ablation(data, cfg, tcfg, variants, seeds)
        else:
            raise UsageError(f"unknown protocol {args.protocol!r}")
    table = rows_to_csv(rows)
    sys.stdout.write(table)
    if args.output:
        out = Path(args.output)
        out.write_text(table)
        RunManifest("eval", list(args.argv), None, settings={
            "protocol": args.protocol, "ckpt": str(args.ckpt), "data": args.data,
            **dataclasses.asdict(tcfg), "seeds": seeds}, artifacts=[str(out)],
            started=_now(), finished=_now()).write(out.with_name(out.name + ".manifest.json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# frft


def load_field(path, sample: int = 0, which: str = "input", channel: int = 0) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if raw[:4] == b"NODF":
        data = DatasetFile.from_bytes(raw)
        block = data.inputs if which == "input" else data.outputs
        if not 0 <= sample < data.sample_count:
            raise UsageError(f"--sample {sample} out of range (file has {data.sample_count})")
        if not 0 <= channel < block.shape[-1]:
            raise UsageError(f"--channel {channel} out of range")
        return block[sample, ..., channel]
    try:
        return read_field_csv(path)
    except (FormatError, ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed field {path}: {exc}") from exc


def _order_tag(a: float) -> str:
    return f"{a:g}".replace("-", "m")


def cmd_frft(args) -> int:
    orders = _floats(args.order)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.matrix:
        stem = f"frft_matrix_n{args.matrix}"
        plan = get_plan(args.matrix)
        grids = {a: fractional_matrix(plan, a) for a in orders}
    else:
        x = load_field(args.input, args.sample, args.field, args.channel)
        if x.ndim not in (1, 2) or min(x.shape) < 2:
            raise UsageError(f"expected a 1-D or 2-D field, got shape {x.shape}")
        axes = _ints(args.axes) if args.axes else list(range(x.ndim))
        if any(not 0 <= ax < x.ndim for ax in axes) or len(set(axes)) != len(axes):
            raise UsageError(f"bad --axes {args.axes!r} for a {x.ndim}-D field")
        stem = Path(args.input).stem
        grids = {a: frft(x.astype(np.complex128), axes, [a] * len(axes)) for a in orders}
    for a, g in grids.items():
        for kind, values in (("mag", np.abs(g)), ("phase", np.angle(g))):
            path = out_dir / f"{stem}_a{_order_tag(a)}_{kind}.csv"
            write_field_csv(path, values)
            written.append(str(path))
    RunManifest("frft", list(args.argv), None, settings={
        "input": args.input, "matrix": args.matrix, "orders": orders, "axes": args.axes},
        artifacts=written, started=_now(), finished=_now()).write(out_dir / f"{stem}.manifest.json")
    print(f"wrote {len(written)} files to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect


def cmd_inspect(args) -> int:
    path = Path(args.path)
    try:
        head = path.read_bytes()[:4]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if head == b"NODF":
        data = DatasetFile.read(path)
        print(f"NODF dataset {path}")
        print(data.describe())
        print(f"input range [{data.inputs.min():.6g}, {data.inputs.max():.6g}] "
              f"output range [{data.outputs.min():.6g}, {data.outputs.max():.6g}]")
    elif head == b"NOCK":
        model = load_checkpoint(path)
        print(f"checkpoint {path}: {model.n_parameters()} real parameters")
        for k, v in model.config.to_dict().items():
            print(f"  {k} = {v}")
        for k, v in model.order_values().items():
            print(f"  {k}: {np.array2string(v, precision=6)}")
    else:
        raise FormatError(f"{path}: neither a NODF dataset nor a checkpoint")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("task", choices=sorted(GENERATORS))
    g.add_argument("--n", type=int, default=100, help="number of samples")
    g.add_argument("--grid", type=int, default=None, help="grid points per axis")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", default=None)
    g.add_argument("--threads", type=int, default=None)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--config", default=None, help="key=value settings file")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
    t.add_argument("--ablation", choices=ABLATIONS, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--run-dir", default="run")
    t.add_argument("--threads", type=int, default=None)
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint or run a protocol")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", default=None)
    e.add_argument("--protocol", default="test",
                   choices=("test", "resolution", "noise", "ratio", "ablation"))
    e.add_argument("--res", default=None, help="comma-separated resolutions")
    e.add_argument("--task", choices=sorted(GENERATORS), default=None,
                   help="generate the resolution family instead of striding --data")
    e.add_argument("--n", type=int, default=60, help="samples to generate with --task")
    e.add_argument("--gen-seed", type=int, default=0)
    e.add_argument("--gamma", default=None, help="comma-separated noise levels")
    e.add_argument("--ratio", default=None, help="comma-separated data ratios")
    e.add_argument("--variants", default=None, help="comma-separated ablation variants")
    e.add_argument("--seeds", default=None, help="comma-separated seeds")
    e.add_argument("--set", action="append", metavar="KEY=VALUE")
    e.add_argument("--epochs", type=int, default=None)
    e.add_argument("-o", "--output", default=None)
    e.add_argument("--threads", type=int, default=None)
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("frft", help="dump FrFT magnitude/phase grids as CSV")
    f.add_argument("input", nargs="?", default=None, help="CSV or NODF field")
    f.add_argument("--order", default="1", help="comma-separated orders")
    f.add_argument("--axes", default=None, help="comma-separated axes (default: all)")
    f.add_argument("--matrix", type=int, default=None, help="dump the N x N transform matrix")
    f.add_argument("--sample", type=int, default=0)
    f.add_argument("--field", choices=("input", "output"), default="input")
    f.add_argument("--channel", type=int, default=0)
    f.add_argument("-o", "--output-dir", default=".")
    f.set_defaults(func=cmd_frft)

    i = sub.add_parser("inspect", help="print dataset or checkpoint metadata")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        if args.verb == "frft" and args.input is None and args.matrix is None:
            raise UsageError("give an input field or --matrix N")
        return args.func(args)
    except UsageError as exc:
        print(f"fracop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnknownVariant, ConfigError) as exc:
        print(f"fracop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShapeMismatch as exc:
        print(f"fracop: incompatible input: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (NonFiniteLoss, NonFiniteValue, BlowUp, SolverDivergence, DegenerateEigenspace,
            FloatingPointError) as exc:
        extra = ""
        if isinstance(exc, NonFiniteLoss):
            extra = f" (last good epoch: {exc.last_good_epoch})"
        print(f"fracop: numeric failure: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError) as exc:
        print(f"fracop: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FracopError as exc:
        print(f"fracop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
