"""Shared argument handling for the experiment scripts."""
import argparse
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from fracop.model import ConoConfig
from fracop.protocols import rows_to_csv


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--step-size", type=int, default=100, help="epochs between lr halvings")
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", default=None, help="CSV path (default: stdout only)")
    return p


def seeds(args):
    return [int(s) for s in args.seeds.split(",")]


def model_config(args, **extra):
    return ConoConfig(width=args.width, n_layers=args.layers, modes=args.modes, **extra)


def emit(rows, args):
    text = rows_to_csv(rows)
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text)


def limited(args):
    return threadpool_limits(limits=args.threads)
