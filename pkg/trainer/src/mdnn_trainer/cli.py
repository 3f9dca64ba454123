"""``train-export``: one-shot training/export entry point."""
from __future__ import annotations

import argparse
import sys

from .train import TrainRun, train_and_export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="train-export",
        description="Train (or randomly initialize) the digit classifier and "
                    "export MDNN weights, MDHS histograms and golden vectors.",
    )
    parser.add_argument("--scale", choices=["toy", "full"], default="toy")
    parser.add_argument("--data", help="directory with IDX archives (full scale)")
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="export")
    args = parser.parse_args(argv)
    try:
        run = TrainRun(scale=args.scale, data_dir=args.data, epochs=args.epochs,
                       seed=args.seed, out_dir=args.out)
        result = train_and_export(run)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result["accuracy"] is not None:
        print(f"held-out accuracy: {result['accuracy']:.4f}")
    print(f"exported {result['mdnn']}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
