"""CLI: `subaptrain train` and `subaptrain serve` (also usable as
`python -m subaptrain ...`). The serve form matches the external-enhancer
placeholder protocol: --inputs and --output take comma-joined GRDF paths."""

from __future__ import annotations

import argparse
import sys

from .losses import LossWeights
from .train import TrainConfig, train


def build_parser():
    parser = argparse.ArgumentParser(prog="subaptrain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a toy SI or MF enhancer")
    p.add_argument("--mode", choices=("si", "mf"), default="si")
    p.add_argument("--data", required=True,
                   help="directory with pairs.bin + pairs_index.json")
    p.add_argument("--out", required=True, help="model output directory")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--max-lr", type=float, default=1e-3)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-histogram-match", action="store_true")
    p.add_argument("--weights", type=float, nargs=3,
                   default=(0.2, 0.3, 0.5),
                   metavar=("ALPHA", "BETA", "GAMMA"))
    p.add_argument("--split", default="train")

    s = sub.add_parser("serve", help="run inference over GRDF rasters")
    s.add_argument("--model", required=True)
    s.add_argument("--inputs", required=True,
                   help="comma-joined input GRDF paths")
    s.add_argument("--output", required=True,
                   help="comma-joined output GRDF paths, one per unit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        config = TrainConfig(
            mode=args.mode, steps=args.steps, batch_size=args.batch_size,
            max_lr=args.max_lr, base_width=args.width,
            augment=not args.no_augment,
            histogram_match=not args.no_histogram_match,
            seed=args.seed, weights=LossWeights(*args.weights),
            split=args.split,
        )
        result = train(args.data, config, args.out)
        print(f"final loss {result['loss_curve'][-1]:.6f} "
              f"-> {result['model_dir']}")
        return 0
    if args.command == "serve":
        from .serve import serve
        serve(args.model, args.inputs.split(","), args.output.split(","))
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
