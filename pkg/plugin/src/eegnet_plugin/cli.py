"""Command-line entry: `serve` speaks the evaluator protocol on stdio,
`convert` moves datasets between npz archives and v1 tensor files."""

from __future__ import annotations

import argparse
import sys

from .training import BATCH_SIZE, COLD_EPOCHS, LEARNING_RATE, WARM_EPOCHS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegnet-plugin",
        description="Convolutional-net fitness evaluator plugin for eegselect",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("serve", help="run the wire protocol on stdin/stdout")
    s.add_argument("--state-dir", default=None,
                   help="directory for warm-start checkpoints "
                        "(default: a fresh temporary directory)")
    s.add_argument("--cold-epochs", type=int, default=COLD_EPOCHS,
                   help="epochs for a from-scratch training")
    s.add_argument("--warm-epochs", type=int, default=WARM_EPOCHS,
                   help="epochs when fine-tuning from a checkpoint")
    s.add_argument("--batch-size", type=int, default=BATCH_SIZE)
    s.add_argument("--lr", type=float, default=LEARNING_RATE)
    s.add_argument("--torch-threads", type=int, default=1,
                   help="intra-op threads; keep at 1 when the host runs a pool")

    c = sub.add_parser("convert", help="npz <-> v1 tensor file")
    c.add_argument("src")
    c.add_argument("dst")
    c.add_argument("--rate", type=float, default=None,
                   help="sample rate in Hz when the npz has no 'rate' array")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "serve":
        import torch

        torch.set_num_threads(max(1, args.torch_threads))
        from .serve import serve

        return serve(args.state_dir, args.cold_epochs, args.warm_epochs,
                     args.batch_size, args.lr)

    from .convert import convert

    try:
        convert(args.src, args.dst, rate=args.rate)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {args.dst}")
    return 0
