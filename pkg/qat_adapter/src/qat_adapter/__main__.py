"""Entry point: ``python -m qat_adapter --model checkpoint.pt [--start qat8]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .server import serve


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="qat-adapter", description=__doc__)
    parser.add_argument("--model", required=True,
                        help="checkpoint file produced by qat_adapter.training")
    parser.add_argument("--data", default="synthetic",
                        help="'synthetic' or synthetic:<seed> to regenerate the smoke set")
    parser.add_argument("--epochs", type=int, default=0,
                        help="fine-tuning epochs when a request does not specify them")
    parser.add_argument("--start", choices=("fp32", "qat8"), default="qat8",
                        help="which stored starting point to fine-tune from")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    data_seed = None
    if args.data.startswith("synthetic:"):
        data_seed = int(args.data.removeprefix("synthetic:"))
    elif args.data != "synthetic":
        parser.error("only the built-in synthetic smoke set is supported")
    serve(Path(args.model), start=args.start, default_epochs=args.epochs,
          seed=args.seed, data_seed=data_seed)


if __name__ == "__main__":
    main()
