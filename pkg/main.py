#!/usr/bin/env python3
"""
dialoop command-line entry point.

Usage:
    python main.py pipeline --profile smoke --out runs/smoke
    python main.py train-rl --out runs/desk --against gus --rl-seed 0
    python main.py eval --run runs/desk --mode cross --ds ds_sl --ds ds_gus_s0 --us abus --us gus
    python main.py chat --run runs/desk --ds ds_gus_s0 --save sessions.jsonl
"""

import sys

from src.cli.threads import pin_threads

if __name__ == "__main__":
    # BLAS reads its thread count when numpy is first imported
    pin_threads(sys.argv[1:])
    from src.cli.commands import main

    sys.exit(main(sys.argv[1:]))
