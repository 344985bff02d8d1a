#!/usr/bin/env python3
"""Desk-scale analogue of the 12-fold multichannel experiment:
variable-density + 2x2 Cartesian sampling, 4 coils, 57x57x10 filter."""

import sys
from pathlib import Path

from exprec.cli import main

OUT = Path("out/fig6_desk")


def run(*argv):
    code = main([str(a) for a in argv])
    if code not in (0, 2):
        sys.exit(code)


if __name__ == "__main__":
    run("simulate", "--config", "preset:fig6_desk", "--out", OUT)
    for method in ("zerofill", "ktlr", "proposed"):
        run("recon", "--config", "preset:fig6_desk", "--out", OUT, "--method", method)
        run("fit", "--config", "preset:fig6_desk", "--out", OUT, "--method", method)
        run("eval", "--config", "preset:fig6_desk", "--out", OUT, "--method", method)
        run("render", "--config", "preset:fig6_desk", "--out", OUT, "--method", method)
    print(f"\nmetrics:\n{(OUT / 'metrics.csv').read_text()}")
