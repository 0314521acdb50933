#!/usr/bin/env python3
"""Solve all three preset scenarios at the default mutation width and write
equilibrium fields plus a scalar summary for each into scenario-out/<name>/."""

import sys
from pathlib import Path

from mutsel.cli import main

OUT = Path("scenario-out")


def run() -> int:
    for name in ("fig1", "fig2", "fig3"):
        code = main([
            "equilibrium",
            "--preset", name,
            "--epsilon", "1e-3",
            "--output-dir", str(OUT / name),
        ])
        if code != 0:
            return code
    print(f"wrote {OUT}/fig1 fig2 fig3")
    return 0


if __name__ == "__main__":
    sys.exit(run())
