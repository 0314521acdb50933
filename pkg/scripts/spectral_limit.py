#!/usr/bin/env python3
"""Track the per-host spectral radius along a mutation-width sweep and compare
it to its zero-width limit, including the fitted spectral-gap decay exponent.

Usage: spectral_limit.py [preset] [host]
"""

import sys

from mutsel.model import preset
from mutsel.spectral import spectral_gap_table


def run(argv: list[str]) -> int:
    name = argv[0] if argv else "fig1"
    host = int(argv[1]) if len(argv) > 1 else 1
    mp = preset(name)
    table = spectral_gap_table(mp, host, [0.1, 0.05, 0.02, 0.01, 0.005], n=2048)
    print(f"{'eps':>10}{'lambda1':>14}{'lambda2':>14}{'gap':>14}{'iters':>8}")
    for r in table.rows:
        print(f"{r.eps:10.4g}{r.lambda1:14.8f}{r.lambda2:14.8f}{r.gap:14.8f}{r.iterations:8d}")
    print(f"fitted gap exponent: {table.fitted_exponent:.3f}")
    if table.degenerate:
        print("warning: near-degenerate dominant eigenvalues detected")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
