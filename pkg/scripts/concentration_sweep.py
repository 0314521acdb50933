#!/usr/bin/env python3
"""Run the default mutation-width sweep for a preset and print the equilibrium
scalars next to their closed-form zero-width targets.

Usage: concentration_sweep.py [preset] [eps ...]
"""

import sys

from mutsel.equilibrium import concentration_table
from mutsel.model import preset


def run(argv: list[str]) -> int:
    name = argv[0] if argv else "fig1"
    eps_list = [float(a) for a in argv[1:]] or [0.05, 0.02, 0.01, 0.005, 0.002]
    table = concentration_table(preset(name), eps_list, tol=1e-10)
    cols = ("eps", "S1", "S2", "I1", "I2", "A", "xA", "argmax")
    print(("{:>10}" * len(cols)).format(*cols))
    for r in table.rows:
        print(
            f"{r.eps:10.4g}{r.s1:10.5f}{r.s2:10.5f}{r.i1_mass:10.5f}"
            f"{r.i2_mass:10.5f}{r.a_mass:10.5f}{r.a_first_moment:10.5f}"
            f"{r.a_argmax:10.4f}"
        )
    if table.extrapolated:
        e = table.extrapolated
        print(
            f"{'extrap':>10}{e.s1:10.5f}{e.s2:10.5f}{e.i1_mass:10.5f}"
            f"{e.i2_mass:10.5f}{e.a_mass:10.5f}{e.a_first_moment:10.5f}"
        )
    t = table.targets
    print(
        f"{'target':>10}{t.s[0]:10.5f}{t.s[1]:10.5f}{t.infected_mass[0]:10.5f}"
        f"{t.infected_mass[1]:10.5f}{t.a_mass:10.5f}{t.a_first_moment:10.5f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
