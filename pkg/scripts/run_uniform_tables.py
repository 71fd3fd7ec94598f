"""Uniform-mesh errors against the exact solution for a range of mesh levels.

    python3 scripts/run_uniform_tables.py boundary_layer --nc 16 --levels 3 4 5
"""

import argparse
import time

from hpsadapt.io import fmt_sci
from hpsadapt.problems import catalog, relative_error, uniform_solve
from hpsadapt.solver import memory_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", choices=("boundary_layer", "locally_oscillatory", "wave_front"))
    ap.add_argument("--nc", type=int, default=16)
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4, 5])
    args = ap.parse_args()
    p = catalog(args.problem)
    print(f"{'leaves':>8}{'T_build':>10}{'T_s':>9}{'R (MB)':>10}{'E_rel':>11}")
    for lvl in args.levels:
        t0 = time.perf_counter()
        tree, sol = uniform_solve(p, args.nc, lvl)
        T = time.perf_counter() - t0
        print(f"{4 ** lvl:>8}{T:>10.3f}{tree.build_stats['solve_time']:>9.3f}"
              f"{memory_report(tree).total / 1e6:>10.1f}{fmt_sci(relative_error(sol, p.exact)):>11}",
              flush=True)


if __name__ == "__main__":
    main()
