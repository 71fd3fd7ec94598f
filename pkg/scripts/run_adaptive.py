"""Adaptive runs on the three problems with known solutions.

    python3 scripts/run_adaptive.py --nc 16 --eps 1e-5
"""

import argparse

from hpsadapt.adaptivity import AdaptiveOptions, adaptive_solve
from hpsadapt.io import fmt_sci
from hpsadapt.problems import catalog, relative_error

PROBLEMS = ("boundary_layer", "locally_oscillatory", "wave_front")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nc", type=int, nargs="+", default=[16])
    ap.add_argument("--eps", type=float, default=1e-5)
    ap.add_argument("--problems", nargs="+", default=list(PROBLEMS))
    args = ap.parse_args()
    print(f"{'problem':<22}{'n_c':>4}{'N_i':>7}{'N_f':>7}{'T_i':>9}{'T_f':>9}{'T_s':>9}"
          f"{'R (MB)':>10}{'E_rel':>11}")
    for name in args.problems:
        p = catalog(name)
        for nc in args.nc:
            opt = AdaptiveOptions(on_nonfinite=p.on_nonfinite, interp_floor=p.interp_floor)
            r = adaptive_solve(p.pde, p.dirichlet, args.eps, nc, p.domain, "dtn", opt)
            E = relative_error(r.solution, p.exact)
            print(f"{name:<22}{nc:>4}{r.N_i:>7}{r.N_f:>7}{r.T_i:>9.3f}{r.T_f:>9.3f}{r.T_s:>9.3f}"
                  f"{r.R / 1e6:>10.1f}{fmt_sci(E):>11}", flush=True)


if __name__ == "__main__":
    main()
