"""Helmholtz experiments with the impedance (ItI) formulation.

* plane wave without a source on uniform meshes (exact solution known);
* adaptive solve with the Gaussian source from a seeded 16 x 16 mesh,
  checked against a uniform reference.

    python3 scripts/run_helmholtz.py --eps 1e-5 --ref-level 6
"""

import argparse

from hpsadapt.adaptivity import AdaptiveOptions, adaptive_solve
from hpsadapt.io import fmt_sci
from hpsadapt.problems import catalog, relative_error, uniform_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nc", type=int, default=16)
    ap.add_argument("--eps", type=float, default=1e-5)
    ap.add_argument("--seed-depth", type=int, default=4)
    ap.add_argument("--ref-level", type=int, default=6)
    args = ap.parse_args()

    wave = catalog("helmholtz_constant", source=False)
    for lvl in (3, 4):
        _, sol = uniform_solve(wave, args.nc, lvl)
        print(f"plane wave, {4 ** lvl} leaves: E_rel {fmt_sci(relative_error(sol, wave.exact))}")

    p = catalog("helmholtz_constant")
    opt = AdaptiveOptions(seed_depth=args.seed_depth, eta=p.eta, interp_floor=p.interp_floor)
    r = adaptive_solve(p.pde, p.impedance, args.eps, args.nc, p.domain, "iti", opt, log=print)
    print(f"adaptive: N_i {r.N_i} N_f {r.N_f} T_f {r.T_f:.3f} T_s {r.T_s:.3f} "
          f"R {r.R / 1e6:.1f} MB converged {r.converged}")
    sol = r.solution
    del r
    _, ref = uniform_solve(p, args.nc, args.ref_level)
    print(f"E_rel vs uniform {4 ** args.ref_level}-leaf reference: {fmt_sci(relative_error(sol, ref))}")


if __name__ == "__main__":
    main()
