"""Batch front-end: ``hps solve`` and ``hps compare``.

Config files use the flat ``key = value`` grammar of
:func:`hpsadapt.io.parse_key_values`. Recognised keys (defaults in brackets)::

    problem            boundary_layer | locally_oscillatory | wave_front |
                       helmholtz_constant | helmholtz_variable   (required)
    alpha, omega, eta  problem parameters                        [problem default]
    source             keep the Gaussian source of helmholtz_constant [true]
    n_c                Chebyshev points per leaf side, >= 4      [16]
    epsilon            adaptive / reference tolerance, > 0       [1e-5]
    mode               adaptive | uniform                        [adaptive]
    uniform_levels     2^L x 2^L leaves (required for uniform)
    formulation        dtn | iti                                 [problem default]
    seed_depth         uniform seed before adaptive interpolation [0]
    interp_floor       relative floor of the interpolation test  [problem default]
    output_dir         where the output files go                 [out]
    retain_for_update  keep child operators for local updates    [true]
    max_iterations     adaptive iteration cap                    [20]
    max_depth          deepest allowed box                       [30]
    threads            leaf-build threads                        [1]
    reference_max_level  finest uniform level for unknown-solution references [6]

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from . import io
from . import solver as hps
from .adaptivity import AdaptiveOptions, adaptive_solve
from .errors import ConfigError, HPSError, InvalidArgument, MismatchError
from .problems import NAMES, catalog, reference_solution, relative_error, uniform_solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NONCONVERGED = 0, 2, 3, 4


@dataclass
class RunConfig:
    problem: str
    alpha: Optional[float] = None
    omega: Optional[float] = None
    eta: Optional[float] = None
    source: bool = True
    n_c: int = 16
    epsilon: float = 1e-5
    mode: str = "adaptive"
    uniform_levels: Optional[int] = None
    formulation: Optional[str] = None
    seed_depth: int = 0
    interp_floor: Optional[float] = None
    output_dir: str = "out"
    retain_for_update: bool = True
    max_iterations: int = 20
    max_depth: int = 30
    threads: int = 1
    reference_max_level: int = 6

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"field '{name}': {why}")
        if self.problem not in NAMES:
            bad("problem", f"unknown problem {self.problem!r}; choose from {', '.join(NAMES)}")
        if self.n_c < 4:
            bad("n_c", f"must be >= 4, got {self.n_c}")
        if not self.epsilon > 0:
            bad("epsilon", f"must be > 0, got {self.epsilon}")
        if self.mode not in ("adaptive", "uniform"):
            bad("mode", f"must be adaptive or uniform, got {self.mode!r}")
        if self.mode == "uniform" and self.uniform_levels is None:
            bad("uniform_levels", "required when mode = uniform")
        if self.uniform_levels is not None and self.uniform_levels < 0:
            bad("uniform_levels", f"must be >= 0, got {self.uniform_levels}")
        if self.formulation not in (None, "dtn", "iti"):
            bad("formulation", f"must be dtn or iti, got {self.formulation!r}")
        for name in ("seed_depth", "max_iterations", "reference_max_level"):
            if getattr(self, name) < 0:
                bad(name, f"must be >= 0, got {getattr(self, name)}")
        if self.max_depth < 1:
            bad("max_depth", f"must be >= 1, got {self.max_depth}")
        if self.threads < 1:
            bad("threads", f"must be >= 1, got {self.threads}")
        if self.interp_floor is not None and not self.interp_floor >= 0:
            bad("interp_floor", f"must be >= 0, got {self.interp_floor}")
        return self


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(name, raw, tp):
    if tp is bool:
        v = raw.lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if tp is int:
        return int(raw)
    if tp is float:
        return float(raw)
    return raw


def _field_types():
    out = {}
    for f in dataclasses.fields(RunConfig):
        tp = f.type.replace("Optional[", "").rstrip("]")
        out[f.name] = {"str": str, "int": int, "float": float, "bool": bool}[tp]
    return out


def parse_config(text, source="<config>"):
    """RunConfig from ``key = value`` text; errors name the line and field."""
    types = _field_types()
    kv = io.parse_key_values(text, source)
    args = {}
    for key, (raw, no) in kv.items():
        if key not in types:
            raise ConfigError(f"{source}:{no}: unknown field '{key}'")
        try:
            args[key] = _convert(key, raw, types[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{no}: field '{key}': {exc}") from None
    if "problem" not in args:
        raise ConfigError(f"{source}: field 'problem' is required")
    cfg = RunConfig(**args)
    try:
        return cfg.validate()
    except ConfigError as exc:
        name = str(exc).split("'")[1]
        where = f"{source}:{kv[name][1]}" if name in kv else source
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


@dataclass
class RunReport:
    problem: str
    mode: str
    formulation: str
    n_c: int
    epsilon: float
    N_i: int
    N_f: int
    T_i: float
    T_f: float
    T_s: float
    R: int
    E_rel: float
    E_conv: float
    converged: bool
    reference: str
    iterations: list = field(default_factory=list)

    def pairs(self):
        return [("problem", self.problem), ("mode", self.mode),
                ("formulation", self.formulation), ("n_c", self.n_c),
                ("epsilon", io.fmt_sci(self.epsilon)), ("N_i", self.N_i), ("N_f", self.N_f),
                ("T_i", f"{self.T_i:.3f}"), ("T_f", f"{self.T_f:.3f}"),
                ("T_s", f"{self.T_s:.3f}"), ("R", self.R), ("E_rel", io.fmt_sci(self.E_rel)),
                ("E_conv", io.fmt_sci(self.E_conv)),
                ("converged", "true" if self.converged else "false"),
                ("reference", self.reference), ("n_iterations", len(self.iterations))]


REPORT_NUMERIC = ("N_i", "N_f", "T_i", "T_f", "T_s", "R", "E_rel")


def read_report(path):
    """Report file as a dict with numbers parsed."""
    kv = io.read_key_values(path)
    out = dict(kv)
    for k in ("n_c", "N_i", "N_f", "R", "n_iterations"):
        if k in kv:
            out[k] = int(kv[k])
    for k in ("epsilon", "T_i", "T_f", "T_s", "E_rel", "E_conv"):
        if k in kv:
            out[k] = float(kv[k])
    if "converged" in kv:
        out["converged"] = kv["converged"] == "true"
    return out


def _accuracy(problem, sol, cfg, form):
    if problem.exact is not None:
        return relative_error(sol, problem.exact), "exact"
    ref, lvl, _ = reference_solution(problem, cfg.n_c, cfg.epsilon, max_level=cfg.reference_max_level,
                                     formulation=form, threads=cfg.threads)
    return relative_error(sol, ref), f"uniform-{lvl}"


def run(cfg, log=None):
    """Run the configured pipeline and write its files to ``cfg.output_dir``."""
    cfg.validate()
    try:
        problem = catalog(cfg.problem, alpha=cfg.alpha, omega=cfg.omega, eta=cfg.eta,
                          source=cfg.source)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    form = cfg.formulation or problem.formulation
    if form == "iti" and problem.eta is None:
        raise ConfigError(f"field 'formulation': {cfg.problem} has no impedance data")
    bc = problem.boundary_data(form)
    if cfg.mode == "uniform":
        t0 = time.perf_counter()
        tree, _ = uniform_solve(problem, cfg.n_c, cfg.uniform_levels, form,
                                retain_for_update=cfg.retain_for_update, threads=cfg.threads)
        T_f = time.perf_counter() - t0
        t1 = time.perf_counter()
        sol = hps.solve(tree, bc)
        T_s = time.perf_counter() - t1
        n = tree.mesh.n_leaves()
        R = hps.memory_report(tree).total
        iterations, converged, E_conv, N_i, T_i = [], True, float("nan"), n, 0.0
    else:
        floor = problem.interp_floor if cfg.interp_floor is None else cfg.interp_floor
        opt = AdaptiveOptions(seed_depth=cfg.seed_depth, max_iterations=cfg.max_iterations,
                              max_depth=cfg.max_depth, eta=problem.eta,
                              on_nonfinite=problem.on_nonfinite, interp_floor=floor,
                              retain_for_update=cfg.retain_for_update, threads=cfg.threads)
        res = adaptive_solve(problem.pde, bc, cfg.epsilon, cfg.n_c, problem.domain, form, opt, log=log)
        tree, sol = res.tree, res.solution
        N_i, n, T_i, T_f, T_s, R = res.N_i, res.N_f, res.T_i, res.T_f, res.T_s, res.R
        iterations, converged, E_conv = res.iterations, res.converged, res.E_conv
    E, ref = _accuracy(problem, sol, cfg, form)
    report = RunReport(cfg.problem, cfg.mode, form, cfg.n_c, cfg.epsilon, N_i, n, T_i, T_f, T_s,
                       R, E, E_conv, converged, ref, iterations)
    os.makedirs(cfg.output_dir, exist_ok=True)
    io.write_mesh(tree.mesh, os.path.join(cfg.output_dir, "mesh.txt"))
    io.write_solution(sol, os.path.join(cfg.output_dir, "solution.txt"))
    io.write_iterations(iterations, os.path.join(cfg.output_dir, "iterations.txt"))
    io.write_key_values(report.pairs(), os.path.join(cfg.output_dir, "report.txt"))
    return report


def compare(path_a, path_b):
    """Side-by-side rows (field, a, b, b - a) of two report files."""
    a, b = read_report(path_a), read_report(path_b)
    if a.get("problem") != b.get("problem"):
        raise MismatchError(f"reports are for different problems: {a.get('problem')} vs {b.get('problem')}")
    rows = []
    for k in REPORT_NUMERIC:
        va, vb = a.get(k, math.nan), b.get(k, math.nan)
        rows.append((k, va, vb, vb - va))
    return rows


def _print_compare(rows, a, b, out):
    out.write(f"{'field':<8}{'a':>14}{'b':>14}{'b - a':>14}\n")
    for k, va, vb, d in rows:
        if isinstance(va, int) and isinstance(vb, int):
            out.write(f"{k:<8}{va:>14d}{vb:>14d}{d:>14d}\n")
        else:
            out.write(f"{k:<8}{io.fmt_sci(va):>14}{io.fmt_sci(vb):>14}{io.fmt_sci(d):>14}\n")
    out.write(f"a = {a}\nb = {b}\n")


def _overrides(args):
    return {k: v for k, v in (("problem", args.problem), ("n_c", args.nc), ("epsilon", args.eps),
                               ("mode", args.mode), ("formulation", args.formulation),
                               ("output_dir", args.out)) if v is not None}


def build_parser():
    p = argparse.ArgumentParser(prog="hps", description="Adaptive HPS solver benchmarks")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run one uniform or adaptive solve")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--problem", choices=NAMES)
    s.add_argument("--nc", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--mode", choices=("adaptive", "uniform"))
    s.add_argument("--formulation", choices=("dtn", "iti"))
    s.add_argument("--out", help="output directory")
    s.add_argument("-q", "--quiet", action="store_true", help="no per-iteration log on stdout")
    c = sub.add_parser("compare", help="compare two report files")
    c.add_argument("a")
    c.add_argument("b")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out, err = sys.stdout, sys.stderr
    if args.command == "compare":
        try:
            rows = compare(args.a, args.b)
        except (OSError, ValueError) as exc:
            err.write(f"error: io-error: {exc}\n")
            return EXIT_CONFIG
        except HPSError as exc:
            err.write(f"error: {exc.kind}: {exc}\n")
            return EXIT_CONFIG
        _print_compare(rows, args.a, args.b, out)
        return EXIT_OK
    try:
        if args.config:
            cfg = load_config(args.config)
            cfg = dataclasses.replace(cfg, **_overrides(args)).validate()
        else:
            if args.problem is None:
                raise ConfigError("give --config or at least --problem")
            cfg = RunConfig(**_overrides(args)).validate()
        log = None
        if not args.quiet:
            def log(row):
                out.write("iter {iter}: leaves {n_leaves}, marked {n_marked}, "
                          "S_div {S}, E_rel {E}\n".format(S=io.fmt_sci(row["S_div"]),
                                                          E=io.fmt_sci(row["E_rel"]), **row))
        report = run(cfg, log=log)
    except ConfigError as exc:
        err.write(f"error: {exc.kind}: {exc}\n")
        return EXIT_CONFIG
    except HPSError as exc:
        err.write(f"error: {exc.kind}: {exc}\n")
        return EXIT_NUMERICAL
    for k, v in report.pairs():
        out.write(f"{k} = {v}\n")
    if not report.converged:
        err.write(f"error: non-convergence: iteration cap {cfg.max_iterations} reached\n")
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
