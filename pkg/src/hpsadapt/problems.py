"""Benchmark problems and the per-leaf relative error metric.

Right-hand sides for the problems with known solutions are derived by hand
from the exact solutions (they are checked against finite differences in the
test suite). Helmholtz problems use incoming impedance data built from the
incident plane wave exp(i omega d.x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from . import solver as hps
from .errors import DegenerateReference, InvalidArgument
from .leafops import PdeOperatorSpec, grid_index
from .meshtree import Rect, uniform_tree

NAMES = ("boundary_layer", "locally_oscillatory", "wave_front",
         "helmholtz_constant", "helmholtz_variable")


@dataclass
class BenchmarkProblem:
    name: str
    domain: Rect
    pde: PdeOperatorSpec
    formulation: str  # natural formulation: dtn (Dirichlet) or iti (impedance)
    dirichlet: Optional[Callable] = None  # f(x, y)
    impedance: Optional[Callable] = None  # t(x, y, nx, ny)
    exact: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    on_nonfinite: str = "error"  # policy for the adaptive interpolation test
    interp_floor: float = 1e-12  # relative magnitude below which the interpolation test stops

    @property
    def eta(self):
        return self.params.get("eta")

    def boundary_data(self, formulation=None):
        form = formulation or self.formulation
        if form == "dtn":
            if self.dirichlet is None:
                raise InvalidArgument(f"{self.name} has no Dirichlet data")
            return self.dirichlet
        if self.impedance is None:
            raise InvalidArgument(f"{self.name} has no impedance data")
        return self.impedance


def impedance_from(grad, u, eta):
    """Incoming data (du/dn + i eta u) from a solution and its gradient."""
    def t(x, y, nx, ny):
        gx, gy = grad(x, y)
        return gx * nx + gy * ny + 1j * eta * u(x, y)
    return t


def plane_wave(omega, d=(1.0, 0.0)):
    d0, d1 = d

    def u(x, y):
        return np.exp(1j * omega * (d0 * x + d1 * y))

    def grad(x, y):
        v = u(x, y)
        return 1j * omega * d0 * v, 1j * omega * d1 * v
    return u, grad


# -- boundary layer ------------------------------------------------------------

def _boundary_layer(alpha=1e-3):
    a = alpha

    def parts(x, y):
        ex = np.exp(-(1 - x) / a)
        ey = np.exp(-(1 - y) / a)
        X, Xp, Xpp = 1 - ex, -ex / a, -ex / a ** 2
        Y, Yp, Ypp = 1 - ey, -ey / a, -ey / a ** 2
        s = np.pi * (x + y)
        C, Cp, Cpp = np.cos(s), -np.pi * np.sin(s), -np.pi ** 2 * np.cos(s)
        return X, Xp, Xpp, Y, Yp, Ypp, C, Cp, Cpp

    def u(x, y):
        X, _, _, Y, _, _, C, _, _ = parts(x, y)
        return X * Y * C

    def f(x, y):
        X, Xp, Xpp, Y, Yp, Ypp, C, Cp, Cpp = parts(x, y)
        ux = Xp * Y * C + X * Y * Cp
        uy = X * Yp * C + X * Y * Cp
        uxx = Xpp * Y * C + 2 * Xp * Y * Cp + X * Y * Cpp
        uyy = X * Ypp * C + 2 * X * Yp * Cp + X * Y * Cpp
        return -a * (uxx + uyy) + 2 * ux + uy

    pde = PdeOperatorSpec(c11=a, c22=a, c1=2.0, c2=1.0, g=f)
    return BenchmarkProblem("boundary_layer", Rect(0.0, 1.0, 0.0, 1.0), pde, "dtn",
                            dirichlet=u, exact=u, params={"alpha": a})


# -- locally oscillatory -------------------------------------------------------

def _locally_oscillatory(alpha=1 / (10 * np.pi)):
    a = alpha

    def u(x, y):
        return np.sin(1.0 / (a + np.hypot(x, y)))

    def c0(x, y):
        return -1.0 / (a + np.hypot(x, y)) ** 4

    def f(x, y):
        # -Lap u - s^-4 u with s = a + r; the sin/s^4 terms cancel
        r = np.hypot(x, y)
        s = a + r
        return np.cos(1.0 / s) * (1.0 / (r * s ** 2) - 2.0 / s ** 3)

    pde = PdeOperatorSpec(c0=c0, g=f)
    # f ~ 1/r at the corner (0, 0): that point cannot drive the interpolation test
    return BenchmarkProblem("locally_oscillatory", Rect(0.0, 1.0, 0.0, 1.0), pde, "dtn",
                            dirichlet=u, exact=u, params={"alpha": a}, on_nonfinite="ignore")


# -- wave front ------------------------------------------------------------------

def _wave_front(steepness=50.0, radius=0.7, center=(-0.05, -0.05)):
    k, r0 = steepness, radius
    cx, cy = center

    def u(x, y):
        return np.arctan(k * (np.hypot(x - cx, y - cy) - r0))

    def f(x, y):
        R = np.hypot(x - cx, y - cy)
        q = k * (R - r0)
        up = k / (1 + q ** 2)
        upp = -2 * k * k * q / (1 + q ** 2) ** 2
        return -(upp + up / R)

    pde = PdeOperatorSpec(g=f)
    return BenchmarkProblem("wave_front", Rect(0.0, 1.0, 0.0, 1.0), pde, "dtn",
                            dirichlet=u, exact=u, params={"alpha": k})


# -- Helmholtz -------------------------------------------------------------------

def gaussian_source(x, y, width=0.005, center=(0.0, 0.875)):
    return (1.0 / np.sqrt(2 * np.pi * width)
            * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * width ** 2)))


def _helmholtz(name, domain, omega, eta, c, source):
    if eta is None:
        eta = omega
    if callable(c):
        def c0(x, y):
            return -omega ** 2 * c(x, y)
    else:
        c0 = -omega ** 2 * c
    g = None
    if source is not None:
        def g(x, y):
            return source(x, y) + 0j
    u_inc, grad = plane_wave(omega)
    pde = PdeOperatorSpec(c0=c0, g=g)
    prob = BenchmarkProblem(name, domain, pde, "iti", dirichlet=u_inc,
                            impedance=impedance_from(grad, u_inc, eta),
                            params={"omega": omega, "eta": eta, "d": (1.0, 0.0)})
    return prob


def variable_speed(x, y):
    return 4 * (y - 0.2) * (1 - erf(25 * (np.hypot(x, y) - 0.3)))


def catalog(name, alpha=None, omega=None, eta=None, source=True):
    """Benchmark problem by name; ``None`` parameters take their defaults.

    ``source=False`` drops the body load of ``helmholtz_constant`` so the
    incident plane wave is the exact solution.
    """
    if name == "boundary_layer":
        return _boundary_layer(1e-3 if alpha is None else alpha)
    if name == "locally_oscillatory":
        return _locally_oscillatory(1 / (10 * np.pi) if alpha is None else alpha)
    if name == "wave_front":
        return _wave_front(50.0 if alpha is None else alpha)
    if name == "helmholtz_constant":
        w = 20 * np.pi if omega is None else omega
        p = _helmholtz(name, Rect(-1.0, 1.0, -1.0, 1.0), w, eta, 1.0,
                       gaussian_source if source else None)
        if not source:
            p.exact = p.dirichlet
        return p
    if name == "helmholtz_variable":
        w = 150.0 if omega is None else omega
        return _helmholtz(name, Rect(-0.5, 0.5, -0.5, 0.5), w, eta, variable_speed, None)
    raise InvalidArgument(f"unknown problem {name!r}; choose from {', '.join(NAMES)}")


# -- error metric ----------------------------------------------------------------

def relative_error(solution, reference, per_leaf=False):
    """Mean over leaves of |u - u_ref| / |u_ref| at the discretization points.

    ``reference`` is an exact solution ``u(x, y)`` or another
    :class:`~hpsadapt.solver.SolutionField` (interpolated to this field's points).
    """
    n_c = solution.n_c
    d = grid_index(n_c).disc
    errs = {}
    for t in solution.leaves():
        pts = solution.points(t)[d]
        u = solution.values[t].ravel()[d]
        if callable(reference):
            ref = np.asarray(reference(pts[:, 0], pts[:, 1]))
        else:
            ref = reference.evaluate(pts[:, 0], pts[:, 1])
        den = np.linalg.norm(ref)
        if den == 0.0:
            raise DegenerateReference("reference vanishes on a leaf", node_id=t)
        errs[t] = float(np.linalg.norm(u - ref) / den)
    E = float(np.mean(list(errs.values())))
    return (E, errs) if per_leaf else E


def uniform_solve(problem, n_c, levels, formulation=None, retain_for_update=False, threads=1):
    """Solve on a uniform 2^levels x 2^levels mesh; returns (tree, solution)."""
    form = formulation or problem.formulation
    mesh = uniform_tree(problem.domain, n_c, levels)
    tree = hps.build(mesh, problem.pde, form, eta=problem.eta,
                     retain_for_update=retain_for_update, threads=threads)
    return tree, hps.solve(tree, problem.boundary_data(form))


def reference_solution(problem, n_c, eps, start_level=2, max_level=6, formulation=None,
                       threads=1):
    """Uniform refinement until consecutive levels agree to eps/10.

    Returns (solution, levels, inter-level error). If ``max_level`` is reached
    first the finest solution is returned together with its achieved error.
    """
    prev = None
    E = float("inf")
    lvl = start_level
    for lvl in range(start_level, max_level + 1):
        tree, sol = uniform_solve(problem, n_c, lvl, formulation, threads=threads)
        del tree
        if prev is not None:
            E = relative_error(prev, sol)
            if E < eps / 10:
                return sol, lvl, E
        prev = sol
    return prev, lvl, E
