import numpy as np
import pytest

from hpsadapt.errors import DegenerateReference, InvalidArgument
from hpsadapt.leafops import evaluate
from hpsadapt.meshtree import uniform_tree
from hpsadapt.problems import (NAMES, catalog, gaussian_source, relative_error, uniform_solve,
                               variable_speed)
from hpsadapt.solver import SolutionField


def fd_residual(p, x, y, h=1e-4):
    """Operator applied to the exact solution by central differences, minus the load."""
    u = p.exact
    uxx = (u(x + h, y) - 2 * u(x, y) + u(x - h, y)) / h ** 2
    uyy = (u(x, y + h) - 2 * u(x, y) + u(x, y - h)) / h ** 2
    ux = (u(x + h, y) - u(x - h, y)) / (2 * h)
    uy = (u(x, y + h) - u(x, y - h)) / (2 * h)
    pde = p.pde
    c = {k: evaluate(getattr(pde, k), x, y) for k in ("c11", "c22", "c1", "c2", "c0")}
    c = {k: 0.0 if v is None else v for k, v in c.items()}
    Lu = -c["c11"] * uxx - c["c22"] * uyy + c["c1"] * ux + c["c2"] * uy + c["c0"] * u(x, y)
    g = evaluate(pde.g, x, y)
    return Lu - g, g


@pytest.mark.parametrize("name,alpha", [("boundary_layer", 0.1), ("locally_oscillatory", None),
                                        ("wave_front", None)])
def test_rhs_matches_finite_differences(name, alpha):
    p = catalog(name, alpha=alpha)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0.2, 0.8, 50), rng.uniform(0.2, 0.8, 50)
    r, g = fd_residual(p, x, y)
    assert np.abs(r).max() < 1e-4 * max(1, np.abs(g).max())


def test_catalog_defaults_and_unknown_name():
    assert set(NAMES) == {"boundary_layer", "locally_oscillatory", "wave_front",
                          "helmholtz_constant", "helmholtz_variable"}
    h = catalog("helmholtz_constant")
    assert h.eta == pytest.approx(20 * np.pi) and h.formulation == "iti"
    assert catalog("helmholtz_variable").domain.x0 == -0.5
    assert catalog("helmholtz_constant", omega=5.0, eta=2.0).eta == 2.0
    with pytest.raises(InvalidArgument):
        catalog("nope")


def test_gaussian_source_and_medium():
    assert gaussian_source(0.0, 0.875) == pytest.approx(1 / np.sqrt(2 * np.pi * 0.005))
    assert variable_speed(0.0, 0.2) == 0.0
    assert variable_speed(0.0, 0.0) == pytest.approx(-1.6)


def test_relative_error_zero_for_exact_and_degenerate_reference():
    p = catalog("wave_front")
    mesh = uniform_tree(p.domain, 6, 1)
    sol = SolutionField(mesh, 6, {t: np.zeros((6, 6)) for t in mesh.leaves()})
    exact_vals = {t: p.exact(*sol.points(t).T).reshape(6, 6) for t in mesh.leaves()}
    assert relative_error(SolutionField(mesh, 6, exact_vals), p.exact) == 0.0
    with pytest.raises(DegenerateReference):
        relative_error(SolutionField(mesh, 6, exact_vals), lambda x, y: 0 * x)


def test_plane_wave_is_reproduced():
    p = catalog("helmholtz_constant", omega=10.0, source=False)
    _, sol = uniform_solve(p, 16, 2)
    assert relative_error(sol, p.exact) < 1e-7
