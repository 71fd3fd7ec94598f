"""Dense LU helpers with a singularity check that raises taxonomy errors."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

# rcond below this is treated as numerically singular
RCOND_MIN = 1e-15


def factor(M, err_cls, message, **ctx):
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise err_cls(f"{message}: non-finite entries", **ctx)
    lu, piv = sla.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.size and d.min() == 0.0:
        raise err_cls(f"{message}: exactly singular", **ctx)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    anorm = np.linalg.norm(M, 1)
    rcond, info = gecon(lu, anorm, norm="1")
    if anorm == 0.0 or rcond < RCOND_MIN:
        raise err_cls(f"{message}: numerically singular (rcond={rcond:.2e})", **ctx)
    return lu, piv


def solve(fac, B):
    return sla.lu_solve(fac, B, check_finite=False)


def inverse(M, err_cls, message, **ctx):
    fac = factor(M, err_cls, message, **ctx)
    return solve(fac, np.eye(M.shape[0], dtype=fac[0].dtype))
