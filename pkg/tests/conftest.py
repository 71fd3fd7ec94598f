import contextlib

import numpy as np
import pytest
from hypothesis import settings
from numpy.polynomial import polynomial as P

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

_ACCEPTANCE = {}


class PolyField:
    """u(x, y) = sum_ij a[i, j] x^i y^j with exact derivatives."""

    def __init__(self, a):
        self.a = np.asarray(a, float)

    def __call__(self, x, y):
        return P.polyval2d(x, y, self.a)

    def d(self, nx, ny):
        return PolyField(P.polyder(P.polyder(self.a, nx, axis=0), ny, axis=1))


def random_poly(rng, deg):
    return PolyField(rng.standard_normal((deg + 1, deg + 1)) / (1 + np.add.outer(np.arange(deg + 1),
                                                                                 np.arange(deg + 1))))


@pytest.fixture
def acceptance():
    """Context manager recording one pass/fail line per acceptance criterion."""
    @contextlib.contextmanager
    def record(number, title):
        detail = {}
        try:
            yield detail
        except BaseException:
            _ACCEPTANCE[number] = ("FAIL", title, detail)
            raise
        _ACCEPTANCE[number] = ("PASS", title, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[k]
        extra = ", ".join(f"{a}={b}" for a, b in detail.items())
        terminalreporter.write_line(f"[{status}] {k}. {title}" + (f" ({extra})" if extra else ""))
