"""Plain-text exports and their readers.

Every file written here is read back exactly by the matching reader:
floats are written with ``repr`` (shortest round-trip form, at most 17
significant digits) in exports, and as 3-significant-digit scientific
notation in human-facing reports.

Formats
-------
mesh.txt
    CSV header ``id,x0,x1,y0,y1,level`` then one row per leaf.
solution.txt
    ``# dtype=real`` or ``# dtype=complex`` first, then per leaf a header row
    ``leaf,<id>,<n_c>,<x0>,<x1>,<y0>,<y1>`` followed by n_c^2 rows in
    row-major tensor order (value ``[i, j]`` sits at ``(x_i, y_j)``). Complex
    values are written as ``re,im``.
report.txt
    ``key = value`` lines.
iterations.txt
    CSV header ``iter,n_leaves,n_marked,S_div,E_rel``.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .errors import ConfigError
from . import meshtree

ITER_FIELDS = ("iter", "n_leaves", "n_marked", "S_div", "E_rel")


def fmt_exact(x):
    return repr(float(x))


def fmt_sci(x):
    """3-significant-digit scientific notation; ``nan``/``inf`` pass through."""
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return f"{x:.2e}"


def write_mesh(mesh, path):
    mesh.export(path)


def read_mesh(path):
    """Rows ``(id, x0, x1, y0, y1, level)`` of a mesh file."""
    return meshtree.read_mesh(path)


# -- solution --------------------------------------------------------------------

def write_solution(solution, path):
    cplx = solution.is_complex
    with open(path, "w", newline="") as fh:
        fh.write(f"# dtype={'complex' if cplx else 'real'}\n")
        w = csv.writer(fh)
        for t in solution.leaves():
            r = solution.rect(t)
            w.writerow(["leaf", t, solution.n_c] + [fmt_exact(v) for v in (r.x0, r.x1, r.y0, r.y1)])
            for v in solution.values[t].ravel():
                if cplx:
                    w.writerow([fmt_exact(v.real), fmt_exact(v.imag)])
                else:
                    w.writerow([fmt_exact(v)])


def read_solution(path):
    """Returns {leaf id: (rect tuple (x0, x1, y0, y1), n_c, (n_c, n_c) values)}."""
    out = {}
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first not in ("# dtype=real", "# dtype=complex"):
            raise ValueError(f"{path}: missing dtype header")
        cplx = first.endswith("complex")
        rows = csv.reader(fh)
        for head in rows:
            if not head or head[0] != "leaf":
                raise ValueError(f"{path}: expected a leaf header, got {head!r}")
            t, n = int(head[1]), int(head[2])
            rect = tuple(float(v) for v in head[3:7])
            vals = np.empty(n * n, complex if cplx else float)
            for k in range(n * n):
                rec = next(rows)
                vals[k] = complex(float(rec[0]), float(rec[1])) if cplx else float(rec[0])
            out[t] = (rect, n, vals.reshape(n, n))
    return out


# -- iteration log -------------------------------------------------------------------

def write_iterations(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ITER_FIELDS)
        for r in rows:
            w.writerow([r["iter"], r["n_leaves"], r["n_marked"], fmt_exact(r["S_div"]),
                        fmt_exact(r["E_rel"])])


def read_iterations(path):
    with open(path, newline="") as fh:
        return [{"iter": int(r["iter"]), "n_leaves": int(r["n_leaves"]),
                 "n_marked": int(r["n_marked"]), "S_div": float(r["S_div"]),
                 "E_rel": float(r["E_rel"])} for r in csv.DictReader(fh)]


# -- key = value files -------------------------------------------------------------------

def parse_key_values(text, source="<config>"):
    """Flat ``key = value`` grammar.

    One assignment per line; ``#`` starts a comment; blank lines are
    skipped; keys are identifiers; a repeated key is an error. Returns
    {key: (value string, line number)}.
    """
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key.isidentifier():
            raise ConfigError(f"{source}:{no}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{no}: field '{key}' given twice (first on line {out[key][1]})")
        out[key] = (val, no)
    return out


def read_key_values(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path) as fh:
        return {k: v for k, (v, _) in parse_key_values(fh.read(), str(path)).items()}


def write_key_values(pairs, path):
    with open(path, "w") as fh:
        for k, v in pairs:
            fh.write(f"{k} = {v}\n")
