"""Deterministic dump of a ConicProgram to the Conic Benchmark Format.

Row and column ordering is exactly the program's own ordering: variables
0..n-1 in declaration order, then scalar constraints (equalities first,
inequalities second, in declaration order), then one QUAD-domain block per
registered cone in registration order.  Variable bounds are emitted as
scalar constraint rows after the user rows.  Binary flags are emitted as
an INT changes section (CBF treats them as integer variables with the
[0,1] bounds appearing among the scalar rows).
"""

from __future__ import annotations

import numpy as np

from .program import ConicProgram


def dump_cbf(p: ConicProgram, path) -> None:
    lines = ["VER", "2", ""]
    lines += ["OBJSENSE", "MIN", ""]
    if p.num_binary:
        idx = np.flatnonzero(p.binary)
        lines += ["INT", str(idx.size)]
        lines += [str(int(i)) for i in idx]
        lines.append("")
    lines += ["VAR", f"{p.num_vars} 1", f"F {p.num_vars}", ""]

    # scalar map rows: equalities, inequalities, finite bounds, cone members
    scal = []  # (terms, rhs, domain)
    Aeq = p.A_eq.tocoo()
    eq_terms = [[] for _ in range(p.A_eq.shape[0])]
    for r, cidx, v in zip(Aeq.row, Aeq.col, Aeq.data):
        eq_terms[r].append((int(cidx), float(v)))
    for r in range(p.A_eq.shape[0]):
        scal.append((eq_terms[r], float(p.b_eq[r]), "L="))
    Aub = p.A_ub.tocoo()
    ub_terms = [[] for _ in range(p.A_ub.shape[0])]
    for r, cidx, v in zip(Aub.row, Aub.col, Aub.data):
        ub_terms[r].append((int(cidx), float(v)))
    for r in range(p.A_ub.shape[0]):
        scal.append((ub_terms[r], float(p.b_ub[r]), "L-"))
    for i in range(p.num_vars):
        if np.isfinite(p.ub[i]):
            scal.append(([(i, 1.0)], float(p.ub[i]), "L-"))
        if np.isfinite(p.lb[i]):
            scal.append(([(i, 1.0)], float(p.lb[i]), "L+"))

    cone_rows = []
    for head, tail in p.cones:
        cone_rows.append([head, *tail])

    # group scalar rows by domain in emission order
    domains = []
    order = []
    pos = 0
    for dom in ("L=", "L-", "L+"):
        rows = [(t, b) for (t, b, d) in scal if d == dom]
        if rows:
            domains.append((dom, len(rows)))
            order.extend(rows)
    total_rows = len(order) + sum(len(r) for r in cone_rows)
    con_header = [f"{dom} {count}" for dom, count in domains]
    con_header += [f"Q {len(rows)}" for rows in cone_rows]
    lines += ["CON", f"{total_rows} {len(con_header)}"]
    lines += con_header
    lines.append("")

    obj_terms = [(i, float(v)) for i, v in enumerate(p.cost) if v != 0.0]
    if obj_terms:
        lines += ["OBJACOORD", str(len(obj_terms))]
        lines += [f"{i} {_fmt(v)}" for i, v in obj_terms]
        lines.append("")
    if p.offset:
        lines += ["OBJBCOORD", _fmt(p.offset), ""]

    acoord = []
    bcoord = []
    for r, (terms, rhs) in enumerate(order):
        for i, v in terms:
            acoord.append((r, i, v))
        if rhs != 0.0:
            bcoord.append((r, -rhs))
    r = len(order)
    for rows in cone_rows:
        for i in rows:
            acoord.append((r, int(i), 1.0))
            r += 1
    lines += ["ACOORD", str(len(acoord))]
    lines += [f"{r} {i} {_fmt(v)}" for r, i, v in acoord]
    lines.append("")
    if bcoord:
        lines += ["BCOORD", str(len(bcoord))]
        lines += [f"{r} {_fmt(v)}" for r, v in bcoord]
        lines.append("")

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v: float) -> str:
    return repr(float(v))
