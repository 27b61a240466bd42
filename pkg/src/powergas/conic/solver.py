"""Primal-dual interior-point solver for linear and second-order cone programs.

The solver works on the homogeneous self-dual embedding of

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in K

where K is a product of a nonnegative orthant and standard second-order
cones.  Search directions use Nesterov-Todd scaling with a Mehrotra
predictor-corrector step; the KKT system is factorized once per iteration
with static regularization and iterative refinement.  Infeasibility and
unboundedness are detected through the embedding's certificates.

Dual conventions exposed to callers (after recovering from the embedding):

* equality rows:    ``eq_duals[i] = dV/d(rhs_i)`` (shadow price, free sign);
* inequality rows:  ``ub_duals[i] >= 0`` with ``dV/d(rhs_i) = -ub_duals[i]``;
* variable bounds:  nonnegative multipliers of ``x <= ub`` / ``x >= lb``;
* cones:            the dual cone block ``z`` paired with ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .program import ConicProgram


class SolverError(Exception):
    """Numerical failure; carries the final residuals."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass
class Cone:
    """Composite cone: leading orthant of size ``l`` then SOC blocks."""

    l: int
    socs: list

    @property
    def dim(self):
        return self.l + sum(self.socs)

    @property
    def degree(self):
        return self.l + len(self.socs)

    def slices(self):
        out = []
        start = self.l
        for d in self.socs:
            out.append(slice(start, start + d))
            start += d
        return out

    def identity(self):
        e = np.zeros(self.dim)
        e[:self.l] = 1.0
        for s in self.slices():
            e[s.start] = 1.0
        return e

    def inside(self, v, margin=0.0):
        if self.l and np.min(v[:self.l]) <= margin:
            return False
        for s in self.slices():
            if v[s.start] - np.linalg.norm(v[s.start + 1:s.stop]) <= margin:
                return False
        return True

    def residual_to_interior(self, v):
        """Largest violation; negative means strictly inside."""
        worst = -np.inf
        if self.l:
            worst = max(worst, float(np.max(-v[:self.l])))
        for s in self.slices():
            worst = max(worst, float(np.linalg.norm(v[s.start + 1:s.stop]) - v[s.start]))
        return worst

    def prod(self, u, v):
        w = np.empty_like(u)
        w[:self.l] = u[:self.l] * v[:self.l]
        for s in self.slices():
            u0, ub = u[s.start], u[s.start + 1:s.stop]
            v0, vb = v[s.start], v[s.start + 1:s.stop]
            w[s.start] = u0 * v0 + ub @ vb
            w[s.start + 1:s.stop] = u0 * vb + v0 * ub
        return w

    def solve_prod(self, lam, d):
        """Solve lam o x = d for x."""
        x = np.empty_like(d)
        x[:self.l] = d[:self.l] / lam[:self.l]
        for s in self.slices():
            a = lam[s.start]
            bb = lam[s.start + 1:s.stop]
            d0 = d[s.start]
            db = d[s.start + 1:s.stop]
            den = a * a - bb @ bb
            x0 = (a * d0 - bb @ db) / den
            x[s.start] = x0
            x[s.start + 1:s.stop] = (db - x0 * bb) / a
        return x

    def max_step(self, v, dv):
        """sup {a >= 0 : v + a*dv in K}, assuming v strictly interior."""
        alpha = np.inf
        if self.l:
            neg = dv[:self.l] < 0
            if neg.any():
                alpha = min(alpha, float(np.min(-v[:self.l][neg] / dv[:self.l][neg])))
        for s in self.slices():
            v0, vb = v[s.start], v[s.start + 1:s.stop]
            d0, db = dv[s.start], dv[s.start + 1:s.stop]
            a = d0 * d0 - db @ db
            b = 2.0 * (v0 * d0 - vb @ db)
            c = v0 * v0 - vb @ vb
            step = np.inf
            disc = b * b - 4.0 * a * c
            if disc >= 0.0 and abs(a) > 1e-300:
                r = np.sqrt(disc)
                for root in ((-b - r) / (2 * a), (-b + r) / (2 * a)):
                    if root > 1e-16:
                        step = min(step, root)
            elif abs(a) <= 1e-300 and b < 0.0:
                step = -c / b
            if d0 < 0.0:
                step = min(step, -v0 / d0)
            alpha = min(alpha, step)
        return alpha


class _Scaling:
    """Nesterov-Todd scaling point: W z = W^{-1} s = lambda."""

    def __init__(self, cone: Cone, s, z):
        self.cone = cone
        self.w_orth = np.sqrt(s[:cone.l] / z[:cone.l]) if cone.l else np.empty(0)
        self.soc = []
        for sl in cone.slices():
            sb, zb = s[sl], z[sl]
            J = np.ones(sb.shape[0])
            J[1:] = -1.0
            # the J-norms are positive for interior points; clamp against
            # roundoff when an iterate sits almost on the boundary
            snorm = np.sqrt(max(sb @ (J * sb), 1e-300))
            znorm = np.sqrt(max(zb @ (J * zb), 1e-300))
            sn = sb / snorm
            zn = zb / znorm
            gamma = np.sqrt((1.0 + sn @ zn) / 2.0)
            wbar = (sn + J * zn) / (2.0 * gamma)
            # Jordan square root q of the scaling point (q'Jq = 1), so that
            # W = eta (2qq' - J) satisfies W z = W^{-1} s.
            q = np.empty_like(wbar)
            q[0] = np.sqrt((wbar[0] + 1.0) / 2.0)
            q[1:] = wbar[1:] / (2.0 * q[0])
            eta = np.sqrt(snorm / znorm)
            self.soc.append((sl, q, eta, J))

    def apply(self, v):
        out = v.copy()
        l = self.cone.l
        out[:l] = self.w_orth * v[:l]
        for sl, wbar, eta, J in self.soc:
            vb = v[sl]
            out[sl] = eta * (2.0 * wbar * (wbar @ vb) - J * vb)
        return out

    def apply_inv(self, v):
        out = v.copy()
        l = self.cone.l
        out[:l] = v[:l] / self.w_orth
        for sl, wbar, eta, J in self.soc:
            vb = v[sl]
            jw = J * wbar
            out[sl] = (2.0 * jw * (jw @ vb) - J * vb) / eta
        return out

    def w2_matrix(self):
        l = self.cone.l
        blocks = []
        if l:
            blocks.append(sp.diags(self.w_orth ** 2))
        for sl, wbar, eta, J in self.soc:
            d = sl.stop - sl.start
            Jm = np.diag(J)
            M = 2.0 * np.outer(wbar, wbar) - Jm
            blocks.append(sp.csc_matrix(eta ** 2 * (M @ M)))
        if not blocks:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(blocks, format="csc")


@dataclass
class SolveResult:
    """Solution of a conic program with verified primal-dual certificates."""

    status: str
    objective: float = np.nan
    x: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    ub_duals: np.ndarray | None = None
    var_lb_duals: np.ndarray | None = None
    var_ub_duals: np.ndarray | None = None
    fixed_duals: np.ndarray | None = None
    cone_duals: list = field(default_factory=list)
    dual_objective: float = np.nan
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    trace: list = field(default_factory=list)
    mip_gap: float | None = None
    nodes: int | None = None
    _eq_index: dict = field(default_factory=dict, repr=False)
    _ub_index: dict = field(default_factory=dict, repr=False)
    _names: list = field(default_factory=list, repr=False)

    def eq_dual(self, label):
        return float(self.eq_duals[self._eq_index[label]])

    def ub_dual(self, label):
        return float(self.ub_duals[self._ub_index[label]])

    def has_ub_row(self, label):
        return label in self._ub_index

    def value(self, name_or_idx):
        if isinstance(name_or_idx, (int, np.integer)):
            return float(self.x[name_or_idx])
        return float(self.x[self._names.index(name_or_idx)])


def _standard_form(p: ConicProgram):
    """Lower a ConicProgram to (c, A, b, G, h, cone) plus dual-recovery maps."""
    n = p.num_vars
    eq_blocks = [p.A_eq]
    b_parts = [p.b_eq]
    fixed = np.flatnonzero((p.ub - p.lb) <= 0.0)
    if fixed.size:
        F = sp.csr_matrix((np.ones(fixed.size), (np.arange(fixed.size), fixed)),
                          shape=(fixed.size, n))
        eq_blocks.append(F)
        b_parts.append(p.lb[fixed])
    A = sp.vstack(eq_blocks, format="csr") if len(eq_blocks) > 1 else eq_blocks[0].tocsr()
    b = np.concatenate(b_parts) if len(b_parts) > 1 else b_parts[0]

    free_mask = np.ones(n, dtype=bool)
    free_mask[fixed] = False
    var_ub = np.flatnonzero(free_mask & np.isfinite(p.ub))
    var_lb = np.flatnonzero(free_mask & np.isfinite(p.lb))

    g_blocks = [p.A_ub]
    h_parts = [p.b_ub]
    if var_ub.size:
        g_blocks.append(sp.csr_matrix((np.ones(var_ub.size),
                                       (np.arange(var_ub.size), var_ub)), shape=(var_ub.size, n)))
        h_parts.append(p.ub[var_ub])
    if var_lb.size:
        g_blocks.append(sp.csr_matrix((-np.ones(var_lb.size),
                                       (np.arange(var_lb.size), var_lb)), shape=(var_lb.size, n)))
        h_parts.append(-p.lb[var_lb])
    l = sum(blk.shape[0] for blk in g_blocks)

    soc_dims = []
    for head, tail in p.cones:
        idx = [head, *tail]
        d = len(idx)
        blk = sp.csr_matrix((-np.ones(d), (np.arange(d), idx)), shape=(d, n))
        g_blocks.append(blk)
        h_parts.append(np.zeros(d))
        soc_dims.append(d)

    G = sp.vstack(g_blocks, format="csr")
    h = np.concatenate(h_parts) if h_parts else np.zeros(0)
    cone = Cone(l=l, socs=soc_dims)
    maps = {
        "n_eq_user": p.A_eq.shape[0],
        "fixed_vars": fixed,
        "n_ub_user": p.A_ub.shape[0],
        "var_ub": var_ub,
        "var_lb": var_lb,
        "soc_offset": l,
    }
    return p.cost.copy(), A, b, G, h, cone, maps


class _KKT:
    """Regularized factorization of [[eps,A',G'],[A,-eps,0],[G,0,-W2-eps]]."""

    def __init__(self, A, G, W2, reg=1e-10):
        self.A = A
        self.G = G
        self.n = A.shape[1]
        self.p = A.shape[0]
        self.m = G.shape[0]
        if W2.nnz and not np.all(np.isfinite(W2.data)):
            raise RuntimeError("non-finite scaling matrix")
        self.W2 = W2
        self.reg = reg
        In = sp.identity(self.n) * reg
        Ip = sp.identity(self.p) * reg if self.p else sp.csc_matrix((0, 0))
        Im = sp.identity(self.m) * reg if self.m else sp.csc_matrix((0, 0))
        K = sp.bmat([
            [In, A.T if self.p else None, G.T if self.m else None],
            [A if self.p else None, -Ip if self.p else None, None],
            [G if self.m else None, None, (-W2 - Im) if self.m else None],
        ], format="csc")
        self.lu = spla.splu(K, permc_spec="COLAMD")

    def _apply_exact(self, v):
        n, p, m = self.n, self.p, self.m
        x, y, z = v[:n], v[n:n + p], v[n + p:]
        out = np.empty_like(v)
        out[:n] = (self.A.T @ y if p else 0) + (self.G.T @ z if m else 0)
        if p:
            out[n:n + p] = self.A @ x
        if m:
            out[n + p:] = self.G @ x - self.W2 @ z
        return out

    def solve(self, rx, ry, rz, refine=6):
        rhs = np.concatenate([rx, ry, rz])
        sol = self.lu.solve(rhs)
        scale = 1.0 + np.max(np.abs(rhs))
        prev = np.inf
        for _ in range(refine):
            resid = rhs - self._apply_exact(sol)
            err = np.max(np.abs(resid))
            if err < 1e-16 * scale or err >= 0.5 * prev:
                break
            prev = err
            sol = sol + self.lu.solve(resid)
        n, p = self.n, self.p
        return sol[:n], sol[n:n + p], sol[n + p:]


def _recover(p, maps, x, y, z, cone, scale_c, scale_rhs):
    """Map embedding duals back to user-facing arrays."""
    n_eq = maps["n_eq_user"]
    eq_duals = -y[:n_eq] * scale_c
    fixed = maps["fixed_vars"]
    fixed_duals = np.zeros(p.num_vars)
    if fixed.size:
        fixed_duals[fixed] = -y[n_eq:n_eq + fixed.size] * scale_c
    pos = 0
    n_ub = maps["n_ub_user"]
    ub_duals = z[pos:pos + n_ub] * scale_c
    pos += n_ub
    var_ub_duals = np.zeros(p.num_vars)
    var_ub = maps["var_ub"]
    var_ub_duals[var_ub] = z[pos:pos + var_ub.size] * scale_c
    pos += var_ub.size
    var_lb_duals = np.zeros(p.num_vars)
    var_lb = maps["var_lb"]
    var_lb_duals[var_lb] = z[pos:pos + var_lb.size] * scale_c
    pos += var_lb.size
    cone_duals = []
    for sl in cone.slices():
        cone_duals.append(z[sl] * scale_c)
    return eq_duals, ub_duals, var_lb_duals, var_ub_duals, fixed_duals, cone_duals


def solve_continuous(p: ConicProgram, feastol=1e-8, reltol=1e-8,
                     max_iter=200, trace=False) -> SolveResult:
    """Solve a conic program with binaries fixed or absent.

    Returns a SolveResult with status in {"optimal", "infeasible",
    "unbounded", "iteration-limit"}.  Raises SolverError only on
    structural problems (the iteration itself always classifies).
    """
    if p.has_free_binaries():
        raise SolverError("program has free binary variables; use solve_mixed_binary")
    c0, A, b0, G, h0, cone, maps = _standard_form(p)
    n = c0.shape[0]
    m = G.shape[0]
    if m == 0:
        raise SolverError("program has no inequalities, bounds or cones")

    scale_c = max(1.0, float(np.max(np.abs(c0)))) if n else 1.0
    scale_rhs = max(1.0, float(np.max(np.abs(b0))) if b0.size else 0.0,
                    float(np.max(np.abs(h0))) if h0.size else 0.0)
    c = c0 / scale_c
    b = b0 / scale_rhs
    h = h0 / scale_rhs

    e = cone.identity()
    deg = cone.degree

    # initial point from two least-squares-style KKT solves at W = I
    W2_I = sp.identity(m, format="csc")
    try:
        kkt0 = _KKT(A, G, W2_I)
    except RuntimeError as err:
        raise SolverError(f"initial KKT factorization failed: {err}")
    x, _, zc = kkt0.solve(np.zeros(n), b, h)
    s = -zc
    rp = cone.residual_to_interior(s)
    if rp >= 0:
        s = s + (1.0 + rp) * e
    xd, y, z = kkt0.solve(-c, np.zeros(b.shape[0]), np.zeros(m))
    rd = cone.residual_to_interior(z)
    if rd >= 0:
        z = z + (1.0 + rd) * e
    tau, kappa = 1.0, 1.0

    best = None
    trace_rows = []
    status = "iteration-limit"
    it = 0
    for it in range(1, max_iter + 1):
        r1 = A.T @ y + G.T @ z + c * tau      # dual residual
        r2 = A @ x - b * tau                  # primal eq residual
        r3 = G @ x + s - h * tau              # primal cone residual
        r4 = c @ x + b @ y + h @ z + kappa    # gap residual
        mu = (s @ z + tau * kappa) / (deg + 1)

        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
        pcost = float(c @ xs) * scale_c * scale_rhs
        dcost = float(-(b @ ys) - (h @ zs)) * scale_c * scale_rhs
        nb = 1.0 + np.max(np.abs(b)) if b.size else 1.0
        nh = 1.0 + np.max(np.abs(h))
        nc = 1.0 + np.max(np.abs(c))
        pres = max(float(np.max(np.abs(r2 / tau))) / nb if r2.size else 0.0,
                   float(np.max(np.abs(r3 / tau))) / nh)
        dres = float(np.max(np.abs(r1 / tau))) / nc
        compl = float(ss @ zs) * scale_c * scale_rhs
        gap_rel = abs(pcost - dcost) / (1.0 + abs(pcost))
        compl_rel = abs(compl) / (1.0 + abs(pcost))
        if trace:
            trace_rows.append({"iter": it, "pcost": pcost, "dcost": dcost,
                               "pres": pres, "dres": dres,
                               "gap": compl, "tau": tau, "kappa": kappa,
                               "mu": mu})
        score = max(pres, dres, gap_rel)
        if best is None or score < best[0]:
            best = (score, xs.copy(), ys.copy(), zs.copy(), ss.copy(),
                    pcost, dcost, pres, dres, gap_rel, compl_rel)

        if pres <= feastol and dres <= feastol and \
                (gap_rel <= reltol or compl_rel <= reltol):
            status = "optimal"
            break

        # infeasibility certificates from the embedding
        bty_htz = float(b @ y + h @ z)
        if bty_htz < -1e-12:
            cert = float(np.max(np.abs(A.T @ y + G.T @ z))) / (-bty_htz)
            if cert <= 1e-9 and cone.residual_to_interior(z) < 1e-9 * max(1.0, float(np.max(np.abs(z)))):
                status = "infeasible"
                break
        ctx = float(c @ x)
        if ctx < -1e-12:
            res_u = max(float(np.max(np.abs(A @ x))) if b.size else 0.0,
                        float(np.max(np.abs(G @ x + s))))
            if res_u / (-ctx) <= 1e-9:
                status = "unbounded"
                break

        scaling = _Scaling(cone, s, z)
        lam = scaling.apply(z)
        W2 = scaling.w2_matrix()
        try:
            kkt = _KKT(A, G, W2)
        except RuntimeError:
            kkt = _KKT(A, G, W2, reg=1e-7)
        u1 = kkt.solve(-c, b, h)
        cbh1 = float(c @ u1[0] + b @ u1[1] + h @ u1[2])

        def direction(sigma, ds_extra, dk_extra):
            eta = 1.0 - sigma
            d_s = -cone.prod(lam, lam) + sigma * mu * e + ds_extra
            d_k = -tau * kappa + sigma * mu + dk_extra
            rhs_z = -eta * r3 - scaling.apply(cone.solve_prod(lam, d_s))
            u2 = kkt.solve(-eta * r1, -eta * r2, rhs_z)
            cbh2 = float(c @ u2[0] + b @ u2[1] + h @ u2[2])
            # cbh1 = -z1'W^2 z1 <= 0, so the denominator stays negative
            denom = cbh1 - kappa / tau
            if abs(denom) < 1e-14:
                denom = -1e-14
            dtau = (-eta * r4 - d_k / tau - cbh2) / denom
            dx = u2[0] + dtau * u1[0]
            dy = u2[1] + dtau * u1[1]
            dz = u2[2] + dtau * u1[2]
            ds = scaling.apply(cone.solve_prod(lam, d_s)) - W2 @ dz
            dkap = (d_k - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkap

        def boundary(ds, dz, dtau, dkap):
            a = min(cone.max_step(s, ds), cone.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        dxa, dya, dza, dsa, dta, dka = direction(0.0, 0.0, 0.0)
        alpha_aff = min(1.0, boundary(dsa, dza, dta, dka))
        gap_aff = ((s + alpha_aff * dsa) @ (z + alpha_aff * dza)
                   + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)) / (deg + 1)
        sigma = min(0.999, max(1e-12, (max(gap_aff, 0.0) / mu) ** 3))

        corr_s = cone.prod(scaling.apply_inv(dsa), scaling.apply(dza))
        dx, dy, dz, ds, dtau, dkap = direction(sigma, -corr_s, -dta * dka)
        alpha = 0.99 * boundary(ds, dz, dtau, dkap)
        alpha = min(alpha, 1.0)
        if alpha <= 1e-7:
            # corrector stalled; fall back to a pure centering step
            dx, dy, dz, ds, dtau, dkap = direction(1.0, 0.0, 0.0)
            alpha = min(0.99 * boundary(ds, dz, dtau, dkap), 1.0)
        if not np.isfinite(alpha) or alpha <= 1e-13:
            status = "iteration-limit"
            break
        # pull back until strictly interior (guards roundoff in the step)
        for _ in range(30):
            if cone.inside(s + alpha * ds) and cone.inside(z + alpha * dz) \
                    and tau + alpha * dtau > 0 and kappa + alpha * dkap > 0:
                break
            alpha *= 0.7
        else:
            status = "iteration-limit"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkap
        if trace and trace_rows:
            trace_rows[-1]["alpha"] = alpha
            trace_rows[-1]["sigma"] = sigma
            trace_rows[-1]["alpha_aff"] = alpha_aff

    if status in ("infeasible", "unbounded"):
        return SolveResult(status=status, iterations=it, trace=trace_rows,
                           residuals={"primal": np.nan, "dual": np.nan,
                                      "gap": np.nan, "compl": np.nan},
                           _names=p.names)

    _, xs, ys, zs, ss, pcost, dcost, pres, dres, gap_rel, compl_rel = best
    x_user = xs * scale_rhs
    fixed = maps["fixed_vars"]
    if fixed.size:
        x_user[fixed] = p.lb[fixed]
    eq_d, ub_d, lb_vd, ub_vd, fx_d, cone_d = _recover(
        p, maps, x_user, ys, zs, cone, scale_c, scale_rhs)
    res = {"primal": pres, "dual": dres, "gap": gap_rel, "compl": compl_rel}
    if status == "iteration-limit" and max(pres, dres, gap_rel) < 1e-6:
        # close enough to classify as solved at a relaxed certificate
        status = "optimal" if max(pres, dres, gap_rel) <= 1e-6 else status
    result = SolveResult(
        status=status,
        objective=pcost * 1.0 + p.offset,
        x=x_user,
        eq_duals=eq_d, ub_duals=ub_d,
        var_lb_duals=lb_vd, var_ub_duals=ub_vd, fixed_duals=fx_d,
        cone_duals=cone_d,
        dual_objective=dcost + p.offset,
        residuals=res, iterations=it, trace=trace_rows,
        _eq_index={lab: i for i, lab in enumerate(p.eq_labels)},
        _ub_index={lab: i for i, lab in enumerate(p.ub_labels)},
        _names=p.names)
    return result
