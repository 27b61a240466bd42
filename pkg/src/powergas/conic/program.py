"""Mixed-binary conic program container and incremental builder.

A program is

    minimize    c'x + c0
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                lb <= x <= ub
                (x[head]; x[tail]) in SOC   for every registered cone,

where SOC is the standard second-order cone {(t, v) : t >= ||v||_2}.
Rows carry structured labels (tuples) so dual multipliers can be retrieved
by the model equation that produced them.  Cones are registered on plain
variable indices; callers that need a cone over an affine expression
introduce auxiliary variables and equality rows.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

Label = tuple


class ProgramBuilder:
    """Accumulates variables, rows and cones, then freezes a ConicProgram."""

    def __init__(self):
        self._lb = []
        self._ub = []
        self._cost = []
        self._binary = []
        self._names = []
        self._name_to_idx = {}
        self._eq_rows = []      # (terms, rhs, label); terms = list[(idx, coef)]
        self._ub_rows = []
        self._cones = []
        self._offset = 0.0

    @property
    def num_vars(self):
        return len(self._lb)

    def add_variable(self, name: Label, lb=0.0, ub=np.inf, cost=0.0,
                     binary=False) -> int:
        if name in self._name_to_idx:
            raise ValueError(f"duplicate variable {name!r}")
        if binary and not (lb >= 0.0 and ub <= 1.0):
            raise ValueError(f"binary variable {name!r} must have bounds in [0,1]")
        idx = len(self._lb)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        self._binary.append(bool(binary))
        self._names.append(name)
        self._name_to_idx[name] = idx
        return idx

    def index_of(self, name: Label) -> int:
        return self._name_to_idx[name]

    def add_cost(self, idx: int, coef: float):
        self._cost[idx] += float(coef)

    def add_offset(self, value: float):
        self._offset += float(value)

    def add_eq(self, terms, rhs, label: Label):
        terms = [(i, float(a)) for i, a in terms if a != 0.0]
        if not terms:
            if abs(rhs) > 1e-12:
                raise ValueError(f"empty row {label!r} with nonzero rhs {rhs}")
            return
        self._eq_rows.append((terms, float(rhs), label))

    def add_le(self, terms, rhs, label: Label):
        terms = [(i, float(a)) for i, a in terms if a != 0.0]
        if not terms:
            if rhs < -1e-12:
                raise ValueError(f"empty row {label!r} infeasible (0 <= {rhs})")
            return
        self._ub_rows.append((terms, float(rhs), label))

    def add_cone(self, head: int, tail) -> None:
        self._cones.append((int(head), tuple(int(i) for i in tail)))

    def build(self) -> "ConicProgram":
        n = self.num_vars

        def pack(rows):
            data, ri, ci, rhs, labels = [], [], [], [], []
            for r, (terms, b, lab) in enumerate(rows):
                for i, a in terms:
                    ri.append(r)
                    ci.append(i)
                    data.append(a)
                rhs.append(b)
                labels.append(lab)
            mat = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
            return mat, np.asarray(rhs, dtype=float), labels

        A_eq, b_eq, eq_labels = pack(self._eq_rows)
        A_ub, b_ub, ub_labels = pack(self._ub_rows)
        return ConicProgram(
            lb=np.asarray(self._lb), ub=np.asarray(self._ub),
            cost=np.asarray(self._cost), offset=self._offset,
            binary=np.asarray(self._binary, dtype=bool),
            names=list(self._names),
            A_eq=A_eq, b_eq=b_eq, eq_labels=eq_labels,
            A_ub=A_ub, b_ub=b_ub, ub_labels=ub_labels,
            cones=list(self._cones))


class ConicProgram:
    """Frozen program; value object consumed by the solvers."""

    def __init__(self, lb, ub, cost, offset, binary, names,
                 A_eq, b_eq, eq_labels, A_ub, b_ub, ub_labels, cones):
        self.lb = lb
        self.ub = ub
        self.cost = cost
        self.offset = offset
        self.binary = binary
        self.names = names
        self.A_eq = A_eq
        self.b_eq = b_eq
        self.eq_labels = eq_labels
        self.A_ub = A_ub
        self.b_ub = b_ub
        self.ub_labels = ub_labels
        self.cones = cones
        self._validate()

    def _validate(self):
        n = self.num_vars
        heads = set()
        for head, tail in self.cones:
            for i in (head, *tail):
                if not 0 <= i < n:
                    raise ValueError(f"cone references variable {i} out of range")
            if head in heads:
                raise ValueError(f"variable {head} heads more than one cone")
            heads.add(head)
        bad = np.flatnonzero(self.binary & ~((self.lb >= 0) & (self.ub <= 1)))
        if bad.size:
            raise ValueError(f"binary variable {self.names[bad[0]]!r} not bounded in [0,1]")
        if np.any(self.lb > self.ub):
            i = int(np.argmax(self.lb > self.ub))
            raise ValueError(f"variable {self.names[i]!r} has lb > ub")

    @property
    def num_vars(self):
        return self.lb.shape[0]

    @property
    def num_binary(self):
        return int(self.binary.sum())

    def has_free_binaries(self):
        free = self.binary & (self.ub - self.lb > 0)
        return bool(free.any())

    def with_bounds(self, fixed: dict) -> "ConicProgram":
        """Copy with variables pinned to values (used by branch and bound)."""
        lb = self.lb.copy()
        ub = self.ub.copy()
        for i, v in fixed.items():
            lb[i] = v
            ub[i] = v
        return ConicProgram(lb, ub, self.cost, self.offset, self.binary,
                            self.names, self.A_eq, self.b_eq, self.eq_labels,
                            self.A_ub, self.b_ub, self.ub_labels, self.cones)

    def relaxed(self) -> "ConicProgram":
        """Continuous relaxation: binary flags dropped, bounds kept."""
        return ConicProgram(self.lb, self.ub, self.cost, self.offset,
                            np.zeros(self.num_vars, dtype=bool),
                            self.names, self.A_eq, self.b_eq, self.eq_labels,
                            self.A_ub, self.b_ub, self.ub_labels, self.cones)

    def with_updates(self, new_costs: dict | None = None,
                     extra_vars=None, extra_eq=None, extra_ub=None,
                     extra_cones=None) -> "ConicProgram":
        """Copy with changed objective coefficients and appended structure.

        extra_vars: list of (name, lb, ub, cost); new indices follow existing.
        extra_eq / extra_ub: list of (terms, rhs, label) where terms may
        reference old and new indices.
        """
        n_old = self.num_vars
        extra_vars = extra_vars or []
        n = n_old + len(extra_vars)
        cost = np.concatenate([self.cost, [v[3] for v in extra_vars]]) \
            if extra_vars else self.cost.copy()
        if new_costs:
            for i, v in new_costs.items():
                cost[i] = v
        lb = np.concatenate([self.lb, [v[1] for v in extra_vars]]) if extra_vars else self.lb
        ub = np.concatenate([self.ub, [v[2] for v in extra_vars]]) if extra_vars else self.ub
        binary = np.concatenate([self.binary, np.zeros(len(extra_vars), dtype=bool)]) \
            if extra_vars else self.binary
        names = self.names + [v[0] for v in extra_vars]

        def extend(mat, rhs, labels, rows):
            if not rows:
                mat = sp.csr_matrix((mat.data, mat.indices, mat.indptr), shape=(mat.shape[0], n))
                return mat, rhs, labels
            data, ri, ci, extra_rhs, extra_labels = [], [], [], [], []
            for r, (terms, b, lab) in enumerate(rows):
                for i, a in terms:
                    if a != 0.0:
                        ri.append(r)
                        ci.append(i)
                        data.append(float(a))
                extra_rhs.append(float(b))
                extra_labels.append(lab)
            block = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
            base = sp.csr_matrix((mat.data, mat.indices, mat.indptr), shape=(mat.shape[0], n))
            return sp.vstack([base, block], format="csr"), \
                np.concatenate([rhs, extra_rhs]), labels + extra_labels

        A_eq, b_eq, eq_labels = extend(self.A_eq, self.b_eq, self.eq_labels, extra_eq or [])
        A_ub, b_ub, ub_labels = extend(self.A_ub, self.b_ub, self.ub_labels, extra_ub or [])
        cones = self.cones + list(extra_cones or [])
        return ConicProgram(lb, ub, cost, self.offset, binary, names,
                            A_eq, b_eq, eq_labels, A_ub, b_ub, ub_labels, cones)

    def fingerprint(self) -> str:
        """Deterministic content hash (column order, rows, cones, bounds)."""
        import hashlib
        h = hashlib.sha256()
        for arr in (self.lb, self.ub, self.cost, self.binary.astype(np.int8)):
            h.update(np.ascontiguousarray(arr).tobytes())
        for mat, rhs in ((self.A_eq, self.b_eq), (self.A_ub, self.b_ub)):
            m = mat.tocsr()
            m.sum_duplicates()
            h.update(m.indptr.tobytes())
            h.update(m.indices.tobytes())
            h.update(m.data.tobytes())
            h.update(np.ascontiguousarray(rhs).tobytes())
        h.update(repr(self.cones).encode())
        h.update(repr(self.offset).encode())
        return h.hexdigest()
