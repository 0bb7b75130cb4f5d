"""A small affine-expression layer for writing LMIs and compiling them.

Expressions are matrices whose entries are affine in a flat vector of scalar
decision variables.  An :class:`Affine` of shape ``(r, c)`` stores

    coef   sparse (r*c, n_vars) matrix acting on the variable vector
    const  dense (r, c) constant term

with entries vectorized row-major.  Constraints are collected on a
:class:`Model` and turned into a :class:`ConicProgram` by
:func:`lmi_to_standard_form`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import Cone, _tril_index
from .program import ConicProgram, ConicSolution
from .solver import solve as conic_solve


class Affine:
    __array_priority__ = 100  # so ndarray @ Affine dispatches here

    def __init__(self, coef, const, model: "Model"):
        self.coef = sp.csr_matrix(coef)
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.model = model

    # -- shape helpers -----------------------------------------------------
    @property
    def shape(self):
        return self.const.shape

    def _widen(self):
        n = self.model.n_vars
        if self.coef.shape[1] < n:
            self.coef = sp.csr_matrix(
                (self.coef.data, self.coef.indices, self.coef.indptr),
                shape=(self.coef.shape[0], n))
        return self

    def _lift(self, other):
        if isinstance(other, Affine):
            return other._widen()
        arr = np.asarray(other, dtype=float)
        if arr.ndim == 0:
            arr = np.full(self.shape, float(arr))
        arr = np.atleast_2d(arr)
        return Affine(sp.csr_matrix((arr.size, self.model.n_vars)), arr, self.model)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        self._widen()
        if o.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {o.shape}")
        return Affine(self.coef + o.coef, self.const + o.const, self.model)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.coef, -self.const, self.model)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, a):
        if isinstance(a, Affine) or np.ndim(a) != 0:
            raise TypeError("only scalar multiplication is affine")
        return Affine(self.coef * float(a), self.const * float(a), self.model)

    __rmul__ = __mul__

    def __matmul__(self, R):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        r, c = self.shape
        if R.shape[0] != c:
            raise ValueError("inner dimensions do not agree")
        T = sp.kron(sp.identity(r), sp.csr_matrix(R.T), format="csr")
        return Affine(T @ self._widen().coef, self.const @ R, self.model)

    def __rmatmul__(self, L):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        r, c = self.shape
        if L.shape[1] != r:
            raise ValueError("inner dimensions do not agree")
        T = sp.kron(sp.csr_matrix(L), sp.identity(c), format="csr")
        return Affine(T @ self._widen().coef, L @ self.const, self.model)

    @property
    def T(self):
        r, c = self.shape
        perm = np.arange(r * c).reshape(r, c).T.ravel()
        return Affine(self._widen().coef[perm], self.const.T, self.model)

    def __getitem__(self, key):
        r, c = self.shape
        idx = np.arange(r * c).reshape(r, c)[key]
        idx = np.atleast_2d(idx)
        if isinstance(key, tuple) and len(key) == 2 and np.ndim(key[0]) == 0 \
                and not isinstance(key[0], slice):
            idx = idx.reshape(1, -1)
        return Affine(self._widen().coef[idx.ravel()],
                      self.const.ravel()[idx.ravel()].reshape(idx.shape),
                      self.model)

    def sum(self):
        w = sp.csr_matrix(np.ones((1, self.const.size)))
        return Affine(w @ self._widen().coef, [[self.const.sum()]], self.model)

    def vec(self):
        """Column vector of entries (row-major)."""
        return Affine(self._widen().coef, self.const.reshape(-1, 1), self.model)

    def value(self, x=None):
        x = self.model.x if x is None else x
        self._widen()
        return (self.coef @ x).reshape(self.shape) + self.const


def bmat(blocks) -> Affine:
    """Block matrix from a nested list of Affine expressions or constants."""
    model = None
    for row in blocks:
        for b in row:
            if isinstance(b, Affine):
                model = b.model
    if model is None:
        raise ValueError("bmat needs at least one Affine block")
    lifted = [[b._widen() if isinstance(b, Affine) else None for b in row]
              for row in blocks]
    heights = [next(b.shape[0] for b in row if b is not None) for row in lifted]
    widths = [next(lifted[i][j].shape[1] for i in range(len(blocks))
                   if lifted[i][j] is not None) for j in range(len(blocks[0]))]
    for i, row in enumerate(blocks):
        for j, b in enumerate(row):
            if lifted[i][j] is None:
                arr = np.zeros((heights[i], widths[j])) if b is None or np.ndim(b) == 0 and b == 0 \
                    else np.asarray(b, dtype=float)
                lifted[i][j] = Affine(sp.csr_matrix((arr.size, model.n_vars)), arr, model)
    R, C = sum(heights), sum(widths)
    const = np.block([[b.const for b in row] for row in lifted])
    rows, cols, vals = [], [], []
    r0 = 0
    for i, row in enumerate(lifted):
        c0 = 0
        for j, b in enumerate(row):
            h, w = b.shape
            coo = b.coef.tocoo()
            br, bc = np.divmod(coo.row, w)
            rows.append((r0 + br) * C + c0 + bc)
            cols.append(coo.col)
            vals.append(coo.data)
            c0 += w
        r0 += heights[i]
    coef = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(R * C, model.n_vars))
    return Affine(coef, const, model)


def scaled(t: Affine, M) -> Affine:
    """Scalar expression ``t`` times a constant matrix ``M``."""
    if t.shape != (1, 1):
        raise ValueError("scaled() needs a scalar expression")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    v = sp.csr_matrix(M.reshape(-1, 1))
    return Affine(v @ t._widen().coef, t.const[0, 0] * M, t.model)


def trace(X: Affine) -> Affine:
    r, c = X.shape
    if r != c:
        raise ValueError("trace of a non-square expression")
    w = sp.csr_matrix(np.eye(r).reshape(1, -1))
    return Affine(w @ X._widen().coef, [[np.trace(X.const)]], X.model)


@dataclass
class _Constraint:
    kind: str            # "psd" | "nonneg" | "soc" | "eq"
    expr: Affine
    margin: float = 0.0
    name: str = ""


@dataclass
class Model:
    """Container for decision variables and constraints."""

    n_vars: int = 0
    names: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: Affine | None = None
    x: np.ndarray | None = None
    solution: ConicSolution | None = None

    # -- variables ----------------------------------------------------------
    def _alloc(self, k, name):
        idx = np.arange(self.n_vars, self.n_vars + k)
        self.n_vars += k
        self.names[name] = idx
        return idx

    def scalar(self, name) -> Affine:
        i = self._alloc(1, name)
        return Affine(sp.csr_matrix(([1.0], ([0], i)), shape=(1, self.n_vars)),
                      [[0.0]], self)

    def vector(self, name, k) -> Affine:
        idx = self._alloc(k, name)
        return Affine(sp.csr_matrix((np.ones(k), (np.arange(k), idx)),
                                    shape=(k, self.n_vars)), np.zeros((k, 1)), self)

    def matrix(self, name, r, c) -> Affine:
        idx = self._alloc(r * c, name)
        return Affine(sp.csr_matrix((np.ones(r * c), (np.arange(r * c), idx)),
                                    shape=(r * c, self.n_vars)), np.zeros((r, c)), self)

    def symmetric(self, name, n) -> Affine:
        idx = self._alloc(n * (n + 1) // 2, name)
        rr, cc, _ = _tril_index(n)
        k = np.arange(idx.size)
        lookup = np.empty((n, n), dtype=int)
        lookup[rr, cc] = k
        lookup[cc, rr] = k
        flat = lookup.ravel()
        return Affine(sp.csr_matrix((np.ones(n * n), (np.arange(n * n), idx[flat])),
                                    shape=(n * n, self.n_vars)), np.zeros((n, n)), self)

    # -- constraints --------------------------------------------------------
    def psd(self, expr: Affine, margin: float = 0.0, name: str = ""):
        """``expr >= margin * I`` in the semidefinite order."""
        if expr.shape[0] != expr.shape[1]:
            raise ValueError("PSD constraint needs a square expression")
        self.constraints.append(_Constraint("psd", expr, margin, name))

    def nonneg(self, expr: Affine, margin: float = 0.0, name: str = ""):
        """Elementwise ``expr >= margin``."""
        self.constraints.append(_Constraint("nonneg", expr.vec(), margin, name))

    def soc(self, t: Affine, u: Affine, name: str = ""):
        """``t >= ||u||_2`` for scalar ``t``."""
        stacked = bmat([[t.vec()], [u.vec()]])
        self.constraints.append(_Constraint("soc", stacked, 0.0, name))

    def eq(self, expr: Affine, rhs=0.0, name: str = ""):
        """``expr == rhs``; symmetric expressions keep only the lower triangle."""
        d = expr - rhs
        r, c = d.shape
        if r == c and r > 1 and _is_symmetric(d):
            rr, cc, _ = _tril_index(r)
            keep = rr * c + cc
            d = Affine(d._widen().coef[keep], d.const.ravel()[keep].reshape(-1, 1),
                       self)
        self.constraints.append(_Constraint("eq", d.vec(), 0.0, name))

    def minimize(self, expr: Affine):
        if expr.shape != (1, 1):
            raise ValueError("objective must be scalar")
        self.objective = expr

    # -- compile / solve ----------------------------------------------------
    def compile(self) -> ConicProgram:
        return lmi_to_standard_form(self)

    def solve(self, tol: float = 1e-8, max_iter: int = 100) -> ConicSolution:
        prog = self.compile()
        sol = conic_solve(prog, tol=tol, max_iter=max_iter)
        self.solution = sol
        self.x = sol.x
        return sol

    def value(self, name):
        return self.x[self.names[name]]


def _asymmetry(e: Affine) -> float:
    n = e.shape[0]
    perm = np.arange(n * n).reshape(n, n).T.ravel()
    dc = e._widen().coef - e.coef[perm]
    return max(abs(dc).max() if dc.nnz else 0.0,
               np.abs(e.const - e.const.T).max())


def _is_symmetric(e: Affine) -> bool:
    return _asymmetry(e) == 0.0


def _symmetry_check(e: Affine, name: str, tol: float = 1e-12):
    asym = _asymmetry(e)
    if asym == 0.0:
        return
    scale = max(1.0, abs(e.coef).max() if e.coef.nnz else 0.0, np.abs(e.const).max())
    if asym > tol * scale:
        raise ValueError(f"constraint {name or '<unnamed>'} is not symmetric "
                         f"(asymmetry {asym:.3e})")
    warnings.warn(f"symmetrizing constraint {name or '<unnamed>'} "
                  f"(asymmetry {asym:.1e})", RuntimeWarning, stacklevel=3)


def lmi_to_standard_form(model: Model) -> ConicProgram:
    """Compile the model's constraints into ``G x + s = h, s in K, A x = b``.

    Each PSD constraint ``F(x) >= eps I`` contributes ``svec(F(x) - eps I)`` as
    a slack block, so ``G = -svec(F_lin)`` and ``h = svec(F_0 - eps I)``.
    Equalities go to ``A x = b``.  An unset objective means feasibility.
    """
    n = model.n_vars
    order = {"nonneg": 0, "soc": 1, "psd": 2}
    G_parts, h_parts, cones, A_parts, b_parts = [], [], [], [], []
    for con in sorted((c for c in model.constraints if c.kind != "eq"),
                      key=lambda c: order[c.kind]):
        e = con.expr._widen()
        if con.kind == "nonneg":
            G_parts.append(-e.coef)
            h_parts.append(e.const.ravel() - con.margin)
            cones.append(Cone("l", e.const.size))
        elif con.kind == "soc":
            G_parts.append(-e.coef)
            h_parts.append(e.const.ravel())
            cones.append(Cone("q", e.const.size))
        else:
            k = e.shape[0]
            _symmetry_check(e, con.name)
            rr, cc, f = _tril_index(k)
            lo = rr * k + cc
            up = cc * k + rr
            # average the two triangles so tiny asymmetries are symmetrized
            Fl = 0.5 * (e.coef[lo] + e.coef[up])
            G_parts.append(-sp.diags(f) @ Fl)
            C0 = e.const - con.margin * np.eye(k)
            h_parts.append(0.5 * (C0[rr, cc] + C0[cc, rr]) * f)
            cones.append(Cone("s", k))
    for con in model.constraints:
        if con.kind == "eq":
            e = con.expr._widen()
            A_parts.append(e.coef)
            b_parts.append(-e.const.ravel())
    if model.objective is None:
        c = np.zeros(n)
    else:
        obj = model.objective._widen()
        c = obj.coef.toarray().ravel()
    if not cones:
        # a free problem still needs a (trivial) cone block for the solver
        G = sp.csr_matrix((1, n))
        h = np.ones(1)
        cones = [Cone("l", 1)]
    else:
        G = sp.vstack(G_parts, format="csc")
        h = np.concatenate(h_parts)
    A = sp.vstack(A_parts, format="csc") if A_parts else None
    b = np.concatenate(b_parts) if b_parts else None
    meta = {"objective_offset": 0.0 if model.objective is None
            else float(model.objective.const[0, 0])}
    return ConicProgram(c=c, G=G, h=h, cones=cones, A=A, b=b, meta=meta)
