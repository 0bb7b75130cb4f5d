"""Cone bookkeeping and Nesterov-Todd scaling for the interior-point solver.

Three cone families are supported:

``l``  nonnegative orthant of dimension ``n``
``q``  second-order cone ``{(t, u) : t >= ||u||_2}`` of dimension ``n``
``s``  positive semidefinite matrices of side ``n``, stored in ``svec`` form

``svec`` packs the lower triangle column by column and multiplies
off-diagonal entries by sqrt(2), so that ``svec(X) @ svec(Y) == trace(X @ Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("l", "q", "s"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("cone dimension must be positive")

    @property
    def size(self) -> int:
        """Number of entries the cone occupies in the stacked vector."""
        if self.kind == "s":
            return self.dim * (self.dim + 1) // 2
        return self.dim

    @property
    def degree(self) -> int:
        return 1 if self.kind == "q" else self.dim


def cone_slices(cones) -> list[slice]:
    out, k = [], 0
    for c in cones:
        out.append(slice(k, k + c.size))
        k += c.size
    return out


def total_size(cones) -> int:
    return sum(c.size for c in cones)


def total_degree(cones) -> int:
    return sum(c.degree for c in cones)


# ----------------------------------------------------------------------------
# svec helpers


@lru_cache(maxsize=64)
def _tril_index(n: int):
    # column-major lower triangle: (0,0),(1,0),...,(n-1,0),(1,1),...
    cols, rows = [], []
    for j in range(n):
        for i in range(j, n):
            rows.append(i)
            cols.append(j)
    rows = np.array(rows)
    cols = np.array(cols)
    fac = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, fac


def svec(X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    r, c, f = _tril_index(n)
    return 0.5 * (X[r, c] + X[c, r]) * f


def smat(v: np.ndarray) -> np.ndarray:
    N = v.shape[0]
    n = int(round((np.sqrt(8 * N + 1) - 1) / 2))
    r, c, f = _tril_index(n)
    X = np.zeros((n, n))
    X[r, c] = v / f
    X[c, r] = v / f
    return X


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec_kron(W: np.ndarray) -> np.ndarray:
    """Matrix of the map ``U -> W U W`` (W symmetric) in svec coordinates."""
    n = W.shape[0]
    r, c, f = _tril_index(n)
    K = W[np.ix_(r, r)] * W[np.ix_(c, c)] + W[np.ix_(r, c)] * W[np.ix_(c, r)]
    K *= 0.5 * np.outer(f, f)
    return K


# ----------------------------------------------------------------------------
# cone membership and identity


def identity(cones) -> np.ndarray:
    e = np.zeros(total_size(cones))
    for c, sl in zip(cones, cone_slices(cones)):
        if c.kind == "l":
            e[sl] = 1.0
        elif c.kind == "q":
            e[sl.start] = 1.0
        else:
            e[sl] = svec(np.eye(c.dim))
    return e


def min_margin(cones, v: np.ndarray) -> float:
    """Smallest 'eigenvalue' of ``v`` over all cones (negative when outside)."""
    m = np.inf
    for c, sl in zip(cones, cone_slices(cones)):
        x = v[sl]
        if c.kind == "l":
            m = min(m, x.min())
        elif c.kind == "q":
            m = min(m, x[0] - np.linalg.norm(x[1:]))
        else:
            m = min(m, np.linalg.eigvalsh(smat(x))[0])
    return float(m)


# ----------------------------------------------------------------------------
# Jordan algebra in the scaled space


def jordan_product(cones, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for c, sl in zip(cones, cone_slices(cones)):
        a, b = x[sl], y[sl]
        if c.kind == "l":
            out[sl] = a * b
        elif c.kind == "q":
            out[sl.start] = a @ b
            out[sl.start + 1:sl.stop] = a[0] * b[1:] + b[0] * a[1:]
        else:
            X, Y = smat(a), smat(b)
            out[sl] = svec(0.5 * (X @ Y + Y @ X))
    return out


class Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-T} s = lambda``.

    For PSD blocks ``lambda`` is kept as the vector of diagonal entries of
    the (diagonal) scaled point.
    """

    def __init__(self, cones, s: np.ndarray, z: np.ndarray):
        self.cones = cones
        self.slices = cone_slices(cones)
        self.blocks = []
        lam = np.empty_like(s)
        for c, sl in zip(cones, self.slices):
            if c.kind == "l":
                d = np.sqrt(s[sl] / z[sl])
                self.blocks.append(d)
                lam[sl] = np.sqrt(s[sl] * z[sl])
            elif c.kind == "q":
                W, Winv = _soc_nt(s[sl], z[sl])
                self.blocks.append((W, Winv))
                lam[sl] = W @ z[sl]
            else:
                R, Rinv, ev = _psd_nt(smat(s[sl]), smat(z[sl]))
                self.blocks.append((R, Rinv, ev))
                lam[sl] = svec(np.diag(ev))
        self.lam = lam

    # W applied to z-like vectors
    def W(self, v):
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            if c.kind == "l":
                out[sl] = v[sl] * blk
            elif c.kind == "q":
                out[sl] = blk[0] @ v[sl]
            else:
                R = blk[0]
                out[sl] = svec(R.T @ smat(v[sl]) @ R)
        return out

    # W^{-T} applied to s-like vectors
    def WinvT(self, v):
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            if c.kind == "l":
                out[sl] = v[sl] / blk
            elif c.kind == "q":
                out[sl] = blk[1] @ v[sl]
            else:
                Rinv = blk[1]
                out[sl] = svec(Rinv @ smat(v[sl]) @ Rinv.T)
        return out

    # W^{-1}: recovers z-like vectors from scaled ones
    def Winv(self, v):
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            if c.kind == "l":
                out[sl] = v[sl] / blk
            elif c.kind == "q":
                out[sl] = blk[1] @ v[sl]
            else:
                Rinv = blk[1]
                out[sl] = svec(Rinv.T @ smat(v[sl]) @ Rinv)
        return out

    def WT(self, v):
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            if c.kind == "l":
                out[sl] = v[sl] * blk
            elif c.kind == "q":
                out[sl] = blk[0] @ v[sl]
            else:
                R = blk[0]
                out[sl] = svec(R @ smat(v[sl]) @ R.T)
        return out

    def apply_WtW_inv(self, v):
        """``(W^T W)^{-1} v`` blockwise."""
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            if c.kind == "l":
                out[sl] = v[sl] / blk**2
            elif c.kind == "q":
                Winv = blk[1]
                out[sl] = Winv @ (Winv @ v[sl])
            else:
                Rinv = blk[1]
                Wi = Rinv.T @ Rinv
                out[sl] = svec(Wi @ smat(v[sl]) @ Wi)
        return out

    def block_kernel(self, k):
        """Dense (or diagonal, for ``l``) matrix of ``(W^T W)^{-1}`` on block k."""
        c, blk = self.cones[k], self.blocks[k]
        if c.kind == "l":
            return 1.0 / blk**2
        if c.kind == "q":
            Winv = blk[1]
            return Winv @ Winv
        Rinv = blk[1]
        Wi = Rinv.T @ Rinv
        Wi = 0.5 * (Wi + Wi.T)
        return svec_kron(Wi)

    def lam_inv_product(self, v):
        """Solve ``lambda o u = v`` for u."""
        out = np.empty_like(v)
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            lam = self.lam[sl]
            if c.kind == "l":
                out[sl] = v[sl] / lam
            elif c.kind == "q":
                l0, l1 = lam[0], lam[1:]
                v0, v1 = v[sl][0], v[sl][1:]
                det = l0 * l0 - l1 @ l1
                u0 = (l0 * v0 - l1 @ v1) / det
                out[sl.start] = u0
                out[sl.start + 1:sl.stop] = (v1 - u0 * l1) / l0
            else:
                ev = blk[2]
                V = smat(v[sl])
                out[sl] = svec(2.0 * V / (ev[:, None] + ev[None, :]))
        return out

    def max_step(self, d):
        """Largest ``a`` with ``lambda + a d`` in the cone (inf if unbounded)."""
        amax = np.inf
        for c, sl, blk in zip(self.cones, self.slices, self.blocks):
            lam, dd = self.lam[sl], d[sl]
            if c.kind == "l":
                neg = dd < 0
                if neg.any():
                    amax = min(amax, np.min(-lam[neg] / dd[neg]))
            elif c.kind == "q":
                amax = min(amax, _soc_max_step(lam, dd))
            else:
                ev = blk[2]
                isq = 1.0 / np.sqrt(ev)
                D = smat(dd) * np.outer(isq, isq)
                mn = np.linalg.eigvalsh(D)[0]
                if mn < 0:
                    amax = min(amax, -1.0 / mn)
        return amax


def _soc_nt(s, z):
    J = np.ones_like(s)
    J[1:] = -1.0
    sJs = s[0] ** 2 - s[1:] @ s[1:]
    zJz = z[0] ** 2 - z[1:] @ z[1:]
    if sJs <= 0 or zJz <= 0:
        raise FloatingPointError("point left the second-order cone")
    sb = s / np.sqrt(sJs)
    zb = z / np.sqrt(zJz)
    gam = np.sqrt(0.5 * (1.0 + sb @ zb))
    wb = (sb + J * zb) / (2.0 * gam)
    # the scaling is the quadratic representation of the square root of wb
    u0 = np.sqrt(0.5 * (wb[0] + 1.0))
    u = np.concatenate(([u0], wb[1:] / (2.0 * u0)))
    eta = (sJs / zJz) ** 0.25
    Jm = np.diag(J)
    W = eta * (2.0 * np.outer(u, u) - Jm)
    Ju = J * u
    Winv = (2.0 * np.outer(Ju, Ju) - Jm) / eta
    return W, Winv


def _psd_nt(S, Z):
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    U, ev, Vt = np.linalg.svd(Lz.T @ Ls)
    isq = 1.0 / np.sqrt(ev)
    R = (Ls @ Vt.T) * isq[None, :]
    Rinv = (U.T @ Lz.T) * isq[:, None]
    return R, Rinv, ev


def _soc_max_step(lam, d):
    # smallest positive root of (l0 + a d0)^2 - ||l1 + a d1||^2 = 0 with l0 + a d0 >= 0
    l0, l1 = lam[0], lam[1:]
    d0, d1 = d[0], d[1:]
    a = d0 * d0 - d1 @ d1
    b = l0 * d0 - l1 @ d1
    c = l0 * l0 - l1 @ l1
    roots = []
    if abs(a) > 1e-300:
        disc = b * b - a * c
        if disc >= 0:
            sq = np.sqrt(disc)
            # numerically stable pair
            q = -(b + np.copysign(sq, b))
            if q != 0:
                roots += [q / a, c / q]
            else:
                roots += [-b / a]
    elif b != 0:
        roots.append(-c / (2 * b))
    if d0 < 0:
        roots.append(-l0 / d0)
    pos = [r for r in roots if r > 0]
    return min(pos) if pos else np.inf
