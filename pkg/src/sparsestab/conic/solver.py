"""Dense primal-dual interior-point solver for nonnegative/SOC/PSD programs.

The iteration follows the homogeneous self-dual embedding with
Nesterov-Todd scaling and a Mehrotra predictor-corrector. Each Newton
system is reduced to a dense Schur complement ``G^T (W^T W)^{-1} G`` and
solved by Cholesky, with iterative refinement on the full KKT system.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .cones import Scaling, cone_slices, identity, jordan_product, min_margin, total_degree
from .program import ConicProgram, ConicSolution

log = logging.getLogger(__name__)

STEP_FRACTION = 0.99


def _norm(v):
    return float(np.linalg.norm(v)) if v.size else 0.0


def equilibrate(prog: ConicProgram, iters: int = 15):
    """Ruiz scaling: column scale ``D``, cone-block row scale ``E`` for G, ``F`` for A.

    Row scalings of second-order and PSD blocks are kept uniform inside each
    block so that the scaled slack stays in the same cone.
    """
    n = prog.n_vars
    mg, ma = prog.G.shape[0], prog.A.shape[0]
    Gc, Ac = prog.G.tocoo(), prog.A.tocoo()
    gr, gc, gv = Gc.row, Gc.col, np.abs(Gc.data)
    ar, ac, av = Ac.row, Ac.col, np.abs(Ac.data)
    D, E, F = np.ones(n), np.ones(mg), np.ones(ma)
    # blocks whose rows share one scale factor
    shared = [sl for cone, sl in zip(prog.cones, cone_slices(prog.cones)) if cone.kind != "l"]
    for _ in range(iters):
        g = gv * E[gr] * D[gc]
        a = av * F[ar] * D[ac]
        colmax = np.zeros(n)
        np.maximum.at(colmax, gc, g)
        np.maximum.at(colmax, ac, a)
        rowG = np.zeros(mg)
        np.maximum.at(rowG, gr, g)
        for sl in shared:
            rowG[sl] = rowG[sl].max()
        rowA = np.zeros(ma)
        np.maximum.at(rowA, ar, a)
        colmax[colmax == 0] = 1.0
        rowG[rowG == 0] = 1.0
        rowA[rowA == 0] = 1.0
        D /= np.sqrt(colmax)
        E /= np.sqrt(rowG)
        F /= np.sqrt(rowA)
    return D, E, F


DENSE_LIMIT = 250_000


def _operator(M):
    """Dense copy of small matrices (sparse products carry a large fixed cost)."""
    if not sp.issparse(M):
        return M
    if M.shape[0] * M.shape[1] <= DENSE_LIMIT:
        return M.toarray()
    return M.tocsr()


def _block_columns(G, cones):
    cols_list, subs = [], []
    Gr = G.tocsr()
    for sl in cone_slices(cones):
        Gb = Gr[sl, :].tocsc()
        cols = np.flatnonzero(np.diff(Gb.indptr))
        cols_list.append(cols)
        subs.append(Gb[:, cols].tocsc())
    return cols_list, subs


class _KKT:
    """Factorization of the reduced Newton system for one scaling."""

    def __init__(self, G, A, cones, scaling: Scaling, blocks, GT=None, AT=None):
        self.G, self.A, self.W = G, A, scaling
        self.GT = G.T.tocsr() if GT is None else GT
        self.AT = A.T.tocsr() if AT is None else AT
        p = G.shape[1]
        H = np.zeros((p, p))
        for k, (cone, cols, Gsub) in enumerate(zip(cones, *blocks)):
            if cols.size == 0:
                continue
            Kb = scaling.block_kernel(k)
            if cone.kind == "l":
                Hb = (Gsub.T @ sp.diags(Kb) @ Gsub).toarray()
            else:
                T = Gsub.T @ Kb          # dense |cols| x N_b
                Hb = (Gsub.T @ T.T)
                Hb = np.asarray(Hb)
            H[np.ix_(cols, cols)] += Hb
        H = 0.5 * (H + H.T)
        self.H = H
        # symmetric Jacobi scaling keeps the factorization accurate when the
        # cone scalings spread the diagonal over many orders of magnitude
        dg = np.diag(H).copy()
        dg[dg <= 0] = 1.0
        self.d = 1.0 / np.sqrt(dg)
        Hs = self.d[:, None] * H * self.d[None, :]
        self.reg = 0.0
        for attempt in range(6):
            try:
                self.L = sla.cho_factor(Hs + self.reg * np.eye(p), lower=True, check_finite=False)
                break
            except (np.linalg.LinAlgError, sla.LinAlgError):
                self.reg = 10.0 ** (-14 + 2 * attempt)
        else:
            raise np.linalg.LinAlgError("Schur complement is not positive definite")
        if A.shape[0]:
            AT = self.AT.toarray() if sp.issparse(self.AT) else self.AT
            HiAt = self._hsolve(AT)
            S = A @ HiAt
            S = 0.5 * (S + S.T)
            self.S = sla.cho_factor(S + 1e-15 * np.eye(S.shape[0]) * max(1.0, np.abs(S).max()),
                                    lower=True, check_finite=False)

    def _hsolve(self, r):
        d = self.d if r.ndim == 1 else self.d[:, None]
        return d * sla.cho_solve(self.L, d * r, check_finite=False)

    def _solve_once(self, rx, ry, rz, q=None):
        """One pass on ``[0 A' G'; A 0 0; G 0 -W'W] d = r`` with ``r_z = rz + W' q``.

        Also returns ``u = W dz`` computed without forming ``dz`` first.
        """
        G, A, W = self.G, self.A, self.W
        v = W.WinvT(rz)
        if q is not None:
            v = v + q
        rhs = rx + self.GT @ W.Winv(v)
        if A.shape[0]:
            t = self._hsolve(rhs)
            dy = sla.cho_solve(self.S, A @ t - ry, check_finite=False)
            dx = self._hsolve(rhs - self.AT @ dy)
        else:
            dy = np.zeros(0)
            dx = self._hsolve(rhs)
        u = W.WinvT(G @ dx - rz)
        if q is not None:
            u = u - q
        return dx, dy, W.Winv(u), u

    def solve(self, rx, ry, rz, q=None, refine: int = 6):
        G, A, W = self.G, self.A, self.W
        dx, dy, dz, u = self._solve_once(rx, ry, rz, q)
        scale = 1 + _norm(rx) + _norm(ry) + _norm(rz) + (0.0 if q is None else _norm(q))
        prev = np.inf
        for _ in range(refine):
            ex = rx - (self.AT @ dy + self.GT @ dz)
            ey = ry - A @ dx
            # residual of  G dx - W'u = rz + W'q  kept in scaled form
            eu = W.WinvT(rz - G @ dx) + u + (0.0 if q is None else q)
            err = max(_norm(ex), _norm(ey), _norm(eu))
            # stop once refinement has converged or stalled
            if err <= 1e-15 * scale or err > 0.5 * prev:
                break
            prev = err
            cx, cy, cz, cu = self._solve_once(ex, ey, np.zeros_like(rz), eu)
            dx, dy, dz, u = dx + cx, dy + cy, dz + cz, u + cu
        return dx, dy, dz, u


def solve(prog: ConicProgram, tol: float = 1e-8, max_iter: int = 100,
          scale: bool = True) -> ConicSolution:
    """Solve ``prog`` to relative residuals ``tol``.

    Returns a :class:`ConicSolution`; ``status`` is ``"optimal"``,
    ``"infeasible"`` (primal infeasibility certificate in ``z, y``),
    ``"unbounded"`` (improving ray in ``x, s``) or ``"numerical_failure"``
    (best iterate returned, see ``history``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cones = prog.cones
    n = prog.n_vars
    if scale:
        D, E, F = equilibrate(prog)
    else:
        D, E, F = np.ones(n), np.ones(prog.G.shape[0]), np.ones(prog.A.shape[0])
    G = (sp.diags(E) @ prog.G @ sp.diags(D)).tocsc()
    A = (sp.diags(F) @ prog.A @ sp.diags(D)).tocsc()
    blocks = _block_columns(G, cones)
    GT, AT = _operator(G.T), _operator(A.T)
    G, A = _operator(G), _operator(A)
    G0, A0 = _operator(prog.G), _operator(prog.A)
    G0T, A0T = _operator(prog.G.T), _operator(prog.A.T)
    c = D * prog.c
    h = E * prog.h
    b = F * prog.b

    e = identity(cones)
    nu = total_degree(cones)
    m_eq = A.shape[0]

    # original-data norms for residual reporting
    nc, nb, nh = _norm(prog.c), _norm(prog.b), _norm(prog.h)

    def unscaled(x, s, z, y, tau):
        return D * x / tau, s / E / tau, E * z / tau, F * y / tau

    def metrics(x, s, z, y, tau, kappa):
        xu, su, zu, yu = unscaled(x, s, z, y, tau)
        rp = max(_norm(A0 @ xu - prog.b), _norm(G0 @ xu + su - prog.h)) / (1.0 + max(nb, nh))
        rd = _norm(A0T @ yu + G0T @ zu + prog.c) / (1.0 + nc)
        pcost = float(prog.c @ xu)
        dcost = float(-(prog.b @ yu) - prog.h @ zu)
        comp = float(su @ zu)
        rg = max(abs(pcost - dcost), abs(comp)) / (1.0 + abs(pcost) + abs(dcost))
        return rp, rd, rg, pcost, dcost

    # ---- initial point: least-norm primal and dual, shifted into the cone
    id_scaling = Scaling(cones, e.copy(), e.copy())
    kkt0 = _KKT(G, A, cones, id_scaling, blocks, GT, AT)
    x, _, r, _ = kkt0.solve(np.zeros(n), b, h)
    s = -r
    _, y, z, _ = kkt0.solve(-c, np.zeros(m_eq), np.zeros(G.shape[0]))
    ms = min_margin(cones, s)
    if ms < 1e-8:
        s = s + (1.0 - ms) * e
    mz = min_margin(cones, z)
    if mz < 1e-8:
        z = z + (1.0 - mz) * e
    tau, kappa = 1.0, 1.0

    history = []
    best = None
    status = "numerical_failure"
    it = 0
    for it in range(max_iter + 1):
        rx = AT @ y + GT @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        rt = kappa + c @ x + b @ y + h @ z
        mu = (s @ z + tau * kappa) / (nu + 1)

        rp, rd, rg, pcost, dcost = metrics(x, s, z, y, tau, kappa)
        history.append({"iter": it, "pres": rp, "dres": rd, "gap": rg,
                        "pcost": pcost, "dcost": dcost, "tau": tau, "kappa": kappa})
        score = max(rp, rd, rg)
        if np.isfinite(score) and (best is None or score < best[0]):
            best = (score, x.copy(), s.copy(), z.copy(), y.copy(), tau, kappa)
        if rp <= tol and rd <= tol and rg <= tol:
            status = "optimal"
            break

        # infeasibility certificates
        hz_by = float(h @ z + b @ y)
        if hz_by < 0:
            zu, yu = E * z, F * y
            t = -float(prog.h @ zu + prog.b @ yu)
            if t > 0 and _norm(A0T @ yu + G0T @ zu) / t <= tol * (1.0 + nc) and tau < kappa:
                status = "infeasible"
                break
        cx = float(c @ x)
        if cx < 0:
            xu, su = D * x, s / E
            t = -float(prog.c @ xu)
            if t > 0 and max(_norm(A0 @ xu), _norm(G0 @ xu + su)) / t <= tol * (1.0 + max(nb, nh)) and tau < kappa:
                status = "unbounded"
                break
        if it == max_iter:
            break

        try:
            W = Scaling(cones, s, z)
            kkt = _KKT(G, A, cones, W, blocks, GT, AT)
        except (np.linalg.LinAlgError, FloatingPointError, sla.LinAlgError) as err:
            log.debug("factorization failed at iteration %d: %s", it, err)
            break
        lam = W.lam

        u1x, u1y, u1z, u1u = kkt.solve(-c, b, h)
        g_u1 = c @ u1x + b @ u1y + h @ u1z

        def direction(sig, ds_target, dtk):
            f = 1.0 - sig
            # the complementarity target enters as  W'(lambda \ ds)
            u2x, u2y, u2z, u2u = kkt.solve(-f * rx, -f * ry, -f * rz,
                                           q=-W.lam_inv_product(ds_target))
            g_u2 = c @ u2x + b @ u2y + h @ u2z
            dtau = (-f * rt - dtk / tau - g_u2) / (g_u1 - kappa / tau)
            dx = u2x + dtau * u1x
            dy = u2y + dtau * u1y
            dz = u2z + dtau * u1z
            dzs = u2u + dtau * u1u
            dss = W.lam_inv_product(ds_target) - dzs
            dkappa = (dtk - kappa * dtau) / tau
            return dx, dy, dz, dss, dzs, dtau, dkappa

        def step_length(dss, dzs, dtau, dkappa):
            a = min(W.max_step(dss), W.max_step(dzs))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        lam_sq = jordan_product(cones, lam, lam)
        aff = direction(0.0, -lam_sq, -tau * kappa)
        a_aff = min(1.0, step_length(*aff[3:]))
        sigma = float(np.clip((1.0 - a_aff) ** 3, 0.0, 1.0))

        # corrector
        corr = jordan_product(cones, aff[3], aff[4])
        ds_target = -lam_sq - corr + sigma * mu * e
        dtk = -tau * kappa - aff[5] * aff[6] + sigma * mu
        dx, dy, dz, dss, dzs, dtau, dkappa = direction(sigma, ds_target, dtk)
        amax = step_length(dss, dzs, dtau, dkappa)
        alpha = min(1.0, STEP_FRACTION * amax)
        if not np.isfinite(alpha) or alpha < 1e-12:
            log.debug("step length collapsed at iteration %d", it)
            break
        ds = W.WT(dss)
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            break

    if status in ("optimal", "numerical_failure"):
        if status == "numerical_failure" and best is not None:
            _, x, s, z, y, tau, kappa = best
        xu, su, zu, yu = unscaled(x, s, z, y, tau)
        rp, rd, rg, pcost, dcost = metrics(x, s, z, y, tau, kappa)
    else:
        # certificates are returned unnormalized by tau
        xu, su, zu, yu = D * x, s / E, E * z, F * y
        rp, rd, rg = np.nan, np.nan, np.nan
        pcost = np.inf if status == "infeasible" else -np.inf
        dcost = pcost
    return ConicSolution(status=status, x=xu, s=su, z=zu, y=yu,
                         primal_objective=pcost, dual_objective=dcost,
                         primal_residual=rp, dual_residual=rd, gap=rg,
                         iterations=it, history=history)
