"""Controller synthesis for multiplicative load uncertainty.

Full-state problem (rank C0 = n), with tilde variables ``Q``, ``M``::

    minimize   -w1 g1 - w2 g2 + w3 sum(beta) + w4 ||M||_{1,p}
    subject to I >= Q > g1 I
               [[beta_i, M_i], [M_i', Q]] > 0                  for every channel
               A0 Q + Q A0' - B0 M - M' B0' + sum_i b_i b_i' < -g2 I

The gain is ``K0 = M Q^-1 (C0'C0)^-1 C0'`` and channel i tolerates noise
levels below ``1/sqrt(beta_i)``.

With partial measurements a first stage adds ``A0 Q + Q A0' < 0`` and keeps
only ``Q*``; the second stage then optimizes the gain directly::

    minimize   -w2 g2 + w3 sum_i ||K_i C0 sqrt(Q*)|| + w4 ||K C0 Q*||_{1,p}
    subject to (A0 - B0 K C0) Q* + Q* (...)' + sum_i b_i b_i' < -g2 I

and channel i tolerates noise below ``1/||K_i C0 sqrt(Q*)||``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .conic.lmi import Model, bmat, scaled
from .errors import NumericalError, SolverError, ValidationError
from .msesana import solve_lyapunov, verify_mses
from .netmodel import check_assumptions, numerical_rank
from .stochastic import UncertaintySpec, assemble_closed_loop, multiplicative_channels

log = logging.getLogger(__name__)

EPS = 1e-8           # strictness shift for every "> 0", relative to ||A0||
ROW_TOL = 1e-6       # relative row-norm threshold for active channels
# Schur-complement Newton systems lose accuracy near the optimum of the larger
# synthesis programs; residuals of 1e-6 are reached reliably
SYNTH_TOL = 1e-6


@dataclass(frozen=True)
class SynthesisWeights:
    w1: float = 100.0
    w2: float = 100.0
    w3: float = 0.1
    w4: float = 1.0
    p: float = 1

    def __post_init__(self):
        for k in ("w1", "w2", "w3"):
            if not getattr(self, k) > 0:
                raise ValidationError(f"{k} must be positive")
        if not self.w4 >= 0:
            raise ValidationError("w4 must be nonnegative")
        p = self.p
        if isinstance(p, str):
            p = np.inf if p.lower() in ("inf", "infinity") else float(p)
        if p not in (1, 2, np.inf):
            raise ValidationError("p must be 1, 2 or inf")
        object.__setattr__(self, "p", p)

    def replace(self, **kw) -> "SynthesisWeights":
        d = dict(w1=self.w1, w2=self.w2, w3=self.w3, w4=self.w4, p=self.p)
        d.update(kw)
        return SynthesisWeights(**d)


@dataclass
class SynthesisResult:
    path: str                       # "full-state" | "two-stage"
    Q_star: np.ndarray
    K0: np.ndarray
    gamma1_star: float
    gamma2_star: float
    sigma_star: np.ndarray          # inf for inactive channels
    objective: float
    status: str
    residuals: dict
    M_star: np.ndarray | None = None
    beta_star: np.ndarray | None = None
    eps: float = EPS
    notes: list = field(default_factory=list)

    @property
    def row_support(self) -> set:
        return row_support(self.K0)

    def to_dict(self, model=None) -> dict:
        def mat(a):
            return None if a is None else np.asarray(a).tolist()

        def vec(a):
            return None if a is None else [None if not np.isfinite(v) else float(v)
                                           for v in np.asarray(a, dtype=float)]
        d = {"path": self.path, "status": self.status, "objective": self.objective,
             "gamma1_star": self.gamma1_star, "gamma2_star": self.gamma2_star,
             "sigma_star": vec(self.sigma_star),
             "sigma_star_infinite": [bool(np.isinf(v)) for v in self.sigma_star],
             "beta_star": vec(self.beta_star), "Q_star": mat(self.Q_star),
             "M_star": mat(self.M_star), "K0": mat(self.K0), "eps": self.eps,
             "residuals": self.residuals, "row_support": sorted(self.row_support),
             "notes": list(self.notes)}
        if model is not None:
            d["injection_labels"] = list(model.injection_labels)
            d["measurement_labels"] = list(model.measurement_labels)
        return d


# ----------------------------------------------------------------------------
# helpers


def _norm_penalty(m: Model, X, p, name):
    """Epigraph of ``||X||_{1,p}`` (sum of row p-norms); returns the penalty expression."""
    r, c = X.shape
    if p == 1:
        T = m.matrix(name, r, c)
        m.nonneg(T - X)
        m.nonneg(T + X)
        return T.sum()
    t = m.vector(name, r)
    for i in range(r):
        if p == 2:
            m.soc(t[i, 0], X[i, :].T)
        else:
            ones = np.ones((1, c))
            m.nonneg(scaled(t[i, 0], ones) - X[i, :])
            m.nonneg(scaled(t[i, 0], ones) + X[i, :])
    return t.sum()


def _solve(m: Model, what: str, tol=SYNTH_TOL):
    sol = m.solve(tol=tol)
    if sol.status == "infeasible":
        raise SolverError(f"{what}: solver certified infeasibility "
                          "(inconsistent with the stability assumptions)", sol)
    if sol.status == "unbounded":
        raise SolverError(f"{what}: problem is unbounded for these weights", sol)
    if sol.status != "optimal":
        raise SolverError(f"{what}: solver status {sol.status}", sol)
    return sol


def _residuals(sol):
    return {"primal": float(sol.primal_residual), "dual": float(sol.dual_residual),
            "gap": float(sol.gap), "iterations": int(sol.iterations)}


def _active_rows(X, rel=ROW_TOL):
    norms = np.linalg.norm(X, axis=1)
    ref = max(1.0, norms.max()) if norms.size else 1.0
    return norms > rel * ref


def sqrtm_psd(Q):
    """Symmetric square root through an eigendecomposition."""
    ev, V = np.linalg.eigh(0.5 * (Q + Q.T))
    ev = np.clip(ev, 0.0, None)
    return (V * np.sqrt(ev)) @ V.T


def strictness(model) -> float:
    return EPS * max(1.0, float(np.linalg.norm(model.A0, 2)))


def _gate(model, need_full_rank):
    rep = check_assumptions(model)
    if not rep.hurwitz:
        raise ValidationError(f"A0 is not Hurwitz (max real part {rep.max_real_eig:.3e})")
    if need_full_rank and rep.rank_C0 < model.n:
        raise ValidationError(f"rank(C0) = {rep.rank_C0} < n = {model.n}; "
                              "use the two-stage synthesis")
    return rep


# ----------------------------------------------------------------------------
# full-state synthesis


def _full_state_program(model, weights: SynthesisWeights, open_loop: bool):
    A0, B0 = model.A0, model.B0
    n, mch = model.n, model.m
    m = Model()
    Q = m.symmetric("Q", n)
    split = weights.w4 > 0 and weights.p in (1, np.inf)
    if split:
        # M = M+ - M-: the l1/linf epigraphs then only touch sign-constrained
        # variables, which keeps the Newton systems well scaled at sparse optima
        Mp, Mn = m.matrix("M+", mch, n), m.matrix("M-", mch, n)
        m.nonneg(Mp)
        m.nonneg(Mn)
        M = Mp - Mn
    else:
        M = m.matrix("M", mch, n)
    beta = m.vector("beta", mch)
    g1 = m.scalar("gamma1")
    g2 = m.scalar("gamma2")
    I = np.eye(n)
    eps = strictness(model)
    m.psd(I - Q, name="Q<=I")
    m.psd(Q - scaled(g1, I), margin=eps, name="Q>g1I")
    for i in range(mch):
        m.psd(bmat([[beta[i, 0], M[i, :]], [M[i, :].T, Q]]), margin=eps, name=f"schur{i}")
    BB = B0 @ B0.T
    perf = A0 @ Q + Q @ A0.T - B0 @ M - M.T @ B0.T + BB
    m.psd(-perf - scaled(g2, I), margin=eps, name="performance")
    if open_loop:
        m.psd(-(A0 @ Q + Q @ A0.T), margin=eps, name="open-loop")
    m.nonneg(g1)
    m.nonneg(g2)
    obj = g1 * (-weights.w1) + g2 * (-weights.w2) + beta.sum() * weights.w3
    if split and weights.p == 1:
        obj = obj + (Mp.sum() + Mn.sum()) * weights.w4
    elif split:
        t = m.vector("Mnorm", mch)
        for i in range(mch):
            m.nonneg(scaled(t[i, 0], np.ones((1, n))) - Mp[i, :] - Mn[i, :])
        obj = obj + t.sum() * weights.w4
    elif weights.w4 > 0:
        obj = obj + _norm_penalty(m, M, weights.p, "Mnorm") * weights.w4
    m.minimize(obj)
    return m, Q, M, beta, g1, g2


def recover_gain_full_rank(M_star, Q_star, C0, cond_limit: float = 1e12):
    """``K0 = M Q^-1 (C0'C0)^-1 C0'``, checked against ``K0 C0 = M Q^-1``."""
    M_star = np.atleast_2d(np.asarray(M_star, dtype=float))
    Q_star = np.atleast_2d(np.asarray(Q_star, dtype=float))
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    n = Q_star.shape[0]
    if numerical_rank(C0) < n:
        raise ValidationError("C0 is rank deficient; use the two-stage synthesis")
    CtC = C0.T @ C0
    if np.linalg.cond(CtC) > cond_limit:
        raise NumericalError("C0'C0 is too ill-conditioned for the pseudo-inverse")
    F = np.linalg.solve(Q_star.T, M_star.T).T           # M Q^-1
    K0 = np.linalg.solve(CtC, F.T).T @ C0.T             # F (C0'C0)^-1 C0'
    err = np.abs(K0 @ C0 - F).max()
    if err > 1e-8 * max(1.0, np.abs(F).max()):
        raise NumericalError(f"gain recovery check failed (error {err:.2e})")
    return K0


def synthesize_full_state(model, weights: SynthesisWeights | None = None,
                          tol: float = SYNTH_TOL) -> SynthesisResult:
    weights = weights or SynthesisWeights()
    _gate(model, need_full_rank=True)
    m, Q, M, beta, g1, g2 = _full_state_program(model, weights, open_loop=False)
    sol = _solve(m, "full-state synthesis", tol)
    Qv = 0.5 * (Q.value() + Q.value().T)
    Mv = M.value().copy()
    bv = beta.value().ravel()
    act = _active_rows(Mv)
    Mv[~act] = 0.0
    K0 = recover_gain_full_rank(Mv, Qv, model.C0)
    sigma = np.full(model.m, np.inf)
    sigma[act] = 1.0 / np.sqrt(bv[act])
    return SynthesisResult(path="full-state", Q_star=Qv, K0=K0,
                           gamma1_star=float(g1.value()[0, 0]),
                           gamma2_star=float(g2.value()[0, 0]), sigma_star=sigma,
                           objective=float(sol.primal_objective), status=sol.status,
                           residuals=_residuals(sol), M_star=Mv, beta_star=bv,
                           eps=strictness(model))


# ----------------------------------------------------------------------------
# two-stage synthesis


def stage1_precompute(model, weights: SynthesisWeights | None = None, *,
                      tol: float = SYNTH_TOL, return_result: bool = False):
    """Stage-one ``Q*`` (optionally with the whole stage-one solution)."""
    weights = weights or SynthesisWeights()
    _gate(model, need_full_rank=False)
    m, Q, M, beta, g1, g2 = _full_state_program(model, weights, open_loop=True)
    sol = _solve(m, "stage-one synthesis", tol)
    Qv = 0.5 * (Q.value() + Q.value().T)
    if not return_result:
        return Qv
    return Qv, {"M": M.value(), "beta": beta.value().ravel(),
                "gamma1": float(g1.value()[0, 0]), "gamma2": float(g2.value()[0, 0]),
                "residuals": _residuals(sol)}


def stage2_gain(model, Q_star, weights: SynthesisWeights | None = None,
                tol: float = SYNTH_TOL) -> SynthesisResult:
    """Second stage: the gain itself, for any measurement matrix.

    ``gamma2`` is left free and the closed loop must keep
    ``A Q* + Q* A' < 0`` (implied whenever ``gamma2 >= 0``), so ``K = 0`` is
    always feasible after stage one.  When ``gamma2* >= 0`` the per-channel
    bounds are ``1/||K_i C0 sqrt(Q*)||``.  Otherwise they are rescaled by
    ``sqrt(alpha)``, the largest ``alpha`` that keeps
    ``A Q* + Q* A' + alpha sum b_i b_i' < 0``, and a note is recorded.
    """
    weights = weights or SynthesisWeights()
    _gate(model, need_full_rank=False)
    A0, B0, C0 = model.A0, model.B0, model.C0
    n, mch, s = model.n, model.m, model.s
    Qs = 0.5 * (np.asarray(Q_star, dtype=float) + np.asarray(Q_star, dtype=float).T)
    if Qs.shape != (n, n) or np.linalg.eigvalsh(Qs)[0] <= 0:
        raise ValidationError("Q_star must be an n x n positive definite matrix")
    R = sqrtm_psd(Qs)
    m = Model()
    K = m.matrix("K", mch, s)
    g2 = m.scalar("gamma2")
    t = m.vector("t", mch)
    I = np.eye(n)
    KC = K @ C0
    AQ = A0 @ Qs - B0 @ (KC @ Qs)
    lhs = AQ + AQ.T + B0 @ B0.T
    eps = strictness(model)
    m.psd(-lhs - scaled(g2, I), margin=eps, name="performance")
    m.psd(-(AQ + AQ.T), margin=0.5 * eps, name="closed-loop")
    CR = C0 @ R
    KCR = K @ CR
    for i in range(mch):
        m.soc(t[i, 0], KCR[i, :].T)
    obj = g2 * (-weights.w2) + t.sum() * weights.w3
    if weights.w4 > 0:
        obj = obj + _norm_penalty(m, KC @ Qs, weights.p, "KCQnorm") * weights.w4
    m.minimize(obj)
    sol = _solve(m, "stage-two synthesis", tol)
    Kv = K.value().copy()
    act = _active_rows(Kv @ C0 @ Qs)
    Kv[~act] = 0.0
    g2v = float(g2.value()[0, 0])
    rn = np.linalg.norm(Kv @ CR, axis=1)
    sigma = np.full(mch, np.inf)
    notes = []
    scale = 1.0
    if g2v < 0:
        A = A0 - B0 @ Kv @ C0
        S = -(A @ Qs + Qs @ A.T)
        S = 0.5 * (S + S.T)
        ev = np.linalg.eigvalsh(S)
        if ev[0] <= 0:
            raise NumericalError(f"stage-two gain does not satisfy A Q* + Q* A' < 0 (eig {ev[0]:.2e}, gamma2 {g2v:.3e})")
        Li = np.linalg.inv(np.linalg.cholesky(S))
        T = Li @ (B0 @ B0.T) @ Li.T
        scale = float(np.sqrt(1.0 / max(np.linalg.eigvalsh(0.5 * (T + T.T))[-1], 1e-300)))
        notes.append(f"gamma2* < 0: channel bounds rescaled by sqrt(alpha) = {scale:.6g}")
    pos = act & (rn > 0)
    sigma[pos] = scale / rn[pos]
    return SynthesisResult(path="two-stage", Q_star=Qs, K0=Kv, gamma1_star=float(np.linalg.eigvalsh(Qs)[0]),
                           gamma2_star=g2v, sigma_star=sigma,
                           objective=float(sol.primal_objective), status=sol.status,
                           residuals=_residuals(sol), M_star=Kv @ C0 @ Qs, notes=notes,
                           eps=eps)


def synthesize(model, weights: SynthesisWeights | None = None,
               tol: float = SYNTH_TOL) -> SynthesisResult:
    """Route on ``rank(C0)``: full-state when it equals n, two-stage otherwise."""
    weights = weights or SynthesisWeights()
    if numerical_rank(model.C0) == model.n:
        log.info("rank(C0) = n: full-state synthesis")
        return synthesize_full_state(model, weights, tol)
    log.info("rank(C0) < n: two-stage synthesis")
    Q = stage1_precompute(model, weights, tol=tol)
    return stage2_gain(model, Q, weights, tol)


# ----------------------------------------------------------------------------
# sweeps, supports, certificates


@dataclass
class ParetoPoint:
    w3: float
    gain_norms: np.ndarray
    sigma_star: np.ndarray
    gamma2_star: float
    status: str
    result: SynthesisResult | None = None


def pareto_sweep(model, weights: SynthesisWeights, w3_grid, tol: float = SYNTH_TOL) -> list:
    grid = [float(w) for w in w3_grid]
    if not grid:
        raise ValidationError("w3 grid is empty")
    if any(not w > 0 for w in grid):
        raise ValidationError("w3 grid values must be positive")
    out = []
    for w3 in grid:
        try:
            res = synthesize(model, weights.replace(w3=w3), tol)
        except (SolverError, NumericalError) as err:
            log.warning("pareto point w3=%g failed: %s", w3, err)
            nan = np.full(model.m, np.nan)
            out.append(ParetoPoint(w3, nan, nan, np.nan, "failed"))
            continue
        out.append(ParetoPoint(w3, np.linalg.norm(res.K0, axis=1), res.sigma_star,
                               res.gamma2_star, res.status, res))
    return out


def row_support(K0, rel_tol: float = ROW_TOL) -> set:
    if not 0 < rel_tol < 1:
        raise ValidationError("rel_tol must lie in (0, 1)")
    K0 = np.atleast_2d(np.asarray(K0, dtype=float))
    norms = np.linalg.norm(K0, axis=1)
    top = norms.max() if norms.size else 0.0
    if top == 0:
        return set()
    return {int(i) for i in np.flatnonzero(norms > rel_tol * top)}


def certify(model, result: SynthesisResult, scale: float = 0.99):
    """``verify_mses`` on the closed loop at ``scale * sigma*`` (inactive channels at 0)."""
    sig = np.where(np.isfinite(result.sigma_star), scale * result.sigma_star, 0.0)
    cl = assemble_closed_loop(model, result.K0, UncertaintySpec(sig))
    return verify_mses(cl.A, multiplicative_channels(cl), sig)


def design_lqr(model, state_weight, input_weight, tol: float = 1e-12,
               max_iter: int = 100):
    """Newton-Kleinman iteration for ``A'P + PA - P B R^-1 B' P + Q = 0``.

    Starts from the zero gain, which is stabilizing because A0 is Hurwitz.
    Returns the state-feedback gain ``R^-1 B' P``.
    """
    A, B = model.A0, model.B0
    n, mch = B.shape
    Qw = np.atleast_2d(np.asarray(state_weight, dtype=float))
    Rw = np.atleast_2d(np.asarray(input_weight, dtype=float))
    if Qw.shape != (n, n) or Rw.shape != (mch, mch):
        raise ValidationError("weight matrices have the wrong shape")
    if np.linalg.eigvalsh(0.5 * (Rw + Rw.T))[0] <= 0:
        raise ValidationError("input weight must be positive definite")
    if np.linalg.eigvalsh(0.5 * (Qw + Qw.T))[0] < -1e-12 * max(1.0, np.abs(Qw).max()):
        raise ValidationError("state weight must be positive semidefinite")
    if np.linalg.eigvals(A).real.max() >= 0:
        raise ValidationError("Newton-Kleinman needs a Hurwitz A0 for its zero-gain start")
    K = np.zeros((mch, n))
    P = np.zeros((n, n))
    history = []
    for _ in range(max_iter):
        Ak = A - B @ K
        P_new = solve_lyapunov(Ak.T, Qw + K.T @ Rw @ K)
        K = np.linalg.solve(Rw, B.T @ P_new)
        d = np.abs(P_new - P).max()
        history.append(d)
        P = P_new
        if d <= tol * max(1.0, np.abs(P).max()):
            return K
    raise NumericalError(f"Newton-Kleinman did not converge; last updates {history[-3:]}")


def lqr_output_gain(model, K_state):
    """Express a state-feedback gain through the measurements (needs rank C0 = n)."""
    C0 = model.C0
    if numerical_rank(C0) < model.n:
        raise ValidationError("an LQR baseline needs full-state measurements")
    return np.linalg.solve(C0.T @ C0, C0.T @ K_state.T).T
