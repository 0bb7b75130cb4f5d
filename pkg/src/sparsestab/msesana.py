"""Mean-square stability certificates for linear systems with multiplicative noise.

For ``dz = A z dt + sum_i sigma_i B_i C_i z dW_i`` (Ito), mean-square
exponential stability holds exactly when some ``P > 0`` satisfies

    A' P + P A + sum_i sigma_i^2 C_i' B_i' P B_i C_i < 0.

The strict inequalities are solved as a margin maximization: maximize ``t``
subject to ``P >= t I`` and ``-(lhs) >= t I`` with ``trace(P) = n``.  The
verdict is feasible when the optimal margin reaches ``eps = 1e-8 * ||A||``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .conic.lmi import Model, scaled, trace
from .errors import NumericalError, SolverError, ValidationError

log = logging.getLogger(__name__)


@dataclass
class MsesCertificate:
    feasible: bool
    form: str                  # "primal" (P) or "dual" (Q)
    matrix: np.ndarray | None  # P or Q
    margin: float              # optimal t; negative means no certificate
    eps: float
    decay_bounds: tuple | None = None  # (gamma1, gamma2) with E|z|^2 <= g1 e^{-g2 t}|z0|^2

    @property
    def P(self):
        return self.matrix if self.form == "primal" else None

    @property
    def Q(self):
        return self.matrix if self.form == "dual" else None

    def __bool__(self):
        return self.feasible


@dataclass
class ChannelMargin:
    bounds: np.ndarray     # per-channel allowable sigma (inf when the channel is inactive)
    binding: int | None    # index of the smallest finite bound


def _pairs(channels):
    out = []
    for ch in channels:
        if hasattr(ch, "B"):
            out.append((np.asarray(ch.B, float).ravel(), np.asarray(ch.C, float).ravel()))
        else:
            b, c = ch
            out.append((np.asarray(b, float).ravel(), np.asarray(c, float).ravel()))
    return out


def _active(pairs, sigma):
    sigma = np.asarray(sigma, dtype=float).ravel()
    if sigma.size != len(pairs):
        raise ValidationError("sigma length does not match the number of channels")
    if np.any(sigma < 0) or np.any(np.isnan(sigma)):
        raise ValidationError("sigma must be nonnegative")
    act = []
    for (b, c), s in zip(pairs, sigma):
        if s == 0 or not np.any(b) or not np.any(c):
            continue
        act.append((b, c, s))
    return act


def _check_square(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValidationError("A must be square")
    return A


def lmi_residual(A, channels, sigma, X, form="primal"):
    """Left-hand side of the MSES inequality evaluated at ``X``."""
    A = _check_square(A)
    act = _active(_pairs(channels), sigma)
    if form == "primal":
        R = A.T @ X + X @ A
        for b, c, s in act:
            R += s * s * (b @ X @ b) * np.outer(c, c)
    else:
        R = A @ X + X @ A.T
        for b, c, s in act:
            R += s * s * (c @ X @ c) * np.outer(b, b)
    return 0.5 * (R + R.T)


def _verify(A, channels, sigma, tol, form):
    A = _check_square(A)
    n = A.shape[0]
    act = _active(_pairs(channels), sigma)
    eps = 1e-8 * max(np.linalg.norm(A, 2), 1e-300)
    if any(np.isinf(s) for _, _, s in act):
        return MsesCertificate(False, form, None, -np.inf, eps)
    m = Model()
    X = m.symmetric("X", n)
    t = m.scalar("t")
    if form == "primal":
        L = A.T @ X + X @ A
        for b, c, s in act:
            # C_i' B_i' P B_i C_i = (b' P b) c c'
            L = L + (s * s) * (np.outer(c, b) @ X @ np.outer(b, c))
    else:
        L = A @ X + X @ A.T
        for b, c, s in act:
            L = L + (s * s) * (np.outer(b, c) @ X @ np.outer(c, b))
    tI = scaled(t, np.eye(n))
    m.psd(X - tI, name="positivity")
    m.psd(-L - tI, name="lyapunov")
    m.eq(trace(X), float(n), name="normalization")
    m.minimize(-t)
    sol = m.solve(tol=tol)
    if sol.status != "optimal":
        raise SolverError(f"MSES check ended with status {sol.status}", sol)
    Xv = X.value()
    Xv = 0.5 * (Xv + Xv.T)
    margin = float(m.value("t")[0])
    feas = margin >= eps
    bounds = None
    if feas:
        ev = np.linalg.eigvalsh(Xv)
        bounds = (float(ev[-1] / ev[0]), float(margin / ev[-1]))
    return MsesCertificate(bool(feas), form, Xv, margin, eps, bounds)


def verify_mses(A, channels, sigma, tol: float = 1e-8) -> MsesCertificate:
    """Primal certificate ``P``; ``feasible`` is False when no margin is attainable."""
    return _verify(A, channels, sigma, tol, "primal")


def verify_mses_dual(A, channels, sigma, tol: float = 1e-8) -> MsesCertificate:
    """Dual certificate ``Q`` with ``A Q + Q A' + sum s^2 B_i C_i Q C_i' B_i' < 0``."""
    return _verify(A, channels, sigma, tol, "dual")


def critical_sigma_search(A, channels, direction, tol: float = 1e-8,
                          rel_tol: float = 1e-3, cap: float = 1e6) -> float:
    """Largest ``t`` with MSES at ``t * direction``; ``inf`` when none is found below ``cap``.

    The boundary is bracketed by doubling and then narrowed until the bracket
    is narrower than ``rel_tol / 2`` relative to its lower end.  Inside the
    bracket the optimal margin is interpolated linearly in ``t**2`` (sigma
    enters the inequality squared), with plain halving as a fallback.
    """
    A = _check_square(A)
    d = np.asarray(direction, dtype=float).ravel()
    if np.any(d < 0) or not np.any(d > 0):
        raise ValidationError("direction must be nonnegative and nonzero")
    if np.linalg.eigvals(A).real.max() >= 0:
        raise NumericalError("A is not Hurwitz; there is no stable region to search")
    pairs = _pairs(channels)
    if not _active(pairs, d):
        return np.inf

    def f(t):
        c = verify_mses(A, pairs, t * d, tol)
        return c.margin - c.eps

    lo, f_lo = 0.0, f(0.0)
    hi, f_hi = 1.0, f(1.0)
    while f_hi >= 0:
        lo, f_lo = hi, f_hi
        hi = 2.0 * hi
        if hi > cap:
            log.info("no MSES boundary below cap %.3g", cap)
            return np.inf
        f_hi = f(hi)

    def narrow_enough():
        return hi - lo <= 0.5 * rel_tol * lo

    side = 0
    while not narrow_enough():
        w = hi - lo
        u_lo, u_hi = lo * lo, hi * hi
        est = np.sqrt(u_lo + (u_hi - u_lo) * f_lo / (f_lo - f_hi))
        if side != 0:
            # the previous probe landed on the same side; jump just past the
            # estimate to close the bracket from the other end
            est = est * (1.0 + 0.2 * rel_tol * side)
        if not lo + 0.001 * w < est < hi - 0.001 * w or lo == 0.0 and est < 0.05 * hi:
            est = 0.5 * (lo + hi)
        fe = f(est)
        if fe >= 0:
            lo, f_lo = est, fe
            side = 1
        else:
            hi, f_hi = est, fe
            side = -1
        if hi < 1e-12:
            return 0.0
    return 0.5 * (lo + hi)


def channel_margins(A, channels, tol: float = 1e-8) -> ChannelMargin:
    """Per-axis boundaries: search along each unit direction separately."""
    pairs = _pairs(channels)
    b = np.empty(len(pairs))
    for i in range(len(pairs)):
        e = np.zeros(len(pairs))
        e[i] = 1.0
        b[i] = critical_sigma_search(A, pairs, e, tol)
    finite = np.flatnonzero(np.isfinite(b))
    binding = int(finite[np.argmin(b[finite])]) if finite.size else None
    return ChannelMargin(b, binding)


def solve_lyapunov(A, W) -> np.ndarray:
    """Solve ``A Q + Q A' + W = 0`` for Hurwitz ``A``."""
    A = _check_square(A)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != A.shape:
        raise ValidationError("W must have the same shape as A")
    if not np.allclose(W, W.T, atol=1e-12 * max(1.0, np.abs(W).max())):
        raise ValidationError("W must be symmetric")
    ev = np.linalg.eigvals(A)
    scale = max(np.abs(ev).max(), 1.0)
    if np.abs(ev[:, None] + ev[None, :]).min() < 1e-12 * scale:
        raise NumericalError("Lyapunov equation is ill-posed (eigenvalues sum to zero)")
    Q = solve_continuous_lyapunov(A, -W)
    return 0.5 * (Q + Q.T)
