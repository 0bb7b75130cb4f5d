"""Twenty small cone programs with objective values known in closed form."""

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from sparsestab.conic import Cone, ConicProgram, svec
from sparsestab.conic.lmi import Model, scaled, trace


def _lp(c, G, h, A=None, b=None):
    G = np.atleast_2d(np.asarray(G, float))
    return ConicProgram(c=c, G=G, h=h, cones=[Cone("l", G.shape[0])], A=A, b=b)


def _model(build):
    m = Model()
    build(m)
    return m.compile()


def lp_bound():
    return _lp([1.0], [[-1.0]], [-3.0]), 3.0


def lp_two_cuts():
    # x1 + 2 x2 >= 2, 2 x1 + x2 >= 2, x >= 0
    G = [[-1, -2], [-2, -1], [-1, 0], [0, -1]]
    return _lp([1.0, 1.0], G, [-2, -2, 0, 0]), 4.0 / 3.0


def lp_simplex():
    A = np.ones((1, 3))
    return _lp([3.0, 1.0, 2.0], -np.eye(3), np.zeros(3), A, [1.0]), 1.0


def lp_box():
    G = np.vstack([np.eye(2), -np.eye(2)])
    return _lp([-1.0, -2.0], G, [1, 1, 0, 0]), -3.0


def lp_abs():
    # min t + x  with t >= |x - 2|, x >= 0  -> 2
    G = [[1, -1], [-1, -1], [-1, 0]]
    return _lp([1.0, 1.0], G, [2, -2, 0]), 2.0


def lp_max_budget():
    # max x1 + x2 with x1 + x2 + x3 = 1, x >= 0
    A = np.ones((1, 3))
    return _lp([-1.0, -1.0, 0.0], -np.eye(3), np.zeros(3), A, [1.0]), -1.0


def soc_norm():
    G = np.array([[-1.0], [0.0], [0.0]])
    return ConicProgram(c=[1.0], G=G, h=[0, 3, 4], cones=[Cone("q", 3)]), 5.0


def soc_disc():
    # min x1 + x2 over the unit disc
    G = np.array([[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]])
    return ConicProgram(c=[1.0, 1.0], G=G, h=[1, 0, 0], cones=[Cone("q", 3)]), -np.sqrt(2)


def soc_plane_distance():
    p = np.array([1.0, 2.0, 2.0])
    a = np.ones(3)

    def build(m):
        t, x = m.scalar("t"), m.vector("x", 3)
        m.soc(t, x - p.reshape(3, 1))
        m.eq(a.reshape(1, 3) @ x, 0.0)
        m.minimize(t)
    return _model(build), abs(a @ p) / np.linalg.norm(a)


def soc_line():
    # min ||x|| with x1 + x2 = 2
    def build(m):
        t, x = m.scalar("t"), m.vector("x", 2)
        m.soc(t, x)
        m.eq(np.ones((1, 2)) @ x, 2.0)
        m.minimize(t)
    return _model(build), np.sqrt(2.0)


def soc_affine():
    # min ||(2x - 1, x)||, attained at x = 0.4
    def build(m):
        t, x = m.scalar("t"), m.scalar("x")
        u = np.array([[2.0], [1.0]]) @ x - np.array([[1.0], [0.0]])
        m.soc(t, u)
        m.minimize(t)
    return _model(build), np.sqrt(0.2)


def soc_two_cones():
    # min |x - 1| + |x + 1| = 2
    def build(m):
        t1, t2, x = m.scalar("t1"), m.scalar("t2"), m.scalar("x")
        m.soc(t1, x - 1.0)
        m.soc(t2, x + 1.0)
        m.minimize(t1 + t2)
    return _model(build), 2.0


def sdp_two_by_two():
    G = -np.array([svec(np.eye(2))]).T
    h = svec(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return ConicProgram(c=[1.0], G=G, h=h, cones=[Cone("s", 2)]), 1.0


_C3 = np.array([[2.0, -1.0, 0.5], [-1.0, 3.0, 0.2], [0.5, 0.2, 1.0]])
_C4 = np.array([[4.0, 1.0, 0.0, 0.3], [1.0, 2.0, 0.5, 0.0],
                [0.0, 0.5, 3.0, -0.7], [0.3, 0.0, -0.7, 1.5]])


def sdp_lambda_max():
    def build(m):
        t = m.scalar("t")
        m.psd(scaled(t, np.eye(3)) - _C3)
        m.minimize(t)
    return _model(build), np.linalg.eigvalsh(_C3)[-1]


def sdp_trace_min():
    def build(m):
        X = m.symmetric("X", 3)
        m.psd(X)
        m.eq(trace(X), 1.0)
        m.minimize(trace(_C3 @ X))
    return _model(build), np.linalg.eigvalsh(_C3)[0]


def sdp_lambda_min():
    def build(m):
        t = m.scalar("t")
        m.psd(_C4 - scaled(t, np.eye(4)))
        m.minimize(-t)
    return _model(build), -np.linalg.eigvalsh(_C4)[0]


_A3 = np.array([[-1.0, 2.0, 0.0], [0.0, -2.0, 1.0], [0.5, 0.0, -3.0]])


def sdp_lyapunov():
    # every feasible P dominates the Lyapunov solution
    def build(m):
        P = m.symmetric("P", 3)
        m.psd(P)
        m.psd(-(_A3.T @ P + P @ _A3) - np.eye(3))
        m.minimize(trace(P))
    P = solve_continuous_lyapunov(_A3.T, -np.eye(3))
    return _model(build), float(np.trace(P))


def sdp_schur():
    # [[t, a], [a, 1]] >= 0  <=>  t >= a^2
    def build(m):
        t = m.scalar("t")
        m.psd(scaled(t, np.array([[1.0, 0.0], [0.0, 0.0]]))
              + np.array([[0.0, 1.5], [1.5, 1.0]]))
        m.minimize(t)
    return _model(build), 2.25


def mixed_cones():
    def build(m):
        x1, x2, x3 = m.scalar("x1"), m.scalar("x2"), m.scalar("x3")
        m.nonneg(x1 - 1.0)
        m.soc(x2, np.array([[0.0], [0.0]]) @ x2 + np.array([[3.0], [4.0]]))
        m.psd(scaled(x3, np.eye(2)) + np.array([[0.0, 2.0], [2.0, 0.0]]))
        m.minimize(x1 + x2 + x3)
    return _model(build), 8.0


def sdp_equality_offdiag():
    # min X12 with X11 = 1, X22 = 4 -> -sqrt(1 * 4)
    def build(m):
        X = m.symmetric("X", 2)
        m.psd(X)
        m.eq(X[0, 0], 1.0)
        m.eq(X[1, 1], 4.0)
        m.minimize(X[0, 1])
    return _model(build), -2.0


CORPUS = [lp_bound, lp_two_cuts, lp_simplex, lp_box, lp_abs, lp_max_budget,
          soc_norm, soc_disc, soc_plane_distance, soc_line, soc_affine, soc_two_cones,
          sdp_two_by_two, sdp_lambda_max, sdp_trace_min, sdp_lambda_min, sdp_lyapunov,
          sdp_schur, mixed_cones, sdp_equality_offdiag]
