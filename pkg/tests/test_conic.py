import hashlib
import json

import numpy as np
import pytest
import scipy.sparse as sp

from corpus import CORPUS
from sparsestab.conic import Cone, ConicProgram, smat, solve, svec
from sparsestab.conic.cones import cone_slices
from sparsestab.conic.lmi import Model, bmat, scaled


def kkt(prog, sol):
    """Independently re-evaluated residuals of ``G x + s = h, A x = b, c + G'z + A'y = 0``."""
    G, A = prog.G.toarray(), prog.A.toarray()
    rp = max(np.linalg.norm(G @ sol.x + sol.s - prog.h), np.linalg.norm(A @ sol.x - prog.b))
    rd = np.linalg.norm(prog.c + G.T @ sol.z + A.T @ sol.y)
    gap = abs(prog.c @ sol.x + prog.h @ sol.z + prog.b @ sol.y)
    scale = 1.0 + max(np.linalg.norm(prog.c), np.linalg.norm(prog.h), np.linalg.norm(prog.b))
    return rp / scale, rd / scale, gap / (1.0 + abs(prog.c @ sol.x))


def cone_violation(prog, v):
    worst = 0.0
    for cone, sl in zip(prog.cones, cone_slices(prog.cones)):
        u = v[sl]
        if cone.kind == "l":
            worst = max(worst, -u.min())
        elif cone.kind == "q":
            worst = max(worst, np.linalg.norm(u[1:]) - u[0])
        else:
            worst = max(worst, -np.linalg.eigvalsh(smat(u))[0])
    return worst


@pytest.mark.parametrize("build", CORPUS, ids=[f.__name__ for f in CORPUS])
def test_corpus(build):
    prog, value = build()
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.primal_objective == pytest.approx(value, abs=1e-6 * max(1, abs(value)))
    assert max(kkt(prog, sol)) <= 1e-7
    assert cone_violation(prog, sol.s) <= 1e-7
    assert cone_violation(prog, sol.z) <= 1e-7


def test_corpus_size():
    assert len(CORPUS) >= 20


# ----------------------------------------------------------------------------
# worked examples


def test_lp_dual_value():
    prog = ConicProgram(c=[1.0], G=[[-1.0]], h=[-3.0], cones=[Cone("l", 1)])
    sol = solve(prog)
    assert sol.x[0] == pytest.approx(3.0, abs=1e-8)
    assert sol.z[0] == pytest.approx(1.0, abs=1e-8)


def test_two_by_two_eigenvalue():
    m = Model()
    x = m.scalar("x")
    m.psd(bmat([[x, 1.0], [1.0, x]]))
    m.minimize(x)
    m.solve()
    assert float(np.ravel(m.x)[0]) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("vals,expected", [((2.0, 1.0, 1.0), "optimal"),
                                           ((1.0, 2.0, 1.0), "infeasible")])
def test_schur_block_feasibility(vals, expected):
    m = Model()
    beta, mm, q = m.scalar("beta"), m.scalar("m"), m.scalar("q")
    m.psd(bmat([[beta, mm], [mm, q]]), margin=1e-9)
    for v, val in zip((beta, mm, q), vals):
        m.eq(v, val)
    assert m.solve().status == expected


def test_scalar_block_is_one_by_one():
    m = Model()
    b = m.scalar("b")
    m.psd(bmat([[b]]))
    prog = m.compile()
    assert [c.size for c in prog.cones] == [1]


def test_unbounded_certificate():
    m = Model()
    x = m.scalar("x")
    m.minimize(x)
    sol = m.solve()
    assert sol.status == "unbounded"


def test_infeasible_lp():
    # x >= 1 and x <= 0
    prog = ConicProgram(c=[1.0], G=[[-1.0], [1.0]], h=[-1.0, 0.0], cones=[Cone("l", 2)])
    sol = solve(prog)
    assert sol.status == "infeasible"
    # Farkas certificate: z >= 0, G'z = 0, h'z < 0
    assert np.all(sol.z >= -1e-9)
    assert abs(prog.G.toarray().T @ sol.z).max() <= 1e-8 * np.abs(sol.z).max()
    assert prog.h @ sol.z < 0


def test_max_iter_reports_failure():
    prog, _ = CORPUS[16]()
    sol = solve(prog, max_iter=2)
    assert sol.status == "numerical_failure"
    assert sol.iterations == 2


def test_bad_tolerance():
    prog, _ = CORPUS[0]()
    with pytest.raises(ValueError):
        solve(prog, tol=0)


def test_malformed_program():
    with pytest.raises(ValueError):
        ConicProgram(c=[1.0, 2.0], G=[[1.0]], h=[0.0], cones=[Cone("l", 1)])
    with pytest.raises(ValueError):
        Cone("x", 2)


# ----------------------------------------------------------------------------
# modeling layer


def test_asymmetric_constraint_rejected():
    m = Model()
    x = m.scalar("x")
    with pytest.raises(ValueError, match="symmetric"):
        m.psd(bmat([[x, 1.0], [0.0, x]]))
        m.compile()


def test_margin_folded_into_constant():
    m = Model()
    t = m.scalar("t")
    m.psd(scaled(t, np.eye(2)), margin=0.25)
    m.minimize(t)
    m.solve()
    assert float(np.ravel(m.x)[0]) == pytest.approx(0.25, abs=1e-7)


def test_standard_form_round_trip(rng):
    m = Model()
    X = m.symmetric("X", 3)
    C = rng.normal(size=(3, 3))
    C = C + C.T
    m.psd(X + C)
    prog = m.compile()
    x = rng.normal(size=prog.n_vars)
    expr = X + C
    s = prog.h - prog.G @ x
    direct = (expr.coef @ x).reshape(3, 3) + expr.const
    assert np.allclose(smat(s), direct)


def test_svec_round_trip(rng):
    Y = rng.normal(size=(4, 4))
    Y = Y + Y.T
    v = svec(Y)
    assert v.size == 10
    assert np.allclose(smat(v), Y)
    Z = rng.normal(size=(4, 4))
    Z = Z + Z.T
    assert svec(Y) @ svec(Z) == pytest.approx(np.trace(Y @ Z))


def test_dump_load(tmp_path):
    prog, value = CORPUS[14]()
    p = tmp_path / "prog.json"
    prog.dump(p)
    again = ConicProgram.load(p)
    assert json.loads(p.read_text())["n_vars"] == prog.n_vars
    assert solve(again).primal_objective == pytest.approx(value, abs=1e-6)


# ----------------------------------------------------------------------------
# determinism


def _digest(sol):
    h = hashlib.sha256()
    for v in (sol.x, sol.s, sol.z, sol.y):
        h.update(np.ascontiguousarray(v).tobytes())
    return h.hexdigest()


def test_repeat_solves_identical():
    for build in CORPUS:
        prog, _ = build()
        assert _digest(solve(prog)) == _digest(solve(prog))


# ----------------------------------------------------------------------------
# external oracle


def _to_cvxopt(prog):
    """Expand packed PSD rows to the full column-major storage cvxopt expects."""
    G, h = prog.G.toarray(), prog.h
    rows_G, rows_h, dims = [], [], {"l": 0, "q": [], "s": []}
    for cone, sl in zip(prog.cones, cone_slices(prog.cones)):
        Gk, hk = G[sl], h[sl]
        if cone.kind == "l":
            dims["l"] += cone.dim
            rows_G.append(Gk)
            rows_h.append(hk)
        elif cone.kind == "q":
            dims["q"].append(cone.dim)
            rows_G.append(Gk)
            rows_h.append(hk)
        else:
            k = cone.dim
            idx = {}
            pos = 0
            for j in range(k):
                for i in range(j, k):
                    idx[(i, j)] = idx[(j, i)] = (pos, 1.0 if i == j else np.sqrt(2.0))
                    pos += 1
            full_G = np.zeros((k * k, G.shape[1]))
            full_h = np.zeros(k * k)
            for j in range(k):
                for i in range(k):
                    p, f = idx[(i, j)]
                    full_G[j * k + i] = Gk[p] / f
                    full_h[j * k + i] = hk[p] / f
            dims["s"].append(k)
            rows_G.append(full_G)
            rows_h.append(full_h)
    return np.vstack(rows_G), np.concatenate(rows_h), dims


@pytest.mark.parametrize("build", CORPUS, ids=[f.__name__ for f in CORPUS])
def test_matches_cvxopt(build):
    pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    prog, _ = build()
    G, h, dims = _to_cvxopt(prog)
    kw = {}
    if prog.A.shape[0]:
        kw = {"A": matrix(prog.A.toarray()), "b": matrix(prog.b)}
    solvers.options["show_progress"] = False
    ref = solvers.conelp(matrix(prog.c), matrix(G), matrix(h), dims, **kw)
    assert ref["status"] == "optimal"
    ours = solve(prog)
    assert ours.primal_objective == pytest.approx(ref["primal objective"], abs=1e-6)


def test_sparse_input_accepted():
    prog = ConicProgram(c=[1.0], G=sp.csc_matrix([[-1.0]]), h=[-2.0], cones=[Cone("l", 1)])
    assert solve(prog).x[0] == pytest.approx(2.0, abs=1e-8)
