import numpy as np
import pytest

from sparsestab.errors import NumericalError, ValidationError
from sparsestab.netmodel import LinearModel
from sparsestab.stochastic import (
    ClosedLoopModel,
    UncertaintySpec,
    assemble_closed_loop,
    multiplicative_channels,
    shift_coordinates,
)


def plant(A0, B0, C0):
    A0, B0, C0 = (np.atleast_2d(np.asarray(M, float)) for M in (A0, B0, C0))
    n, m, s = A0.shape[0], B0.shape[1], C0.shape[0]
    return LinearModel(A0, B0, C0, [f"x{i}" for i in range(n)],
                       [str(i) for i in range(m)], [f"y{i}" for i in range(s)])


def test_zero_gain_keeps_open_loop(smib):
    cl = assemble_closed_loop(smib, np.zeros((1, 2)), UncertaintySpec([1.0]))
    assert np.array_equal(cl.A, smib.A0)
    assert not cl.C.any()
    assert not any(ch.active for ch in multiplicative_channels(cl))


def test_identity_loop():
    cl = assemble_closed_loop(plant(-np.eye(2), np.eye(2), np.eye(2)), np.eye(2),
                              UncertaintySpec([0.1, 0.1]))
    assert np.array_equal(cl.A, -2 * np.eye(2))
    assert np.array_equal(cl.C, np.eye(2))


def test_smib_frequency_feedback(smib):
    C0 = np.array([[1.0, 0.0]])
    lm = smib.with_measurement(C0, ["omega"])
    cl = assemble_closed_loop(lm, [[0.5]], UncertaintySpec([0.0]))
    expect = smib.A0 - 0.5 * smib.B0 @ C0
    assert np.array_equal(cl.A, expect)
    assert cl.A[0, 0] == pytest.approx(smib.A0[0, 0] - 0.5)


def test_dimension_errors():
    p = plant(-np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(ValidationError):
        assemble_closed_loop(p, np.eye(3), UncertaintySpec([0.0, 0.0]))
    with pytest.raises(ValidationError):
        assemble_closed_loop(p, np.eye(2), UncertaintySpec([0.0]))


def test_spec_validation():
    with pytest.raises(ValidationError):
        UncertaintySpec([-0.1])
    with pytest.raises(ValidationError):
        UncertaintySpec([0.1], additive_channels=(2,))


def test_shift_with_zero_injection():
    cl = assemble_closed_loop(plant(-np.eye(2), np.eye(2), np.eye(2)), np.zeros((2, 2)),
                              UncertaintySpec([1.0, 1.0]))
    sh = shift_coordinates(cl)
    assert not sh.z_offset.any() and not sh.forcing.any()
    assert np.array_equal(sh.A, cl.A)


def test_shift_offset():
    cl = assemble_closed_loop(plant(-np.eye(2), np.eye(2), np.eye(2)), np.zeros((2, 2)),
                              UncertaintySpec([0.0, 0.0]), P_in0=[1.0, 2.0])
    sh = shift_coordinates(cl)
    assert np.allclose(sh.z_offset, [-1.0, -2.0])


def test_shift_requires_hurwitz():
    cl = assemble_closed_loop(plant(np.eye(2), np.eye(2), np.eye(2)), np.zeros((2, 2)),
                              UncertaintySpec([0.0, 0.0]))
    with pytest.raises(NumericalError, match="shift undefined"):
        shift_coordinates(cl)


def test_shift_residual(rng):
    for _ in range(10):
        A0 = rng.normal(size=(4, 4)) - 5 * np.eye(4)
        B0 = rng.normal(size=(4, 2))
        cl = assemble_closed_loop(plant(A0, B0, np.eye(4)), 0.1 * rng.normal(size=(2, 4)),
                                  UncertaintySpec([0.3, 0.2]), P_in0=rng.normal(size=2))
        sh = shift_coordinates(cl)
        r = cl.A @ (-sh.z_offset) + cl.B @ cl.P_in0
        assert np.abs(r).max() <= 1e-12 * max(1.0, np.abs(cl.B @ cl.P_in0).max())


def test_channel_extraction():
    cl = ClosedLoopModel(A=-np.eye(2), B=np.eye(2), C=np.array([[1.0, 2.0], [3.0, 4.0]]),
                         K0=np.eye(2), P_in0=np.zeros(2), spec=UncertaintySpec([1.0, 0.0]))
    ch = multiplicative_channels(cl)
    assert np.array_equal(ch[0].B, [1, 0]) and np.array_equal(ch[0].C, [1, 2])
    assert np.array_equal(ch[1].B, [0, 1]) and np.array_equal(ch[1].C, [3, 4])
    assert ch[0].active and not ch[1].active


def test_channel_reconstruction(rng):
    for _ in range(20):
        B, C = rng.normal(size=(3, 2)), rng.normal(size=(2, 3))
        cl = ClosedLoopModel(A=-np.eye(3), B=B, C=C, K0=np.eye(2), P_in0=np.zeros(2),
                             spec=UncertaintySpec([1.0, 1.0]))
        S = sum(np.outer(ch.B, ch.C) for ch in multiplicative_channels(cl))
        assert np.abs(S - B @ C).max() <= 1e-14
