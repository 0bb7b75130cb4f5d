"""Closed-loop stochastic system built from a plant, a gain and noise levels.

The closed loop is read as the Ito SDE

    dz = A z dt + sum_i sigma_i B_i C_i z dW_i + (forcing) dt + B dzeta

with ``A = A0 - B0 K0 C0``, ``B = B0`` and ``C = K0 C0``.  ``B_i`` is the i-th
column of ``B`` and ``C_i`` the i-th row of ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class UncertaintySpec:
    sigma: np.ndarray
    additive_channels: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float).ravel()
        if np.any(s < 0) or np.any(np.isnan(s)):
            raise ValidationError("sigma entries must be nonnegative")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "additive_channels",
                           tuple(int(i) for i in self.additive_channels))
        for i in self.additive_channels:
            if not 0 <= i < s.size:
                raise ValidationError(f"additive channel {i} out of range")


@dataclass(frozen=True)
class ClosedLoopModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K0: np.ndarray
    P_in0: np.ndarray
    spec: UncertaintySpec
    labels: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class ShiftedModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K0: np.ndarray
    P_in0: np.ndarray
    spec: UncertaintySpec
    z_offset: np.ndarray
    # the multiplicative noise acting on the offset leaves an additive term
    # -sigma_i B_i C_i z_offset dW_i in the shifted coordinates
    forcing: np.ndarray
    labels: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def assemble_closed_loop(model, K0, spec: UncertaintySpec, P_in0=None) -> ClosedLoopModel:
    A0, B0, C0 = model.A0, model.B0, model.C0
    K0 = np.atleast_2d(np.asarray(K0, dtype=float))
    m, s = B0.shape[1], C0.shape[0]
    if K0.shape != (m, s):
        raise ValidationError(f"gain must be {m}x{s}, got {K0.shape}")
    if spec.sigma.size != m:
        raise ValidationError(f"sigma has length {spec.sigma.size}, expected {m}")
    P_in0 = np.zeros(m) if P_in0 is None else np.asarray(P_in0, dtype=float).ravel()
    if P_in0.size != m:
        raise ValidationError("P_in0 length does not match the injection channels")
    C = K0 @ C0
    A = A0 - B0 @ C
    labels = {"states": list(getattr(model, "state_labels", [])),
              "injections": list(getattr(model, "injection_labels", []))}
    return ClosedLoopModel(A=A, B=B0.copy(), C=C, K0=K0, P_in0=P_in0,
                           spec=spec, labels=labels)


def shift_coordinates(cl: ClosedLoopModel) -> ShiftedModel:
    ev = np.linalg.eigvals(cl.A)
    if ev.real.max() >= 0:
        raise NumericalError("shift undefined: closed-loop matrix is not Hurwitz")
    if np.linalg.cond(cl.A) > 1e14:
        raise NumericalError("closed-loop matrix is numerically singular")
    z_off = np.linalg.solve(cl.A, cl.B @ cl.P_in0)
    # channel i noise on the offset: -sigma_i * B_i * (C_i z_off)
    forcing = -cl.B * (cl.spec.sigma * (cl.C @ z_off))[None, :]
    return ShiftedModel(A=cl.A, B=cl.B, C=cl.C, K0=cl.K0, P_in0=cl.P_in0,
                        spec=cl.spec, z_offset=z_off, forcing=forcing,
                        labels=cl.labels)


@dataclass(frozen=True)
class Channel:
    B: np.ndarray   # n-vector
    C: np.ndarray   # n-vector (row)
    sigma: float
    active: bool


def multiplicative_channels(cl) -> list[Channel]:
    out = []
    for i in range(cl.B.shape[1]):
        Bi = cl.B[:, i].copy()
        Ci = cl.C[i, :].copy()
        sig = float(cl.spec.sigma[i])
        active = sig != 0.0 and np.any(Ci != 0.0) and np.any(Bi != 0.0)
        out.append(Channel(Bi, Ci, sig, bool(active)))
    return out
