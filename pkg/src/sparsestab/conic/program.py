"""Standard-form cone programs and their JSON dump format.

A :class:`ConicProgram` encodes::

    minimize    c @ x
    subject to  G @ x + s == h,   s in K
                A @ x == b

where ``K`` is the product of the cones listed in ``cones`` (in order),
partitioning the slack vector ``s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import Cone, total_size


@dataclass
class ConicProgram:
    c: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    cones: list
    A: sp.csc_matrix | None = None
    b: np.ndarray | None = None
    # metadata for callers (variable names, scalings); ignored by the solver
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.h = np.asarray(self.h, dtype=float).ravel()
        self.G = sp.csc_matrix(self.G, dtype=float)
        self.cones = [c if isinstance(c, Cone) else Cone(*c) for c in self.cones]
        n = self.c.size
        if self.A is None:
            self.A = sp.csc_matrix((0, n))
            self.b = np.zeros(0)
        self.A = sp.csc_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.G.shape != (total_size(self.cones), n):
            raise ValueError(
                f"G has shape {self.G.shape}, expected "
                f"({total_size(self.cones)}, {n})")
        if self.h.size != self.G.shape[0]:
            raise ValueError("h does not match the cone dimensions")
        if self.A.shape[1] != n or self.A.shape[0] != self.b.size:
            raise ValueError("A, b inconsistent with the variable vector")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def to_dict(self) -> dict:
        G = self.G.tocoo()
        A = self.A.tocoo()
        return {
            "n_vars": int(self.n_vars),
            "objective": self.c.tolist(),
            "cones": [[c.kind, c.dim] for c in self.cones],
            "G": {"rows": G.row.tolist(), "cols": G.col.tolist(),
                  "vals": G.data.tolist(), "shape": list(G.shape)},
            "h": self.h.tolist(),
            "A": {"rows": A.row.tolist(), "cols": A.col.tolist(),
                  "vals": A.data.tolist(), "shape": list(A.shape)},
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConicProgram":
        def trip(t):
            return sp.csc_matrix((t["vals"], (t["rows"], t["cols"])),
                                 shape=tuple(t["shape"]))
        return cls(c=np.array(d["objective"]), G=trip(d["G"]), h=np.array(d["h"]),
                   cones=[Cone(k, n) for k, n in d["cones"]],
                   A=trip(d["A"]), b=np.array(d["b"]))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ConicProgram":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ConicSolution:
    status: str            # optimal | infeasible | unbounded | numerical_failure
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
