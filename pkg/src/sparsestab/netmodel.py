"""Network-preserving swing model: case files, equilibrium and linearization.

Generator (internal) buses carry second-order swing dynamics and load buses
first-order frequency-dependent dynamics::

    M_i dw_i/dt + D_i w_i = P_in_i - P_e_i(delta)    i generator, d delta_i/dt = w_i
    D_i d delta_i/dt      = P_in_i - P_e_i(delta)    i load
    P_e_i = sum_j E_i E_j Y_ij cos(delta_i - delta_j - theta_ij)

with ``P_in = P_g`` at generators and ``P_in = -P_d`` at loads.  The reduced
state is ``(w_i for generators, delta_i - delta_R for buses other than R)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import NumericalError, ValidationError

GEN = "generator-internal"
LOAD = "load"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    E: float


@dataclass(frozen=True)
class Line:
    src: int
    dst: int
    Y: float
    theta: float


@dataclass(frozen=True)
class Generator:
    bus: int
    M: float
    D: float
    P_g: float


@dataclass(frozen=True)
class Load:
    bus: int
    D: float
    P_d: float
    P_cd0: float
    P_ncd0: float


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple
    lines: tuple
    generators: tuple
    loads: tuple
    reference_bus: int
    base_mva: float = 100.0
    frequency_hz: float = 60.0
    injection_buses: tuple = ()
    name: str = ""

    # -- index helpers -------------------------------------------------------
    @cached_property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    @cached_property
    def index(self) -> dict:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def gen_buses(self) -> list:
        return [g.bus for g in self.generators]

    @cached_property
    def load_buses(self) -> list:
        return [ld.bus for ld in self.loads]

    @cached_property
    def arrays(self) -> dict:
        idx = self.index
        E = np.array([b.E for b in self.buses])
        li = np.array([idx[ln.src] for ln in self.lines], dtype=int)
        lj = np.array([idx[ln.dst] for ln in self.lines], dtype=int)
        K = np.array([ln.Y for ln in self.lines]) * E[li] * E[lj]
        th = np.array([ln.theta for ln in self.lines])
        return {"E": E, "i": li, "j": lj, "K": K, "theta": th}

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_states(self) -> int:
        return len(self.generators) + self.n_bus - 1


def _schema():
    with resources.files("sparsestab.schemas").joinpath("case.schema.json").open() as fh:
        return json.load(fh)


def case_from_dict(d: dict) -> NetworkCase:
    try:
        jsonschema.validate(d, _schema())
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValidationError(f"case schema violation at {path}: {err.message}") from None
    buses = tuple(Bus(int(b["id"]), b["kind"], float(b["E"])) for b in d["buses"])
    lines = tuple(Line(int(ln["from"]), int(ln["to"]), float(ln["Y"]), float(ln["theta"]))
                  for ln in d["lines"])
    gens = tuple(Generator(int(g["bus"]), float(g["M"]), float(g["D"]), float(g["P_g"]))
                 for g in d["generators"])
    loads = tuple(Load(int(ld["bus"]), float(ld["D"]), float(ld["P_d"]),
                       float(ld["P_cd0"]), float(ld["P_ncd0"])) for ld in d["loads"])
    inj = d.get("injection_buses")
    if inj is None:
        inj = [ld.bus for ld in loads]
    case = NetworkCase(buses=buses, lines=lines, generators=gens, loads=loads,
                       reference_bus=int(d["reference_bus"]),
                       base_mva=float(d.get("base_mva", 100.0)),
                       frequency_hz=float(d.get("frequency_hz", 60.0)),
                       injection_buses=tuple(int(b) for b in inj),
                       name=str(d.get("name", "")))
    validate_case(case)
    return case


def case_to_dict(case: NetworkCase) -> dict:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "frequency_hz": case.frequency_hz,
        "buses": [{"id": b.id, "kind": b.kind, "E": b.E} for b in case.buses],
        "lines": [{"from": ln.src, "to": ln.dst, "Y": ln.Y, "theta": ln.theta}
                  for ln in case.lines],
        "generators": [{"bus": g.bus, "M": g.M, "D": g.D, "P_g": g.P_g}
                       for g in case.generators],
        "loads": [{"bus": ld.bus, "D": ld.D, "P_d": ld.P_d, "P_cd0": ld.P_cd0,
                   "P_ncd0": ld.P_ncd0} for ld in case.loads],
        "reference_bus": case.reference_bus,
        "injection_buses": list(case.injection_buses),
    }


def validate_case(case: NetworkCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise ValidationError("buses: duplicate bus id")
    kinds = {b.id: b.kind for b in case.buses}
    for k, b in enumerate(case.buses):
        if b.E <= 0:
            raise ValidationError(f"buses[{k}].E must be positive")
    gset, lset = set(), set()
    for k, g in enumerate(case.generators):
        if kinds.get(g.bus) != GEN:
            raise ValidationError(f"generators[{k}].bus {g.bus} is not a generator-internal bus")
        if not g.M > 0:
            raise ValidationError(f"generators[{k}].M must be positive (bus {g.bus})")
        if not g.D > 0:
            raise ValidationError(f"generators[{k}].D must be positive (bus {g.bus})")
        if g.bus in gset:
            raise ValidationError(f"generators[{k}]: duplicate generator at bus {g.bus}")
        gset.add(g.bus)
    for k, ld in enumerate(case.loads):
        if kinds.get(ld.bus) != LOAD:
            raise ValidationError(f"loads[{k}].bus {ld.bus} is not a load bus")
        if not ld.D > 0:
            raise ValidationError(f"loads[{k}].D must be positive (bus {ld.bus})")
        if abs(ld.P_d - ld.P_cd0 - ld.P_ncd0) > 1e-9 * max(1.0, abs(ld.P_d)):
            raise ValidationError(f"loads[{k}]: P_d must equal P_cd0 + P_ncd0 (bus {ld.bus})")
        if ld.bus in lset:
            raise ValidationError(f"loads[{k}]: duplicate load at bus {ld.bus}")
        lset.add(ld.bus)
    if gset & lset:
        raise ValidationError("generator and load bus sets must be disjoint")
    for b in case.buses:
        if b.kind == GEN and b.id not in gset:
            raise ValidationError(f"bus {b.id} is generator-internal but has no generator record")
        if b.kind == LOAD and b.id not in lset:
            raise ValidationError(f"bus {b.id} is a load bus but has no load record")
    if case.reference_bus not in kinds:
        raise ValidationError(f"reference_bus {case.reference_bus} does not exist")
    table = {}
    for k, ln in enumerate(case.lines):
        if ln.src not in kinds or ln.dst not in kinds:
            raise ValidationError(f"lines[{k}] references an unknown bus")
        if ln.Y < 0:
            raise ValidationError(f"lines[{k}].Y must be nonnegative")
        table[(ln.src, ln.dst)] = (ln.Y, ln.theta)
    for (i, j), v in table.items():
        if i != j and table.get((j, i)) != v:
            raise ValidationError(f"lines: entry ({i},{j}) has no matching ({j},{i}) entry")
    for b in case.injection_buses:
        if b not in kinds:
            raise ValidationError(f"injection_buses: unknown bus {b}")


def load_case(path) -> NetworkCase:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"case file not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ValidationError(f"cannot parse {path}: {err}") from None
    return case_from_dict(d)


def bundled_case(name: str) -> NetworkCase:
    """One of the shipped cases: ``smib``, ``case9`` or ``case39``."""
    stem = name[:-5] if name.endswith(".json") else name
    with resources.as_file(resources.files("sparsestab.data").joinpath(stem + ".json")) as p:
        return load_case(p)


# ----------------------------------------------------------------------------
# nonlinear model


def electrical_power(case: NetworkCase, delta) -> np.ndarray:
    """``P_e`` at every bus; ``delta`` may carry leading batch dimensions."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape[-1] != case.n_bus:
        raise ValidationError(f"delta has {delta.shape[-1]} entries, expected {case.n_bus}")
    a = case.arrays
    terms = a["K"] * np.cos(delta[..., a["i"]] - delta[..., a["j"]] - a["theta"])
    out = np.zeros(delta.shape)
    # accumulate in line order so the result does not depend on batching
    for k in range(a["i"].size):
        out[..., a["i"][k]] += terms[..., k]
    return out


def _power_jacobian(case: NetworkCase, delta) -> np.ndarray:
    a = case.arrays
    J = np.zeros((case.n_bus, case.n_bus))
    s = a["K"] * np.sin(delta[a["i"]] - delta[a["j"]] - a["theta"])
    off = a["i"] != a["j"]
    np.add.at(J, (a["i"][off], a["j"][off]), s[off])
    np.add.at(J, (a["i"][off], a["i"][off]), -s[off])
    return J


class Layout:
    """State bookkeeping for the reduced model."""

    def __init__(self, case: NetworkCase):
        self.case = case
        idx = case.index
        self.ng = len(case.generators)
        self.gen_idx = np.array([idx[g.bus] for g in case.generators], dtype=int)
        self.M = np.array([g.M for g in case.generators])
        self.Dg = np.array([g.D for g in case.generators])
        self.R = idx[case.reference_bus]
        self.ang_idx = np.array([k for k in range(case.n_bus) if k != self.R], dtype=int)
        self.n = self.ng + self.ang_idx.size
        # damping per bus (generator entries unused in the first-order rows)
        self.Dbus = np.zeros(case.n_bus)
        self.is_load = np.zeros(case.n_bus, dtype=bool)
        for ld in case.loads:
            self.Dbus[idx[ld.bus]] = ld.D
            self.is_load[idx[ld.bus]] = True
        self.gen_pos = -np.ones(case.n_bus, dtype=int)
        self.gen_pos[self.gen_idx] = np.arange(self.ng)

    @property
    def state_labels(self):
        ids = self.case.bus_ids
        R = self.case.reference_bus
        return ([f"omega_{ids[k]}" for k in self.gen_idx]
                + [f"delta_{ids[k]}-delta_{R}" for k in self.ang_idx])

    def full_angles(self, x):
        x = np.asarray(x, dtype=float)
        d = np.zeros(x.shape[:-1] + (self.case.n_bus,))
        d[..., self.ang_idx] = x[..., self.ng:]
        return d

    def bus_rates(self, x, P_in):
        """``d delta / dt`` at every bus (absolute, not relative to R)."""
        x = np.asarray(x, dtype=float)
        delta = self.full_angles(x)
        Pe = electrical_power(self.case, delta)
        rate = np.zeros_like(delta)
        rate[..., self.is_load] = ((P_in - Pe)[..., self.is_load] / self.Dbus[self.is_load])
        rate[..., self.gen_idx] = x[..., :self.ng]
        return rate, Pe

    def rhs(self, x, P_in):
        """``F(x) + B P_in`` with ``P_in`` given per bus."""
        x = np.asarray(x, dtype=float)
        P_in = np.asarray(P_in, dtype=float)
        rate, Pe = self.bus_rates(x, P_in)
        w = x[..., :self.ng]
        dw = (P_in[..., self.gen_idx] - Pe[..., self.gen_idx] - self.Dg * w) / self.M
        dang = rate[..., self.ang_idx] - rate[..., [self.R]]
        return np.concatenate([dw, dang], axis=-1)

    def jacobian(self, x):
        ng, nb = self.ng, self.case.n_bus
        delta = self.full_angles(x)
        Jp = _power_jacobian(self.case, delta)         # dPe/d delta (bus x bus)
        Jp_red = Jp[:, self.ang_idx]                   # delta_R is pinned
        # d rate / dx for every bus
        dR = np.zeros((nb, self.n))
        dR[self.is_load, ng:] = -Jp_red[self.is_load] / self.Dbus[self.is_load, None]
        dR[self.gen_idx, np.arange(ng)] = 1.0
        J = np.zeros((self.n, self.n))
        J[:ng, :ng] = -np.diag(self.Dg / self.M)
        J[:ng, ng:] = -Jp_red[self.gen_idx] / self.M[:, None]
        J[ng:] = dR[self.ang_idx] - dR[self.R]
        return J

    def rate_maps(self, x):
        """Linearized bus rates: ``d rate = Fx dx + Fu dP_in`` (bus x n, bus x bus)."""
        ng, nb = self.ng, self.case.n_bus
        Jp = _power_jacobian(self.case, self.full_angles(x))[:, self.ang_idx]
        Fx = np.zeros((nb, self.n))
        Fx[self.is_load, ng:] = -Jp[self.is_load] / self.Dbus[self.is_load, None]
        Fx[self.gen_idx, np.arange(ng)] = 1.0
        Fu = np.zeros((nb, nb))
        Fu[self.is_load, self.is_load] = 1.0 / self.Dbus[self.is_load]
        return Fx, Fu

    def input_matrix(self):
        """``B`` mapping per-bus injections into the reduced state."""
        ng, nb = self.ng, self.case.n_bus
        dR = np.zeros((nb, nb))
        dR[self.is_load, self.is_load] = 1.0 / self.Dbus[self.is_load]
        B = np.zeros((self.n, nb))
        B[np.arange(ng), self.gen_idx] = 1.0 / self.M
        B[ng:] = dR[self.ang_idx] - dR[self.R]
        return B

    def bus_frequencies(self, x, P_in):
        """Frequency deviation (rad/s) at every bus; load buses via their algebraic row."""
        rate, _ = self.bus_rates(x, P_in)
        return rate


def nominal_injection(case: NetworkCase) -> np.ndarray:
    """Per-bus ``P_in = P_g - P_d``."""
    P = np.zeros(case.n_bus)
    for g in case.generators:
        P[case.index[g.bus]] += g.P_g
    for ld in case.loads:
        P[case.index[ld.bus]] -= ld.P_d
    return P


@dataclass
class EquilibriumPoint:
    x_e: np.ndarray
    residual_norm: float
    delta: np.ndarray = field(default=None)     # full bus angles, reference at 0
    P_in: np.ndarray = field(default=None)      # per-bus injection used
    iterations: int = 0


def solve_equilibrium(case: NetworkCase, P_in0=None, tol: float = 1e-10,
                      max_iter: int = 50) -> EquilibriumPoint:
    """Full-step Newton on the angles with the reference angle pinned to zero."""
    lay = Layout(case)
    P = nominal_injection(case) if P_in0 is None else np.asarray(P_in0, dtype=float).ravel()
    if P.size != case.n_bus:
        raise ValidationError(f"P_in0 must have one entry per bus ({case.n_bus})")
    keep = lay.ang_idx
    delta = np.zeros(case.n_bus)
    x = np.zeros(lay.n)

    def full_residual(x):
        return lay.rhs(x, P)

    res = np.inf
    for it in range(max_iter + 1):
        mis = P[keep] - electrical_power(case, delta)[keep]
        x[lay.ng:] = delta[keep]
        res = float(np.abs(full_residual(x)).max())
        if res <= tol:
            return EquilibriumPoint(x.copy(), res, delta.copy(), P.copy(), it)
        if it == max_iter:
            break
        J = _power_jacobian(case, delta)[np.ix_(keep, keep)]
        try:
            step = np.linalg.solve(J, mis)
        except np.linalg.LinAlgError:
            raise NumericalError("singular power-flow Jacobian") from None
        if not np.all(np.isfinite(step)):
            raise NumericalError("singular power-flow Jacobian")
        delta[keep] += step
    raise NumericalError(f"equilibrium Newton did not converge in {max_iter} iterations "
                         f"(residual {res:.3e})")


# ----------------------------------------------------------------------------
# linear model


@dataclass
class LinearModel:
    A0: np.ndarray
    B0: np.ndarray
    C0: np.ndarray
    state_labels: list
    injection_labels: list
    measurement_labels: list
    P_in0: np.ndarray | None = None       # nominal injection on the m channels
    B_bus: np.ndarray | None = None       # n x n_bus map used for scenario events
    bus_ids: list | None = None
    x_e: np.ndarray | None = None
    frequency_hz: float = 60.0
    name: str = ""
    rate_state: np.ndarray | None = None  # bus rates from states (n_bus x n)
    rate_input: np.ndarray | None = None  # bus rates from bus injections (n_bus x n_bus)
    injection_index: list | None = None   # bus position of each injection channel

    def __post_init__(self):
        self.A0 = np.atleast_2d(np.asarray(self.A0, dtype=float))
        self.B0 = np.atleast_2d(np.asarray(self.B0, dtype=float))
        self.C0 = np.atleast_2d(np.asarray(self.C0, dtype=float))
        n = self.A0.shape[0]
        if self.A0.shape != (n, n):
            raise ValidationError("A0 must be square")
        if self.B0.shape[0] != n:
            raise ValidationError("B0 must have n rows")
        if self.C0.shape[1] != n:
            raise ValidationError("C0 must have n columns")
        if self.P_in0 is None:
            self.P_in0 = np.zeros(self.B0.shape[1])

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def m(self):
        return self.B0.shape[1]

    @property
    def s(self):
        return self.C0.shape[0]

    def with_measurement(self, C0, labels=None) -> "LinearModel":
        C0 = np.atleast_2d(np.asarray(C0, dtype=float))
        labels = labels or [f"y{k}" for k in range(C0.shape[0])]
        return LinearModel(self.A0, self.B0, C0, self.state_labels, self.injection_labels,
                           labels, self.P_in0, self.B_bus, self.bus_ids, self.x_e,
                           self.frequency_hz, self.name, self.rate_state, self.rate_input,
                           self.injection_index)

    def to_dict(self) -> dict:
        d = {"name": self.name, "n": self.n, "m": self.m, "s": self.s,
             "A0": self.A0.tolist(), "B0": self.B0.tolist(), "C0": self.C0.tolist(),
             "state_labels": list(self.state_labels),
             "injection_labels": list(self.injection_labels),
             "measurement_labels": list(self.measurement_labels),
             "P_in0": self.P_in0.tolist(), "frequency_hz": self.frequency_hz}
        if self.B_bus is not None:
            d["B_bus"] = self.B_bus.tolist()
            d["bus_ids"] = list(self.bus_ids)
        if self.x_e is not None:
            d["x_e"] = self.x_e.tolist()
        if self.rate_state is not None:
            d["rate_state"] = self.rate_state.tolist()
            d["rate_input"] = self.rate_input.tolist()
            d["injection_index"] = list(self.injection_index)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        A0 = np.atleast_2d(np.asarray(d["A0"], dtype=float))
        n = A0.shape[0]
        B0 = np.atleast_2d(np.asarray(d["B0"], dtype=float))
        C0 = np.atleast_2d(np.asarray(d.get("C0", np.eye(n)), dtype=float))
        return cls(
            A0=A0, B0=B0, C0=C0,
            state_labels=d.get("state_labels", [f"x{k}" for k in range(n)]),
            injection_labels=d.get("injection_labels", [str(k) for k in range(B0.shape[1])]),
            measurement_labels=d.get("measurement_labels", [f"y{k}" for k in range(C0.shape[0])]),
            P_in0=np.asarray(d["P_in0"], dtype=float) if "P_in0" in d else None,
            B_bus=np.asarray(d["B_bus"], dtype=float) if "B_bus" in d else None,
            bus_ids=d.get("bus_ids"),
            x_e=np.asarray(d["x_e"], dtype=float) if "x_e" in d else None,
            frequency_hz=float(d.get("frequency_hz", 60.0)),
            name=d.get("name", ""),
            rate_state=np.asarray(d["rate_state"], dtype=float) if "rate_state" in d else None,
            rate_input=np.asarray(d["rate_input"], dtype=float) if "rate_input" in d else None,
            injection_index=d.get("injection_index"))


def measurement_matrix(case: NetworkCase, meas="full"):
    """``(C0, labels)`` for ``full``, ``generators`` or ``rows=i,j,...``.

    ``generators`` measures every generator frequency and the angle of each
    generator relative to the first one, i.e. what synchrophasors at the
    generator buses can deliver without a load-bus reference.
    """
    lay = Layout(case)
    n = lay.n
    labels = lay.state_labels
    if meas in (None, "full"):
        return np.eye(n), list(labels)
    if meas == "generators":
        rows, names = [], []
        for k in range(lay.ng):
            r = np.zeros(n)
            r[k] = 1.0
            rows.append(r)
            names.append(labels[k])
        pos = {b: p for p, b in enumerate(lay.ang_idx)}
        ref = lay.gen_idx[0]
        ids = case.bus_ids
        for g in lay.gen_idx[1:]:
            r = np.zeros(n)
            if g in pos:
                r[lay.ng + pos[g]] += 1.0
            if ref in pos:
                r[lay.ng + pos[ref]] -= 1.0
            rows.append(r)
            names.append(f"delta_{ids[g]}-delta_{ids[ref]}")
        return np.array(rows), names
    if isinstance(meas, str) and meas.startswith("rows="):
        body = meas[5:].strip()
        if not body:
            raise ValidationError("empty measurement selection")
        try:
            sel = [int(t) for t in body.split(",")]
        except ValueError:
            raise ValidationError(f"bad row list {body!r}") from None
        return _select_rows(n, sel, labels)
    if isinstance(meas, (list, tuple)):
        return _select_rows(n, list(meas), labels)
    raise ValidationError(f"unknown measurement selection {meas!r}")


def _select_rows(n, sel, labels):
    if not sel:
        raise ValidationError("empty measurement selection")
    for r in sel:
        if not 0 <= r < n:
            raise ValidationError(f"measurement row {r} out of range 0..{n - 1}")
    C = np.zeros((len(sel), n))
    C[np.arange(len(sel)), sel] = 1.0
    return C, [labels[r] for r in sel]


def linearize(case: NetworkCase, eq: EquilibriumPoint, meas="full",
              tol: float = 1e-10) -> LinearModel:
    lay = Layout(case)
    if eq.x_e.size != lay.n:
        raise ValidationError("equilibrium does not match the case state dimension")
    P = nominal_injection(case) if eq.P_in is None else eq.P_in
    res = float(np.abs(lay.rhs(eq.x_e, P)).max())
    if res > tol:
        raise NumericalError(f"equilibrium residual {res:.3e} exceeds {tol:.1e}")
    A0 = lay.jacobian(eq.x_e)
    B_bus = lay.input_matrix()
    inj = [case.index[b] for b in case.injection_buses]
    B0 = B_bus[:, inj]
    C0, mlabels = measurement_matrix(case, meas)
    Fx, Fu = lay.rate_maps(eq.x_e)
    return LinearModel(A0=A0, B0=B0, C0=C0, state_labels=lay.state_labels,
                       injection_labels=[str(b) for b in case.injection_buses],
                       measurement_labels=mlabels, P_in0=P[inj].copy(), B_bus=B_bus,
                       bus_ids=list(case.bus_ids), x_e=eq.x_e.copy(),
                       frequency_hz=case.frequency_hz, name=case.name,
                       rate_state=Fx, rate_input=Fu, injection_index=inj)


# ----------------------------------------------------------------------------
# assumptions


@dataclass
class AssumptionReport:
    hurwitz: bool
    max_real_eig: float
    controllable: bool
    controllability_rank: int
    observable: bool
    observability_rank: int
    rank_C0: int
    n: int

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v)
                for k, v in self.__dict__.items()}


def numerical_rank(X) -> int:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0:
        return 0
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    thr = max(X.shape) * np.finfo(float).eps * sv[0]
    return int(np.sum(sv > thr))


def check_assumptions(model) -> AssumptionReport:
    A0, B0, C0 = model.A0, model.B0, model.C0
    n = A0.shape[0]
    ev = np.linalg.eigvals(A0)
    mre = float(ev.real.max())
    blocks, M = [], B0
    for _ in range(n):
        blocks.append(M)
        M = A0 @ M
    ctrb = np.hstack(blocks)
    blocks, M = [], C0
    for _ in range(n):
        blocks.append(M)
        M = M @ A0
    obsv = np.vstack(blocks)
    rc = numerical_rank(ctrb)
    ro = numerical_rank(obsv)
    return AssumptionReport(hurwitz=mre < 0, max_real_eig=mre, controllable=rc == n,
                            controllability_rank=rc, observable=ro == n,
                            observability_rank=ro, rank_C0=numerical_rank(C0), n=n)
