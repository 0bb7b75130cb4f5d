"""Monte Carlo simulation of the closed loop: ensembles, histograms, comparisons."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kurtosis

from ..errors import SimulationError, ValidationError
from ..stochastic import ClosedLoopModel, ShiftedModel, UncertaintySpec, assemble_closed_loop
from .kernel import run_paths
from .philox import split_seed

log = logging.getLogger(__name__)

SOURCES = ("linear", "nonlinear")
EVENT_KINDS = ("generation", "load")


@dataclass(frozen=True)
class ScenarioEvent:
    time: float
    target: int          # bus id
    kind: str            # "generation" step or non-controllable "load" step
    magnitude: float     # p.u.; a generation loss is a negative generation step

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValidationError(f"event kind must be one of {EVENT_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.time) or not np.isfinite(self.magnitude):
            raise ValidationError("event time and magnitude must be finite")

    @property
    def injection(self) -> float:
        return self.magnitude if self.kind == "generation" else -self.magnitude

    @classmethod
    def parse(cls, text: str) -> "ScenarioEvent":
        """``time:bus:kind:magnitude``, e.g. ``1.0:139:generation:-2.5``."""
        try:
            t, b, k, mag = text.split(":")
            return cls(float(t), int(b), k, float(mag))
        except ValueError as exc:
            raise ValidationError(f"cannot parse event {text!r} ({exc})") from None


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 10.0
    paths: int = 10_000
    seed: int = 0
    scenario: tuple = ()
    source: str = "linear"
    record_points: int = 101
    stationary_fraction: float = 0.2
    z0: tuple | None = None
    additive_amplitude: float = 1.0
    multiplicative: bool = True
    additive: bool = True
    sample_buses: tuple | None = None   # indices into the frequency channels; None = all
    keep_trajectories: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValidationError("horizon must be at least dt")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValidationError("paths must be a positive integer")
        if self.source not in SOURCES:
            raise ValidationError(f"source must be one of {SOURCES}")
        if self.record_points < 2:
            raise ValidationError("record_points must be at least 2")
        if not 0 < self.stationary_fraction <= 1:
            raise ValidationError("stationary_fraction must lie in (0, 1]")
        if self.additive_amplitude < 0:
            raise ValidationError("additive_amplitude must be nonnegative")
        object.__setattr__(self, "scenario", tuple(self.scenario))
        for ev in self.scenario:
            if not 0 <= ev.time <= self.horizon:
                raise ValidationError(f"event time {ev.time} outside [0, {self.horizon}]")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in 64 bits")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    def record_steps(self) -> np.ndarray:
        N = self.steps
        stride = max(1, N // (self.record_points - 1))
        return np.unique(np.r_[np.arange(0, N + 1, stride), N]).astype(np.int64)

    def replace(self, **kw) -> "SimConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SimConfig(**d)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (records, n)
    frequencies: np.ndarray     # (records, channels) in rad/s
    truncated: bool
    truncation_time: float | None
    path_index: int


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_sq: np.ndarray
    stderr: np.ndarray
    freq_labels: list
    freq_mean: np.ndarray        # stationary-window mean per channel (rad/s)
    freq_var: np.ndarray         # stationary-window variance per channel ((rad/s)^2)
    samples: np.ndarray          # (paths, window records, selected channels)
    sample_labels: list
    nadir: np.ndarray            # per path, min over channels and time (rad/s)
    zenith: np.ndarray
    control_peak: np.ndarray     # per path and channel, max |dP_cd|
    terminal: np.ndarray         # (paths, n)
    truncated: int
    frequency_hz: float = 60.0
    meta: dict = field(default_factory=dict)
    trajectories: np.ndarray | None = None
    traj_frequencies: np.ndarray | None = None

    @property
    def paths(self) -> int:
        return self.terminal.shape[0]

    def growth_ratio(self) -> float:
        return float(self.mean_sq[-1] / self.mean_sq[0]) if self.mean_sq[0] > 0 else np.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "mean_sq", "stderr"])
        for t, m, s in zip(self.times, self.mean_sq, self.stderr):
            w.writerow([f"{t:.10g}", f"{m:.12g}", f"{s:.12g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def hz(v):
            return (self.frequency_hz + np.asarray(v) / (2 * np.pi)).tolist()
        return {
            "paths": self.paths,
            "times": self.times.tolist(),
            "mean_sq": _finite_list(self.mean_sq),
            "stderr": _finite_list(self.stderr),
            "freq_labels": list(self.freq_labels),
            "freq_var_rad2": _finite_list(self.freq_var),
            "freq_mean_hz": hz(self.freq_mean),
            "nadir_hz": {"mean": float(np.mean(hz(self.nadir))), "min": float(np.min(hz(self.nadir)))},
            "zenith_hz": {"mean": float(np.mean(hz(self.zenith))), "max": float(np.max(hz(self.zenith)))},
            "truncated_paths": int(self.truncated),
            "meta": self.meta,
        }


def _finite_list(a):
    return [float(v) if np.isfinite(v) else None for v in np.asarray(a, dtype=float)]


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    excess_kurtosis: float
    samples: int
    unit: str = "rad/s"

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": self.counts.astype(int).tolist(),
                "density": self.density.tolist(), "samples": int(self.samples),
                "excess_kurtosis": (float(self.excess_kurtosis)
                                    if np.isfinite(self.excess_kurtosis) else None),
                "unit": self.unit}


# ----------------------------------------------------------------------------
# assembly of kernel inputs


def _closed_loop_parts(model):
    if not isinstance(model, (ClosedLoopModel, ShiftedModel)):
        raise ValidationError("model must be a ClosedLoopModel or ShiftedModel")
    A = np.ascontiguousarray(model.A, dtype=float)
    B = np.ascontiguousarray(model.B, dtype=float)
    C = np.ascontiguousarray(model.C, dtype=float)
    n, m = B.shape
    Fd = (np.ascontiguousarray(model.forcing, dtype=float) if isinstance(model, ShiftedModel)
          else np.zeros((n, m)))
    return A, B, C, Fd


def _frequency_map(model, plant):
    """Linear read-out ``f = Ff z`` and per-bus event offsets ``Fu``."""
    n = model.A.shape[0]
    if plant is None or getattr(plant, "rate_state", None) is None:
        labels = list(model.labels.get("states", [])) or [f"z{i}" for i in range(n)]
        if len(labels) != n:
            labels = [f"z{i}" for i in range(n)]
        return np.eye(n), None, labels
    inj = list(plant.injection_index)
    Fu = np.asarray(plant.rate_input, dtype=float)
    Ff = np.asarray(plant.rate_state, dtype=float) - Fu[:, inj] @ model.C
    return Ff, Fu, [f"bus {b}" for b in plant.bus_ids]


def _segments(cfg, plant, n_out, nonlinear, Fu):
    """Piecewise-constant event drift: start steps, drift rows, frequency offsets."""
    events = sorted(cfg.scenario, key=lambda e: e.time)
    buses = getattr(plant, "bus_ids", None)
    if events and not buses:
        raise ValidationError("scenario events need a network model with bus ids")
    steps = [0]
    nb_ = len(buses) if buses else 0
    dP = np.zeros(max(nb_, 1))
    rows = [dP.copy()]
    for ev in events:
        try:
            idx = list(plant.bus_ids).index(ev.target)
        except ValueError:
            raise ValidationError(f"event target bus {ev.target} not in the model") from None
        dP[idx] += ev.injection
        k = int(round(ev.time / cfg.dt))
        if k == steps[-1]:
            rows[-1] = dP.copy()
        else:
            steps.append(k)
            rows.append(dP.copy())
    P = np.array(rows)
    if nonlinear:
        drift = P
    elif buses:
        drift = P @ np.asarray(plant.B_bus, dtype=float).T
    else:
        drift = np.zeros((1, n_out))
    foff = (P @ Fu.T) if (Fu is not None) else np.zeros((len(steps), n_out))
    return np.asarray(steps, dtype=np.int64), np.ascontiguousarray(drift), np.ascontiguousarray(foff)


def _run(model, cfg: SimConfig, plant=None, case=None, path0: int = 0, npaths=None,
         keep_traj=False):
    A, B, C, Fd = _closed_loop_parts(model)
    n, m = B.shape
    nonlinear = cfg.source == "nonlinear"
    sig = model.spec.sigma.copy() if cfg.multiplicative else np.zeros(m)
    if not cfg.multiplicative:
        Fd = np.zeros_like(Fd)
    add = list(model.spec.additive_channels) if cfg.additive else []
    Ba = np.ascontiguousarray(cfg.additive_amplitude * B[:, add]) if add else np.zeros((n, 0))
    z0 = np.zeros(n) if cfg.z0 is None else np.asarray(cfg.z0, dtype=float).ravel()
    if z0.size != n:
        raise ValidationError(f"z0 must have {n} entries")

    if nonlinear:
        if case is None or plant is None or plant.x_e is None:
            raise ValidationError("nonlinear simulation needs the case and its linear model")
        from ..netmodel import Layout, nominal_injection
        lay = Layout(case)
        arr = case.arrays
        Ff, Fu, labels = np.zeros((case.n_bus, n)), None, [f"bus {b}" for b in case.bus_ids]
        x_e = np.asarray(plant.x_e, dtype=float)
        P0 = nominal_injection(case)
        inj = np.asarray(plant.injection_index, dtype=np.int64)
        nl = (x_e, P0, inj, lay.gen_idx.astype(np.int64), lay.ang_idx.astype(np.int64),
              int(lay.R), lay.M, lay.Dg, lay.Dbus, lay.is_load,
              arr["i"].astype(np.int64), arr["j"].astype(np.int64),
              np.asarray(arr["K"], float), np.asarray(arr["theta"], float))
        nf = case.n_bus
    else:
        Ff, Fu, labels = _frequency_map(model, plant)
        nf = Ff.shape[0]
        nl = (np.zeros(n), np.zeros(1), np.zeros(m, dtype=np.int64), np.zeros(0, dtype=np.int64),
              np.zeros(0, dtype=np.int64), 0, np.zeros(0), np.zeros(0), np.zeros(1),
              np.zeros(1, dtype=np.bool_), np.zeros(0, dtype=np.int64),
              np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))
    seg_step, seg_drift, seg_foff = _segments(cfg, plant, nf if nonlinear else n, nonlinear, Fu)
    if not nonlinear and seg_foff.shape[1] != nf:
        seg_foff = np.zeros((seg_step.size, nf))

    rec = cfg.record_steps()
    times = rec * cfg.dt
    stat_from = int(np.searchsorted(times, (1.0 - cfg.stationary_fraction) * cfg.horizon - 1e-12))
    stat_from = min(stat_from, rec.size - 1)
    sel = (np.arange(nf) if cfg.sample_buses is None
           else np.asarray(cfg.sample_buses, dtype=np.int64))
    if sel.size and (sel.min() < 0 or sel.max() >= nf):
        raise ValidationError(f"sample_buses must index 0..{nf - 1}")
    P = cfg.paths if npaths is None else npaths
    R = rec.size
    out_sq = np.empty((P, R))
    out_traj = np.empty((P, R, n)) if keep_traj else np.empty((0, 0, 0))
    out_freq = np.empty((P, R, nf)) if keep_traj else np.empty((0, 0, 0))
    fsum = np.empty((P, nf))
    fsq = np.empty((P, nf))
    fmin = np.empty((P, nf))
    fmax = np.empty((P, nf))
    umax = np.empty((P, m))
    fsamp = np.empty((P, R - stat_from, sel.size))
    terminal = np.empty((P, n))
    trunc = np.empty(P, dtype=np.int64)
    k0, k1 = split_seed(cfg.seed)
    run_paths(path0, cfg.steps, cfg.dt, k0, k1, z0,
              A, np.ascontiguousarray(B), np.ascontiguousarray(C), np.asarray(sig, float),
              np.ascontiguousarray(Fd), Ba,
              seg_step, seg_drift, seg_foff, np.ascontiguousarray(Ff),
              nonlinear, *nl,
              rec, stat_from, sel.astype(np.int64),
              out_sq, out_traj, out_freq, fsum, fsq, fmin, fmax, umax, fsamp,
              terminal, trunc)
    return dict(times=times, stat_from=stat_from, out_sq=out_sq, out_traj=out_traj,
                out_freq=out_freq, fsum=fsum, fsq=fsq, fmin=fmin, fmax=fmax, umax=umax,
                fsamp=fsamp, terminal=terminal, trunc=trunc, labels=labels, sel=sel,
                window=R - stat_from)


def _frequency_hz(plant, case):
    for src in (plant, case):
        f = getattr(src, "frequency_hz", None)
        if f:
            return float(f)
    return 60.0


# ----------------------------------------------------------------------------
# public operations


def simulate_path(model, cfg: SimConfig, path_index: int, plant=None, case=None) -> Trajectory:
    """A single path; identical to row ``path_index`` of the ensemble with the same config."""
    if not 0 <= path_index < cfg.paths:
        raise ValidationError(f"path_index must lie in 0..{cfg.paths - 1}")
    o = _run(model, cfg, plant, case, path0=path_index, npaths=1, keep_traj=True)
    k = int(o["trunc"][0])
    return Trajectory(times=o["times"], states=o["out_traj"][0], frequencies=o["out_freq"][0],
                      truncated=k >= 0, truncation_time=(k * cfg.dt if k >= 0 else None),
                      path_index=path_index)


def simulate_ensemble(model, cfg: SimConfig, plant=None, case=None,
                      strict: bool = False) -> EnsembleStats:
    """``cfg.paths`` independent paths and their second-moment statistics.

    Statistics are reduced in numpy from per-path arrays after the parallel
    kernel returns, so the numbers do not depend on the thread count.
    """
    o = _run(model, cfg, plant, case, keep_traj=cfg.keep_trajectories)
    P = cfg.paths
    sq = o["out_sq"]
    with np.errstate(over="ignore", invalid="ignore"):
        mean_sq = sq.mean(axis=0)
        stderr = sq.std(axis=0, ddof=1) / np.sqrt(P) if P > 1 else np.zeros(sq.shape[1])
    ok = o["trunc"] < 0
    ntr = int((~ok).sum())
    if ntr:
        log.warning("%d of %d paths truncated on overflow", ntr, P)
        if strict:
            raise SimulationError(f"{ntr} of {P} paths truncated on overflow")
    w = o["window"]
    if ok.any():
        cnt = ok.sum() * w
        fmean = o["fsum"][ok].sum(axis=0) / cnt
        fvar = np.maximum(o["fsq"][ok].sum(axis=0) / cnt - fmean ** 2, 0.0)
    else:
        fmean = np.full(o["fsum"].shape[1], np.nan)
        fvar = np.full(o["fsum"].shape[1], np.inf)
    labels = o["labels"]
    meta = {"dt": cfg.dt, "horizon": cfg.horizon, "paths": P, "seed": int(cfg.seed),
            "source": cfg.source, "stationary_from": float(o["times"][o["stat_from"]]),
            "truncated_paths": ntr}
    return EnsembleStats(
        times=o["times"], mean_sq=mean_sq, stderr=stderr, freq_labels=labels,
        freq_mean=fmean, freq_var=fvar, samples=o["fsamp"],
        sample_labels=[labels[i] for i in o["sel"]],
        nadir=o["fmin"].min(axis=1), zenith=o["fmax"].max(axis=1),
        control_peak=o["umax"], terminal=o["terminal"], truncated=ntr,
        frequency_hz=_frequency_hz(plant, case), meta=meta,
        trajectories=o["out_traj"] if cfg.keep_trajectories else None,
        traj_frequencies=o["out_freq"] if cfg.keep_trajectories else None)


def frequency_distribution(stats: EnsembleStats, bins=50, buses=None,
                           hz: bool = False) -> Histogram:
    """Histogram of stationary-window frequency samples with excess kurtosis."""
    X = stats.samples
    if buses is not None:
        lab = list(stats.sample_labels)
        cols = []
        for b in buses:
            key = b if isinstance(b, str) else None
            if key is None:
                key = f"bus {b}" if f"bus {b}" in lab else None
            if key is None and isinstance(b, (int, np.integer)) and 0 <= b < len(lab):
                key = lab[b]
            if key not in lab:
                raise ValidationError(f"no frequency samples for {b!r}")
            cols.append(lab.index(key))
        X = X[:, :, cols]
    x = X.ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ValidationError("no frequency samples to summarize")
    if hz:
        x = stats.frequency_hz + x / (2 * np.pi)
    counts, edges = np.histogram(x, bins=bins)
    width = np.diff(edges)
    density = counts / (x.size * width)
    kurt = float(kurtosis(x, fisher=True)) if np.ptp(x) > 0 else 0.0
    return Histogram(edges, counts, density, kurt, int(x.size), "Hz" if hz else "rad/s")


@dataclass
class ControllerReport:
    nadir_hz: float            # worst path
    nadir_hz_mean: float
    zenith_hz: float
    zenith_hz_mean: float
    dpcd_peak: dict            # |dP_cd| per-path maxima summary (p.u.)
    engaged_fraction: float
    support: list
    truncated: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ComparisonReport:
    a: ControllerReport
    b: ControllerReport
    config: dict

    def to_dict(self):
        return {"a": self.a.to_dict(), "b": self.b.to_dict(), "config": self.config}


def _report(stats: EnsembleStats, K) -> ControllerReport:
    from ..synth import row_support
    f0 = stats.frequency_hz
    nad = f0 + stats.nadir / (2 * np.pi)
    zen = f0 + stats.zenith / (2 * np.pi)
    peak = stats.control_peak.max(axis=1) if stats.control_peak.size else np.zeros(stats.paths)
    sup = sorted(row_support(K))
    m = K.shape[0]
    return ControllerReport(
        nadir_hz=float(nad.min()), nadir_hz_mean=float(nad.mean()),
        zenith_hz=float(zen.max()), zenith_hz_mean=float(zen.mean()),
        dpcd_peak={"mean": float(peak.mean()), "p50": float(np.median(peak)),
                   "p95": float(np.quantile(peak, 0.95)), "max": float(peak.max())},
        engaged_fraction=len(sup) / m if m else 0.0, support=sup,
        truncated=stats.truncated)


def compare_controllers(plant, K_a, K_b, cfg: SimConfig, sigma=None,
                        additive_channels=(), case=None):
    """Run both closed loops on the same noise streams and summarize them.

    Returns ``(report, stats_a, stats_b)``.
    """
    m, s = plant.B0.shape[1], plant.C0.shape[0]
    K_a = np.atleast_2d(np.asarray(K_a, dtype=float))
    K_b = np.atleast_2d(np.asarray(K_b, dtype=float))
    for K in (K_a, K_b):
        if K.shape != (m, s):
            raise ValidationError(f"gains must be {m}x{s}, got {K.shape}")
    sig = np.zeros(m) if sigma is None else np.broadcast_to(np.asarray(sigma, float), (m,))
    spec = UncertaintySpec(sig, additive_channels)
    out = []
    for K in (K_a, K_b):
        cl = assemble_closed_loop(plant, K, spec)
        out.append(simulate_ensemble(cl, cfg, plant=plant, case=case))
    rep = ComparisonReport(_report(out[0], K_a), _report(out[1], K_b),
                           {"dt": cfg.dt, "horizon": cfg.horizon, "paths": cfg.paths,
                            "seed": int(cfg.seed), "source": cfg.source,
                            "events": [ev.__dict__ for ev in cfg.scenario]})
    return rep, out[0], out[1]
