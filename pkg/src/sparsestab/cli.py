"""``sparsestab`` command line: linearize, synth, pareto, simulate.

Exit codes: 0 success, 2 bad input, 3 model-level numerical failure,
4 solver failure, 5 truncated simulation under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SimulationError, SparsestabError, ValidationError
from .netmodel import (
    LinearModel,
    bundled_case,
    case_from_dict,
    check_assumptions,
    linearize,
    solve_equilibrium,
    validate_case,
)
from .schemas import validate_output

log = logging.getLogger("sparsestab")

UNSTABLE_GROWTH = 10.0
BOUNDED_GROWTH = 2.0


# ----------------------------------------------------------------------------
# inputs


def _parse_meas(text: str):
    if text in ("full", "generators"):
        return text
    if text.startswith("rows="):
        try:
            return [int(v) for v in text[5:].split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"bad --meas value {text!r}") from None
    raise ValidationError("--meas must be full, generators or rows=i,j,...")


def _read_json(path):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON ({exc})") from None


def load_inputs(args):
    """``(case or None, LinearModel)`` from ``--model`` or ``--case``.

    ``--case`` takes a path or a bundled name (smib, case9, case39).  A JSON
    file holding ``A0`` is read as a ready-made linear model.
    """
    meas = _parse_meas(args.meas)
    if getattr(args, "model", None):
        return None, _model_from_dict(_read_json(args.model), meas)
    if not args.case:
        raise ValidationError("one of --case or --model is required")
    p = Path(args.case)
    if p.is_file():
        d = _read_json(p)
        if "A0" in d:
            return None, _model_from_dict(d, meas)
        case = case_from_dict(d)
        validate_case(case)
    else:
        d = _bundled_json(p.name)
        if "A0" in d:
            return None, _model_from_dict(d, meas)
        case = bundled_case(p.name)
    eq = solve_equilibrium(case)
    return case, linearize(case, eq, meas)


def _bundled_json(name):
    stem = name[:-5] if name.endswith(".json") else name
    f = resources.files("sparsestab.data").joinpath(stem + ".json")
    if not f.is_file():
        raise ValidationError(f"no case file or bundled case named {name!r}")
    return json.loads(f.read_text())


def _model_from_dict(d, meas):
    try:
        model = LinearModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed linear model ({exc})") from None
    if meas == "full" or meas is None:
        return model
    if meas == "generators":
        rows = [i for i, lab in enumerate(model.state_labels) if lab.startswith("omega")]
    else:
        rows = list(meas)
    if any(not 0 <= r < model.n for r in rows) or not rows:
        raise ValidationError("measurement rows out of range")
    C = np.zeros((len(rows), model.n))
    C[np.arange(len(rows)), rows] = 1.0
    return model.with_measurement(C, [model.state_labels[r] for r in rows])


def _weights(args):
    from .synth import SynthesisWeights
    return SynthesisWeights(args.w1, args.w2, args.w3, args.w4, args.p)


# ----------------------------------------------------------------------------
# outputs


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj, schema=None):
    if schema:
        validate_output(obj, schema)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ----------------------------------------------------------------------------
# commands


def cmd_linearize(args) -> int:
    case, model = load_inputs(args)
    out = _out_dir(args)
    rep = check_assumptions(model)
    _write_json(out / "model.json", _jsonable(model.to_dict()), "model")
    _write_json(out / "assumptions.json", _jsonable(rep.to_dict()), "assumptions")
    log.info("linearized %s: n=%d, m=%d, s=%d", model.name or "model", model.n, model.m, model.s)
    return 0


def _support_csv(path: Path, model, result):
    norms = np.linalg.norm(result.K0, axis=1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "bus", "gain_norm", "sigma_star"])
        for i in sorted(result.row_support):
            s = result.sigma_star[i]
            w.writerow([i, model.injection_labels[i], f"{norms[i]:.12g}",
                        f"{s:.12g}" if np.isfinite(s) else "inf"])


def cmd_synth(args) -> int:
    from .synth import certify, synthesize
    _, model = load_inputs(args)
    out = _out_dir(args)
    res = synthesize(model, _weights(args))
    log.info("synthesis path: %s", res.path)
    cert = certify(model, res, 0.99)
    gain = {"K0": res.K0, "path": res.path, "row_support": sorted(res.row_support),
            "injection_labels": list(model.injection_labels),
            "measurement_labels": list(model.measurement_labels),
            "weights": {"w1": args.w1, "w2": args.w2, "w3": args.w3, "w4": args.w4,
                        "p": str(args.p)}}
    _write_json(out / "gain.json", _jsonable(gain), "gain")
    c = res.to_dict(model)
    c["verify_mses_099"] = {"feasible": bool(cert.feasible), "margin": cert.margin,
                            "eps": cert.eps}
    _write_json(out / "certificate.json", _jsonable(c), "certificate")
    _support_csv(out / "support.csv", model, res)
    return 0


def _grid(text):
    vals = [v for v in text.split(",") if v.strip()]
    try:
        return [float(v) for v in vals]
    except ValueError:
        raise ValidationError(f"bad --w3-grid {text!r}") from None


def cmd_pareto(args) -> int:
    from .synth import pareto_sweep
    grid = _grid(args.w3_grid)
    if not grid:
        raise ValidationError("--w3-grid is empty")
    _, model = load_inputs(args)
    out = _out_dir(args)
    pts = pareto_sweep(model, _weights(args), grid)
    with (out / "pareto.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["w3", "bus", "gain_norm", "sigma_star", "gamma2_star", "status"])
        for pt in pts:
            for i, lab in enumerate(model.injection_labels):
                g, s = pt.gain_norms[i], pt.sigma_star[i]
                w.writerow([f"{pt.w3:.12g}", lab, f"{g:.12g}",
                            "inf" if np.isinf(s) else f"{s:.12g}",
                            f"{pt.gamma2_star:.12g}", pt.status])
    return 0


def _read_gain(args, model):
    if args.gain:
        d = _read_json(args.gain)
        K = np.atleast_2d(np.asarray(d["K0"], dtype=float))
        sig = None
        if args.certificate:
            c = _read_json(args.certificate)
            sig = np.array([np.inf if v is None else v for v in c["sigma_star"]], dtype=float)
        return K, sig
    from .synth import synthesize
    res = synthesize(model, _weights(args))
    return res.K0, res.sigma_star


def _z0(args, n, events):
    if args.z0:
        try:
            z = [float(v) for v in args.z0.split(",")]
        except ValueError:
            raise ValidationError(f"bad --z0 {args.z0!r}") from None
        if len(z) == 1:
            z = z * n
        return tuple(z)
    if events:
        return None
    z = [0.0] * n
    z[0] = 1.0
    return tuple(z)


def _verdict(stats):
    m0 = stats.mean_sq[0]
    if m0 <= 0:
        return "no-initial-state"
    peak = np.max(stats.mean_sq) / m0
    if not np.isfinite(peak) or peak > UNSTABLE_GROWTH:
        return "unstable"
    if stats.mean_sq[-1] / m0 <= BOUNDED_GROWTH:
        return "bounded"
    return "inconclusive"


def cmd_simulate(args) -> int:
    from .sde import ScenarioEvent, SimConfig, compare_controllers, frequency_distribution
    from .sde import simulate_ensemble
    from .stochastic import UncertaintySpec, assemble_closed_loop
    from .synth import design_lqr, lqr_output_gain
    case, model = load_inputs(args)
    K, sig_star = _read_gain(args, model)
    if K.shape != (model.m, model.s):
        raise ValidationError(f"gain is {K.shape}, the model needs {(model.m, model.s)}")
    if args.sigma is not None:
        sigma = np.full(model.m, float(args.sigma))
    elif sig_star is not None:
        sigma = np.where(np.isfinite(sig_star), sig_star, 0.0)
    else:
        sigma = np.zeros(model.m)
    if args.sigma_scale < 0:
        raise ValidationError("--sigma-scale must be nonnegative")
    sigma = args.sigma_scale * sigma
    if args.additive == "all":
        additive = tuple(range(model.m))
    elif args.additive in ("none", ""):
        additive = ()
    else:
        additive = tuple(int(v) for v in args.additive.split(","))
    events = tuple(ScenarioEvent.parse(e) for e in (args.event or []))
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, paths=args.paths, seed=args.seed,
                    scenario=events, source=args.source, z0=_z0(args, model.n, events),
                    additive_amplitude=args.additive_amp, record_points=args.record_points)
    spec = UncertaintySpec(sigma, additive)
    cl = assemble_closed_loop(model, K, spec)
    stats = simulate_ensemble(cl, cfg, plant=model, case=case)
    out = _out_dir(args)
    (out / "ensemble.csv").write_text(stats.to_csv())
    summary = stats.to_dict()
    summary["verdict"] = _verdict(stats)
    summary["sigma"] = sigma
    _write_json(out / "ensemble.json", _jsonable(summary), "ensemble")
    if np.isfinite(stats.samples).any():
        hist = frequency_distribution(stats, bins=args.bins, hz=True).to_dict()
    else:
        # every path overflowed before the stationary window
        hist = {"edges": [], "counts": [], "density": [], "samples": 0,
                "excess_kurtosis": None, "unit": "Hz"}
    _write_json(out / "hist.json", _jsonable(hist), "hist")
    log.info("mean-square verdict: %s", summary["verdict"])
    if args.lqr:
        Kx = design_lqr(model, np.eye(model.n), args.lqr_r * np.eye(model.m))
        K_lqr = lqr_output_gain(model, Kx)
        rep, _, _ = compare_controllers(model, K, K_lqr, cfg, sigma=sigma,
                                        additive_channels=additive, case=case)
        rep_open, _, _ = compare_controllers(model, np.zeros_like(K), np.zeros_like(K), cfg,
                                             sigma=sigma, additive_channels=additive,
                                             case=case)
        d = {"synthesized": rep.a.to_dict(), "lqr": rep.b.to_dict(),
             "open_loop": rep_open.a.to_dict(), "config": rep.config}
        _write_json(out / "compare.json", _jsonable(d), "compare")
    if stats.truncated and args.strict:
        raise SimulationError(f"{stats.truncated} of {cfg.paths} paths truncated on overflow")
    return 0


# ----------------------------------------------------------------------------
# parser


def _common(p, synth=True):
    p.add_argument("--case", help="case JSON path or bundled name (smib, case9, case39)")
    p.add_argument("--model", help="linear model JSON written by `linearize`")
    p.add_argument("--meas", default="full", help="full | generators | rows=i,j,...")
    p.add_argument("--out", default=".", help="output directory")
    if synth:
        p.add_argument("--w1", type=float, default=100.0)
        p.add_argument("--w2", type=float, default=100.0)
        p.add_argument("--w3", type=float, default=0.1)
        p.add_argument("--w4", type=float, default=1.0)
        p.add_argument("--p", default="1", choices=["1", "2", "inf"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsestab",
                                 description="Sparse load control under multiplicative noise.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linearize", help="write model.json and assumptions.json")
    _common(p, synth=False)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("synth", help="write gain.json, certificate.json, support.csv")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pareto", help="sweep w3 and write pareto.csv")
    _common(p)
    p.add_argument("--w3-grid", default="0.05,0.1,0.2,0.5,1",
                   help="comma-separated w3 values")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble; ensemble.csv, hist.json")
    _common(p)
    p.add_argument("--gain", help="gain.json from `synth` (synthesized on the fly if absent)")
    p.add_argument("--certificate", help="certificate.json supplying sigma*")
    p.add_argument("--sigma", type=float, default=None,
                   help="common noise level for every channel (overrides sigma*)")
    p.add_argument("--sigma-scale", type=float, default=1.0)
    p.add_argument("--additive", default="none", help="none | all | i,j,...")
    p.add_argument("--additive-amp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--record-points", type=int, default=101)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--z0", help="initial deviation, comma-separated or one value for all")
    p.add_argument("--event", action="append",
                   help="time:bus:generation|load:magnitude (repeatable)")
    p.add_argument("--source", default="linear", choices=["linear", "nonlinear"])
    p.add_argument("--lqr", action="store_true", help="also compare with an LQR baseline")
    p.add_argument("--lqr-r", type=float, default=1.0, help="LQR input weight (times I)")
    p.add_argument("--strict", action="store_true", help="exit 5 if any path overflowed")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SparsestabError as err:
        print(f"sparsestab: {err}", file=sys.stderr)
        return err.exit_code
    except (OSError, KeyError) as err:
        print(f"sparsestab: {err}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
