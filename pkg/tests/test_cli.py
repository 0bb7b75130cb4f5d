import csv
import json

import numpy as np
import pytest

from sparsestab import cli
from sparsestab.errors import SolverError
from sparsestab.netmodel import case_to_dict, bundled_case
from sparsestab.schemas import validate_output


def run(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


def write_gain(path, K):
    path.write_text(json.dumps({"K0": K}))
    return path


# ----------------------------------------------------------------------------
# linearize


def test_linearize_smib(tmp_path):
    assert run("linearize", "--case", "smib", "--meas", "full", "--out", tmp_path) == 0
    m = read(tmp_path / "model.json")
    assert len(m["A0"]) == 2
    validate_output(m, "model")
    a = read(tmp_path / "assumptions.json")
    validate_output(a, "assumptions")
    assert a["hurwitz"] is True


def test_linearize_case_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(case_to_dict(bundled_case("case9"))))
    assert run("linearize", "--case", p, "--meas", "generators", "--out", tmp_path) == 0
    m = read(tmp_path / "model.json")
    loads = {str(ld.bus) for ld in bundled_case("case9").loads}
    assert all(lab.split("_")[1].split("-")[0] not in loads for lab in m["measurement_labels"])
    assert len(m["C0"]) < len(m["A0"])


def test_missing_case_exit_2(tmp_path, capsys):
    assert run("linearize", "--case", tmp_path / "nope.json", "--out", tmp_path) == 2
    assert "sparsestab:" in capsys.readouterr().err


def test_bad_meas_exit_2(tmp_path):
    assert run("linearize", "--case", "smib", "--meas", "some", "--out", tmp_path) == 2


def test_numerical_failure_exit_3(tmp_path):
    d = case_to_dict(bundled_case("smib"))
    d["generators"][0]["P_g"] = 1.5
    d["loads"][0].update(P_d=1.5, P_cd0=0.75, P_ncd0=0.75)
    p = tmp_path / "over.json"
    p.write_text(json.dumps(d))
    assert run("linearize", "--case", p, "--out", tmp_path) == 3


# ----------------------------------------------------------------------------
# synth and pareto


def test_synth_scalar(tmp_path):
    assert run("synth", "--case", "scalar", "--w1", 1, "--w2", 1, "--w3", 2, "--w4", 0,
               "--out", tmp_path) == 0
    g = read(tmp_path / "gain.json")
    assert g["K0"][0][0] == pytest.approx(0.5, abs=1e-3)
    assert g["path"] == "full-state"
    c = read(tmp_path / "certificate.json")
    assert c["sigma_star"][0] == pytest.approx(2.0, abs=1e-2)
    assert c["verify_mses_099"]["feasible"] is True
    validate_output(g, "gain")
    validate_output(c, "certificate")


def test_synth_two_stage_case9(tmp_path):
    assert run("synth", "--case", "case9", "--meas", "generators", "--w4", 0,
               "--out", tmp_path) == 0
    c = read(tmp_path / "certificate.json")
    assert c["path"] == "two-stage"
    assert any(v is not None for v in c["sigma_star"])


def test_synth_support_shrinks_with_w4(tmp_path):
    rows = []
    for w4 in (0, 1):
        out = tmp_path / f"w{w4}"
        assert run("synth", "--case", "case9", "--w4", w4, "--out", out) == 0
        with (out / "support.csv").open() as fh:
            rows.append(len(list(csv.DictReader(fh))))
    assert rows[1] <= rows[0]


def test_solver_failure_exit_4(tmp_path, monkeypatch):
    import sparsestab.synth as synth

    def fail(*a, **k):
        raise SolverError("solver status max_iterations")
    monkeypatch.setattr(synth, "synthesize", fail)
    assert run("synth", "--case", "scalar", "--out", tmp_path) == 4


def test_pareto_scalar(tmp_path):
    assert run("pareto", "--case", "scalar", "--w1", 1, "--w2", 1, "--w4", 0,
               "--w3-grid", "1,2,4", "--out", tmp_path) == 0
    with (tmp_path / "pareto.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["w3", "bus", "gain_norm", "sigma_star", "gamma2_star", "status"]
    assert [float(r["sigma_star"]) for r in rows] == pytest.approx([1, 2, 4], abs=1e-2)


def test_pareto_empty_grid_exit_2(tmp_path):
    assert run("pareto", "--case", "scalar", "--w3-grid", "", "--out", tmp_path) == 2


def test_pareto_case9_gain_norms_fall(tmp_path):
    assert run("pareto", "--case", "case9", "--w3-grid", "0.05,0.2,1", "--out", tmp_path) == 0
    with (tmp_path / "pareto.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    by_bus = {}
    for r in rows:
        by_bus.setdefault(r["bus"], []).append(float(r["gain_norm"]))
    for norms in by_bus.values():
        assert all(b <= a + 1e-6 for a, b in zip(norms, norms[1:]))


# ----------------------------------------------------------------------------
# simulate


def test_simulate_gbm(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[0.0]])
    # dz = -z dt + sigma z dW with the gain row scaling the noise: use K0 = 1 on a0 = 0
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"A0": [[0.0]], "B0": [[1.0]], "C0": [[1.0]],
                                 "state_labels": ["z"], "injection_labels": ["u"],
                                 "measurement_labels": ["z"]}))
    write_gain(gain, [[1.0]])
    assert run("simulate", "--model", model, "--gain", gain, "--sigma", 1.0, "--dt", 1e-3,
               "--horizon", 1, "--paths", 4000, "--seed", 3, "--out", tmp_path) == 0
    with (tmp_path / "ensemble.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    last = rows[-1]
    assert abs(float(last["mean_sq"]) - np.exp(-1)) <= 3 * float(last["stderr"])
    e = read(tmp_path / "ensemble.json")
    validate_output(e, "ensemble")
    assert e["verdict"] == "bounded"
    validate_output(read(tmp_path / "hist.json"), "hist")


def test_simulate_flags_growth(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[-2.0]])
    assert run("simulate", "--case", "scalar", "--gain", gain, "--dt", 1e-3,
               "--horizon", 3, "--paths", 10, "--out", tmp_path) == 0
    assert read(tmp_path / "ensemble.json")["verdict"] == "unstable"


def test_simulate_strict_exit_5(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[-100.0]])
    args = ["simulate", "--case", "scalar", "--gain", gain, "--dt", 1e-2, "--horizon", 10,
            "--paths", 4, "--out", tmp_path]
    assert run(*args) == 0
    assert run(*args, "--strict") == 5


def test_simulate_wrong_gain_shape(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[1.0, 2.0]])
    assert run("simulate", "--case", "scalar", "--gain", gain, "--out", tmp_path) == 2


def test_simulate_seed_reproducible(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[1.0]])
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert run("simulate", "--case", "scalar", "--gain", gain, "--sigma", 0.8,
                   "--additive", "all", "--horizon", 2, "--paths", 200, "--seed", 7,
                   "--out", out) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"ensemble.csv", "ensemble.json", "hist.json"}


def test_simulate_compare_case9(tmp_path):
    assert run("synth", "--case", "case9", "--out", tmp_path) == 0
    gen = bundled_case("case9").generators[0].bus
    assert run("simulate", "--case", "case9", "--gain", tmp_path / "gain.json",
               "--certificate", tmp_path / "certificate.json", "--sigma-scale", 0.5,
               "--event", f"0.5:{gen}:generation:-0.5", "--horizon", 2, "--paths", 4,
               "--lqr", "--out", tmp_path) == 0
    c = read(tmp_path / "compare.json")
    validate_output(c, "compare")
    assert c["lqr"]["engaged_fraction"] == 1.0
    assert c["open_loop"]["engaged_fraction"] == 0.0


def test_bad_event_exit_2(tmp_path):
    gain = write_gain(tmp_path / "g.json", [[1.0]])
    assert run("simulate", "--case", "scalar", "--gain", gain, "--event", "1:2",
               "--out", tmp_path) == 2
