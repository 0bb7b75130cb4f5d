import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsestab.errors import NumericalError, ValidationError
from sparsestab.netmodel import (
    Layout,
    LinearModel,
    bundled_case,
    case_from_dict,
    case_to_dict,
    check_assumptions,
    electrical_power,
    linearize,
    load_case,
    measurement_matrix,
    nominal_injection,
    solve_equilibrium,
)


def two_bus(theta=-math.pi / 2):
    d = {
        "buses": [{"id": 1, "kind": "generator-internal", "E": 1.0},
                  {"id": 2, "kind": "load", "E": 1.0}],
        "lines": [{"from": 1, "to": 2, "Y": 1.0, "theta": theta},
                  {"from": 2, "to": 1, "Y": 1.0, "theta": theta}],
        "generators": [{"bus": 1, "M": 1.0, "D": 0.1, "P_g": 0.0}],
        "loads": [{"bus": 2, "D": 1.0, "P_d": 0.0, "P_cd0": 0.0, "P_ncd0": 0.0}],
        "reference_bus": 2,
    }
    return case_from_dict(d)


def random_case(rng, nb_gen=2, nb_load=3):
    ids_g = [100 + k for k in range(nb_gen)]
    ids_l = list(range(1, nb_load + 1))
    ids = ids_g + ids_l
    lines = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if rng.random() < 0.7 or j == i + 1:
                Y = float(rng.uniform(2.0, 6.0))
                th = math.pi / 2
                lines += [{"from": ids[i], "to": ids[j], "Y": Y, "theta": th},
                          {"from": ids[j], "to": ids[i], "Y": Y, "theta": th}]
    loads = []
    for b in ids_l:
        pd = float(rng.uniform(0.1, 0.4))
        loads.append({"bus": b, "D": float(rng.uniform(0.5, 2.0)), "P_d": pd,
                      "P_cd0": pd / 2, "P_ncd0": pd / 2})
    total = sum(ld["P_d"] for ld in loads)
    gens = [{"bus": b, "M": float(rng.uniform(0.05, 0.2)), "D": float(rng.uniform(0.1, 1.0)),
             "P_g": total / nb_gen} for b in ids_g]
    return case_from_dict({
        "buses": [{"id": b, "kind": "generator-internal", "E": 1.0} for b in ids_g]
        + [{"id": b, "kind": "load", "E": float(rng.uniform(0.95, 1.05))} for b in ids_l],
        "lines": lines, "generators": gens, "loads": loads, "reference_bus": ids_l[0]})


# ----------------------------------------------------------------------------
# case files


def test_bundled_cases_load():
    smib = bundled_case("smib")
    assert smib.n_states == 2
    c39 = bundled_case("case39")
    assert len(c39.generators) == 10
    assert len(c39.loads) == 19
    c9 = bundled_case("case9")
    assert len(c9.generators) == 3 and len(c9.loads) == 3


def test_case_round_trip(tmp_path):
    c = bundled_case("case9")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(case_to_dict(c)))
    again = load_case(p)
    assert again == c


def test_zero_inertia_names_generator(tmp_path):
    d = case_to_dict(bundled_case("case9"))
    d["generators"][1]["M"] = 0.0
    with pytest.raises(ValidationError, match=r"generators\[1\]\.M"):
        case_from_dict(d)


def test_asymmetric_line_list_rejected():
    d = case_to_dict(bundled_case("smib"))
    d["lines"][1]["Y"] = 2.0
    with pytest.raises(ValidationError, match="matching"):
        case_from_dict(d)


def test_unbalanced_load_split_rejected():
    d = case_to_dict(bundled_case("smib"))
    d["loads"][0]["P_cd0"] = 0.4
    with pytest.raises(ValidationError, match="P_cd0"):
        case_from_dict(d)


def test_schema_violation_reports_path():
    d = case_to_dict(bundled_case("smib"))
    d["buses"][0]["kind"] = "bogus"
    with pytest.raises(ValidationError, match="buses/0/kind"):
        case_from_dict(d)


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_case(tmp_path / "none.json")


# ----------------------------------------------------------------------------
# electrical power


def test_single_line_power():
    c = two_bus()
    Pe = electrical_power(c, [math.pi / 6, 0.0])
    assert Pe[0] == pytest.approx(-0.5, abs=1e-15)


def test_flat_angles_give_zero_power():
    c = bundled_case("case9")
    assert np.allclose(electrical_power(c, np.zeros(c.n_bus)), 0.0, atol=1e-12)


def test_power_dimension_mismatch():
    with pytest.raises(ValidationError):
        electrical_power(bundled_case("case9"), np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 2**31))
def test_power_translation_invariant(alpha, seed):
    c = bundled_case("case9")
    d = np.random.default_rng(seed).uniform(-1, 1, c.n_bus)
    assert np.allclose(electrical_power(c, d + alpha), electrical_power(c, d),
                       atol=1e-12, rtol=0)


def test_power_batches_match_rows():
    c = bundled_case("case9")
    d = np.random.default_rng(1).uniform(-1, 1, (4, c.n_bus))
    batch = electrical_power(c, d)
    for k in range(4):
        assert np.array_equal(batch[k], electrical_power(c, d[k]))


# ----------------------------------------------------------------------------
# equilibrium and linearization


def test_smib_equilibrium_arcsin():
    eq = solve_equilibrium(bundled_case("smib"))
    assert eq.x_e[1] == pytest.approx(math.pi / 6, abs=1e-6)
    assert eq.residual_norm <= 1e-10
    assert eq.x_e[0] == 0.0


def test_zero_injection_flat_start():
    c = two_bus(math.pi / 2)
    eq = solve_equilibrium(c)
    assert np.allclose(eq.x_e, 0.0)
    assert eq.iterations == 0


def test_overloaded_smib_fails():
    d = case_to_dict(bundled_case("smib"))
    d["generators"][0]["P_g"] = 1.5
    d["loads"][0].update(P_d=1.5, P_cd0=0.75, P_ncd0=0.75)
    with pytest.raises(NumericalError, match="residual"):
        solve_equilibrium(case_from_dict(d))


def test_smib_jacobian(smib):
    assert np.allclose(smib.A0, [[-0.1, -0.8660], [1.0, 0.0]], atol=1e-4)
    assert smib.state_labels == ["omega_1", "delta_1-delta_2"]


def test_equilibrium_residual_bound(case9):
    eq = solve_equilibrium(case9)
    lay = Layout(case9)
    assert np.abs(lay.rhs(eq.x_e, nominal_injection(case9))).max() <= 1e-10
    assert np.all(eq.x_e[:lay.ng] == 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_jacobian_matches_finite_differences(seed):
    c = random_case(np.random.default_rng(seed))
    eq = solve_equilibrium(c)
    lay = Layout(c)
    P = nominal_injection(c)
    J = lay.jacobian(eq.x_e)
    h = 1e-6
    fd = np.empty_like(J)
    for k in range(lay.n):
        e = np.zeros(lay.n)
        e[k] = h
        fd[:, k] = (lay.rhs(eq.x_e + e, P) - lay.rhs(eq.x_e - e, P)) / (2 * h)
    scale = np.abs(J).max()
    assert np.abs(fd - J).max() <= 1e-6 * scale


def test_input_matrix_is_exact(case9):
    lay = Layout(case9)
    x = np.random.default_rng(2).normal(0, 0.1, lay.n)
    P = nominal_injection(case9)
    dP = np.random.default_rng(3).normal(0, 0.1, case9.n_bus)
    assert np.allclose(lay.rhs(x, P + dP) - lay.rhs(x, P), lay.input_matrix() @ dP)


def test_rate_maps_linearize_bus_rates(case9):
    eq = solve_equilibrium(case9)
    lay = Layout(case9)
    Fx, Fu = lay.rate_maps(eq.x_e)
    P = nominal_injection(case9)
    dx = 1e-6 * np.random.default_rng(4).normal(size=lay.n)
    dP = 1e-6 * np.random.default_rng(5).normal(size=case9.n_bus)
    r1, _ = lay.bus_rates(eq.x_e + dx, P + dP)
    r0, _ = lay.bus_rates(eq.x_e, P)
    assert np.allclose(r1 - r0, Fx @ dx + Fu @ dP, atol=1e-12)


def test_reduced_model_holds_equilibrium(case9):
    eq = solve_equilibrium(case9)
    lay = Layout(case9)
    P = nominal_injection(case9)
    x = eq.x_e.copy()
    for _ in range(1000):
        x = x + 1e-3 * lay.rhs(x, P)
    assert np.abs(x - eq.x_e).max() < 1e-9


def test_measurement_selections(case9):
    C, labels = measurement_matrix(case9, "full")
    assert np.array_equal(C, np.eye(case9.n_states))
    C, labels = measurement_matrix(case9, "generators")
    assert C.shape[0] < case9.n_states
    assert labels[0].startswith("omega")
    C, labels = measurement_matrix(case9, "rows=0,2")
    assert C.shape == (2, case9.n_states)
    with pytest.raises(ValidationError):
        measurement_matrix(case9, "rows=")
    with pytest.raises(ValidationError):
        measurement_matrix(case9, [99])


def test_smib_generator_measurement(smib_case):
    lm = linearize(smib_case, solve_equilibrium(smib_case), "generators")
    assert lm.s < lm.n
    assert lm.C0[0, 0] == 1.0


def test_linearize_rejects_bad_equilibrium(case9):
    eq = solve_equilibrium(case9)
    eq.x_e = eq.x_e + 0.1
    with pytest.raises(NumericalError):
        linearize(case9, eq)


def test_linear_model_dict_round_trip(case9_full):
    again = LinearModel.from_dict(json.loads(json.dumps(case9_full.to_dict())))
    assert np.array_equal(again.A0, case9_full.A0)
    assert np.array_equal(again.rate_state, case9_full.rate_state)
    assert again.injection_index == case9_full.injection_index


# ----------------------------------------------------------------------------
# assumptions


def test_assumptions_smib_like():
    m = LinearModel([[-0.1, -0.8660], [1.0, 0.0]], [[1.0], [0.0]], np.eye(2),
                    ["w", "d"], ["u"], ["w", "d"])
    rep = check_assumptions(m)
    assert rep.hurwitz and rep.max_real_eig == pytest.approx(-0.05)
    assert rep.controllable and rep.controllability_rank == 2


def test_assumptions_identity_not_hurwitz():
    rep = check_assumptions(LinearModel(np.eye(2), np.ones((2, 1)), np.eye(2),
                                        ["a", "b"], ["u"], ["a", "b"]))
    assert not rep.hurwitz


def test_assumptions_zero_measurement():
    rep = check_assumptions(LinearModel(-np.eye(2), np.ones((2, 1)), np.zeros((1, 2)),
                                        ["a", "b"], ["u"], ["y"]))
    assert not rep.observable and rep.observability_rank == 0 and rep.rank_C0 == 0


def test_bundled_cases_meet_assumptions(case9_full, smib):
    for m in (case9_full, smib):
        rep = check_assumptions(m)
        assert rep.hurwitz and rep.controllable and rep.observable
