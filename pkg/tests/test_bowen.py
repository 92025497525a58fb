import math
from fractions import Fraction

import numpy as np
import pytest

from ergolab.bowen import (HybridDwellModel, SaddleData, attraction_mechanism, bowen_field, cycle_moduli,
                           eye_minimum, eye_saddles, hybrid_averages, hybrid_oracle, run_bowen_experiment,
                           zero_transit_limits)
from ergolab.errors import ValidationError
from ergolab.flow import backend as bk
from ergolab.flow.engine import observable_from_expr

from conftest import load_fixture


def test_saddle_eigenvalues_match_closed_form():
    for kappa in (0.0, 1 / 3, 0.5):
        A, B = eye_saddles(bowen_field(kappa, 0.1, "physical"))
        assert A.expanding == pytest.approx(2.0, abs=1e-6)
        assert A.contracting == pytest.approx(2 * (1 + kappa), abs=1e-6)
        assert B.expanding == pytest.approx(2 * (1 - kappa), abs=1e-6)
        assert B.contracting == pytest.approx(2.0, abs=1e-6)
        m = cycle_moduli(A, B)
        assert m.lam == pytest.approx((1 + kappa) / (1 - kappa), rel=1e-6)
        assert m.sigma == pytest.approx(1.0, rel=1e-6)


def test_attraction_mechanism_labels():
    A, B = eye_saddles(bowen_field(0.0, 0.1, "physical"))
    assert "dissipation" in attraction_mechanism(cycle_moduli(A, B), 0.1)
    A, B = eye_saddles(bowen_field(1 / 3, 0.1, "physical"))
    assert "eigenvalue" in attraction_mechanism(cycle_moduli(A, B), 0.1)


def test_boundary_is_invariant():
    flow = bowen_field(1 / 3, 0.1, "physical")
    for x in np.linspace(-0.9, 0.9, 7):
        assert flow.vector_field([x, 0.0])[1] == 0.0
    for th in np.linspace(0.1, 3.0, 7):
        p = np.array([math.cos(th), math.sin(th)])
        assert abs(p @ flow.vector_field(p)) < 1e-12


def test_eye_minimum_of_symmetric_observable():
    val, arg = eye_minimum(observable_from_expr("eye-symmetric"))
    assert val == pytest.approx(0.0, abs=1e-9)
    assert abs(abs(arg[0]) - 1.0) < 1e-3


def test_saddle_validation():
    with pytest.raises(ValidationError):
        SaddleData((0.0, 0.0), -1.0, 2.0)
    with pytest.raises(ValidationError):
        bowen_field(kappa=1.5)


@pytest.mark.parametrize("lam, sigma", [(2.0, 1.0), (1.0, 2.0), (math.sqrt(2), math.sqrt(2)), (3.0, 0.9)])
def test_hybrid_matches_fraction_oracle(lam, sigma):
    A = SaddleData((-1.0, 0.0), 2.0, 2.0 * lam)      # alpha_+ = 2, alpha_- = 2 lam
    B = SaddleData((1.0, 0.0), 2.0, 2.0 * sigma)     # beta_+ = 2, beta_- = 2 sigma
    model = HybridDwellModel(A, B, 1e-3, (0.0, 1.0), (0.0, 0.0))
    tr = hybrid_averages(model, 1000)
    ea, eb = hybrid_oracle(Fraction(model.moduli.lam), Fraction(model.moduli.sigma), Fraction(model.first_dwell),
                           0, 1, 300)
    assert max(abs(float(o) - v) for o, v in zip(ea, tr.epoch_end_A)) <= 1e-9
    assert max(abs(float(o) - v) for o, v in zip(eb, tr.epoch_end_B)) <= 1e-9
    lim = zero_transit_limits(model.moduli.lam, model.moduli.sigma, 0.0, 1.0)
    assert tr.limsup_est == pytest.approx(lim["limsup"], abs=1e-9)
    assert tr.liminf_est == pytest.approx(lim["liminf"], abs=1e-9)


def test_hybrid_equal_values_has_zero_width():
    A = SaddleData((-1.0, 0.0), 2.0, 4.0)
    B = SaddleData((1.0, 0.0), 2.0, 2.0)
    tr = hybrid_averages(HybridDwellModel(A, B, 1e-3, (0.7, 0.7), (0.5, 0.5)), 1000)
    assert tr.width < 1e-9


def test_hybrid_product_below_one_flags_and_converges():
    A = SaddleData((-1.0, 0.0), 2.0, 1.0)
    B = SaddleData((1.0, 0.0), 2.0, 1.0)
    tr = hybrid_averages(HybridDwellModel(A, B, 1e-3, (0.0, 1.0), (1.0, 1.0), constants=(1.0, 1.0)), 2000)
    assert tr.flags and tr.width < 0.05


def test_hybrid_frozen_regression():
    doc = load_fixture("hybrid_regression.json")
    m = doc["model"]
    model = HybridDwellModel(SaddleData((-1.0, 0.0), *m["A"]), SaddleData((1.0, 0.0), *m["B"]), m["initial_gap"],
                             tuple(m["values"]), tuple(m["transit"]), constants=tuple(m["constants"]))
    tr = hybrid_averages(model, m["epochs"])
    assert tr.liminf_est == pytest.approx(doc["frozen"]["liminf_est"], abs=1e-12)
    assert tr.limsup_est == pytest.approx(doc["frozen"]["limsup_est"], abs=1e-12)


def test_bowen_short_run_oscillates_and_reports():
    rep, tr = run_bowen_experiment("x", (0.0, 0.5), 2e4)
    assert rep["tags"] == ["CorBowen", "CorApp"]
    assert rep["prediction"] == "OSCILLATING"
    assert rep["classification"] == "OSCILLATING"
    assert rep["dwell_analysis"]["fraction_near_saddles"] > 0.9
    assert rep["moduli"]["lambda_sigma"] > 1


def test_bowen_rejects_exterior_start():
    with pytest.raises(ValidationError):
        run_bowen_experiment("x", (0.0, 1.5), 100.0)


@pytest.mark.skipif(len(bk.AVAILABLE) < 2, reason="compiled kernel not built")
def test_bowen_backends_give_same_classification():
    outs = [run_bowen_experiment("x", (0.2, 0.3), 1e4, backend=b)[0] for b in ("cython", "python")]
    assert outs[0]["classification"] == outs[1]["classification"]
    assert outs[0]["final_average"] == pytest.approx(outs[1]["final_average"], abs=1e-6)
