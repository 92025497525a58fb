import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from ergolab.errors import IntegrationFailure, ValidationError
from ergolab.flow import backend as bk
from ergolab.flow.engine import (FlowSpec, IntegratorConfig, Observable, Trajectory, check_2d_point,
                                 check_gooda11, check_theorem_c, estimate_omega, integrate, observable_from_expr,
                                 psi_reduce, time_average)
from ergolab.flow.fields import Poly, PolyMap, builtin_field, load_coefficients, parse_poly, resolve_field

from conftest import fixture_path

BACKENDS = list(bk.AVAILABLE)


# --- polynomials and fields ---------------------------------------------------------------

def test_parse_poly_and_eval():
    p = parse_poly("(x - 1)**2 + 3*x*y - 2", ["x", "y"])
    assert p(np.array([2.0, 1.0])) == pytest.approx(1 + 6 - 2)
    assert p.degree() == 2
    with pytest.raises(ValidationError):
        parse_poly("x**y", ["x", "y"])


def test_polymap_rows_match_single():
    pm = PolyMap.from_polys([parse_poly("x*y + 1", ["x", "y"]), parse_poly("y**3", ["x", "y"])])
    U = np.random.default_rng(0).normal(size=(20, 2))
    assert np.allclose(pm.eval_rows(U), np.array([pm(u) for u in U]))


def test_unsafe_expressions_rejected():
    with pytest.raises(ValidationError):
        observable_from_expr("__import__('os').system('true')")


def test_empty_observable_rejected():
    with pytest.raises(ValidationError):
        observable_from_expr("")
    with pytest.raises(ValidationError):
        Observable("", lambda x: 0.0)


def test_coefficient_files():
    fld = resolve_field(str(fixture_path("fields/rotation_coeffs.json")))
    assert np.allclose(fld(np.array([1.0, 0.0])), [0.0, 1.0])
    fld = load_coefficients({"dimension": 1, "rhs": [[{"coef": -2.0, "exps": [1]}]]})
    assert np.allclose(fld(np.array([3.0])), [-6.0])
    with pytest.raises(ValidationError):
        load_coefficients({"dimension": 2, "rhs": [[]]})
    with pytest.raises(ValidationError):
        resolve_field("no-such-field")


def test_eye_log_chart_matches_physical_field():
    log = builtin_field("eye-log")
    phys = builtin_field("eye")
    rng = np.random.default_rng(1)
    for _ in range(50):
        r, th = math.sqrt(rng.random()) * 0.95, rng.random() * math.pi
        x = np.array([r * math.cos(th), r * math.sin(th)])
        z = log.to_chart(x)
        dz = log(z)
        # chain rule: d/dt ln y = y'/y, d/dt ln(-rho) = rho'/rho
        v = phys(x)
        rho = x @ x - 1
        assert dz[0] == pytest.approx(v[0], abs=1e-12)
        assert dz[1] == pytest.approx(v[1] / x[1], rel=1e-9, abs=1e-12)
        assert dz[2] == pytest.approx((2 * x @ v) / rho, rel=1e-9, abs=1e-12)


# --- integration against scipy ---------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_sink_closed_form(backend):
    flow = FlowSpec.builtin("sink")
    x = integrate(flow, [1.0, -2.0], 3.0, backend=backend)
    assert np.allclose(x, np.exp(-3.0) * np.array([1.0, -2.0]), atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
def test_rotation_period(backend):
    x = integrate(FlowSpec.builtin("rotation"), [1.0, 0.0], 2 * math.pi, backend=backend)
    assert np.allclose(x, [1.0, 0.0], atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(4))
def test_eye_against_solve_ivp(backend, seed):
    rng = np.random.default_rng(seed)
    r, th = 0.2 + 0.6 * rng.random(), 0.2 + 2.7 * rng.random()
    x0 = [r * math.cos(th), r * math.sin(th)]
    phys = builtin_field("eye")
    ref = solve_ivp(lambda t, x: phys(np.asarray(x)), (0, 5.0), x0, method="DOP853", rtol=1e-12, atol=1e-13)
    for name in ("eye", "eye-log"):
        got = integrate(FlowSpec.builtin(name), x0, 5.0, backend=backend)
        assert np.allclose(got, ref.y[:, -1], atol=1e-7), name


def test_damped_oscillator_coefficients_against_solve_ivp():
    fld = resolve_field(str(fixture_path("fields/damped.json")))
    flow = FlowSpec.from_field(fld)
    ref = solve_ivp(lambda t, x: [x[1], -x[0] - 0.5 * x[1]], (0, 10.0), [1.0, 0.0], rtol=1e-12, atol=1e-13)
    assert np.allclose(integrate(flow, [1.0, 0.0], 10.0), ref.y[:, -1], atol=1e-8)


def test_callable_field_path():
    flow = FlowSpec.from_callable(lambda x: -x, 2)
    assert np.allclose(integrate(flow, [1.0, 1.0], 1.0), math.exp(-1), atol=1e-9)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
def test_backends_agree_on_bowen_segment():
    flow = FlowSpec.builtin("bowen")
    obs = observable_from_expr("x")
    runs = [Trajectory(flow, [obs], b).run([0.0, 0.5], [50.0, 200.0]) for b in ("cython", "python")]
    assert np.allclose(runs[0].chart, runs[1].chart, rtol=1e-12, atol=1e-12)
    assert np.allclose(runs[0].quad, runs[1].quad, rtol=1e-12, atol=1e-12)
    assert runs[0].n_accepted == runs[1].n_accepted


def test_integration_failure_is_reported():
    # finite-time blow-up of x' = x^2 at t = 1
    fld = load_coefficients({"variables": ["x"], "rhs": ["x**2"]})
    flow = FlowSpec.from_field(fld, box=1e300)
    with pytest.raises(IntegrationFailure) as exc:
        integrate(flow, [1.0], 2.0)
    assert 0.9 < exc.value.last_time <= 1.0
    assert exc.value.partial is not None


def test_max_steps_budget():
    flow = FlowSpec.builtin("rotation", max_steps=5)
    with pytest.raises(IntegrationFailure):
        integrate(flow, [1.0, 0.0], 100.0)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        integrate(FlowSpec.builtin("sink"), [1.0], 1.0)
    with pytest.raises(ValidationError):
        IntegratorConfig(abs_tol=-1.0)
    with pytest.raises(ValidationError):
        integrate(FlowSpec.builtin("eye"), [0.0, -0.5], 1.0)


# --- time averages -----------------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_sink_average_closed_form(backend):
    # x(t) = e^{-t}: (1/T) int_0^T x^2 = (1 - e^{-2T}) / (2T)
    tr = time_average(FlowSpec.builtin("sink1d"), observable_from_expr("x**2", 1), [1.0], 20.0, backend=backend)
    T = tr.sample_times
    assert np.allclose(tr.running_average, (1 - np.exp(-2 * T)) / (2 * T), rtol=1e-8, atol=1e-12)


def test_rotation_average_of_x_vanishes():
    tr = time_average(FlowSpec.builtin("rotation"), observable_from_expr("x"), [1.0, 0.0], 200 * math.pi)
    assert abs(tr.final) < 1e-9


def test_nonpolynomial_observable_uses_callable_path():
    obs = observable_from_expr("cos(x)", 2)
    assert obs.poly is None
    tr = time_average(FlowSpec.builtin("sink"), obs, [0.0, 0.0], 10.0)
    assert tr.final == pytest.approx(1.0, abs=1e-12)
    assert tr.backend == "python-callable"


def test_trace_csv_rows_shape():
    tr = time_average(FlowSpec.builtin("sink"), observable_from_expr("x"), [1.0, 0.0], 10.0, n_checkpoints=64)
    rows = list(tr.csv_rows())
    assert len(rows) == len(tr.sample_times) and len(rows[0]) == 4
    assert all(lo <= avg <= hi for _, avg, lo, hi in rows)


# --- psi reduction ------------------------------------------------------------------------------

@pytest.mark.parametrize("field, obs, x0", [
    ("rotation", "x + 0.3*y**2", [1.0, 0.0]),
    ("sink", "x**2 + y", [0.7, -0.4]),
])
def test_psi_identity_and_boundary(field, obs, x0):
    flow = FlowSpec.builtin(field)
    red = psi_reduce(flow, observable_from_expr(obs))
    ident = red.check_identity(x0, (1, 8, 32, 128))
    assert ident["max_gap"] <= 1e-6
    bnd = red.check_boundary(x0, (10.0, 100.0, 1000.0))
    assert bnd["holds"]


# --- omega limits and criteria ---------------------------------------------------------------

def test_omega_sink_single_point_and_theorem_c():
    flow = FlowSpec.builtin("sink")
    obs = observable_from_expr("x**2 + y")
    om = estimate_omega(flow, [0.5, 0.5], burn_in_T=50.0)
    assert om.stable and om.n_points == 1 and np.allclose(om.points[0], 0.0, atol=1e-3)
    rep = check_theorem_c(flow, obs, [0.5, 0.5], om, horizon=200.0)
    assert rep["verdict"] == "holds" and "LemmaFixedPoint" in rep["tags"]
    assert rep["omega_value"] == pytest.approx(0.0, abs=1e-6)


def test_omega_rotation_is_the_circle():
    om = estimate_omega(FlowSpec.builtin("rotation"), [1.0, 0.0], burn_in_T=20.0, resolution=1e-2, threshold=2e-2)
    assert om.stable
    radii = np.linalg.norm(om.points, axis=1)
    assert np.all(np.abs(radii - 1.0) < 2e-2)
    angles = np.sort(np.arctan2(om.points[:, 1], om.points[:, 0]))
    assert np.max(np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))) < 0.05


def test_2d_point_sink():
    rep = check_2d_point(FlowSpec.builtin("sink"), [0.5, 0.5], burn_in_T=40.0)
    assert rep["is_2d_point"] is True and len(rep["fixed_points"]) == 1


def test_gooda11_rotation():
    rep = check_gooda11(FlowSpec.builtin("rotation"), observable_from_expr("x"), [1.0, 0.0], t_probe=200)
    assert rep["verdict"] == "holds"
    assert all(p["k_eps"] is not None for p in rep["per_epsilon"])


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_sink_average_tends_to_value_at_zero(a, b):
    # Lemma on fixed points: omega = {0}, so the average tends to phi(0) = 1
    tr = time_average(FlowSpec.builtin("sink"), observable_from_expr("1 + x*y"), [a, b], 1000.0, n_checkpoints=32)
    assert abs(tr.final - 1.0) <= (abs(a * b) / 2) / 1000 + 1e-9
