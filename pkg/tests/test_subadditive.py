import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergolab.errors import SubadditivityViolation, ValidationError
from ergolab.ergodic import liminf_profile
from ergolab.measure import DiscreteSystem, PointMassMeasure, load_system
from ergolab.subadditive import (AdditiveProcess, CocycleProcess, CustomProcess, ScalarSequence,
                                 TruncatedProcess, audit_subadditivity, check_subadditive, derriennic_limit,
                                 fekete_limit, truncation_ladder)

from conftest import fixture_path, invariant_fixtures, load_fixture


def test_fekete_log_example():
    seq = ScalarSequence(lambda n: n + np.log(n + 1.0), 1000)
    res = fekete_limit(seq)
    assert abs(res.estimate - 1.0) < 1e-2
    assert res.estimate == res.running_inf[-1]


def test_fekete_sqrt_and_constant():
    assert abs(fekete_limit(ScalarSequence(lambda n: 3 * n + np.sqrt(n), 4000)).estimate - 3) < 0.02
    assert fekete_limit(ScalarSequence(lambda n: 0 * n + 5.0, 10)).estimate == 0.5


def test_fekete_divergence_flag():
    res = fekete_limit(ScalarSequence(lambda n: -1e7 * n * np.log(n + 1.0), 200))
    assert res.diverges and res.estimate == -math.inf


def test_fekete_rejects_superadditive():
    with pytest.raises(SubadditivityViolation) as exc:
        fekete_limit(ScalarSequence(lambda n: n * n * 1.0, 50))
    m, n = exc.value.witness
    assert (m + n) ** 2 > m * m + n * n


def test_derriennic_reduces_to_fekete():
    seq = ScalarSequence(lambda n: n + np.log(n + 1.0), 500)
    zero = ScalarSequence(lambda n: 0.0 * n, 500)
    assert derriennic_limit(seq, zero).estimate == fekete_limit(seq).estimate


def test_derriennic_with_error_term():
    # a_n = 2n + 3 sin(n) violates plain subadditivity but satisfies it with c_n = 9
    seq = ScalarSequence(lambda n: 2 * n + 3 * np.sin(n), 5000)
    c = ScalarSequence(lambda n: 9.0 + 0 * n, 5000)
    assert abs(derriennic_limit(seq, c).estimate - 2.0) < 1e-2
    with pytest.raises(ValidationError):
        derriennic_limit(seq, ScalarSequence(lambda n: 1.0 * n, 5000))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0, 5), st.integers(20, 400))
def test_fekete_inf_nonincreasing_in_horizon(slope, bump, horizon):
    seq = ScalarSequence(lambda n: slope * n + bump * np.sqrt(n), 2 * horizon)
    a = fekete_limit(seq, horizon).estimate
    b = fekete_limit(seq, 2 * horizon).estimate
    assert b <= a


def test_additive_table_matches_sums():
    sys = DiscreteSystem(4, [1, 2, 0, 0], {"phi": [1.0, -2.0, 0.5, 3.0]})
    proc = AdditiveProcess.from_system(sys, "phi")
    t = proc.table(sys, 10)
    for x in range(4):
        for n in range(1, 11):
            assert t[n][x] == pytest.approx(sum(sys.observables["phi"][s] for s in sys.orbit(x, n)), abs=1e-12)


def test_cocycle_norms_and_audit():
    sys, _ = load_system(fixture_path("cocycles/singular4.json"))
    mats = load_fixture("cocycles/singular4.proc.json")["matrices"]
    for norm in ("spectral", "frobenius"):
        proc = CocycleProcess(mats, norm=norm)
        assert audit_subadditivity(proc, sys, 64) is None


def test_cocycle_validation():
    with pytest.raises(ValidationError):
        CocycleProcess([[[1.0, 0.0], [0.0, 1.0]]], norm="max")


def test_custom_process_audit_finds_witness():
    sys = DiscreteSystem(2, [1, 0])
    bad = CustomProcess(lambda s, x, n: float(n * n))
    assert audit_subadditivity(bad, sys, 8) is not None


@pytest.mark.parametrize("path", invariant_fixtures()[:8], ids=lambda p: p.stem)
def test_audit_on_fixtures(path):
    sys, _ = load_system(path)
    assert audit_subadditivity(AdditiveProcess.from_system(sys, "phi"), sys, 64) is None


def test_truncation_trivial_cases():
    sys = DiscreteSystem(3, [1, 2, 0])
    inactive = CustomProcess(lambda s, x, n: -0.5 * n)
    t = TruncatedProcess(inactive, 2).table(sys, 16)
    assert np.array_equal(t, inactive.table(sys, 16))
    saturating = CustomProcess(lambda s, x, n: -5.0 * n)
    t = TruncatedProcess(saturating, 2).table(sys, 16)
    assert np.array_equal(t[1:], (-2.0 * np.arange(1, 17))[:, None] * np.ones((1, 3)))


def test_truncation_monotone_on_singular_cocycle():
    sys, _ = load_system(fixture_path("cocycles/singular4.json"))
    proc = CocycleProcess(load_fixture("cocycles/singular4.proc.json")["matrices"])
    t1 = TruncatedProcess(proc, 1).table(sys, 32)
    t2 = TruncatedProcess(proc, 2).table(sys, 32)
    t = proc.table(sys, 32)
    assert np.all(t1 >= t2) and np.all(t2 >= t)


@pytest.mark.parametrize("path", invariant_fixtures(), ids=lambda p: p.stem)
def test_truncation_ladder_items(path):
    sys, mu = load_system(path)
    proc = AdditiveProcess.from_system(sys, "phi")
    out = truncation_ladder(proc, sys, mu, liminf_profile(sys, proc).values, range(1, 9))
    for item in ("i", "ii", "iii", "vi", "vii", "viii", "ix", "x", "xi", "r3a"):
        assert out[item]["holds"], (item, out[item])


def test_truncation_ladder_cocycle_with_minus_infinity():
    sys, mu = load_system(fixture_path("cocycles/nilpotent.json"))
    proc = CocycleProcess(load_fixture("cocycles/nilpotent.proc.json")["matrices"])
    out = truncation_ladder(proc, sys, mu, liminf_profile(sys, proc).values, range(1, 9), n_max=32)
    for item in ("i", "iii", "vi", "vii", "ix", "xi"):
        assert out[item]["holds"], item
