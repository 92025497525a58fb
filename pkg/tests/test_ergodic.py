import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergolab.errors import ValidationError
from ergolab.ergodic import (birkhoff_average, build_ek_family, cesaro_sequence, check_condition_a,
                             check_condition_b, check_condition_c, check_gooda_conditions, check_hypotheses,
                             check_lemma1_inequality, krylov_spectral_radius, liminf_profile,
                             search_counterexamples, truncation_report, verify_corollary_b, verify_theorem_a)
from ergolab.measure import DiscreteSystem, PointMassMeasure, load_system, measure_of, orbit_decomposition, preimage
from ergolab.subadditive import AdditiveProcess, CocycleProcess, CustomProcess, TruncatedProcess

from conftest import fixture_path, invariant_fixtures, load_fixture


def brute_cesaro(sys, mu, s, n, k=0):
    """(1/n) sum_{i<n-k} mu(f^-i S), walking the preimages one step at a time."""
    vals, cur = [], s
    for _ in range(max(0, n - k)):
        vals.append(measure_of(mu, cur))
        cur = preimage(sys, cur)
    return math.fsum(vals) / n


def random_system(seed, n_max=8, invariant=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    sys = DiscreteSystem(n, rng.integers(0, n, size=n), {"phi": np.round(rng.normal(size=n), 3)})
    if invariant:
        atoms = {}
        for x in range(n):
            for s in orbit_decomposition(sys, x)[1]:
                atoms[s] = 1.0
        mu = PointMassMeasure(tuple((s, 1.0 / len(atoms)) for s in sorted(atoms)))
        # uniform on the union of cycles is invariant
    else:
        w = rng.dirichlet(np.ones(n))
        mu = PointMassMeasure(tuple(enumerate(w.tolist())))
    return sys, mu


def test_birkhoff_average():
    sys, _ = load_system(fixture_path("tails.json"))
    assert birkhoff_average(sys, "phi", 0, 4) == pytest.approx((5 - 1 + 0.25 + 2) / 4)
    with pytest.raises(ValidationError):
        birkhoff_average(sys, "nope", 0, 4)
    with pytest.raises(ValidationError):
        birkhoff_average(sys, "phi", 0, 0)


def test_birkhoff_converges_to_cycle_mean():
    sys, _ = load_system(fixture_path("tails.json"))
    pre, cyc = orbit_decomposition(sys, 0)
    mean = np.mean([sys.observables["phi"][s] for s in cyc])
    assert abs(birkhoff_average(sys, "phi", 0, 30001) - mean) < 1e-3


def test_profile_exact_additive():
    sys, _ = load_system(fixture_path("tails.json"))
    prof = liminf_profile(sys, AdditiveProcess.from_system(sys, "phi"))
    assert prof.method == "exact_cycle"
    assert prof.values[0] == pytest.approx((-1 + 0.25 + 2) / 3, abs=1e-15)
    assert prof.values[7] == 3.0


def test_profile_custom_estimate_labels():
    sys = DiscreteSystem(2, [1, 0])
    proc = CustomProcess(lambda s, x, n: 0.3 * n + math.log(n + 1))
    prof = liminf_profile(sys, proc)
    assert prof.method == "horizon_estimate"
    assert prof.horizon is not None
    assert abs(prof.values[0] - 0.3) < 1e-2


def test_krylov_restriction():
    c = np.diag([3.0, 0.5])
    assert krylov_spectral_radius(c) == pytest.approx(3.0)
    assert krylov_spectral_radius(c, np.array([[0.0], [1.0]])) == pytest.approx(0.5)
    assert krylov_spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0


def test_cocycle_profile_prefix_kills_direction():
    # state 0 projects onto e2, then the cycle at state 1 multiplies by diag(3, 0.5)
    sys = DiscreteSystem(2, [1, 1])
    proc = CocycleProcess([[[0.0, 0.0], [0.0, 1.0]], [[3.0, 0.0], [0.0, 0.5]]])
    prof = liminf_profile(sys, proc)
    assert prof.values[1] == pytest.approx(math.log(3))
    assert prof.values[0] == pytest.approx(math.log(0.5))
    t = proc.table(sys, 200)
    assert t[200][0] / 200 == pytest.approx(math.log(0.5), abs=1e-2)


def test_condition_a():
    sys = DiscreteSystem(3, [1, 2, 2], {"phi": [0.0, 0.0, 1.0]})
    proc = AdditiveProcess.from_system(sys, "phi")
    assert check_condition_a(sys, PointMassMeasure.dirac(0), liminf_profile(sys, proc)) == (True, 0.0)
    # a custom process whose liminf differs along the orbit
    prof = liminf_profile(sys, proc)
    fake = type(prof)(np.array([0.0, 1.0, 1.0]), "exact_cycle")
    ok, worst = check_condition_a(sys, PointMassMeasure.dirac(0), fake)
    assert not ok and worst == 1.0
    assert check_condition_a(sys, PointMassMeasure(((0, 0.0), (1, 1.0))), fake)[0]


def test_ek_family_nested_and_covering():
    for seed in range(20):
        sys, _ = random_system(seed)
        proc = AdditiveProcess.from_system(sys, "phi")
        fam = build_ek_family(sys, proc, 0.1, 40)
        ks = sorted(fam.sets)
        assert all(fam.sets[a].issubset(fam.sets[b]) for a, b in zip(ks, ks[1:]))
        assert fam.k_cover is not None and fam.sets[fam.k_cover].is_full()


def test_ek_membership_tie_breaking():
    # phi_1(x) = phi_-(x) + eps exactly, up to float noise
    sys = DiscreteSystem(1, [0], {"phi": [0.1 + 0.2]})
    proc = AdditiveProcess.from_system(sys, "phi")
    fam = build_ek_family(sys, proc, 0.3, 2)
    assert 0 in fam[1]


@pytest.mark.parametrize("seed", range(25))
def test_cesaro_exact_vs_brute_force(seed):
    sys, mu = random_system(seed)
    proc = AdditiveProcess.from_system(sys, "phi")
    fam = build_ek_family(sys, proc, 0.25, 8)
    for k in (1, 2, 3):
        comp = fam.complement(min(k, fam.k_max))
        seq = cesaro_sequence(sys, mu, comp)
        for n in (1, 7, 50, 333):
            assert seq.cesaro(n, k) == pytest.approx(brute_cesaro(sys, mu, comp, n, k), abs=1e-12)
        assert seq.limit() == pytest.approx(brute_cesaro(sys, mu, comp, 10_000), abs=1e-9 + 2 * sys.n_states / 1e4)


@pytest.mark.parametrize("seed", range(25))
def test_condition_c_matches_exhaustive(seed):
    sys, mu = random_system(seed + 100)
    proc = AdditiveProcess.from_system(sys, "phi")
    fam = build_ek_family(sys, proc, 0.2, 12)
    res = check_condition_c(sys, mu, fam)
    top = fam.k_cover or fam.k_max
    exhaustive = True
    for k in range(1, top + 1):
        base = measure_of(mu, fam.complement(k))
        cur = fam.complement(k)
        for _ in range(1, 200):
            cur = preimage(sys, cur)
            exhaustive &= measure_of(mu, cur) <= base + 1e-12
    assert res.holds == exhaustive
    if not res.holds:
        i, k, eps = res.witness
        assert measure_of(mu, preimage(sys, fam.complement(k), i)) > measure_of(mu, fam.complement(k))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_condition_c_implies_b_and_invariant_measures_satisfy_c(seed):
    sys, mu = random_system(seed, invariant=bool(seed % 2))
    proc = AdditiveProcess.from_system(sys, "phi")
    hyp = check_hypotheses(sys, mu, proc, ell_max=3, k_max=24)
    if hyp.condition_c.holds:
        assert hyp.condition_b.holds
    if seed % 2:
        assert hyp.condition_c.holds


def test_three_cycle_theorem_a():
    sys, mu = load_system(fixture_path("three_cycle.json"))
    rep = verify_theorem_a(sys, mu, AdditiveProcess.from_system(sys, "ind0"), 300)
    assert rep.hypotheses.condition_a[0] and rep.hypotheses.condition_b.holds
    assert rep.L == pytest.approx(1 / 3, abs=1e-15)
    assert rep.verdict == "holds"
    assert abs(rep.R[-1] - 1 / 3) < 1e-12


@pytest.mark.parametrize("path", invariant_fixtures(), ids=lambda p: p.stem)
def test_theorem_a_on_invariant_fixtures(path):
    sys, mu = load_system(path)
    exp = load_fixture(f"systems/{path.name}")["expected"]
    rep = verify_theorem_a(sys, mu, AdditiveProcess.from_system(sys, "phi"), 1024)
    assert rep.verdict == "holds"
    assert abs(rep.L - exp["L"]) <= 1e-12
    assert abs(rep.inf_R - rep.L) <= 1e-9
    p = exp["period_lcm"]
    for m in range(p, 1025, p):
        assert abs(rep.R[m - 1] - rep.L) <= 1e-12


@pytest.mark.parametrize("name", ["swap", "collapse", "c_holds"])
def test_counterexamples_to_inf_equality(name):
    doc = load_fixture(f"counterexamples/{name}.json")
    sys, mu = load_system(fixture_path(f"counterexamples/{name}.json"))
    rep = verify_theorem_a(sys, mu, AdditiveProcess.from_system(sys, "phi"), 2048)
    exp = doc["expected"]
    hyp = rep.hypotheses
    assert hyp.condition_a[0] is exp["condition_a"]
    assert hyp.condition_b.holds is exp["condition_b"]
    assert hyp.condition_c.holds is exp["condition_c"]
    assert rep.L == pytest.approx(exp["L"], abs=1e-12)
    assert rep.R[0] == pytest.approx(exp["R_1"], abs=1e-12)
    # the limit form holds, the infimum form does not
    assert rep.limit_consistent and abs(rep.limit_gap) < 2e-3
    assert rep.inf_equality is False and rep.verdict == "fails"
    cb = verify_corollary_b(sys, mu, "phi", 256)
    assert cb.verdict == "fails" and cb.tags == ("CorollaryB",)


def test_corollary_b_via_condition_c_on_invariant():
    sys, mu = load_system(fixture_path("systems/inv_03.json"))
    rep = verify_corollary_b(sys, mu, "phi", 512)
    assert rep.verdict == "holds" and "hypothesis (b)" in rep.reason


def test_cocycle_theorem_a_fixtures():
    for name in ("const_diag", "const_nonnormal", "const_rotation_scaled", "const_jordan", "alternating"):
        sys, mu = load_system(fixture_path(f"cocycles/{name}.json"))
        proc = CocycleProcess(load_fixture(f"cocycles/{name}.proc.json")["matrices"])
        rep = verify_theorem_a(sys, mu, proc, 1024)
        assert abs(rep.L - load_fixture(f"cocycles/{name}.json")["expected"]["L"]) <= 1e-9, name
        assert rep.verdict == "holds", name


def test_nilpotent_cocycle_minus_infinity():
    sys, mu = load_system(fixture_path("cocycles/nilpotent.json"))
    proc = CocycleProcess(load_fixture("cocycles/nilpotent.proc.json")["matrices"])
    rep = verify_theorem_a(sys, mu, proc, 64)
    assert rep.L == -math.inf and rep.inf_R == -math.inf


def test_truncated_process_R_monotone_in_k():
    sys, mu = load_system(fixture_path("cocycles/singular4.json"))
    proc = CocycleProcess(load_fixture("cocycles/singular4.proc.json")["matrices"])
    Rs = [verify_theorem_a(sys, mu, TruncatedProcess(proc, k), 64).R for k in range(1, 9)]
    for a, b in zip(Rs, Rs[1:]):
        assert np.all(a >= b - 1e-15)
    assert np.allclose(Rs[-1], verify_theorem_a(sys, mu, proc, 64).R, atol=1e-12)


def test_truncation_report_tags():
    sys, mu = load_system(fixture_path("three_cycle.json"))
    out = truncation_report(sys, mu, AdditiveProcess.from_system(sys, "ind0"))
    assert out["tags"] == ["LemmaAssumpa"]


def test_gooda_conditions_on_tails():
    sys, _ = load_system(fixture_path("tails.json"))
    for x in range(sys.n_states):
        rep = check_gooda_conditions(sys, "phi", x)
        pre, cyc = orbit_decomposition(sys, x)
        mean = math.fsum(sys.observables["phi"][s] for s in cyc) / len(cyc)
        assert rep.conditions["ii"] and rep.limit == pytest.approx(mean, abs=1e-12)
        # Claim 1: orbit times outside E_k are a finite set inside one cycle window
        for eps, times in rep.claim1.items():
            assert all(t < len(pre) + len(cyc) for t in times)


@pytest.mark.parametrize("seed", range(6))
def test_lemma1_inequality_samples(seed):
    sys, _ = random_system(seed + 50)
    proc = AdditiveProcess.from_system(sys, "phi")
    rng = np.random.default_rng(seed)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        k = int(rng.integers(1, n))
        ok, slack = check_lemma1_inequality(sys, proc, 0.25, k, n, int(rng.integers(0, sys.n_states)))
        assert ok, slack


def test_search_counterexamples_records_findings():
    found = search_counterexamples(seed=42, trials=120)
    assert found["searched"]["trials"] > 0
    assert found["hypotheses_hold_inf_fails"] is not None
    # condition (b) on finite systems with finite phi_- always holds at the covering k
    assert found["b_fails_gap"] is None
