"""Exact ergodic averages and hypothesis checks on finite systems.

On a finite state set every orbit is eventually periodic, so liminf rates,
the sets E_k^eps and the Cesaro limits in the hypotheses of the Kingman-like
theorem are all computable exactly from orbit decompositions.  The checkers
here decide those hypotheses and compare both sides of the conclusion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .measure import (
    DiscreteSystem,
    PointMassMeasure,
    SetIndicator,
    is_invariant,
    orbit_decomposition,
    preimage,
)
from .subadditive import (
    AdditiveProcess,
    CocycleProcess,
    CustomProcess,
    SubadditiveProcess,
    TruncatedProcess,
    truncation_ladder,
)

__all__ = [
    "MEMBERSHIP_TOL",
    "birkhoff_average",
    "LiminfProfile",
    "liminf_profile",
    "limsup_profile",
    "krylov_spectral_radius",
    "check_condition_a",
    "EkFamily",
    "build_ek_family",
    "CesaroSequence",
    "cesaro_sequence",
    "ConditionB",
    "check_condition_b",
    "ConditionC",
    "check_condition_c",
    "HypothesisReport",
    "check_hypotheses",
    "TheoremAReport",
    "verify_theorem_a",
    "verify_corollary_b",
    "GoodaReport",
    "check_gooda_conditions",
    "check_lemma1_inequality",
    "search_counterexamples",
    "truncation_report",
]

MEMBERSHIP_TOL = 1e-12


def birkhoff_average(sys: DiscreteSystem, observable: str, x: int, n: int) -> float:
    """(1/n) sum_{j<n} phi(f^j x)."""
    if n < 1:
        raise ValidationError("n must be >= 1", "n")
    phi = sys.observable(observable)
    return math.fsum(phi[s] for s in sys.orbit(x, n)) / n


# --- liminf profiles -----------------------------------------------------------

@dataclass(frozen=True)
class LiminfProfile:
    """phi_-(x) for every state.

    ``method`` is ``"exact_cycle"`` or ``"horizon_estimate"``; estimates
    carry the horizon they stabilized at (or failed to).
    """

    values: np.ndarray
    method: str
    horizon: int | None = None
    converged: bool = True

    def __getitem__(self, x):
        return self.values[x]

    def as_dict(self) -> dict:
        return {"values": self.values.tolist(), "method": self.method,
                "horizon": self.horizon, "converged": self.converged}


def krylov_spectral_radius(c: np.ndarray, b: np.ndarray | None = None, rtol: float = 1e-10) -> float:
    """Growth rate lim ||c^m b||^{1/m}: spectral radius of ``c`` on the
    smallest c-invariant subspace containing the range of ``b``.

    Returns 0.0 when that subspace is trivial or ``c`` is nilpotent on it.
    """
    d = c.shape[0]
    basis = np.eye(d) if b is None else np.asarray(b, dtype=float)
    scale = max(1.0, float(np.abs(basis).max()) if basis.size else 1.0)
    cols = [basis]
    block = basis
    for _ in range(d):
        block = c @ block
        cols.append(block)
    k = np.concatenate(cols, axis=1)
    if not np.any(k):
        return 0.0
    u, s, _ = np.linalg.svd(k, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s[0], scale)))
    if rank == 0:
        return 0.0
    q = u[:, :rank]
    restricted = q.T @ c @ q
    return float(np.max(np.abs(np.linalg.eigvals(restricted))))


def _cycle_product(proc: CocycleProcess, cycle: Sequence[int]) -> np.ndarray:
    p = np.eye(proc.dim)
    for s in cycle:
        p = proc.matrices[s] @ p
    return p


def _exact_profile(sys: DiscreteSystem, proc: SubadditiveProcess) -> np.ndarray:
    vals = np.empty(sys.n_states)
    for x in range(sys.n_states):
        pre, cyc = orbit_decomposition(sys, x)
        if isinstance(proc, AdditiveProcess):
            vals[x] = math.fsum(proc.observable[s] for s in cyc) / len(cyc)
        else:
            prefix = np.eye(proc.dim)
            for s in pre:
                prefix = proc.matrices[s] @ prefix
            rho = krylov_spectral_radius(_cycle_product(proc, cyc), prefix)
            vals[x] = math.log(rho) / len(cyc) if rho > 0 else -math.inf
    return vals


def _estimated_profile(sys, proc, tol, max_horizon, min_horizon=16):
    """liminf over the window [N/2, N], doubling N until three successive agree."""
    history = []
    n = min_horizon
    table = None
    while n <= max_horizon:
        table = proc.table(sys, n)
        ns = np.arange(n // 2, n + 1)
        est = np.min(table[ns] / ns[:, None], axis=0)
        history.append(est)
        if len(history) >= 3:
            a, b, c = history[-3:]
            if np.all(np.abs(a - b) <= tol) and np.all(np.abs(b - c) <= tol):
                return c, n, True
        n *= 2
    return history[-1], n // 2, False


def liminf_profile(sys: DiscreteSystem, proc: SubadditiveProcess, *, tol: float = 1e-6,
                   max_horizon: int = 1 << 14) -> LiminfProfile:
    """phi_-(x) = liminf phi_n(x)/n for every state.

    Exact for additive and cocycle processes (cycle mean, or log spectral
    radius of the cycle product restricted to what the preperiod lets
    through, divided by the period).  Truncated processes use
    phi_-^k = max(phi_-, -k).  Custom processes fall back to a dyadic
    horizon estimate.
    """
    if isinstance(proc, TruncatedProcess):
        base = liminf_profile(sys, proc.base, tol=tol, max_horizon=max_horizon)
        return LiminfProfile(np.maximum(base.values, -proc.k), base.method, base.horizon, base.converged)
    if isinstance(proc, (AdditiveProcess, CocycleProcess)):
        return LiminfProfile(_exact_profile(sys, proc), "exact_cycle")
    vals, horizon, ok = _estimated_profile(sys, proc, tol, max_horizon)
    return LiminfProfile(vals, "horizon_estimate", horizon, ok)


def limsup_profile(sys: DiscreteSystem, proc: SubadditiveProcess, **kw) -> LiminfProfile:
    """phi_+(x).  For additive and cocycle processes the limit exists, so it equals phi_-."""
    if isinstance(proc, (AdditiveProcess, CocycleProcess)):
        return liminf_profile(sys, proc, **kw)
    tol = kw.get("tol", 1e-6)
    max_horizon = kw.get("max_horizon", 1 << 14)
    neg = CustomProcess(lambda s, x, n: -proc.value(s, x, n))
    vals, horizon, ok = _estimated_profile(sys, neg, tol, max_horizon)
    return LiminfProfile(-vals, "horizon_estimate", horizon, ok)


def check_condition_a(sys: DiscreteSystem, mu: PointMassMeasure, profile: LiminfProfile,
                      tol: float = 1e-12) -> tuple[bool, float]:
    """phi_-(f^j x) == phi_-(x) for all j, at every atom of positive weight.

    Returns (holds, worst violation).
    """
    worst = 0.0
    for x, w in mu.positive_atoms():
        pre, cyc = orbit_decomposition(sys, x)
        v0 = profile.values[x]
        for s in pre + cyc:
            v = profile.values[s]
            if v == v0:
                continue
            worst = max(worst, abs(v - v0) if math.isfinite(v - v0) else math.inf)
    return bool(worst <= tol), float(worst)


# --- E_k families -----------------------------------------------------------

@dataclass(frozen=True)
class EkFamily:
    """E_k^eps = {x : phi_j(x) <= j (phi_-(x) + eps) for some j <= k}, k = 1..k_max."""

    epsilon: float
    sets: Mapping[int, SetIndicator]
    k_cover: int | None  # smallest k with E_k = M, None if not reached
    first_k: np.ndarray = field(repr=False)  # smallest k with x in E_k (0 if never)

    @property
    def k_max(self) -> int:
        return max(self.sets)

    def complement(self, k: int) -> SetIndicator:
        return self[k].complement()

    def __getitem__(self, k: int) -> SetIndicator:
        if k in self.sets:
            return self.sets[k]
        if k > self.k_max and self.k_cover is not None:
            return self.sets[self.k_max]
        raise KeyError(k)


def build_ek_family(sys: DiscreteSystem, proc: SubadditiveProcess, epsilon: float, k_max: int,
                    profile: LiminfProfile | None = None, table: np.ndarray | None = None) -> EkFamily:
    if not epsilon > 0:
        raise ValidationError("epsilon must be > 0", "epsilon")
    if k_max < 1:
        raise ValidationError("k_max must be >= 1", "k_max")
    profile = liminf_profile(sys, proc) if profile is None else profile
    t = proc.table(sys, k_max) if table is None else table
    lim = profile.values
    first = np.zeros(sys.n_states, dtype=np.int64)
    sets = {}
    acc = np.zeros(sys.n_states, dtype=bool)
    k_cover = None
    for j in range(1, k_max + 1):
        with np.errstate(invalid="ignore"):
            hit = t[j] <= j * (lim + epsilon) + MEMBERSHIP_TOL
        first[hit & ~acc] = j
        acc = acc | hit
        sets[j] = SetIndicator(acc)
        if k_cover is None and acc.all():
            k_cover = j
    return EkFamily(float(epsilon), sets, k_cover, first)


# --- Cesaro sums of preimage measures --------------------------------------------

@dataclass(frozen=True)
class CesaroSequence:
    """s_i = mu(f^{-i}(S)) for a fixed set S, stored per atom as an eventually
    periodic indicator of f^i(x) in S.

    Gives exact partial sums and the Cesaro limit (the cycle mean).
    """

    weights: tuple[float, ...]
    pre: tuple[tuple[int, ...], ...]
    cyc: tuple[tuple[int, ...], ...]

    @property
    def preperiod(self) -> int:
        return max((len(p) for p in self.pre), default=0)

    @property
    def period(self) -> int:
        out = 1
        for c in self.cyc:
            out = math.lcm(out, len(c))
        return out

    def value(self, i: int) -> float:
        terms = []
        for w, p, c in zip(self.weights, self.pre, self.cyc):
            ind = p[i] if i < len(p) else c[(i - len(p)) % len(c)]
            if ind:
                terms.append(w)
        return math.fsum(terms)

    def values(self, n: int) -> np.ndarray:
        return np.array([self.value(i) for i in range(n)])

    def sum_first(self, m: int) -> float:
        """sum_{i<m} s_i."""
        if m <= 0:
            return 0.0
        terms = []
        for w, p, c in zip(self.weights, self.pre, self.cyc):
            cnt = sum(p[:m])
            rest = m - len(p)
            if rest > 0:
                q, r = divmod(rest, len(c))
                cnt += q * sum(c) + sum(c[:r])
            terms.append(w * cnt)
        return math.fsum(terms)

    def cesaro(self, n: int, k: int = 0) -> float:
        """(1/n) sum_{i=0}^{n-k-1} s_i."""
        return self.sum_first(n - k) / n

    def limit(self) -> float:
        """lim_n (1/n) sum_{i<n-k} s_i (independent of k): the weighted cycle means."""
        return math.fsum(w * sum(c) / len(c) for w, c in zip(self.weights, self.cyc))


def cesaro_sequence(sys: DiscreteSystem, mu: PointMassMeasure, s: SetIndicator) -> CesaroSequence:
    weights, pres, cycs = [], [], []
    for x, w in mu.positive_atoms():
        pre, cyc = orbit_decomposition(sys, x)
        weights.append(w)
        pres.append(tuple(int(s.members[y]) for y in pre))
        cycs.append(tuple(int(s.members[y]) for y in cyc))
    return CesaroSequence(tuple(weights), tuple(pres), tuple(cycs))


@dataclass(frozen=True)
class ConditionB:
    """Per ell: k -> limsup_n (1/n) sum_{i<n-k} mu(f^{-i}(M \\ E_k^{1/ell})), and the k-limit."""

    values: Mapping[int, Mapping[int, float]]
    k_limits: Mapping[int, float]
    decided: Mapping[int, bool]
    holds: bool | None
    tol: float

    def as_dict(self) -> dict:
        return {
            "per_ell": {str(l): {str(k): v for k, v in ks.items()} for l, ks in self.values.items()},
            "k_limits": {str(l): v for l, v in self.k_limits.items()},
            "decided": {str(l): v for l, v in self.decided.items()},
            "holds": self.holds,
        }


def _families(sys, proc, ells, k_max, profile, table):
    return {ell: build_ek_family(sys, proc, 1.0 / ell, k_max, profile, table) for ell in ells}


def check_condition_b(sys: DiscreteSystem, mu: PointMassMeasure, families: Mapping[int, EkFamily],
                      tol: float = 1e-12) -> ConditionB:
    """Exact Cesaro limsups for condition (b), one family per ell (eps = 1/ell).

    The indicator sequence of each atom is eventually periodic, so the
    limsup is the weighted cycle mean.  When E_k never covers M within the
    family's k range the k-limit is reported from the largest k and the ell
    is marked undecided unless that value is already positive for every
    k (which is conclusive only if the values stopped changing).
    """
    values, limits, decided = {}, {}, {}
    verdict: bool | None = True
    for ell, fam in sorted(families.items()):
        per_k = {}
        for k in sorted(fam.sets):
            per_k[k] = cesaro_sequence(sys, mu, fam.complement(k)).limit()
            if fam.k_cover is not None and k >= fam.k_cover:
                break
        values[ell] = per_k
        last = per_k[max(per_k)]
        limits[ell] = last
        if fam.k_cover is not None:
            decided[ell] = True
            ok = last <= tol
        else:
            # complement stopped shrinking: the states left out never enter
            stable = len(per_k) >= 2 and fam.complement(fam.k_max) == fam.complement(fam.k_max - 1)
            decided[ell] = stable and last > tol
            ok = False if decided[ell] else None
        if ok is False:
            verdict = False
        elif ok is None and verdict is True:
            verdict = None
    return ConditionB(values, limits, decided, verdict, tol)


@dataclass(frozen=True)
class ConditionC:
    holds: bool
    witness: tuple | None  # (i, k, epsilon)
    i_max: int

    def as_dict(self) -> dict:
        return {"holds": self.holds, "witness": list(self.witness) if self.witness else None, "i_max": self.i_max}


def check_condition_c(sys: DiscreteSystem, mu: PointMassMeasure, families: Mapping[int, EkFamily] | EkFamily,
                      tol: float = 1e-12) -> ConditionC:
    """mu(f^{-i}(M \\ E_k)) <= mu(M \\ E_k) for all i up to preperiod + period of
    the indicator sequence (enough, since it is eventually periodic) and all k
    up to the covering index."""
    if isinstance(families, EkFamily):
        families = {0: families}
    i_max_seen = 0
    for _, fam in sorted(families.items()):
        top = fam.k_cover if fam.k_cover is not None else fam.k_max
        for k in range(1, top + 1):
            comp = fam.complement(k)
            seq = cesaro_sequence(sys, mu, comp)
            i_max = seq.preperiod + seq.period
            i_max_seen = max(i_max_seen, i_max)
            base = seq.value(0)
            for i in range(1, i_max + 1):
                if seq.value(i) > base + tol:
                    return ConditionC(False, (i, k, fam.epsilon), i_max_seen)
    return ConditionC(True, None, i_max_seen)


# --- Theorem A ----------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    condition_a: tuple[bool, float]
    condition_b: ConditionB
    condition_c: ConditionC
    beta: float
    verdict: str  # holds | fails | undecided

    def as_dict(self) -> dict:
        return {
            "condition_a": {"holds": self.condition_a[0], "worst_violation": self.condition_a[1]},
            "condition_b": self.condition_b.as_dict(),
            "condition_c": self.condition_c.as_dict(),
            "beta": self.beta,
            "verdict": self.verdict,
        }


def check_hypotheses(sys: DiscreteSystem, mu: PointMassMeasure, proc: SubadditiveProcess, *,
                     ell_max: int = 4, k_max: int = 32, profile: LiminfProfile | None = None,
                     epsilons: Iterable[float] | None = None) -> HypothesisReport:
    profile = liminf_profile(sys, proc) if profile is None else profile
    beta = proc.phi1_bound(sys)
    table = proc.table(sys, k_max)
    fams = _families(sys, proc, range(1, ell_max + 1), k_max, profile, table)
    cond_a = check_condition_a(sys, mu, profile)
    cond_b = check_condition_b(sys, mu, fams)
    c_fams = dict(fams)
    for i, eps in enumerate(epsilons or ()):
        c_fams[-(i + 1)] = build_ek_family(sys, proc, eps, k_max, profile, table)
    cond_c = check_condition_c(sys, mu, c_fams)
    if cond_a[0] and cond_b.holds:
        verdict = "holds"
    elif not cond_a[0] or cond_b.holds is False:
        verdict = "fails"
    else:
        verdict = "undecided"
    return HypothesisReport(cond_a, cond_b, cond_c, beta, verdict)


@dataclass(frozen=True)
class TheoremAReport:
    """Both sides of int phi_- dmu = inf_n (1/n) int phi_n dmu (= lim_n when gamma exists)."""

    L: float
    R: np.ndarray  # R[n-1] = (1/n) int phi_n dmu
    hypotheses: HypothesisReport
    profile: LiminfProfile
    inf_R: float
    argmin_R: int
    inf_gap: float  # inf_R - L; negative means some R_n dips below L
    limit_gap: float  # R_{n_max} - L
    limit_consistent: bool
    inf_equality: bool | None
    verdict: str
    reason: str
    tags: tuple[str, ...] = ("TheoremA",)

    @property
    def n_max(self) -> int:
        return len(self.R)

    def table_rows(self):
        for n, r in enumerate(self.R, start=1):
            yield n, float(r), self.L, float(r - self.L)

    def as_dict(self) -> dict:
        return {
            "tags": list(self.tags),
            "L": self.L,
            "inf_R": self.inf_R,
            "argmin_R": self.argmin_R,
            "inf_gap": self.inf_gap,
            "limit_gap": self.limit_gap,
            "limit_consistent": self.limit_consistent,
            "inf_equality": self.inf_equality,
            "n_max": self.n_max,
            "profile": self.profile.as_dict(),
            "hypotheses": self.hypotheses.as_dict(),
            "verdict": self.verdict,
            "reason": self.reason,
        }


def _one_over_n_consistent(R: np.ndarray, L: float, tol: float) -> bool:
    """n |R_n - L| over [N/2, N] is not growing relative to [N/4, N/2]: R_n -> L at rate O(1/n)."""
    n_max = len(R)
    if not math.isfinite(L):
        return bool(np.all(R[n_max // 2:] == L)) or bool(R[-1] < R[n_max // 2] - 1.0)
    if n_max < 8:
        return abs(R[-1] - L) <= tol
    ns = np.arange(1, n_max + 1)
    dev = ns * np.abs(R - L)
    late = dev[n_max // 2:].max()
    early = dev[n_max // 4:n_max // 2].max()
    return bool(late <= 2.0 * early + tol * n_max)


def verify_theorem_a(sys: DiscreteSystem, mu: PointMassMeasure, proc: SubadditiveProcess, n_max: int = 1024, *,
                     ell_max: int = 4, k_max: int = 32, tol: float = 1e-9,
                     hypotheses: HypothesisReport | None = None) -> TheoremAReport:
    """Compute L = int phi_- dmu exactly and R_n = (1/n) int phi_n dmu for n <= n_max.

    The conclusion is only asserted when (a) and (b) hold.  On finite
    systems R_n always tends to L; the infimum equality holds exactly when
    no R_n falls below L, which is checked over the horizon and reported
    as ``inf_equality``.
    """
    profile = liminf_profile(sys, proc)
    hyp = check_hypotheses(sys, mu, proc, ell_max=ell_max, k_max=k_max, profile=profile) \
        if hypotheses is None else hypotheses
    with np.errstate(invalid="ignore"):
        L = mu.integrate(profile.values)
        table = proc.table(sys, n_max)
        R = np.array([mu.integrate(table[n]) / n for n in range(1, n_max + 1)])
    idx = int(np.argmin(R))
    inf_R = float(R[idx])
    inf_gap = inf_R - L if math.isfinite(L) or math.isfinite(inf_R) else 0.0
    limit_gap = float(R[-1] - L) if math.isfinite(L) else (0.0 if R[-1] == L else float(R[-1]))
    consistent = _one_over_n_consistent(R, L, tol)
    if hyp.verdict != "holds":
        failed = []
        if not hyp.condition_a[0]:
            failed.append("condition (a)")
        if hyp.condition_b.holds is not True:
            failed.append("condition (b)")
        return TheoremAReport(L, R, hyp, profile, inf_R, idx + 1, inf_gap, limit_gap, consistent, None,
                              "undecided", "hypotheses not verified: " + ", ".join(failed))
    inf_eq = bool(inf_gap >= -tol)
    if inf_eq and consistent:
        verdict, reason = "holds", "R_n >= L on the horizon and R_n -> L"
    elif not inf_eq:
        verdict = "fails"
        reason = f"R_{idx + 1} = {inf_R:.17g} < L = {L:.17g}: inf_n R_n differs from int phi_- dmu"
    else:
        verdict, reason = "undecided", "R_n not converging to L at rate O(1/n) on the horizon"
    return TheoremAReport(L, R, hyp, profile, inf_R, idx + 1, inf_gap, limit_gap, consistent, inf_eq,
                          verdict, reason)


def verify_corollary_b(sys: DiscreteSystem, mu: PointMassMeasure, observable: str, n_max: int = 1024, *,
                       ell_max: int = 4, k_max: int = 32, tol: float = 1e-9) -> TheoremAReport:
    """Birkhoff case: bounded phi satisfying (b) or (c).

    Condition (a) is automatic for Birkhoff sums on finite systems; the
    conclusion is asserted when either (b) or (c) is verified.
    """
    proc = AdditiveProcess.from_system(sys, observable)
    hyp = check_hypotheses(sys, mu, proc, ell_max=ell_max, k_max=k_max)
    via = "b" if hyp.condition_b.holds else ("c" if hyp.condition_c.holds else None)
    if via == "c" and hyp.verdict != "holds":
        hyp = replace(hyp, verdict="holds")
    rep = verify_theorem_a(sys, mu, proc, n_max, tol=tol, hypotheses=hyp)
    reason = rep.reason if via is None else f"{rep.reason} (hypothesis ({via}) verified)"
    return replace(rep, tags=("CorollaryB",), reason=reason)


# --- Corollary on Birkhoff limits along a single orbit ------------------------------

@dataclass(frozen=True)
class GoodaReport:
    x: int
    conditions: Mapping[str, bool]
    k_eps: Mapping[float, int | None]
    j_eps: int
    claim1: Mapping[float, list[int]]
    limit: float | None
    condition_i: ConditionB
    tags: tuple[str, ...] = ("Gooda_i", "Gooda_ii", "Gooda_iii", "Gooda_iv")

    def as_dict(self) -> dict:
        return {
            "tags": list(self.tags),
            "x": self.x,
            "conditions": dict(self.conditions),
            "k_eps": {repr(e): k for e, k in self.k_eps.items()},
            "j_eps": self.j_eps,
            "claim1_sets": {repr(e): v for e, v in self.claim1.items()},
            "limit": self.limit,
            "condition_i": self.condition_i.as_dict(),
        }


def check_gooda_conditions(sys: DiscreteSystem, observable: str, x: int, *, ell_max: int = 4,
                           k_max: int | None = None) -> GoodaReport:
    """Decide items (i)-(iv) for the Birkhoff averages of ``observable`` at ``x``.

    (ii) is decided from the orbit decomposition: past the preperiod the
    orbit only visits cycle states, each of which enters E_k^eps for some
    finite k.  (iii) coincides with (ii) in the discrete topology; (iv)
    holds because omega(x) is the (finite) cycle.  (i) is condition (b) for
    the Dirac measure at x.
    """
    proc = AdditiveProcess.from_system(sys, observable)
    k_max = 2 * sys.n_states + 2 if k_max is None else k_max
    profile = liminf_profile(sys, proc)
    table = proc.table(sys, k_max)
    pre, cyc = orbit_decomposition(sys, x)
    k_eps, claim1 = {}, {}
    ok_ii = True
    for ell in range(1, ell_max + 1):
        fam = build_ek_family(sys, proc, 1.0 / ell, k_max, profile, table)
        firsts = [int(fam.first_k[s]) for s in cyc]
        if min(firsts) == 0:
            k_eps[1.0 / ell] = None
            ok_ii = False
            continue
        k = max(firsts)
        k_eps[1.0 / ell] = k
        comp = fam.complement(k)
        orbit = pre + cyc  # indices 0 .. preperiod + period - 1 cover one full cycle
        claim1[1.0 / ell] = [j for j, s in enumerate(orbit) if s in comp]
    fams = _families(sys, proc, range(1, ell_max + 1), k_max, profile, table)
    cond_i = check_condition_b(sys, PointMassMeasure.dirac(x), fams)
    conditions = {"i": bool(cond_i.holds), "ii": ok_ii, "iii": ok_ii, "iv": True}
    limit = math.fsum(proc.observable[s] for s in cyc) / len(cyc) if any(conditions.values()) else None
    return GoodaReport(x, conditions, k_eps, len(pre), claim1, limit, cond_i)


def check_lemma1_inequality(sys: DiscreteSystem, proc: SubadditiveProcess, epsilon: float, k: int, n: int,
                            x: int, profile: LiminfProfile | None = None,
                            table: np.ndarray | None = None) -> tuple[bool, float]:
    """phi_n(x) <= sum_{i<n-k} psi_k(f^i x) + sum_{n-k<=i<n} max(psi_k, phi_1)(f^i x).

    psi_k = phi_- + eps on E_k^eps and phi_1 elsewhere.  Returns
    (holds, slack) with slack = RHS - LHS; holds means slack >= -1e-9.
    """
    if not n > k >= 1:
        raise ValidationError("need n > k >= 1", "n")
    profile = liminf_profile(sys, proc) if profile is None else profile
    t = proc.table(sys, max(n, k)) if table is None else table
    fam = build_ek_family(sys, proc, epsilon, k, profile, t)
    in_e = fam[k].members
    phi1 = t[1]
    psi = np.where(in_e, profile.values + epsilon, phi1)
    orbit = sys.orbit(x, n)
    head = [psi[s] for s in orbit[: n - k]]
    tail = [max(psi[s], phi1[s]) for s in orbit[n - k:]]
    rhs = math.fsum(head + tail)
    slack = rhs - float(t[n][x])
    return bool(slack >= -1e-9), float(slack)


# --- counterexample search ---------------------------------------------------------

def _random_map(rng, n):
    return rng.integers(0, n, size=n)


def search_counterexamples(seed: int = 42, trials: int = 400, max_states: int = 6, n_max: int = 64,
                           ell_max: int = 3, k_max: int = 16) -> dict:
    """Random small systems with non-invariant measures.

    Looks for (1) a system where condition (b) fails and int phi_- dmu differs
    from inf_n R_n, (2) a system where (a) and (b) hold but the infimum
    equality fails, and (3) the same with condition (c) holding as well.
    Returns the first witness of each kind (or None) after all trials.
    """
    rng = np.random.default_rng(seed)
    found: dict = {"b_fails_gap": None, "hypotheses_hold_inf_fails": None, "c_holds_inf_fails": None,
                   "searched": {"trials": 0, "max_states": max_states, "seed": seed}}
    for trial in range(trials):
        n = int(rng.integers(2, max_states + 1))
        sys = DiscreteSystem(n, _random_map(rng, n))
        mu = PointMassMeasure(tuple((s, float(w)) for s, w in enumerate(rng.dirichlet(np.ones(n)))
                                    if rng.random() < 0.7) or ((0, 1.0),))
        if is_invariant(sys, mu):
            continue
        if trial % 2 == 0:
            proc = AdditiveProcess(np.round(rng.normal(size=n), 3))
        else:
            mats = np.round(rng.normal(size=(n, 2, 2)), 2)
            mats[rng.random(n) < 0.3] *= np.array([[1.0, 0.0], [0.0, 0.0]])
            proc = CocycleProcess(mats)
        rep = verify_theorem_a(sys, mu, proc, n_max, ell_max=ell_max, k_max=k_max)
        found["searched"]["trials"] = trial + 1
        gap = rep.inf_gap
        entry = {
            "system": {"n_states": n, "map": [int(v) for v in sys.map_table]},
            "measure": [[s, w] for s, w in mu.atoms],
            "process": proc.describe(),
            "L": rep.L,
            "inf_R": rep.inf_R,
            "argmin_R": rep.argmin_R,
            "condition_a": rep.hypotheses.condition_a[0],
            "condition_b": rep.hypotheses.condition_b.holds,
        }
        if rep.hypotheses.condition_b.holds is False and found["b_fails_gap"] is None:
            if not (math.isinf(rep.L) and math.isinf(rep.inf_R)) and abs(gap) > 1e-9:
                found["b_fails_gap"] = entry
        entry["condition_c"] = rep.hypotheses.condition_c.holds
        if rep.verdict == "fails" and found["hypotheses_hold_inf_fails"] is None:
            found["hypotheses_hold_inf_fails"] = entry
        if rep.verdict == "fails" and rep.hypotheses.condition_c.holds and found["c_holds_inf_fails"] is None:
            found["c_holds_inf_fails"] = entry
    return found


def truncation_report(sys: DiscreteSystem, mu: PointMassMeasure, proc: SubadditiveProcess,
                      k_values: Sequence[int] = tuple(range(1, 9)), n_max: int = 64, epsilon: float = 0.1) -> dict:
    """Truncation-ladder items for ``proc`` using its exact liminf profile."""
    profile = liminf_profile(sys, proc)
    out = truncation_ladder(proc, sys, mu, profile.values, k_values, n_max=n_max, epsilon=epsilon)
    out["tags"] = ["LemmaAssumpa"]
    return out
