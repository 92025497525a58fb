"""Subadditive sequences and processes.

Scalar side: Fekete's lemma (``a_{m+n} <= a_m + a_n`` gives
``lim a_n/n = inf a_n/n``) and Derriennic's relaxation with an error term
``c_n = o(n)``.

Process side: families ``phi_n: states -> R`` over a :class:`DiscreteSystem`
with ``phi_{m+n} <= phi_m + phi_n o f^m``.  Three kinds are supported:
Birkhoff sums of an observable, log-norms of matrix cocycles, and arbitrary
user generators.  :class:`TruncatedProcess` implements the ladder
``phi_n^k = max(phi_n, -k n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import SubadditivityViolation, ValidationError
from .measure import DiscreteSystem, PointMassMeasure, SetIndicator

__all__ = [
    "ScalarSequence",
    "FeketeResult",
    "DerriennicResult",
    "check_subadditive",
    "fekete_limit",
    "derriennic_limit",
    "SubadditiveProcess",
    "AdditiveProcess",
    "CocycleProcess",
    "CustomProcess",
    "TruncatedProcess",
    "truncate",
    "evaluate_phi_n",
    "phi_table",
    "audit_subadditivity",
    "truncation_ladder",
    "DIVERGENCE_FLOOR",
]

DIVERGENCE_FLOOR = -1e6
EXHAUSTIVE_HORIZON = 64


# --- scalar sequences --------------------------------------------------------

@dataclass(frozen=True)
class ScalarSequence:
    """n -> a_n for n >= 1.

    ``generator`` may accept an integer array (vectorized) or a single int;
    both are tried in that order.
    """

    generator: Callable
    horizon: int = 1000
    name: str = ""

    def values(self, n_max: int | None = None) -> np.ndarray:
        """Array ``v`` with ``v[n] = a_n`` for ``1 <= n <= n_max`` (``v[0]`` is nan)."""
        n_max = self.horizon if n_max is None else int(n_max)
        ns = np.arange(1, n_max + 1)
        try:
            vals = np.asarray(self.generator(ns), dtype=float)
            if vals.shape != ns.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(self.generator(int(n))) for n in ns])
        out = np.empty(n_max + 1)
        out[0] = np.nan
        out[1:] = vals
        return out

    def __call__(self, n: int) -> float:
        return float(self.values(n)[n])


@dataclass(frozen=True)
class FeketeResult:
    estimate: float  # -inf when divergence is flagged
    inf_over_horizon: float
    argmin: int
    horizon: int
    diverges: bool
    running_inf: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "inf_over_horizon": self.inf_over_horizon,
            "argmin": self.argmin,
            "horizon": self.horizon,
            "diverges_to_minus_infinity": self.diverges,
        }


@dataclass(frozen=True)
class DerriennicResult:
    estimate: float
    c_over_n: float
    horizon: int
    diverges: bool
    fekete: FeketeResult | None = None

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "c_over_n_at_horizon": self.c_over_n,
            "horizon": self.horizon,
            "diverges_to_minus_infinity": self.diverges,
        }


def _pairs(n_max: int, exhaustive: int, n_samples: int, seed: int):
    """(m, n) pairs with m + n <= n_max: all below ``exhaustive``, sampled above."""
    lim = min(n_max, exhaustive)
    m, n = np.meshgrid(np.arange(1, lim), np.arange(1, lim), indexing="ij")
    keep = (m + n) <= lim
    ms, ns = [m[keep]], [n[keep]]
    if n_max > exhaustive and n_samples > 0:
        rng = np.random.default_rng(seed)
        s = rng.integers(1, n_max, size=n_samples)
        t = rng.integers(1, n_max, size=n_samples)
        ok = s + t <= n_max
        ms.append(s[ok])
        ns.append(t[ok])
    return np.concatenate(ms), np.concatenate(ns)


def check_subadditive(seq: ScalarSequence, n_max: int | None = None, c_seq: ScalarSequence | None = None,
                      *, n_samples: int = 20000, seed: int = 42, rtol: float = 1e-12) -> None:
    """Raise :class:`SubadditivityViolation` unless a_{n+m} <= a_n + a_m + c_n on the sample.

    Pairs with ``m + n <= 64`` are checked exhaustively; larger ones are
    sampled with a fixed seed.
    """
    n_max = seq.horizon if n_max is None else n_max
    a = seq.values(n_max)
    c = np.zeros_like(a) if c_seq is None else c_seq.values(n_max)
    ns, ms = _pairs(n_max, EXHAUSTIVE_HORIZON, n_samples, seed)
    lhs = a[ns + ms]
    rhs = a[ns] + a[ms] + c[ns]
    slack = rtol * (np.abs(a[ns]) + np.abs(a[ms]) + np.abs(c[ns]) + 1.0)
    bad = np.flatnonzero(lhs > rhs + slack)
    if bad.size:
        i = bad[np.lexsort((ms[bad], ns[bad]))[0]]
        w = (int(ns[i]), int(ms[i]))
        raise SubadditivityViolation(
            f"a_{w[0] + w[1]} = {lhs[i]:.6g} exceeds a_{w[0]} + a_{w[1]}"
            + ("" if c_seq is None else f" + c_{w[0]}") + f" = {rhs[i]:.6g}", witness=w)


def fekete_limit(seq: ScalarSequence, horizon: int | None = None, *, floor: float = DIVERGENCE_FLOOR,
                 check: bool = True, seed: int = 42) -> FeketeResult:
    """min_{n <= horizon} a_n / n, which is lim a_n/n for subadditive input.

    Divergence to -inf is flagged (estimate = -inf) when a_n/n drops below
    ``floor`` and is still decreasing over the last quarter of the horizon.
    """
    horizon = seq.horizon if horizon is None else int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1", "horizon")
    if check:
        check_subadditive(seq, horizon, seed=seed)
    a = seq.values(horizon)
    ratios = a[1:] / np.arange(1, horizon + 1)
    running = np.minimum.accumulate(ratios)
    inf = float(running[-1])
    argmin = int(np.argmin(ratios)) + 1
    tail = running[-max(2, horizon // 4):]
    diverges = bool(inf < floor and tail[-1] < tail[0])
    return FeketeResult(
        estimate=-math.inf if diverges else inf,
        inf_over_horizon=inf,
        argmin=argmin,
        horizon=horizon,
        diverges=diverges,
        running_inf=running,
    )


def derriennic_limit(seq: ScalarSequence, c_seq: ScalarSequence, horizon: int | None = None, *,
                     floor: float = DIVERGENCE_FLOOR, seed: int = 42, c_rate_tol: float = 0.05) -> DerriennicResult:
    """Estimate lim a_n/n when a_{n+m} <= a_n + a_m + c_n with c_n >= 0, c_n/n -> 0.

    With c == 0 this is exactly :func:`fekete_limit`.  Otherwise the estimate
    is a_N/N at the horizon (the infimum is no longer the limit).
    """
    horizon = seq.horizon if horizon is None else int(horizon)
    c = c_seq.values(horizon)
    if np.any(c[1:] < 0):
        n_bad = int(np.flatnonzero(c[1:] < 0)[0]) + 1
        raise ValidationError(f"c_{n_bad} is negative", "c_seq")
    c_over_n = float(c[horizon] / horizon)
    if c_over_n > c_rate_tol:
        raise ValidationError(f"c_n/n = {c_over_n:.3g} at the horizon; c_n/n must tend to 0", "c_seq")
    if not np.any(c[1:]):
        fk = fekete_limit(seq, horizon, floor=floor, seed=seed)
        return DerriennicResult(fk.estimate, 0.0, horizon, fk.diverges, fk)
    check_subadditive(seq, horizon, c_seq, seed=seed)
    a = seq.values(horizon)
    est = float(a[horizon] / horizon)
    diverges = est < floor and a[horizon] / horizon < a[horizon // 2] / (horizon // 2)
    return DerriennicResult(-math.inf if diverges else est, c_over_n, horizon, bool(diverges))


# --- processes over a finite system -------------------------------------------

class SubadditiveProcess:
    """Base class: phi_n(x) for a subadditive family over a finite system.

    Subclasses implement :meth:`table`; ``beta`` bounds phi_1 from above and
    the optional ``gamma`` gives phi_n / n >= -gamma.
    """

    kind = "abstract"

    def __init__(self, beta: float | None = None, gamma: float | None = None, name: str = ""):
        self.beta = beta
        self.gamma = gamma
        self.name = name

    def table(self, sys: DiscreteSystem, n_max: int) -> np.ndarray:
        """Array ``T`` of shape (n_max + 1, n_states) with ``T[n, x] = phi_n(x)``, ``T[0] = 0``."""
        raise NotImplementedError

    def value(self, sys: DiscreteSystem, x: int, n: int) -> float:
        return float(self.table(sys, n)[n, x])

    def phi1_bound(self, sys: DiscreteSystem) -> float:
        """The configured beta, validated against phi_1; max phi_1 if unset."""
        phi1 = self.table(sys, 1)[1]
        top = float(np.max(phi1))
        if self.beta is None:
            return top
        if top > self.beta + 1e-12 * max(1.0, abs(self.beta)):
            raise ValidationError(f"phi_1 reaches {top:.6g} > beta = {self.beta:.6g}", "beta")
        return float(self.beta)

    def describe(self) -> dict:
        return {"kind": self.kind, "name": self.name, "beta": self.beta, "gamma": self.gamma}


class AdditiveProcess(SubadditiveProcess):
    """phi_n = sum_{j<n} phi o f^j."""

    kind = "additive"

    def __init__(self, observable, name: str = "", beta=None, gamma=None):
        obs = np.asarray(observable, dtype=float)
        if gamma is None and obs.size:
            gamma = max(0.0, -float(obs.min()))
        super().__init__(beta=beta, gamma=gamma, name=name)
        self.observable = obs

    @classmethod
    def from_system(cls, sys: DiscreteSystem, name: str) -> "AdditiveProcess":
        return cls(sys.observable(name), name=name)

    def _check(self, sys):
        if self.observable.shape != (sys.n_states,):
            raise ValidationError(f"observable has {self.observable.size} values, system has {sys.n_states} states",
                                  "observable")

    def table(self, sys, n_max):
        self._check(sys)
        out = np.zeros((n_max + 1, sys.n_states))
        pos = np.arange(sys.n_states)
        for n in range(1, n_max + 1):
            out[n] = out[n - 1] + self.observable[pos]
            pos = sys.map_table[pos]
        return out

    def value(self, sys, x, n):
        self._check(sys)
        return math.fsum(self.observable[s] for s in sys.orbit(x, n))

    def describe(self):
        d = super().describe()
        d["observable"] = self.observable.tolist()
        return d


def _matrix_norm(m: np.ndarray, norm: str) -> np.ndarray:
    if norm == "spectral":
        return np.linalg.norm(m, ord=2, axis=(-2, -1))
    if norm == "frobenius":
        return np.linalg.norm(m, ord="fro", axis=(-2, -1))
    raise ValidationError(f"unknown norm {norm!r}", "norm")


class CocycleProcess(SubadditiveProcess):
    """phi_n(x) = log || A(f^{n-1} x) ... A(f x) A(x) ||.

    Products are renormalized every step so long horizons do not overflow;
    a product that becomes exactly zero gives phi_n = -inf from then on.
    """

    kind = "matrix_cocycle"

    def __init__(self, matrices, norm: str = "spectral", name: str = "", beta=None, gamma=None):
        mats = np.asarray(matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValidationError("expected one square matrix per state", "matrices")
        if not np.all(np.isfinite(mats)):
            raise ValidationError("matrix entries must be finite", "matrices")
        _matrix_norm(np.eye(1), norm)
        super().__init__(beta=beta, gamma=gamma, name=name)
        self.matrices = mats
        self.norm = norm

    @classmethod
    def constant(cls, matrix, n_states: int, **kw) -> "CocycleProcess":
        m = np.asarray(matrix, dtype=float)
        return cls(np.broadcast_to(m, (n_states,) + m.shape).copy(), **kw)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def _check(self, sys):
        if self.matrices.shape[0] != sys.n_states:
            raise ValidationError(f"{self.matrices.shape[0]} matrices for {sys.n_states} states", "matrices")

    def table(self, sys, n_max):
        self._check(sys)
        n, d = sys.n_states, self.dim
        out = np.zeros((n_max + 1, n))
        prod = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        logscale = np.zeros(n)
        pos = np.arange(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(1, n_max + 1):
                prod = np.matmul(self.matrices[pos], prod)
                nrm = _matrix_norm(prod, self.norm)
                out[k] = logscale + np.log(nrm)
                safe = np.where(nrm > 0, nrm, 1.0)
                prod = prod / safe[:, None, None]
                logscale = logscale + np.log(np.where(nrm > 0, nrm, 0.0))
                pos = sys.map_table[pos]
        return out

    def product(self, sys: DiscreteSystem, x: int, n: int) -> np.ndarray:
        """A(f^{n-1} x) ... A(x), unnormalized."""
        self._check(sys)
        p = np.eye(self.dim)
        for s in sys.orbit(x, n):
            p = self.matrices[s] @ p
        return p

    def value(self, sys, x, n):
        with np.errstate(divide="ignore"):
            return float(np.log(_matrix_norm(self.product(sys, x, n), self.norm)))

    def describe(self):
        d = super().describe()
        d.update(norm=self.norm, matrices=self.matrices.tolist())
        return d


class CustomProcess(SubadditiveProcess):
    """User generator ``generator(sys, x, n) -> phi_n(x)``; must be reentrant."""

    kind = "custom"

    def __init__(self, generator: Callable[[DiscreteSystem, int, int], float], beta=None, gamma=None, name=""):
        super().__init__(beta=beta, gamma=gamma, name=name)
        self.generator = generator

    def table(self, sys, n_max):
        out = np.zeros((n_max + 1, sys.n_states))
        for n in range(1, n_max + 1):
            for x in range(sys.n_states):
                out[n, x] = self.generator(sys, x, n)
        return out

    def value(self, sys, x, n):
        return float(self.generator(sys, x, n))


class TruncatedProcess(SubadditiveProcess):
    """phi_n^k = max(phi_n, -k n)."""

    kind = "truncated"

    def __init__(self, base: SubadditiveProcess, k: int):
        if int(k) != k or k < 1:
            raise ValidationError("truncation level k must be a positive integer", "k")
        k = int(k)
        beta = None if base.beta is None else max(base.beta, -k)
        super().__init__(beta=beta, gamma=float(k), name=f"{base.name}^[{k}]")
        self.base = base
        self.k = k

    def table(self, sys, n_max):
        t = self.base.table(sys, n_max)
        floor = -self.k * np.arange(n_max + 1, dtype=float)
        return np.maximum(t, floor[:, None])

    def value(self, sys, x, n):
        return max(self.base.value(sys, x, n), -self.k * n)

    def describe(self):
        return {"kind": self.kind, "k": self.k, "base": self.base.describe()}


def truncate(proc: SubadditiveProcess, k: int) -> TruncatedProcess:
    return TruncatedProcess(proc, k)


def phi_table(proc: SubadditiveProcess, sys: DiscreteSystem, n_max: int) -> np.ndarray:
    return proc.table(sys, n_max)


def evaluate_phi_n(proc: SubadditiveProcess, sys: DiscreteSystem, x: int, n: int) -> float:
    """phi_n(x), evaluated directly along the orbit of ``x``."""
    if n < 1:
        raise ValidationError("n must be >= 1", "n")
    if not 0 <= x < sys.n_states:
        raise ValidationError(f"state {x} outside 0..{sys.n_states - 1}", "x")
    return proc.value(sys, x, n)


def audit_subadditivity(proc: SubadditiveProcess, sys: DiscreteSystem, horizon: int = EXHAUSTIVE_HORIZON,
                        tol: float = 1e-9, table: np.ndarray | None = None):
    """Exhaustive check of phi_{m+n}(x) <= phi_m(x) + phi_n(f^m x) + tol for m + n <= horizon.

    Returns None when it holds, else the first witness ``(m, n, x)``.
    """
    t = proc.table(sys, horizon) if table is None else table
    pos = np.arange(sys.n_states)
    for m in range(1, horizon):
        pos = sys.map_table[pos]  # f^m
        for n in range(1, horizon - m + 1):
            lhs = t[m + n]
            rhs = t[m] + t[n][pos]
            with np.errstate(invalid="ignore"):
                bad = np.flatnonzero(lhs > rhs + tol)
            if bad.size:
                return (m, n, int(bad[0]))
    return None


def truncation_ladder(proc: SubadditiveProcess, sys: DiscreteSystem, mu: PointMassMeasure,
                      phi_minus: np.ndarray, k_values: Sequence[int], *, n_max: int = 64,
                      epsilon: float = 0.1, r_max: int = 16, tol: float = 1e-9) -> dict:
    """Check the truncation-ladder items on a finite system.

    ``phi_minus`` is the exact liminf profile of ``proc``.  Returns a dict
    item -> {"holds": bool, ...}.  Items: (i) subadditive, (ii) phi_1^k
    bounded above, (iii) phi_n^k / n >= -k, (vi) E_r subset of G_r, (vii)
    phi_n^k nonincreasing in k, (viii) phi_n^k = phi_n once k saturates,
    (ix) phi_-^k nonincreasing in k, (x) phi_-^k -> phi_-, (xi)
    (phi_-^k)^+ = (phi_-)^+, and r3a: inf_k int phi_n^k dmu = int phi_n dmu.
    """
    ks = sorted(set(int(k) for k in k_values))
    base = proc.table(sys, n_max)
    ns = np.arange(n_max + 1, dtype=float)
    tables = {k: np.maximum(base, (-k * ns)[:, None]) for k in ks}
    pm = np.asarray(phi_minus, dtype=float)
    pmk = {k: np.maximum(pm, -k) for k in ks}
    per_n = base[1:] / ns[1:, None]
    with np.errstate(invalid="ignore"):
        sat = -per_n[np.isfinite(per_n)]
    k_sat = max(1, int(math.ceil(sat.max()))) if sat.size else 1
    out: dict[str, dict] = {}

    witnesses = {k: audit_subadditivity(proc, sys, n_max, tol, tables[k]) for k in ks}
    out["i"] = {"holds": all(w is None for w in witnesses.values()),
                "witness": next(((k, w) for k, w in witnesses.items() if w is not None), None)}

    beta = proc.phi1_bound(sys)
    out["ii"] = {"holds": all(float(tables[k][1].max()) <= max(beta, -k) + tol for k in ks),
                 "bound": {k: max(beta, -k) for k in ks}}

    out["iii"] = {"holds": all(bool(np.all(tables[k][1:] / ns[1:, None] >= -k - tol)) for k in ks)}

    def family(tab, lim):
        sets = []
        acc = np.zeros(sys.n_states, dtype=bool)
        for j in range(1, r_max + 1):
            with np.errstate(invalid="ignore"):
                acc = acc | (tab[j] <= j * (lim + epsilon) + 1e-12)
            sets.append(acc.copy())
        return sets

    e_sets = family(proc.table(sys, r_max), pm)
    vi_ok = True
    for k in ks:
        g_sets = family(np.maximum(proc.table(sys, r_max), (-k * np.arange(r_max + 1.0))[:, None]), pmk[k])
        vi_ok &= all(SetIndicator(e).issubset(SetIndicator(g)) for e, g in zip(e_sets, g_sets))
    out["vi"] = {"holds": bool(vi_ok), "epsilon": epsilon, "r_max": r_max}

    out["vii"] = {"holds": all(bool(np.all(tables[a] >= tables[b])) for a, b in zip(ks, ks[1:]))}

    sat_table = np.maximum(base, (-k_sat * ns)[:, None])
    out["viii"] = {"holds": bool(np.array_equal(sat_table[np.isfinite(base)], base[np.isfinite(base)])),
                   "k_saturation": k_sat,
                   "converging": all(bool(np.all(tables[k] >= base)) for k in ks)}

    out["ix"] = {"holds": all(bool(np.all(pmk[a] >= pmk[b])) for a, b in zip(ks, ks[1:]))}

    finite_pm = pm[np.isfinite(pm)]
    k_sat_minus = max(1, int(math.ceil(max(0.0, -float(finite_pm.min()))))) if finite_pm.size else 1
    lim = np.maximum(pm, -k_sat_minus)
    out["x"] = {"holds": bool(np.array_equal(lim[np.isfinite(pm)], pm[np.isfinite(pm)])),
                "k_saturation": k_sat_minus}

    out["xi"] = {"holds": all(bool(np.array_equal(np.maximum(pmk[k], 0), np.maximum(pm, 0))) for k in ks)}

    r3a = []
    for n in range(1, n_max + 1):
        levels = sorted(set(ks) | {k_sat})
        with np.errstate(invalid="ignore"):
            ints = [mu.integrate(np.maximum(base[n], -k * n)) for k in levels]
            exact = mu.integrate(base[n])
        if math.isfinite(exact):
            r3a.append(abs(min(ints) - exact))
        else:
            # -inf on a charged atom: the k-integrals must decrease without bound
            r3a.append(0.0 if all(b < a for a, b in zip(ints, ints[1:])) else math.inf)
    out["r3a"] = {"holds": max(r3a) <= tol, "max_gap": max(r3a), "k_saturation": k_sat}
    return out
