"""The Bowen eye: a planar heteroclinic cycle whose time averages need not converge.

Two models live here.  :func:`bowen_field` is an explicit polynomial flow
on the closed upper unit half-disc with saddles A = (-1, 0), B = (1, 0)
joined by the segment and the upper arc.  :class:`HybridDwellModel` skips
the ODE and generates dwell times from the linearized passage recurrence
for arbitrary eigenvalues.

Field.  With rho = x^2 + y^2 - 1,

    x' = 2y^2 + rho (1 - kappa x) - 2 eps x y^2 rho
    y' = -2xy - eps y rho (rho + 2y^2)

At kappa = 0 this is the Hamiltonian field of H = y rho plus the
dissipation eps * (-H grad H); all four saddle eigenvalues then equal 2, so
lambda * sigma = 1 and dwell times grow only linearly, which makes the
average of x converge.  kappa in (0, 1) keeps both boundary curves
invariant and makes the cycle attracting through its eigenvalues:
alpha_- = 2(1 + kappa), beta_+ = 2(1 - kappa), alpha_+ = beta_- = 2, so
lambda = (1 + kappa)/(1 - kappa) and sigma = 1.  The default kappa = 1/3
gives lambda = 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .flow.engine import (
    AverageTrace,
    FlowSpec,
    Observable,
    Trajectory,
    _eye_contains,
    _eye_project,
    Domain,
    IntegratorConfig,
    observable_from_expr,
    time_averages,
)
from .flow.fields import eye_field, eye_log_field

__all__ = [
    "SaddleData",
    "CycleModuli",
    "cycle_moduli",
    "HybridDwellModel",
    "HybridTrace",
    "hybrid_averages",
    "hybrid_oracle",
    "zero_transit_limits",
    "bowen_field",
    "eye_saddles",
    "attraction_mechanism",
    "eye_minimum",
    "detect_dwells",
    "classify_trace",
    "run_bowen_experiment",
]

A_POS = (-1.0, 0.0)
B_POS = (1.0, 0.0)


@dataclass(frozen=True)
class SaddleData:
    position: tuple[float, float]
    expanding: float
    contracting: float

    def __post_init__(self):
        if not (self.expanding > 0 and self.contracting > 0):
            raise ValidationError("saddle eigenvalue magnitudes must be positive", "saddle")

    @classmethod
    def from_flow(cls, flow: FlowSpec, position, h: float = 1e-6) -> "SaddleData":
        """Eigenvalues of a central-difference Jacobian at ``position``."""
        jac = numerical_jacobian(flow, position, h)
        ev = np.sort(np.linalg.eigvals(jac).real)
        if not (ev[0] < 0 < ev[-1]):
            raise ValidationError(f"not a saddle: eigenvalues {ev.tolist()}", "saddle")
        return cls(tuple(float(v) for v in position), float(ev[-1]), float(-ev[0]))

    def check(self, flow: FlowSpec, tol: float = 1e-6) -> bool:
        ev = np.sort(np.linalg.eigvals(numerical_jacobian(flow, self.position)).real)
        return bool(abs(ev[-1] - self.expanding) <= tol and abs(ev[0] + self.contracting) <= tol)

    def as_dict(self) -> dict:
        return {"position": list(self.position), "expanding": self.expanding, "contracting": self.contracting}


def numerical_jacobian(flow: FlowSpec, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, j] = (flow.vector_field(x + e) - flow.vector_field(x - e)) / (2 * h)
    return jac


@dataclass(frozen=True)
class CycleModuli:
    lam: float
    sigma: float
    product: float
    attracting: bool

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "lambda_sigma": self.product, "attracting": self.attracting}


def cycle_moduli(A: SaddleData, B: SaddleData) -> CycleModuli:
    """lambda = alpha_-/beta_+, sigma = beta_-/alpha_+; attracting when alpha_- beta_- > alpha_+ beta_+."""
    lam = A.contracting / B.expanding
    sigma = B.contracting / A.expanding
    return CycleModuli(lam, sigma, lam * sigma, bool(A.contracting * B.contracting > A.expanding * B.expanding))


# --- hybrid dwell-time model -----------------------------------------------------------

@dataclass(frozen=True)
class HybridDwellModel:
    """Dwell times from the linearized passage recurrence.

    Entering A at distance d from its unstable manifold costs
    T^A = ln(1/d)/alpha_+; leaving along the connection the orbit reaches B
    at distance d^{alpha_-/alpha_+}, so

        T^B_k = lambda T^A_k + c_B,    T^A_{k+1} = sigma T^B_k + c_A.

    Between dwells the orbit spends ``transit`` time on each connection,
    where the observable averages to ``transit_values``.
    """

    A: SaddleData
    B: SaddleData
    initial_gap: float = 1e-3
    values: tuple[float, float] = (0.0, 1.0)
    transit: tuple[float, float] = (1.0, 1.0)  # A->B, B->A
    transit_values: tuple[float, float] | None = None
    constants: tuple[float, float] = (0.0, 0.0)  # c_A, c_B

    def __post_init__(self):
        if not 0 < self.initial_gap < 1:
            raise ValidationError("initial_gap must lie in (0, 1)", "initial_gap")
        if min(self.transit) < 0:
            raise ValidationError("transit times must be >= 0", "transit")

    @property
    def moduli(self) -> CycleModuli:
        return cycle_moduli(self.A, self.B)

    @property
    def first_dwell(self) -> float:
        return -math.log(self.initial_gap) / self.A.expanding

    def segment_values(self) -> tuple[float, float, float, float]:
        a, b = self.values
        tv = self.transit_values or ((a + b) / 2, (a + b) / 2)
        return a, tv[0], b, tv[1]

    def dwell_times(self, n_epochs: int) -> list[tuple[float, float]]:
        """[(T^A_k, T^B_k)] for k = 1..n_epochs (may overflow for huge growth; see hybrid_averages)."""
        m = self.moduli
        c_a, c_b = self.constants
        out, ta = [], self.first_dwell
        for _ in range(n_epochs):
            tb = m.lam * ta + c_b
            out.append((ta, tb))
            ta = m.sigma * tb + c_a
        return out


@dataclass
class HybridTrace:
    """Running averages at the end of every segment (A dwell, transit, B dwell, transit)."""

    epoch_end_A: np.ndarray   # average right after the k-th A dwell
    epoch_end_B: np.ndarray   # average right after the k-th B dwell
    averages: np.ndarray      # all segment ends, in order
    liminf_est: float
    limsup_est: float
    n_epochs: int
    tags: tuple[str, ...] = ("CorBowen",)
    flags: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.limsup_est - self.liminf_est

    def as_dict(self) -> dict:
        return {"tags": list(self.tags), "n_epochs": self.n_epochs, "liminf_est": self.liminf_est,
                "limsup_est": self.limsup_est, "width": self.width, "flags": list(self.flags),
                "last_A_end": float(self.epoch_end_A[-1]), "last_B_end": float(self.epoch_end_B[-1])}


def hybrid_averages(model: HybridDwellModel, n_epochs: int, tail: float = 0.5) -> HybridTrace:
    """Segment-end running averages, computed in rescaled form.

    Dwell times grow geometrically, so the running sums are kept divided by
    the current dwell length (its logarithm is tracked separately); this
    keeps thousands of epochs in range.  liminf/limsup are the min/max over
    the last ``tail`` fraction of segment ends.
    """
    if n_epochs < 2:
        raise ValidationError("n_epochs must be >= 2", "n_epochs")
    m = model.moduli
    flags = []
    if m.product <= 1:
        flags.append("lambda*sigma <= 1: averages may converge")
    c_a, c_b = model.constants
    va, vt1, vb, vt2 = model.segment_values()
    tau1, tau2 = model.transit
    log_d = math.log(model.first_dwell)
    # W = total time / current dwell, avg = running average
    W, avg = 0.0, 0.0
    ends_a, ends_b, all_ends = [], [], []

    def add(W, avg, length, value):
        Wn = W + length
        return Wn, (avg * W + value * length) / Wn if Wn > 0 else value

    for _ in range(n_epochs):
        W, avg = add(W, avg, 1.0, va)  # dwell at A (length 1 in current units)
        ends_a.append(avg)
        all_ends.append(avg)
        W, avg = add(W, avg, tau1 * math.exp(-log_d), vt1)
        all_ends.append(avg)
        # switch units to the B dwell
        ratio = m.lam + c_b * math.exp(-log_d)  # T^B / T^A
        log_d += math.log(ratio)
        W /= ratio
        W, avg = add(W, avg, 1.0, vb)
        ends_b.append(avg)
        all_ends.append(avg)
        W, avg = add(W, avg, tau2 * math.exp(-log_d), vt2)
        all_ends.append(avg)
        ratio = m.sigma + c_a * math.exp(-log_d)
        log_d += math.log(ratio)
        W /= ratio
    arr = np.array(all_ends)
    start = int(len(arr) * (1 - tail))
    return HybridTrace(np.array(ends_a), np.array(ends_b), arr, float(arr[start:].min()), float(arr[start:].max()),
                       n_epochs, flags=flags)


def hybrid_oracle(lam: Fraction, sigma: Fraction, first: Fraction, a: Fraction, b: Fraction, n_epochs: int,
                  transit: tuple = (0, 0), transit_values: tuple | None = None):
    """Exact rational recurrence: lists of averages after each A dwell and each B dwell."""
    lam, sigma, first, a, b = map(Fraction, (lam, sigma, first, a, b))
    t1, t2 = (Fraction(v) for v in transit)
    tv = tuple(Fraction(v) for v in (transit_values or ((a + b) / 2, (a + b) / 2)))
    S = W = Fraction(0)
    ta = first
    ends_a, ends_b = [], []
    for _ in range(n_epochs):
        S += a * ta
        W += ta
        ends_a.append(S / W)
        S += tv[0] * t1
        W += t1
        tb = lam * ta
        S += b * tb
        W += tb
        ends_b.append(S / W)
        S += tv[1] * t2
        W += t2
        ta = sigma * tb
    return ends_a, ends_b


def zero_transit_limits(lam: float, sigma: float, a: float, b: float) -> dict:
    """Accumulation points of the epoch average with zero transit times.

    After every B dwell the average is exactly (a + lam b)/(1 + lam); after
    A dwells it tends to (sigma a + b)/(1 + sigma) when lam * sigma > 1.
    """
    at_b = (a + lam * b) / (1 + lam)
    at_a = (sigma * a + b) / (1 + sigma)
    return {"after_B": at_b, "after_A": at_a, "limsup": max(at_a, at_b), "liminf": min(at_a, at_b),
            "width": abs(at_b - at_a)}


# --- the ODE model ----------------------------------------------------------------------

def bowen_field(kappa: float = 1.0 / 3.0, epsilon: float = 0.1, chart: str = "log",
                abs_tol: float = 1e-10, rel_tol: float = 1e-10) -> FlowSpec:
    """The eye flow on the closed upper half-disc; ``chart="log"`` integrates in (x, ln y, ln(-rho))."""
    if not 0 <= kappa < 1:
        raise ValidationError("kappa must lie in [0, 1)", "kappa")
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0", "epsilon")
    if chart == "log":
        fld = eye_log_field(kappa, epsilon)
    elif chart == "physical":
        fld = eye_field(kappa, epsilon)
    else:
        raise ValidationError("chart must be 'log' or 'physical'", "chart")
    dom = Domain((-1.0, 0.0), (1.0, 1.0), _eye_project, _eye_contains)
    return FlowSpec(fld, dom, IntegratorConfig(abs_tol=abs_tol, rel_tol=rel_tol), name=f"bowen-{chart}")


def eye_saddles(flow: FlowSpec) -> tuple[SaddleData, SaddleData]:
    return SaddleData.from_flow(flow, A_POS), SaddleData.from_flow(flow, B_POS)


def attraction_mechanism(moduli: CycleModuli, epsilon: float) -> str:
    if moduli.attracting:
        return "eigenvalue (lambda*sigma > 1)" + (" plus dissipation" if epsilon > 0 else "")
    return "dissipation (lambda*sigma = 1 at the saddles)" if epsilon > 0 else "none"


def eye_minimum(obs: Observable, per_axis: int = 201) -> tuple[float, list[float]]:
    """min of obs over the closed eye: grid search, then Nelder-Mead on the projected point."""
    from scipy.optimize import minimize

    xs = np.linspace(-1, 1, per_axis)
    ys = np.linspace(0, 1, (per_axis + 1) // 2)
    pts = np.array([(x, y) for x in xs for y in ys if x * x + y * y <= 1 + 1e-12])
    vals = obs.values(pts)
    best = pts[int(np.argmin(vals))]
    res = minimize(lambda p: obs(_eye_project(p)), best, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    cand = _eye_project(res.x)
    if obs(cand) <= float(vals.min()):
        return obs(cand), cand.tolist()
    return float(vals.min()), best.tolist()


def detect_dwells(flow: FlowSpec, times: np.ndarray, phys: np.ndarray, threshold: float = 0.05) -> dict:
    """Near-saddle intervals where |field| < threshold, labelled A or B by the sign of x."""
    if len(times) < 2:
        return {"dwells": [], "fraction_near": math.nan}
    fld = flow.field
    pm = fld.phys_field if fld.phys_field is not None else fld.rhs
    speed = np.linalg.norm(pm.eval_rows(phys), axis=1)
    near = speed < threshold
    dt = np.diff(times)
    both = near[1:] & near[:-1]
    fraction = float(dt[both].sum() / (times[-1] - times[0]))
    dwells = []
    i, n = 0, len(times)
    while i < n:
        if near[i]:
            j = i
            while j + 1 < n and near[j + 1]:
                j += 1
            label = "A" if phys[i:j + 1, 0].mean() < 0 else "B"
            dwells.append({"saddle": label, "start": float(times[i]), "end": float(times[j]),
                           "length": float(times[j] - times[i])})
            i = j + 1
        else:
            i += 1
    # merge consecutive same-label fragments (brief exits caused by sampling)
    merged = []
    for d in dwells:
        if merged and merged[-1]["saddle"] == d["saddle"]:
            merged[-1]["end"] = d["end"]
            merged[-1]["length"] = merged[-1]["end"] - merged[-1]["start"]
        else:
            merged.append(dict(d))
    return {"dwells": merged, "fraction_near": fraction}


def dwell_ratios(dwells: Sequence[dict], skip: int = 5) -> dict:
    """Successive ratios B/A and A_next/B after the first ``skip`` epochs (complete dwells only)."""
    full = list(dwells[1:-1])  # first may be the initial transient, last may be cut by the horizon
    ba, ab = [], []
    for d0, d1 in zip(full, full[1:]):
        if d0["length"] <= 0:
            continue
        r = d1["length"] / d0["length"]
        (ba if d0["saddle"] == "A" else ab).append(r)
    epochs = min(len(ba), len(ab))
    return {"B_over_A": ba[skip:], "A_over_B": ab[skip:], "epochs": epochs,
            "nondecreasing": all(d1["length"] >= d0["length"] * (1 - 1e-2) for d0, d1 in zip(full, full[1:]))}


def classify_trace(trace: AverageTrace, width_min: float, tol: float, doublings: int = 3) -> dict:
    """OSCILLATING if every tail width >= width_min over the last ``doublings`` horizons;
    CONVERGENT if widths shrink monotonically and the last is below ``tol``."""
    T = trace.sample_times[-1]
    horizons = [T / 2 ** k for k in range(doublings - 1, -1, -1)]
    widths = [trace.width_at(h) for h in horizons]
    if all(w >= width_min for w in widths):
        label = "OSCILLATING"
    elif all(b <= a + 1e-12 for a, b in zip(widths, widths[1:])) and widths[-1] < tol:
        label = "CONVERGENT"
    else:
        label = "UNDETERMINED"
    return {"classification": label, "horizons": horizons, "widths": widths, "width_min": width_min, "tol": tol}


def run_bowen_experiment(observable: Observable | str = "x", x0=(0.0, 0.5), T_max: float = 1e5, *,
                         kappa: float = 1.0 / 3.0, epsilon: float = 0.1, chart: str = "log", tol: float = 5e-2,
                         width_min: float | None = None, dwell_threshold: float = 0.05, n_checkpoints: int = 2048,
                         backend: str | None = None) -> dict:
    """Simulate the eye from ``x0`` and classify the running average of ``observable``.

    The prediction is OSCILLATING when phi(A) != phi(B) and CONVERGENT (to
    min phi) when phi(A) = phi(B) = min phi; the report states which one
    the classifier found and whether they agree.
    """
    obs = observable_from_expr(observable) if isinstance(observable, str) else observable
    flow = bowen_field(kappa, epsilon, chart)
    x0 = np.asarray(x0, dtype=float)
    if not (x0[1] > 0 and x0[0] ** 2 + x0[1] ** 2 < 1):
        raise ValidationError("x0 must lie strictly inside the upper eye", "x0")
    A, B = eye_saddles(bowen_field(kappa, epsilon, "physical"))
    mod = cycle_moduli(A, B)
    phi_a, phi_b = obs(A_POS), obs(B_POS)
    min_phi, argmin = eye_minimum(obs)
    gap = abs(phi_a - phi_b)
    wmin = (0.1 * gap if gap > 0 else tol) if width_min is None else width_min
    if gap > 1e-12:
        prediction = "OSCILLATING"
    elif abs(phi_a - min_phi) <= 1e-6:
        prediction = "CONVERGENT"
    else:
        prediction = "NONE"
    traj_obs = [obs]
    traces = time_averages(flow, traj_obs, x0, T_max, n_checkpoints, backend=backend, dmax=0.02)
    tr = traces[0]
    cls = classify_trace(tr, wmin, tol)
    # dwell analysis on a separate recorded run to 1e4
    T_dwell = min(T_max, 1e4)
    traj = Trajectory(flow, (), backend)
    res = traj.run(x0, [T_dwell], record_from=0.0, dmax=0.02)
    dw = detect_dwells(flow, res.rec_t, res.rec_phys(traj), dwell_threshold)
    ratios = dwell_ratios(dw["dwells"])
    ratio_ok = None
    if ratios["B_over_A"] and ratios["A_over_B"]:
        ratio_ok = bool(all(abs(r / mod.lam - 1) <= 0.2 for r in ratios["B_over_A"])
                        and all(abs(r / mod.sigma - 1) <= 0.2 for r in ratios["A_over_B"]))
    result = {
        "tags": ["CorBowen", "CorApp"],
        "observable": obs.name,
        "x0": x0.tolist(),
        "T_max": T_max,
        "field": flow.describe(),
        "saddles": {"A": A.as_dict(), "B": B.as_dict()},
        "moduli": mod.as_dict(),
        "attraction_mechanism": attraction_mechanism(mod, epsilon),
        "phi_A": phi_a,
        "phi_B": phi_b,
        "min_phi": min_phi,
        "argmin_phi": argmin,
        "corapp_hypothesis": bool(abs(phi_a - min_phi) <= 1e-6 and abs(phi_b - min_phi) <= 1e-6),
        "prediction": prediction,
        **cls,
        "agrees_with_prediction": prediction == "NONE" or prediction == cls["classification"],
        "final_average": tr.final,
        "distance_to_min_phi": abs(tr.final - min_phi),
        "trace": tr.as_dict(),
        "dwell_analysis": {
            "horizon": T_dwell,
            "threshold": dwell_threshold,
            "fraction_near_saddles": dw["fraction_near"],
            "n_dwells": len(dw["dwells"]),
            "nondecreasing": ratios["nondecreasing"],
            "B_over_A": ratios["B_over_A"],
            "A_over_B": ratios["A_over_B"],
            "ratios_within_20pct": ratio_ok,
            "dwells": dw["dwells"],
        },
    }
    return result, tr
