"""Flows, running time averages, omega-limit estimates and the flow criteria.

All integration goes through :class:`Trajectory`, which drives a kernel
(compiled when available) over a sorted list of stop times.  Observables
ride along as extra quadrature components q' = phi, so the running average
at a stop time is q(T)/T with no separate quadrature error.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import IntegrationFailure, ValidationError
from . import _dopri
from .backend import kernel_class
from .fields import ExpPolyField, Poly, PolyMap, builtin_field, compile_numeric, parse_poly

__all__ = [
    "IntegratorConfig",
    "Domain",
    "FlowSpec",
    "Observable",
    "observable_from_expr",
    "Trajectory",
    "integrate",
    "AverageTrace",
    "time_average",
    "time_averages",
    "PsiReduction",
    "psi_reduce",
    "OmegaEstimate",
    "estimate_omega",
    "check_theorem_c",
    "check_gooda11",
    "check_2d_point",
    "max_workers",
]


def max_workers() -> int:
    """Thread cap from ERGOLAB_THREADS (default: CPU count)."""
    raw = os.environ.get("ERGOLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError("ERGOLAB_THREADS must be a positive integer", "ERGOLAB_THREADS")
    return os.cpu_count() or 1


# --- specifications -------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri5"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = math.inf
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method != "dopri5":
            raise ValidationError("only the embedded Runge-Kutta 5(4) method is available", "integrator.method")
        if not (self.abs_tol > 0 and self.rel_tol >= 0 and self.max_step > 0):
            raise ValidationError("tolerances and max_step must be positive", "integrator")


@dataclass(frozen=True)
class Domain:
    """Compact box in physical coordinates, with an optional projection onto an invariant region."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    projection: Callable[[np.ndarray], np.ndarray] | None = None
    contains_fn: Callable[[np.ndarray], bool] | None = None

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        inside = bool(np.all(x >= np.array(self.lower) - tol) and np.all(x <= np.array(self.upper) + tol))
        if inside and self.contains_fn is not None:
            inside = bool(self.contains_fn(x))
        return inside

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.projection is None else self.projection(x)

    def grid(self, per_axis: int = 101) -> np.ndarray:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lower, self.upper)]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        if self.contains_fn is not None:
            pts = pts[[bool(self.contains_fn(p)) for p in pts]]
        return pts


def _eye_contains(x) -> bool:
    return x[1] >= -1e-12 and x[0] ** 2 + x[1] ** 2 <= 1 + 1e-9


def _eye_project(x):
    x = np.array(x, dtype=float)
    x[1] = max(x[1], 0.0)
    r = math.hypot(x[0], x[1])
    if r > 1:
        x /= r
    return x


@dataclass(frozen=True)
class FlowSpec:
    """A vector field with its integrator settings.

    ``field`` is a polynomial field (possibly in a log chart) for the
    kernels; ``callable_field`` is a fallback for arbitrary Python
    right-hand sides in physical coordinates.
    """

    field: ExpPolyField | None
    domain: Domain
    integrator: IntegratorConfig = IntegratorConfig()
    callable_field: Callable[[np.ndarray], np.ndarray] | None = None
    dim: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.field is None and self.callable_field is None:
            raise ValidationError("a flow needs a polynomial or callable field", "field")
        if not self.name:
            object.__setattr__(self, "name", self.field.name if self.field is not None else "callable")

    @property
    def dimension(self) -> int:
        return self.field.phys_dim if self.field is not None else int(self.dim)

    def vector_field(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.field is not None:
            return self.field.physical_velocity(x)
        return np.asarray(self.callable_field(x), dtype=float)

    def with_integrator(self, **kw) -> "FlowSpec":
        return replace(self, integrator=replace(self.integrator, **kw))

    @classmethod
    def builtin(cls, name: str, **kw) -> "FlowSpec":
        fld = builtin_field(name)
        if name in ("eye", "eye-log", "bowen"):
            dom = Domain((-1.0, 0.0), (1.0, 1.0), _eye_project, _eye_contains)
        else:
            dom = Domain((-10.0,) * fld.phys_dim, (10.0,) * fld.phys_dim)
        return cls(fld, dom, IntegratorConfig(**kw), name=name)

    @classmethod
    def from_field(cls, fld: ExpPolyField, box: float = 10.0, **kw) -> "FlowSpec":
        return cls(fld, Domain((-box,) * fld.phys_dim, (box,) * fld.phys_dim), IntegratorConfig(**kw))

    @classmethod
    def from_callable(cls, fn, dim: int, box: float = 10.0, **kw) -> "FlowSpec":
        return cls(None, Domain((-box,) * dim, (box,) * dim), IntegratorConfig(**kw), callable_field=fn, dim=dim)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "field": self.field.describe() if self.field is not None else "callable",
            "domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)},
            "integrator": {"method": self.integrator.method, "abs_tol": self.integrator.abs_tol,
                           "rel_tol": self.integrator.rel_tol, "max_step": self.integrator.max_step},
        }


_PHYS_NAMES = ("x", "y", "z")


def phys_names(dim: int) -> list[str]:
    return list(_PHYS_NAMES[:dim]) if dim <= 3 else [f"x{i}" for i in range(dim)]


@dataclass(frozen=True)
class Observable:
    """phi on physical coordinates, polynomial when possible (then it runs in the kernel)."""

    name: str
    fn: Callable[[np.ndarray], float]
    poly: Poly | None = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("observable names must be non-empty", "observable")

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.poly is not None and self.poly.n == pts.shape[1]:
            return PolyMap.from_polys([self.poly]).eval_rows(pts)[:, 0]
        return np.array([self(p) for p in pts])

    @classmethod
    def constant(cls, c: float, dim: int = 2) -> "Observable":
        return cls(f"const={c!r}", lambda x: c, Poly.const(dim, c))

    def sup_norm(self, flow: FlowSpec, extra: np.ndarray | None = None, per_axis: int = 101) -> float:
        pts = flow.domain.grid(per_axis)
        if extra is not None and len(extra):
            pts = np.concatenate([pts, np.atleast_2d(extra)])
        return float(np.max(np.abs(self.values(pts))))


NAMED_OBSERVABLES = {
    "eye-symmetric": "(x**2 - 1)**2 + y**2",
    "const": "1",
}


def observable_from_expr(expr: str, dim: int = 2, name: str | None = None) -> Observable:
    """Named observable or an arithmetic expression in x, y (x0, x1, ... above 3 dimensions)."""
    if not expr or not expr.strip():
        raise ValidationError("observable names must be non-empty", "observable")
    names = phys_names(dim)
    src = NAMED_OBSERVABLES.get(expr, expr)
    try:
        p = parse_poly(src, names)
        return Observable(name or expr, lambda x, p=p: p(x), p)
    except ValidationError:
        f = compile_numeric(src, names)
        return Observable(name or expr, lambda x, f=f: float(f(*x)))


# --- trajectory driver ---------------------------------------------------------------

def _lift_poly(p: Poly, fld: ExpPolyField) -> Poly:
    """Re-express a polynomial in physical coordinates over the field's features."""
    out = {}
    for e, c in p.terms.items():
        e2 = [0] * fld.dim
        for k, j in enumerate(fld.phys_index):
            e2[j] += e[k]
        out[tuple(e2)] = out.get(tuple(e2), 0.0) + c
    return Poly(fld.dim, out)


@dataclass
class RunResult:
    stops: np.ndarray
    chart: np.ndarray       # chart state at each reached stop
    quad: np.ndarray        # quadratures at each reached stop
    phys: np.ndarray        # physical state at each reached stop
    rec_t: np.ndarray
    rec_y: np.ndarray       # recorded accepted steps (chart + quadratures)
    n_accepted: int = 0
    n_rejected: int = 0
    n_evals: int = 0
    t_reached: float = 0.0

    def rec_phys(self, traj: "Trajectory") -> np.ndarray:
        return traj.to_phys_many(self.rec_y[:, : traj.d])


class Trajectory:
    """Integrates one flow plus a fixed list of observables."""

    REC_CHUNK = 1 << 15

    def __init__(self, flow: FlowSpec, observables: Sequence[Observable] = (), backend: str | None = None):
        self.flow = flow
        self.observables = list(observables)
        fld = flow.field
        self.m = len(self.observables)
        poly_ok = fld is not None and all(o.poly is not None for o in self.observables) and backend != "callable"
        if poly_ok:
            self.d = fld.dim
            obs_map = (PolyMap.from_polys([_lift_poly(o.poly, fld) for o in self.observables], fld.dim)
                       if self.observables else None)
            self.kernel = kernel_class(backend)(fld.log_flags, fld.rhs, obs_map, fld.phys_index)
            self.backend = self.kernel.backend
        else:
            self.d = fld.dim if fld is not None else flow.dimension
            self.kernel = None
            self.backend = "python-callable"
            obs = self.observables
            d = self.d
            if fld is not None:
                def fun(y, fld=fld):
                    z = np.asarray(y[:d])
                    u = fld.features(z)
                    ph = u[list(fld.phys_index)]
                    return list(fld.rhs(u)) + [o.fn(ph) for o in obs]
            else:
                cf = flow.callable_field

                def fun(y):
                    z = np.asarray(y[:d])
                    return list(np.asarray(cf(z), dtype=float)) + [o.fn(z) for o in obs]
            self._fun = fun

    # chart helpers
    def to_chart(self, x) -> np.ndarray:
        if self.flow.field is None:
            return np.asarray(x, dtype=float).copy()
        return self.flow.field.to_chart(np.asarray(x, dtype=float))

    def to_phys(self, z) -> np.ndarray:
        if self.flow.field is None:
            return np.asarray(z, dtype=float).copy()
        return self.flow.field.to_phys(z)

    def to_phys_many(self, zs: np.ndarray) -> np.ndarray:
        if self.flow.field is None:
            return np.asarray(zs, dtype=float)
        fld = self.flow.field
        flags = np.array(fld.log_flags, dtype=bool)
        with np.errstate(over="ignore"):
            u = np.where(flags[None, :], np.exp(zs), zs)
        return u[:, list(fld.phys_index)]

    def _phys_of_y(self, y):
        return list(self.to_phys(np.asarray(y[: self.d])))

    def _advance(self, y, t, t_end, h, dmax, rec_t, rec_y):
        cfg = self.flow.integrator
        if self.kernel is not None:
            return self.kernel.advance(y, t, t_end, h, cfg.rel_tol, cfg.abs_tol, cfg.max_step, dmax,
                                       rec_t, rec_y, cfg.max_steps)
        ys = [float(v) for v in y]
        cap = 0 if rec_t is None else len(rec_t)
        rec = [] if cap else None
        status, t, h, na, nr, ne = _dopri.advance(self._fun, ys, float(t), float(t_end), float(h), cfg.rel_tol, cfg.abs_tol,
                                                  cfg.max_step, dmax, self._phys_of_y, rec, cap, cfg.max_steps)
        y[:] = ys
        for i, (ti, yi) in enumerate(rec or ()):
            rec_t[i] = ti
            rec_y[i, :] = yi
        return status, t, h, len(rec or ()), na, nr, ne

    def run(self, start, stops: Iterable[float], *, chart_start: bool = False, record_from: float | None = None,
            dmax: float = 0.0, t0: float = 0.0, q0: Sequence[float] | None = None) -> RunResult:
        """Integrate from ``start`` (physical unless ``chart_start``) through sorted ``stops``.

        Steps taken after ``record_from`` are recorded.  Raises
        IntegrationFailure (with the partial RunResult) on step underflow.
        """
        stops = np.asarray(sorted(float(s) for s in stops))
        if stops.size and stops[0] < t0:
            raise ValidationError("stop times must be >= the start time", "t")
        z = np.asarray(start, dtype=float).copy() if chart_start else self.to_chart(start)
        if z.shape != (self.d,):
            raise ValidationError(f"state must have {self.d} chart coordinates", "x0")
        y = np.concatenate([z, np.zeros(self.m) if q0 is None else np.asarray(q0, dtype=float)])
        n = self.d + self.m
        chart, quad, rts, rys = [], [], [], []
        t, h = t0, -1.0
        tot = [0, 0, 0]
        buf_t = np.empty(self.REC_CHUNK)
        buf_y = np.empty((self.REC_CHUNK, n))

        def result():
            ch = np.array(chart).reshape(-1, self.d)
            return RunResult(stops, ch, np.array(quad).reshape(len(chart), self.m),
                             self.to_phys_many(ch) if len(ch) else np.empty((0, self.flow.dimension)),
                             np.concatenate(rts) if rts else np.empty(0),
                             np.concatenate(rys) if rys else np.empty((0, n)), *tot, t)

        for s in stops:
            while t < s:
                rec = record_from is not None and s > record_from
                if rec and t < record_from:
                    seg_end, rec = record_from, False
                else:
                    seg_end = s
                status, t, h, n_rec, na, nr, ne = self._advance(y, t, seg_end, h, dmax if rec else 0.0,
                                                                 buf_t if rec else None, buf_y if rec else None)
                tot[0] += na
                tot[1] += nr
                tot[2] += ne
                if rec and n_rec:
                    rts.append(buf_t[:n_rec].copy())
                    rys.append(buf_y[:n_rec].copy())
                if status in (_dopri.UNDERFLOW, _dopri.MAX_STEPS):
                    why = "step size underflow" if status == _dopri.UNDERFLOW else "step budget exhausted"
                    raise IntegrationFailure(f"{why} at t = {t:.17g}", last_time=t, partial=result())
            chart.append(y[: self.d].copy())
            quad.append(y[self.d:].copy())
        return result()


def integrate(flow: FlowSpec, x0, t: float, backend: str | None = None) -> np.ndarray:
    """f_t(x0) in physical coordinates."""
    x0 = np.asarray(x0, dtype=float)
    if not t >= 0:
        raise ValidationError("t must be nonnegative", "t")
    if x0.shape != (flow.dimension,) or not flow.domain.contains(x0):
        raise ValidationError("x0 must be a point of the domain", "x0")
    res = Trajectory(flow, (), backend).run(x0, [t])
    return flow.domain.project(res.phys[-1])


# --- running averages ----------------------------------------------------------------

def checkpoint_times(T: float, n_checkpoints: int) -> np.ndarray:
    """Geometric grid from min(1, T/2) to T."""
    lo = min(1.0, T / 2)
    if n_checkpoints < 2 or lo >= T:
        return np.array([T])
    ts = np.geomspace(lo, T, n_checkpoints)
    ts[-1] = T
    return ts


def _tail_stats(times: np.ndarray, avg: np.ndarray, upto: float, window: float = 0.5):
    sel = (times >= window * upto * (1 - 1e-12)) & (times <= upto * (1 + 1e-12))
    if not np.any(sel):
        return math.nan, math.nan
    return float(avg[sel].min()), float(avg[sel].max())


@dataclass
class AverageTrace:
    """Running averages (1/t) int_0^t phi(f_s x) ds at checkpoint times.

    ``liminf_est``/``limsup_est`` are the min/max over the tail window
    [T/2, T]; ``liminf_path``/``limsup_path`` hold the same statistic for
    every checkpoint t over [t/2, t].
    """

    observable: str
    x0: list
    sample_times: np.ndarray
    running_average: np.ndarray
    liminf_est: float
    limsup_est: float
    window: tuple[float, float]
    liminf_path: np.ndarray
    limsup_path: np.ndarray
    phi_min: float
    phi_max: float
    horizon: float
    complete: bool = True
    backend: str = ""
    steps: int = 0

    @property
    def final(self) -> float:
        return float(self.running_average[-1]) if len(self.running_average) else math.nan

    @property
    def tail_width(self) -> float:
        return self.limsup_est - self.liminf_est

    def window_stats(self, upto: float) -> tuple[float, float]:
        return _tail_stats(self.sample_times, self.running_average, upto)

    def width_at(self, upto: float) -> float:
        lo, hi = self.window_stats(upto)
        return hi - lo

    def csv_rows(self):
        for row in zip(self.sample_times, self.running_average, self.liminf_path, self.limsup_path):
            yield tuple(float(v) for v in row)

    def as_dict(self, include_series: bool = False) -> dict:
        out = {
            "observable": self.observable,
            "x0": list(self.x0),
            "horizon": self.horizon,
            "final_average": self.final,
            "liminf_est": self.liminf_est,
            "limsup_est": self.limsup_est,
            "tail_window": list(self.window),
            "tail_width": self.tail_width,
            "phi_min_on_trajectory": self.phi_min,
            "phi_max_on_trajectory": self.phi_max,
            "complete": self.complete,
            "backend": self.backend,
        }
        if include_series:
            out["sample_times"] = self.sample_times.tolist()
            out["running_average"] = self.running_average.tolist()
        return out


def _build_trace(obs: Observable, x0, times, q, phys_pts, horizon, complete, backend, steps) -> AverageTrace:
    times = np.asarray(times, dtype=float)
    avg = q / times if len(times) else np.empty(0)
    lo_path = np.array([_tail_stats(times, avg, t)[0] for t in times])
    hi_path = np.array([_tail_stats(times, avg, t)[1] for t in times])
    upto = times[-1] if len(times) else horizon
    lo, hi = _tail_stats(times, avg, upto) if len(times) else (math.nan, math.nan)
    vals = obs.values(phys_pts) if len(phys_pts) else np.array([math.nan])
    return AverageTrace(obs.name, [float(v) for v in np.ravel(x0)], times, avg, lo, hi, (upto / 2, upto),
                        lo_path, hi_path, float(np.min(vals)), float(np.max(vals)), float(horizon), complete,
                        backend, steps)


def time_averages(flow: FlowSpec, observables: Sequence[Observable], x0, T: float, n_checkpoints: int = 512,
                  *, chart_start: bool = False, backend: str | None = None, extra_times: Iterable[float] = (),
                  dmax: float = 0.0) -> list[AverageTrace]:
    """Running averages of several observables along one trajectory."""
    if not T > 0:
        raise ValidationError("T must be > 0", "T")
    traj = Trajectory(flow, observables, backend)
    if not chart_start:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (flow.dimension,) or not flow.domain.contains(x0):
            raise ValidationError("x0 must be a point of the domain", "x0")
    times = np.union1d(checkpoint_times(T, n_checkpoints), np.asarray(list(extra_times), dtype=float))
    times = times[(times > 0) & (times <= T)]
    x_label = traj.to_phys(np.asarray(x0)) if chart_start else x0
    complete = True
    try:
        res = traj.run(x0, times, chart_start=chart_start, record_from=0.0, dmax=dmax)
    except IntegrationFailure as exc:
        res = exc.partial
        complete = False
        failure = exc
    pts = res.rec_phys(traj) if len(res.rec_y) else res.phys
    n_done = len(res.quad)
    traces = [_build_trace(o, x_label, times[:n_done], res.quad[:, i], pts, T, complete, traj.backend,
                           res.n_accepted) for i, o in enumerate(observables)]
    if not complete:
        failure.partial = traces
        raise failure
    return traces


def time_average(flow: FlowSpec, observable: Observable, x0, T: float, n_checkpoints: int = 512,
                 **kw) -> AverageTrace:
    """Running average of one observable; see :func:`time_averages`."""
    return time_averages(flow, [observable], x0, T, n_checkpoints, **kw)[0]


# --- psi reduction ------------------------------------------------------------------

@dataclass
class PsiReduction:
    """psi(y) = int_0^1 phi(f_t y) dt together with the unit-time map f_1."""

    flow: FlowSpec
    observable: Observable
    backend: str | None = None

    def __post_init__(self):
        self._traj = Trajectory(self.flow, [self.observable], self.backend)

    def psi(self, y) -> float:
        return float(self._traj.run(y, [1.0]).quad[-1, 0])

    def unit_map(self, y) -> np.ndarray:
        return self._traj.run(y, [1.0]).phys[-1]

    def discrete_average(self, y, n: int) -> float:
        """(1/n) sum_{j<n} psi(f_j y), stepping the unit map one restart at a time."""
        z = self._traj.to_chart(y)
        terms = []
        for _ in range(n):
            r = self._traj.run(z, [1.0], chart_start=True)
            terms.append(float(r.quad[-1, 0]))
            z = r.chart[-1]
        return math.fsum(terms) / n

    def continuous_integrals(self, y, times: Sequence[float]) -> np.ndarray:
        """int_0^t phi(f_s y) ds at each t, from one uninterrupted trajectory."""
        r = self._traj.run(y, times)
        return r.quad[:, 0]

    def check_identity(self, y, ns: Sequence[int] = (1, 4, 16, 64, 128)) -> dict:
        ns = sorted(set(int(n) for n in ns))
        n_max = ns[-1]
        cont = self.continuous_integrals(y, range(1, n_max + 1))
        z = self._traj.to_chart(y)
        partial, acc = {}, []
        for j in range(n_max):
            r = self._traj.run(z, [1.0], chart_start=True)
            acc.append(float(r.quad[-1, 0]))
            z = r.chart[-1]
            if j + 1 in ns:
                partial[j + 1] = math.fsum(acc) / (j + 1)
        rows = [{"n": n, "discrete": partial[n], "continuous": float(cont[n - 1] / n),
                 "gap": abs(partial[n] - float(cont[n - 1] / n))} for n in ns]
        return {"rows": rows, "max_gap": max(r["gap"] for r in rows)}

    def check_boundary(self, y, Ts: Sequence[float] = (10.0, 100.0, 1000.0), offset: float = 0.5,
                       sup_norm: float | None = None) -> dict:
        """|(1/T) int_[T]^T phi(f_t y) dt| <= ||phi|| / T at each T and at T + offset."""
        Ts = sorted({float(T) for T in Ts} | {float(T) + offset for T in Ts})
        stops = sorted(set(Ts) | {float(math.floor(T)) for T in Ts})
        r = self._traj.run(y, stops)
        integ = dict(zip(stops, r.quad[:, 0]))
        norm = self.observable.sup_norm(self.flow) if sup_norm is None else sup_norm
        rows = []
        for T in Ts:
            term = abs(integ[T] - integ[float(math.floor(T))]) / T
            rows.append({"T": T, "boundary_term": term, "bound": norm / T, "holds": bool(term <= norm / T + 1e-12)})
        return {"rows": rows, "sup_norm": norm, "holds": all(r["holds"] for r in rows)}


def psi_reduce(flow: FlowSpec, observable: Observable, backend: str | None = None) -> PsiReduction:
    return PsiReduction(flow, observable, backend)


# --- omega limits ---------------------------------------------------------------------

@dataclass
class OmegaEstimate:
    """Clustered tail samples.

    ``points`` are cell centroids on a grid of size ``resolution``;
    ``states`` are chart states of actual trajectory samples, one per cell,
    which is what downstream checks restart from.
    """

    points: np.ndarray
    states: np.ndarray
    hausdorff_gap: float
    stable: bool
    burn_in: float
    window: tuple[float, float]
    doublings: int
    resolution: float
    history: list = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def diameter(self) -> float:
        if len(self.points) < 2:
            return 0.0
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def subsample(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if len(self.points) <= k:
            return self.points, self.states
        idx = np.unique(np.linspace(0, len(self.points) - 1, k).round().astype(int))
        return self.points[idx], self.states[idx]

    def as_dict(self) -> dict:
        return {"n_points": self.n_points, "hausdorff_gap": self.hausdorff_gap, "stable": self.stable,
                "burn_in": self.burn_in, "window": list(self.window), "doublings": self.doublings,
                "resolution": self.resolution, "diameter": self.diameter(),
                "gap_history": list(self.history)}


def _cluster(pts: np.ndarray, states: np.ndarray, res: float):
    cells = np.floor(pts / res).astype(np.int64)
    _, first, inv = np.unique(cells, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    k = len(first)
    sums = np.zeros((k, pts.shape[1]))
    np.add.at(sums, inv, pts)
    counts = np.bincount(inv, minlength=k)
    return sums / counts[:, None], states[first]


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 or len(b) == 0:
        return math.inf
    from scipy.spatial import cKDTree

    d1 = cKDTree(b).query(a)[0].max()
    d2 = cKDTree(a).query(b)[0].max()
    return float(max(d1, d2))


def _window_samples(traj: Trajectory, start, chart_start: bool, T: float, w: float, sample_count: int,
                    dmax: float):
    times = np.linspace(T, w * T, sample_count)
    res = traj.run(start, times, chart_start=chart_start, record_from=T, dmax=dmax)
    pts = np.concatenate([res.phys, res.rec_phys(traj)]) if len(res.rec_y) else res.phys
    states = np.concatenate([res.chart, res.rec_y[:, : traj.d]]) if len(res.rec_y) else res.chart
    keep = np.all(np.isfinite(pts), axis=1)
    return pts[keep], states[keep]


def estimate_omega(flow: FlowSpec, x0, burn_in_T: float = 100.0, sample_count: int = 1000, *,
                   threshold: float = 1e-3, resolution: float = 1e-3, max_doublings: int = 8,
                   window_factor: float = 2.0, dmax: float | None = None, chart_start: bool = False,
                   backend: str | None = None) -> OmegaEstimate:
    """Cluster the tail on [T, window_factor * T], doubling T until successive clouds agree.

    Accepted integration steps in the window are recorded with physical
    displacement capped at ``dmax`` (default 10 * resolution) so that
    curves are sampled densely, not just at the ``sample_count`` uniform
    times.
    """
    if not burn_in_T > 0:
        raise ValidationError("burn_in_T must be > 0", "burn_in_T")
    if sample_count < 1:
        raise ValidationError("sample_count must be >= 1", "sample_count")
    traj = Trajectory(flow, (), backend)
    dmax = 10 * resolution if dmax is None else dmax
    T = float(burn_in_T)
    prev = None
    history = []
    for k in range(max_doublings + 1):
        pts, states = _window_samples(traj, x0, chart_start, T, window_factor, sample_count, dmax)
        cent, reps = _cluster(pts, states, resolution)
        if prev is not None:
            gap = hausdorff(prev[0], cent)
            history.append(gap)
            if gap < threshold:
                return OmegaEstimate(cent, reps, gap, True, T, (T, window_factor * T), k, resolution, history)
        prev = (cent, reps)
        T *= 2
    T /= 2
    return OmegaEstimate(prev[0], prev[1], history[-1] if history else math.inf, False, T,
                         (T, window_factor * T), max_doublings, resolution, history)


# --- Theorem C and friends ------------------------------------------------------------

def _parallel(fn, items):
    items = list(items)
    with ThreadPoolExecutor(max_workers=min(max_workers(), max(1, len(items)))) as ex:
        return list(ex.map(fn, items))


def check_theorem_c(flow: FlowSpec, observable: Observable, x0, omega: OmegaEstimate, horizon: float = 1000.0, *,
                    margin: float = 1e-2, tol: float = 5e-2, max_points: int = 32,
                    backend: str | None = None) -> dict:
    """Finite-window proxy for: limsup of averages from every omega point <= liminf at x0.

    Limsup/liminf are tail-window extremes over [horizon/2, horizon].  The
    report carries the horizon; it never claims the hypothesis itself.
    """
    base = {"tags": ["TheoremC"], "observable": observable.name, "probe_horizon": horizon, "margin": margin,
            "omega": omega.as_dict(), "proxy": "tail-window extremes over [T/2, T]"}
    if not omega.stable:
        return {**base, "verdict": "undecided", "reason": "omega-limit estimate did not stabilize"}
    x_trace = time_average(flow, observable, x0, horizon, backend=backend)
    pts, states = omega.subsample(max_points)
    traces = _parallel(lambda s: time_average(flow, observable, s, horizon, chart_start=True, backend=backend),
                       states)
    sups = np.array([t.limsup_est for t in traces])
    worst = int(np.argmax(sups))
    holds = bool(sups[worst] <= x_trace.liminf_est + margin)
    out = {
        **base,
        "liminf_at_x0": x_trace.liminf_est,
        "limsup_at_x0": x_trace.limsup_est,
        "omega_limsups": sups.tolist(),
        "worst_omega_point": pts[worst].tolist(),
        "worst_limsup": float(sups[worst]),
        "inequality_holds": holds,
    }
    if holds:
        stable = bool(x_trace.tail_width < tol)
        out.update(average_stabilizes=stable, tail_width=x_trace.tail_width, limit_estimate=x_trace.final,
                   verdict="holds" if stable else "undecided")
        if omega.n_points == 1 or omega.diameter() <= 10 * omega.resolution:
            out["tags"] = ["TheoremC", "LemmaFixedPoint"]
            out["omega_value"] = observable(pts.mean(axis=0))
    else:
        out.update(verdict="fails", tail_width=x_trace.tail_width)
    return out


def check_gooda11(flow: FlowSpec, observable: Observable, x0, epsilon_list: Sequence[float] = (0.5, 0.25, 0.1),
                  k_max: int = 64, t_probe: int = 1000, *, stab_tol: float = 1e-2, backend: str | None = None) -> dict:
    """Search (t_eps, k_eps) with f_j(x0) in E*_{k_eps}^eps for all integers j in [t_eps, t_probe].

    phi_{*,-} is shift invariant along an orbit, so it is estimated once from
    the x0 tail (window [H/2, H] with H = 4 t_probe, compared with H/2).
    Membership of f_j(x0) is decided from window integrals
    int_j^{j+n} phi = Q(j+n) - Q(j) of a single trajectory.
    """
    if k_max < 1 or t_probe < 1:
        raise ValidationError("k_max and t_probe must be >= 1", "k_max")
    H = 4.0 * t_probe
    est = time_average(flow, observable, x0, H, backend=backend)
    half = est.window_stats(H / 2)[0]
    phi_star = est.liminf_est
    base = {"tags": ["Gooda11"], "observable": observable.name, "t_probe": t_probe, "k_max": k_max,
            "phi_star_minus": phi_star, "phi_star_minus_half_horizon": half, "estimate_horizon": H}
    if not abs(phi_star - half) <= stab_tol:
        return {**base, "verdict": "undecided", "reason": "phi_{*,-} estimate unstable"}
    r = Trajectory(flow, [observable], backend).run(x0, range(1, t_probe + k_max + 1))
    Q = np.concatenate([[0.0], r.quad[:, 0]])
    js = np.arange(0, t_probe + 1)
    first = np.zeros(len(js), dtype=np.int64)
    per_eps = []
    for eps in epsilon_list:
        first[:] = 0
        for n in range(k_max, 0, -1):
            hit = (Q[js + n] - Q[js]) / n <= phi_star + eps
            first[hit] = n
        bad = np.flatnonzero(first == 0)
        t_eps = int(bad[-1] + 1) if bad.size else 0
        found = t_eps <= t_probe // 2
        k_eps = int(first[t_eps:].max()) if found else None
        per_eps.append({"epsilon": eps, "found": found, "t_eps": t_eps if found else None, "k_eps": k_eps,
                        "probed_window": [t_eps, t_probe]})
    ok = all(p["found"] for p in per_eps)
    return {**base, "per_epsilon": per_eps, "verdict": "holds" if ok else "fails",
            "limit_estimate": est.final}


def _newton_zero(flow: FlowSpec, x, iters: int = 50, h: float = 1e-7):
    x = np.asarray(x, dtype=float).copy()
    for _ in range(iters):
        f = flow.vector_field(x)
        if np.linalg.norm(f) < 1e-14:
            break
        J = np.empty((len(x), len(x)))
        for j in range(len(x)):
            e = np.zeros(len(x))
            e[j] = h
            J[:, j] = (flow.vector_field(x + e) - flow.vector_field(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, f, rcond=None)[0]
        x = x - step
        if np.linalg.norm(step) < 1e-15:
            break
    return x, float(np.linalg.norm(flow.vector_field(x)))


def check_2d_point(flow: FlowSpec, x0, omega: OmegaEstimate | None = None, *, burn_in_T: float = 100.0,
                   max_points: int = 16, cluster_radius: float = 1e-2, zero_tol: float = 1e-8,
                   backend: str | None = None, **omega_kw) -> dict:
    """Is every omega point of x0 attracted to a single zero of the field?

    Returns the verdict plus omega(x0) intersected with Fix X as refined zeros.
    """
    if omega is None:
        omega = estimate_omega(flow, x0, burn_in_T, backend=backend, **omega_kw)
    base = {"tags": ["LemmaFixedPoint"], "omega": omega.as_dict()}
    if not omega.stable:
        return {**base, "is_2d_point": None, "verdict": "undecided", "fixed_points": [],
                "reason": "omega(x0) unstable"}
    pts, states = omega.subsample(max_points)
    subs = _parallel(lambda s: estimate_omega(flow, s, burn_in_T, chart_start=True, backend=backend, **omega_kw),
                     states)
    fixed: list[np.ndarray] = []
    rows, undecided, all_fixed = [], False, True
    for p, sub in zip(pts, subs):
        row = {"omega_point": p.tolist(), "sub_stable": sub.stable, "sub_diameter": sub.diameter()}
        if not sub.stable:
            undecided = True
            rows.append(row)
            continue
        single = sub.diameter() <= cluster_radius
        row["single_cluster"] = single
        if single:
            z, res = _newton_zero(flow, sub.points.mean(axis=0))
            is_zero = res < zero_tol and np.linalg.norm(z - sub.points.mean(axis=0)) <= cluster_radius
            row.update(zero=z.tolist(), residual=res, at_zero=bool(is_zero))
            if is_zero and not any(np.linalg.norm(z - q) < 1e-6 for q in fixed):
                fixed.append(z)
            all_fixed &= bool(is_zero)
        else:
            all_fixed = False
        rows.append(row)
    in_omega = [q for q in fixed if np.min(np.linalg.norm(omega.points - q, axis=1)) <= cluster_radius]
    verdict = "undecided" if undecided and all_fixed else ("holds" if all_fixed else "fails")
    return {**base, "is_2d_point": None if verdict == "undecided" else all_fixed, "verdict": verdict,
            "fixed_points": sorted((q.tolist() for q in fixed)), "omega_cap_fix": sorted(q.tolist() for q in in_omega),
            "per_point": rows}
