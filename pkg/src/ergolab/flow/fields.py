"""Vector fields and observables as polynomials in "features".

A state z in R^d maps to features u with u_j = exp(z_j) on log-flagged
coordinates and u_j = z_j otherwise.  Every right-hand side component and
every observable is a polynomial in u.  That single representation covers
the closed-form test flows, both charts of the eye field and user
coefficient files, and it is what the compiled kernel evaluates.

Log-flagged coordinates may equal -inf (u_j = 0).  This is how invariant
curves such as {y = 0} are represented exactly.
"""
from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import ValidationError

__all__ = [
    "Poly",
    "PolyMap",
    "ExpPolyField",
    "parse_poly",
    "builtin_field",
    "BUILTIN_FIELDS",
    "load_coefficients",
    "eye_field",
    "eye_log_field",
]


class Poly:
    """Sparse multivariate polynomial: {exponent tuple: coefficient}."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[tuple, float] | None = None):
        self.n = n
        self.terms = {tuple(e): float(c) for e, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, n: int, c: float) -> "Poly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def var(cls, n: int, j: int) -> "Poly":
        e = [0] * n
        e[j] = 1
        return cls(n, {tuple(e): 1.0})

    def _lift(self, other) -> "Poly":
        return other if isinstance(other, Poly) else Poly.const(self.n, float(other))

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Poly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out: dict[tuple, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Poly(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValidationError("polynomial powers must be nonnegative integers", "expr")
        out = Poly.const(self.n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, u) -> float:
        return math.fsum(c * math.prod(float(u[j]) ** p for j, p in enumerate(e) if p) for e, c in self.terms.items())

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def __repr__(self):
        return f"Poly({self.terms})"


_ALLOWED_FUNCS = {"sqrt", "log", "exp", "cos", "sin", "tan", "abs", "tanh", "arctan", "atan2", "ceil", "floor"}


def _safe_tree(expr: str, names: Sequence[str], funcs=_ALLOWED_FUNCS) -> ast.Expression:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse expression {expr!r}", "expr") from exc
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Div,
                             ast.Pow, ast.USub, ast.UAdd, ast.Load, ast.Call)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name) and (node.id in names or node.id in funcs or node.id in ("pi", "e")):
            continue
        raise ValidationError(f"disallowed element {type(node).__name__} in {expr!r}", "expr")
    for node in ast.walk(tree):
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in funcs):
            raise ValidationError(f"unknown function in {expr!r}", "expr")
    return tree


def compile_numeric(expr: str, names: Sequence[str]) -> Callable:
    """Whitelisted arithmetic expression -> numpy-evaluated function of ``names``."""
    tree = _safe_tree(expr, names)
    code = compile(tree, "<expr>", "eval")
    env = {f: getattr(np, f) for f in _ALLOWED_FUNCS if f not in ("atan2",)}
    env.update(atan2=np.arctan2, pi=math.pi, e=math.e, abs=np.abs)

    def fn(*args):
        return eval(code, {"__builtins__": {}}, {**env, **dict(zip(names, args))})

    fn.expr = expr
    return fn


def parse_poly(expr: str, names: Sequence[str]) -> Poly:
    """Parse an arithmetic expression over ``names`` into a Poly.

    Raises ValidationError when the expression is not a polynomial.
    """
    tree = _safe_tree(expr, names, funcs=())
    n = len(names)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            return Poly.const(n, float(node.value))
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return Poly.const(n, math.pi)
            if node.id == "e":
                return Poly.const(n, math.e)
            return Poly.var(n, list(names).index(node.id))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                if not b.is_constant():
                    raise ValidationError(f"division by a non-constant in {expr!r}", "expr")
                return a * (1.0 / b(np.zeros(n)))
            if isinstance(node.op, ast.Pow):
                if not b.is_constant():
                    raise ValidationError(f"non-constant exponent in {expr!r}", "expr")
                k = b(np.zeros(n))
                if k != int(k) or k < 0:
                    raise ValidationError(f"exponent {k} is not a nonnegative integer", "expr")
                return a ** int(k)
        raise ValidationError(f"not a polynomial: {expr!r}", "expr")

    return ev(tree)


@dataclass(frozen=True)
class PolyMap:
    """R^n_in -> R^n_out, each output a polynomial; flat arrays for the kernels."""

    n_in: int
    n_out: int
    comp: np.ndarray  # int64 [n_terms]
    coef: np.ndarray  # float64 [n_terms]
    exps: np.ndarray  # int64 [n_terms, n_in]

    @classmethod
    def from_polys(cls, polys: Sequence[Poly], n_in: int | None = None) -> "PolyMap":
        n_in = polys[0].n if n_in is None else n_in
        comp, coef, exps = [], [], []
        for i, p in enumerate(polys):
            if p.n != n_in:
                raise ValidationError("polynomial arity mismatch", "field")
            for e, c in sorted(p.terms.items()):
                comp.append(i)
                coef.append(c)
                exps.append(e)
        exps_arr = np.array(exps, dtype=np.int64).reshape(len(exps), n_in)
        return cls(n_in, len(polys), np.array(comp, dtype=np.int64), np.array(coef, dtype=float), exps_arr)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.coef.size == 0:
            return np.zeros(self.n_out)
        with np.errstate(over="ignore", invalid="ignore"):
            mono = np.prod(np.power(u[None, :], self.exps), axis=1)
        return np.bincount(self.comp, weights=self.coef * mono, minlength=self.n_out)

    def eval_rows(self, U: np.ndarray) -> np.ndarray:
        """Evaluate at every row of ``U`` (shape [N, n_in]) -> [N, n_out]."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        out = np.zeros((U.shape[0], self.n_out))
        with np.errstate(over="ignore", invalid="ignore"):
            for i, c, e in zip(self.comp, self.coef, self.exps):
                out[:, i] += c * np.prod(U ** e[None, :], axis=1)
        return out

    def polys(self) -> list[Poly]:
        out = [Poly(self.n_in) for _ in range(self.n_out)]
        for i, c, e in zip(self.comp, self.coef, self.exps):
            out[i] = out[i] + Poly(self.n_in, {tuple(int(v) for v in e): c})
        return out

    def jacobian(self) -> list[list[Poly]]:
        """d out_i / d u_j as polynomials."""
        jac = []
        for p in self.polys():
            row = []
            for j in range(self.n_in):
                terms = {}
                for e, c in p.terms.items():
                    if e[j]:
                        e2 = list(e)
                        e2[j] -= 1
                        terms[tuple(e2)] = terms.get(tuple(e2), 0.0) + c * e[j]
                row.append(Poly(self.n_in, terms))
            jac.append(row)
        return jac

    def to_json(self) -> list:
        rows = [[] for _ in range(self.n_out)]
        for i, c, e in zip(self.comp, self.coef, self.exps):
            rows[int(i)].append({"coef": float(c), "exps": [int(v) for v in e]})
        return rows


def _identity_decode(z):
    return np.asarray(z, dtype=float)


@dataclass(frozen=True)
class ExpPolyField:
    """dz/dt = rhs(u(z)).

    ``phys_index`` selects the physical coordinates among the features;
    ``encode`` maps a physical point to a chart state (identity unless the
    chart is logarithmic).
    """

    name: str
    rhs: PolyMap
    log_flags: tuple[bool, ...]
    phys_index: tuple[int, ...]
    encode: Callable[[np.ndarray], np.ndarray] | None = None
    phys_field: PolyMap | None = None  # the field in physical coordinates, when different
    params: Mapping[str, float] | None = None

    @property
    def dim(self) -> int:
        return self.rhs.n_out

    @property
    def phys_dim(self) -> int:
        return len(self.phys_index)

    def features(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(np.array(self.log_flags, dtype=bool), np.exp(z), z)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.rhs(self.features(z))

    def to_chart(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.phys_dim,):
            raise ValidationError(f"state must have {self.phys_dim} coordinates", "x0")
        return x.copy() if self.encode is None else self.encode(x)

    def to_phys(self, z: np.ndarray) -> np.ndarray:
        return self.features(z)[list(self.phys_index)]

    def physical_velocity(self, x: np.ndarray) -> np.ndarray:
        """Field value at a physical point (independent of the chart)."""
        x = np.asarray(x, dtype=float)
        if self.phys_field is not None:
            return self.phys_field(x)
        return self(self.to_chart(x))

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params or {}), "log_coordinates": list(self.log_flags),
                "phys_index": list(self.phys_index), "rhs": self.rhs.to_json()}


def _poly_field(name: str, exprs: Sequence[str], names: Sequence[str], params=None) -> ExpPolyField:
    polys = [parse_poly(e, names) for e in exprs]
    return ExpPolyField(name, PolyMap.from_polys(polys, len(names)), (False,) * len(names),
                        tuple(range(len(names))), params=params)


def eye_physical_polys(kappa: float, epsilon: float) -> list[Poly]:
    x, y = Poly.var(2, 0), Poly.var(2, 1)
    rho = x * x + y * y - 1
    p = 2 * y * y + rho * (1 - kappa * x) - 2 * epsilon * x * y * y * rho
    q = -2 * x * y - epsilon * y * rho * (rho + 2 * y * y)
    return [p, q]


def eye_field(kappa: float = 1.0 / 3.0, epsilon: float = 0.1) -> ExpPolyField:
    """The eye field in physical coordinates (x, y).

    kappa = 0 gives the dissipatively perturbed Hamiltonian
    (x^2 + 3y^2 - 1, -2xy) + eps * (dissipation); kappa > 0 bends the
    eigenvalues so that the cycle moduli satisfy lambda * sigma > 1.
    """
    pm = PolyMap.from_polys(eye_physical_polys(kappa, epsilon))
    return ExpPolyField("eye", pm, (False, False), (0, 1), params={"kappa": kappa, "epsilon": epsilon})


def _eye_encode(x: np.ndarray) -> np.ndarray:
    px, py = float(x[0]), float(x[1])
    rho = px * px + py * py - 1.0
    if py < 0 or rho > 1e-12:
        raise ValidationError("point lies outside the closed upper eye", "x0")
    a = -math.inf if py == 0 else math.log(py)
    b = -math.inf if abs(rho) < 1e-12 else math.log(-rho)
    return np.array([px, a, b])


def eye_log_field(kappa: float = 1.0 / 3.0, epsilon: float = 0.1) -> ExpPolyField:
    """The eye field in the chart z = (x, ln y, ln(1 - x^2 - y^2)).

    Features are u = (x, y, w) with w = -rho.  The two boundary curves sit
    at ln y = -inf and ln(-rho) = -inf, which the chart keeps exactly, so
    the orbit can approach them without losing relative precision.
    """
    n = 3
    x, y, w = Poly.var(n, 0), Poly.var(n, 1), Poly.var(n, 2)
    rho = -w
    p = 2 * y * y + rho * (1 - kappa * x) - 2 * epsilon * x * y * y * rho
    a_dot = -2 * x - epsilon * rho * (rho + 2 * y * y)
    b_dot = 2 * x * (1 - kappa * x) - 2 * epsilon * y * y * (2 * x * x + 2 * y * y + rho)
    pm = PolyMap.from_polys([p, a_dot, b_dot])
    phys = PolyMap.from_polys(eye_physical_polys(kappa, epsilon))
    return ExpPolyField("eye-log", pm, (False, True, True), (0, 1), encode=_eye_encode, phys_field=phys,
                        params={"kappa": kappa, "epsilon": epsilon})


BUILTIN_FIELDS: dict[str, Callable[[], ExpPolyField]] = {
    "zero": lambda: _poly_field("zero", ["0", "0"], ["x", "y"]),
    "sink": lambda: _poly_field("sink", ["-x", "-y"], ["x", "y"]),
    "sink1d": lambda: _poly_field("sink1d", ["-x"], ["x"]),
    "rotation": lambda: _poly_field("rotation", ["-y", "x"], ["x", "y"]),
    "eye": eye_field,
    "eye-log": eye_log_field,
    "bowen": eye_log_field,
}


def builtin_field(name: str) -> ExpPolyField:
    if name not in BUILTIN_FIELDS:
        raise ValidationError(f"unknown builtin field {name!r}; choose from {sorted(BUILTIN_FIELDS)}", "field")
    return BUILTIN_FIELDS[name]()


def load_coefficients(source) -> ExpPolyField:
    """Read a coefficient file.

    Either ``{"variables": ["x", "y"], "rhs": ["-y", "x"]}`` with
    polynomial expressions, or ``{"dimension": d, "rhs": [[{"coef": c,
    "exps": [..]}, ...], ...]}`` with explicit terms; an optional
    ``"log_coordinates"`` list of booleans marks exp features.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
        where = "field"
    else:
        path = Path(source)
        where = str(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read coefficient file: {exc}", where) from exc
    if "rhs" not in doc:
        raise ValidationError("missing field", f"{where}:rhs")
    name = str(doc.get("name", "coefficients"))
    if "variables" in doc:
        names = list(doc["variables"])
        if len(doc["rhs"]) != len(names):
            raise ValidationError("need one rhs expression per variable", f"{where}:rhs")
        fld = _poly_field(name, doc["rhs"], names)
        d = len(names)
        polys = fld.rhs.polys()
    else:
        try:
            d = int(doc["dimension"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("dimension must be an integer", f"{where}:dimension") from exc
        if len(doc["rhs"]) != d:
            raise ValidationError(f"need {d} rhs components", f"{where}:rhs")
        polys = []
        for i, row in enumerate(doc["rhs"]):
            p = Poly(d)
            for t in row:
                e = tuple(int(v) for v in t["exps"])
                if len(e) != d or min(e, default=0) < 0:
                    raise ValidationError("bad exponent vector", f"{where}:rhs[{i}]")
                p = p + Poly(d, {e: float(t["coef"])})
            polys.append(p)
    flags = tuple(bool(v) for v in doc.get("log_coordinates", [False] * d))
    if len(flags) != d:
        raise ValidationError(f"need {d} flags", f"{where}:log_coordinates")
    phys = tuple(int(v) for v in doc.get("phys_index", range(d)))
    return ExpPolyField(name, PolyMap.from_polys(polys, d), flags, phys)


def resolve_field(spec: str) -> ExpPolyField:
    """Builtin name or path to a coefficient file."""
    if spec in BUILTIN_FIELDS:
        return builtin_field(spec)
    if Path(spec).exists():
        return load_coefficients(spec)
    raise ValidationError(f"not a builtin field or readable file: {spec!r}", "field")
