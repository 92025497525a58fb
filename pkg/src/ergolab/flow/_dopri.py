"""Pure-Python Dormand-Prince 5(4) kernel.

Same contract as the compiled kernel in ``_kernels.pyx``: advance the
augmented state y = (z, q) from t to t_end, where z' = rhs(u(z)) and
q' = obs(u(z)), optionally recording accepted steps.  The fallback takes
an arbitrary callable for the derivative, so it also serves fields that
are not polynomial.
"""
from __future__ import annotations

import math

# status codes shared with the compiled kernel
DONE, BUFFER_FULL, UNDERFLOW, MAX_STEPS = 0, 1, 2, 3

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 5.0


def poly_source(log_flags, rhs, obs) -> str:
    """Python source for ``f(y) -> list`` evaluating rhs then obs on features of y[:d]."""
    d = len(log_flags)
    lines = ["def f(y):"]
    for j, flag in enumerate(log_flags):
        if flag:
            lines.append(f"    u{j} = _exp(y[{j}]) if y[{j}] < 700.0 else _inf")
        else:
            lines.append(f"    u{j} = y[{j}]")
    outs = []
    for pm in (rhs, obs):
        if pm is None:
            continue
        rows = [[] for _ in range(pm.n_out)]
        for i, c, e in zip(pm.comp, pm.coef, pm.exps):
            factors = [repr(float(c))]
            for j in range(d):
                p = int(e[j])
                # repeated products overflow to inf instead of raising
                factors.extend([f"u{j}"] * p)
            rows[int(i)].append("*".join(factors))
        outs.extend(" + ".join(r) if r else "0.0" for r in rows)
    lines.append("    return [" + ", ".join(outs) + "]")
    return "\n".join(lines)


def compile_poly(log_flags, rhs, obs):
    ns = {"_exp": math.exp, "_inf": math.inf}
    exec(compile(poly_source(log_flags, rhs, obs), "<poly>", "exec"), ns)
    return ns["f"]


def _finite(v) -> bool:
    for x in v:
        if x != x or x in (math.inf, -math.inf):
            return False
    return True


def advance(fun, y, t, t_end, h, rtol, atol, hmax, dmax=0.0, phys=None, rec=None, rec_cap=0,
            max_steps=10_000_000):
    """Integrate in place.

    ``y`` is a list updated in place; ``phys(y)`` returns physical
    coordinates (only used with ``dmax > 0``).  Accepted steps are appended
    to ``rec`` as ``(t, y[:])`` up to ``rec_cap`` entries.  Returns
    ``(status, t, h, n_accepted, n_rejected, n_evals)``.
    """
    n = len(y)
    n_acc = n_rej = 0
    k1 = fun(y)
    n_ev = 1
    if h <= 0:
        h = min(hmax, 1e-2)
    cap_phys = dmax > 0 and phys is not None
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            return MAX_STEPS, t, h, n_acc, n_rej, n_ev
        if h < 1e-13 * max(1.0, abs(t)):
            return UNDERFLOW, t, h, n_acc, n_rej, n_ev
        h = min(h, hmax)
        last = t + h >= t_end - 1e-13 * max(1.0, abs(t_end))
        hs = t_end - t if last else h
        y2 = [y[i] + hs * A21 * k1[i] for i in range(n)]
        k2 = fun(y2)
        y3 = [y[i] + hs * (A31 * k1[i] + A32 * k2[i]) for i in range(n)]
        k3 = fun(y3)
        y4 = [y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(n)]
        k4 = fun(y4)
        y5 = [y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in range(n)]
        k5 = fun(y5)
        y6 = [y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in range(n)]
        k6 = fun(y6)
        yn = [y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in range(n)]
        k7 = fun(yn)
        n_ev += 6
        ok = _finite(k2) and _finite(k3) and _finite(k4) and _finite(k5) and _finite(k6) and _finite(k7)
        if ok:
            acc = 0.0
            for i in range(n):
                ei = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
                if sc != math.inf:
                    r = ei / sc
                    acc += r * r
            err = math.sqrt(acc / n)
        else:
            err = math.inf
        if err <= 1.0 and cap_phys:
            p0, p1 = phys(y), phys(yn)
            disp = math.sqrt(sum((a - b) ** 2 for a, b in zip(p0, p1)))
            if disp > dmax:
                n_rej += 1
                h = hs * max(0.1, 0.5 * dmax / disp)
                continue
        if err <= 1.0:
            t = t_end if last else t + hs
            y[:] = yn
            k1 = k7
            n_acc += 1
            fac = FAC_MAX if err == 0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            h = h if (last and hs < h) else hs * fac
            if rec is not None and rec_cap > 0:
                rec.append((t, yn[:]))
                if len(rec) >= rec_cap and t < t_end:
                    return BUFFER_FULL, t, h, n_acc, n_rej, n_ev
        else:
            n_rej += 1
            fac = 0.25 if err == math.inf else max(FAC_MIN, SAFETY * err ** -0.2)
            h = hs * min(1.0, fac)
    return DONE, t, h, n_acc, n_rej, n_ev


class PolyKernel:
    """Python stand-in for the compiled kernel's polynomial entry point."""

    backend = "python"

    def __init__(self, log_flags, rhs, obs, phys_index):
        self.fun = compile_poly(log_flags, rhs, obs)
        flags = list(log_flags)
        idx = list(phys_index)

        def phys(y):
            return [math.exp(y[j]) if flags[j] else y[j] for j in idx]

        self.phys = phys

    def advance(self, y, t, t_end, h, rtol, atol, hmax, dmax, rec_t, rec_y, max_steps=10_000_000):
        """Mirror of the compiled signature; ``y`` is a float64 array updated in place."""
        ys = [float(v) for v in y]
        cap = 0 if rec_t is None else len(rec_t)
        rec = [] if cap else None
        t, t_end, h = float(t), float(t_end), float(h)
        status, t, h, na, nr, ne = advance(self.fun, ys, t, t_end, h, rtol, atol, hmax, dmax,
                                           self.phys, rec, cap, max_steps)
        y[:] = ys
        n_rec = 0
        if rec:
            n_rec = len(rec)
            for i, (ti, yi) in enumerate(rec):
                rec_t[i] = ti
                rec_y[i, :] = yi
        return status, t, h, n_rec, na, nr, ne
