"""Regenerate everything under fixtures/.

Deterministic (seed 2024).  Expected values are computed here by direct
orbit walking with math.fsum, independently of the ergolab modules, except
for the frozen hybrid regression value which is recorded from the library
on purpose.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from ergolab.reports import dumps  # noqa: E402

OUT = ROOT / "fixtures"


def save(rel: str, doc) -> None:
    path = OUT / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))


def cycles_of(table):
    """All cycles of a finite map, each as a list starting at its smallest state."""
    n = len(table)
    seen, out = set(), []
    for x in range(n):
        path, pos = [], {}
        y = x
        while y not in pos and y not in seen:
            pos[y] = len(path)
            path.append(y)
            y = table[y]
        if y in pos:
            cyc = path[pos[y]:]
            k = cyc.index(min(cyc))
            out.append(cyc[k:] + cyc[:k])
        seen.update(path)
    return out


def cycle_of_state(table, x):
    seen = {}
    orbit = []
    while x not in seen:
        seen[x] = len(orbit)
        orbit.append(x)
        x = table[x]
    return orbit[:seen[x]], orbit[seen[x]:]


def invariant_systems(rng, count=24):
    made = 0
    while made < count:
        n = int(rng.integers(2, 11))
        table = [int(v) for v in rng.integers(0, n, size=n)]
        cycs = cycles_of(table)
        cw = rng.dirichlet(np.ones(len(cycs)))
        measure = []
        for c, w in zip(cycs, cw):
            for s in c:
                measure.append([s, float(w) / len(c)])
        measure.sort()
        phi = [float(v) for v in np.round(rng.normal(size=n), 6)]
        L = math.fsum(w * math.fsum(phi[t] for t in cycle_of_state(table, s)[1]) /
                      len(cycle_of_state(table, s)[1]) for s, w in measure)
        periods = sorted({len(c) for c in cycs})
        lcm = math.lcm(*periods)
        save(f"systems/inv_{made:02d}.json", {
            "n_states": n, "map": table, "observables": {"phi": phi}, "measure": measure,
            "expected": {"L": L, "period_lcm": lcm, "cycles": cycs},
        })
        made += 1


def cocycles():
    # constant matrices on a 3-state cycle with uniform measure
    consts = {
        "diag": [[2.0, 0.0], [0.0, 0.5]],
        "nonnormal": [[1.0, 3.0], [0.0, 0.5]],
        "rotation_scaled": [[0.0, -1.5], [1.5, 0.0]],
        "jordan": [[1.2, 1.0], [0.0, 1.2]],
    }
    third = 1.0 / 3.0
    for name, m in consts.items():
        rho = max(abs(np.linalg.eigvals(np.array(m))))
        save(f"cocycles/const_{name}.json", {
            "n_states": 3, "map": [1, 2, 0], "measure": [[0, third], [1, third], [2, 1.0 - 2 * third]],
            "expected": {"L": math.log(rho), "oracle": "log spectral radius"},
        })
        save(f"cocycles/const_{name}.proc.json", {"kind": "cocycle", "matrices": [m, m, m]})
    a0 = [[2.0, 1.0], [0.0, 0.5]]
    a1 = [[0.5, 0.0], [1.0, 1.5]]
    rho = max(abs(np.linalg.eigvals(np.array(a1) @ np.array(a0))))
    save("cocycles/alternating.json", {
        "n_states": 2, "map": [1, 0], "measure": [[0, 0.5], [1, 0.5]],
        "expected": {"L": 0.5 * math.log(rho), "oracle": "(1/2) log rho(A1 A0)"},
    })
    save("cocycles/alternating.proc.json", {"kind": "cocycle", "matrices": [a0, a1]})
    # a singular direction: state 1 kills the second coordinate
    mats = [[[1.0, 1.0], [0.0, 2.0]], [[1.0, 0.0], [0.0, 0.0]], [[0.5, 0.2], [0.1, 0.3]], [[1.1, 0.0], [0.0, 0.9]]]
    save("cocycles/singular4.json", {"n_states": 4, "map": [1, 2, 3, 0],
                                     "measure": [[0, 0.25], [1, 0.25], [2, 0.25], [3, 0.25]]})
    save("cocycles/singular4.proc.json", {"kind": "cocycle", "matrices": mats})
    # a nilpotent cycle product: phi_- = -inf
    save("cocycles/nilpotent.json", {"n_states": 2, "map": [1, 0], "measure": [[0, 0.5], [1, 0.5]],
                                     "expected": {"L": -math.inf}})
    save("cocycles/nilpotent.proc.json", {"kind": "cocycle",
                                          "matrices": [[[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]]})


def counterexamples():
    common = "mu is not invariant"
    save("counterexamples/swap.json", {
        "n_states": 2, "map": [1, 0], "observables": {"phi": [0.0, 1.0]}, "measure": [[0, 1.0]],
        "expected": {"L": 0.5, "R_1": 0.0, "condition_a": True, "condition_b": True, "condition_c": False,
                     "limit_equality": True, "inf_equality": False},
        "note": f"{common}; (a) and (b) hold, yet R_1 = 0 < L = 1/2",
    })
    save("counterexamples/collapse.json", {
        "n_states": 2, "map": [1, 1], "observables": {"phi": [0.0, 1.0]}, "measure": [[0, 1.0]],
        "expected": {"L": 1.0, "R_1": 0.0, "condition_a": True, "condition_b": True, "condition_c": True,
                     "limit_equality": True, "inf_equality": False},
        "note": f"{common}; E_1 is the whole space so (b) and (c) hold vacuously, yet R_1 = 0 < L = 1",
    })
    phi = [-0.141, 1.066, 0.157]
    measure = [[0, 0.2615886464039743], [1, 0.4401074032267232], [2, 0.2983039503693026]]
    r1 = math.fsum(w * phi[s] for s, w in measure)
    save("counterexamples/c_holds.json", {
        "n_states": 3, "map": [2, 1, 1], "observables": {"phi": phi}, "measure": measure,
        "expected": {"L": 1.066, "R_1": r1, "condition_a": True, "condition_b": True, "condition_c": True,
                     "limit_equality": True, "inf_equality": False},
        "note": f"{common}; found by the seeded random search, (b) and (c) hold, R_n increases to L",
    })


def discrete_misc():
    third = 1.0 / 3.0
    save("three_cycle.json", {
        "n_states": 3, "map": [1, 2, 0], "observables": {"ind0": [1.0, 0.0, 0.0]},
        "measure": [[0, third], [1, third], [2, 1.0 - 2 * third]],
        "expected": {"L": third},
    })
    save("three_cycle.proc.json", {"kind": "additive", "observable": "ind0"})
    # eventually periodic orbits with tails, for the single-orbit Birkhoff limits
    save("tails.json", {
        "n_states": 8, "map": [1, 2, 3, 1, 5, 6, 4, 7],
        "observables": {"phi": [5.0, -1.0, 0.25, 2.0, 0.5, -0.75, 1.5, 3.0],
                        "bounded": [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.5]},
        "measure": [[0, 0.5], [4, 0.25], [7, 0.25]],
    })
    # half-invariant but not invariant: mu(f^-1 B) <= mu(B) fails somewhere, used for (c) tests
    save("half_invariant.json", {
        "n_states": 4, "map": [1, 2, 2, 0], "observables": {"phi": [0.0, 1.0, 0.5, -1.0]},
        "measure": [[0, 0.25], [1, 0.25], [2, 0.25], [3, 0.25]],
    })


def flows():
    save("fields/rotation_coeffs.json", {"variables": ["x", "y"], "rhs": ["-y", "x"]})
    save("fields/damped.json", {"variables": ["x", "y"], "rhs": ["y", "-x - 0.5*y"]})
    (OUT / "observables").mkdir(parents=True, exist_ok=True)
    (OUT / "observables" / "x_minus_y.expr").write_text("x - y\n")
    save("observables/eye_sym.json", {"name": "eye-symmetric-file", "expr": "(x**2 - 1)**2 + y**2"})


def hybrid_regression():
    from ergolab.bowen import HybridDwellModel, SaddleData, hybrid_averages

    A = SaddleData((-1.0, 0.0), 2.0, 3.0)
    B = SaddleData((1.0, 0.0), 1.5, 2.5)
    model = HybridDwellModel(A, B, 1e-3, (0.2, 0.9), (0.7, 1.3), constants=(0.4, 0.1))
    tr = hybrid_averages(model, 400)
    save("hybrid_regression.json", {
        "model": {"A": [2.0, 3.0], "B": [1.5, 2.5], "initial_gap": 1e-3, "values": [0.2, 0.9],
                  "transit": [0.7, 1.3], "constants": [0.4, 0.1], "epochs": 400},
        "frozen": {"liminf_est": tr.liminf_est, "limsup_est": tr.limsup_est},
        "note": "recorded from the library; guards against silent changes to the rescaled recurrence",
    })


def main():
    rng = np.random.default_rng(2024)
    invariant_systems(rng)
    cocycles()
    counterexamples()
    discrete_misc()
    flows()
    hybrid_regression()
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
