"""Time the compiled and pure-Python integrator kernels on the Bowen eye.

    python3 benchmarks/bench_kernels.py [--tmax 1e5] [--repeat 3]

Both kernels run the same run_bowen_experiment call; the script also checks
that they agree on the final running average.
"""
import argparse
import statistics
import time

from ergolab.bowen import run_bowen_experiment
from ergolab.flow import backend as bk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tmax", type=float, default=1e5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--observable", default="x")
    args = ap.parse_args()

    results = {}
    for name in bk.AVAILABLE:
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            rep, _ = run_bowen_experiment(args.observable, (0.0, 0.5), args.tmax, backend=name)
            times.append(time.perf_counter() - t0)
        results[name] = (statistics.median(times), rep["final_average"], rep["classification"])
        print(f"{name:>7}: median {results[name][0]:.3f}s over {args.repeat} runs, "
              f"final average {rep['final_average']:.12g}, {rep['classification']}")

    if len(results) == 2:
        (tc, ac, _), (tp, ap_, _) = results["cython"], results["python"]
        print(f"speedup: {tp / tc:.2f}x, |difference in final average| = {abs(ac - ap_):.2e}")
    else:
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
