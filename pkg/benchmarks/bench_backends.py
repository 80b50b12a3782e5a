"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_backends.py [--paths 2000] [--repeat 3]

Reports the theta' sampling kernel (per call) and a full ensemble run
(per path) for each available backend, and checks that both backends
return identical ensembles.
"""
import argparse
import math
import timeit

import numpy as np

from spinquant import _backend
from spinquant.engine import simulate_ensemble
from spinquant.rates import build_rate_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    tau_c = 40 * math.pi
    table = build_rate_table(tau_c)
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, math.pi, args.samples)
    tau_f = rng.uniform(1.0, 2 * tau_c, args.samples)
    u = rng.random(args.samples)

    results = {}
    for name in _backend.available():
        t_kernel = min(timeit.repeat(
            lambda: _backend.sample_theta_prime_batch(name, theta, tau_f, table, u),
            number=1, repeat=args.repeat)) / args.samples
        batches = []
        t_run = min(timeit.repeat(
            lambda: batches.append(simulate_ensemble(args.paths, table, 2 * tau_c, 1234, backend=name)),
            number=1, repeat=args.repeat)) / args.paths
        results[name] = (t_kernel, t_run, batches[-1])
        print(f"{name:>7}: theta' kernel {t_kernel * 1e6:8.2f} us/sample   "
              f"ensemble {t_run * 1e3:8.3f} ms/path")

    if len(results) == 2:
        (kn, rn, bn), (kp, rp, bp) = results["native"], results["python"]
        same = all(np.array_equal(getattr(bn, f), getattr(bp, f))
                   for f in ("offsets", "ev_tau", "ev_theta_after", "ev_phi_after"))
        print(f"speedup: kernel x{kp / kn:.1f}, ensemble x{rp / rn:.1f}; identical ensembles: {same}")


if __name__ == "__main__":
    main()
