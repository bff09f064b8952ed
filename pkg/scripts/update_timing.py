"""Wall time of one incremental update versus a full recompute as m grows.

Prints a table and the log-log slope of each curve in m.

    python3 scripts/update_timing.py --n 500 --m 10 25 50 100 200 400
"""

import argparse
import copy
import math
import statistics
import time

import numpy as np

from cascade_risk import (
    FailureObservation,
    NetworkModel,
    init_state,
    random_connected_graph,
    steady_state_covariance,
)


def median_time(fn, reps):
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--m", type=int, nargs="+", default=[10, 25, 50, 100, 200, 400])
    ap.add_argument("--reps", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = random_connected_graph(args.n, 0.05, args.seed)
    lam_max = NetworkModel.build(spec, 0.0, 1.0).spectrum.lambda_max
    sigma = steady_state_covariance(NetworkModel.build(spec, 0.25 * math.pi / lam_max, 0.01)).sigma
    rng = np.random.default_rng(args.seed)
    order = [int(a) for a in rng.permutation(args.n)]
    values = [float(v) for v in rng.normal(0, 3, args.n) * np.sqrt(np.diag(sigma))[order]]

    rows = []
    print(f"{'m':>5} {'update ms':>11} {'recompute ms':>13} {'ratio':>7}")
    for m in args.m:
        base = init_state(sigma, FailureObservation(tuple(order[: m - 1]), tuple(values[: m - 1])))
        full = FailureObservation(tuple(order[:m]), tuple(values[:m]))

        def one_update(base=base, m=m):
            st = copy.copy(base)
            st.indices, st.values = list(base.indices), list(base.values)
            st.update(order[m - 1], values[m - 1])

        t_u = median_time(one_update, args.reps)
        t_f = median_time(lambda full=full: init_state(sigma, full), args.reps)
        rows.append((m, t_u, t_f))
        print(f"{m:>5} {t_u * 1e3:>11.3f} {t_f * 1e3:>13.3f} {t_u / t_f:>7.3f}")

    ms = np.log([r[0] for r in rows])
    for label, col in (("update", 1), ("recompute", 2)):
        slope = np.polyfit(ms, np.log([r[col] for r in rows]), 1)[0]
        print(f"fitted exponent in m, {label}: {slope:.2f}")


if __name__ == "__main__":
    main()
