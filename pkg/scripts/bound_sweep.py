"""Best-achievable bound against random Erdos-Renyi graphs.

    python3 scripts/bound_sweep.py --graphs 1000 --c 2 --alpha 1e4 --threads 4
"""

import argparse
import json

from cascade_risk import RiskParams, bound_validation_sweep
from cascade_risk.validation import EDGE_PROB_RANGE


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", type=int, default=1000)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--tau", type=float, default=0.05)
    ap.add_argument("--b", type=float, default=0.01)
    ap.add_argument("--y-f", type=float, default=4.0)
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--alpha", type=float, default=1e4)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    params = RiskParams(args.c, args.alpha, args.epsilon)
    rep = bound_validation_sweep(
        args.graphs, args.n, EDGE_PROB_RANGE, params, args.tau, args.b, args.y_f, args.seed, threads=args.threads
    )
    print(json.dumps(rep.to_dict(), indent=2))


if __name__ == "__main__":
    main()
