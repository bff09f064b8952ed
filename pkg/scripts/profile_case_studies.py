"""Risk profiles for the complete, star and path graphs under a single failure.

    python3 scripts/profile_case_studies.py --n 20 --failed 9
"""

import argparse

from cascade_risk import (
    FailureObservation,
    GraphSpec,
    NetworkModel,
    RiskParams,
    Topology,
    cascading_risk_profile,
    steady_state_covariance,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--tau", type=float, default=0.05)
    ap.add_argument("--b", type=float, default=0.01)
    ap.add_argument("--y-f", type=float, default=4.0)
    ap.add_argument("--failed", type=int, default=None, help="failed agent (default: middle of the path, a leaf of the star)")
    args = ap.parse_args()
    params = RiskParams()
    for top in (Topology.COMPLETE, Topology.STAR, Topology.PATH):
        failed = args.failed if args.failed is not None else (args.n // 2 - 1 if top is Topology.PATH else 0)
        sigma = steady_state_covariance(NetworkModel.build(GraphSpec(args.n, top), args.tau, args.b))
        prof = cascading_risk_profile(sigma, FailureObservation((failed,), (args.y_f,)), params)
        print(f"\n{top.value} (failed agent {failed})")
        print(f"{'agent':>5} {'VaR':>12} {'AVaR':>12} {'level':>10}")
        for r in prof.records():
            if r["branch"] == "observed":
                continue
            level = r["level"] if isinstance(r["level"], str) else f"{r['level']:.4f}"
            print(f"{r['agent']:>5} {r['var']:>12.5g} {r['avar']:>12.5g} {level:>10}")


if __name__ == "__main__":
    main()
