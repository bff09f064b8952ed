"""Oracle suites shared by the CLI ``validate`` command and the scripts.

Each suite returns a list of check records
{name, analytic, empirical, tolerance, pass}; reports carry no timings so
that a fixed seed reproduces them byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .conditional import FailureObservation, condition
from .covariance import NetworkModel, steady_state_covariance
from .graph import GraphSpec, Topology
from .montecarlo import (
    SimConfig,
    compare_covariance,
    gaussian_conditional_check,
    simulate_trajectories,
    tail_probability_check,
)
from .risk import RiskParams, bound_validation_sweep, range_bounded_tail

SUITES = ("covariance", "conditional", "tails", "bounds")
EDGE_PROB_RANGE = (0.2, 0.8)


@dataclass(frozen=True)
class Budget:
    """Sample sizes and horizons for the Monte-Carlo suites."""

    horizon: float = 2000.0
    burn_in: float = 100.0
    trajectories: int = 8
    delay_steps: int = 50
    conditional_samples: int = 4_000_000
    tail_samples: int = 10_000_000
    graphs: int = 1000
    threads: int | None = None


def _check(name: str, analytic: Any, empirical: Any, tolerance: Any, ok: bool, **extra) -> dict[str, Any]:
    return {"name": name, "analytic": analytic, "empirical": empirical, "tolerance": tolerance, "pass": bool(ok), **extra}


def covariance_suite(n: int, tau: float, b: float, seed: int, budget: Budget) -> list[dict[str, Any]]:
    """Euler-Maruyama covariance against the spectral formula on complete and path graphs."""
    checks = []
    for top in (Topology.COMPLETE, Topology.PATH):
        model = NetworkModel.build(GraphSpec(n, top), tau, b)
        cfg = SimConfig(
            dt=tau / budget.delay_steps,
            horizon=budget.horizon,
            burn_in=budget.burn_in,
            trajectories=budget.trajectories,
            seed=seed,
            threads=budget.threads,
        )
        emp = simulate_trajectories(model, cfg)
        report = compare_covariance(steady_state_covariance(model), emp)
        checks.append(
            _check(
                f"covariance/{top.value}/n={n}",
                report["analytic"],
                report["empirical"],
                report["tolerance"],
                report["pass"],
                rel_err=report["rel_err"],
                stderr=np.asarray(emp.stderr).tolist(),
                failing_entries=report["failing_entries"],
            )
        )
        drift_ok = bool(np.all(np.abs(emp.drift) <= 3 * emp.drift_stderr))
        checks.append(
            _check(f"average-drift/{top.value}/n={n}", 0.0, emp.drift.tolist(), 3 * emp.drift_stderr, drift_ok)
        )
    return checks


def _within(a: float, e: float, se: float, k: float = 3.0) -> bool:
    return abs(a - e) <= k * se


def conditional_suite(
    n: int, tau: float, b: float, seed: int, budget: Budget, counts: tuple[int, ...] = (1, 3, 7)
) -> list[dict[str, Any]]:
    """Window-conditioned sampling against the Gaussian conditioning formula.

    Failures sit at agents 0..m-1 with values one marginal standard
    deviation, inside windows of one standard deviation, so that enough
    draws are retained at every m.
    """
    checks = []
    for top in (Topology.COMPLETE, Topology.STAR):
        model = NetworkModel.build(GraphSpec(n, top), tau, b)
        sigma = steady_state_covariance(model).sigma
        sd = np.sqrt(np.diag(sigma))
        for m in counts:
            idx = tuple(range(m))
            obs = FailureObservation(idx, tuple(float(sd[i]) for i in idx))
            targets = [m] if top is Topology.COMPLETE else [m, n - 1]
            for j in targets:
                law = condition(sigma, obs, j)
                est = gaussian_conditional_check(
                    sigma, obs, j, budget.conditional_samples, sd[list(idx)], seed + 7919 * m + j
                )
                tag = f"conditional/{top.value}/m={m}/j={j}"
                checks.append(
                    _check(f"{tag}/mean", law.mu_tilde, est.mu_hat, 3 * est.mu_stderr, _within(law.mu_tilde, est.mu_hat, est.mu_stderr), accepted=est.accepted)
                )
                checks.append(
                    _check(
                        f"{tag}/variance",
                        law.sigma_tilde_sq,
                        est.sigma_sq_hat,
                        3 * est.sigma_sq_stderr,
                        _within(law.sigma_tilde_sq, est.sigma_sq_hat, est.sigma_sq_stderr),
                        accepted=est.accepted,
                    )
                )
    return checks


TAIL_DELTAS = (0.0, 10.0, 100.0, 300.0, 1000.0)
TAIL_Z = (0.1, 0.5, 1.0, 1.5, 2.5)
TAIL_RHOS = (-0.5, 0.0, 0.5)


def tails_suite(params: RiskParams, seed: int, budget: Budget) -> list[dict[str, Any]]:
    """Quadrature exceedance against rejection sampling on a (delta*, z) grid, unit variances."""
    checks = []
    for r_i, rho in enumerate(TAIL_RHOS):
        sigma = np.array([[1.0, rho], [rho, 1.0]])
        for d_i, delta in enumerate(TAIL_DELTAS):
            tail = range_bounded_tail(sigma, 0, delta, 1, params)
            mc = tail_probability_check(
                sigma, 0, 1, delta, TAIL_Z, params, budget.tail_samples, seed + 100 * r_i + d_i
            )
            for z, p, se in zip(TAIL_Z, mc.p_hat, mc.stderr):
                q = tail.exceedance(z)
                checks.append(
                    _check(f"tail/rho={rho}/delta={delta}/z={z}", q, float(p), 3 * float(se), _within(q, p, se))
                )
    return checks


def bounds_suite(n: int, tau: float, b: float, y_f: float, params: RiskParams, seed: int, budget: Budget) -> list[dict[str, Any]]:
    rep = bound_validation_sweep(budget.graphs, n, EDGE_PROB_RANGE, params, tau, b, y_f, seed, threads=budget.threads)
    zero = rep.sign_histogram["zero"]
    return [
        _check("bounds/violations", 0, rep.violations, 0, rep.violations == 0, pairs_checked=rep.pairs_checked),
        _check("bounds/zero-covariances", 0, zero, 0, zero == 0, sign_histogram=rep.sign_histogram),
        _check("bounds/domain", 0, rep.domain_violations, 0, rep.domain_violations == 0),
    ]


def summarize(checks: list[dict[str, Any]]) -> dict[str, Any]:
    failed = [c["name"] for c in checks if not c["pass"]]
    return {"checks": checks, "total": len(checks), "failed": failed, "pass": not failed}
