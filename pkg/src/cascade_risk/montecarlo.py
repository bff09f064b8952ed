"""Sampling oracles: a delayed-SDE integrator and direct Gaussian samplers.

The integrator discretizes dx = -L x(t - tau) dt + b dw with
Euler-Maruyama on a grid dt = tau / K.  Because the delayed states of the
next K steps are already known, K steps are advanced at once with a
cumulative sum, which keeps the per-step Python overhead out of the loop.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .conditional import FailureObservation
from .covariance import NetworkModel, SteadyStateCovariance
from .errors import EmptyConditioningSet, InsufficientSamples, NumericalBlowup
from .risk import RiskParams

MIN_DELAY_STEPS = 20
BLOWUP_FACTOR = 1e6
# trajectories are vectorized in fixed-size groups; BLAS rounding depends on
# the batch shape, so the grouping must not follow the thread count
GROUP_SIZE = 4


class InitialKind(str, Enum):
    ZEROS = "zeros"
    CONSTANT = "constant"
    SUPPLIED = "supplied"


@dataclass(frozen=True)
class InitialCondition:
    """Constant-in-time initial function on [-tau, 0]."""

    kind: InitialKind = InitialKind.ZEROS
    value: float | tuple[float, ...] = 0.0

    def vector(self, n: int) -> np.ndarray:
        kind = InitialKind(self.kind)
        if kind is InitialKind.ZEROS:
            return np.zeros(n)
        if kind is InitialKind.CONSTANT:
            return np.full(n, float(self.value))
        v = np.asarray(self.value, dtype=float)
        if v.shape != (n,):
            raise ValueError(f"supplied initial state has shape {v.shape}, expected ({n},)")
        return v


@dataclass(frozen=True)
class SimConfig:
    """Integrator settings.

    ``dt`` defaults to tau / 50 and must divide tau into at least 20 steps.
    ``stride`` (time between retained samples) defaults to 5 tau and is
    rounded up to a whole number of delay blocks.
    """

    dt: float | None = None
    horizon: float = 2000.0
    burn_in: float = 100.0
    trajectories: int = 8
    seed: int = 0
    initial: InitialCondition = field(default_factory=InitialCondition)
    stride: float | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError("need 0 <= burn_in < horizon")
        if self.trajectories < 1:
            raise ValueError("trajectories must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    def grid(self, tau: float) -> tuple[float, int]:
        """(dt, K) with dt = tau / K; K = 1 for an undelayed system."""
        if tau == 0:
            dt = self.dt if self.dt is not None else 1e-3
            return dt, 1
        if self.dt is None:
            return tau / 50, 50
        k = round(tau / self.dt)
        if k < MIN_DELAY_STEPS or abs(k * self.dt - tau) > 1e-9 * tau:
            raise ValueError(f"dt={self.dt} must divide tau={tau} into at least {MIN_DELAY_STEPS} steps")
        return tau / k, k


@dataclass(frozen=True, eq=False)
class EmpiricalCovariance:
    """Pooled second moment of y = M_n x after burn-in.

    ``stderr`` is the entrywise spread of the per-trajectory estimates
    divided by sqrt(trajectories), so it absorbs the autocorrelation of
    retained samples.  ``stderr_scale`` = sqrt(2 / samples) is the nominal
    relative error of a variance from that many independent draws.
    """

    sigma_hat: np.ndarray
    samples: int
    stderr_scale: float
    stderr: np.ndarray
    trajectories: int
    drift: np.ndarray
    drift_stderr: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "sigma_hat": self.sigma_hat.tolist(),
            "samples": self.samples,
            "stderr_scale": self.stderr_scale,
            "stderr": self.stderr.tolist(),
            "trajectories": self.trajectories,
            "drift": self.drift.tolist(),
            "drift_stderr": self.drift_stderr,
        }


def _tree_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise sum in a fixed order, independent of how work was split."""
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


@dataclass
class _TrajectoryStats:
    moment: np.ndarray  # (T, n, n) sums of y y^T
    count: int
    start_avg: np.ndarray
    end_avg: np.ndarray


def _run_group(
    L: np.ndarray, tau: float, b: float, cfg: SimConfig, seqs: Sequence[np.random.SeedSequence], limit: float
) -> _TrajectoryStats:
    n = L.shape[0]
    dt, k = cfg.grid(tau)
    rngs = [np.random.default_rng(s) for s in seqs]
    t = len(rngs)
    x0 = cfg.initial.vector(n)
    x = np.tile(x0, (t, 1))
    delayed = np.broadcast_to(x, (k, t, n)).copy()
    burn_blocks = math.ceil(cfg.burn_in / (k * dt) - 1e-9)
    total_blocks = math.ceil(cfg.horizon / (k * dt) - 1e-9)
    stride = 5 * tau if cfg.stride is None else cfg.stride
    stride_blocks = max(1, math.ceil(stride / (k * dt) - 1e-9))
    noise_scale = b * math.sqrt(dt)
    LT = L.T
    moment = np.zeros((t, n, n))
    count = 0
    chunk = max(1, 4096 // k)

    block = 0
    while block < total_blocks:
        nb = min(chunk, total_blocks - block)
        noise = np.stack([r.standard_normal((nb * k, n)) for r in rngs], axis=1)
        noise *= noise_scale
        for c in range(nb):
            inc = noise[c * k : (c + 1) * k]
            if tau > 0:
                inc = inc - dt * (delayed @ LT)
                new = x + np.cumsum(inc, axis=0)
                delayed = np.concatenate([x[None], new[:-1]], axis=0)
                x = new[-1]
            else:
                x = x - dt * (x @ LT) + inc[0]
            block += 1
            if not np.all(np.abs(x) <= limit):
                raise NumericalBlowup(
                    f"|x| exceeded {limit:.3g} at t={block * k * dt:.6g}; the delay or step is unstable"
                )
            if block >= burn_blocks and (block - burn_blocks) % stride_blocks == 0:
                y = x - x.mean(axis=1, keepdims=True)
                moment += y[:, :, None] * y[:, None, :]
                count += 1
    return _TrajectoryStats(moment, count, np.full(t, x0.mean()), x.mean(axis=1))


def integrate_delayed_sde(L: np.ndarray, tau: float, b: float, cfg: SimConfig) -> EmpiricalCovariance:
    """Simulate ``cfg.trajectories`` paths of the delayed SDE with Laplacian L.

    Does not check the delay-stability condition, so it can be used to
    observe divergence.  Each trajectory owns a substream spawned from
    ``cfg.seed``; results do not depend on ``cfg.threads``.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    cfg.grid(tau)
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.trajectories)
    x0 = cfg.initial.vector(n)
    limit = BLOWUP_FACTOR * max(b * math.sqrt(cfg.horizon), float(np.abs(x0).max(initial=0.0)))
    groups = [list(range(i, min(i + GROUP_SIZE, cfg.trajectories))) for i in range(0, cfg.trajectories, GROUP_SIZE)]
    workers = max(1, min(cfg.threads or 1, len(groups)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        stats = list(pool.map(lambda g: _run_group(L, tau, b, cfg, [seqs[i] for i in g], limit), groups))
    count = stats[0].count
    if count == 0:
        raise InsufficientSamples("no samples retained after burn-in; raise the horizon")
    per_traj = [m for s in stats for m in s.moment]
    total = _tree_sum(per_traj)
    t = cfg.trajectories
    sigma_hat = total / (count * t)
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    estimates = np.stack(per_traj) / count
    stderr = estimates.std(axis=0, ddof=1) / math.sqrt(t) if t > 1 else np.full((n, n), np.nan)
    drift = np.concatenate([s.end_avg - s.start_avg for s in stats])
    return EmpiricalCovariance(
        sigma_hat=sigma_hat,
        samples=count * t,
        stderr_scale=math.sqrt(2.0 / (count * t)),
        stderr=stderr,
        trajectories=t,
        drift=drift,
        drift_stderr=b * math.sqrt(cfg.horizon / n),
    )


def simulate_trajectories(model: NetworkModel, cfg: SimConfig) -> EmpiricalCovariance:
    return integrate_delayed_sde(model.laplacian, model.tau, model.b, cfg)


def compare_covariance(
    analytic: SteadyStateCovariance | np.ndarray,
    empirical: EmpiricalCovariance,
    diag_rtol: float = 0.05,
    offdiag_rtol: float = 0.10,
) -> dict[str, Any]:
    """Entrywise relative-error report {analytic, empirical, rel_err, tolerance, pass}."""
    a = analytic.sigma if isinstance(analytic, SteadyStateCovariance) else np.asarray(analytic)
    e = empirical.sigma_hat
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(e - a) / np.abs(a)
    tol = np.full(a.shape, offdiag_rtol)
    np.fill_diagonal(tol, diag_rtol)
    ok = rel <= tol
    return {
        "analytic": a.tolist(),
        "empirical": e.tolist(),
        "rel_err": rel.tolist(),
        "tolerance": tol.tolist(),
        "pass": bool(ok.all()),
        "failing_entries": [[int(i), int(j)] for i, j in zip(*np.nonzero(~ok)) if i <= j],
    }


@dataclass(frozen=True)
class ConditionalCheck:
    mu_hat: float
    sigma_sq_hat: float
    mu_stderr: float
    sigma_sq_stderr: float
    accepted: int

    @property
    def stderr(self) -> tuple[float, float]:
        return self.mu_stderr, self.sigma_sq_stderr


def _marginal_sampler(cov: np.ndarray, rng: np.random.Generator):
    chol = np.linalg.cholesky(cov)

    def draw(size: int) -> np.ndarray:
        return rng.standard_normal((size, len(cov))) @ chol.T

    return draw


def gaussian_conditional_check(
    sigma: SteadyStateCovariance | np.ndarray,
    obs: FailureObservation,
    j: int,
    samples: int,
    window_h: float | Sequence[float],
    seed: int,
    method: str = "regression",
    min_accepted: int = 1000,
    chunk: int = 1_000_000,
) -> ConditionalCheck:
    """Estimate the law of y_j given y_I = y_f from N(0, Sigma) draws with |y_I - y_f| < h.

    ``method="mean"`` reports the plain window mean and variance, whose
    bias shrinks like h^2.  ``method="regression"`` fits y_j ~ 1 + (y_I - y_f)
    inside the window; since y_j given y_I is exactly linear-Gaussian the
    intercept and residual variance are unbiased for any h.
    """
    if method not in ("regression", "mean"):
        raise ValueError(f"unknown method {method!r}")
    s = sigma.sigma if isinstance(sigma, SteadyStateCovariance) else np.asarray(sigma, dtype=float)
    idx = list(obs.indices) + [j]
    m = obs.m
    h = np.broadcast_to(np.asarray(window_h, dtype=float), (m,))
    if np.any(h <= 0):
        raise ValueError("window_h must be positive")
    y_f = np.asarray(obs.values)
    draw = _marginal_sampler(s[np.ix_(idx, idx)], np.random.default_rng(seed))
    kept = []
    remaining = samples
    while remaining > 0:
        z = draw(min(chunk, remaining))
        remaining -= len(z)
        d = z[:, :m] - y_f
        mask = np.all(np.abs(d) < h, axis=1)
        kept.append(np.column_stack([d[mask], z[mask, m]]))
    data = np.concatenate(kept)
    n_acc = len(data)
    if n_acc < min_accepted:
        raise InsufficientSamples(f"only {n_acc} draws fell in the window (need {min_accepted})")
    target = data[:, -1]
    if method == "mean" or m == 0:
        mu = float(target.mean())
        var = float(target.var(ddof=1))
        return ConditionalCheck(mu, var, math.sqrt(var / n_acc), var * math.sqrt(2.0 / (n_acc - 1)), n_acc)
    X = np.column_stack([np.ones(n_acc), data[:, :m]])
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ coef
    dof = n_acc - m - 1
    var = float(resid @ resid / dof)
    xtx_inv = np.linalg.inv(X.T @ X)
    return ConditionalCheck(
        float(coef[0]), var, math.sqrt(var * xtx_inv[0, 0]), var * math.sqrt(2.0 / dof), n_acc
    )


@dataclass(frozen=True)
class TailCheck:
    p_hat: np.ndarray
    stderr: np.ndarray
    accepted: int
    threshold: float


def tail_probability_check(
    sigma: SteadyStateCovariance | np.ndarray,
    i: int,
    j: int,
    delta_star: float,
    z: float | Sequence[float],
    params: RiskParams,
    samples: int,
    seed: int,
    chunk: int = 2_000_000,
) -> TailCheck:
    """Empirical P(|y_j| > z | |y_i| > u(delta*)) by rejection sampling, with binomial stderr."""
    if samples < 100_000:
        raise ValueError("tail checks need at least 1e5 samples")
    s = sigma.sigma if isinstance(sigma, SteadyStateCovariance) else np.asarray(sigma, dtype=float)
    u = params.threshold(delta_star)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    draw = _marginal_sampler(s[np.ix_([i, j], [i, j])], np.random.default_rng(seed))
    hits = np.zeros(len(zs), dtype=np.int64)
    n_acc = 0
    remaining = samples
    while remaining > 0:
        pair = draw(min(chunk, remaining))
        remaining -= len(pair)
        yj = np.abs(pair[np.abs(pair[:, 0]) > u, 1])
        n_acc += len(yj)
        hits += (yj[:, None] > zs[None, :]).sum(axis=0)
    if n_acc == 0:
        raise EmptyConditioningSet(f"no draw satisfied |y_i| > {u:.4g}")
    p = hits / n_acc
    p[zs <= 0] = 1.0
    return TailCheck(p, np.sqrt(p * (1 - p) / n_acc), n_acc, u)
