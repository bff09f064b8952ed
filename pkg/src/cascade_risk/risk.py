"""Tail risk of cascading large fluctuations.

All tail quantities are evaluated for |y| of a Gaussian y (the folded
normal).  The risk level maps an AV@R value onto the level-set family
U_delta = (c (delta + 1) / (delta + alpha), inf): it is the deepest delta
whose alarm zone still contains the AV@R.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from typing import Any

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import erfinv, log_ndtr

from .conditional import ConditioningState, FailureObservation, init_state
from .covariance import (
    S_BAR,
    NetworkModel,
    SteadyStateCovariance,
    f_extrema,
    steady_state_covariance,
)
from .errors import DegenerateCorrelation, InvalidSign, QuadratureFailure
from .graph import _derived_seed, random_connected_graph

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# case-study defaults
DEFAULT_C = 4.0
DEFAULT_ALPHA = 1000.0
DEFAULT_EPSILON = 0.1


@dataclass(frozen=True)
class RiskParams:
    c: float = DEFAULT_C
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def threshold(self, delta: float) -> float:
        """Left end c (delta + 1) / (delta + alpha) of the alarm zone U_delta."""
        return self.c * (delta + 1.0) / (delta + self.alpha)


class Branch(str, Enum):
    ZERO = "zero"
    FINITE = "finite"
    INFINITE = "infinite"


@total_ordering
@dataclass(frozen=True)
class RiskLevel:
    """Extended-real risk level: Zero, Finite(value) or Infinite."""

    branch: Branch
    finite_value: float = 0.0

    @property
    def value(self) -> float:
        if self.branch is Branch.INFINITE:
            return math.inf
        return self.finite_value if self.branch is Branch.FINITE else 0.0

    def __lt__(self, other: RiskLevel) -> bool:
        return self.value < other.value

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RiskLevel):
            return NotImplemented
        return self.value == other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def to_json_value(self) -> float | str:
        return "inf" if self.branch is Branch.INFINITE else self.value

    @classmethod
    def zero(cls) -> RiskLevel:
        return cls(Branch.ZERO)


def risk_level(frak_a: float, params: RiskParams) -> RiskLevel:
    """Three-branch map of an AV@R value onto the level-set index."""
    c, alpha = params.c, params.alpha
    if frak_a <= c / alpha:
        return RiskLevel(Branch.ZERO)
    if frak_a >= c:
        return RiskLevel(Branch.INFINITE)
    return RiskLevel(Branch.FINITE, (alpha * frak_a - c) / (c - frak_a))


def folded_tail(z: float, mu: float, sigma: float) -> float:
    """P(|Y| > z) for Y ~ N(mu, sigma^2), z >= 0."""
    return 0.5 * (math.erfc((z - mu) / (SQRT2 * sigma)) + math.erfc((z + mu) / (SQRT2 * sigma)))


def folded_var(mu_tilde: float, sigma_tilde: float, epsilon: float) -> float:
    """V@R of |Y|: the gamma >= 0 with erf((g-mu)/(s sqrt2)) + erf((g+mu)/(s sqrt2)) = 2(1-eps).

    The left side is strictly increasing in gamma, so Brent's method on
    an expanding bracket finds the unique root.
    """
    if not sigma_tilde > 0:
        raise ValueError("sigma_tilde must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")

    def excess(g):
        return folded_tail(g, mu_tilde, sigma_tilde) - epsilon

    hi = abs(mu_tilde) + 10.0 * sigma_tilde
    while excess(hi) > 0:
        hi *= 2.0
    if excess(0.0) <= 0:
        return 0.0
    return brentq(excess, 0.0, hi, xtol=1e-14 * sigma_tilde, rtol=4 * np.finfo(float).eps, maxiter=200)


def _erf_diff(a: float, b: float) -> float:
    """erf(a) - erf(b), accurate when both arguments are large and positive."""
    if a > 0 and b > 0:
        return math.erfc(b) - math.erfc(a)
    return math.erf(a) - math.erf(b)


def folded_avar(mu_tilde: float, sigma_tilde: float, epsilon: float, gamma: float | None = None) -> float:
    """AV@R of |Y|, Y ~ N(mu, sigma^2): E[|Y| | |Y| > V@R]."""
    if gamma is None:
        gamma = folded_var(mu_tilde, sigma_tilde, epsilon)
    a = (gamma + mu_tilde) / (SQRT2 * sigma_tilde)
    b = (gamma - mu_tilde) / (SQRT2 * sigma_tilde)
    return sigma_tilde / (SQRT2PI * epsilon) * (math.exp(-a * a) + math.exp(-b * b)) + mu_tilde / (
        2.0 * epsilon
    ) * _erf_diff(a, b)


@dataclass(frozen=True)
class RiskAssessment:
    var: float
    avar: float
    level: RiskLevel

    @property
    def branch(self) -> Branch:
        return self.level.branch


def assess(mu_tilde: float, sigma_tilde: float, params: RiskParams) -> RiskAssessment:
    """V@R, AV@R and risk level of |Y| for Y ~ N(mu, sigma^2)."""
    if sigma_tilde <= 0:
        # point mass: every tail quantity collapses onto |mu|
        v = abs(mu_tilde)
        return RiskAssessment(v, v, risk_level(v, params))
    gamma = folded_var(mu_tilde, sigma_tilde, params.epsilon)
    frak_a = folded_avar(mu_tilde, sigma_tilde, params.epsilon, gamma)
    return RiskAssessment(gamma, frak_a, risk_level(frak_a, params))


@dataclass(frozen=True)
class ProfileEntry:
    agent: int
    observed: bool
    assessment: RiskAssessment | None

    @property
    def level(self) -> RiskLevel:
        return RiskLevel.zero() if self.assessment is None else self.assessment.level


@dataclass(frozen=True)
class RiskProfile:
    """Per-agent risk; observed agents carry level 0 and no V@R/AV@R."""

    entries: tuple[ProfileEntry, ...]
    observation: FailureObservation = field(default_factory=FailureObservation)

    @property
    def levels(self) -> np.ndarray:
        return np.array([e.level.value for e in self.entries])

    def records(self) -> list[dict[str, Any]]:
        out = []
        for e in self.entries:
            a = e.assessment
            out.append(
                {
                    "agent": e.agent,
                    "var": 0.0 if a is None else a.var,
                    "avar": 0.0 if a is None else a.avar,
                    "level": e.level.to_json_value(),
                    "branch": "observed" if a is None else a.branch.value,
                }
            )
        return out

    def to_json(self) -> str:
        return json.dumps(self.records())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["agent", "var", "avar", "level", "branch"])
        for r in self.records():
            lvl = r["level"] if isinstance(r["level"], str) else format(r["level"], ".17g")
            w.writerow([r["agent"], format(r["var"], ".17g"), format(r["avar"], ".17g"), lvl, r["branch"]])
        return buf.getvalue()


def profile_from_state(state: ConditioningState, params: RiskParams) -> RiskProfile:
    observed = set(state.indices)
    entries = []
    for j in range(state.n):
        if j in observed:
            entries.append(ProfileEntry(j, True, None))
        else:
            s = math.sqrt(max(float(state.var[j]), 0.0))
            entries.append(ProfileEntry(j, False, assess(float(state.mean[j]), s, params)))
    return RiskProfile(tuple(entries), state.observation)


def cascading_risk_profile(
    sigma: SteadyStateCovariance | np.ndarray, obs: FailureObservation, params: RiskParams
) -> RiskProfile:
    """Risk level of every unobserved agent given exact observations ``obs``."""
    return profile_from_state(init_state(sigma, obs), params)


# Range-bounded information: only |y_i| in U_delta* is known.


def _standardized_density(s: float, a: float, rho: float, r: float, log_norm: float) -> float:
    """Density of y_j / sigma_j given |y_i| / sigma_i > a (symmetric in s)."""
    lq = np.logaddexp(log_ndtr(-(a - rho * s) / r), log_ndtr(-(a + rho * s) / r))
    return math.exp(-0.5 * s * s - 0.5 * math.log(2 * math.pi) + lq - log_norm)


@dataclass(frozen=True)
class RangeBoundedTail:
    """Conditional law of |y_j| given |y_i| > threshold, for one pair (i, j)."""

    sigma_i: float
    sigma_j: float
    rho: float
    threshold: float
    prob_tol: float = 1e-10
    avar_rtol: float = 1e-8

    def __post_init__(self):
        if abs(self.rho) >= 1 - 1e-12:
            raise DegenerateCorrelation(f"|rho| = {abs(self.rho)} is too close to 1")

    @property
    def _a(self) -> float:
        return self.threshold / self.sigma_i

    @property
    def _r(self) -> float:
        return math.sqrt(1.0 - self.rho**2)

    @property
    def _log_norm(self) -> float:
        # log P(|y_i| > threshold) = log(2 Q(a))
        return math.log(2.0) + float(log_ndtr(-self._a))

    def conditioning_probability(self) -> float:
        return math.exp(self._log_norm)

    def _upper(self) -> float:
        # beyond this the integrands are below 1e-30 of their mass
        return abs(self.rho) * (self._a + 12.0) + 12.0

    def _integrate(self, fn, lo: float, tol: float, relative: bool) -> float:
        hi = self._upper()
        if lo >= hi:
            return 0.0
        peak = abs(self.rho) * self._a
        pts = [p for p in (peak, peak + 1.0) if lo < p < hi]
        val, err, *_ = quad(fn, lo, hi, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=400, full_output=1)
        bound = tol * abs(val) if relative else tol
        if err > max(bound, 1e-15):
            raise QuadratureFailure(f"quadrature error {err:.3g} exceeds tolerance {bound:.3g}")
        return val

    def exceedance(self, z: float) -> float:
        """P(|y_j| > z | |y_i| > threshold)."""
        if z <= 0:
            return 1.0
        a, rho, r, ln = self._a, self.rho, self._r, self._log_norm
        half = self._integrate(lambda s: _standardized_density(s, a, rho, r, ln), z / self.sigma_j, self.prob_tol / 2, False)
        return min(1.0, 2.0 * half)

    def var(self, epsilon: float) -> float:
        hi = self.sigma_j * self._upper()
        return brentq(lambda z: self.exceedance(z) - epsilon, 0.0, hi, xtol=1e-13 * self.sigma_j, maxiter=200)

    def avar(self, epsilon: float, var: float | None = None) -> float:
        if var is None:
            var = self.var(epsilon)
        a, rho, r, ln = self._a, self.rho, self._r, self._log_norm
        first_moment = self._integrate(
            lambda s: s * _standardized_density(s, a, rho, r, ln), var / self.sigma_j, self.avar_rtol, True
        )
        return 2.0 * self.sigma_j * first_moment / epsilon


def range_bounded_tail(sigma: SteadyStateCovariance | np.ndarray, i: int, delta_star: float, j: int, params: RiskParams) -> RangeBoundedTail:
    s = sigma.sigma if isinstance(sigma, SteadyStateCovariance) else np.asarray(sigma)
    if delta_star < 0:
        raise ValueError("delta_star must be nonnegative")
    si, sj = math.sqrt(s[i, i]), math.sqrt(s[j, j])
    return RangeBoundedTail(si, sj, float(s[i, j] / (si * sj)), params.threshold(delta_star))


def range_bounded_risk(
    sigma: SteadyStateCovariance | np.ndarray, i: int, delta_star: float, j: int, params: RiskParams
) -> RiskAssessment:
    """Risk at agent j when agent i is only known to satisfy |y_i| in U_delta*."""
    tail = range_bounded_tail(sigma, i, delta_star, j, params)
    v = tail.var(params.epsilon)
    a = tail.avar(params.epsilon, v)
    return RiskAssessment(v, a, risk_level(a, params))


# Fundamental limits.


def iota(epsilon: float) -> float:
    return float(erfinv(2.0 * epsilon - 1.0))


def kappa(epsilon: float) -> float:
    """(sqrt(2 pi) eps exp(iota^2))^{-1}: the AV@R of a standard normal at level eps."""
    return 1.0 / (SQRT2PI * epsilon * math.exp(iota(epsilon) ** 2))


class CovSign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ZERO = "zero"
    COMPLETE = "complete"


def _cov_sign(value: CovSign | str | float) -> CovSign:
    if isinstance(value, CovSign):
        return value
    if isinstance(value, str):
        try:
            return CovSign(value)
        except ValueError:
            raise InvalidSign(f"unknown covariance sign {value!r}") from None
    if value > 0:
        return CovSign.POSITIVE
    if value < 0:
        return CovSign.NEGATIVE
    if value == 0:
        return CovSign.ZERO
    raise InvalidSign(f"unknown covariance sign {value!r}")


@dataclass(frozen=True)
class BestAchievableBound:
    case: CovSign
    frak_a: float
    level_bound: RiskLevel
    kappa_eps: float
    iota_eps: float
    sigma_min: float
    mu_tilde: float | None = None
    sigma_tilde: float | None = None

    def to_dict(self) -> dict[str, Any]:
        d = {
            "case": self.case.value,
            "frak_a": self.frak_a,
            "level_bound": self.level_bound.to_json_value(),
            "branch": self.level_bound.branch.value,
            "kappa_eps": self.kappa_eps,
            "iota_eps": self.iota_eps,
            "sigma_min": self.sigma_min,
        }
        if self.mu_tilde is not None:
            d["mu_tilde"] = self.mu_tilde
            d["sigma_tilde"] = self.sigma_tilde
        return d


def sigma_min(n: int, tau: float, b: float) -> float:
    return math.sqrt((n - 1) / n * b**2 * tau * f_extrema().f_lower)


def best_achievable_bound(
    n: int,
    tau: float,
    b: float,
    y_f: float,
    params: RiskParams,
    cov_sign: CovSign | str | float,
    s_bar: tuple[float, float] = S_BAR,
) -> BestAchievableBound:
    """Topology-free lower bound on the risk at j after a failure y_f at i.

    Assumes every lambda_k tau lies in ``s_bar`` (caller's declaration).
    """
    sign = _cov_sign(cov_sign)
    if sign is CovSign.COMPLETE:
        raise InvalidSign("use best_achievable_complete for the complete-graph corollary")
    if not y_f > 0:
        raise ValueError("y_f must be positive")
    ext = f_extrema(tuple(s_bar))
    smin = sigma_min(n, tau, b)
    k_eps, i_eps = kappa(params.epsilon), iota(params.epsilon)
    if sign is CovSign.POSITIVE:
        frak = min(k_eps * smin, math.sqrt(ext.f_lower / ext.f_upper_on_Sbar) * y_f)
        level = risk_level(frak, params)
    elif sign is CovSign.NEGATIVE:
        frak, level = 0.0, RiskLevel.zero()
    else:
        frak = kappa(params.epsilon / 2.0) * smin
        level = risk_level(frak, params)
    return BestAchievableBound(sign, frak, level, k_eps, i_eps, smin)


def best_achievable_complete(n: int, tau: float, b: float, y_f: float, params: RiskParams) -> BestAchievableBound:
    """Sharper bound for the unweighted complete graph (n >= 3)."""
    if n < 3:
        raise ValueError("the complete-graph bound needs n >= 3")
    f_lo = f_extrema().f_lower
    mu = -y_f / (n - 1)
    s = math.sqrt((n - 2) * b**2 * tau * f_lo / (n - 1))
    a = assess(mu, s, params)
    return BestAchievableBound(
        CovSign.COMPLETE, a.avar, a.level, kappa(params.epsilon), iota(params.epsilon), sigma_min(n, tau, b), mu, s
    )


@dataclass
class ValidationReport:
    graphs: int
    pairs_checked: int
    violations: int
    sign_histogram: dict[str, int]
    domain_violations: int
    bounds: dict[str, Any]
    violation_examples: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "graphs": self.graphs,
            "pairs_checked": self.pairs_checked,
            "violations": self.violations,
            "sign_histogram": dict(self.sign_histogram),
            "domain_violations": self.domain_violations,
            "bounds": self.bounds,
            "violation_examples": self.violation_examples,
        }


ZERO_COV_RTOL = 1e-15


def _check_graph(g, n, edge_prob_range, params, tau, b, y_f, seed, s_bar, bound_levels):
    rng = np.random.default_rng(np.random.SeedSequence([seed, g]))
    p = float(rng.uniform(*edge_prob_range))
    spec = random_connected_graph(n, p, _derived_seed(seed, g + 1), tau)
    model = NetworkModel.build(spec, tau, b)
    s = steady_state_covariance(model).sigma
    x = model.spectrum.eigenvalues[1:] * tau
    out_of_domain = bool(np.any(x < s_bar[0]) or np.any(x > s_bar[1]))
    hist = {"positive": 0, "negative": 0, "zero": 0}
    violations = []
    sd = np.sqrt(np.diag(s))
    for i in range(n):
        state = init_state(s, FailureObservation((i,), (y_f,)))
        for j in range(n):
            if j == i:
                continue
            cov = s[i, j]
            if abs(cov) < ZERO_COV_RTOL * sd[i] * sd[j]:
                sign = "zero"
            else:
                sign = "positive" if cov > 0 else "negative"
            hist[sign] += 1
            actual = assess(float(state.mean[j]), math.sqrt(max(state.var[j], 0.0)), params).level
            bound = bound_levels[sign]
            slack = 1e-9 * max(1.0, abs(bound.value)) if bound.branch is Branch.FINITE else 0.0
            if actual.value < bound.value - slack:
                violations.append({"graph": g, "i": i, "j": j, "sign": sign, "actual": actual.to_json_value(), "bound": bound.to_json_value()})
    return hist, violations, out_of_domain


def bound_validation_sweep(
    num_graphs: int,
    n: int,
    edge_prob_range: tuple[float, float],
    params: RiskParams,
    tau: float,
    b: float,
    y_f: float,
    seed: int,
    s_bar: tuple[float, float] = S_BAR,
    threads: int | None = None,
) -> ValidationReport:
    """Check the best-achievable bound on every ordered pair of random graphs.

    Graph g draws its edge probability uniformly from ``edge_prob_range``
    and its topology from a seed derived from ``(seed, g)``; a single
    failure of value ``y_f`` is placed at each agent in turn.
    """
    bounds = {
        sign: best_achievable_bound(n, tau, b, y_f, params, sign, s_bar)
        for sign in ("positive", "negative", "zero")
    }
    bound_levels = {k: v.level_bound for k, v in bounds.items()}
    args = (n, edge_prob_range, params, tau, b, y_f, seed, tuple(s_bar), bound_levels)
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        results = list(pool.map(lambda g: _check_graph(g, *args), range(num_graphs)))
    hist = {"positive": 0, "negative": 0, "zero": 0}
    violations: list[dict[str, Any]] = []
    domain = 0
    for h, v, ood in results:
        for k in hist:
            hist[k] += h[k]
        violations.extend(v)
        domain += ood
    return ValidationReport(
        graphs=num_graphs,
        pairs_checked=num_graphs * n * (n - 1),
        violations=len(violations),
        sign_histogram=hist,
        domain_violations=domain,
        bounds={k: v.to_dict() for k, v in bounds.items()},
        violation_examples=violations[:20],
    )
