"""Steady-state covariance of the centered observables and its bounds."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, DomainViolation, StabilityViolation
from .graph import (
    GraphSpec,
    Spectrum,
    Topology,
    build_laplacian,
    check_stability,
    spectrum,
)

# 1 - sin(lambda_k tau) below this is treated as sitting on the stability edge
EDGE_TOL = 1e-9
S_BAR = (1e-3, math.pi / 2 - 1e-3)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """A delayed consensus network dx = -L x(t - tau) dt + b dw."""

    spec: GraphSpec
    spectrum: Spectrum
    tau: float
    b: float
    laplacian: np.ndarray

    def __post_init__(self):
        if self.tau < 0:
            raise StabilityViolation("tau must be nonnegative")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        report = check_stability(self.spectrum, self.tau)
        if not report.stable:
            raise StabilityViolation(
                f"tau={self.tau} violates tau < pi/(2 lambda_n) = {report.tau_max:.6g} "
                f"(margin {report.margin:.3g})"
            )

    @classmethod
    def build(cls, spec: GraphSpec, tau: float, b: float) -> NetworkModel:
        L = build_laplacian(spec)
        return cls(spec, spectrum(L), float(tau), float(b), L)

    @property
    def n(self) -> int:
        return self.spec.n


@dataclass(frozen=True, eq=False)
class SteadyStateCovariance:
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.sigma).copy()

    def correlation(self, i: int, j: int) -> float:
        s = self.sigma
        return float(s[i, j] / math.sqrt(s[i, i] * s[j, j]))

    def correlation_matrix(self) -> np.ndarray:
        d = np.sqrt(np.diag(self.sigma))
        return self.sigma / np.outer(d, d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"a{j}" for j in range(self.n)])
        for row in self.sigma:
            w.writerow([format(x, ".17g") for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "sigma": self.sigma.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SteadyStateCovariance:
        return cls(np.asarray(d["sigma"], dtype=float))


def g_function(x):
    """cos(x) / (1 - sin(x))."""
    return np.cos(x) / (1.0 - np.sin(x))


def spectral_weights(lam: np.ndarray, tau: float) -> np.ndarray:
    """w_k = cos(lambda_k tau) / (lambda_k (1 - sin(lambda_k tau))), w_1 = 0."""
    lam = np.asarray(lam, dtype=float)
    x = lam[1:] * tau
    gap = 1.0 - np.sin(x)
    if np.any(gap < EDGE_TOL) or np.any(x >= math.pi / 2):
        raise StabilityViolation("some lambda_k tau is at or beyond pi/2")
    return np.r_[0.0, np.cos(x) / (lam[1:] * gap)]


def steady_state_covariance(model: NetworkModel) -> SteadyStateCovariance:
    lam = model.spectrum.eigenvalues
    q = model.spectrum.eigenvectors
    w = spectral_weights(lam, model.tau)[1:]
    n = model.n
    # sum_k w_k q_k q_k^T = w_ref M_n + sum_k (w_k - w_ref) q_k q_k^T; the first
    # term is exact, which avoids cancellation when the weights cluster
    w_ref = float(np.mean(w))
    inner = (q[:, 1:] * (w - w_ref)) @ q[:, 1:].T
    # M_n inner M_n without forming M_n
    inner -= inner.mean(axis=0, keepdims=True)
    inner -= inner.mean(axis=1, keepdims=True)
    inner += w_ref * (np.eye(n) - 1.0 / n)
    sigma = 0.5 * model.b**2 * inner
    sigma = 0.5 * (sigma + sigma.T)
    return SteadyStateCovariance(sigma)


def _check_delay(n: int, tau: float) -> None:
    if tau < 0 or n * tau >= math.pi / 2 or 1.0 - math.sin(n * tau) < EDGE_TOL:
        raise StabilityViolation(f"need n*tau < pi/2, got n={n}, tau={tau}")


def covariance_complete(n: int, tau: float, b: float) -> SteadyStateCovariance:
    _check_delay(n, tau)
    scale = b**2 * g_function(n * tau) / (2.0 * n**2)
    sigma = np.full((n, n), -scale)
    np.fill_diagonal(sigma, (n - 1) * scale)
    return SteadyStateCovariance(sigma)


def covariance_star(n: int, tau: float, b: float) -> SteadyStateCovariance:
    """Closed form for the star with the hub at index n - 1."""
    _check_delay(n, tau)
    g1, gn = g_function(tau), g_function(n * tau)
    k = b**2 / (2.0 * n * (n - 1))
    sigma = np.full((n, n), k * (-n * g1 + gn / n))
    np.fill_diagonal(sigma, k * (n * (n - 2) * g1 + gn / n))
    sigma[-1, :] = sigma[:, -1] = -(b**2) * gn / (2.0 * n**2)
    sigma[-1, -1] = b**2 * (n - 1) * gn / (2.0 * n**2)
    return SteadyStateCovariance(sigma)


def f_function(x):
    """f(x) = cos(x) / (2 x (1 - sin(x))) on the open interval (0, pi/2)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0) or np.any(arr >= math.pi / 2):
        raise DomainError("f is defined on (0, pi/2) only")
    out = np.cos(arr) / (2.0 * arr * (1.0 - np.sin(arr)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FExtrema:
    f_lower: float
    argmin: float
    f_upper_on_Sbar: float
    s_bar: tuple[float, float]


@lru_cache(maxsize=16)
def f_extrema(s_bar: tuple[float, float] = S_BAR) -> FExtrema:
    """Global minimum of f on (0, pi/2) and its supremum on S-bar.

    f is convex with a single critical point, so on a closed interval the
    supremum sits at an endpoint; the minimum is located by bounded Brent.
    """
    res = minimize_scalar(
        f_function, bounds=(1e-6, math.pi / 2 - 1e-6), method="bounded", options={"xatol": 1e-10}
    )
    lo, hi = s_bar
    if not 0 < lo < hi < math.pi / 2:
        raise DomainError(f"S-bar must satisfy 0 < lo < hi < pi/2, got {s_bar}")
    candidates = [f_function(lo), f_function(hi)]
    if lo < res.x < hi:
        candidates.append(float(res.fun))
    return FExtrema(float(res.fun), float(res.x), max(candidates), (lo, hi))


@dataclass(frozen=True)
class CovarianceBounds:
    diag_lo: float
    diag_hi: float
    offdiag_lo: float
    offdiag_hi: float
    f_lower: float
    f_upper: float
    domain: tuple[float, float]
    mode: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "diag_lo": self.diag_lo,
            "diag_hi": self.diag_hi,
            "offdiag_lo": self.offdiag_lo,
            "offdiag_hi": self.offdiag_hi,
            "f_lower": self.f_lower,
            "f_upper": self.f_upper,
            "domain": list(self.domain),
        }

    def contains(self, sigma: SteadyStateCovariance, rtol: float = 1e-12) -> bool:
        s = sigma.sigma
        off = s[~np.eye(len(s), dtype=bool)]
        d = np.diag(s)
        slack_d = rtol * max(abs(self.diag_lo), abs(self.diag_hi))
        slack_o = rtol * max(abs(self.offdiag_lo), abs(self.offdiag_hi))
        return bool(
            np.all(d >= self.diag_lo - slack_d)
            and np.all(d <= self.diag_hi + slack_d)
            and np.all(off >= self.offdiag_lo - slack_o)
            and np.all(off <= self.offdiag_hi + slack_o)
        )


def envelope(n: int, tau: float, b: float, f_lo: float, f_hi: float) -> tuple[float, float, float, float]:
    """(diag_lo, diag_hi, offdiag_lo, offdiag_hi) for given extremes of f."""
    base = b**2 * tau
    return (
        (n - 1) * base / n * f_lo,
        (n - 1) * base / n * f_hi,
        (n - 2) * base / (2 * n) * f_lo - base / 2 * f_hi,
        (n - 2) * base / (2 * n) * f_hi - base / 2 * f_lo,
    )


def covariance_bounds(
    model: NetworkModel, uniform: bool = False, s_bar: tuple[float, float] = S_BAR
) -> CovarianceBounds:
    """Delay-induced envelopes on the entries of the covariance.

    Graph-specific mode takes f-bar = max(f(lambda_2 tau), f(lambda_n tau));
    uniform mode takes the supremum of f over ``s_bar`` and requires every
    lambda_k tau (k >= 2) to lie in it.
    """
    lam = model.spectrum.eigenvalues
    x = lam[1:] * model.tau
    ext = f_extrema(tuple(s_bar))
    if uniform:
        if np.any(x < s_bar[0]) or np.any(x > s_bar[1]):
            raise DomainViolation(f"lambda_k tau spans [{x.min():.4g}, {x.max():.4g}], outside S-bar {s_bar}")
        f_hi, domain, mode = ext.f_upper_on_Sbar, tuple(s_bar), "uniform"
    else:
        f_hi = max(f_function(x[0]), f_function(x[-1]))
        domain, mode = (float(x[0]), float(x[-1])), "graph"
    lo_d, hi_d, lo_o, hi_o = envelope(model.n, model.tau, model.b, ext.f_lower, f_hi)
    return CovarianceBounds(lo_d, hi_d, lo_o, hi_o, ext.f_lower, f_hi, domain, mode)


def closed_form_covariance(spec: GraphSpec, tau: float, b: float) -> SteadyStateCovariance | None:
    """Closed-form covariance where one exists (complete, star), else None."""
    if spec.topology is Topology.COMPLETE:
        return covariance_complete(spec.n, tau, b)
    if spec.topology is Topology.STAR:
        return covariance_star(spec.n, tau, b)
    return None
