"""Gaussian conditioning of the steady-state observables on observed agents.

Two routes compute the same conditional laws:

* :func:`condition` factors the observed block afresh for every call;
* :class:`ConditioningState` keeps a bordered Cholesky factor of the
  observed block together with the gain matrix ``Sigma_22^{-1} Sigma_2.``
  for every agent, and folds in one new observation at a time in
  O(n m) work via the Schur-complement update.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import scipy.linalg

from .covariance import SteadyStateCovariance, g_function
from .errors import (
    DegenerateUpdate,
    InvalidCase,
    InvalidCount,
    SingularBlock,
    TargetObserved,
)

# Sigma_22 must have min eigenvalue above this fraction of its trace
PD_RTOL = 1e-12
# conditional variance of a new observation below this fraction of its prior variance
DEGENERATE_RTOL = 1e-14


@dataclass(frozen=True)
class FailureObservation:
    """Observed agents and their exact steady-state values."""

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        vals = tuple(float(v) for v in self.values)
        if len(idx) != len(vals):
            raise ValueError("indices and values differ in length")
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate observed agents in {idx}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.indices)

    @classmethod
    def uniform(cls, indices: Iterable[int], value: float) -> FailureObservation:
        idx = tuple(indices)
        return cls(idx, (value,) * len(idx))

    def with_failure(self, k: int, value: float) -> FailureObservation:
        return FailureObservation(self.indices + (k,), self.values + (value,))

    def to_dict(self) -> dict[str, Any]:
        return {"failures": [{"agent": i, "value": v} for i, v in zip(self.indices, self.values)]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> FailureObservation:
        fs = d.get("failures", [])
        return cls(tuple(f["agent"] for f in fs), tuple(f["value"] for f in fs))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> FailureObservation:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ConditionalLaw:
    target: int
    mu_tilde: float
    sigma_tilde_sq: float

    @property
    def sigma_tilde(self) -> float:
        return math.sqrt(max(self.sigma_tilde_sq, 0.0))


def _as_matrix(sigma: SteadyStateCovariance | np.ndarray) -> np.ndarray:
    return sigma.sigma if isinstance(sigma, SteadyStateCovariance) else np.asarray(sigma, dtype=float)


def _check_pd(block: np.ndarray) -> None:
    if block.size == 0:
        return
    ev = np.linalg.eigvalsh(block)
    if ev[0] <= PD_RTOL * np.trace(block):
        raise SingularBlock(
            f"observed covariance block is numerically singular (min eigenvalue {ev[0]:.3g}, "
            f"trace {np.trace(block):.3g})"
        )


def _factor(block: np.ndarray) -> np.ndarray:
    _check_pd(block)
    try:
        return scipy.linalg.cholesky(block, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(str(exc)) from exc


def condition(
    sigma: SteadyStateCovariance | np.ndarray, obs: FailureObservation, j: int
) -> ConditionalLaw:
    """Law of agent j given exact observations, by a fresh Cholesky solve."""
    s = _as_matrix(sigma)
    if j in obs.indices:
        raise TargetObserved(f"agent {j} is already observed")
    if obs.m == 0:
        return ConditionalLaw(j, 0.0, float(s[j, j]))
    idx = list(obs.indices)
    chol = _factor(s[np.ix_(idx, idx)])
    cross = s[j, idx]
    coef = scipy.linalg.cho_solve((chol, True), cross)
    mu = float(coef @ np.asarray(obs.values))
    var = float(s[j, j] - cross @ coef)
    return ConditionalLaw(j, mu, var)


def condition_complete_closed_form(n: int, m: int, y_f: Sequence[float], sigma_j_sq: float) -> ConditionalLaw:
    """Complete graph: mu = -sum(y_f)/(n-m), var = sigma_j^2 (1 - m/((n-1)(n-m)))."""
    if m >= n or m < 0:
        raise InvalidCount(f"need 0 <= m < n, got m={m}, n={n}")
    y = np.asarray(y_f, dtype=float)
    if len(y) != m:
        raise InvalidCount(f"y_f has {len(y)} entries, expected {m}")
    mu = -float(y.sum()) / (n - m) if m else 0.0
    return ConditionalLaw(-1, mu, sigma_j_sq * (1.0 - m / ((n - 1) * (n - m))))


class StarCase(str, Enum):
    PERIPHERY_ONLY = "periphery"
    CENTER_INCLUDED = "center"


def condition_star_closed_form(
    n: int, m: int, y_f: Sequence[float], tau: float, b: float, case: StarCase | str, j: int
) -> ConditionalLaw:
    """Star graph (hub at n - 1) conditional law in closed form.

    With every observation on the periphery the result depends on
    Delta = n^2 (n - m - 1) g(tau) + m g(n tau).  The periphery variance is
    (b^2 g(tau) / 2) (1 + (g(n tau) - n^2 g(tau)) / Delta).
    """
    case = StarCase(case)
    y = np.asarray(y_f, dtype=float)
    if len(y) != m or not 1 <= m < n:
        raise InvalidCount(f"need 1 <= m < n with m entries in y_f (m={m}, n={n})")
    g1, gn = g_function(tau), g_function(n * tau)
    hub = n - 1
    total = float(y.sum())
    if case is StarCase.PERIPHERY_ONLY:
        if m > n - 2 and j != hub:
            raise InvalidCase("no unobserved peripheral agent left")
        delta = n**2 * (n - m - 1) * g1 + m * gn
        if j == hub:
            sigma_n_sq = b**2 * (n - 1) * gn / (2.0 * n**2)
            return ConditionalLaw(j, -(n - 1) * gn / delta * total, sigma_n_sq * n**2 * (n - m - 1) * g1 / delta)
        return ConditionalLaw(
            j, (gn - n**2 * g1) / delta * total, 0.5 * b**2 * g1 * (1.0 + (gn - n**2 * g1) / delta)
        )
    if j == hub:
        raise InvalidCase("the hub is observed in the center-included case")
    return ConditionalLaw(j, -total / (n - m), 0.5 * b**2 * g1 * (1.0 - 1.0 / (n - m)))


class ConditioningState:
    """Incrementally conditioned Gaussian over all n agents.

    Holds, for the observed index set I:

    * ``chol``: lower Cholesky factor of Sigma[I, I], grown by bordering;
    * ``gain``: Sigma[I, I]^{-1} Sigma[I, :], an (m, n) array;
    * ``mean`` / ``var``: conditional mean and variance of every agent.

    Single writer; readers may share it between updates.
    """

    def __init__(self, sigma: SteadyStateCovariance | np.ndarray):
        self.sigma = _as_matrix(sigma)
        n = self.sigma.shape[0]
        self.indices: list[int] = []
        self.values: list[float] = []
        self.chol = np.zeros((0, 0))
        self.gain = np.zeros((0, n))
        self.mean = np.zeros(n)
        self.var = np.diag(self.sigma).copy()

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def observation(self) -> FailureObservation:
        return FailureObservation(tuple(self.indices), tuple(self.values))

    def law(self, j: int) -> ConditionalLaw:
        if j in self.indices:
            raise TargetObserved(f"agent {j} is already observed")
        return ConditionalLaw(j, float(self.mean[j]), float(self.var[j]))

    def laws(self) -> dict[int, ConditionalLaw]:
        seen = set(self.indices)
        return {j: self.law(j) for j in range(self.n) if j not in seen}

    def cross_covariance(self, j: int, k: int) -> float:
        """Conditional covariance of agents j and k given the current set."""
        return float(self.sigma[j, k] - self.sigma[j, self.indices] @ self.gain[:, k])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Sigma[I, I]^{-1} rhs through the stored factor."""
        return scipy.linalg.cho_solve((self.chol, True), rhs)

    def update(self, k: int, y_fk: float) -> None:
        """Fold in the observation agent k = y_fk."""
        if k in self.indices:
            raise TargetObserved(f"agent {k} is already observed")
        s = self.sigma
        wk = self.gain[:, k]
        # conditional covariance of every agent with k
        cross = s[:, k] - s[:, self.indices] @ wk
        sk = float(cross[k])
        if sk <= DEGENERATE_RTOL * s[k, k]:
            raise DegenerateUpdate(
                f"agent {k} is (numerically) determined by the observed set: "
                f"conditional variance {sk:.3g} vs prior {s[k, k]:.3g}"
            )
        ratio = cross / sk
        innovation = self.mean[k] - y_fk
        self.mean = self.mean - ratio * innovation
        self.var = self.var - cross * ratio

        # bordered Cholesky: [[C, 0], [l^T, d]] with l = C^{-1} Sigma[I, k]
        m = self.m
        new_chol = np.zeros((m + 1, m + 1))
        new_chol[:m, :m] = self.chol
        if m:
            l = scipy.linalg.solve_triangular(self.chol, s[self.indices, k], lower=True)
            new_chol[m, :m] = l
        new_chol[m, m] = math.sqrt(sk)
        self.chol = new_chol

        # block-inverse identity for the gain
        self.gain = np.vstack([self.gain - np.outer(wk, ratio), ratio])
        self.indices.append(int(k))
        self.values.append(float(y_fk))
        self.mean[k] = y_fk
        self.var[k] = 0.0


def init_state(sigma: SteadyStateCovariance | np.ndarray, obs: FailureObservation | None = None) -> ConditioningState:
    """State conditioned on ``obs`` by one factorization of the observed block."""
    state = ConditioningState(sigma)
    if obs is None or obs.m == 0:
        return state
    s = state.sigma
    idx = list(obs.indices)
    chol = _factor(s[np.ix_(idx, idx)])
    gain = scipy.linalg.cho_solve((chol, True), s[idx, :])
    y = np.asarray(obs.values)
    state.indices = idx
    state.values = list(obs.values)
    state.chol = chol
    state.gain = gain
    state.mean = gain.T @ y
    state.var = np.diag(s) - np.einsum("ij,ij->j", s[idx, :], gain)
    state.mean[idx] = y
    state.var[idx] = 0.0
    return state


def update_one_failure(state: ConditioningState, k: int, y_fk: float) -> ConditioningState:
    """Functional wrapper around :meth:`ConditioningState.update` (mutates and returns ``state``)."""
    state.update(k, y_fk)
    return state
