"""Communication graphs, Laplacians and their spectra.

Agents are indexed from 0.  For the star topology the hub is the last
agent, index ``n - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import scipy.linalg

from .errors import DisconnectedGraph, EigSolverFailure, InvalidSpec, RetryExhausted

# lambda_2 > CONNECTIVITY_RTOL * max(1, lambda_n) declares a graph connected
CONNECTIVITY_RTOL = 1e-9
MAX_RETRIES = 1000


class Topology(str, Enum):
    COMPLETE = "complete"
    STAR = "star"
    PATH = "path"
    PCYCLE = "pcycle"
    ERDOS_RENYI = "erdos-renyi"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class GraphSpec:
    """Description of an undirected weighted communication graph.

    Only the fields relevant to ``topology`` are used: ``p`` for
    p-cycles, ``edge_prob`` and ``seed`` for Erdos-Renyi draws, and
    ``weights`` (a symmetric, nonnegative matrix with zero diagonal) for
    explicit graphs.
    """

    n: int
    topology: Topology
    p: int | None = None
    edge_prob: float | None = None
    seed: int | None = None
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if int(self.n) != self.n or self.n < 2:
            raise InvalidSpec(f"need an integer n >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        top = self.topology
        if top is Topology.PCYCLE:
            if self.p is None or self.p < 1:
                raise InvalidSpec("p-cycle needs a positive integer p")
            if 2 * self.p + 1 > self.n:
                raise InvalidSpec(f"p-cycle needs 2p + 1 <= n (p={self.p}, n={self.n})")
        elif top is Topology.ERDOS_RENYI:
            if self.edge_prob is None or not 0.0 < self.edge_prob < 1.0:
                raise InvalidSpec("edge_prob must lie in (0, 1)")
            if self.seed is None or self.seed < 0:
                raise InvalidSpec("Erdos-Renyi graphs need an unsigned integer seed")
        elif top is Topology.EXPLICIT:
            if self.weights is None:
                raise InvalidSpec("explicit topology needs a weight matrix")
            w = np.array(self.weights, dtype=float)
            if w.shape != (self.n, self.n):
                raise InvalidSpec(f"weights must be {self.n}x{self.n}, got {w.shape}")
            if not np.allclose(w, w.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(w).max())):
                raise InvalidSpec("weights must be symmetric")
            if (w < 0).any():
                raise InvalidSpec("weights must be nonnegative")
            if np.any(np.diag(w) != 0):
                raise InvalidSpec("weights must have a zero diagonal")
            w = 0.5 * (w + w.T)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"n": self.n, "topology": self.topology.value}
        if self.p is not None:
            d["p"] = self.p
        if self.edge_prob is not None:
            d["edge_prob"] = self.edge_prob
        if self.seed is not None:
            d["seed"] = self.seed
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GraphSpec:
        try:
            return cls(
                n=d["n"],
                topology=Topology(d["topology"]),
                p=d.get("p"),
                edge_prob=d.get("edge_prob"),
                seed=d.get("seed"),
                weights=None if d.get("weights") is None else np.asarray(d["weights"], float),
            )
        except KeyError as exc:
            raise InvalidSpec(f"graph spec is missing field {exc}") from None
        except ValueError as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> GraphSpec:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of L."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def is_connected(self) -> bool:
        return self.eigenvalues[1] > CONNECTIVITY_RTOL * max(1.0, self.lambda_max)

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


@dataclass(frozen=True)
class CenteringMatrix:
    """Implicit M_n = I - 11^T / n."""

    n: int

    def column(self, i: int) -> np.ndarray:
        m = np.full(self.n, -1.0 / self.n)
        m[i] += 1.0
        return m

    def dense(self) -> np.ndarray:
        return np.eye(self.n) - 1.0 / self.n

    def apply(self, x: np.ndarray) -> np.ndarray:
        """M_n x for a vector, or for every row of a 2-D array of states."""
        x = np.asarray(x, dtype=float)
        return x - x.mean(axis=-1, keepdims=True)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    margin: float
    tau: float
    tau_max: float

    def to_dict(self) -> dict[str, Any]:
        return {"stable": self.stable, "margin": self.margin, "tau": self.tau, "tau_max": self.tau_max}


def adjacency(spec: GraphSpec) -> np.ndarray:
    """Symmetric weight matrix k_ij of the graph described by ``spec``."""
    n = spec.n
    top = spec.topology
    if top is Topology.COMPLETE:
        return np.ones((n, n)) - np.eye(n)
    if top is Topology.STAR:
        w = np.zeros((n, n))
        w[:-1, -1] = w[-1, :-1] = 1.0
        return w
    if top is Topology.PATH:
        w = np.zeros((n, n))
        idx = np.arange(n - 1)
        w[idx, idx + 1] = w[idx + 1, idx] = 1.0
        return w
    if top is Topology.PCYCLE:
        w = np.zeros((n, n))
        idx = np.arange(n)
        for d in range(1, spec.p + 1):
            w[idx, (idx + d) % n] = 1.0
            w[(idx + d) % n, idx] = 1.0
        return w
    if top is Topology.ERDOS_RENYI:
        rng = np.random.default_rng(spec.seed)
        upper = np.triu(rng.random((n, n)) < spec.edge_prob, k=1)
        w = upper.astype(float)
        return w + w.T
    return np.array(spec.weights, dtype=float)


def laplacian_from_weights(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.diag(w.sum(axis=1)) - w


def spectrum(L: np.ndarray) -> Spectrum:
    """Eigen-decomposition of a symmetric Laplacian, eigenvalues ascending.

    Each eigenvector is flipped so that its largest-magnitude entry is
    positive, which makes the output reproducible.
    """
    L = np.asarray(L, dtype=float)
    try:
        lam, q = scipy.linalg.eigh(L)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigSolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise EigSolverFailure("non-finite eigenvalues")
    pivot = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[pivot, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    q = q * signs
    # Rayleigh quotients in extended precision: their error is quadratic in
    # the eigenvector error, so they beat the solver's O(n eps ||L||)
    ql = q.astype(np.longdouble)
    rq = np.einsum("ij,ij->j", ql, L.astype(np.longdouble) @ ql) / np.einsum("ij,ij->j", ql, ql)
    order = np.argsort(rq.astype(float), kind="stable")
    lam, q = rq.astype(float)[order], q[:, order]
    # the zero eigenvalue of a Laplacian is exact; clamp solver round-off
    if abs(lam[0]) <= 1e-10 * max(1.0, abs(lam[-1])):
        lam = lam.copy()
        lam[0] = 0.0
    return Spectrum(lam, q)


def build_laplacian(spec: GraphSpec) -> np.ndarray:
    """Laplacian of ``spec``; raises DisconnectedGraph if lambda_2 is ~0."""
    L = laplacian_from_weights(adjacency(spec))
    if not spectrum(L).is_connected():
        raise DisconnectedGraph(f"{spec.topology.value} graph with n={spec.n} is disconnected")
    return L


def check_stability(spec_eigenvalues: Spectrum | np.ndarray, tau: float) -> StabilityReport:
    """Report whether tau < pi / (2 lambda_n); the margin is always given."""
    if tau < 0:
        raise InvalidSpec("tau must be nonnegative")
    lam = spec_eigenvalues.eigenvalues if isinstance(spec_eigenvalues, Spectrum) else np.asarray(spec_eigenvalues)
    tau_max = math.pi / (2.0 * float(lam[-1]))
    margin = tau_max - tau
    return StabilityReport(stable=margin > 0, margin=margin, tau=tau, tau_max=tau_max)


def effective_resistance(spec: Spectrum) -> float:
    """Mean of 1/lambda_k over the nonzero Laplacian eigenvalues."""
    if not spec.is_connected():
        raise DisconnectedGraph("effective resistance needs a connected graph")
    lam = spec.eigenvalues[1:]
    return float(np.sum(1.0 / lam) / (spec.n - 1))


def _derived_seed(seed: int, attempt: int) -> int:
    if attempt == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), attempt]).generate_state(1, dtype=np.uint32)[0])


def random_connected_graph(
    n: int, edge_prob: float, seed: int, tau: float = 0.0, max_retries: int = MAX_RETRIES
) -> GraphSpec:
    """Draw G(n, edge_prob) graphs until one is connected and delay-stable.

    Attempt ``k`` uses a seed derived deterministically from ``(seed, k)``;
    the returned spec carries the seed of the accepted draw, so rebuilding
    it reproduces the same graph.
    """
    for attempt in range(max_retries):
        spec = GraphSpec(n, Topology.ERDOS_RENYI, edge_prob=edge_prob, seed=_derived_seed(seed, attempt))
        sp = spectrum(laplacian_from_weights(adjacency(spec)))
        if sp.is_connected() and check_stability(sp, tau).stable:
            return spec
    raise RetryExhausted(
        f"no connected, stable G({n}, {edge_prob}) draw with tau={tau} in {max_retries} attempts; "
        "lower tau or raise edge_prob"
    )


# Closed-form spectra, used as cross-checks only.


def complete_eigenvalues(n: int) -> np.ndarray:
    return np.r_[0.0, np.full(n - 1, float(n))]


def star_eigenvalues(n: int) -> np.ndarray:
    return np.r_[0.0, np.ones(n - 2), float(n)]


def path_eigenvalues(n: int) -> np.ndarray:
    j = np.arange(1, n + 1)
    return 2.0 * (1.0 - np.cos(np.pi * (j - 1) / n))


def pcycle_eigenvalues(n: int, p: int) -> np.ndarray:
    """Circulant spectrum 2p+1 - sin((2p+1)theta)/sin(theta), theta = pi(k-1)/n.

    Returned in index order k = 1..n, not sorted.
    """
    k = np.arange(2, n + 1)
    theta = np.pi * (k - 1) / n
    lam = (2 * p + 1) - np.sin((2 * p + 1) * theta) / np.sin(theta)
    return np.r_[0.0, lam]
