import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_risk.errors import DisconnectedGraph, InvalidSpec, RetryExhausted
from cascade_risk.graph import (
    CenteringMatrix,
    GraphSpec,
    Topology,
    adjacency,
    build_laplacian,
    check_stability,
    complete_eigenvalues,
    effective_resistance,
    laplacian_from_weights,
    path_eigenvalues,
    pcycle_eigenvalues,
    random_connected_graph,
    spectrum,
    star_eigenvalues,
)


@given(st.integers(2, 60))
def test_closed_form_spectra(n):
    for top, ref in ((Topology.COMPLETE, complete_eigenvalues), (Topology.STAR, star_eigenvalues), (Topology.PATH, path_eigenvalues)):
        lam = spectrum(build_laplacian(GraphSpec(n, top))).eigenvalues
        np.testing.assert_allclose(lam, np.sort(ref(n)), atol=1e-12 * n)


@given(st.integers(1, 6), st.integers(0, 30))
def test_pcycle_spectrum(p, extra):
    n = 2 * p + 1 + extra
    lam = spectrum(build_laplacian(GraphSpec(n, Topology.PCYCLE, p=p))).eigenvalues
    np.testing.assert_allclose(lam, np.sort(pcycle_eigenvalues(n, p)), atol=1e-11 * n)


def test_pcycle_with_p1_is_a_cycle():
    n = 9
    w = adjacency(GraphSpec(n, Topology.PCYCLE, p=1))
    assert np.all(w.sum(axis=1) == 2)
    lam = spectrum(laplacian_from_weights(w)).eigenvalues
    ref = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(lam, ref, atol=1e-12)


@settings(max_examples=30)
@given(st.integers(3, 30), st.floats(0.3, 0.9), st.integers(0, 2**31))
def test_spectrum_is_orthonormal_and_reconstructs(n, prob, seed):
    spec = random_connected_graph(n, prob, seed)
    L = build_laplacian(spec)
    sp = spectrum(L)
    q = sp.eigenvectors
    np.testing.assert_allclose(q.T @ q, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(sp.reconstruct(), L, atol=1e-11 * n)
    assert sp.eigenvalues[0] == 0.0
    assert np.all(np.diff(sp.eigenvalues) >= 0)
    # sign convention: largest-magnitude entry of each eigenvector positive
    pivot = np.argmax(np.abs(q), axis=0)
    assert np.all(q[pivot, np.arange(n)] > 0)
    np.testing.assert_allclose(L @ q, q * sp.eigenvalues, atol=1e-11 * n)


def test_spectrum_is_reproducible():
    L = build_laplacian(GraphSpec(15, Topology.ERDOS_RENYI, edge_prob=0.4, seed=3))
    a, b = spectrum(L), spectrum(L.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_disconnected_explicit_graph():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = 1.0
    w[2, 3] = w[3, 2] = 1.0
    with pytest.raises(DisconnectedGraph):
        build_laplacian(GraphSpec(4, Topology.EXPLICIT, weights=w))


def test_weighted_explicit_graph():
    w = np.array([[0, 2.0, 0], [2.0, 0, 0.5], [0, 0.5, 0]])
    L = build_laplacian(GraphSpec(3, Topology.EXPLICIT, weights=w))
    np.testing.assert_allclose(L.sum(axis=1), 0)
    assert L[0, 0] == 2.0 and L[1, 1] == 2.5


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=1, topology="complete"),
        dict(n=2.5, topology="complete"),
        dict(n=5, topology="pcycle"),
        dict(n=5, topology="pcycle", p=3),
        dict(n=5, topology="erdos-renyi", edge_prob=1.2, seed=0),
        dict(n=5, topology="erdos-renyi", edge_prob=0.5),
        dict(n=3, topology="explicit"),
        dict(n=2, topology="explicit", weights=np.array([[0, 1.0], [2.0, 0]])),
        dict(n=2, topology="explicit", weights=np.array([[0, -1.0], [-1.0, 0]])),
        dict(n=2, topology="explicit", weights=np.array([[1.0, 1.0], [1.0, 0]])),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        GraphSpec(**kwargs)


def test_unknown_topology():
    with pytest.raises(ValueError):
        GraphSpec(4, "ring")


def test_spec_json_round_trip():
    for spec in (
        GraphSpec(7, Topology.PCYCLE, p=2),
        GraphSpec(9, Topology.ERDOS_RENYI, edge_prob=0.3, seed=11),
        GraphSpec(2, Topology.EXPLICIT, weights=np.array([[0, 1.5], [1.5, 0]])),
    ):
        again = GraphSpec.from_json(spec.to_json())
        np.testing.assert_array_equal(adjacency(again), adjacency(spec))
        assert again.to_dict() == spec.to_dict()


def test_from_dict_missing_field():
    with pytest.raises(InvalidSpec):
        GraphSpec.from_dict({"topology": "star"})


def test_erdos_renyi_is_seeded():
    a = adjacency(GraphSpec(30, Topology.ERDOS_RENYI, edge_prob=0.2, seed=5))
    b = adjacency(GraphSpec(30, Topology.ERDOS_RENYI, edge_prob=0.2, seed=5))
    c = adjacency(GraphSpec(30, Topology.ERDOS_RENYI, edge_prob=0.2, seed=6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 0)


def test_random_connected_graph_respects_delay():
    tau = 0.05
    spec = random_connected_graph(20, 0.5, seed=1, tau=tau)
    sp = spectrum(build_laplacian(spec))
    assert sp.is_connected()
    assert check_stability(sp, tau).stable
    # the returned seed rebuilds the same graph
    again = random_connected_graph(20, 0.5, seed=1, tau=tau)
    assert again.seed == spec.seed


def test_random_connected_graph_gives_up():
    with pytest.raises(RetryExhausted):
        random_connected_graph(40, 0.01, seed=0, max_retries=5)


def test_stability_margin_example():
    sp = spectrum(build_laplacian(GraphSpec(20, Topology.COMPLETE)))
    rep = check_stability(sp, 0.08)
    assert not rep.stable
    assert rep.margin == pytest.approx(math.pi / 40 - 0.08, abs=1e-15)
    assert check_stability(sp, 0.05).stable
    with pytest.raises(InvalidSpec):
        check_stability(sp, -1.0)


@given(st.integers(2, 40))
def test_effective_resistance_complete(n):
    sp = spectrum(build_laplacian(GraphSpec(n, Topology.COMPLETE)))
    assert effective_resistance(sp) == pytest.approx(1.0 / n, rel=1e-12)


def test_effective_resistance_orders_topologies():
    n = 12
    r = {t: effective_resistance(spectrum(build_laplacian(GraphSpec(n, t)))) for t in ("complete", "star", "path")}
    assert r["complete"] < r["star"] < r["path"]


@given(st.integers(2, 20), st.integers(0, 19))
def test_centering_matrix(n, i):
    i %= n
    m = CenteringMatrix(n)
    dense = m.dense()
    np.testing.assert_allclose(dense @ dense, dense, atol=1e-14)
    np.testing.assert_allclose(m.column(i), dense[:, i])
    x = np.arange(n, dtype=float) ** 2
    np.testing.assert_allclose(m.apply(x), dense @ x, atol=1e-12)
    np.testing.assert_allclose(m.apply(np.vstack([x, x])), np.vstack([dense @ x] * 2), atol=1e-12)
