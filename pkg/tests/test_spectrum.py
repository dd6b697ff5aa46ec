import numpy as np
import pytest

from conftest import cycle_graph, random_connected_graph
from fragility.errors import InfiniteMixingError, OracleTooLargeError, ParamError
from fragility.graph import WeightedGraph, graph_from_adjacency
from fragility.spectrum import (
    _tridiag_ql,
    lambda2_dense,
    lambda2_lanczos,
    mixing_time,
)


def complete_graph(n, w=1.0):
    return graph_from_adjacency(w * (np.ones((n, n)) - np.eye(n)))


def test_tridiag_ql_matches_numpy(rng):
    for m in (1, 2, 3, 7, 40):
        d = rng.standard_normal(m)
        e = rng.standard_normal(max(m - 1, 0))
        T = np.diag(d)
        if m > 1:
            T += np.diag(e, 1) + np.diag(e, -1)
        ref = np.linalg.eigvalsh(T)
        vals, Z = _tridiag_ql(d, e, vectors=True)
        assert np.allclose(vals, ref, atol=1e-10)
        assert np.allclose(T @ Z, Z @ np.diag(vals), atol=1e-8)
        assert np.allclose(Z.T @ Z, np.eye(m), atol=1e-10)


def test_cycle_closed_form():
    g = cycle_graph(8)
    result = lambda2_lanczos(g)
    assert result.lambda2 == pytest.approx(2 * (1 - np.cos(2 * np.pi / 8)), rel=1e-12)
    assert result.method == "lanczos"


def test_complete_graph_lambda2_is_n():
    assert lambda2_lanczos(complete_graph(5)).lambda2 == pytest.approx(5.0, rel=1e-10)
    assert lambda2_dense(complete_graph(5)).lambda2 == pytest.approx(5.0, rel=1e-10)


def test_two_disjoint_triangles_disconnected():
    A = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        A[i, j] = A[j, i] = 1.0
    g = graph_from_adjacency(A)
    result = lambda2_lanczos(g)
    assert result.lambda2 == 0.0
    assert result.disconnected
    assert abs(result.fiedler.sum()) <= 1e-10
    assert np.linalg.norm(result.fiedler) == pytest.approx(1.0, abs=1e-12)


def test_dense_path_p3():
    A = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    result = lambda2_dense(graph_from_adjacency(A))
    assert result.lambda2 == pytest.approx(1.0, rel=1e-12)
    assert result.method == "dense"


def test_dense_single_edge():
    for w in (1.0, 3.5):
        g = graph_from_adjacency(np.array([[0.0, w], [w, 0.0]]))
        assert lambda2_dense(g).lambda2 == pytest.approx(2 * w, rel=1e-12)


def test_lanczos_dense_agree_on_random_graph(rng):
    g = random_connected_graph(rng, 50)
    a = lambda2_lanczos(g)
    b = lambda2_dense(g)
    assert a.lambda2 == pytest.approx(b.lambda2, rel=1e-8)
    assert abs(a.fiedler @ b.fiedler) > 1 - 1e-8


def test_fiedler_contract(rng):
    g = random_connected_graph(rng, 40)
    for result in (lambda2_lanczos(g), lambda2_dense(g)):
        v = result.fiedler
        assert abs(v.sum()) / np.sqrt(g.n) <= 1e-10
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        nz = v[np.abs(v) > 1e-12 * np.abs(v).max()]
        assert nz[0] > 0  # deterministic sign convention
        # Rayleigh quotient consistency
        assert abs(v @ (g.laplacian @ v) - result.lambda2) <= 1e-8 * result.lambda2
        # eigenvalues_low sorted ascending, leading zero
        assert np.all(np.diff(result.eigenvalues_low) >= -1e-12)
        assert abs(result.eigenvalues_low[0]) <= 1e-8


def test_variational_minimality(rng):
    g = random_connected_graph(rng, 30)
    lam = lambda2_dense(g).lambda2
    ones = np.full(g.n, 1 / np.sqrt(g.n))
    for _ in range(200):
        x = rng.standard_normal(g.n)
        x -= ones * (ones @ x)
        x /= np.linalg.norm(x)
        assert x @ (g.laplacian @ x) >= lam - 1e-8


def test_scale_equivariance(rng):
    g = random_connected_graph(rng, 25)
    base = lambda2_lanczos(g).lambda2
    for c in (0.5, 2.0, 10.0):
        scaled = graph_from_adjacency(c * g.adjacency)
        assert lambda2_lanczos(scaled).lambda2 == pytest.approx(c * base, rel=1e-10)


def test_monotone_under_edge_addition(rng):
    for _ in range(100):
        n = int(rng.integers(5, 15))
        g = random_connected_graph(rng, n, p=0.2)
        lam = lambda2_dense(g).lambda2
        A = g.adjacency.copy()
        zeros = np.argwhere(np.triu(A == 0, k=1))
        if len(zeros) == 0:
            continue
        i, j = zeros[rng.integers(0, len(zeros))]
        A[i, j] = A[j, i] = rng.random() + 0.1
        lam2 = lambda2_dense(graph_from_adjacency(A)).lambda2
        assert lam2 >= lam - 1e-9


def test_restarts_recover_from_bad_seed(rng):
    # every seed must converge; exercise several to hit varied start vectors
    g = random_connected_graph(rng, 35)
    ref = lambda2_dense(g).lambda2
    for seed in range(8):
        assert lambda2_lanczos(g, seed=seed).lambda2 == pytest.approx(ref, rel=1e-8)


def test_dense_oracle_size_guard():
    n = 2001
    fake = WeightedGraph(
        node_ids=tuple(str(k) for k in range(n)),
        total_exposure=np.zeros((1, 1)),
        adjacency=np.zeros((1, 1)),
        degree=np.zeros(1),
        laplacian=np.zeros((1, 1)),
    )
    with pytest.raises(OracleTooLargeError):
        lambda2_dense(fake)


def test_single_node_rejected():
    g = graph_from_adjacency(np.zeros((1, 1)))
    with pytest.raises(ParamError):
        lambda2_lanczos(g)


def test_mixing_time_reciprocal():
    assert mixing_time(1.0) == 1.0
    assert mixing_time(1719.0) == pytest.approx(5.817e-4, rel=1e-3)
    assert mixing_time(7151.0) == pytest.approx(1.398e-4, rel=1e-3)
    with pytest.raises(InfiniteMixingError):
        mixing_time(0.0)
