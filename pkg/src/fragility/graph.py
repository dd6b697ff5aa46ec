"""Network construction: normalized adjacency, degree, Laplacian, summary statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DegenerateNetworkError, ParamError, ShapeError
from .exposures import Institution

if TYPE_CHECKING:
    from .spectrum import SpectrumResult

NORMALIZATIONS = ("geometric_mean", "arithmetic_mean", "max", "asset_weighted", "binary", "log", "sqrt")

#: sentinel for avg_path_length on graphs where every component is a single node
PATH_LENGTH_UNDEFINED = float("nan")


@dataclass(frozen=True)
class WeightedGraph:
    """One quarter's network: raw exposures plus normalized adjacency and Laplacian."""

    node_ids: tuple[str, ...]
    total_exposure: np.ndarray
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    dropped_nodes: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def index_of(self, node_id: str) -> int:
        return self.node_ids.index(node_id)


@dataclass(frozen=True)
class NetworkStats:
    lambda2: float
    n_banks: int
    density: float
    avg_path_length: float
    clustering: float
    herfindahl: float
    avg_bilateral_count: float
    system_leverage: float
    connected: bool


def _component_labels(adjacency: np.ndarray) -> tuple[int, np.ndarray]:
    sparse = csr_matrix((adjacency > 0).astype(np.int8))
    return connected_components(sparse, directed=False)


def is_connected(g: WeightedGraph) -> bool:
    ncomp, _ = _component_labels(g.adjacency)
    return ncomp == 1


def graph_from_adjacency(
    adjacency: np.ndarray,
    node_ids: Sequence[str] | None = None,
    total_exposure: np.ndarray | None = None,
) -> WeightedGraph:
    """Wrap a symmetric nonnegative weight matrix as a WeightedGraph.

    Used for synthetic graphs and counterfactuals where weights are given
    directly rather than derived from exposures; ``total_exposure`` defaults
    to the adjacency itself.
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("adjacency must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(A).max(initial=0.0)))):
        raise ParamError("adjacency must be symmetric")
    if np.any(A < 0):
        raise ParamError("adjacency weights must be nonnegative")
    A = (A + A.T) / 2.0
    np.fill_diagonal(A, 0.0)
    n = A.shape[0]
    ids = tuple(node_ids) if node_ids is not None else tuple(f"N{k:03d}" for k in range(n))
    if len(ids) != n:
        raise ShapeError("node_ids length does not match adjacency")
    E = A.copy() if total_exposure is None else np.asarray(total_exposure, dtype=float)
    d = A.sum(axis=1)
    L = np.diag(d) - A
    return WeightedGraph(node_ids=ids, total_exposure=E, adjacency=A, degree=d, laplacian=L)


def build_graph(
    E: np.ndarray,
    normalization: str = "geometric_mean",
    threshold_quantile: float | None = None,
    node_ids: Sequence[str] | None = None,
    assets: np.ndarray | None = None,
) -> WeightedGraph:
    """Normalize a total-exposure matrix into a symmetric weighted graph.

    Parameters
    ----------
    E : square nonnegative matrix with zero diagonal (lender rows, borrower columns).
    normalization : one of ``geometric_mean`` (baseline, E_ij / sqrt(out_i * in_j)),
        ``arithmetic_mean``, ``max``, ``asset_weighted``, ``binary``, ``log``, ``sqrt``.
    threshold_quantile : if set, zero out edges strictly below this quantile of the
        nonzero exposure weights before normalizing (``0.9`` keeps the top 10%).
    assets : per-node assets, required by ``asset_weighted``.

    The adjacency is symmetrized (A + A^T)/2 after normalization; fully isolated
    nodes are dropped with a warning and reported in ``dropped_nodes``.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ShapeError("exposure matrix must be square")
    if np.any(E < 0):
        raise ParamError("exposures must be nonnegative")
    if np.any(np.diag(E) != 0):
        raise ParamError("exposure matrix must have a zero diagonal")
    if normalization not in NORMALIZATIONS:
        raise ParamError(f"unknown normalization {normalization!r}; choose from {NORMALIZATIONS}")
    n_in = E.shape[0]
    ids = tuple(node_ids) if node_ids is not None else tuple(f"N{k:03d}" for k in range(n_in))
    if len(ids) != n_in:
        raise ShapeError("node_ids length does not match matrix")
    if assets is not None:
        assets = np.asarray(assets, dtype=float)
        if assets.shape != (n_in,):
            raise ShapeError("assets length does not match matrix")

    E = E.copy()
    if threshold_quantile is not None:
        if not 0 <= threshold_quantile < 1:
            raise ParamError("threshold_quantile must lie in [0, 1)")
        nonzero = E[E > 0]
        if nonzero.size:
            cutoff = np.quantile(nonzero, threshold_quantile)
            E[E < cutoff] = 0.0

    if not np.any(E > 0):
        raise DegenerateNetworkError("exposure matrix has no nonzero entries")

    # drop nodes with no exposure in either direction
    out_sum = E.sum(axis=1)
    in_sum = E.sum(axis=0)
    keep = (out_sum + in_sum) > 0
    dropped = tuple(ids[k] for k in np.flatnonzero(~keep))
    if dropped:
        warnings.warn(f"dropping {len(dropped)} isolated node(s): {', '.join(dropped)}", stacklevel=2)
        E = E[np.ix_(keep, keep)]
        ids = tuple(ids[k] for k in np.flatnonzero(keep))
        if assets is not None:
            assets = assets[keep]
        out_sum = E.sum(axis=1)
        in_sum = E.sum(axis=0)

    with np.errstate(divide="ignore", invalid="ignore"):
        if normalization == "geometric_mean":
            denom = np.sqrt(np.outer(out_sum, in_sum))
            A = np.where(E > 0, E / denom, 0.0)
        elif normalization == "arithmetic_mean":
            denom = (out_sum[:, None] + in_sum[None, :]) / 2.0
            A = np.where(E > 0, E / denom, 0.0)
        elif normalization == "max":
            denom = np.maximum(out_sum[:, None], in_sum[None, :])
            A = np.where(E > 0, E / denom, 0.0)
        elif normalization == "asset_weighted":
            if assets is None:
                raise ParamError("asset_weighted normalization requires per-node assets")
            denom = np.sqrt(np.outer(assets, assets))
            A = np.where(E > 0, E / denom, 0.0)
        elif normalization == "binary":
            A = (E > 0).astype(float)
        elif normalization == "log":
            A = np.log1p(E)
        else:  # sqrt
            A = np.sqrt(E)

    A = np.nan_to_num(A, nan=0.0, posinf=0.0)
    A = (A + A.T) / 2.0
    np.fill_diagonal(A, 0.0)
    d = A.sum(axis=1)
    L = np.diag(d) - A
    return WeightedGraph(
        node_ids=ids, total_exposure=E, adjacency=A, degree=d, laplacian=L, dropped_nodes=dropped
    )


def _mean_shortest_path(adjacency: np.ndarray) -> tuple[float, bool]:
    """Mean unweighted shortest path over ordered pairs, on the largest component
    when the graph is disconnected. Returns (mean, connected_flag)."""
    ncomp, labels = _component_labels(adjacency)
    connected = ncomp == 1
    if not connected:
        sizes = np.bincount(labels)
        keep = labels == int(np.argmax(sizes))
        adjacency = adjacency[np.ix_(keep, keep)]
    m = adjacency.shape[0]
    if m < 2:
        return PATH_LENGTH_UNDEFINED, connected
    dist = shortest_path(csr_matrix((adjacency > 0).astype(np.int8)), method="D", unweighted=True, directed=False)
    off = dist[~np.eye(m, dtype=bool)]
    return float(off.mean()), connected


def _clustering_coefficient(adjacency: np.ndarray) -> float:
    B = (adjacency > 0).astype(float)
    deg = B.sum(axis=1)
    triangles = np.diag(B @ B @ B) / 2.0
    denom = deg * (deg - 1) / 2.0
    local = np.zeros_like(deg)
    mask = denom > 0
    local[mask] = triangles[mask] / denom[mask]
    return float(local.mean())


def compute_stats(
    g: WeightedGraph,
    institutions: Sequence[Institution] | None = None,
    spectrum: "SpectrumResult | None" = None,
) -> NetworkStats:
    """Summary statistics of one quarter's network.

    ``spectrum`` may be passed to reuse an already-computed eigen result;
    otherwise the algebraic connectivity is computed here. ``institutions``
    supply assets/equity for the leverage statistic (NaN when absent).
    """
    if g.n < 2:
        raise ParamError("need at least two nodes")
    if spectrum is None:
        from .spectrum import algebraic_connectivity

        spectrum = algebraic_connectivity(g)
    n = g.n
    B = g.adjacency > 0
    n_edges = int(np.count_nonzero(np.triu(B, k=1)))
    density = 2.0 * n_edges / (n * (n - 1))
    path_len, connected = _mean_shortest_path(g.adjacency)
    clustering = _clustering_coefficient(g.adjacency)

    out_sum = g.total_exposure.sum(axis=1)
    total = out_sum.sum()
    if total > 0:
        shares = out_sum / total
        herfindahl = float((shares**2).sum())
    else:
        herfindahl = 1.0 / n

    avg_bilateral = 2.0 * n_edges / n

    if institutions is not None:
        by_id = {inst.id: inst for inst in institutions}
        try:
            leverage = float(np.mean([by_id[i].leverage for i in g.node_ids]))
        except KeyError as exc:
            raise ParamError(f"no metadata for institution {exc.args[0]!r}") from None
    else:
        leverage = float("nan")

    return NetworkStats(
        lambda2=spectrum.lambda2,
        n_banks=n,
        density=density,
        avg_path_length=path_len,
        clustering=clustering,
        herfindahl=herfindahl,
        avg_bilateral_count=avg_bilateral,
        system_leverage=leverage,
        connected=connected,
    )


def mean_pair_exposure(g: WeightedGraph) -> float:
    """Mean adjacency weight over ordered node pairs (i != j)."""
    n = g.n
    if n < 2:
        raise ParamError("need at least two nodes")
    return float(g.adjacency.sum() / (n * (n - 1)))
