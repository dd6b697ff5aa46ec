"""Algebraic connectivity and Fiedler vector of graph Laplacians.

Two routes are provided: a Lanczos iteration with full reorthogonalization,
deflated against the known all-ones null vector (the production path), and a
dense eigendecomposition used as an independent verification oracle for small
matrices. The Lanczos tridiagonal reduction is resolved with a self-contained
implicit-shift QL routine so the iterative path shares no eigensolver code
with the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteMixingError, OracleTooLargeError, ParamError, SolverFailureError
from .graph import WeightedGraph, _component_labels

DENSE_LIMIT = 2000

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class SpectrumResult:
    """Small end of a Laplacian spectrum plus solver diagnostics.

    ``fiedler`` is unit norm, orthogonal to the all-ones vector, with its
    first nonzero component positive. ``eigenvalues_low`` are the smallest
    eigenvalues ascending, led by the (exact) zero of the null space.
    """

    lambda2: float
    fiedler: np.ndarray
    eigenvalues_low: np.ndarray
    iterations: int
    residual: float
    method: str
    disconnected: bool = False


def _fix_sign(v: np.ndarray) -> np.ndarray:
    scale = np.abs(v).max()
    if scale == 0:
        return v
    for x in v:
        if abs(x) > 1e-12 * scale:
            return v if x > 0 else -v
    return v


def _tridiag_ql(diag: np.ndarray, off: np.ndarray, vectors: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Eigenvalues (and optionally eigenvectors) of a symmetric tridiagonal matrix
    by the implicit-shift QL algorithm. Returns values ascending."""
    m = diag.size
    d = [float(x) for x in diag]
    e = [float(x) for x in off] + [0.0]
    z = np.eye(m) if vectors else None
    for l in range(m):
        iterations = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            iterations += 1
            if iterations > 60:
                raise SolverFailureError("tridiagonal QL did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if vectors:
                    col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * col
                    z[:, i] = c * z[:, i] - s * col
            if not underflow:
                d[l] -= p
                e[l] = g
                e[mm] = 0.0
    values = np.array(d)
    order = np.argsort(values, kind="stable")
    if vectors:
        return values[order], z[:, order]
    return values[order], None


def _smallest_ritz(diag: list[float], off: list[float], hi: float, tol: float) -> float:
    """Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.

    ``hi`` must be a known upper bound (Cauchy interlacing makes the previous
    step's value valid). Cheaper than QL when only the extreme value is needed.
    """
    m = len(diag)
    if m == 1:
        return diag[0]
    lo = diag[0] - abs(off[0])
    for i in range(1, m):
        radius = abs(off[i - 1]) + (abs(off[i]) if i < m - 1 else 0.0)
        lo = min(lo, diag[i] - radius)
    hi = min(hi, max(diag[i] + (abs(off[i - 1]) if i else 0.0) + (abs(off[i]) if i < m - 1 else 0.0) for i in range(m)))
    while hi - lo > tol:
        x = 0.5 * (lo + hi)
        # count eigenvalues below x via the LDL^T recurrence
        t = diag[0] - x
        count = 1 if t < 0 else 0
        for i in range(1, m):
            if t == 0.0:
                t = 1e-300
            t = diag[i] - x - off[i - 1] * off[i - 1] / t
            if t < 0:
                count += 1
        if count >= 1:
            hi = x
        else:
            lo = x
    return 0.5 * (lo + hi)


def _disconnected_result(g: WeightedGraph, labels: np.ndarray, method: str, n_low: int) -> SpectrumResult:
    n = g.n
    k = int(np.count_nonzero(labels == labels[0]))
    v = np.empty(n)
    a = math.sqrt((n - k) / (n * k))
    b = -math.sqrt(k / (n * (n - k)))
    v[labels == labels[0]] = a
    v[labels != labels[0]] = b
    low = np.zeros(min(n_low, n))
    return SpectrumResult(
        lambda2=0.0,
        fiedler=_fix_sign(v),
        eigenvalues_low=low,
        iterations=0,
        residual=float(np.linalg.norm(g.laplacian @ v)),
        method=method,
        disconnected=True,
    )


def lambda2_lanczos(
    g: WeightedGraph,
    tol: float = 1e-10,
    max_iter: int | None = None,
    n_low: int = 6,
    seed: int = 0,
) -> SpectrumResult:
    """Algebraic connectivity via Lanczos on the complement of the all-ones vector.

    The start vector is deflated against the normalized all-ones vector and the
    basis is re-deflated and fully reorthogonalized at every step, so the
    smallest Ritz value of the tridiagonal matrix approximates lambda-2
    directly. Convergence is declared when the explicit residual
    ``||L v - lambda v||`` drops below ``tol`` times the Laplacian scale
    (max diagonal entry, floored at 1). On breakdown before convergence the
    iteration restarts from a fresh random vector, up to 3 restarts.

    Disconnected graphs return lambda2 = 0 with the ``disconnected`` flag set.
    """
    L = np.asarray(g.laplacian, dtype=float)
    n = g.n
    if n < 2:
        raise ParamError("need at least two nodes")
    ncomp, labels = _component_labels(g.adjacency)
    if ncomp > 1:
        return _disconnected_result(g, labels, "lanczos", n_low)
    scale = max(1.0, float(np.abs(np.diag(L)).max()))
    threshold = tol * scale
    if max_iter is None:
        max_iter = 5 * n
    m_cap = min(n - 1, max_iter)
    ones = np.full(n, 1.0 / math.sqrt(n))
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5EC7)))
    steps_total = 0

    check_every = 1 if n <= 32 else 4
    for _attempt in range(4):
        V = np.empty((n, m_cap))
        alphas: list[float] = []
        betas: list[float] = []
        v = rng.standard_normal(n)
        v -= ones * (ones @ v)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        V[:, 0] = v / norm
        theta_prev = math.inf
        last_extract = -10
        for j in range(m_cap):
            steps_total += 1
            w = L @ V[:, j]
            alpha = float(V[:, j] @ w)
            alphas.append(alpha)
            w -= alpha * V[:, j]
            if j > 0:
                w -= betas[-1] * V[:, j - 1]
            # deflation + full reorthogonalization, twice for safety
            for _ in range(2):
                w -= ones * (ones @ w)
                w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
            beta = float(np.linalg.norm(w))
            exhausted = j == m_cap - 1
            breakdown = beta <= 1e3 * _EPS * scale

            stabilized = False
            if (j + 1) % check_every == 0 or breakdown or exhausted:
                theta_min = _smallest_ritz(alphas, betas, theta_prev, 0.001 * threshold)
                stabilized = abs(theta_min - theta_prev) <= 0.01 * threshold
                theta_prev = min(theta_prev, theta_min)
            wants_extract = (stabilized and j - last_extract >= 4) or (j + 1) % 32 == 0
            if wants_extract or breakdown or exhausted:
                last_extract = j
                values, Z = _tridiag_ql(np.array(alphas), np.array(betas), vectors=True)
                y = V[:, : j + 1] @ Z[:, 0]
                y -= ones * (ones @ y)
                y /= np.linalg.norm(y)
                lam = float(y @ (L @ y))
                residual = float(np.linalg.norm(L @ y - lam * y))
                if residual <= threshold:
                    k = min(n_low - 1, values.size)
                    low = np.concatenate(([0.0], values[:k]))[:n_low]
                    return SpectrumResult(
                        lambda2=lam,
                        fiedler=_fix_sign(y),
                        eigenvalues_low=low,
                        iterations=steps_total,
                        residual=residual,
                        method="lanczos",
                    )
            if breakdown or exhausted:
                break  # restart with a fresh start vector
            betas.append(beta)
            V[:, j + 1] = w / beta
    raise SolverFailureError(
        f"Lanczos failed to reach residual {threshold:.3e} after {steps_total} steps and 3 restarts"
    )


def lambda2_dense(g: WeightedGraph, n_low: int = 6) -> SpectrumResult:
    """Dense-eigendecomposition oracle for lambda-2 and the Fiedler vector.

    Guarded at n <= 2000; larger graphs must use :func:`lambda2_lanczos`.
    """
    n = g.n
    if n < 2:
        raise ParamError("need at least two nodes")
    if n > DENSE_LIMIT:
        raise OracleTooLargeError(f"n = {n} exceeds dense limit {DENSE_LIMIT}; use lambda2_lanczos")
    ncomp, labels = _component_labels(g.adjacency)
    if ncomp > 1:
        return _disconnected_result(g, labels, "dense", n_low)
    L = np.asarray(g.laplacian, dtype=float)
    values, vectors = np.linalg.eigh(L)
    lam = float(values[1])
    ones = np.full(n, 1.0 / math.sqrt(n))
    v = vectors[:, 1]
    v = v - ones * (ones @ v)
    v /= np.linalg.norm(v)
    residual = float(np.linalg.norm(L @ v - lam * v))
    low = values[: min(n_low, n)].copy()
    low[0] = 0.0
    return SpectrumResult(
        lambda2=lam,
        fiedler=_fix_sign(v),
        eigenvalues_low=low,
        iterations=0,
        residual=residual,
        method="dense",
    )


def algebraic_connectivity(g: WeightedGraph, **kwargs) -> SpectrumResult:
    """Dense route when it fits, Lanczos otherwise."""
    if g.n <= DENSE_LIMIT:
        return lambda2_dense(g, n_low=kwargs.get("n_low", 6))
    return lambda2_lanczos(g, **kwargs)


def mixing_time(lambda2: float) -> float:
    """Characteristic shock-equilibration time, 1 / lambda2 (dimensionless:
    unit attachment is the caller's concern)."""
    if lambda2 <= 0:
        raise InfiniteMixingError("lambda2 <= 0: network disconnected, mixing time infinite")
    return 1.0 / lambda2
