"""Maximum-entropy completion of partially observed exposure matrices.

Free cells start from the product seed row_i * col_j / total and are then
alternately rescaled to match row and column targets (RAS / iterative
proportional fitting). Observed cells and the diagonal are pinned: scaling
acts on free cells only, against targets net of the pinned mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProblemError, InfeasibleError, ParamError

#: relative slack used by feasibility pre-checks
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ImputationProblem:
    """Marginal targets plus pinned cells for one quarter's exposure matrix."""

    observed: tuple[tuple[int, int, float], ...]
    row_targets: np.ndarray
    col_targets: np.ndarray
    tolerance: float = 1e-8
    max_iterations: int = 10_000
    zero_diagonal: bool = True
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        row = np.asarray(self.row_targets, dtype=float)
        col = np.asarray(self.col_targets, dtype=float)
        object.__setattr__(self, "row_targets", row)
        object.__setattr__(self, "col_targets", col)
        object.__setattr__(self, "observed", tuple((int(i), int(j), float(v)) for i, j, v in self.observed))
        if row.ndim != 1 or col.ndim != 1 or row.size != col.size:
            raise ParamError("row and column targets must be vectors of equal length")
        if self.tolerance <= 0 or self.max_iterations <= 0:
            raise ParamError("tolerance and max_iterations must be positive")
        if np.any(row < 0) or np.any(col < 0):
            raise ParamError("targets must be nonnegative")
        total_row, total_col = row.sum(), col.sum()
        if abs(total_row - total_col) > self.tolerance * max(1.0, total_row, total_col):
            raise ParamError(
                f"global adding-up violated: sum(row_targets)={total_row!r} != sum(col_targets)={total_col!r}"
            )
        seen: set[tuple[int, int]] = set()
        for i, j, v in self.observed:
            if not (0 <= i < row.size and 0 <= j < row.size):
                raise ParamError(f"observed cell ({i}, {j}) out of range")
            if (i, j) in seen:
                raise ParamError(f"duplicate observed cell ({i}, {j})")
            seen.add((i, j))
            if v < 0:
                raise ParamError(f"observed cell ({i}, {j}) is negative")
            if v > row[i] * (1 + _FEAS_TOL) + _FEAS_TOL or v > col[j] * (1 + _FEAS_TOL) + _FEAS_TOL:
                raise ParamError(f"observed cell ({i}, {j}) exceeds its row or column target")
            if self.zero_diagonal and i == j and v != 0:
                raise ParamError(f"observed diagonal cell ({i}, {i}) must be zero")

    @property
    def n(self) -> int:
        return self.row_targets.size

    def label(self, k: int) -> str:
        return self.labels[k] if self.labels is not None else str(k)


@dataclass(frozen=True)
class ImputationResult:
    matrix: np.ndarray
    iterations: int
    max_marginal_deviation: float
    converged: bool
    deviation_history: tuple[float, ...] = field(default=(), repr=False)


def entropy_closed_form(row_targets: np.ndarray, col_targets: np.ndarray) -> np.ndarray:
    """Product seed E_ij = row_i * col_j / total with the diagonal zeroed.

    This is the unconstrained maximum-entropy completion; zeroing the diagonal
    breaks the marginals, so the output is the seed RAS starts from rather
    than a finished matrix.
    """
    row = np.asarray(row_targets, dtype=float)
    col = np.asarray(col_targets, dtype=float)
    total = row.sum()
    if total <= 0:
        raise DegenerateProblemError("targets carry no mass")
    if abs(total - col.sum()) > 1e-8 * max(1.0, total):
        raise ParamError("row and column targets must share the same total")
    seed = np.outer(row, col) / total
    np.fill_diagonal(seed, 0.0)
    return seed


def _deviation(matrix: np.ndarray, row_targets: np.ndarray, col_targets: np.ndarray) -> float:
    row_dev = np.abs(matrix.sum(axis=1) - row_targets) / np.maximum(1.0, row_targets)
    col_dev = np.abs(matrix.sum(axis=0) - col_targets) / np.maximum(1.0, col_targets)
    return float(max(row_dev.max(), col_dev.max()))


def _check_feasible(problem: ImputationProblem, pinned: np.ndarray, free: np.ndarray) -> None:
    pinned_row = pinned.sum(axis=1)
    pinned_col = pinned.sum(axis=0)
    for axis, pinned_mass, targets in (("row", pinned_row, problem.row_targets), ("column", pinned_col, problem.col_targets)):
        over = pinned_mass - targets * (1 + _FEAS_TOL) - _FEAS_TOL
        if np.any(over > 0):
            k = int(np.argmax(over))
            raise InfeasibleError(
                f"pinned mass {pinned_mass[k]!r} exceeds {axis} target {targets[k]!r} for {problem.label(k)}",
                axis=axis,
                label=problem.label(k),
            )
        residual = targets - pinned_mass
        has_free = free.any(axis=1) if axis == "row" else free.any(axis=0)
        stranded = (residual > _FEAS_TOL * np.maximum(1.0, targets)) & ~has_free
        if np.any(stranded):
            k = int(np.argmax(stranded))
            raise InfeasibleError(
                f"{axis} {problem.label(k)} has residual target {residual[k]!r} but no free cells",
                axis=axis,
                label=problem.label(k),
            )


def ras_impute(problem: ImputationProblem) -> ImputationResult:
    """Complete a matrix by RAS iteration over the free cells.

    Observed cells are bit-exact fixed points; the diagonal is pinned at zero
    unless ``problem.zero_diagonal`` is off. Stops when the maximum relative
    marginal deviation drops below ``problem.tolerance``, else returns
    ``converged=False`` after ``problem.max_iterations`` sweeps.
    """
    n = problem.n
    pinned = np.zeros((n, n))
    pinned_mask = np.zeros((n, n), dtype=bool)
    for i, j, v in problem.observed:
        pinned[i, j] = v
        pinned_mask[i, j] = True
    if problem.zero_diagonal:
        np.fill_diagonal(pinned_mask, True)
        np.fill_diagonal(pinned, 0.0)
    free = ~pinned_mask
    _check_feasible(problem, pinned, free)

    total = problem.row_targets.sum()
    if total <= 0:
        raise DegenerateProblemError("targets carry no mass")
    seed = np.outer(problem.row_targets, problem.col_targets) / total
    X = np.where(free, seed, 0.0)

    row_residual = problem.row_targets - pinned.sum(axis=1)
    col_residual = problem.col_targets - pinned.sum(axis=0)
    row_residual = np.maximum(row_residual, 0.0)
    col_residual = np.maximum(col_residual, 0.0)

    history: list[float] = []
    deviation = _deviation(X + pinned, problem.row_targets, problem.col_targets)
    converged = deviation < problem.tolerance
    sweeps = 0
    while not converged and sweeps < problem.max_iterations:
        sweeps += 1
        row_sums = X.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.where(row_sums > 0, row_residual / np.where(row_sums > 0, row_sums, 1.0), 1.0)
        X *= factors[:, None]
        col_sums = X.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.where(col_sums > 0, col_residual / np.where(col_sums > 0, col_sums, 1.0), 1.0)
        X *= factors[None, :]
        deviation = _deviation(X + pinned, problem.row_targets, problem.col_targets)
        history.append(deviation)
        converged = deviation < problem.tolerance

    result = X + pinned
    for i, j, v in problem.observed:
        result[i, j] = v  # bit-exact restore
    if problem.zero_diagonal:
        np.fill_diagonal(result, 0.0)
    return ImputationResult(
        matrix=result,
        iterations=sweeps,
        max_marginal_deviation=deviation,
        converged=converged,
        deviation_history=tuple(history),
    )
