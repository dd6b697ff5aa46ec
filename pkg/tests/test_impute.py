import numpy as np
import pytest

from fragility.errors import DegenerateProblemError, InfeasibleError, ParamError
from fragility.impute import ImputationProblem, entropy_closed_form, ras_impute


def random_feasible_problem(rng, n, mask_fraction=0.5, zero_diagonal=True):
    """Ground-truth matrix, half the cells observed; the truth itself is a
    feasible completion by construction."""
    M = rng.random((n, n)) + 1e-3
    np.fill_diagonal(M, 0.0)
    cells = [(i, j) for i in range(n) for j in range(n) if i != j]
    rng.shuffle(cells)
    k = int(len(cells) * mask_fraction)
    observed = tuple((i, j, M[i, j]) for i, j in cells[:k])
    problem = ImputationProblem(
        observed=observed,
        row_targets=M.sum(axis=1),
        col_targets=M.sum(axis=0),
        zero_diagonal=zero_diagonal,
    )
    return problem, M


def test_closed_form_uniform():
    seed = entropy_closed_form(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
    assert seed[0, 1] == pytest.approx(0.5)
    assert seed[1, 0] == pytest.approx(0.5)
    assert seed[0, 0] == 0.0


def test_closed_form_single_feasible_cell():
    seed = entropy_closed_form(np.array([2.0, 0.0]), np.array([0.0, 2.0]))
    assert seed[0, 1] == pytest.approx(2.0)
    assert seed[1, 0] == 0.0


def test_closed_form_product_formula():
    seed = entropy_closed_form(np.array([3.0, 1.0]), np.array([2.0, 2.0]))
    # product formula row_i * col_j / total with the diagonal zeroed
    assert seed[0, 1] == pytest.approx(1.5)
    assert seed[1, 0] == pytest.approx(0.5)
    assert np.all(np.diag(seed) == 0)


def test_closed_form_zero_total():
    with pytest.raises(DegenerateProblemError):
        entropy_closed_form(np.zeros(3), np.zeros(3))


def test_unobserved_marginals_match(rng):
    n = 6
    M = rng.random((n, n)) + 0.1
    np.fill_diagonal(M, 0.0)
    problem = ImputationProblem(observed=(), row_targets=M.sum(axis=1), col_targets=M.sum(axis=0))
    result = ras_impute(problem)
    assert result.converged
    scale = np.maximum(1.0, problem.row_targets)
    assert np.max(np.abs(result.matrix.sum(axis=1) - problem.row_targets) / scale) <= 1e-8
    assert np.max(np.abs(result.matrix.sum(axis=0) - problem.col_targets) / scale) <= 1e-8


def test_two_by_two_matches_brute_force(rng):
    # with a zero diagonal the 2x2 completion is fully determined; compare
    # against a brute-force grid minimizing marginal deviation
    a, b = 2.0, 3.0
    problem = ImputationProblem(
        observed=(), row_targets=np.array([a, b]), col_targets=np.array([b, a])
    )
    result = ras_impute(problem)
    grid = np.linspace(0, 5, 2001)
    best, best_dev = None, np.inf
    for e01 in grid:
        for e10 in grid[:: 40]:
            dev = max(abs(e01 - a), abs(e10 - b), abs(e10 - b), abs(e01 - a))
            if dev < best_dev:
                best, best_dev = (e01, e10), dev
    assert result.matrix[0, 1] == pytest.approx(best[0], abs=5e-3)
    assert result.matrix[1, 0] == pytest.approx(best[1], abs=5e-3)


def test_pinning_closed_form_value_is_noop(rng):
    row = rng.random(5) + 0.5
    col = np.array(sorted(row, reverse=True))  # same total
    free = ImputationProblem(observed=(), row_targets=row, col_targets=col, zero_diagonal=False)
    seed_value = row[0] * col[1] / row.sum()
    pinned = ImputationProblem(
        observed=((0, 1, seed_value),), row_targets=row, col_targets=col, zero_diagonal=False
    )
    res_free = ras_impute(free)
    res_pinned = ras_impute(pinned)
    assert np.allclose(res_free.matrix, res_pinned.matrix, atol=1e-12)


def test_feasible_problems_converge_observed_bit_exact(rng):
    for _ in range(25):
        n = int(rng.integers(4, 30))
        problem, _ = random_feasible_problem(rng, n)
        result = ras_impute(problem)
        assert result.converged
        assert result.max_marginal_deviation <= 1e-8
        for i, j, v in problem.observed:
            assert result.matrix[i, j] == v  # bit-exact


def test_deviation_monotone_over_sweeps(rng):
    for _ in range(100):
        n = int(rng.integers(4, 20))
        problem, _ = random_feasible_problem(rng, n)
        result = ras_impute(problem)
        hist = np.array(result.deviation_history)
        if hist.size > 1:
            assert np.all(np.diff(hist) <= 1e-12)


def test_one_sweep_seed_property_unconstrained_diagonal(rng):
    row = rng.random(8) + 0.5
    col = np.array(sorted(row))
    problem = ImputationProblem(observed=(), row_targets=row, col_targets=col, zero_diagonal=False)
    result = ras_impute(problem)
    assert result.iterations <= 1
    assert result.max_marginal_deviation <= 1e-12


def test_column_pass_exact_after_sweep(rng):
    problem, _ = random_feasible_problem(rng, 8)
    result = ras_impute(
        ImputationProblem(
            observed=problem.observed,
            row_targets=problem.row_targets,
            col_targets=problem.col_targets,
            max_iterations=1,
        )
    )
    pinned = np.zeros((8, 8))
    for i, j, v in problem.observed:
        pinned[i, j] = v
    free_part = result.matrix - pinned
    col_residual = problem.col_targets - pinned.sum(axis=0)
    # the sweep ends on a column pass, so free-cell column sums are exact
    assert np.allclose(free_part.sum(axis=0), col_residual, atol=1e-10 * max(1.0, col_residual.max()))


def test_observed_value_above_target_rejected():
    with pytest.raises(ParamError):
        ImputationProblem(
            observed=((0, 1, 5.0),),
            row_targets=np.array([1.0, 4.0]),
            col_targets=np.array([4.0, 1.0]),
        )


def test_pinned_sum_above_target_infeasible():
    # each value fits its targets but their row sum exceeds the row target
    with pytest.raises(InfeasibleError) as exc_info:
        ras_impute(
            ImputationProblem(
                observed=((0, 1, 2.0), (0, 2, 2.0)),
                row_targets=np.array([3.0, 2.0, 2.0]),
                col_targets=np.array([3.0, 2.0, 2.0]),
                labels=("r0", "r1", "r2"),
            )
        )
    assert exc_info.value.label == "r0"


def test_stranded_residual_infeasible():
    # row 0 fully pinned below its target: no free cell can absorb the rest
    with pytest.raises(InfeasibleError):
        ras_impute(
            ImputationProblem(
                observed=((0, 1, 1.0), (0, 2, 1.0)),
                row_targets=np.array([4.0, 1.0, 1.0]),
                col_targets=np.array([4.0, 1.0, 1.0]),
            )
        )


def test_global_adding_up_enforced():
    with pytest.raises(ParamError):
        ImputationProblem(observed=(), row_targets=np.array([1.0, 2.0]), col_targets=np.array([1.0, 1.0]))


def test_non_convergence_reported(rng):
    problem, _ = random_feasible_problem(rng, 12)
    strict = ImputationProblem(
        observed=problem.observed,
        row_targets=problem.row_targets,
        col_targets=problem.col_targets,
        tolerance=1e-15,
        max_iterations=2,
    )
    result = ras_impute(strict)
    assert not result.converged
    assert result.iterations == 2
