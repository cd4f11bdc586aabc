import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import naive_partition_count
from smoothcut.erm_oracle import (
    ErmInfeasible,
    ErmSolution,
    candidate_functions,
    determination_check,
    erm_partition,
    exhaustive_min_clusters,
    solve_subset,
    DegenerateSystem,
    validate_solution,
)
from smoothcut.verify import random_erm_instance


def test_two_slopes_on_the_line():
    sol = erm_partition([[1.0], [2.0], [3.0]], [2.0, 4.0, 9.0], K=2)
    assert sol.n == 2
    assert sorted(map(tuple, sol.clusters)) == [(0, 1), (2,)]
    slopes = sorted(float(g[0]) for g in sol.functions)
    assert slopes == pytest.approx([2.0, 3.0])


def test_single_function_gives_one_cluster():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(6, 2))
    sol = erm_partition(X, X @ [0.7, -1.3], K=3)
    assert sol.n == 1 and sol.clusters == [list(range(6))]
    assert np.allclose(sol.functions[0], [0.7, -1.3])


def test_infeasible_when_k_too_small():
    with pytest.raises(ErmInfeasible):
        erm_partition([[1.0], [2.0]], [1.0, 3.0], K=1)


def test_input_size_is_capped():
    with pytest.raises(ValueError):
        erm_partition(np.ones((5, 1)), np.ones(5), K=2)


def test_empty_input():
    assert erm_partition(np.zeros((0, 2)), [], K=2).n == 0


def test_fewer_points_than_ell():
    sol = erm_partition([[0.3, 0.4]], [1.0], K=2)
    assert sol.n == 1 and sol.clusters == [[0]]
    assert float(np.dot(sol.functions[0], [0.3, 0.4])) == pytest.approx(1.0)


def test_feature_map_pieces():
    feat = lambda x: np.array([1.0, x[0], x[0] ** 2])
    X = np.array([[-1.0], [0.0], [1.0], [2.0], [0.5]])
    y = np.array([1 - 1 + 1, 1.0, 1 + 1 + 1, 1 + 2 + 4, 5.0])
    sol = erm_partition(X, y, K=2, features=feat)
    assert sol.n == 2
    assert [0, 1, 2, 3] in sol.clusters


def test_tie_break_is_deterministic():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([1.0, 4.0, 3.0, 8.0])
    a = erm_partition(X, y, K=2)
    b = erm_partition(X.copy(), y.copy(), K=2)
    assert a.clusters == b.clusters
    assert all(np.array_equal(u, v) for u, v in zip(a.functions, b.functions))


def test_points_at_the_origin_form_one_cluster():
    # every 1-subset is singular, so no candidate is enumerated
    sol = erm_partition([[0.0], [0.0]], [0.0, 0.0], K=1)
    assert sol.n == 1 and sol.clusters == [[0, 1]]


def test_solve_subset_rejects_singular():
    with pytest.raises(DegenerateSystem):
        solve_subset(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 2.0]))


def test_candidate_functions_distinct():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    funcs, masks = candidate_functions(X, X @ [2.0, 3.0], 2, 1e-8)
    assert len(funcs) == 1 and masks == [0b111]


def test_validate_solution_catches_errors():
    Phi = np.array([[1.0], [2.0]])
    y = np.array([1.0, 2.0])
    validate_solution(ErmSolution([np.array([1.0])], [[0, 1]]), Phi, y, 1, 1e-8)
    with pytest.raises(AssertionError):
        validate_solution(ErmSolution([np.array([1.0])], [[0]]), Phi, y, 1, 1e-8)
    with pytest.raises(AssertionError):
        validate_solution(ErmSolution([np.array([2.0])], [[0, 1]]), Phi, y, 1, 1e-8)
    with pytest.raises(AssertionError):
        validate_solution(ErmSolution([np.array([1.0]), np.array([1.0])], [[0], [1]]), Phi, y, 2, 1e-8)
    with pytest.raises(AssertionError):
        validate_solution(ErmSolution([np.array([1.0]), np.array([3.0])], [[0], [1]]), Phi, y, 1, 1e-8)


def test_determination_check():
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert determination_check([1.0, 2.0], [1.0, 2.0 + 1e-12], P)
    assert not determination_check([1.0, 2.0], [1.0, 2.1], P)
    # equal on a degenerate point set does not pin the function down
    assert determination_check([1.0, 2.0], [1.0, 5.0], [[1.0, 0.0]])
    assert determination_check([1.0], [2.0], [])


def test_random_instances_match_two_references():
    rng = np.random.default_rng(123)
    for _ in range(200):
        X, y, K = random_erm_instance(rng, max_m=6)
        naive = naive_partition_count(X, y, K)
        exhaustive = exhaustive_min_clusters(X, y, K)
        assert naive == exhaustive
        try:
            got = erm_partition(X, y, K).n
        except ErmInfeasible:
            got = None
        assert got == naive


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2 ** 32 - 1))
def test_solution_is_valid_partition(seed):
    rng = np.random.default_rng(seed)
    X, y, K = random_erm_instance(rng)
    try:
        sol = erm_partition(X, y, K)
    except ErmInfeasible:
        assert naive_partition_count(X, y, K) is None
        return
    assert sorted(i for c in sol.clusters for i in c) == list(range(len(y)))
    for g, c in zip(sol.functions, sol.clusters):
        assert np.allclose(X[c] @ g, y[c], atol=1e-8 * max(1.0, np.abs(y).max()))
    assert sol.n <= K
