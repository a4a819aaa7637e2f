from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from greenwalk.errors import DivergenceError, ResourceError
from greenwalk.solvers import (EXACT_STATE_CAP, _bareiss_solve, _sparse_fraction_solve, exact_solve,
                               power_iteration, solve_positive)


def substochastic(n, seed, density=0.4):
    rng = np.random.default_rng(seed)
    A = rng.random((n, n)) * (rng.random((n, n)) < density)
    rows = A.sum(axis=1, keepdims=True)
    return A / np.maximum(rows, 1e-12) * 0.9


def test_exact_two_state():
    # k0 = 1 + k1/2, k1 = k0/2  ->  k0 = 4/3, k1 = 2/3
    rows = [{1: Fraction(1, 2)}, {0: Fraction(1, 2)}]
    assert exact_solve(rows, [Fraction(1), Fraction(0)]) == [Fraction(4, 3), Fraction(2, 3)]


def test_exact_singular():
    rows = [{0: Fraction(1)}]
    with pytest.raises(DivergenceError):
        exact_solve(rows, [Fraction(1)])


def test_exact_state_cap():
    with pytest.raises(ResourceError):
        exact_solve([{}] * (EXACT_STATE_CAP + 1), [Fraction(0)] * (EXACT_STATE_CAP + 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10 ** 6))
def test_bareiss_matches_sparse_gauss_jordan(n, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        cols = rng.choice(n, size=min(n, 3), replace=False)
        w = rng.integers(0, 4, size=len(cols))
        rows.append({int(j): Fraction(int(v), 16) for j, v in zip(cols, w) if v})
    b = [Fraction(int(v), 7) for v in rng.integers(0, 5, size=n)]
    got = _bareiss_solve(rows, b)
    assert got == _sparse_fraction_solve([dict(r) for r in rows], b)
    # residual is exactly zero
    for i, r in enumerate(rows):
        assert got[i] - sum((v * got[j] for j, v in r.items()), Fraction(0)) == b[i]


def test_positive_solver_matches_dense():
    A = substochastic(40, 1)
    b = np.linspace(0, 1, 40)
    k = solve_positive(sp.csr_matrix(A), b)
    assert np.allclose(k, np.linalg.solve(np.eye(40) - A, b), rtol=1e-12)
    assert np.all(k >= 0)


def test_positive_solver_detects_divergence():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]) * 1.1)
    with pytest.raises(DivergenceError):
        solve_positive(A, np.ones(2))


def test_power_iteration_bounds():
    A = substochastic(30, 2)
    A = (A + A.T) / 2
    lam, upper = power_iteration(sp.csr_matrix(A))
    top = np.max(np.linalg.eigvalsh(A))
    assert lam <= top * (1 + 1e-12) and upper >= top * (1 - 1e-12)
    assert lam == pytest.approx(top, rel=1e-9)
