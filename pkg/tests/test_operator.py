import threading

import numpy as np
import pytest
import scipy.sparse as sp

from gramian_rk.errors import StageSolveFailed
from gramian_rk.operator import Operator, max_threads

from conftest import random_stable


@pytest.mark.parametrize("sparse", [False, True])
def test_shifted_solves(rng, sparse):
    A = random_stable(rng, 12)
    op = Operator(sp.csr_matrix(A) if sparse else A)
    C = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    for mu in [0.7, 1 + 2j]:
        X = op.shifted_solve(mu, C)
        assert np.linalg.norm(X - mu * A @ X - C) <= 1e-10 * np.linalg.norm(C)
        Y = op.transpose_shifted_solve(mu, C)
        assert np.linalg.norm(Y - mu * A.T @ Y - C) <= 1e-10 * np.linalg.norm(C)
    W = op.native_shifted_solve(-1 + 0.5j, C)
    assert np.linalg.norm(A @ W + (-1 + 0.5j) * W - C) <= 1e-10 * np.linalg.norm(C)


def test_real_shift_keeps_real(rng):
    op = Operator(random_stable(rng, 6))
    X = op.shifted_solve(2.0, rng.standard_normal((6, 1)))
    assert X.dtype == np.float64


def test_linearity(rng):
    A = random_stable(rng, 8)
    op = Operator(A)
    x, y = rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_allclose(op.apply(x + y), op.apply(x) + op.apply(y), atol=1e-13)


def test_cache_reuse(rng):
    op = Operator(random_stable(rng, 10))
    b = rng.standard_normal((10, 1))
    op.shifted_solve(1 + 1j, b)
    op.shifted_solve(1 + 1j, b)
    op.transpose_shifted_solve(1 + 1j, b)
    assert op.factorizations == 1
    op.prefactor([1 + 1j, 2.0, 2.0 + 1e-16, 3.0])
    assert op.factorizations == 3


def test_concurrent_prefactor(rng, monkeypatch):
    monkeypatch.setenv("GRAMIAN_RK_THREADS", "3")
    assert max_threads() == 3
    op = Operator(random_stable(rng, 30))
    op.prefactor([0.5 + k * 1j for k in range(8)])
    assert op.factorizations == 8
    b = rng.standard_normal((30, 1))
    out = {}

    def work(k):
        out[k] = op.shifted_solve(0.5 + k * 1j, b)

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert op.factorizations == 8
    for k, X in out.items():
        np.testing.assert_allclose(X, op.shifted_solve(0.5 + k * 1j, b))


def test_singular_shift():
    op = Operator(np.diag([-1.0, -2.0]))
    with pytest.raises(StageSolveFailed):
        op.shifted_solve(-1.0, np.ones((2, 1)))


def test_symmetry_detection(rng):
    M = rng.standard_normal((5, 5))
    assert Operator(M + M.T).symmetric
    assert not Operator(M - M.T + np.eye(5)).symmetric


def test_rejects_non_square():
    with pytest.raises(ValueError):
        Operator(np.ones((2, 3)))
