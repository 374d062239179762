"""Dense reference computations used to check the low-rank solvers.

Everything here is meant for small problems: vectorized Kronecker solves of
the Lyapunov and Sylvester equations, the fully coupled stage system of an
implicit Runge-Kutta step, the eigenvalue form of the residual update, and an
explicit time integration of the underlying matrix ODE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import IllConditionedEigenbasis, SingularKroneckerSystem, SingularStageSystem, StepSizeTooLarge
from .lyapunov import StageWorkspace, _as_block
from .operator import as_operator
from .tableau import ButcherTableau, stability_function

__all__ = [
    "DenseSolution",
    "dense_lyapunov",
    "dense_sylvester",
    "coupled_stage_solve",
    "multiplicative_update_matrix",
    "integrate_gramian",
    "vec",
    "unvec",
    "kron",
    "perfect_shuffle",
    "perfect_shuffle_matrix",
    "KRONECKER_MAX_UNKNOWNS",
]

# Above this many unknowns the explicit Kronecker matrix is not formed and a
# Bartels-Stewart solve from scipy is used instead.
KRONECKER_MAX_UNKNOWNS = 4900

SINGULAR_RTOL = 1e-12
EIGENBASIS_COND_MAX = 1e10


@dataclass(frozen=True)
class DenseSolution:
    matrix: np.ndarray
    residual: float


def _dense(M):
    return as_operator(M).to_dense()


def vec(X) -> np.ndarray:
    """Stack the columns of ``X`` into one vector."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, rows: int) -> np.ndarray:
    x = np.asarray(x)
    return x.reshape(rows, -1, order="F")


def kron(X, Y) -> np.ndarray:
    return np.kron(X, Y)


def perfect_shuffle(r: int, p: int) -> np.ndarray:
    """Row permutation ``P`` of size ``rp`` with ``P (X kron Y) P^T = Y kron X``.

    ``X`` is ``r x r`` and ``Y`` is ``p x p``. Entry ``k*r + i`` of the result
    is ``i*p + k``, so the rows are taken as ``0, p, 2p, ..., 1, 1+p, ...``.
    For ``r = 1`` or ``p = 1`` this is the identity.
    """
    if r < 1 or p < 1:
        raise ValueError("shuffle dimensions must be positive")
    i, k = np.meshgrid(np.arange(r), np.arange(p), indexing="xy")
    return (i * p + k).reshape(-1)


def perfect_shuffle_matrix(r: int, p: int) -> np.ndarray:
    perm = perfect_shuffle(r, p)
    P = np.zeros((r * p, r * p))
    P[np.arange(r * p), perm] = 1.0
    return P


def _check_disjoint(lam_a, lam_b, what):
    d = np.abs(lam_a[:, None] - lam_b[None, :])
    scale = max(1.0, np.abs(lam_a).max(initial=0.0), np.abs(lam_b).max(initial=0.0))
    if d.size and d.min() <= SINGULAR_RTOL * scale:
        raise SingularKroneckerSystem(f"{what}: spectra overlap (gap {d.min():.2e})")


def dense_sylvester(A, B, F, G) -> DenseSolution:
    """Solve ``A Y - Y B = F G^T`` through ``(I kron A - B^T kron I) vec Y = vec(F G^T)``."""
    A, B = _dense(A), _dense(B)
    F, G = _as_block(F), _as_block(G)
    n, m = A.shape[0], B.shape[0]
    _check_disjoint(spla.eigvals(A), spla.eigvals(B), "Sylvester operator is singular")
    C = F @ G.T
    if n * m <= KRONECKER_MAX_UNKNOWNS:
        K = np.kron(np.eye(m), A) - np.kron(B.T, np.eye(n))
        Y = unvec(np.linalg.solve(K, vec(C)), n)
    else:
        Y = spla.solve_sylvester(A, -B, C)
    res = float(np.linalg.norm(A @ Y - Y @ B - C))
    return DenseSolution(Y, res)


def dense_lyapunov(A, B) -> DenseSolution:
    """Solve ``A P + P A^T + B B^T = 0`` and symmetrize the result."""
    A = _dense(A)
    B = _as_block(B)
    n = A.shape[0]
    lam = spla.eigvals(A)
    _check_disjoint(lam, -lam, "Lyapunov operator is singular")
    C = B @ B.conj().T
    if n * n <= KRONECKER_MAX_UNKNOWNS:
        I = np.eye(n)
        K = np.kron(I, A) + np.kron(A, I)
        P = unvec(np.linalg.solve(K, -vec(C)), n)
    else:
        P = spla.solve_continuous_lyapunov(A, -C)
    P = 0.5 * (P + P.conj().T)
    res = float(np.linalg.norm(A @ P + P @ A.conj().T + C))
    return DenseSolution(P, res)


def coupled_stage_solve(A, h, tableau: ButcherTableau, omega: float = 1.0) -> StageWorkspace:
    """All stages at once from ``(I - omega lam kron A) vec K = (1 kron A h)``.

    Returns the stage blocks ``K`` and ``H = [h, ..., h] + omega K lam^T`` in
    the layout of :class:`~gramian_rk.lyapunov.StageWorkspace`.
    """
    A = _dense(A)
    h = _as_block(h)
    n, m = h.shape
    s = tableau.s
    lam = np.asarray(tableau.lam)
    prods = np.outer(spla.eigvals(lam), spla.eigvals(A)) * omega
    if np.any(np.abs(1.0 - prods) <= SINGULAR_RTOL * np.maximum(1.0, np.abs(prods))):
        raise SingularStageSystem("1 - omega * mu * lambda vanishes for a tableau/matrix eigenvalue pair")
    M = np.eye(s * n) - omega * np.kron(lam, A)
    rhs = np.kron(np.ones((s, 1)), A @ h)
    Kflat = np.linalg.solve(M, rhs)
    K = Kflat.reshape(s, n, m)
    H = h[None] + omega * np.einsum("il,lnm->inm", lam, K)
    return StageWorkspace(K, H)


def multiplicative_update_matrix(A, tableau: ButcherTableau, omega: float = 1.0) -> np.ndarray:
    """``V diag(R(omega lambda_i)) V^{-1}`` for ``A = V diag(lambda) V^{-1}``."""
    A = _dense(A)
    lam, V = spla.eig(A)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIGENBASIS_COND_MAX:
        raise IllConditionedEigenbasis(f"eigenvector condition number {cond:.2e}")
    R = np.array([stability_function(tableau, omega * z) for z in lam])
    return (V * R) @ np.linalg.inv(V)


def integrate_gramian(A, b, t_end: float, steps: int = 1000):
    """Classical RK4 on ``P' = h h^T``, ``h' = A h`` from ``P = 0``, ``h = b``.

    Returns ``(P, h)`` at ``t_end``. Raises :class:`StepSizeTooLarge` when the
    step leaves the RK4 stability region for some eigenvalue of ``A``.
    """
    A = _dense(A)
    h = np.array(_as_block(b), dtype=float if not np.iscomplexobj(b) else complex)
    n = A.shape[0]
    P = np.zeros((n, n), dtype=h.dtype)
    if t_end < 0 or steps < 1:
        raise ValueError("need t_end >= 0 and steps >= 1")
    if t_end == 0:
        return P, h
    dt = t_end / steps
    z = dt * spla.eigvals(A)
    amp = np.abs(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)
    if np.any(amp > 1.0 + 1e-12):
        raise StepSizeTooLarge(f"dt={dt:.3e} outside the RK4 stability region (amplification {amp.max():.3f})")

    def f(P_, h_):
        return h_ @ h_.conj().T, A @ h_

    for _ in range(steps):
        k1P, k1h = f(P, h)
        k2P, k2h = f(P + 0.5 * dt * k1P, h + 0.5 * dt * k1h)
        k3P, k3h = f(P + 0.5 * dt * k2P, h + 0.5 * dt * k2h)
        k4P, k4h = f(P + dt * k3P, h + dt * k3h)
        P = P + dt / 6 * (k1P + 2 * k2P + 2 * k3P + k4P)
        h = h + dt / 6 * (k1h + 2 * k2h + 2 * k3h + k4h)
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(h))):
        raise StepSizeTooLarge("integration produced non-finite values")
    return P, h
