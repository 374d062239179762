"""Low-rank solver for ``A Y - Y B = f g^T`` using one-stage steps.

Two thin blocks are propagated, ``h_hat`` (left, length ``n``) and
``h_breve`` (right, length ``m``). Each step takes a pair of shifts
``(mu_hat, mu_breve)`` and needs one shifted solve with ``A`` and one with
``B^T``. The approximation is kept in factored form ``Y = Z_hat Gamma
Z_breve^H`` with ``Gamma`` diagonal, and the residual

    A Y_j - Y_j B - f g^T = h_hat_j h_breve_j^H

stays of low rank, so its norm is the product of two vector norms.

Several right-hand side columns are treated as independent rank-one problems
that share the shifts; their factors are stored side by side, which makes the
block formulas above hold column by column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import NotConverged
from .lyapunov import SolverConfig, _as_block, solve_lyapunov
from .operator import as_operator

logger = logging.getLogger(__name__)

__all__ = [
    "SylvesterShiftPair",
    "SylvesterState",
    "ReductionReport",
    "solve_sylvester",
    "step_sylvester",
    "sylvester_initial_state",
    "sylvester_residual_norm",
    "sylvester_residual_defect",
    "lyapunov_reduction_check",
    "stability_moduli",
    "exact_sylvester_shifts",
    "heuristic_sylvester_shifts",
]


@dataclass(frozen=True)
class SylvesterShiftPair:
    mu_hat: complex
    mu_breve: complex

    @property
    def weight(self) -> complex:
        """Entry added to ``Gamma``: ``mu_hat + conj(mu_breve)``."""
        return complex(self.mu_hat) + complex(self.mu_breve).conjugate()


def _pairs(shifts) -> list:
    out = []
    for s in shifts:
        if isinstance(s, SylvesterShiftPair):
            out.append(SylvesterShiftPair(complex(s.mu_hat), complex(s.mu_breve)))
        else:
            a, b = s
            out.append(SylvesterShiftPair(complex(a), complex(b)))
    return out


@dataclass
class SylvesterState:
    step: int
    z_hat: np.ndarray
    z_breve: np.ndarray
    gamma: np.ndarray
    h_hat: np.ndarray
    h_breve: np.ndarray
    rhs_norm: float
    residual_history: list = field(default_factory=list)
    shift_log: list = field(default_factory=list)
    converged: bool = False

    @property
    def relative_residual(self) -> float:
        return sylvester_residual_norm(self) / self.rhs_norm if self.rhs_norm > 0 else 0.0

    def solution(self) -> np.ndarray:
        """Dense ``Z_hat diag(gamma) Z_breve^H``."""
        return (self.z_hat * self.gamma) @ self.z_breve.conj().T


def sylvester_initial_state(f, g) -> SylvesterState:
    F = np.array(_as_block(f), dtype=complex)
    G = np.array(_as_block(g), dtype=complex)
    if F.shape[1] != G.shape[1]:
        raise ValueError(f"f and g need the same number of columns, got {F.shape[1]} and {G.shape[1]}")
    n, m = F.shape[0], G.shape[0]
    state = SylvesterState(
        step=0,
        z_hat=np.zeros((n, 0), dtype=complex),
        z_breve=np.zeros((m, 0), dtype=complex),
        gamma=np.zeros(0, dtype=complex),
        h_hat=F,
        h_breve=-G,
        rhs_norm=0.0,
    )
    state.rhs_norm = sylvester_residual_norm(state)
    return state


def sylvester_residual_norm(state: SylvesterState) -> float:
    """Spectral norm of ``h_hat h_breve^H`` without forming it.

    For a single column this is ``||h_hat|| * ||h_breve||``; for several
    columns the two blocks are reduced by thin QR first.
    """
    hh, hb = state.h_hat, state.h_breve
    if hh.size == 0 or hb.size == 0:
        return 0.0
    if hh.shape[1] == 1:
        return float(np.linalg.norm(hh) * np.linalg.norm(hb))
    _, R1 = np.linalg.qr(hh)
    _, R2 = np.linalg.qr(hb)
    return float(np.linalg.norm(R1 @ R2.conj().T, 2))


def sylvester_residual_defect(A, B, state: SylvesterState, f, g) -> float:
    """Frobenius norm of ``A Y - Y B - f g^T - h_hat h_breve^H`` (dense)."""
    A, B = as_operator(A), as_operator(B)
    F, G = _as_block(f), _as_block(g)
    Y = state.solution()
    R = A.apply(Y) - B.transpose_apply(Y.T).T - F @ G.T - state.h_hat @ state.h_breve.conj().T
    return float(np.linalg.norm(R))


def step_sylvester(A, B, state: SylvesterState, pair: SylvesterShiftPair) -> SylvesterState:
    """One step with the shift pair; all right-hand side columns advance together."""
    A, B = as_operator(A), as_operator(B)
    mh, mb = complex(pair.mu_hat), complex(pair.mu_breve)
    # (I - mu_hat A) K_hat = A h_hat
    K_hat = A.shifted_solve(mh, A.apply(state.h_hat))
    # (I + mu_breve B^T) K_breve = -B^T h_breve
    K_breve = B.transpose_shifted_solve(-mb, -B.transpose_apply(state.h_breve))
    H_hat = state.h_hat + mh * K_hat
    H_breve = state.h_breve + mb * K_breve
    w = pair.weight
    r = state.h_hat.shape[1]
    new = replace(
        state,
        step=state.step + 1,
        z_hat=np.concatenate([state.z_hat, H_hat], axis=1),
        z_breve=np.concatenate([state.z_breve, H_breve], axis=1),
        gamma=np.concatenate([state.gamma, np.full(r, w)]),
        h_hat=state.h_hat + w * K_hat,
        h_breve=state.h_breve + np.conj(w) * K_breve,
        shift_log=state.shift_log + [pair],
    )
    new.residual_history = state.residual_history + [sylvester_residual_norm(new)]
    return new


def solve_sylvester(A, B, f, g, shifts: Sequence, cfg: Optional[SolverConfig] = None) -> SylvesterState:
    """Iterate over the shift pairs (cyclically) until ``cfg.tol`` or ``cfg.max_steps``.

    Parameters
    ----------
    A, B
        Square matrices or :class:`~gramian_rk.operator.Operator` objects of
        orders ``n`` and ``m`` with disjoint spectra.
    f, g
        Right-hand side factors, ``n x r`` and ``m x r`` (vectors for ``r = 1``).
    shifts
        Sequence of :class:`SylvesterShiftPair` or ``(mu_hat, mu_breve)`` tuples.

    Returns
    -------
    SylvesterState
        ``converged`` tells whether ``||h_hat h_breve^H|| <= tol * ||f g^T||``.
        With ``cfg.strict`` an exhausted budget raises :class:`NotConverged`.
    """
    cfg = cfg or SolverConfig()
    A, B = as_operator(A), as_operator(B)
    state = sylvester_initial_state(f, g)
    if state.h_hat.shape[0] != A.n or state.h_breve.shape[0] != B.n:
        raise ValueError("dimensions of f, g do not match A, B")
    pairs = _pairs(shifts)
    if state.rhs_norm == 0:
        state.converged = True
        return state
    if not pairs:
        return state
    A.prefactor([p.mu_hat for p in pairs])
    B.prefactor([-p.mu_breve for p in pairs])
    k = 0
    while state.step < cfg.max_steps:
        state = step_sylvester(A, B, state, pairs[k % len(pairs)])
        k += 1
        logger.debug("step %d: relative residual %.3e", state.step, state.relative_residual)
        if state.relative_residual <= cfg.tol:
            state.converged = True
            break
    if not state.converged:
        msg = f"relative residual {state.relative_residual:.3e} above tol {cfg.tol:.1e} after {state.step} steps"
        logger.warning(msg)
        if cfg.strict:
            raise NotConverged(msg, state)
    return state


def stability_moduli(pairs: Sequence, eig_a, eig_b):
    """Per-step moduli of the scalar update factors.

    Returns ``(hat, breve)`` arrays of shape ``(steps, len(eig))`` holding
    ``|(1 + conj(mu_breve) z) / (1 - mu_hat z)|`` on the eigenvalues of ``A``
    and ``|(1 - conj(mu_hat) z) / (1 + mu_breve z)|`` on those of ``B``.
    Values below one mean the corresponding component of the residual block
    shrinks in that step.
    """
    pairs = _pairs(pairs)
    za = np.asarray(eig_a, dtype=complex)
    zb = np.asarray(eig_b, dtype=complex)
    hat = np.array([np.abs((1 + np.conj(p.mu_breve) * za) / (1 - p.mu_hat * za)) for p in pairs])
    breve = np.array([np.abs((1 - np.conj(p.mu_hat) * zb) / (1 + p.mu_breve * zb)) for p in pairs])
    return hat.reshape(len(pairs), za.size), breve.reshape(len(pairs), zb.size)


def exact_sylvester_shifts(A, B) -> list:
    """Pairs ``mu_hat = 1/conj(lambda_B)``, ``mu_breve = -1/conj(lambda_A)`` (dense, ``n = m``).

    Using all of them annihilates both residual blocks for normal ``A`` and
    ``B``. Eigenvalues are sorted by modulus and paired in that order.
    """
    import scipy.linalg as spla

    la = spla.eigvals(as_operator(A).to_dense())
    lb = spla.eigvals(as_operator(B).to_dense())
    if la.size != lb.size:
        raise ValueError("exact pairing needs matrices of equal order")
    la = la[np.lexsort((la.imag, la.real, np.abs(la)))]
    lb = lb[np.lexsort((lb.imag, lb.real, np.abs(lb)))]
    return [SylvesterShiftPair(1.0 / np.conj(b), -1.0 / np.conj(a)) for a, b in zip(la, lb)]


def heuristic_sylvester_shifts(A, B, k_arnoldi: int = 20, count: int = 20) -> list:
    """Pairs from the Lyapunov heuristic applied to ``A`` (for ``mu_breve``) and ``-B`` (for ``mu_hat``)."""
    from .shifts import heuristic_shifts

    mb = heuristic_shifts(A, k_arnoldi, count).values
    mh = heuristic_shifts(-as_operator(B), k_arnoldi, count).values
    k = min(len(mb), len(mh))
    return [SylvesterShiftPair(mh[i], mb[i]) for i in range(k)]


@dataclass
class ReductionReport:
    """Comparison of the Sylvester solver on ``A Y + Y A^T + b b^T = 0`` with the Lyapunov solver."""

    deviation: float
    max_gamma_imag: float
    sylvester: SylvesterState
    lyapunov_factor: np.ndarray

    @property
    def gamma_is_real(self) -> bool:
        return self.max_gamma_imag <= 1e-14


def lyapunov_reduction_check(A, b, shifts: Sequence[complex]) -> ReductionReport:
    """Solve with ``B = -A^T``, ``f = -b``, ``g = b`` and equal shifts on both sides.

    Then ``Y_j`` coincides with ``Z_j Z_j^H`` from the one-stage Lyapunov
    iteration, and every ``Gamma`` entry is ``2 Re(mu_j)``. ``deviation`` is
    the relative Frobenius distance of the two products.
    """
    A = as_operator(A)
    b = _as_block(b)
    shifts = [complex(s) for s in shifts]
    cfg = SolverConfig(tol=1e-300, max_steps=len(shifts))
    syl = solve_sylvester(A, -A.transpose(), -b, b, [(s, s) for s in shifts], cfg)
    lyap = solve_lyapunov(A, b, shifts, cfg)
    P = lyap.gramian()
    Y = syl.solution()
    scale = max(np.linalg.norm(P), 1e-300)
    dev = float(np.linalg.norm(Y - P) / scale) if P.size else 0.0
    gi = float(np.abs(syl.gamma.imag).max(initial=0.0))
    return ReductionReport(dev, gi, syl, lyap.Z)
