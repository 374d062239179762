"""Reference low-rank ADI iteration for ``A P + P A^T + B B^T = 0``.

Residual-based formulation with shifts ``alpha_j`` in the open left
half-plane. Kept deliberately close to the textbook recurrence so it can serve
as an independent check of the quadrature solvers: with ``alpha_j = -1/mu_j``
both produce the same Gramian approximation in every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import NonPositiveRealPart, RealShiftNotPairable
from .lyapunov import SolverConfig, _as_block
from .operator import as_operator

__all__ = ["AdiState", "adi_initial_state", "adi_step", "adi_real_double_step", "solve_adi"]


@dataclass
class AdiState:
    W: np.ndarray
    Z: np.ndarray
    shift_log: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    w0_norm2: float = 0.0
    converged: bool = False

    @property
    def step(self) -> int:
        return len(self.shift_log)

    @property
    def relative_residual(self) -> float:
        return float(np.linalg.norm(self.W, 2) ** 2) / self.w0_norm2 if self.w0_norm2 > 0 else 0.0

    def gramian(self):
        return self.Z @ self.Z.conj().T


def adi_initial_state(B) -> AdiState:
    W = np.array(_as_block(B))
    return AdiState(W, np.zeros((W.shape[0], 0), dtype=W.dtype), w0_norm2=float(np.linalg.norm(W, 2) ** 2))


def _push(state, W, cols, alpha):
    Z = np.concatenate([state.Z, cols], axis=1) if state.Z.size else cols
    new = replace(state, W=W, Z=Z, shift_log=state.shift_log + [alpha])
    new.residual_history = state.residual_history + [float(np.linalg.norm(W, 2) ** 2)]
    return new


def adi_step(A, state: AdiState, alpha: complex) -> AdiState:
    """``V = (A + alpha I)^{-1} W``, ``W <- W - 2 Re(alpha) V``, append ``sqrt(-2 Re alpha) V``."""
    A = as_operator(A)
    alpha = complex(alpha)
    if alpha.real >= 0:
        raise NonPositiveRealPart(f"ADI shift {alpha} must have negative real part")
    a = alpha.real if alpha.imag == 0 else alpha
    V = A.native_shifted_solve(a, state.W)
    W = state.W - 2.0 * alpha.real * V
    return _push(state, W, np.sqrt(-2.0 * alpha.real) * V, alpha)


def adi_real_double_step(A, state: AdiState, alpha: complex) -> AdiState:
    """Double step for ``alpha, conj(alpha)`` keeping ``W`` and ``Z`` real."""
    A = as_operator(A)
    alpha = complex(alpha)
    if alpha.real >= 0:
        raise NonPositiveRealPart(f"ADI shift {alpha} must have negative real part")
    if alpha.imag == 0:
        raise RealShiftNotPairable(f"ADI shift {alpha} is real; use adi_step")
    if np.iscomplexobj(state.W) and np.any(state.W.imag):
        raise ValueError("real double step requires a real residual block")
    W = np.real(state.W)
    V = A.native_shifted_solve(alpha, W.astype(complex))
    d = alpha.real / alpha.imag
    g = np.sqrt(-2.0 * alpha.real) * np.sqrt(2.0)
    cols = g * np.concatenate([V.real + d * V.imag, np.sqrt(d * d + 1.0) * V.imag], axis=1)
    W_new = W - 4.0 * alpha.real * (V.real + d * V.imag)
    Zprev = np.real(state.Z)
    return _push(replace(state, Z=Zprev), W_new, cols, alpha)


def solve_adi(A, B, alphas: Sequence[complex], cfg: Optional[SolverConfig] = None) -> AdiState:
    """Cycle through ``alphas`` until ``cfg.tol`` or ``cfg.max_steps`` single shifts are used."""
    from .lyapunov import validate_proper_order

    cfg = cfg or SolverConfig()
    A = as_operator(A)
    state = adi_initial_state(B)
    alphas = [complex(a) for a in alphas]
    if not alphas or state.w0_norm2 == 0:
        state.converged = state.w0_norm2 == 0
        return state
    if cfg.realify:
        plan = validate_proper_order(alphas)
    else:
        plan = [(a, False) for a in alphas]
    A.prefactor([a for a, _ in plan], native=True)
    k = 0
    steps = 0
    while steps < cfg.max_steps:
        alpha, paired = plan[k % len(plan)]
        k += 1
        if paired:
            state = adi_real_double_step(A, state, alpha)
        else:
            state = adi_step(A, state, alpha)
        steps += 1
        if state.relative_residual <= cfg.tol:
            state.converged = True
            break
    return state
