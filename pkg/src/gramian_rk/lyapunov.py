"""Low-rank Lyapunov solvers built from residual-preserving quadrature steps.

The iteration integrates ``P' = h h^H``, ``h' = A h`` from ``P(0) = 0``,
``h(0) = B`` with implicit Runge-Kutta steps. For tableaus that pass
:func:`~gramian_rk.tableau.check_residual_condition`, every iterate satisfies

    A P_j + P_j A^T + B B^T = h_j h_j^H,    P_j = Z_j Z_j^H,

so the residual norm is available from the thin block ``h_j`` alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as spla

from .errors import ImproperShiftSet, NotConverged, StageSolveFailed, TableauRejected
from .operator import Operator, as_operator
from .tableau import (
    DEFAULT_DEFECT_TOL,
    ButcherTableau,
    check_residual_condition,
    make_one_stage,
    real_pair_transform,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "GramianState",
    "StageWorkspace",
    "initial_state",
    "stage_solve",
    "step_sstage",
    "solve_lyapunov_sstage",
    "step_one_stage",
    "step_real_double",
    "solve_lyapunov",
    "residual_norm",
    "residual_defect",
    "correction_term",
    "validate_proper_order",
    "one_stage_schedule",
]


@dataclass
class SolverConfig:
    """Iteration controls.

    ``tol`` bounds the relative residual ``||h_j||^2 / ||h_0||^2``. Step sizes
    default to one; with varying tableaus the step size is absorbed into the
    tableau. ``diagnostic`` lets tableaus that violate the residual condition
    through and records the stage blocks needed to reconstruct the correction
    term. ``strict`` turns an exhausted step budget into :class:`NotConverged`.
    """

    tol: float = 1e-10
    max_steps: int = 100
    step_sizes: Optional[Sequence[float]] = None
    realify: bool = False
    defect_check_tol: float = DEFAULT_DEFECT_TOL
    diagnostic: bool = False
    strict: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.step_sizes is not None and any(w <= 0 for w in self.step_sizes):
            raise ValueError("step sizes must be positive")

    def omega(self, j: int) -> float:
        if self.step_sizes is None:
            return 1.0
        return float(self.step_sizes[j % len(self.step_sizes)])


@dataclass
class StageWorkspace:
    """Stage blocks of one step: ``K[i]`` and ``H[i]`` are ``n x m``, ``K = A H``."""

    K: np.ndarray
    H: np.ndarray

    def as_columns(self):
        """``(n, s)`` views for single right-hand sides."""
        return self.K[:, :, 0].T, self.H[:, :, 0].T


@dataclass
class GramianState:
    step: int
    Z: np.ndarray
    h: np.ndarray
    h0_norm2: float
    shift_log: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    converged: bool = False

    @property
    def m(self) -> int:
        return self.h.shape[1]

    @property
    def relative_residual(self) -> float:
        return residual_norm(self) / self.h0_norm2 if self.h0_norm2 > 0 else 0.0

    def gramian(self) -> np.ndarray:
        return self.Z @ self.Z.conj().T


def _as_block(B):
    B = np.asarray(B)
    return B.reshape(-1, 1) if B.ndim == 1 else B


def initial_state(B) -> GramianState:
    B = _as_block(B)
    dtype = complex if np.iscomplexobj(B) else float
    h = np.array(B, dtype=dtype)
    return GramianState(0, np.zeros((h.shape[0], 0), dtype=dtype), h, float(np.linalg.norm(h, 2) ** 2))


def residual_norm(state: GramianState) -> float:
    """Spectral norm of ``h h^H``, i.e. ``sigma_max(h)^2``."""
    h = state.h
    if h.size == 0:
        return 0.0
    if h.shape[1] == 1:
        return float(np.vdot(h, h).real)
    return float(np.linalg.norm(h, 2) ** 2)


def residual_defect(A, Z, h, B) -> float:
    """Frobenius norm of ``A ZZ^H + ZZ^H A^T + BB^T - hh^H`` (dense, desk scale)."""
    A = as_operator(A)
    Z = _as_block(Z)
    h = _as_block(h)
    B = _as_block(B)
    AZ = A.apply(Z)
    R = AZ @ Z.conj().T
    R = R + R.conj().T + B @ B.conj().T - h @ h.conj().T
    return float(np.linalg.norm(R))


def correction_term(state: GramianState) -> np.ndarray:
    """Accumulated ``sum_i omega_i^2 K_i D_i K_i^H`` for recorded diagnostic stages.

    ``D_i`` is the residual-condition defect of the tableau used in step ``i``;
    the sum vanishes for conforming tableaus.
    """
    n = state.h.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for ws, tab, omega in state.stages:
        D = check_residual_condition(tab).defect
        # K as n x (s*m), stage-major; D acts on the stage index only
        s, _, m = ws.K.shape
        Kflat = np.concatenate(list(ws.K), axis=1)
        out += omega**2 * Kflat @ np.kron(D, np.eye(m)) @ Kflat.conj().T
    return out


def _validate_tableau(t: ButcherTableau, cfg: SolverConfig):
    if cfg.diagnostic:
        return
    if not t.has_positive_real_weights(tol=1e-14):
        raise TableauRejected(f"weights must be positive reals, got {t.beta.tolist()}")
    defect = check_residual_condition(t)
    if not defect.passes(cfg.defect_check_tol, t.beta):
        raise TableauRejected(
            f"tableau violates the residual condition (defect norm {defect.frobenius_norm:.3e})"
        )
    if np.any(t.spectrum.real <= 0):
        raise TableauRejected("tableau spectrum must lie in the open right half-plane")


def _maybe_real(x, tol=0.0):
    x = np.asarray(x)
    if np.iscomplexobj(x) and not np.any(np.abs(x.imag) > tol):
        return x.real.copy()
    return x


def stage_solve(A: Operator, h: np.ndarray, t: ButcherTableau, omega: float = 1.0) -> StageWorkspace:
    """Solve ``K = [Ah, ..., Ah] + omega A K lam^T`` by ``s`` shifted solves.

    Lower-triangular ``lam`` is swept directly. Otherwise ``lam^T`` is brought
    to upper-triangular Schur form ``U T U^H`` first; the transformed stages
    then decouple into a sequence of shifted solves and are rotated back.
    """
    A = as_operator(A)
    s = t.s
    lam = _maybe_real(t.lam)
    if t.is_lower_triangular():
        T = lam.T
        U = None
    else:
        T, U = spla.schur(t.lam.T.astype(complex), output="complex")
    n, m = h.shape
    ones_u = np.ones(s) if U is None else U.sum(axis=0)
    dtype = np.result_type(h.dtype, T.dtype, ones_u.dtype, float)
    Kt = np.zeros((s, n, m), dtype=dtype)
    for i in range(s):
        r = ones_u[i] * h
        for l in range(i):
            if T[l, i] != 0:
                r = r + omega * T[l, i] * Kt[l]
        d = omega * T[i, i]
        rhs = A.apply(r)
        if d != 0:
            Kt[i] = A.shifted_solve(d, rhs)
        else:
            Kt[i] = rhs
    if U is None:
        K = Kt
    else:
        K = np.einsum("jnm,ij->inm", Kt, U.conj())
    # H_i = h + omega * sum_l lam_il K_l
    H = h[None, :, :] + omega * np.einsum("il,lnm->inm", lam, K)
    if not np.all(np.isfinite(K)):
        raise StageSolveFailed("stage solve produced non-finite values")
    return StageWorkspace(K, H)


def step_sstage(A, state: GramianState, t: ButcherTableau, omega: float = 1.0, record: bool = False) -> GramianState:
    """Advance by one step of the general s-stage iteration."""
    A = as_operator(A)
    ws = stage_solve(A, state.h, t, omega)
    beta = _maybe_real(t.beta)
    w = np.sqrt((omega * beta).real) if np.all(np.isreal(beta)) else np.sqrt(omega * beta)
    new_cols = np.concatenate([w[i] * ws.H[i] for i in range(t.s)], axis=1)
    h_new = state.h + omega * np.einsum("i,inm->nm", beta, ws.K)
    Z = np.concatenate([state.Z, new_cols], axis=1) if state.Z.size else new_cols
    stages = state.stages + [(ws, t, omega)] if record else state.stages
    new = replace(
        state,
        step=state.step + 1,
        Z=Z,
        h=h_new,
        shift_log=state.shift_log + [t],
        stages=stages,
    )
    new.residual_history = state.residual_history + [residual_norm(new)]
    return new


def _finish(state: GramianState, cfg: SolverConfig, exhausted: bool) -> GramianState:
    if not state.converged and exhausted:
        msg = (
            f"relative residual {state.relative_residual:.3e} above tol {cfg.tol:.1e} "
            f"after {state.step} steps"
        )
        logger.warning(msg)
        if cfg.strict:
            raise NotConverged(msg, state)
    return state


def _check_converged(state: GramianState, cfg: SolverConfig) -> bool:
    if state.h0_norm2 == 0 or residual_norm(state) <= cfg.tol * state.h0_norm2:
        state.converged = True
    return state.converged


def solve_lyapunov_sstage(A, B, schedule: Sequence[ButcherTableau], cfg: Optional[SolverConfig] = None) -> GramianState:
    """Run the s-stage iteration over ``schedule`` (one tableau per step).

    Stops early once the relative residual reaches ``cfg.tol`` or ``h``
    vanishes identically. Tableaus are checked for positive real weights,
    the residual condition and a right half-plane spectrum unless
    ``cfg.diagnostic`` is set, in which case stage blocks are recorded.
    """
    cfg = cfg or SolverConfig()
    A = as_operator(A)
    state = initial_state(B)
    if _check_converged(state, cfg):
        return state
    for t in schedule:
        _validate_tableau(t, cfg)
    for j, t in enumerate(schedule):
        if j >= cfg.max_steps:
            break
        state = step_sstage(A, state, t, cfg.omega(j), record=cfg.diagnostic)
        logger.debug("step %d: relative residual %.3e", state.step, state.relative_residual)
        if _check_converged(state, cfg):
            break
    return _finish(state, cfg, exhausted=True)


def step_one_stage(A, state: GramianState, mu: complex) -> GramianState:
    """One step with the one-stage tableau ``(mu, 2 Re mu)``.

    Solves ``(I - mu A) K = A h``, appends ``sqrt(2 Re mu) (h + mu K)`` to the
    factor and sets ``h <- h + 2 Re(mu) K``. Real ``mu`` with real data stays
    in real arithmetic.
    """
    A = as_operator(A)
    mu = complex(mu)
    if mu.real <= 0:
        raise ValueError(f"shift {mu} must have positive real part")
    mu_s = mu.real if mu.imag == 0 else mu
    h = state.h
    K = A.shifted_solve(mu_s, A.apply(h))
    H = h + mu_s * K
    two_re = 2.0 * mu.real
    col = np.sqrt(two_re) * H
    Z = np.concatenate([state.Z, col], axis=1) if state.Z.size else col
    new = replace(
        state,
        step=state.step + 1,
        Z=Z,
        h=h + two_re * K,
        shift_log=state.shift_log + [mu],
    )
    new.residual_history = state.residual_history + [residual_norm(new)]
    return new


def step_real_double(A, state: GramianState, mu: complex) -> GramianState:
    """Merged step for the pair ``mu, conj(mu)`` in real arithmetic.

    One complex solve ``(I - mu A) V = h`` yields ``V = v1 + i v2``; the real
    columns ``sqrt(2 Re mu) [v1, v2] L`` are appended, which reproduces the
    Gramian of the two complex steps. ``h`` advances as
    ``h + 4 Re(mu) A (v1 + (Re mu / Im mu) v2)``.
    """
    A = as_operator(A)
    tr = real_pair_transform(mu)
    h = state.h
    if np.iscomplexobj(h) and np.any(h.imag):
        raise ValueError("real double step requires a real residual block")
    h = np.real(h)
    mu = tr.mu
    V = A.shifted_solve(mu, h.astype(complex))
    # A V = (V - h) / mu avoids an extra product with A
    AV = (V - h) / mu
    v1, v2 = V.real, V.imag
    cols = np.sqrt(2.0 * mu.real) * np.concatenate(
        [tr.l_factor[0, 0] * v1 + tr.l_factor[1, 0] * v2, tr.l_factor[1, 1] * v2], axis=1
    )
    h_new = h + 4.0 * mu.real * (AV.real + tr.ratio * AV.imag)
    if np.iscomplexobj(state.Z) and np.any(state.Z.imag):
        raise ValueError("real double step requires a real factor")
    Zprev = np.real(state.Z)
    new = replace(
        state,
        step=state.step + 1,
        Z=np.concatenate([Zprev, cols], axis=1),
        h=h_new,
        shift_log=state.shift_log + [mu],
    )
    new.residual_history = state.residual_history + [residual_norm(new)]
    return new


def validate_proper_order(shifts, rtol: float = 1e-12):
    """Group shifts into steps: real values alone, conjugate pairs adjacent.

    Returns a list of ``(mu, paired)`` items where ``paired`` means a double
    step covering ``mu`` and ``conj(mu)``. Raises
    :class:`~gramian_rk.errors.ImproperShiftSet` naming the first unpaired
    complex shift.
    """
    vals = [complex(x) for x in shifts]
    out = []
    i = 0
    while i < len(vals):
        mu = vals[i]
        if mu.imag == 0:
            out.append((mu, False))
            i += 1
            continue
        nxt = vals[i + 1] if i + 1 < len(vals) else None
        if nxt is None or abs(nxt - mu.conjugate()) > rtol * abs(mu):
            raise ImproperShiftSet(f"unpaired complex shift {mu} at position {i}: its conjugate must follow it")
        out.append((mu if mu.imag > 0 else mu.conjugate(), True))
        i += 2
    return out


def solve_lyapunov(A, B, shifts: Sequence[complex], cfg: Optional[SolverConfig] = None) -> GramianState:
    """One-stage iteration over ``shifts``, cycled until ``tol`` or ``max_steps``.

    With ``cfg.realify`` the shift list must be proper; every conjugate pair
    becomes one real double step (counted as one step, logged by the member
    with positive imaginary part) and all iterates stay real.
    """
    cfg = cfg or SolverConfig()
    A = as_operator(A)
    state = initial_state(B)
    shifts = [complex(s) for s in shifts]
    if any(s.real <= 0 for s in shifts):
        raise ValueError("all shifts must have positive real part")
    if cfg.realify:
        if not A.is_real or np.iscomplexobj(state.h):
            raise ValueError("realified iteration needs real A and B")
        plan = validate_proper_order(shifts)
    else:
        plan = [(s, False) for s in shifts]
    if _check_converged(state, cfg) or not plan:
        return state
    A.prefactor([mu for mu, _ in plan])
    k = 0
    while state.step < cfg.max_steps:
        mu, paired = plan[k % len(plan)]
        k += 1
        if paired:
            state = step_real_double(A, state, mu)
        else:
            state = step_one_stage(A, state, mu)
        logger.debug("step %d (mu=%s): relative residual %.3e", state.step, mu, state.relative_residual)
        if _check_converged(state, cfg):
            break
    return _finish(state, cfg, exhausted=True)


def one_stage_schedule(shifts: Sequence[complex]):
    return [make_one_stage(mu) for mu in shifts]
