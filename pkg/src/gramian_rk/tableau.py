"""Butcher tableaus that keep the Lyapunov residual at rank one.

A tableau ``(lam, beta, gamma)`` drives one step of the quadrature iteration.
Only tableaus whose weights and coefficients satisfy

    diag(beta) conj(lam) + lam^T diag(beta) - beta beta^T = 0

keep the residual ``A P + P A^T + b b^T`` equal to ``h h^H``. This module
builds such tableaus, measures how far an arbitrary tableau is from the
condition, and provides the 2x2 real transforms used to pair conjugate shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    NonPositiveRealPart,
    RealShiftNotPairable,
    SingularStabilityDenominator,
    UnsupportedStageCount,
)

__all__ = [
    "ButcherTableau",
    "TableauDefect",
    "RealPairTransform",
    "make_one_stage",
    "make_dirk_lyapunov",
    "make_dirk_sylvester",
    "gauss_legendre",
    "backward_euler",
    "rotation_tableau_matrix",
    "check_residual_condition",
    "check_residual_condition_sylvester",
    "stability_function",
    "rational_factor",
    "merge_one_stage_steps",
    "real_pair_transform",
    "check_solvability",
    "satisfies_residual_condition",
    "format_complex",
    "parse_complex",
]

DEFAULT_DEFECT_TOL = 1e-12


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients ``lam`` (s x s), weights ``beta`` and abscissae ``gamma``.

    ``gamma`` is carried along for completeness only; the ODE systems solved
    here are autonomous so stage times never enter a computation.
    """

    lam: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray = field(default=None)

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=complex))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        s = lam.shape[0]
        if lam.ndim != 2 or lam.shape != (s, s) or s == 0:
            raise ValueError(f"lam must be a non-empty square matrix, got shape {lam.shape}")
        if beta.shape != (s,):
            raise ValueError(f"beta must have length {s}, got shape {beta.shape}")
        gamma = np.zeros(s) if self.gamma is None else np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if gamma.shape != (s,):
            raise ValueError(f"gamma must have length {s}, got shape {gamma.shape}")
        object.__setattr__(self, "lam", _frozen(lam, complex))
        object.__setattr__(self, "beta", _frozen(beta, complex))
        object.__setattr__(self, "gamma", _frozen(gamma, float))

    @property
    def s(self) -> int:
        return self.lam.shape[0]

    @property
    def spectrum(self) -> np.ndarray:
        if self.is_lower_triangular():
            return np.diag(self.lam).copy()
        return np.linalg.eigvals(self.lam)

    def is_lower_triangular(self) -> bool:
        return not np.any(np.triu(self.lam, 1))

    def has_positive_real_weights(self, tol: float = 0.0) -> bool:
        b = self.beta
        return bool(np.all(np.abs(b.imag) <= tol * np.abs(b.real)) and np.all(b.real > 0))

    def is_real(self) -> bool:
        return not (np.any(self.lam.imag) or np.any(self.beta.imag))

    def scaled(self, omega: float) -> "ButcherTableau":
        """Tableau with the step size folded in: ``(omega*lam, omega*beta)``."""
        return ButcherTableau(omega * self.lam, omega * self.beta, omega * self.gamma)

    def to_text(self) -> str:
        """Plain-text form: ``s``, the rows of ``lam``, then ``beta`` and ``gamma``."""
        lines = [str(self.s)]
        lines += [" ".join(format_complex(x) for x in row) for row in self.lam]
        lines.append(" ".join(format_complex(x) for x in self.beta))
        lines.append(" ".join(repr(float(x)) for x in self.gamma))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ButcherTableau":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ValueError("empty tableau text")
        try:
            s = int(rows[0][0])
        except ValueError as exc:
            raise ValueError(f"first line must be the stage count, got {rows[0]!r}") from exc
        if s <= 0 or len(rows) < s + 2:
            raise ValueError(f"expected {s} coefficient rows followed by beta (and optional gamma)")
        lam = [[parse_complex(tok) for tok in row] for row in rows[1 : s + 1]]
        beta = [parse_complex(tok) for tok in rows[s + 1]]
        gamma = None
        if len(rows) > s + 2:
            gamma = [parse_complex(tok).real for tok in rows[s + 2]]
        return cls(np.array(lam), np.array(beta), gamma)


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r}{'+' if np.copysign(1.0, z.imag) > 0 else '-'}{abs(z.imag)!r}i"


def parse_complex(token: str) -> complex:
    """Parse ``a+bi`` / ``a+bj`` / plain real tokens."""
    tok = token.strip().replace("i", "j").replace("J", "j")
    if tok.endswith("j") and tok[:-1] in ("", "+", "-"):
        tok = tok[:-1] + "1j"
    try:
        return complex(tok)
    except ValueError as exc:
        raise ValueError(f"cannot parse complex number {token!r}") from exc


@dataclass(frozen=True, eq=False)
class TableauDefect:
    defect: np.ndarray
    frobenius_norm: float

    def passes(self, tol: float = DEFAULT_DEFECT_TOL, beta=None) -> bool:
        scale = 1.0 if beta is None else 1.0 + float(np.linalg.norm(beta)) ** 2
        return self.frobenius_norm <= tol * scale


@dataclass(frozen=True, eq=False)
class RealPairTransform:
    """Real 2-stage replacement for the conjugate pair of shifts ``mu, conj(mu)``.

    ``lambda_breve``/``beta_breve`` form a real tableau with spectrum
    ``{mu, conj(mu)}``. ``s_factor = q_factor @ l_factor.T`` maps it onto the
    rotation form ``[[Re mu, -Im mu], [Im mu, Re mu]]``; ``l_factor`` gives the
    column combination appended to the real low-rank factor.
    """

    mu: complex
    lambda_breve: np.ndarray
    beta_breve: np.ndarray
    l_factor: np.ndarray
    s_factor: np.ndarray
    q_factor: np.ndarray

    @property
    def ratio(self) -> float:
        return self.mu.real / self.mu.imag

    def tableau(self) -> ButcherTableau:
        return ButcherTableau(self.lambda_breve, self.beta_breve)


def _require_cplus(mus):
    mus = np.atleast_1d(np.asarray(mus, dtype=complex))
    bad = mus[mus.real <= 0]
    if bad.size:
        raise NonPositiveRealPart(f"shift(s) with non-positive real part: {bad.tolist()}")
    return mus


def make_one_stage(mu: complex) -> ButcherTableau:
    mu = complex(mu)
    return ButcherTableau(np.array([[mu]]), np.array([2.0 * mu.real]))


def make_dirk_lyapunov(mus: Iterable[complex]) -> ButcherTableau:
    """Lower-triangular tableau with diagonal ``mus`` and columns ``2 Re(mu_l)`` below."""
    mus = _require_cplus(list(mus))
    s = mus.size
    two_re = 2.0 * mus.real
    lam = np.tril(np.broadcast_to(two_re, (s, s)), -1).astype(complex)
    lam[np.diag_indices(s)] = mus
    return ButcherTableau(lam, two_re)


def merge_one_stage_steps(mus: Iterable[complex]) -> ButcherTableau:
    """Single DIRK tableau equivalent to consecutive one-stage steps with ``mus``."""
    mus = list(mus)
    if len(mus) == 1:
        _require_cplus(mus)
        return make_one_stage(mus[0])
    return make_dirk_lyapunov(mus)


def make_dirk_sylvester(mu_hats: Sequence[complex], mu_breves: Sequence[complex]):
    """Coupled DIRK pair ``(lam_hat, lam_breve, beta)`` for the Sylvester iteration.

    ``beta_i = mu_hat_i + conj(mu_breve_i)``; the strictly lower parts are
    filled column-wise with ``beta`` and ``conj(beta)`` respectively.
    """
    mh = np.asarray(mu_hats, dtype=complex)
    mb = np.asarray(mu_breves, dtype=complex)
    if mh.shape != mb.shape or mh.ndim != 1:
        raise ValueError("mu_hats and mu_breves must be 1-D of equal length")
    s = mh.size
    beta = mh + mb.conj()
    lam_hat = np.tril(np.broadcast_to(beta, (s, s)), -1).astype(complex)
    lam_breve = np.tril(np.broadcast_to(beta.conj(), (s, s)), -1).astype(complex)
    lam_hat[np.diag_indices(s)] = mh
    lam_breve[np.diag_indices(s)] = mb
    return lam_hat, lam_breve, beta


def gauss_legendre(s: int) -> ButcherTableau:
    if s == 1:
        return ButcherTableau([[0.5]], [1.0], [0.5])
    if s == 2:
        r = np.sqrt(3.0) / 6.0
        lam = [[0.25, 0.25 - r], [0.25 + r, 0.25]]
        return ButcherTableau(lam, [0.5, 0.5], [0.5 - r, 0.5 + r])
    raise UnsupportedStageCount(f"Gauss-Legendre tableaus are provided for s in (1, 2), got {s}")


def backward_euler() -> ButcherTableau:
    """Implicit Euler; violates the residual condition with defect exactly [1]."""
    return ButcherTableau([[1.0]], [1.0], [1.0])


def rotation_tableau_matrix(mu: complex) -> np.ndarray:
    """Real 2x2 ``[[Re mu, -Im mu], [Im mu, Re mu]]`` with eigenvalues ``mu, conj(mu)``."""
    mu = complex(mu)
    return np.array([[mu.real, -mu.imag], [mu.imag, mu.real]])


def check_residual_condition(t: ButcherTableau) -> TableauDefect:
    D = np.diag(t.beta)
    defect = D @ t.lam.conj() + t.lam.T @ D - np.outer(t.beta, t.beta)
    return TableauDefect(defect, float(np.linalg.norm(defect)))


def check_residual_condition_sylvester(lambda_hat, lambda_breve, beta) -> TableauDefect:
    lam_hat = np.atleast_2d(np.asarray(lambda_hat, dtype=complex))
    lam_breve = np.atleast_2d(np.asarray(lambda_breve, dtype=complex))
    beta = np.atleast_1d(np.asarray(beta, dtype=complex))
    s = beta.size
    if lam_hat.shape != (s, s) or lam_breve.shape != (s, s):
        raise ValueError("inconsistent tableau dimensions")
    D = np.diag(beta)
    defect = D @ lam_breve.conj() + lam_hat.T @ D - np.outer(beta, beta)
    return TableauDefect(defect, float(np.linalg.norm(defect)))


def satisfies_residual_condition(t: ButcherTableau, tol: float = DEFAULT_DEFECT_TOL) -> bool:
    return check_residual_condition(t).passes(tol, t.beta)


def stability_function(t: ButcherTableau, z: complex) -> complex:
    """``R(z) = 1 + z beta^T (I - z lam)^{-1} 1``."""
    z = complex(z)
    mus = t.spectrum
    if np.any(np.abs(1.0 - z * mus) <= 1e-14 * np.maximum(1.0, np.abs(z * mus))):
        raise SingularStabilityDenominator(f"I - z*lam is singular at z = {z}")
    M = np.eye(t.s) - z * t.lam
    try:
        x = np.linalg.solve(M, np.ones(t.s, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularStabilityDenominator(f"I - z*lam is singular at z = {z}") from exc
    return complex(1.0 + z * (t.beta @ x))


def rational_factor(mus, z):
    """Product ``prod_i (1 + conj(mu_i) z) / (1 - mu_i z)``, vectorized over ``z``."""
    mus = np.atleast_1d(np.asarray(mus, dtype=complex))
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for mu in mus:
        out = out * (1.0 + np.conj(mu) * z) / (1.0 - mu * z)
    return out


def real_pair_transform(mu: complex) -> RealPairTransform:
    mu = complex(mu)
    if mu.real <= 0:
        raise NonPositiveRealPart(f"shift {mu} must have positive real part")
    if mu.imag == 0:
        raise RealShiftNotPairable(f"shift {mu} is real; use a plain one-stage step")
    re, im = mu.real, mu.imag
    phi = np.sign(im)
    r = abs(mu)
    z = re / im
    lam_breve = np.array([[re, re + phi * r], [re - phi * r, re]])
    beta_breve = np.array([2.0 * re, 2.0 * re])
    L = np.sqrt(2.0) * np.array([[1.0, 0.0], [z, np.sqrt(z * z + 1.0)]])
    Q = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    return RealPairTransform(mu, lam_breve, beta_breve, L, Q @ L.T, Q)


def check_solvability(t: ButcherTableau, omega: float = 1.0, spectrum_bound="stable", rtol: float = 1e-12) -> bool:
    """Whether the stage equations have a unique solution.

    ``spectrum_bound`` is either the string ``"stable"`` (the matrix is known
    to have its spectrum in the open left half-plane) or an array of its
    eigenvalues. With only stability known the answer is certified solely
    for tableaus whose spectrum lies in the open right half-plane; anything
    else returns ``False`` because it cannot be confirmed.
    """
    mus = t.spectrum
    if isinstance(spectrum_bound, str):
        if spectrum_bound != "stable":
            raise ValueError(f"unknown spectrum bound {spectrum_bound!r}")
        return bool(np.all(mus.real > 0))
    lams = np.atleast_1d(np.asarray(spectrum_bound, dtype=complex))
    prod = omega * np.outer(mus, lams)
    gap = np.abs(1.0 - prod)
    return bool(np.all(gap > rtol * np.maximum(1.0, np.abs(prod))))
