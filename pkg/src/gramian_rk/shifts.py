"""Shift parameters for the one-stage iterations.

Three sources are offered. :func:`eig_shifts` uses the full spectrum and gives
finite termination for normal matrices. :func:`heuristic_shifts` samples the
spectrum with Arnoldi on ``A`` and ``A^{-1}`` and picks shifts greedily.
:func:`make_proper` turns any list into a conjugation-closed, ordered set
suitable for real arithmetic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as spla

from .errors import ArnoldiBreakdown, UnstableMatrix
from .operator import as_operator
from .tableau import rational_factor

__all__ = [
    "ShiftSet",
    "eig_shifts",
    "heuristic_shifts",
    "make_proper",
    "is_proper",
    "arnoldi_ritz",
    "mirror",
]

IMAG_CLEAN_TOL = 1e-12


@dataclass(frozen=True)
class ShiftSet:
    """Ordered shift values plus where they came from.

    ``source`` is one of ``"exact-eigen"``, ``"heuristic"`` or ``"user"``;
    ``flags`` collects non-fatal notes such as an Arnoldi breakdown.
    """

    values: tuple
    proper: bool
    source: str = "user"
    flags: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)


def mirror(lam):
    """Map eigenvalue estimates to shifts, ``lam -> -1/conj(lam)``."""
    lam = np.asarray(lam, dtype=complex)
    return -1.0 / np.conj(lam)


def _clean(values, tol=IMAG_CLEAN_TOL):
    out = []
    for v in values:
        v = complex(v)
        if abs(v.imag) <= tol * max(abs(v), 1e-300):
            v = complex(v.real, 0.0)
        out.append(v)
    return out


def is_proper(values: Sequence[complex], rtol: float = 1e-12) -> bool:
    """True if every non-real value sits right next to its conjugate."""
    vals = [complex(v) for v in values]
    i = 0
    while i < len(vals):
        v = vals[i]
        if v.imag == 0:
            i += 1
            continue
        if i + 1 >= len(vals) or abs(vals[i + 1] - v.conjugate()) > rtol * abs(v):
            return False
        i += 2
    return True


def make_proper(values: Sequence[complex], source: str = "user", flags=()) -> ShiftSet:
    """Close ``values`` under conjugation and order them deterministically.

    Items (real values and conjugate pairs) are sorted by real part and then
    by ``|Im|``; each pair is listed with its ``Im > 0`` member first. A value
    and its conjugate both present in the input count as one pair.
    """
    vals = _clean(values)
    items = [(v.real, 0.0) for v in vals if v.imag == 0]
    counts: dict = {}
    for v in vals:
        if v.imag != 0:
            pos_neg = counts.setdefault((v.real, abs(v.imag)), [0, 0])
            pos_neg[0 if v.imag > 0 else 1] += 1
    for key, (npos, nneg) in counts.items():
        items.extend([key] * max(npos, nneg))
    items.sort()
    out = []
    for re, im in items:
        out.append(complex(re, im))
        if im:
            out.append(complex(re, -im))
    return ShiftSet(tuple(out), True, source, tuple(flags))


def eig_shifts(A, count: int | None = None) -> ShiftSet:
    """Shifts ``mu_j = -1/conj(lambda_j)`` from the eigenvalues of dense ``A``.

    Eigenvalues are taken in order of increasing ``|lambda|``; with
    ``count = n`` all of them are used, which makes the one-stage iteration
    terminate after ``n`` steps for normal ``A``.
    """
    A = as_operator(A).to_dense()
    lam = spla.eigvals(A)
    if np.any(lam.real >= 0):
        raise UnstableMatrix(f"spectral abscissa {lam.real.max():.3e} is not negative")
    n = lam.size
    count = n if count is None else int(count)
    if count < 0 or count > n:
        raise ValueError(f"count must lie in [0, {n}]")
    lam = lam[np.lexsort((lam.imag, lam.real, np.abs(lam)))]
    mus = _clean(mirror(lam[:count]))
    return ShiftSet(tuple(mus), is_proper(mus), "exact-eigen")


def arnoldi_ritz(matvec, v0, k: int, symmetric: bool = False):
    """Ritz values from ``k`` Arnoldi steps; returns ``(values, broke_down)``."""
    n = v0.shape[0]
    k = min(k, n)
    V = np.zeros((n, k + 1))
    H = np.zeros((k + 1, k))
    V[:, 0] = v0 / np.linalg.norm(v0)
    m = k
    broke = False
    for j in range(k):
        w = np.asarray(matvec(V[:, j])).ravel().real
        for _ in range(2):  # classical Gram-Schmidt with one reorthogonalization
            c = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ c
            H[: j + 1, j] += c
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] <= 1e-12 * max(1.0, np.abs(H[: j + 1, j]).max()):
            m = j + 1
            broke = m < k
            break
        V[:, j + 1] = w / H[j + 1, j]
    Hm = H[:m, :m]
    if symmetric:
        Hm = 0.5 * (Hm + Hm.T)
        return np.linalg.eigvalsh(Hm).astype(complex), broke
    return np.linalg.eigvals(Hm), broke


def _greedy(candidates, samples, count):
    """Pick up to ``count`` shifts minimizing ``max |prod R(samples)|``.

    ``candidates`` holds one representative per conjugate pair (``Im >= 0``);
    a complex pick adds both members. Each candidate is used at most once per
    pass over the pool; a new pass starts when the pool is exhausted. Ties go
    to the smallest ``|mu|``.
    """
    cand = sorted(set(candidates), key=lambda c: (abs(c), c.real, c.imag))
    logs = {c: _log_factor(c, samples) for c in cand}
    acc = np.zeros(samples.size)
    chosen: list = []
    used: set = set()
    while True:
        room = count - len(chosen)
        fits = [c for c in cand if (1 if c.imag == 0 else 2) <= room]
        if not fits:
            return chosen
        pool = [c for c in fits if c not in used]
        if not pool:
            used.clear()
            pool = fits
        best = None
        for c in pool:
            score = (acc + logs[c]).max()
            if best is None or score < best[0]:
                best = (score, c)
        c = best[1]
        used.add(c)
        acc = acc + logs[c]
        chosen.extend([c] if c.imag == 0 else [c, c.conjugate()])


def _log_factor(mu, samples):
    group = [mu] if mu.imag == 0 else [mu, mu.conjugate()]
    out = np.zeros(samples.size)
    for g in group:
        # floor keeps exact hits finite so later picks still discriminate
        out += np.log(np.maximum(np.abs(rational_factor([g], samples)), 1e-16))
    return out


def heuristic_shifts(A, k_arnoldi: int = 20, count: int = 20, seed: int = 0) -> ShiftSet:
    """Greedy shifts from Ritz values of ``A`` and ``A^{-1}``.

    ``k_arnoldi`` Arnoldi steps are run on each operator from a fixed random
    start. Stable Ritz values are mirrored to the right half-plane and used
    both as the candidate pool and as the sample set on which the product of
    rational factors is minimized. Conjugate candidates are always added in
    pairs, so the result is proper. The selection is a heuristic and is not
    optimal for the rational min-max problem.
    """
    op = as_operator(A)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(op.n)
    flags = []
    ritz_a, broke_a = arnoldi_ritz(op.apply, v0, k_arnoldi, op.symmetric)
    ritz_i, broke_i = arnoldi_ritz(lambda x: op.native_shifted_solve(0.0, x), v0, k_arnoldi, op.symmetric)
    if broke_a or broke_i:
        warnings.warn("Arnoldi broke down early; fewer Ritz values available", ArnoldiBreakdown, stacklevel=2)
        flags.append("arnoldi-breakdown")
    ritz_i = ritz_i[np.abs(ritz_i) > 0]
    ritz = np.concatenate([ritz_a, 1.0 / ritz_i])
    if op.symmetric:
        ritz = ritz.real.astype(complex)
    ritz = np.asarray(_clean(ritz), dtype=complex)
    ritz = ritz[ritz.real < 0]
    if ritz.size == 0:
        raise UnstableMatrix("no Ritz values in the open left half-plane")
    samples = ritz
    candidates = _clean(mirror(ritz))
    # keep the complex candidates with Im >= 0 as pair representatives
    candidates = [c if c.imag >= 0 else c.conjugate() for c in candidates]
    chosen = _greedy(candidates, samples, count)
    return ShiftSet(tuple(chosen), is_proper(chosen), "heuristic", tuple(flags))
