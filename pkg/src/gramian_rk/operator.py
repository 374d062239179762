"""Matrix access for the solvers: products and cached shifted solves.

Every iteration step needs a solve with ``I - mu*A`` (or ``A + alpha*I`` for
the reference ADI). Factorizations are cached per shift so that cyclic or
repeated shift sequences factor each matrix only once. The cache is guarded
by a lock, which makes a single :class:`Operator` safe to share between
threads running independent solves.
"""

from __future__ import annotations

import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from .errors import StageSolveFailed

__all__ = ["Operator", "as_operator", "max_threads"]

SHIFT_MATCH_TOL = 1e-14


def max_threads() -> int:
    """Worker cap for parallel pre-factorization (``GRAMIAN_RK_THREADS``)."""
    raw = os.environ.get("GRAMIAN_RK_THREADS", "")
    try:
        val = int(raw)
    except ValueError:
        val = 0
    return val if val > 0 else min(4, os.cpu_count() or 1)


class _DenseLU:
    def __init__(self, M):
        with warnings.catch_warnings():
            # singularity is reported below as StageSolveFailed
            warnings.simplefilter("ignore", spla.LinAlgWarning)
            self.lu, self.piv = spla.lu_factor(M, check_finite=True)
        self.is_complex = np.iscomplexobj(self.lu)
        d = np.abs(np.diag(self.lu))
        if d.size and (d.min() == 0.0 or d.min() <= 1e-15 * d.max()):
            raise StageSolveFailed("shifted matrix is numerically singular")

    def solve(self, C, trans=False):
        return spla.lu_solve((self.lu, self.piv), C, trans=1 if trans else 0)


class _SparseLU:
    def __init__(self, M):
        try:
            self.lu = spsla.splu(sp.csc_matrix(M))
            self.is_complex = np.iscomplexobj(self.lu.U)
        except RuntimeError as exc:
            raise StageSolveFailed(f"sparse factorization failed: {exc}") from exc

    def solve(self, C, trans=False):
        dtype = complex if self.is_complex else float
        return self.lu.solve(np.ascontiguousarray(C, dtype=dtype), trans="T" if trans else "N")


class Operator:
    """A real square matrix, dense or sparse, with cached shifted solves.

    Parameters
    ----------
    matrix
        ``numpy`` array or any ``scipy.sparse`` matrix.
    symmetric
        Optional hint; detected from the data when omitted.
    """

    def __init__(self, matrix, symmetric=None):
        if sp.issparse(matrix):
            self._mat = sp.csr_matrix(matrix)
            self.sparse = True
        else:
            self._mat = np.asarray(matrix)
            self.sparse = False
        if self._mat.ndim != 2 or self._mat.shape[0] != self._mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got {self._mat.shape}")
        self.n = self._mat.shape[0]
        self._symmetric = symmetric
        self._cache = {}
        self._lock = threading.Lock()
        self.factorizations = 0

    def __repr__(self):
        kind = "sparse" if self.sparse else "dense"
        return f"Operator(n={self.n}, {kind}, cached={len(self._cache)})"

    @property
    def dimension(self) -> int:
        return self.n

    @property
    def matrix(self):
        return self._mat

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self._mat)

    @property
    def symmetric(self) -> bool:
        if self._symmetric is None:
            diff = self._mat - self._mat.T
            nd = abs(diff).max() if self.sparse else np.abs(diff).max(initial=0.0)
            scale = abs(self._mat).max() if self.sparse else np.abs(self._mat).max(initial=0.0)
            self._symmetric = bool(nd <= 1e-14 * max(scale, 1e-300))
        return self._symmetric

    def to_dense(self) -> np.ndarray:
        return self._mat.toarray() if self.sparse else np.array(self._mat)

    def transpose(self) -> "Operator":
        return Operator(self._mat.T, symmetric=self._symmetric)

    def __neg__(self) -> "Operator":
        return Operator(-self._mat, symmetric=self._symmetric)

    def apply(self, X):
        return self._mat @ X

    def transpose_apply(self, X):
        return self._mat.T @ X

    # -- factorizations -------------------------------------------------

    def _lookup(self, kind, shift):
        for (k, key), fac in self._cache.items():
            if k == kind and abs(key - shift) <= SHIFT_MATCH_TOL * max(1.0, abs(shift)):
                return fac
        return None

    def _factor(self, kind, shift):
        shift = complex(shift)
        with self._lock:
            fac = self._lookup(kind, shift)
        if fac is not None:
            return fac
        coef = shift.real if shift.imag == 0 else shift
        if self.sparse:
            eye = sp.identity(self.n, format="csr")
            M = eye - coef * self._mat if kind == "rk" else self._mat + coef * eye
            fac = _SparseLU(M)
        else:
            eye = np.eye(self.n)
            M = eye - coef * self._mat if kind == "rk" else self._mat + coef * eye
            fac = _DenseLU(M)
        with self._lock:
            existing = self._lookup(kind, shift)
            if existing is not None:
                return existing
            self._cache[(kind, shift)] = fac
            self.factorizations += 1
        return fac

    def prefactor(self, shifts, native=False):
        """Factor ``I - mu A`` (or ``A + alpha I`` if ``native``) for distinct shifts in parallel."""
        kind = "adi" if native else "rk"
        distinct = []
        for s in shifts:
            s = complex(s)
            if all(abs(s - d) > SHIFT_MATCH_TOL * max(1.0, abs(s)) for d in distinct):
                distinct.append(s)
        workers = min(max_threads(), max(1, len(distinct)))
        if workers == 1:
            for s in distinct:
                self._factor(kind, s)
            return
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda s: self._factor(kind, s), distinct))

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def _solve(self, kind, shift, C, trans):
        fac = self._factor(kind, shift)
        C = np.asarray(C)
        if complex(shift).imag != 0:
            C = C.astype(complex, copy=False)
        if np.iscomplexobj(C) and not fac.is_complex:
            X = fac.solve(C.real, trans=trans) + 1j * fac.solve(C.imag, trans=trans)
        else:
            X = fac.solve(C, trans=trans)
        if not np.all(np.isfinite(X)):
            raise StageSolveFailed(f"non-finite solution for shift {shift}")
        return X

    def shifted_solve(self, mu, C):
        """Solve ``(I - mu A) X = C``."""
        return self._solve("rk", mu, C, False)

    def transpose_shifted_solve(self, mu, C):
        """Solve ``(I - mu A^T) X = C`` reusing the factorization of ``I - mu A``."""
        return self._solve("rk", mu, C, True)

    def native_shifted_solve(self, alpha, C):
        """Solve ``(A + alpha I) X = C``; ``alpha = 0`` gives a plain solve with ``A``."""
        return self._solve("adi", alpha, C, False)


def as_operator(A) -> Operator:
    return A if isinstance(A, Operator) else Operator(A)
