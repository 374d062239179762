"""Matrix Market reading and writing with line-accurate error messages.

Coordinate files become ``scipy.sparse`` CSR matrices and array files become
dense ``numpy`` arrays. Symmetric, skew-symmetric and Hermitian files are
expanded on reading. Numbers are written with 17 significant digits so a
write/read/write cycle reproduces the numeric content exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, SymmetryViolation

__all__ = ["read_matrix_market", "write_matrix_market", "format_number"]

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "integer", "complex", "pattern")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric", "hermitian")


def format_number(x: float) -> str:
    return "%.17g" % x


def _parse_header(line: str):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    fmt, fld, sym = (p.lower() for p in parts[2:])
    if fmt not in _FORMATS:
        raise ParseError(f"unknown format '{fmt}'", 1)
    if fld not in _FIELDS:
        raise ParseError(f"unknown field '{fld}'", 1)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unknown symmetry '{sym}'", 1)
    if fmt == "array" and fld == "pattern":
        raise ParseError("pattern field is not allowed for array format", 1)
    if fld != "complex" and sym == "hermitian":
        raise ParseError("hermitian symmetry requires complex field", 1)
    return fmt, fld, sym


def _numbers(tokens, count, lineno, kind):
    if len(tokens) != count:
        raise ParseError(f"expected {count} fields, found {len(tokens)}", lineno)
    try:
        return [kind(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"malformed number: {exc}", lineno) from None


def _value(tokens, fld, lineno):
    if fld == "pattern":
        _numbers(tokens, 0, lineno, float)
        return 1.0
    if fld == "complex":
        re, im = _numbers(tokens, 2, lineno, float)
        return complex(re, im)
    if fld == "integer":
        return float(_numbers(tokens, 1, lineno, int)[0])
    return _numbers(tokens, 1, lineno, float)[0]


def _mirror(v, sym):
    if sym == "symmetric":
        return v
    if sym == "skew-symmetric":
        return -v
    return np.conj(v)


def read_matrix_market(path, dense: bool = False):
    """Read a Matrix Market file.

    Parameters
    ----------
    path
        File to read.
    dense
        Return a dense array even for coordinate files.

    Raises
    ------
    ParseError
        Malformed header, size line or entry; carries the 1-based line number.
    SymmetryViolation
        A symmetric, skew-symmetric or Hermitian file lists both ``(i, j)``
        and ``(j, i)`` with inconsistent values, or has a forbidden diagonal.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    fmt, fld, sym = _parse_header(lines[0])
    body = [(k + 1, ln) for k, ln in enumerate(lines) if k > 0 and ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line", len(lines) + 1)
    size_no, size_line = body[0]
    entries = body[1:]
    dtype = complex if fld == "complex" else float
    if fmt == "coordinate":
        rows, cols, nnz = _numbers(size_line.split(), 3, size_no, int)
    else:
        rows, cols = _numbers(size_line.split(), 2, size_no, int)
    if rows < 0 or cols < 0:
        raise ParseError("negative dimension", size_no)
    if sym != "general" and rows != cols:
        raise ParseError(f"{sym} matrix must be square", size_no)

    if fmt == "array":
        if sym == "general":
            expected = rows * cols
            positions = [(i, j) for j in range(cols) for i in range(rows)]
        else:
            first = 0 if sym != "skew-symmetric" else 1
            positions = [(i, j) for j in range(cols) for i in range(j + first, rows)]
            expected = len(positions)
        if len(entries) < expected:
            last = entries[-1][0] if entries else size_no
            raise ParseError(f"expected {expected} values, file ends after {len(entries)}", last + 1)
        if len(entries) > expected:
            raise ParseError("more values than the declared size", entries[expected][0])
        M = np.zeros((rows, cols), dtype=dtype)
        for (lineno, ln), (i, j) in zip(entries, positions):
            v = _value(ln.split(), fld, lineno)
            M[i, j] = v
            if sym != "general" and i != j:
                M[j, i] = _mirror(v, sym)
        if sym == "hermitian" and np.any(np.diag(M).imag != 0):
            raise SymmetryViolation("hermitian matrix has a non-real diagonal entry")
        return M

    if nnz < 0:
        raise ParseError("negative entry count", size_no)
    if len(entries) < nnz:
        last = entries[-1][0] if entries else size_no
        raise ParseError(f"expected {nnz} entries, file ends after {len(entries)}", last + 1)
    if len(entries) > nnz:
        raise ParseError("more entries than declared", entries[nnz][0])
    seen: dict = {}
    for lineno, ln in entries:
        tok = ln.split()
        if len(tok) < 2:
            raise ParseError("entry needs row and column indices", lineno)
        i, j = _numbers(tok[:2], 2, lineno, int)
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise ParseError(f"index ({i}, {j}) out of range", lineno)
        v = _value(tok[2:], fld, lineno)
        key = (i - 1, j - 1)
        if sym != "general" and i == j:
            if sym == "skew-symmetric" and v != 0:
                raise SymmetryViolation(f"line {lineno}: skew-symmetric matrix has nonzero diagonal")
            if sym == "hermitian" and complex(v).imag != 0:
                raise SymmetryViolation(f"line {lineno}: hermitian matrix has a non-real diagonal entry")
        seen[key] = seen.get(key, 0) + v
    data = dict(seen)
    if sym != "general":
        for (i, j), v in seen.items():
            if i == j:
                continue
            mv = _mirror(v, sym)
            if (j, i) in seen:
                if seen[(j, i)] != mv:
                    raise SymmetryViolation(f"entries ({i + 1}, {j + 1}) and ({j + 1}, {i + 1}) are inconsistent")
            else:
                data[(j, i)] = mv
    if data:
        ij = np.array(list(data.keys()))
        vals = np.array(list(data.values()), dtype=dtype)
        M = sp.coo_matrix((vals, (ij[:, 0], ij[:, 1])), shape=(rows, cols)).tocsr()
    else:
        M = sp.csr_matrix((rows, cols), dtype=dtype)
    return M.toarray() if dense else M


def _fmt_value(v, is_complex):
    if is_complex:
        v = complex(v)
        return f"{format_number(v.real)} {format_number(v.imag)}"
    return format_number(float(v))


def write_matrix_market(path, matrix, comment: str | None = None, require_real: bool = False) -> Path:
    """Write a dense array (array format) or sparse matrix (coordinate format).

    The field is ``complex`` when the data has a complex dtype and ``real``
    otherwise. With ``require_real`` a complex input must have zero imaginary
    part; it is then written in real format.
    """
    path = Path(path)
    is_sparse = sp.issparse(matrix)
    M = matrix if is_sparse else np.atleast_2d(np.asarray(matrix))
    if M.ndim != 2:
        raise ValueError("only matrices can be written")
    is_complex = np.iscomplexobj(M.data if is_sparse else M)
    if require_real and is_complex:
        imag = M.imag if not is_sparse else M.tocoo().data.imag
        if np.any(imag != 0):
            raise ValueError("matrix has nonzero imaginary part but real output was required")
        M = M.real
        is_complex = False
    fld = "complex" if is_complex else "real"
    fmt = "coordinate" if is_sparse else "array"
    out = [f"%%MatrixMarket matrix {fmt} {fld} general"]
    if comment:
        out.extend("%" + c for c in comment.splitlines())
    rows, cols = M.shape
    if is_sparse:
        C = sp.csc_matrix(M)
        C.sort_indices()
        C.sum_duplicates()
        out.append(f"{rows} {cols} {C.nnz}")
        for j in range(cols):
            for k in range(C.indptr[j], C.indptr[j + 1]):
                out.append(f"{C.indices[k] + 1} {j + 1} {_fmt_value(C.data[k], is_complex)}")
    else:
        out.append(f"{rows} {cols}")
        for j in range(cols):
            for i in range(rows):
                out.append(_fmt_value(M[i, j], is_complex))
    path.write_text("\n".join(out) + "\n", encoding="ascii")
    return path
