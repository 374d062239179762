"""Command-line front end.

Subcommands
-----------
``solve-lyap``
    Low-rank factor of ``A P + P A^T + B B^T = 0``.
``solve-sylv``
    Factored solution of ``A Y - Y B = F G^T``.
``verify``
    Dense check of a computed factor (small problems only).
``shifts``
    Print generated shift parameters, one ``re im`` pair per line.

Exit codes: 0 converged, 2 not converged (outputs are still written),
1 for invalid input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .adi import solve_adi
from .errors import GramianRKError, NotConverged, ParseError
from .lyapunov import SolverConfig, residual_defect, solve_lyapunov, solve_lyapunov_sstage
from .mmio import format_number, read_matrix_market, write_matrix_market
from .operator import Operator
from .oracle import dense_lyapunov, dense_sylvester
from .shifts import eig_shifts, heuristic_shifts, make_proper
from .sylvester import (
    SylvesterShiftPair,
    exact_sylvester_shifts,
    heuristic_sylvester_shifts,
    solve_sylvester,
)
from .tableau import ButcherTableau

logger = logging.getLogger("gramian_rk")

VERIFY_MAX_N = 300
EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gramian-rk", description="Low-rank Lyapunov and Sylvester solvers.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, need_b=True):
        sp_.add_argument("--A", required=True, help="Matrix Market file with A")
        if need_b:
            sp_.add_argument("--B", required=True, help="Matrix Market file with B")
        sp_.add_argument("-v", "--verbose", action="count", default=0)

    lyap = sub.add_parser("solve-lyap", help="solve A P + P A^T + B B^T = 0")
    common(lyap)
    lyap.add_argument("--shifts", default="auto:20", help="auto:N | eig:N | file:PATH (default auto:20)")
    lyap.add_argument("--k-arnoldi", type=int, default=20, help="Arnoldi steps for auto shifts")
    lyap.add_argument("--tableau-file", help="use this tableau in every step instead of shifts")
    lyap.add_argument("--tol", type=float, default=1e-10)
    lyap.add_argument("--max-steps", type=int, default=100)
    lyap.add_argument("--realify", action="store_true", help="keep all iterates real (proper shifts required)")
    lyap.add_argument("--method", choices=("rk", "adi"), default="rk")
    lyap.add_argument("--out", required=True, help="output prefix")

    syl = sub.add_parser("solve-sylv", help="solve A Y - Y B = F G^T")
    common(syl)
    syl.add_argument("--F", required=True)
    syl.add_argument("--G", required=True)
    syl.add_argument("--shifts", default="auto:20", help="auto:N | eig:N | file:PATH (4 columns per line)")
    syl.add_argument("--k-arnoldi", type=int, default=20)
    syl.add_argument("--tol", type=float, default=1e-10)
    syl.add_argument("--max-steps", type=int, default=100)
    syl.add_argument("--out", required=True)

    ver = sub.add_parser("verify", help="dense check of a computed factor")
    common(ver)
    ver.add_argument("--Z", required=True, help="factor Z (Lyapunov) or Z_hat (Sylvester)")
    ver.add_argument("--Zbreve", help="right factor for a Sylvester check")
    ver.add_argument("--Gamma", help="Gamma file for a Sylvester check")
    ver.add_argument("--F")
    ver.add_argument("--G")

    sh = sub.add_parser("shifts", help="print shift parameters")
    common(sh, need_b=False)
    sh.add_argument("--shifts", default="auto:20", help="auto:N | eig:N")
    sh.add_argument("--k-arnoldi", type=int, default=20)
    return p


def _parse_shift_spec(spec: str):
    kind, _, arg = spec.partition(":")
    if kind in ("auto", "eig"):
        try:
            count = int(arg)
        except ValueError:
            raise InputError(f"shift count must be an integer in '{spec}'") from None
        if count <= 0:
            raise InputError("shift count must be positive")
        return kind, count
    if kind == "file":
        path = Path(arg)
        if not path.is_file():
            raise InputError(f"shift file not found: {arg}")
        return kind, path
    raise InputError(f"unknown shift specification '{spec}' (use auto:N, eig:N or file:PATH)")


def read_shift_file(path, columns: int = 2) -> list:
    """Numbers per line: ``re im`` (or ``re`` alone) for Lyapunov, four for Sylvester."""
    out = []
    for k, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        tok = body.replace(",", " ").split()
        try:
            vals = [float(t) for t in tok]
        except ValueError:
            raise ParseError(f"malformed shift '{body}'", k) from None
        if columns == 2 and len(vals) == 1:
            vals.append(0.0)
        if len(vals) != columns:
            raise ParseError(f"expected {columns} numbers per line, found {len(vals)}", k)
        if columns == 2:
            out.append(complex(vals[0], vals[1]))
        else:
            out.append(SylvesterShiftPair(complex(vals[0], vals[1]), complex(vals[2], vals[3])))
    if not out:
        raise ParseError("shift file contains no shifts", 0)
    return out


def _load(path, name):
    if not Path(path).is_file():
        raise InputError(f"{name}: file not found: {path}")
    return read_matrix_market(path)


def _block(M):
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return M.reshape(-1, 1) if M.ndim == 1 else M


def _square(M, name):
    if M.shape[0] != M.shape[1]:
        raise InputError(f"{name} must be square, got {M.shape[0]}x{M.shape[1]}")
    return M


# ---------------------------------------------------------------------------
# output


def _shift_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def _write_report(prefix: str, report: dict):
    path = Path(f"{prefix}_report.json")
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _write_csv(prefix: str, header, rows):
    with open(f"{prefix}_residual.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0]] + [format_number(x) for x in row[1:]])


def _prepare_dir(prefix):
    parent = Path(prefix).parent
    if str(parent) and not parent.exists():
        raise InputError(f"output directory does not exist: {parent}")


# ---------------------------------------------------------------------------
# subcommands


def _lyap_shifts(args, A: Operator):
    kind, arg = _parse_shift_spec(args.shifts)
    if kind == "auto":
        s = heuristic_shifts(A, args.k_arnoldi, arg)
        return list(s.values), s.source, list(s.flags)
    if kind == "eig":
        if A.n > 2000:
            raise InputError("eig shifts need a dense eigendecomposition; n is too large")
        s = eig_shifts(A, min(arg, A.n))
        vals = list(s.values)
        if args.realify and not s.proper:
            vals = list(make_proper(vals).values)
        return vals, s.source, []
    return read_shift_file(arg, 2), "user", []


def cmd_solve_lyap(args) -> int:
    _prepare_dir(args.out)
    A = _square(_load(args.A, "--A"), "A")
    B = _block(_load(args.B, "--B"))
    if B.shape[0] != A.shape[0]:
        raise InputError(f"B has {B.shape[0]} rows but A has order {A.shape[0]}")
    tableau = None
    if args.tableau_file:
        try:
            tableau = ButcherTableau.from_text(Path(args.tableau_file).read_text())
        except OSError as exc:
            raise InputError(f"cannot read tableau file: {exc}") from None
    if args.max_steps < 0 or not args.tol > 0:
        raise InputError("need --tol > 0 and --max-steps >= 0")
    op = Operator(A)
    cfg = SolverConfig(tol=args.tol, max_steps=args.max_steps, realify=args.realify)
    t0 = time.perf_counter()
    flags: list = []
    if tableau is not None:
        if args.method == "adi":
            raise InputError("--tableau-file cannot be combined with --method adi")
        if args.realify and not tableau.is_real():
            raise InputError("--realify needs a real tableau")
        state = solve_lyapunov_sstage(op, B, [tableau] * args.max_steps, cfg)
        source = "tableau"
        used = [complex(tableau.spectrum[0])] * state.step
        shifts_report = [_shift_pair(x) for x in tableau.spectrum]
        rel = [r / state.h0_norm2 if state.h0_norm2 else 0.0 for r in state.residual_history]
        Z = state.Z
    else:
        shifts, source, flags = _lyap_shifts(args, op)
        if args.method == "adi":
            state = solve_adi(op, B, [-1.0 / complex(s) for s in shifts], cfg)
            used = state.shift_log
            rel = [r / state.w0_norm2 if state.w0_norm2 else 0.0 for r in state.residual_history]
        else:
            state = solve_lyapunov(op, B, shifts, cfg)
            used = state.shift_log
            rel = [r / state.h0_norm2 if state.h0_norm2 else 0.0 for r in state.residual_history]
        shifts_report = [_shift_pair(x) for x in shifts]
        Z = state.Z
    wall = time.perf_counter() - t0
    write_matrix_market(f"{args.out}_Z.mtx", Z, require_real=args.realify)
    _write_csv(
        args.out,
        ["step", "shift_re", "shift_im", "residual"],
        [(j + 1, complex(s).real, complex(s).imag, r) for j, (s, r) in enumerate(zip(used, rel))],
    )
    final = rel[-1] if rel else (0.0 if state.converged else 1.0)
    _write_report(
        args.out,
        {
            "command": "solve-lyap",
            "method": args.method if tableau is None else "tableau",
            "n": int(A.shape[0]),
            "rhs_columns": int(B.shape[1]),
            "shifts": shifts_report,
            "shift_source": source,
            "flags": flags,
            "steps": len(rel),
            "factor_columns": int(Z.shape[1]),
            "final_residual": final,
            "tol": args.tol,
            "realify": bool(args.realify),
            "converged": bool(state.converged),
            "wall_time": wall,
        },
    )
    logger.info("steps=%d residual=%.3e converged=%s", len(rel), final, state.converged)
    return EXIT_OK if state.converged else EXIT_NOT_CONVERGED


def cmd_solve_sylv(args) -> int:
    _prepare_dir(args.out)
    A = _square(_load(args.A, "--A"), "A")
    B = _square(_load(args.B, "--B"), "B")
    F = _block(_load(args.F, "--F"))
    G = _block(_load(args.G, "--G"))
    if F.shape[0] != A.shape[0] or G.shape[0] != B.shape[0] or F.shape[1] != G.shape[1]:
        raise InputError("F must be n x r and G m x r for A (n x n) and B (m x m)")
    if args.max_steps < 0 or not args.tol > 0:
        raise InputError("need --tol > 0 and --max-steps >= 0")
    opA, opB = Operator(A), Operator(B)
    kind, arg = _parse_shift_spec(args.shifts)
    if kind == "auto":
        pairs, source = heuristic_sylvester_shifts(opA, opB, args.k_arnoldi, arg), "heuristic"
    elif kind == "eig":
        if A.shape != B.shape:
            raise InputError("eig shifts for Sylvester need A and B of equal order")
        pairs, source = exact_sylvester_shifts(opA, opB)[:arg], "exact-eigen"
    else:
        pairs, source = read_shift_file(arg, 4), "user"
    cfg = SolverConfig(tol=args.tol, max_steps=args.max_steps)
    t0 = time.perf_counter()
    state = solve_sylvester(opA, opB, F, G, pairs, cfg)
    wall = time.perf_counter() - t0
    write_matrix_market(f"{args.out}_Z.mtx", state.z_hat)
    write_matrix_market(f"{args.out}_Zbreve.mtx", state.z_breve)
    Path(f"{args.out}_Gamma.txt").write_text(
        "".join(f"{format_number(g.real)} {format_number(g.imag)}\n" for g in state.gamma)
    )
    rel = [r / state.rhs_norm if state.rhs_norm else 0.0 for r in state.residual_history]
    _write_csv(
        args.out,
        ["step", "mu_hat_re", "mu_hat_im", "mu_breve_re", "mu_breve_im", "residual"],
        [
            (j + 1, p.mu_hat.real, p.mu_hat.imag, p.mu_breve.real, p.mu_breve.imag, r)
            for j, (p, r) in enumerate(zip(state.shift_log, rel))
        ],
    )
    final = rel[-1] if rel else (0.0 if state.converged else 1.0)
    _write_report(
        args.out,
        {
            "command": "solve-sylv",
            "n": int(A.shape[0]),
            "m": int(B.shape[0]),
            "rhs_columns": int(F.shape[1]),
            "shifts": [_shift_pair(p.mu_hat) + _shift_pair(p.mu_breve) for p in pairs],
            "shift_source": source,
            "steps": len(rel),
            "final_residual": final,
            "tol": args.tol,
            "converged": bool(state.converged),
            "wall_time": wall,
        },
    )
    return EXIT_OK if state.converged else EXIT_NOT_CONVERGED


def _read_gamma(path):
    vals = []
    for k, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        tok = line.split()
        try:
            vals.append(complex(float(tok[0]), float(tok[1]) if len(tok) > 1 else 0.0))
        except (ValueError, IndexError):
            raise ParseError(f"malformed Gamma entry '{line}'", k) from None
    return np.array(vals, dtype=complex)


def cmd_verify(args) -> int:
    A = _square(_load(args.A, "--A"), "A")
    Z = _block(_load(args.Z, "--Z"))
    n = A.shape[0]
    Ad = A.toarray() if sp.issparse(A) else A
    out: dict = {}
    if args.Zbreve or args.Gamma:
        if not (args.Zbreve and args.Gamma and args.F and args.G):
            raise InputError("a Sylvester check needs --Zbreve, --Gamma, --F and --G")
        B = _square(_load(args.B, "--B"), "B")
        Bd = B.toarray() if sp.issparse(B) else B
        Zb = _block(_load(args.Zbreve, "--Zbreve"))
        gamma = _read_gamma(args.Gamma)
        F, G = _block(_load(args.F, "--F")), _block(_load(args.G, "--G"))
        if not (Z.shape[1] == Zb.shape[1] == gamma.size):
            raise InputError("column counts of Z, Zbreve and Gamma differ")
        Y = (Z * gamma) @ Zb.conj().T
        R = Ad @ Y - Y @ Bd - F @ G.T
        out["residual_defect"] = float(np.linalg.norm(R))
        out["relative_residual"] = float(np.linalg.norm(R) / max(np.linalg.norm(F @ G.T), 1e-300))
        if n <= VERIFY_MAX_N and Bd.shape[0] <= VERIFY_MAX_N:
            Yo = dense_sylvester(Ad, Bd, F, G).matrix
            out["oracle_error"] = float(np.linalg.norm(Y - Yo) / max(np.linalg.norm(Yo), 1e-300))
    else:
        B = _block(_load(args.B, "--B"))
        if Z.shape[0] != n or B.shape[0] != n:
            raise InputError("row counts of Z and B must equal the order of A")
        zero = np.zeros((n, 1))
        defect = residual_defect(Ad, Z, zero, B)
        out["residual_defect"] = defect
        out["relative_residual"] = defect / max(np.linalg.norm(B @ B.conj().T), 1e-300)
        if n <= VERIFY_MAX_N:
            P = dense_lyapunov(Ad, B).matrix
            out["oracle_error"] = float(np.linalg.norm(Z @ Z.conj().T - P) / max(np.linalg.norm(P), 1e-300))
    for k in sorted(out):
        print(f"{k} {format_number(out[k])}")
    return EXIT_OK


def cmd_shifts(args) -> int:
    A = _square(_load(args.A, "--A"), "A")
    kind, arg = _parse_shift_spec(args.shifts)
    op = Operator(A)
    if kind == "auto":
        vals = heuristic_shifts(op, args.k_arnoldi, arg).values
    elif kind == "eig":
        vals = eig_shifts(op, min(arg, op.n)).values
    else:
        raise InputError("the shifts subcommand accepts auto:N or eig:N")
    for v in vals:
        print(f"{format_number(v.real)} {format_number(v.imag)}")
    return EXIT_OK


COMMANDS = {
    "solve-lyap": cmd_solve_lyap,
    "solve-sylv": cmd_solve_sylv,
    "verify": cmd_verify,
    "shifts": cmd_shifts,
}


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("gramian_rk").setLevel(level)
    try:
        return COMMANDS[args.command](args)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (InputError, GramianRKError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
