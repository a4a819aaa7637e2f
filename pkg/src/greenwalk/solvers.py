"""Linear solves for ``(I - A) k = b`` with nonnegative ``A`` and ``b``.

Float solves start from a sparse LU solution and then run positive
fixed-point sweeps ``k <- b + A k``.  Every entry of a sweep is a sum of
nonnegative terms, so even entries near 1e-40 end with full relative
accuracy, which an LU solution alone does not guarantee.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DivergenceError, ResourceError

EXACT_STATE_CAP = 4000
# dense fraction-free elimination is used up to this many states
DENSE_EXACT_MAX = 600


def solve_positive(A: sp.spmatrix, b: np.ndarray, rtol: float = 4e-16,
                   max_sweeps: int = 20000) -> np.ndarray:
    """Minimal nonnegative solution of ``k = b + A k``.

    Raises
    ------
    DivergenceError
        when the system has no nonnegative solution (spectral radius of
        ``A`` at least 1) or the sweeps fail to settle.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if not b.any():
        return np.zeros(n)
    M = (sp.identity(n, format="csc") - A.tocsc())
    try:
        k = spla.splu(M).solve(b)
    except RuntimeError as exc:  # exactly singular
        raise DivergenceError(f"I - Q is singular ({exc}); spectral radius of Q >= 1") from exc
    scale = np.max(np.abs(k)) if np.all(np.isfinite(k)) else np.inf
    if not np.isfinite(scale) or np.min(k) < -1e-9 * max(scale, 1.0):
        raise DivergenceError("restricted operator has spectral radius >= 1 "
                              "(no nonnegative solution)")
    k = np.maximum(k, 0.0)
    best, stall = np.inf, 0
    for _ in range(max_sweeps):
        nxt = b + A @ k
        diff = np.abs(nxt - k)
        k = nxt
        if np.all(diff <= rtol * k):
            return k
        if not np.all(np.isfinite(k)):
            break
        # last-bit flip-flops never meet rtol; accept once the change stalls
        # at a few ulps
        pos = k > 0
        rel = float(np.max(diff[pos] / k[pos])) if pos.any() else 0.0
        if rel < best:
            best, stall = rel, 0
        else:
            stall += 1
            if stall >= 50 and best <= 64 * np.finfo(float).eps:
                return k
    raise DivergenceError("positive fixed-point sweeps did not settle; "
                          "spectral radius of Q is too close to 1")


def exact_solve(rows: list[dict[int, Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Solve ``(I - A) k = b`` exactly; ``rows[i]`` maps column -> ``A[i, j]``.

    Small systems use fraction-free Bareiss elimination on integers, larger
    ones sparse Gauss-Jordan on dictionaries of Fractions.
    """
    n = len(rows)
    if n > EXACT_STATE_CAP:
        raise ResourceError(f"exact solve on {n} states exceeds the cap {EXACT_STATE_CAP}")
    if n <= DENSE_EXACT_MAX:
        return _bareiss_solve(rows, b)
    return _sparse_fraction_solve(rows, b)


def _bareiss_solve(rows: list[dict[int, Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Dense Bareiss elimination after clearing denominators.

    Every intermediate entry is a minor of the integer matrix, so the
    divisions are exact and no gcd work is done until back substitution.
    """
    n = len(rows)
    if n == 0:
        return []
    D = 1
    for row in rows:
        for v in row.values():
            D = math.lcm(D, Fraction(v).denominator)
    for v in b:
        D = math.lcm(D, Fraction(v).denominator)
    M = []
    for i, row in enumerate(rows):
        r = [0] * (n + 1)
        r[i] = D
        for j, v in row.items():
            r[j] -= int(Fraction(v) * D)
        r[n] = int(Fraction(b[i]) * D)
        M.append(r)
    prev = 1
    for k in range(n):
        if M[k][k] == 0:
            i = next((i for i in range(k + 1, n) if M[i][k]), None)
            if i is None:
                raise DivergenceError("I - Q is singular in exact solve")
            M[k], M[i] = M[i], M[k]
        pk = M[k]
        piv = pk[k]
        for i in range(k + 1, n):
            ri = M[i]
            f = ri[k]
            if f:
                for j in range(k + 1, n + 1):
                    ri[j] = (ri[j] * piv - f * pk[j]) // prev
            else:
                for j in range(k + 1, n + 1):
                    if ri[j]:
                        ri[j] = ri[j] * piv // prev
            ri[k] = 0
        prev = piv
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        r = M[i]
        acc = Fraction(r[n])
        for j in range(i + 1, n):
            if r[j]:
                acc -= r[j] * x[j]
        x[i] = acc / r[i]
    return x


def _sparse_fraction_solve(rows: list[dict[int, Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Sparse Gauss-Jordan on dictionaries of Fractions, natural pivot order."""
    n = len(rows)
    M = []
    for i, row in enumerate(rows):
        r = {j: -v for j, v in row.items() if v}
        r[i] = r.get(i, Fraction(0)) + 1
        if r[i] == 0:
            del r[i]
        M.append(r)
    rhs = [Fraction(v) for v in b]
    # column -> set of rows with a nonzero there, to find eliminations quickly
    col_rows: dict[int, set] = {}
    for i, r in enumerate(M):
        for j in r:
            col_rows.setdefault(j, set()).add(i)
    for p in range(n):
        piv = M[p].get(p)
        if not piv:
            cand = [i for i in col_rows.get(p, ()) if i > p and M[i].get(p)]
            if not cand:
                raise DivergenceError("I - Q is singular in exact solve")
            i = min(cand)
            M[p], M[i] = M[i], M[p]
            rhs[p], rhs[i] = rhs[i], rhs[p]
            for j in M[p]:
                col_rows[j].discard(i)
                col_rows[j].add(p)
            for j in M[i]:
                col_rows.setdefault(j, set()).add(i)
            # rows p and i swapped; rebuild membership for touched columns
            for j in set(M[p]) | set(M[i]):
                s = col_rows.setdefault(j, set())
                s.discard(p)
                s.discard(i)
                if j in M[p]:
                    s.add(p)
                if j in M[i]:
                    s.add(i)
            piv = M[p][p]
        prow = M[p]
        if piv != 1:
            inv = 1 / piv
            for j in prow:
                prow[j] *= inv
            rhs[p] *= inv
        for i in list(col_rows.get(p, ())):
            if i == p:
                continue
            f = M[i].get(p)
            if not f:
                continue
            row = M[i]
            for j, v in prow.items():
                nv = row.get(j, Fraction(0)) - f * v
                if nv:
                    if j not in row:
                        col_rows.setdefault(j, set()).add(i)
                    row[j] = nv
                elif j in row:
                    del row[j]
                    col_rows[j].discard(i)
            rhs[i] -= f * rhs[p]
    return rhs


def power_iteration(A: sp.spmatrix, tol: float = 1e-12, max_iter: int = 200000,
                    v0: np.ndarray | None = None) -> tuple[float, float]:
    """Perron root of a nonnegative matrix by normalized power iteration.

    Returns ``(rayleigh, upper)``: for symmetric ``A`` the Rayleigh quotient
    is a lower bound of the top eigenvalue, and ``upper`` is the
    Collatz-Wielandt bound ``max (A v)_i / v_i``, valid for any nonnegative
    ``A``.  The lazy matrix ``(A + c I)/2`` is iterated so that bipartite
    structure does not stall convergence.
    """
    n = A.shape[0]
    if n == 0:
        return 0.0, 0.0
    A = sp.csr_matrix(A)
    if A.nnz == 0:
        return 0.0, 0.0
    shift = float(np.asarray(abs(A).sum(axis=1)).max())
    v = np.ones(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    v /= np.linalg.norm(v)
    lam = upper = 0.0
    for it in range(max_iter):
        w = A @ v
        lam_new = float(v @ w)
        nxt = 0.5 * (w + shift * v)
        nxt /= np.linalg.norm(nxt)
        if it % 16 == 0:
            upper = float(np.max(w / v))
            if upper - lam_new <= tol * upper:
                return lam_new, upper
            # reducible operators: the bracket need not close, so also stop
            # once the vector itself has settled
            if it and abs(lam_new - lam) <= tol * lam_new and np.linalg.norm(nxt - v) < 1e-12:
                return lam_new, upper
            lam = lam_new
        v = nxt
    upper = float(np.max((A @ v) / v))
    return lam, upper
