"""Hadamard triples: verification, towers ``(R^k, B_k, L_k^T)`` and gasket triples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .digits import DEFAULT_CAP, check_budget, dual_expand, expand_digits
from .errors import NotHadamard, NotRealHadamard, SizeMismatch
from .lattice import IntegerMatrix, as_digits, is_simple_digit_set

UNITARY_TOL = 1e-12


def phase_numerators(R, B, L) -> tuple[np.ndarray, int]:
    """Exact ``<R^{-1} b, l> mod 1`` as integer numerators over ``D = |det R|``.

    Returns ``(P, D)`` with ``P[i, j] = D <R^{-1} b_j, l_i> mod D``.
    """
    R = IntegerMatrix.of(R)
    det = R.det
    D = abs(det)
    sign = 1 if det > 0 else -1
    adj = R.adjugate
    B = as_digits(B)
    L = as_digits(L)
    # D R^{-1} b = sign * adj(R) b
    U = [tuple((sign * x) % D for x in adj @ b) for b in B]
    Lr = [tuple(x % D for x in l) for l in L]
    if D < 2**30:
        Ua = np.array(U, dtype=np.int64).reshape(len(B), R.d)
        La = np.array(Lr, dtype=np.int64).reshape(len(L), R.d)
        P = np.zeros((len(L), len(B)), dtype=np.int64)
        for i in range(R.d):
            P = (P + np.outer(La[:, i], Ua[:, i]) % D) % D
        return P, D
    P = np.array([[sum(a * c for a, c in zip(u, l)) % D for u in U] for l in Lr], dtype=object)
    return P, D


def character_matrix(R, B, L, sign: int = 1) -> np.ndarray:
    """``[exp(sign 2 pi i <R^{-1} b, l>)]`` with rows ``l`` and columns ``b``."""
    P, D = phase_numerators(R, B, L)
    if P.dtype == object:
        P = np.array([[float(x) / D for x in row] for row in P])
        return np.exp(sign * 2j * np.pi * P)
    return np.exp(sign * 2j * np.pi * (P / D))


@dataclass(frozen=True)
class HadamardTriple:
    R: IntegerMatrix
    B: tuple
    L: tuple
    deviation: float
    B_simple: bool = True
    L_simple: bool = True
    accepted: bool = True
    tol: float = UNITARY_TOL
    reasons: tuple = field(default=())

    @property
    def N(self) -> int:
        return len(self.B)

    def require(self) -> "HadamardTriple":
        if not self.accepted:
            raise NotHadamard("; ".join(self.reasons))
        return self


def verify_triple(R, B, L, tol: float = UNITARY_TOL) -> HadamardTriple:
    """Check ``H = N^{-1/2}[exp(2 pi i <R^{-1} b, l>)]`` for unitarity.

    The returned object has ``accepted`` set only when the Frobenius
    deviation ``||H^* H - I||`` is at most ``tol`` and both ``B`` (mod
    ``R Z^d``) and ``L`` (mod ``R^T Z^d``) are simple digit sets.
    """
    R = IntegerMatrix.of(R)
    B, L = as_digits(B), as_digits(L)
    if len(B) != len(L):
        raise SizeMismatch(f"|B| = {len(B)} but |L| = {len(L)}")
    N = len(B)
    H = character_matrix(R, B, L) / np.sqrt(N)
    dev = float(np.linalg.norm(H.conj().T @ H - np.eye(N)))
    b_simple = is_simple_digit_set(R, B)
    l_simple = is_simple_digit_set(R.T, L)
    reasons = []
    if dev > tol:
        reasons.append(f"deviation {dev:.3e} exceeds {tol:.1e}")
    if not b_simple:
        reasons.append("B is not a simple digit set for R")
    if not l_simple:
        reasons.append("L is not a simple digit set for R^T")
    return HadamardTriple(R, B, L, dev, b_simple, l_simple, not reasons, tol, tuple(reasons))


def product_triple(T: HadamardTriple, k: int, cap: int = DEFAULT_CAP, tol: float | None = None) -> HadamardTriple:
    """``(R^k, B_k, L_k^T)`` rebuilt from digit expansions and re-verified."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return T
    check_budget(T.N**k, cap, "product triple")
    Bk = expand_digits(T.R, T.B, k, cap).elements
    Lk = dual_expand(T.R, T.L, k, cap).elements
    return verify_triple(T.R**k, Bk, Lk, T.tol if tol is None else tol)


def gasket_triple(H, tol: float = UNITARY_TOL) -> HadamardTriple:
    """Triple ``(2 I_d, {0, e_1..e_d}, {l_0..l_d})`` from a normalized real Hadamard matrix.

    ``l_j`` has coordinate ``i`` equal to 1 where ``h_{i,j} = -1`` and 0 otherwise.
    """
    H = np.asarray(H)
    n = H.shape[0]
    if H.ndim != 2 or H.shape[1] != n or n < 2:
        raise NotRealHadamard("matrix must be square of size >= 2")
    if not np.all(np.isin(H, (-1, 1))):
        raise NotRealHadamard("entries must be +1 or -1")
    Hi = H.astype(np.int64)
    if not np.array_equal(Hi.T @ Hi, n * np.eye(n, dtype=np.int64)):
        raise NotRealHadamard("H^T H != (d+1) I")
    if not (np.all(Hi[0] == 1) and np.all(Hi[:, 0] == 1)):
        raise NotRealHadamard("first row and column must be all ones")
    d = n - 1
    R = IntegerMatrix.of((2 * np.eye(d, dtype=np.int64)).tolist())
    B = [(0,) * d] + [tuple(int(i == j) for i in range(d)) for j in range(d)]
    L = [tuple(int(Hi[i, j] == -1) for i in range(1, n)) for j in range(n)]
    return verify_triple(R, B, L, tol)
