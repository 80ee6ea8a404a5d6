"""Exact integer matrices, residues modulo R(Z^d) and the lattice Z[R, B].

Everything here runs on Python integers and ``fractions.Fraction``; the only
floating point computation is the eigenvalue test in :func:`is_expansive`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import Indeterminate, NotSimpleDigitSet

Vector = tuple  # tuple[int, ...]

EIG_MARGIN = 1e-9


def as_vector(v) -> Vector:
    if isinstance(v, (int, np.integer)):
        return (int(v),)
    return tuple(int(x) for x in v)


def as_digits(B: Iterable) -> tuple[Vector, ...]:
    return tuple(as_vector(b) for b in B)


@dataclass(frozen=True)
class IntegerMatrix:
    """Square integer matrix with exact arithmetic.

    ``IntegerMatrix.of(4)`` and ``IntegerMatrix.of([[4, 0], [1, 4]])`` are
    both accepted.
    """

    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in self.rows)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValueError(f"matrix must be square and non-empty, got {self.rows!r}")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def of(cls, data) -> "IntegerMatrix":
        if isinstance(data, IntegerMatrix):
            return data
        if isinstance(data, (int, np.integer)):
            return cls(((int(data),),))
        data = np.asarray(data, dtype=object)
        if data.ndim == 0:
            return cls(((int(data),),))
        if data.ndim == 1 and len(data) == 1:
            return cls(((int(data[0]),),))
        return cls(tuple(tuple(r) for r in data.tolist()))

    @classmethod
    def identity(cls, d: int) -> "IntegerMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @classmethod
    def from_columns(cls, cols: Sequence[Vector]) -> "IntegerMatrix":
        d = len(cols)
        return cls(tuple(tuple(cols[j][i] for j in range(d)) for i in range(d)))

    @property
    def d(self) -> int:
        return len(self.rows)

    def column(self, j: int) -> Vector:
        return tuple(r[j] for r in self.rows)

    @property
    def columns(self) -> tuple[Vector, ...]:
        return tuple(self.column(j) for j in range(self.d))

    @cached_property
    def T(self) -> "IntegerMatrix":
        return IntegerMatrix(tuple(zip(*self.rows)))

    @cached_property
    def det(self) -> int:
        return _bareiss_det([list(r) for r in self.rows])

    def __matmul__(self, other):
        if isinstance(other, IntegerMatrix):
            cols = other.columns
            return IntegerMatrix(
                tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows)
            )
        v = tuple(other)
        if len(v) != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {len(v)}")
        return tuple(sum(a * b for a, b in zip(r, v)) for r in self.rows)

    def __pow__(self, k: int) -> "IntegerMatrix":
        if k < 0:
            raise ValueError("negative powers are not integer matrices")
        out = IntegerMatrix.identity(self.d)
        base = self
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out

    @cached_property
    def inverse(self) -> tuple[tuple[Fraction, ...], ...]:
        """Exact rational inverse as a tuple of rows."""
        return _fraction_inverse(self.rows)

    @cached_property
    def adjugate(self) -> "IntegerMatrix":
        det = self.det
        return IntegerMatrix(tuple(tuple(int(x * det) for x in r) for r in self.inverse))

    def solve(self, v) -> tuple[Fraction, ...]:
        """Exact ``R^{-1} v``."""
        return tuple(sum(a * Fraction(b) for a, b in zip(r, v)) for r in self.inverse)

    def to_array(self, dtype=float) -> np.ndarray:
        return np.array(self.rows, dtype=dtype)

    def tolist(self) -> list:
        return [list(r) for r in self.rows]

    def __repr__(self):
        return f"IntegerMatrix({self.tolist()})"


def _bareiss_det(m: list[list[int]]) -> int:
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _fraction_inverse(rows) -> tuple[tuple[Fraction, ...], ...]:
    n = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c] != 0), None)
        if p is None:
            raise ZeroDivisionError("singular matrix")
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return tuple(tuple(r[n:]) for r in a)


def _has_root_of_unity_eigenvalue(R: IntegerMatrix) -> bool:
    # a primitive k-th root of unity has degree phi(k) <= d, hence k <= 2 d^2
    d = R.d
    I = IntegerMatrix.identity(d)
    P = R
    for _ in range(2 * d * d + 2):
        if IntegerMatrix(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(P.rows, I.rows))).det == 0:
            return True
        P = P @ R
    return False


def is_expansive(R, margin: float = EIG_MARGIN) -> bool:
    """True iff every eigenvalue of ``R`` has modulus > 1.

    Raises :class:`Indeterminate` when some modulus lies within ``margin`` of 1.
    """
    R = IntegerMatrix.of(R)
    if abs(R.det) < 2 or _has_root_of_unity_eigenvalue(R):
        return False
    moduli = np.abs(np.linalg.eigvals(R.to_array()))
    if np.any(np.abs(moduli - 1.0) <= margin):
        raise Indeterminate(f"eigenvalue modulus within {margin:g} of 1: {moduli.tolist()}")
    return bool(np.all(moduli > 1.0))


# ---------------------------------------------------------------------------
# Hermite normal form (column style)
# ---------------------------------------------------------------------------

def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def column_hnf(A: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[list[int]], int]:
    """Column Hermite normal form ``A V = H`` with ``V`` unimodular.

    ``A`` is given as a list of rows (m x n). ``H`` is in column echelon form:
    its first ``rank`` columns carry positive pivots on strictly increasing
    rows, entries left of a pivot lie in ``[0, pivot)``, and the remaining
    columns vanish. The first ``rank`` columns of ``H`` are canonical for the
    lattice spanned by the columns of ``A``.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    H = [list(map(int, r)) for r in A]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(M, c, j, x, y, u, v):
        # (col_c, col_j) <- (x col_c + y col_j, u col_c + v col_j)
        for r in M:
            a, b = r[c], r[j]
            r[c], r[j] = x * a + y * b, u * a + v * b

    c = 0
    for i in range(m):
        if c == n:
            break
        for j in range(c + 1, n):
            b = H[i][j]
            if b == 0:
                continue
            a = H[i][c]
            g, x, y = _xgcd(a, b)
            u, v = -b // g, a // g
            colop(H, c, j, x, y, u, v)
            colop(V, c, j, x, y, u, v)
        p = H[i][c]
        if p == 0:
            continue
        if p < 0:
            for M in (H, V):
                for r in M:
                    r[c] = -r[c]
            p = -p
        for j in range(c):
            q = H[i][j] // p
            if q:
                for M in (H, V):
                    for r in M:
                        r[j] -= q * r[c]
        c += 1
    return H, V, c


def _pivots(H: list[list[int]], rank: int) -> list[int]:
    piv = []
    row = 0
    for c in range(rank):
        while H[row][c] == 0:
            row += 1
        piv.append(row)
        row += 1
    return piv


@dataclass(frozen=True)
class Lattice:
    """Integer lattice given by HNF basis columns (``d x rank``)."""

    basis: tuple  # tuple of column vectors
    d: int

    @classmethod
    def spanned_by(cls, generators: Iterable[Vector], d: int) -> "Lattice":
        gens = [as_vector(g) for g in generators]
        if not gens:
            return cls((), d)
        A = [[g[i] for g in gens] for i in range(d)]
        H, _, r = column_hnf(A)
        return cls(tuple(tuple(H[i][c] for i in range(d)) for c in range(r)), d)

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def full_rank(self) -> bool:
        return self.rank == self.d

    @property
    def equals_Zd(self) -> bool:
        return self.full_rank and self.basis_matrix() == IntegerMatrix.identity(self.d)

    @property
    def index(self) -> int:
        """``[Z^d : L]`` for full-rank lattices, 0 otherwise."""
        return abs(self.basis_matrix().det) if self.full_rank else 0

    def basis_matrix(self) -> IntegerMatrix:
        if not self.full_rank:
            raise ValueError("basis matrix is only square for full-rank lattices")
        return IntegerMatrix.from_columns(self.basis)

    def __contains__(self, v) -> bool:
        v = list(as_vector(v))
        if self.rank:
            H = [[col[i] for col in self.basis] for i in range(self.d)]
            for c, row in enumerate(_pivots(H, self.rank)):
                q, rem = divmod(v[row], H[row][c])
                if rem:
                    return False
                for i in range(self.d):
                    v[i] -= q * H[i][c]
        return not any(v)


# ---------------------------------------------------------------------------
# residues modulo R(Z^d)
# ---------------------------------------------------------------------------

def _hnf_of_matrix(R: IntegerMatrix) -> list[list[int]]:
    H, _, r = column_hnf(R.rows)
    if r != R.d:
        raise ValueError("matrix is singular")
    return H


class ResidueSystem:
    """Canonical representatives of ``Z^d / R(Z^d)``.

    The representative of ``v`` is the unique point of ``v + R(Z^d)`` with
    ``0 <= v_i < h_ii`` where ``h`` is the lower-triangular HNF of ``R``.
    """

    def __init__(self, R):
        self.R = IntegerMatrix.of(R)
        self.H = _hnf_of_matrix(self.R)
        self.d = self.R.d

    def reduce(self, v) -> Vector:
        v = list(as_vector(v))
        H = self.H
        for c in range(self.d):
            q = v[c] // H[c][c]
            if q:
                for i in range(c, self.d):
                    v[i] -= q * H[i][c]
        return tuple(v)

    def representatives(self) -> list[Vector]:
        ranges = [range(self.H[i][i]) for i in range(self.d)]
        return [tuple(p) for p in itertools.product(*ranges)]


def residue_class(v, R) -> Vector:
    return ResidueSystem(R).reduce(v)


def complete_residue_system(R) -> list[Vector]:
    """Sorted complete set of representatives of ``Z^d / R(Z^d)``."""
    return ResidueSystem(R).representatives()


def is_simple_digit_set(R, B) -> bool:
    rs = ResidueSystem(R)
    B = as_digits(B)
    return len({rs.reduce(b) for b in B}) == len(set(B)) == len(B)


def invariant_lattice(R, B) -> tuple[Lattice, Vector]:
    """``Z[R, B]`` and the translation ``b0`` applied to put 0 in ``B``.

    Cayley-Hamilton makes ``{R^j (b - b0) : j < d}`` a finite generating set.
    """
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    b0 = B[0] if (0,) * R.d not in B else (0,) * R.d
    gens = []
    P = IntegerMatrix.identity(R.d)
    for _ in range(R.d):
        for b in B:
            gens.append(P @ tuple(x - y for x, y in zip(b, b0)))
        P = R @ P
    return Lattice.spanned_by(gens, R.d), b0


@dataclass(frozen=True)
class ReducedPair:
    """Outcome of reducing ``(R, B)`` so that ``Z[R~, B~] = Z^r``.

    ``kind`` is one of ``"identity"``, ``"full-rank"`` (``R~ = M^{-1} R M``,
    ``B~ = M^{-1}(B - b0)``) or ``"rank-deficient"`` (``M`` unimodular,
    ``conjugated = M R M^{-1}`` block upper triangular, ``R~`` its leading
    ``r x r`` block and ``B~`` the first ``r`` coordinates of ``M(B - b0)``).
    """

    R: IntegerMatrix
    B: tuple
    M: IntegerMatrix
    rank: int
    kind: str
    translation: Vector
    conjugated: IntegerMatrix | None = None


def _int_matrix_from_fractions(rows) -> IntegerMatrix:
    out = []
    for r in rows:
        if any(Fraction(x).denominator != 1 for x in r):
            raise ArithmeticError(f"non-integral entries {r}")
        out.append(tuple(int(x) for x in r))
    return IntegerMatrix(tuple(out))


def _mul_frac(A_rows, B_rows):
    cols = list(zip(*B_rows))
    return tuple(tuple(sum(Fraction(a) * b for a, b in zip(r, c)) for c in cols) for r in A_rows)


def reduce_pair(R, B) -> ReducedPair:
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    if not is_simple_digit_set(R, B):
        raise NotSimpleDigitSet(f"digits {B} are not distinct modulo R(Z^d)")
    lat, b0 = invariant_lattice(R, B)
    shifted = tuple(tuple(x - y for x, y in zip(b, b0)) for b in B)
    d = R.d
    if lat.equals_Zd:
        return ReducedPair(R, shifted, IntegerMatrix.identity(d), d, "identity", b0)
    if lat.full_rank:
        M = lat.basis_matrix()
        Rt = _int_matrix_from_fractions(_mul_frac(_mul_frac(M.inverse, R.rows), M.rows))
        Bt = tuple(tuple(int(x) for x in M.solve(b)) for b in shifted)
        return ReducedPair(Rt, Bt, M, d, "full-rank", b0)
    # rank-deficient: rows of V^T B0 vanish below rank r where (basis^T) V = H
    A = [list(col) for col in lat.basis]  # r x d
    _, V, r = column_hnf(A)
    M = IntegerMatrix(tuple(zip(*V)))  # V^T
    conj = _int_matrix_from_fractions(_mul_frac(_mul_frac(M.rows, R.rows), M.inverse))
    A1 = IntegerMatrix(tuple(row[:r] for row in conj.rows[:r]))
    Bt = tuple((M @ b)[:r] for b in shifted)
    return ReducedPair(A1, Bt, M, r, "rank-deficient", b0, conj)
