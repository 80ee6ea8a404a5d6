"""Digit expansions ``B_n``, dual expansions ``L_n^T`` and attractor samples."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetExceeded, NotSimpleDigitSet
from .lattice import IntegerMatrix, as_digits, is_simple_digit_set

DEFAULT_CAP = 2**20
EXACT_DEPTH = 16


def check_budget(count: int, cap: int, what: str) -> None:
    if count > cap:
        raise BudgetExceeded(f"{what}: {count} elements exceeds cap {cap}")


@dataclass(frozen=True)
class DigitExpansion:
    """``B + R B + ... + R^{n-1} B`` with the digit word of every element.

    ``words[i][j]`` is the index in ``base_digits`` of the coefficient of
    ``R^j`` in ``elements[i]``.
    """

    level: int
    elements: tuple
    words: tuple
    R: IntegerMatrix
    base_digits: tuple

    def __len__(self):
        return len(self.elements)

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64).reshape(len(self.elements), self.R.d)


def _expand(R: IntegerMatrix, B, n: int, cap: int, what: str) -> DigitExpansion:
    if n < 1:
        raise ValueError("level must be >= 1")
    B = as_digits(B)
    check_budget(len(B) ** n, cap, what)
    if not is_simple_digit_set(R, B):
        raise NotSimpleDigitSet(f"{what}: digits {B} are not distinct modulo the dilation")
    elems = list(B)
    words = [(i,) for i in range(len(B))]
    for _ in range(n - 1):
        shifted = [R @ e for e in elems]
        elems = [tuple(x + y for x, y in zip(b, s)) for s in shifted for b in B]
        words = [(i,) + tuple(w) for w in words for i in range(len(B))]
    if len(set(elems)) != len(elems):
        raise NotSimpleDigitSet(f"{what}: expansion is not injective")
    return DigitExpansion(n, tuple(elems), tuple(words), R, B)


def expand_digits(R, B, n: int, cap: int = DEFAULT_CAP) -> DigitExpansion:
    """``B_n`` with elements ordered as ``B + R * B_{n-1}`` (digit ``b_0`` fastest)."""
    return _expand(IntegerMatrix.of(R), B, n, cap, "B_n")


def dual_expand(R, L, n: int, cap: int = DEFAULT_CAP) -> DigitExpansion:
    return _expand(IntegerMatrix.of(R).T, L, n, cap, "L_n^T")


class AttractorSample:
    """Points ``sum_{j=1..depth} R^{-j} b_j`` over all digit words.

    ``words[i]`` lists the digit indices ``(b_1, ..., b_depth)`` of
    ``points[i]``; ``b_1`` selects the first-level cylinder ``tau_{b_1}(T)``.
    Points are exact ``Fraction`` tuples when ``exact`` is set, floats otherwise.
    """

    def __init__(self, depth, word_array, array, digits, exact_points=None):
        self.depth = depth
        self.word_array = word_array
        self.array = array
        self.digits = digits
        self._exact = exact_points

    @property
    def exact(self) -> bool:
        return self._exact is not None

    @property
    def points(self) -> list:
        if self._exact is not None:
            return self._exact
        return [tuple(p) for p in self.array.tolist()]

    @property
    def words(self) -> list:
        return [tuple(w) for w in self.word_array.tolist()]

    def as_array(self) -> np.ndarray:
        return self.array

    def __len__(self):
        return len(self.array)


def _all_words(N: int, depth: int) -> np.ndarray:
    idx = np.arange(N**depth, dtype=np.int64)
    powers = N ** np.arange(depth - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % N


def sample_attractor(R, B, depth: int, cap: int = DEFAULT_CAP, exact_depth: int = EXACT_DEPTH) -> AttractorSample:
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    check_budget(len(B) ** depth, cap, "attractor sample")
    d, N = R.d, len(B)
    words = _all_words(N, depth)
    # tau_b(x) = R^{-1}(x + b), innermost digit b_depth applied first
    Rinv = np.linalg.inv(R.to_array())
    Bf = np.array(B, dtype=float).reshape(N, d)
    x = np.zeros((len(words), d))
    for j in range(depth - 1, -1, -1):
        x = (x + Bf[words[:, j]]) @ Rinv.T
    if depth > exact_depth:
        return AttractorSample(depth, words, x, B)
    # sum_{j=1..n} R^{-j} b_j = R^{-n} sum_{i<n} R^i b_{n-i}  (Horner over b_1 .. b_n)
    Rn = R**depth
    det, adj = Rn.det, Rn.adjugate
    Bo = np.array(B, dtype=object).reshape(N, d)
    Ro = np.array(R.rows, dtype=object)
    acc = np.zeros((len(words), d), dtype=object)
    for j in range(depth):
        acc = acc.dot(Ro.T) + Bo[words[:, j]]
    num = acc.dot(np.array(adj.rows, dtype=object).T)
    points = [tuple(Fraction(int(v), det) for v in row) for row in num]
    exact_arr = np.array([[float(v) for v in p] for p in points], dtype=float).reshape(-1, d)
    return AttractorSample(depth, words, exact_arr, B, points)


def _operator_norms(A: np.ndarray, count: int) -> list[float]:
    out, P = [], np.eye(A.shape[0])
    for _ in range(count):
        P = P @ A
        out.append(float(np.linalg.norm(P, 2)))
    return out


def attractor_radius_bound(R, B, target: float = 1e-15) -> float:
    """``r_T`` with ``||x|| <= r_T`` on ``T(R, B)``.

    Sums ``||R^{-j}||`` until a block of ``p`` consecutive powers with
    ``q = ||R^{-p}|| < 1`` bounds the rest by ``block / (1 - q)``.
    """
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    bmax = max(math.sqrt(sum(x * x for x in b)) for b in B)
    if bmax == 0:
        return 0.0
    Rinv = np.linalg.inv(R.to_array())
    norms = _operator_norms(Rinv, 64)
    p = next((k + 1 for k, v in enumerate(norms) if v < 1.0), None)
    if p is None:
        raise ValueError("inverse powers do not contract within 64 steps")
    q = norms[p - 1]
    total = 0.0
    j = 0
    P = np.eye(R.d)
    while True:
        # tail after j terms: sum_{i>j} ||R^{-i}|| <= (sum_{s=1..p} ||R^{-(j+s)}||) / (1 - q)
        block, Q = 0.0, P.copy()
        for _ in range(p):
            Q = Q @ Rinv
            block += float(np.linalg.norm(Q, 2))
        tail = block / (1.0 - q)
        if tail * bmax < target or j > 10_000:
            return (total + tail) * bmax
        P = P @ Rinv
        total += float(np.linalg.norm(P, 2))
        j += 1


@dataclass
class OverlapReport:
    depth: int
    eta: float
    pair_counts: dict
    near_points: int
    total_points: int

    @property
    def fraction(self) -> float:
        return self.near_points / self.total_points if self.total_points else 0.0


def overlap_evidence(R, B, depth: int, eta: float = 1e-6, cap: int = DEFAULT_CAP) -> OverlapReport:
    """Count sample points of ``tau_b(T)`` lying within ``eta`` of ``tau_b'(T)``.

    Diagnostic only: a zero fraction is consistent with no overlap, it does
    not prove it.
    """
    B = as_digits(B)
    if len(B) < 2:
        return OverlapReport(depth, eta, {}, 0, max(1, len(B) ** depth))
    sample = sample_attractor(R, B, depth, cap=cap, exact_depth=0)
    pts = sample.as_array()
    first = sample.word_array[:, 0]
    groups = {i: pts[first == i] for i in range(len(B))}
    trees = {i: cKDTree(g) for i, g in groups.items()}
    near = np.zeros(len(pts), dtype=bool)
    index_of = {i: np.flatnonzero(first == i) for i in groups}
    counts = {}
    for i, j in itertools.permutations(range(len(B)), 2):
        dist, _ = trees[j].query(groups[i], k=1)
        hit = dist <= eta
        counts[(i, j)] = int(hit.sum())
        near[index_of[i][hit]] = True
    return OverlapReport(depth, eta, counts, int(near.sum()), len(pts))


def write_points_csv(sample: AttractorSample, path) -> Path:
    path = Path(path)
    d = len(sample.points[0]) if sample.points else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(d)] + ["word"])
        for p, word in zip(sample.points, sample.word_array.tolist()):
            w.writerow([format(float(x), ".17g") for x in p] + ["-".join(map(str, word))])
    return path
