"""Frame bounds of ``F_n``, subset searches, stage concatenation and step-function energies."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import zherk

from .digits import DEFAULT_CAP, check_budget, expand_digits
from .errors import BudgetExceeded, LevelTooDeep
from .fourier import FourierEvaluator
from .hadamard import character_matrix
from .lattice import IntegerMatrix, ResidueSystem, as_digits, complete_residue_system

ENUMERATION_CAP = 5_000_000
# sigma^2_min ties are decided on this grid so reports do not depend on the last ulp
TIE_QUANTUM = 1e-12
_BATCH = 65_536


def frame_matrix(R, B, n: int, J, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``F = N^{-n/2} [exp(-2 pi i <R^{-n} b, lam>)]``, rows ``lam in J``, columns ``b in B_n``."""
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    check_budget(len(B) ** n, cap, "frame matrix columns")
    Bn = expand_digits(R, B, n, cap).elements
    return character_matrix(R**n, Bn, as_digits(J), sign=-1) / math.sqrt(len(Bn))


def gram(F: np.ndarray, weights=None) -> np.ndarray:
    """Hermitian ``F^* W F`` (full matrix)."""
    if weights is not None:
        F = F * np.sqrt(np.asarray(weights, dtype=float))[:, None]
    F = np.asfortranarray(F)
    G = zherk(1.0, F, trans=2, lower=0)
    return np.triu(G) + np.triu(G, 1).conj().T


@dataclass(frozen=True)
class FrameReport:
    method: str
    n: int
    J: tuple
    sigma2_min: float
    sigma2_max: float

    @property
    def epsilon(self) -> float:
        return max(1.0 - self.sigma2_min, self.sigma2_max - 1.0)

    def to_text(self) -> str:
        return (
            f"method: {self.method}\n"
            f"n: {self.n}\n"
            f"J: {[list(j) for j in self.J]}\n"
            f"sigma2_min: {self.sigma2_min!r}\n"
            f"sigma2_max: {self.sigma2_max!r}\n"
            f"epsilon: {self.epsilon!r}\n"
        )


def _extremes(G: np.ndarray) -> tuple[float, float]:
    w = sla.eigvalsh(G, check_finite=False)
    return max(0.0, float(w[0])), float(w[-1])


def frame_bounds(R, B, n: int, J, weights=None, method: str = "direct", cap: int = DEFAULT_CAP) -> FrameReport:
    """Extreme eigenvalues of ``F^* F`` (or ``F^* W F`` with row weights).

    When ``|J| < N^n`` the lower bound is 0 by rank and only the largest
    eigenvalue is needed, which is taken from the smaller ``F F^*``.
    """
    J = as_digits(J)
    F = frame_matrix(R, B, n, J, cap)
    cols = F.shape[1]
    if weights is not None:
        F = F * np.sqrt(np.asarray(weights, dtype=float))[:, None]
    if len(J) < cols:
        G = F @ F.conj().T
        top = float(sla.eigvalsh(G, check_finite=False)[-1]) if len(J) else 0.0
        lo, hi = 0.0, top
    else:
        lo, hi = _extremes(gram(F))
    return FrameReport(method, n, tuple(sorted(J)), lo, hi)


def residues_distinct(R, n: int, J) -> bool:
    res = ResidueSystem(IntegerMatrix.of(R).T ** n)
    seen = [res.reduce(j) for j in as_digits(J)]
    return len(set(seen)) == len(seen)


def default_pool(R, n: int) -> list:
    """Complete residue system modulo ``(R^T)^n`` in sorted order."""
    return sorted(complete_residue_system(IntegerMatrix.of(R).T ** n))


# ---------------------------------------------------------------------------
# subset searches
# ---------------------------------------------------------------------------

def _rank_key(s2min: float, s2max: float, J: tuple):
    return (-math.floor(s2min / TIE_QUANTUM + 0.5), math.floor(s2max / TIE_QUANTUM + 0.5), J)


def _row_outer(F: np.ndarray) -> np.ndarray:
    return F.conj()[:, :, None] * F[:, None, :]


def _subset_spectra(F: np.ndarray, H: np.ndarray | None, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Extreme eigenvalues of ``F_J^* F_J`` for a batch of index rows ``idx``."""
    s, cols = idx.shape[1], F.shape[1]
    if s <= cols:
        # nonzero spectrum of F_J^* F_J equals that of the row Gram F_J F_J^*
        G = H[idx[:, :, None], idx[:, None, :]]
    else:
        Fs = F[idx]
        G = np.einsum("kij,kil->kjl", Fs.conj(), Fs)
    w = np.linalg.eigvalsh(G)
    lo = np.maximum(w[:, 0], 0.0) if s >= cols else np.zeros(len(idx))
    return lo, w[:, -1]


def exhaustive_subset_search(R, B, n: int, s: int, pool=None, cap: int = ENUMERATION_CAP) -> FrameReport:
    """Best ``s``-subset of ``pool`` by ``sigma^2_min`` (then smaller ``sigma^2_max``, then lexicographic ``J``).

    Subsets are enumerated in lexicographic order of indices into the sorted
    pool, so among equal keys the first subset met is the reported one.
    """
    pool = sorted(as_digits(pool)) if pool is not None else default_pool(R, n)
    if not 1 <= s <= len(pool):
        raise ValueError(f"s must lie in [1, {len(pool)}]")
    total = math.comb(len(pool), s)
    if total > cap:
        raise BudgetExceeded(f"C({len(pool)}, {s}) = {total} subsets exceeds cap {cap}")
    F = frame_matrix(R, B, n, pool)
    H = F @ F.conj().T if s <= F.shape[1] else None
    combos = itertools.combinations(range(len(pool)), s)
    best = None
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _BATCH)), dtype=np.int64)
        if block.size == 0:
            break
        idx = block.reshape(-1, s)
        lo, hi = _subset_spectra(F, H, idx)
        qlo = np.floor(lo / TIE_QUANTUM + 0.5)
        qhi = np.floor(hi / TIE_QUANTUM + 0.5)
        # lexsort: last key is primary; position breaks the remaining ties
        i = int(np.lexsort((np.arange(len(idx)), qhi, -qlo))[0])
        cand = _rank_key(float(lo[i]), float(hi[i]), tuple(pool[k] for k in idx[i]))
        if best is None or cand < best[0]:
            best = (cand, float(lo[i]), float(hi[i]))
    key, lo, hi = best
    return FrameReport("exhaustive", n, key[2], lo, hi)


def _greedy_score(G: np.ndarray, cols: int, rows: int) -> tuple[float, float, float]:
    """``(sigma^2_min, sigma^2_max, log-volume)`` of the current selection."""
    w = np.linalg.eigvalsh(G)
    lo = max(0.0, float(w[0])) if rows >= cols else 0.0
    pos = w[w > 1e-12]
    logvol = float(np.log(pos).sum()) if pos.size else -math.inf
    return lo, float(w[-1]), logvol


def greedy_subset_search(R, B, n: int, s: int, pool=None, seed: int = 0, restarts: int = 8) -> FrameReport:
    """Add rows one at a time, maximizing ``sigma^2_min`` and then the log-volume of ``F^* F``.

    Restart 0 starts from the empty set; the others start from a random
    pool element drawn with ``numpy.random.default_rng(seed)``.
    """
    pool = sorted(as_digits(pool)) if pool is not None else default_pool(R, n)
    if not 1 <= s <= len(pool):
        raise ValueError(f"s must lie in [1, {len(pool)}]")
    F = frame_matrix(R, B, n, pool)
    cols = F.shape[1]
    P = _row_outer(F)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        chosen = [] if r == 0 else [int(rng.integers(len(pool)))]
        G = P[chosen].sum(axis=0) if chosen else np.zeros((cols, cols), dtype=complex)
        while len(chosen) < s:
            top = None
            for i in range(len(pool)):
                if i in chosen:
                    continue
                lo, hi, vol = _greedy_score(G + P[i], cols, len(chosen) + 1)
                key = (-math.floor(lo / TIE_QUANTUM + 0.5), -vol, math.floor(hi / TIE_QUANTUM + 0.5), i)
                if top is None or key < top[0]:
                    top = (key, i)
            chosen.append(top[1])
            G = G + P[top[1]]
        lo, hi, _ = _greedy_score(G, cols, len(chosen))
        J = tuple(sorted(pool[i] for i in chosen))
        key = _rank_key(lo, hi, J)
        if best is None or key < best[0]:
            best = (key, lo, hi)
    key, lo, hi = best
    return FrameReport("greedy", n, key[2], lo, hi)


def nestedness(J_small, J_large) -> float:
    """Fraction of ``J_small`` contained in ``J_large`` (1.0 when nested)."""
    small = set(as_digits(J_small))
    if not small:
        return 1.0
    return len(small & set(as_digits(J_large))) / len(small)


# ---------------------------------------------------------------------------
# concatenation and step functions
# ---------------------------------------------------------------------------

def concatenation_bounds(epsilons) -> tuple[float, float]:
    """``(prod (1 - eps_j), prod (1 + eps_j))``."""
    eps = [float(e) for e in epsilons]
    if any(e < 0 or e >= 1 for e in eps):
        raise ValueError("each epsilon must lie in [0, 1)")
    return math.prod(1 - e for e in eps), math.prod(1 + e for e in eps)


@dataclass
class StepCheck:
    level: int
    ratios: np.ndarray
    trials: int

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())


def step_coefficients(R, B, lams, n: int, tol: float = 1e-8) -> np.ndarray:
    """``C[lam, b] = int 1_{T_b} e^{-2 pi i <lam, x>} dmu = N^{-n} mu_hat((R^T)^{-n} lam) e^{-2 pi i <R^{-n} b, lam>}``."""
    R = IntegerMatrix.of(R)
    B = as_digits(B)
    lams = as_digits(lams)
    Bn = expand_digits(R, B, n).elements
    phases = character_matrix(R**n, Bn, lams, sign=-1)
    tail = FourierEvaluator(R, B, tol).rescaled(lams, n)
    return tail[:, None] * phases / len(Bn)


def step_energy_operator(R, B, lams, n: int, tol: float = 1e-8) -> np.ndarray:
    """Matrix ``A`` with ``sum_lam |<f, e_lam>|^2 = w^* A w / N^n`` relative to ``||f||^2 = |w|^2 / N^n``.

    Column ``b`` is obtained from the indicator of the cylinder ``T_b``;
    its eigenvalues are the ratio extremes over level-``n`` step functions.
    """
    C = step_coefficients(R, B, lams, n, tol)
    Nn = C.shape[1]
    return Nn * (C.conj().T @ C)


def step_frame_check(R, B, lams, n: int, m_K: int, trials: int = 100, seed: int = 0,
                     tol: float = 1e-8) -> StepCheck:
    """Energy ratios ``sum_lam |<f, e_lam>|^2 / ||f||^2`` for random level-``n`` step functions."""
    if n > m_K:
        raise LevelTooDeep(f"level {n} exceeds m_K = {m_K}")
    C = step_coefficients(R, B, lams, n, tol)
    Nn = C.shape[1]
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < trials:
        w = rng.standard_normal(Nn) + 1j * rng.standard_normal(Nn)
        norm2 = float(np.vdot(w, w).real) / Nn
        if norm2 == 0:
            continue
        ratios.append(float(np.sum(np.abs(C @ w) ** 2)) / norm2)
    return StepCheck(n, np.array(ratios), trials)
