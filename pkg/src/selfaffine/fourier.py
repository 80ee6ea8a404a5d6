"""Mask ``M_B``, the transform of the self-affine measure and zero-set probes.

The evaluator keeps every point ``y`` as ``q + r`` with ``q`` an exact
integer vector and ``r`` in ``[0, 1)^d``. Applying ``(R^T)^{-1}`` to ``q`` is
done by exact integer division, so large integer frequencies lose no accuracy
and the mask (which is ``Z^d``-periodic) only ever sees ``r``.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .digits import attractor_radius_bound
from .errors import BudgetExceeded, DimensionNot1, NonExpansive, Unsupported
from .lattice import IntegerMatrix, as_digits, is_expansive

TWO_PI = 2.0 * math.pi
SCAN_CAP = 60_000_000
_CHUNK = 250_000


def _normalize(xi, d: int):
    """Return ``(points, single)``; points are a float ``(m, d)`` array, or
    nested lists when any coordinate is a ``Fraction``."""
    if isinstance(xi, np.ndarray) and xi.dtype != object:
        arr = xi.astype(float)
    else:
        flat = list(np.ravel(np.asarray(xi, dtype=object)))
        if any(isinstance(x, Fraction) for x in flat):
            nested = np.asarray(xi, dtype=object)
            single = nested.ndim == 0 or (nested.ndim == 1 and d > 1) or (nested.size == 1)
            rows = np.reshape(nested, (-1, d)).tolist()
            return [[Fraction(x) for x in row] for row in rows], single
        arr = np.asarray(xi, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and d > 1) or arr.size == 1 and arr.ndim <= 1
    return arr.reshape(-1, d), single


def mask_eval(B, xi):
    """``M_B(xi) = (1/N) sum_b exp(-2 pi i <b, xi>)`` for one point or a batch."""
    B = np.array(as_digits(B), dtype=float)
    pts, single = _normalize(xi, B.shape[1])
    pts = np.array(pts, dtype=float)
    vals = np.exp(-2j * np.pi * (pts @ B.T)).mean(axis=1)
    return complex(vals[0]) if single else vals


def _split(points) -> tuple[np.ndarray, np.ndarray]:
    """Exact integer/fractional split of float or Fraction coordinates."""
    if isinstance(points, np.ndarray) and points.dtype != object:
        q = np.floor(points)
        return q.astype(np.int64), points - q
    rows = [[x if isinstance(x, Fraction) else Fraction(x) for x in row] for row in points]
    q = np.array([[math.floor(x) for x in row] for row in rows], dtype=np.int64)
    r = np.array([[float(x - math.floor(x)) for x in row] for row in rows], dtype=float)
    return q, r


class FourierEvaluator:
    """Certified evaluation of ``mu_hat`` for ``mu = mu(R, B)``.

    Each value is ``prod_{j<=n} M_B((R^T)^{-j} xi)`` where ``n`` is the first
    level with ``2 pi ||(R^T)^{-n} xi|| r_T <= tol``; since every factor has
    modulus at most one and ``|mu_hat(eta) - 1| <= 2 pi ||eta|| r_T``, the
    returned value is within ``tol`` of the true transform.
    """

    def __init__(self, R, B, tol: float = 1e-8, max_depth: int = 2000, workers: int = 1):
        self.R = IntegerMatrix.of(R)
        if not is_expansive(self.R):
            raise NonExpansive(f"{self.R} is not expansive")
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.B = as_digits(B)
        self.d = self.R.d
        self.tol = tol
        self.max_depth = max_depth
        self.workers = max(1, int(workers))
        RT = self.R.T
        self.D = abs(RT.det)
        sign = 1 if RT.det > 0 else -1
        # D * (R^T)^{-1} = sign * adj(R^T)
        self._adj = np.array([[sign * x for x in row] for row in RT.adjugate.rows], dtype=np.int64)
        self._inv = np.linalg.inv(RT.to_array())
        self._Bf = np.array(self.B, dtype=float).reshape(len(self.B), self.d)
        self.r_T = attractor_radius_bound(self.R, self.B)
        self.lipschitz = TWO_PI * self.r_T
        self.threshold = tol / self.lipschitz if self.lipschitz > 0 else math.inf
        self.last_depth = 0

    def mask(self, pts: np.ndarray) -> np.ndarray:
        return np.exp(-2j * np.pi * (pts @ self._Bf.T)).mean(axis=1)

    def _product(self, q: np.ndarray, r: np.ndarray) -> np.ndarray:
        m = len(q)
        out = np.ones(m, dtype=complex)
        active = np.arange(m)
        depth = 0
        limit = (2**62) // (max(1, int(np.abs(self._adj).max())) * self.d)
        while active.size:
            y = q.astype(float) + r
            done = np.sqrt((y * y).sum(axis=1)) <= self.threshold
            if done.any():
                keep = ~done
                active, q, r = active[keep], q[keep], r[keep]
                if not active.size:
                    break
            if depth >= self.max_depth:
                raise RuntimeError("truncation depth exceeded; is R expansive?")
            if np.abs(q).max(initial=0) > limit:
                raise OverflowError("integer part too large for int64 evaluation")
            t = q @ self._adj.T
            qn = t // self.D
            r = (t - qn * self.D) / self.D + r @ self._inv.T
            fl = np.floor(r)
            q = qn + fl.astype(np.int64)
            r = r - fl
            out[active] *= self.mask(r)
            depth += 1
        self.last_depth = depth
        return out

    def __call__(self, xi):
        """``mu_hat`` at a point or a batch; Fraction coordinates are split exactly."""
        pts, single = _normalize(xi, self.d)
        vals = self._batched(*_split(pts))
        return complex(vals[0]) if single else vals

    def _batched(self, q, r) -> np.ndarray:
        out = np.empty(len(q), dtype=complex)
        starts = range(0, len(q), _CHUNK)
        if self.workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda s: self._product(q[s:s + _CHUNK], r[s:s + _CHUNK]), starts))
            for s, part in zip(starts, parts):
                out[s:s + _CHUNK] = part
            return out
        depth = 0
        for s in starts:
            out[s:s + _CHUNK] = self._product(q[s:s + _CHUNK], r[s:s + _CHUNK])
            depth = max(depth, self.last_depth)
        self.last_depth = depth
        return out

    def rescaled(self, lams, m: int) -> np.ndarray:
        """``mu_hat((R^T)^{-m} lam)`` for integer vectors ``lam``, split exactly."""
        q, r = rescale_split(self.R, lams, m)
        return self._batched(q, r)

    def shifted(self, xi, shifts) -> np.ndarray:
        """Matrix ``mu_hat(xi_i + k_s)`` for integer shift vectors ``k_s``."""
        pts, _ = _normalize(xi, self.d)
        q0, r0 = _split(pts)
        K = np.array(shifts, dtype=np.int64).reshape(-1, self.d)
        m, s = len(q0), len(K)
        q = (q0[:, None, :] + K[None, :, :]).reshape(m * s, self.d)
        r = np.repeat(r0, s, axis=0)
        return self._batched(q, r).reshape(m, s)


def mu_hat(R, B, xi, tol: float = 1e-8):
    return FourierEvaluator(R, B, tol)(xi)


def rescale_split(R, lams, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer and fractional parts of ``(R^T)^{-m} lam``, computed exactly."""
    R = IntegerMatrix.of(R)
    A = R.T ** m
    det = A.det
    Dm = abs(det)
    sign = 1 if det > 0 else -1
    adj = np.array(A.adjugate.rows, dtype=object) * sign
    lam = np.array([[int(x) for x in row] for row in np.asarray(lams).reshape(-1, R.d).tolist()], dtype=object)
    t = lam.dot(adj.T) if len(lam) else np.zeros((0, R.d), dtype=object)
    q = t // Dm
    rem = t - q * Dm
    r = np.array([[x / Dm for x in row] for row in rem.tolist()], dtype=float).reshape(-1, R.d)
    return q.astype(np.int64), r


def quadrature_sum(R, B, L, xi) -> np.ndarray:
    """``sum_{l in L} |M_B((R^T)^{-1}(xi + l))|^2``; identically one for a Hadamard triple."""
    R = IntegerMatrix.of(R)
    L = np.array(as_digits(L), dtype=float)
    pts, _ = _normalize(xi, R.d)
    pts = np.array(pts, dtype=float)
    inv = np.linalg.inv(R.T.to_array())
    total = np.zeros(len(pts))
    for l in L:
        total += np.abs(mask_eval(B, (pts + l) @ inv.T)) ** 2
    return total


# ---------------------------------------------------------------------------
# exact zero tests for product-form masks
# ---------------------------------------------------------------------------

def product_form_digits(B) -> tuple[int, ...]:
    """``(d_1, ..., d_d)`` if a translate of ``B`` equals ``prod_i {0, d_i}``.

    A zero ``d_i`` stands for the singleton ``{0}``. Raises
    :class:`Unsupported` otherwise.
    """
    B = as_digits(B)
    d = len(B[0])
    lo = [min(b[i] for b in B) for i in range(d)]
    shifted = {tuple(b[i] - lo[i] for i in range(d)) for b in B}
    axes = [sorted({b[i] for b in shifted}) for i in range(d)]
    if any(len(a) > 2 for a in axes) or shifted != set(itertools.product(*axes)) or len(shifted) != len(B):
        raise Unsupported(f"mask of {B} is not a product of two-digit factors")
    return tuple(a[-1] for a in axes)


def _on_zero_hyperplane(eta, digits) -> bool:
    for x, di in zip(eta, digits):
        if di:
            t = 2 * di * x
            if t.denominator == 1 and t.numerator % 2 == 1:
                return True
    return False


def zero_membership_exact(R, B, xi, max_j: int = 64) -> bool:
    """True iff some ``(R^T)^{-j} xi`` (``1 <= j <= max_j``) is a zero of ``M_B``."""
    R = IntegerMatrix.of(R)
    digits = product_form_digits(B)
    RT = R.T
    eta = tuple(Fraction(x) for x in (xi if isinstance(xi, (list, tuple)) else [xi]))
    for _ in range(max_j):
        eta = RT.solve(eta)
        if _on_zero_hyperplane(eta, digits):
            return True
    return False


# ---------------------------------------------------------------------------
# grid scan for the set Z
# ---------------------------------------------------------------------------

def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in ``[lo, hi]`` (Stern-Brocot)."""
    if lo > hi:
        lo, hi = hi, lo
    fl = math.floor(lo)
    if fl == lo or math.floor(hi) > fl:
        return Fraction(math.ceil(lo))
    lo_f, hi_f = lo - fl, hi - fl
    return fl + 1 / _simplest_between(1 / hi_f, 1 / lo_f)


@dataclass
class ScanReport:
    grid: np.ndarray
    values: np.ndarray
    best_k: np.ndarray
    window: int
    step: float
    lipschitz: float
    tol: float
    candidates: list = field(default_factory=list)
    confirmed: list = field(default_factory=list)

    @property
    def minimum(self) -> float:
        return float(self.values.min())

    @property
    def argmin(self) -> np.ndarray:
        return self.grid[int(np.argmin(self.values))]

    @property
    def cover_radius(self) -> float:
        return self.step * math.sqrt(self.grid.shape[1]) / 2

    @property
    def certified_fraction(self) -> float:
        """Share of grid cells on which some window shift provably avoids zero."""
        return float(np.mean(self.values > self.lipschitz * self.cover_radius))

    @property
    def obstruction(self):
        return self.confirmed[0]["point"] if self.confirmed else None

    def coverage_note(self) -> str:
        return (
            f"|grad mu_hat| <= {self.lipschitz:.6g}; cells of radius {self.cover_radius:.6g} "
            f"are certified where the max exceeds {self.lipschitz * self.cover_radius:.6g} "
            f"({100 * self.certified_fraction:.2f}% of grid)"
        )

    def write_csv(self, path) -> Path:
        path = Path(path)
        d = self.grid.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi{i + 1}" for i in range(d)] + [f"best_k{i + 1}" for i in range(d)] + ["abs_mu_hat"])
            for x, k, v in zip(self.grid, self.best_k, self.values):
                w.writerow([format(float(t), ".17g") for t in x] + [int(t) for t in k] + [format(float(v), ".17g")])
        return path


def window_shifts(d: int, K: int) -> np.ndarray:
    rng = range(-K, K + 1)
    return np.array(list(itertools.product(rng, repeat=d)), dtype=np.int64).reshape(-1, d)


def fundamental_grid(d: int, G: int) -> np.ndarray:
    axes = [np.arange(G) / G] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def z_set_scan(R, B, grid_resolution: int, window: int = 8, tol: float = 1e-8,
               max_candidates: int = 256, cap: int = SCAN_CAP, workers: int = 1) -> ScanReport:
    """Scan ``max_{k in [-K, K]^d} |mu_hat(xi + k)|`` over a grid of ``[0, 1)^d``.

    Grid points whose value does not exclude a nearby zero (value below the
    Lipschitz bound times the cell radius) become candidates; the lowest
    ones are snapped to the simplest rational within half a grid step and
    re-evaluated. A snapped point with every shifted value at most ``tol`` is
    recorded as a confirmed obstruction, checked exactly as well when the
    mask has product form.
    """
    ev = FourierEvaluator(R, B, tol, workers=workers)
    d = ev.d
    grid = fundamental_grid(d, grid_resolution)
    shifts = window_shifts(d, window)
    if len(grid) * len(shifts) > cap:
        raise BudgetExceeded(f"scan needs {len(grid) * len(shifts)} evaluations (cap {cap})")
    values = np.empty(len(grid))
    best = np.empty((len(grid), d), dtype=np.int64)
    rows = max(1, _CHUNK * ev.workers // len(shifts))
    for s in range(0, len(grid), rows):
        a = np.abs(ev.shifted(grid[s:s + rows], shifts))
        idx = np.argmax(a, axis=1)
        values[s:s + rows] = a[np.arange(len(a)), idx]
        best[s:s + rows] = shifts[idx]
    report = ScanReport(grid, values, best, window, 1.0 / grid_resolution, ev.lipschitz, tol)

    flagged = np.flatnonzero(values <= ev.lipschitz * report.cover_radius)
    flagged = flagged[np.argsort(values[flagged], kind="stable")][:max_candidates]
    half = Fraction(1, 2 * grid_resolution)
    seen = set()
    for i in flagged:
        pt = tuple(
            _simplest_between(Fraction(int(round(x * grid_resolution)), grid_resolution) - half,
                              Fraction(int(round(x * grid_resolution)), grid_resolution) + half)
            for x in grid[i]
        )
        if pt in seen:
            continue
        seen.add(pt)
        report.candidates.append(pt)
    if report.candidates:
        vals = np.abs(ev.shifted([list(p) for p in report.candidates], shifts)).max(axis=1)
        try:
            product_form_digits(ev.B)
            exact_ok = True
        except Unsupported:
            exact_ok = False
        for pt, v in zip(report.candidates, vals):
            if v > tol:
                continue
            exact = None
            if exact_ok:
                exact = all(
                    zero_membership_exact(ev.R, ev.B, [x + int(k) for x, k in zip(pt, ks)])
                    for ks in shifts
                )
            report.confirmed.append({"point": pt, "max_abs": float(v), "exact": exact})
        report.confirmed.sort(key=lambda c: c["point"])
    return report


# ---------------------------------------------------------------------------
# one-dimensional forward iteration
# ---------------------------------------------------------------------------

@dataclass
class YIteration:
    sets: list
    bound: float
    integer_hit: tuple | None

    @property
    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    @property
    def max_abs(self) -> list[float]:
        return [float(max(abs(x) for x in s)) if s else 0.0 for s in self.sets]

    @property
    def bounded(self) -> bool:
        return all(m <= self.bound + 1e-15 for m in self.max_abs)


def y_iteration_1d(R, B, L, xi0, max_n: int, cap: int = 100_000) -> YIteration:
    """Iterate ``Y_n = {(xi + l)/R : l in L, xi in Y_{n-1}, M_B((xi + l)/R) != 0}``.

    Two-digit masks are tested exactly on rationals; larger digit sets use a
    numeric margin of ``1e-10``.
    """
    R = IntegerMatrix.of(R)
    if R.d != 1:
        raise DimensionNot1("Y_n iteration is one-dimensional")
    r = R.rows[0][0]
    Bd = [b[0] for b in as_digits(B)]
    Ld = [l[0] for l in as_digits(L)]
    xi0 = Fraction(xi0)

    if len(Bd) == 2:
        gap = Bd[1] - Bd[0]

        def nonzero(x):
            t = 2 * gap * x
            return not (t.denominator == 1 and t.numerator % 2 == 1)
    else:
        def nonzero(x):
            return abs(mask_eval([[b] for b in Bd], float(x))) > 1e-10

    bound = float(abs(xi0)) + max(abs(l) for l in Ld) / (abs(r) - 1)
    sets = [[xi0]]
    hit = (0, xi0) if xi0.denominator == 1 else None
    for n in range(1, max_n + 1):
        nxt = sorted({(x + l) / r for x in sets[-1] for l in Ld if nonzero((x + l) / r)})
        if len(nxt) > cap:
            raise BudgetExceeded(f"Y_{n} has {len(nxt)} elements")
        sets.append(nxt)
        if hit is None:
            ints = [x for x in nxt if x.denominator == 1]
            if ints:
                hit = (n, ints[0])
    return YIteration(sets, bound, hit)
