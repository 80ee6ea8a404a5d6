"""Candidate spectra ``Lambda_k``, the ``k(j)`` correction, ``delta(Lambda)`` and completeness sums.

A plan is a sequence of stages ``(n_i, J_{n_i}, k(j))``. With ``m_k`` the
partial sums of the ``n_i``,

    Lambda_k = J^_{n_1} + (R^T)^{m_1} J^_{n_2} + ... + (R^T)^{m_{k-1}} J^_{n_k},

where ``J^ = {j + (R^T)^{n} k(j)}`` is the corrected stage (``k(j) = 0`` when
no correction has been applied).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .digits import DEFAULT_CAP, check_budget, dual_expand
from .errors import CollisionDetected, NotOrthogonal, ObstructionFound, StageTooShallow, Unsupported
from .fourier import FourierEvaluator, ScanReport, product_form_digits, z_set_scan, zero_membership_exact
from .lattice import IntegerMatrix, ResidueSystem, as_digits


def _add(u, v):
    return tuple(a + b for a, b in zip(u, v))


@dataclass(frozen=True)
class Stage:
    n: int
    J: tuple
    corrections: tuple = ()
    table_corrected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "J", as_digits(self.J))
        if not self.corrections:
            object.__setattr__(self, "corrections", tuple((0,) * len(j) for j in self.J))
        elif len(self.corrections) != len(self.J):
            raise ValueError("one correction per element of J is required")

    def corrected(self, R: IntegerMatrix) -> tuple:
        """``J^ = {j + (R^T)^n k(j)}`` in the order of ``J``."""
        P = R.T ** self.n
        return tuple(_add(j, P @ k) for j, k in zip(self.J, self.corrections))

    @property
    def is_corrected(self) -> bool:
        return any(any(k) for k in self.corrections)


@dataclass(frozen=True)
class SpectrumPlan:
    R: IntegerMatrix
    B: tuple
    stages: tuple

    def __post_init__(self):
        object.__setattr__(self, "R", IntegerMatrix.of(self.R))
        object.__setattr__(self, "B", as_digits(self.B))
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def m(self) -> list[int]:
        """Partial sums ``m_1, m_2, ...`` of the stage levels."""
        out, total = [], 0
        for st in self.stages:
            total += st.n
            out.append(total)
        return out

    def with_stage(self, index: int, stage: Stage) -> "SpectrumPlan":
        stages = list(self.stages)
        stages[index] = stage
        return replace(self, stages=tuple(stages))


def hadamard_plan(R, B, L, levels) -> SpectrumPlan:
    """Plan whose stage ``i`` is ``(n_i, L_{n_i}^T)``."""
    R = IntegerMatrix.of(R)
    stages = [Stage(n, dual_expand(R, L, n).elements) for n in levels]
    return SpectrumPlan(R, B, tuple(stages))


def check_stage_residues(R: IntegerMatrix, stage: Stage) -> None:
    res = ResidueSystem(R.T ** stage.n)
    seen = {}
    for j in stage.J:
        r = res.reduce(j)
        if r in seen:
            raise CollisionDetected(f"{seen[r]} and {j} share a residue modulo (R^T)^{stage.n}")
        seen[r] = j


def build_lambda(plan: SpectrumPlan, k: int, cap: int = DEFAULT_CAP) -> list:
    """``Lambda_k`` as a list of integer vectors (stage 1 digit varies fastest)."""
    if k < 1 or k > len(plan.stages):
        raise ValueError(f"k must lie in [1, {len(plan.stages)}]")
    check_budget(math.prod(len(st.J) for st in plan.stages[:k]), cap, "Lambda_k")
    R = plan.R
    lam = [(0,) * R.d]
    m = 0
    for st in plan.stages[:k]:
        check_stage_residues(R, st)
        P = R.T ** m
        shifted = [P @ j for j in st.corrected(R)]
        lam = [_add(a, s) for s in shifted for a in lam]
        m += st.n
    if len(set(lam)) != len(lam):
        raise CollisionDetected("Lambda_k has repeated elements")
    return lam


# ---------------------------------------------------------------------------
# constants for the k(j) correction
# ---------------------------------------------------------------------------

@dataclass
class LemmaConstants:
    """Grid evidence for the choice ``x -> k_x`` on all of ``R^d``.

    ``scan`` holds, for each grid point ``c`` of ``[0, 1)^d``, the shift
    ``k_c`` maximizing ``|mu_hat(c + k)|`` over the window. A point ``x``
    with nearest grid node ``c + m`` (``m`` integer) gets ``k_x = k_c - m``,
    so ``x + y + k_x = c + k_c + (x - c - m) + y`` and

        |mu_hat(x + y + k_x)| >= min_c |mu_hat(c + k_c)| - L (rho + eps0)

    for ``||y|| < eps0``, where ``rho`` is the cell radius and ``L`` the
    gradient bound. ``delta0`` is the square of that lower bound, or 0 when
    the bound is not positive.
    """

    eps0: float
    delta0: float
    grid_min: float
    lipschitz: float
    cover_radius: float
    window: int
    step: float
    scan: ScanReport
    sample_values: np.ndarray | None = None

    @property
    def certified(self) -> bool:
        return self.delta0 > 0

    def k_for(self, x) -> tuple:
        x = np.asarray(x, dtype=float).ravel()
        G = int(round(1.0 / self.step))
        node = np.round(x * G).astype(np.int64)
        m = np.floor_divide(node, G)
        cell = node - m * G
        idx = 0
        for c in cell:
            idx = idx * G + int(c)
        if not np.any(x):
            return (0,) * len(x)
        return tuple(int(a) for a in self.scan.best_k[idx] - m)


def estimate_lemma_constants(R, B, X=None, K: int = 8, h: float = 1 / 128, tol: float = 1e-8) -> LemmaConstants:
    """``(eps0, delta0)`` and the ``k_x`` table from a scan of ``[0, 1)^d`` at step ``h``.

    ``eps0 = h / 2``. ``X`` is an optional array of sample points; each is
    checked against its table shift and an :class:`ObstructionFound` is
    raised if none of the window shifts lifts it above ``tol``.
    """
    G = int(round(1.0 / h))
    if not math.isclose(G * h, 1.0):
        raise ValueError("h must be the reciprocal of an integer")
    scan = z_set_scan(R, B, G, window=K, tol=tol)
    if scan.obstruction is not None:
        pt = scan.obstruction
        raise ObstructionFound(pt, scan.confirmed[0]["max_abs"])
    eps0 = h / 2
    lower = scan.minimum - scan.lipschitz * (scan.cover_radius + eps0)
    consts = LemmaConstants(eps0, lower**2 if lower > 0 else 0.0, scan.minimum, scan.lipschitz,
                            scan.cover_radius, K, h, scan)
    if X is not None:
        pts = np.asarray(X, dtype=float).reshape(-1, scan.grid.shape[1])
        ev = FourierEvaluator(R, B, tol)
        ks = np.array([consts.k_for(x) for x in pts], dtype=float)
        vals = np.abs(ev(pts + ks)) if len(pts) else np.zeros(0)
        bad = np.flatnonzero(vals <= tol)
        if bad.size:
            i = int(bad[0])
            raise ObstructionFound(tuple(pts[i]), float(vals[i]))
        consts.sample_values = vals
    return consts


def tile_sample(R, digits, depth: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Points ``sum_{j<=depth} (R^T)^{-j} l_j`` of ``T(R^T, digits)``."""
    from .digits import sample_attractor
    return sample_attractor(IntegerMatrix.of(R).T, digits, depth, cap=cap, exact_depth=0).as_array()


# ---------------------------------------------------------------------------
# stage correction and level choice
# ---------------------------------------------------------------------------

def _power_norms(R: IntegerMatrix, upto: int) -> list[float]:
    inv = np.linalg.inv(R.T.to_array())
    out, P = [1.0], np.eye(R.d)
    for _ in range(upto):
        P = P @ inv
        out.append(float(np.linalg.norm(P, 2)))
    return out


def sup_tail_norm(R, n: int) -> float:
    """``sup_{p >= 0} ||(R^T)^{-(n+p)}||``.

    With ``P`` the first power such that ``||(R^T)^{-P}|| < 1`` the supremum
    is attained among ``n, ..., n + P - 1``.
    """
    R = IntegerMatrix.of(R)
    norms = _power_norms(R, 64)
    P = next((k for k in range(1, 65) if norms[k] < 1.0), None)
    if P is None:
        raise ValueError("inverse powers do not contract within 64 steps")
    top = _power_norms(R, n + P)
    return max(top[n:n + P])


def choose_next_n(lams, eps0: float, R, minimum: int = 1) -> int:
    """Least ``n >= minimum`` with ``sup_p ||(R^T)^{-(n+p)}|| max ||lam|| < eps0``."""
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    R = IntegerMatrix.of(R)
    lam = np.array(as_digits(lams), dtype=float).reshape(-1, R.d)
    top = float(np.sqrt((lam * lam).sum(axis=1)).max()) if len(lam) else 0.0
    n = max(1, minimum)
    while sup_tail_norm(R, n) * top >= eps0:
        n += 1
    return n


def correct_stage(plan: SpectrumPlan, index: int, constants: LemmaConstants) -> SpectrumPlan:
    """Replace each ``j`` of stage ``index`` by ``j + (R^T)^n k(j)`` with ``k(j) = k_x``,
    ``x = (R^T)^{-n} j``; ``k(0) = 0``.

    Raises :class:`StageTooShallow` when ``n`` is too small for every
    ``lam`` of the preceding ``Lambda`` to satisfy ``||(R^T)^{-(n+p)} lam|| < eps0``.
    """
    R = plan.R
    stage = plan.stages[index]
    if index > 0:
        prev = build_lambda(plan, index)
        need = choose_next_n(prev, constants.eps0, R)
        if stage.n < need:
            raise StageTooShallow(f"stage {index} has n={stage.n}, needs n >= {need}")
    inv = np.linalg.inv((R.T ** stage.n).to_array())
    ks = []
    for j in stage.J:
        if not any(j):
            ks.append((0,) * R.d)
            continue
        ks.append(constants.k_for(inv @ np.array(j, dtype=float)))
    new = Stage(stage.n, stage.J, tuple(ks), True)
    res = ResidueSystem(R.T ** stage.n)
    if [res.reduce(a) for a in new.corrected(R)] != [res.reduce(j) for j in stage.J]:
        raise CollisionDetected("correction changed a residue class")
    return plan.with_stage(index, new)


def corrected_plan(R, B, L, constants: LemmaConstants, stages: int, cap: int = DEFAULT_CAP) -> SpectrumPlan:
    """Build stages ``(n_k, L_{n_k}^T)`` with ``n_k`` from :func:`choose_next_n`, then correct each."""
    R = IntegerMatrix.of(R)
    plan = SpectrumPlan(R, B, ())
    lam, prev_n = [(0,) * R.d], 0
    for i in range(stages):
        n = choose_next_n(lam, constants.eps0, R, minimum=prev_n + 1)
        check_budget(len(lam) * len(as_digits(L)) ** n, cap, "corrected plan")
        plan = replace(plan, stages=plan.stages + (Stage(n, dual_expand(R, L, n, cap).elements),))
        plan = correct_stage(plan, i, constants)
        lam = build_lambda(plan, i + 1, cap)
        prev_n = n
    return plan


# ---------------------------------------------------------------------------
# delta(Lambda)
# ---------------------------------------------------------------------------

@dataclass
class DeltaReport:
    stage_minima: list
    running: list
    argmins: list
    exact_zeros: list
    tol: float
    constants: tuple | None = None
    bound_note: str = ""

    @property
    def delta(self) -> float:
        return self.running[-1] if self.running else 1.0

    def to_text(self) -> str:
        lines = [f"tol: {self.tol:.3g}"]
        if self.constants is not None:
            lines.append(f"eps0: {self.constants[0]:.17g}")
            lines.append(f"delta0: {self.constants[1]:.17g}")
        lines.append(f"bound: {self.bound_note}")
        for k, (a, b, lam, z) in enumerate(zip(self.stage_minima, self.running, self.argmins, self.exact_zeros), 1):
            lines.append(f"stage {k}: min {a:.17g} running {b:.17g} at {list(lam)} exact_zeros {z}")
        lines.append(f"delta: {self.delta:.17g}")
        return "\n".join(lines) + "\n"


def _exact_zero(R, B, lam, m: int) -> bool:
    A = IntegerMatrix.of(R).T ** m
    eta = A.solve(lam)
    return zero_membership_exact(R, B, list(eta))


def delta_lambda(plan: SpectrumPlan, K: int, tol: float = 1e-8, constants: LemmaConstants | None = None,
                 cap: int = DEFAULT_CAP) -> DeltaReport:
    """Running infimum over ``k <= K`` of ``min_{lam in Lambda_k} |mu_hat((R^T)^{-m_k} lam)|^2``.

    A value is set to exactly zero when the point is a certified zero:
    via the exact rational test for product-form masks, or when the
    evaluated modulus is within ``tol`` of zero otherwise.
    """
    ev = FourierEvaluator(plan.R, plan.B, tol)
    try:
        product_form_digits(plan.B)
        exact_ok = True
    except Unsupported:
        exact_ok = False
    minima, running, argmins, zeros = [], [], [], []
    best = 1.0
    for k in range(1, K + 1):
        lam = build_lambda(plan, k, cap)
        m = plan.m[k - 1]
        v = np.abs(ev.rescaled(lam, m))
        sq = v**2
        low = np.flatnonzero(v <= tol)
        count = 0
        for i in low:
            if not exact_ok or _exact_zero(plan.R, plan.B, lam[i], m):
                sq[i] = 0.0
                count += 1
        i = int(np.argmin(sq))
        minima.append(float(sq[i]))
        argmins.append(lam[i])
        zeros.append(count)
        best = min(best, float(sq[i]))
        running.append(best)
    if constants is not None and all(st.table_corrected for st in plan.stages[:K]):
        note = f"corrected plan: delta(Lambda) >= delta0 = {constants.delta0:.6g}"
    else:
        note = "finite K: delta_K is an upper bound for delta(Lambda)"
    consts = (constants.eps0, constants.delta0) if constants is not None else None
    return DeltaReport(minima, running, argmins, zeros, tol, consts, note)


# ---------------------------------------------------------------------------
# completeness sums
# ---------------------------------------------------------------------------

@dataclass
class JPReport:
    grid: np.ndarray
    Q: np.ndarray
    size: int
    tol: float

    @property
    def bessel_bound(self) -> float:
        return 1.0 + self.size * 2 * self.tol

    def write_csv(self, path) -> Path:
        path = Path(path)
        d = self.grid.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi{i + 1}" for i in range(d)] + ["Q"])
            for x, q in zip(self.grid, self.Q):
                w.writerow([format(float(t), ".17g") for t in x] + [format(float(q), ".17g")])
        return path


def _unique_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.ascontiguousarray(a)
    view = a.view(np.dtype((np.void, a.dtype.itemsize * a.shape[1]))).ravel()
    _, idx, inverse = np.unique(view, return_index=True, return_inverse=True)
    return a[idx], inverse.ravel()


def check_orthogonal(R, B, lams, tol: float = 1e-8) -> float:
    """Largest ``|mu_hat(lam - lam')|`` over distinct pairs; raises :class:`NotOrthogonal` above ``2 tol``.

    Only ``i < j`` is evaluated since ``|mu_hat(-x)| = |mu_hat(x)|``.
    """
    R = IntegerMatrix.of(R)
    arr = np.array(as_digits(lams), dtype=np.int64).reshape(-1, R.d)
    if len(arr) < 2:
        return 0.0
    i, j = np.triu_indices(len(arr), k=1)
    uniq, inverse = _unique_rows(arr[j] - arr[i])
    ev = FourierEvaluator(R, B, tol)
    v = np.abs(ev(uniq.astype(float)))
    top = int(np.argmax(v))
    if v[top] > 2 * tol:
        p = int(np.flatnonzero(inverse == top)[0])
        raise NotOrthogonal((tuple(int(x) for x in arr[i[p]]), tuple(int(x) for x in arr[j[p]])), float(v[top]))
    return float(v[top])


def jp_check(R, B, lams, grid, tol: float = 1e-8, check: bool = True, workers: int = 1) -> JPReport:
    """``Q(xi) = sum_{lam} |mu_hat(xi + lam)|^2`` at each grid point."""
    R = IntegerMatrix.of(R)
    lam = np.array(as_digits(lams), dtype=np.int64).reshape(-1, R.d)
    if check:
        check_orthogonal(R, B, lam, tol)
    pts = np.asarray(grid, dtype=float).reshape(-1, R.d)
    ev = FourierEvaluator(R, B, tol, workers=workers)
    Q = np.empty(len(pts))
    rows = max(1, 250_000 // max(1, len(lam)))
    for s in range(0, len(pts), rows):
        Q[s:s + rows] = (np.abs(ev.shifted(pts[s:s + rows], lam)) ** 2).sum(axis=1)
    return JPReport(pts, Q, len(lam), tol)


def jp_grid(d: int, G: int) -> np.ndarray:
    """``G^d`` points ``i / G`` of ``[0, 1)^d``."""
    from .fourier import fundamental_grid
    return fundamental_grid(d, G)
