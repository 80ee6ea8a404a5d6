"""Acceptance suite: one group of checks per criterion, tagged with ``criterion(n)``.

The terminal summary (see conftest) prints a single PASS/FAIL line per criterion.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import triple
from oracles import base4_spectrum, gram_2x2, quarter_cantor_abs, riemann_sum
from selfaffine import cli
from selfaffine.digits import dual_expand
from selfaffine.fourier import FourierEvaluator, quadrature_sum, z_set_scan, zero_membership_exact
from selfaffine.frames import (concatenation_bounds, exhaustive_subset_search, frame_bounds, frame_matrix, gram,
                               greedy_subset_search, step_energy_operator, step_frame_check)
from selfaffine.hadamard import product_triple, verify_triple
from selfaffine.lattice import (IntegerMatrix, ResidueSystem, complete_residue_system, invariant_lattice,
                                reduce_pair)
from selfaffine.spectra import SpectrumPlan, Stage, build_lambda, delta_lambda, hadamard_plan, jp_check

VERIFIED = ("quarter_cantor", "ex_4_0_1_4", "ex_4_0_1_2", "gasket_d3")
EX2 = ([[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)])


# --- 1 ---------------------------------------------------------------------

@pytest.mark.criterion(1)
@pytest.mark.parametrize("name", VERIFIED)
def test_preset_triples_accepted(name):
    t0 = time.perf_counter()
    T = verify_triple(*triple(name))
    assert time.perf_counter() - t0 < 1.0
    assert T.accepted and T.deviation < 1e-12


@pytest.mark.criterion(1)
def test_broken_pair_rejected():
    T = verify_triple(4, [0, 2], [0, 2])
    assert not T.accepted
    assert T.deviation > 1.0


# --- 2 ---------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_product_towers_unitary():
    t0 = time.perf_counter()
    for name, top in (("quarter_cantor", 6), ("ex_4_0_1_4", 3)):
        T = verify_triple(*triple(name))
        for k in range(1, top + 1):
            P = product_triple(T, k)
            assert P.accepted, (name, k)
            assert P.deviation < 1e-10, (name, k, P.deviation)
    assert time.perf_counter() - t0 < 30.0


# --- 3 ---------------------------------------------------------------------

def _levels(name):
    R, B, L = triple(name)
    n = 1
    while len(B) ** n <= 4096:
        yield n
        n += 1


@pytest.mark.criterion(3)
@pytest.mark.slow
@pytest.mark.parametrize("name", VERIFIED)
def test_almost_parseval_exact_for_dual_expansion(name):
    R, B, L = triple(name)
    for n in _levels(name):
        J = dual_expand(R, L, n).elements
        rep = frame_bounds(R, B, n, J)
        assert abs(rep.sigma2_min - 1) <= 1e-10, (name, n, rep.sigma2_min)
        assert abs(rep.sigma2_max - 1) <= 1e-10, (name, n, rep.sigma2_max)


# --- 4 ---------------------------------------------------------------------

@pytest.mark.criterion(4)
def test_zero_set_lines_exact_and_numeric():
    R, B = EX2
    t0 = time.perf_counter()
    pts = [(Fraction(m), Fraction(1, 3) + n) for m in range(-10, 11) for n in range(-10, 11)]
    assert len(pts) == 441
    assert all(zero_membership_exact(R, B, list(p)) for p in pts)
    ev = FourierEvaluator(R, B, tol=1e-8)
    vals = np.abs(ev([list(p) for p in pts]))
    # certified truncation: the evaluator's value is within tol of the true transform
    assert ev.threshold * ev.lipschitz == pytest.approx(1e-8)
    assert vals.max() < 1e-8
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.criterion(4)
def test_zero_scan_cli_reports_obstruction(tmp_path):
    code = cli.main(["zero-scan", "--preset", "ex_4_0_1_2", "--grid", "64", "--window", "8", "--out", str(tmp_path)])
    assert code == 1
    import json
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["obstruction"] == ["0", "1/3"]


# --- 5 ---------------------------------------------------------------------

@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", ("ex_4_0_1_4", "quarter_cantor"))
def test_no_obstruction_scan(name):
    R, B, _ = triple(name)
    t0 = time.perf_counter()
    rep = z_set_scan(R, B, 64, window=8)
    assert time.perf_counter() - t0 < 120.0
    assert rep.minimum > 1e-2
    assert rep.obstruction is None


# --- 6 ---------------------------------------------------------------------

GRID16 = np.arange(16) / 16


@pytest.mark.criterion(6)
def test_threshold_confirmed_by_high_precision_oracle():
    # K = 16 stages, product truncated 20 levels past the largest stage
    lam = base4_spectrum(16)
    Q16 = np.array([float((quarter_cantor_abs(x, lam, 36) ** 2).sum()) for x in GRID16])
    assert Q16.min() >= 0.99
    assert Q16.max() <= 1 + 1e-9


@pytest.mark.criterion(6)
def test_completeness_sums_monotone_and_bounded():
    R, B, L = triple("quarter_cantor")
    plan = hadamard_plan(R, B, L, [1] * 12)
    prev = None
    for K in range(1, 13):
        lam = build_lambda(plan, K)
        rep = jp_check(R, B, lam, GRID16[:, None], check=(K == 12))
        assert rep.Q.max() <= 1 + 1e-9
        if prev is not None:
            # nested sets: only rounding in the summation order can lower the sum
            assert np.all(rep.Q >= prev - 1e-12)
        prev = rep.Q
    assert prev.min() >= 0.99
    oracle = np.array([float((quarter_cantor_abs(x, base4_spectrum(12), 32) ** 2).sum()) for x in GRID16])
    assert np.max(np.abs(prev - oracle)) < 1e-8


# --- 7 ---------------------------------------------------------------------

@pytest.mark.criterion(7)
def test_delta_positive_and_stable():
    R, B, L = triple("quarter_cantor")
    rep = delta_lambda(hadamard_plan(R, B, L, [1] * 12), 12)
    run = rep.running
    assert all(a >= b for a, b in zip(run, run[1:]))
    window = run[5:12]
    assert all(v > 0 for v in window)
    assert len({float(f"{v:.3g}") for v in window}) == 1


@pytest.mark.criterion(7)
def test_delta_zero_for_exact_zero():
    R, B = EX2
    # (R^T)^{-2} (11, 2) = (1/2, 1/2) lies on the zero line x1 = 1/2 of M_B
    plan = SpectrumPlan(R, B, (Stage(1, [(0, 0), (11, 2)]),))
    rep = delta_lambda(plan, 1)
    assert rep.delta == 0.0
    assert rep.exact_zeros == [1]


# --- 8 ---------------------------------------------------------------------

@pytest.mark.criterion(8)
def test_subset_search_third_cantor():
    t0 = time.perf_counter()
    R, B = 3, [0, 2]
    best1 = exhaustive_subset_search(R, B, 1, 2)
    z = (1 + np.exp(2j * np.pi / 3)) / 2
    lo, hi = gram_2x2(z)
    assert best1.sigma2_min == pytest.approx(lo, abs=1e-12)
    assert best1.sigma2_max == pytest.approx(hi, abs=1e-12)
    for n, s in ((2, 4), (3, 8)):
        a = exhaustive_subset_search(R, B, n, s)
        b = exhaustive_subset_search(R, B, n, s)
        assert a.to_text().encode() == b.to_text().encode()
        assert a.sigma2_min > 0
    assert a.J == FROZEN_N3_J
    assert a.sigma2_min == pytest.approx(FROZEN_N3_SIGMA2_MIN, rel=1e-12)
    ex2 = exhaustive_subset_search(R, B, 2, 4)
    gr2 = greedy_subset_search(R, B, 2, 4, seed=0)
    assert gr2.sigma2_min >= 0.9 * ex2.sigma2_min
    assert time.perf_counter() - t0 < 300.0


# derived by the exhaustive enumeration above, then frozen
FROZEN_N3_J = tuple((x,) for x in (0, 1, 3, 10, 11, 17, 18, 22))
FROZEN_N3_SIGMA2_MIN = 0.25667399023265525


# --- 9 ---------------------------------------------------------------------

@pytest.mark.criterion(9)
@pytest.mark.parametrize("levels", [(1, 1), (1, 2), (2, 1), (1, 1, 1)])
def test_concatenated_stages_within_bounds(levels):
    R, B = 3, [0, 2]
    stages, eps = [], []
    for n in levels:
        rep = exhaustive_subset_search(R, B, n, 2**n)
        stages.append(Stage(n, rep.J))
        eps.append(rep.epsilon)
    plan = SpectrumPlan(R, B, tuple(stages))
    lam = build_lambda(plan, len(levels))
    total = frame_bounds(R, B, sum(levels), lam)
    c, C = concatenation_bounds(eps)
    assert c - 1e-12 <= total.sigma2_min <= total.sigma2_max <= C + 1e-12


# --- 10 --------------------------------------------------------------------

@pytest.mark.criterion(10)
def test_step_function_ratios():
    R, B, L = triple("quarter_cantor")
    lam = build_lambda(hadamard_plan(R, B, L, [1] * 12), 12)
    rep = step_frame_check(R, B, lam, 4, 12, trials=100, seed=0)
    assert rep.min_ratio >= 0.98
    assert rep.max_ratio <= 1 + 1e-6


@pytest.mark.criterion(10)
def test_basis_step_functions_match_gram():
    R, B, L = triple("quarter_cantor")
    lam = build_lambda(hadamard_plan(R, B, L, [1] * 12), 12)
    A = step_energy_operator(R, B, lam, 4)
    weights = np.abs(FourierEvaluator(R, B).rescaled(lam, 4)) ** 2
    G = gram(frame_matrix(R, B, 4, lam), weights)
    assert np.max(np.abs(np.linalg.eigvalsh(A) - np.linalg.eigvalsh(G))) < 1e-8
    rep = frame_bounds(R, B, 4, lam, weights=weights)
    w = np.linalg.eigvalsh(A)
    assert abs(rep.sigma2_min - w[0]) < 1e-8 and abs(rep.sigma2_max - w[-1]) < 1e-8


# --- 11 --------------------------------------------------------------------

@pytest.mark.criterion(11)
def test_invariant_lattice_first_example():
    R, B, _ = triple("ex_4_0_1_4")
    lat, _ = invariant_lattice(R, B)
    assert lat.equals_Zd
    assert lat.basis_matrix() == IntegerMatrix.identity(2)


@pytest.mark.criterion(11)
def test_reduce_quarter_cantor_round_trip():
    red = reduce_pair(4, [0, 2])
    assert red.R == IntegerMatrix.of(4)
    assert set(red.B) == {(0,), (1,)}
    assert red.M == IntegerMatrix.of(2)
    assert {red.M @ b for b in red.B} == {(0,), (2,)}
    Minv = red.M.inverse
    assert Minv[0][0] * 4 * 2 == red.R.rows[0][0]


def _random_expansive(rng, d):
    while True:
        A = rng.integers(-5, 6, size=(d, d))
        A = A + np.diag(rng.choice([-1, 1], size=d) * rng.integers(2, 6, size=d))
        det = round(np.linalg.det(A))
        ev = np.abs(np.linalg.eigvals(A))
        if abs(det) >= 2 and ev.min() > 1 + 1e-6 and abs(det) <= 60:
            return IntegerMatrix.of(A.tolist())


@pytest.mark.criterion(11)
def test_lattice_property_suite_randomized():
    rng = np.random.default_rng(20240611)
    cases = 0
    mats = [_random_expansive(rng, d) for d in (1, 2, 3) for _ in range(40)]
    systems = [(R, ResidueSystem(R), complete_residue_system(R)) for R in mats]
    while cases < 10_000:
        R, rs, reps = systems[cases % len(systems)]
        d = R.d
        v = tuple(int(x) for x in rng.integers(-10**6, 10**6, size=d))
        k = tuple(int(x) for x in rng.integers(-10**4, 10**4, size=d))
        # coset invariance and landing in the fundamental domain
        r = rs.reduce(v)
        assert r == rs.reduce(tuple(a + b for a, b in zip(v, R @ k)))
        assert rs.reduce(r) == r
        assert r in set(reps)
        # counting residues
        assert len(reps) == abs(R.det)
        # R-invariance of Z[R, B] for a random digit set containing 0
        B = [(0,) * d] + [tuple(int(x) for x in rng.integers(-6, 7, size=d)) for _ in range(2)]
        lat, _ = invariant_lattice(R, B)
        assert all(R @ c in lat for c in lat.basis)
        assert all(b in lat for b in B)
        cases += 1
    assert cases == 10_000


# --- 12 --------------------------------------------------------------------

RIEMANN_CASES = [
    # preset, depth, half-width of the xi box; the oracle's own error is at most
    # 2 pi ||(R^T)^{-depth} xi|| r_T, below 4e-6 in every case
    ("quarter_cantor", 16, 10.0),
    ("third_cantor", 13, 1.0),
    ("ex_4_0_1_4", 10, 0.25),
]


@pytest.mark.criterion(12)
@pytest.mark.parametrize("name,depth,width", RIEMANN_CASES)
def test_transform_matches_riemann_sum(presets, name, depth, width):
    p = presets[name]
    R, B = p["R"], [tuple(b) for b in p["B"]]
    d = len(R)
    rng = np.random.default_rng(7)
    xi = rng.uniform(-width, width, size=(100, d))
    ev = FourierEvaluator(R, B, tol=1e-9)
    got = ev(xi)
    ref = riemann_sum(R, B, depth, xi)
    assert np.max(np.abs(got - ref)) < 1e-5


@pytest.mark.criterion(12)
@pytest.mark.parametrize("name", VERIFIED)
def test_quadrature_identity(name):
    R, B, L = triple(name)
    rng = np.random.default_rng(11)
    xi = rng.uniform(-50, 50, size=(200, len(R)))
    assert np.max(np.abs(quadrature_sum(R, B, L, xi) - 1)) < 1e-10
