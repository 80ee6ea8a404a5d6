"""Command-line front end.

Every command writes ``report.json`` and its CSV/text artifacts to ``--out``
and exits 0 on a passing verdict, 1 on a failing one (or an obstruction) and
2 on an error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config as cfg
from .digits import overlap_evidence, sample_attractor, write_points_csv
from .errors import ObstructionFound, SelfAffineError, UnknownCommand
from .fourier import z_set_scan, zero_membership_exact
from .frames import (ENUMERATION_CAP, default_pool, exhaustive_subset_search, frame_bounds,
                     greedy_subset_search, step_frame_check)
from .hadamard import product_triple, verify_triple
from .lattice import IntegerMatrix, invariant_lattice, is_expansive, is_simple_digit_set, reduce_pair
from .spectra import (SpectrumPlan, Stage, build_lambda, check_orthogonal, corrected_plan, delta_lambda,
                      estimate_lemma_constants, hadamard_plan, jp_check, jp_grid)

COMMANDS = ("verify-triple", "lattice-info", "attractor", "zero-scan", "spectrum-build",
            "jp-check", "delta", "frame-bounds", "frame-search", "step-check")

PASS, FAIL = "pass", "fail"


def _atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def _atomic_csv(path: Path, writer) -> Path:
    """Run ``writer(tmp_path)`` and move the result into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    writer(tmp)
    os.replace(tmp, path)
    return path


def _vec(v):
    return [int(x) if isinstance(x, (int, np.integer)) else str(x) if isinstance(x, Fraction) else float(x) for x in v]


def _require_L(conf: cfg.ProblemConfig):
    if conf.L is None:
        raise SelfAffineError("this command needs a dual digit set L in the config")
    return conf.L


def _plan(conf: cfg.ProblemConfig, K: int) -> SpectrumPlan:
    if conf.stages is not None:
        return SpectrumPlan(conf.R, conf.B, tuple(Stage(n, J) for n, J in conf.stages))
    return hadamard_plan(conf.R, conf.B, _require_L(conf), [1] * K)


# ---------------------------------------------------------------------------
# commands: each returns (verdict, results, artifacts)
# ---------------------------------------------------------------------------

def cmd_verify_triple(conf, args, out):
    T = verify_triple(conf.R, conf.B, _require_L(conf), tol=min(args.tol, 1e-12))
    results = {"accepted": T.accepted, "deviation": T.deviation, "B_simple": T.B_simple,
               "L_simple": T.L_simple, "reasons": list(T.reasons)}
    ok = T.accepted
    if args.depth and args.depth > 1 and T.accepted:
        tower = []
        for k in range(2, args.depth + 1):
            P = product_triple(T, k)
            tower.append({"k": k, "accepted": P.accepted, "deviation": P.deviation})
            ok = ok and P.accepted
        results["tower"] = tower
    return (PASS if ok else FAIL), results, {}


def cmd_lattice_info(conf, args, out):
    R = IntegerMatrix.of(conf.R)
    lat, b0 = invariant_lattice(R, conf.B)
    red = reduce_pair(R, conf.B)
    results = {
        "det": R.det,
        "expansive": is_expansive(R),
        "simple_digit_set": is_simple_digit_set(R, conf.B),
        "lattice_basis": [list(c) for c in lat.basis],
        "lattice_rank": lat.rank,
        "lattice_index": lat.index if lat.full_rank else None,
        "equals_Zd": lat.equals_Zd,
        "translation": list(b0),
        "reduced": {"kind": red.kind, "R": red.R.tolist(), "B": [list(b) for b in red.B], "M": red.M.tolist()},
    }
    return (PASS if lat.equals_Zd else FAIL), results, {}


def cmd_attractor(conf, args, out):
    depth = args.depth or 8
    sample = sample_attractor(conf.R, conf.B, depth)
    path = _atomic_csv(out / "attractor.csv", lambda p: write_points_csv(sample, p))
    ov = overlap_evidence(conf.R, conf.B, min(depth, 10))
    results = {"depth": depth, "points": len(sample), "exact": sample.exact,
               "overlap_depth": ov.depth, "overlap_eta": ov.eta, "overlap_fraction": ov.fraction}
    return (PASS if ov.near_points == 0 else FAIL), results, {"points": path.name}


def cmd_zero_scan(conf, args, out):
    rep = z_set_scan(conf.R, conf.B, args.grid or 64, window=args.window, tol=args.tol, workers=args.threads)
    path = _atomic_csv(out / "zero_scan.csv", rep.write_csv)
    results = {
        "grid": args.grid or 64, "window": args.window, "minimum": rep.minimum, "argmin": _vec(rep.argmin),
        "coverage": rep.coverage_note(), "candidates": len(rep.candidates),
        "confirmed": [{"point": [str(x) for x in c["point"]], "max_abs": c["max_abs"], "exact": c["exact"]}
                      for c in rep.confirmed],
        "obstruction": [str(x) for x in rep.obstruction] if rep.obstruction is not None else None,
    }
    if conf.points:
        results["points"] = []
        for p in conf.points:
            try:
                member = zero_membership_exact(conf.R, conf.B, list(p))
            except SelfAffineError:
                member = None
            results["points"].append({"point": _vec(p), "exact_zero": member})
    return (FAIL if rep.obstruction is not None else PASS), results, {"scan": path.name}


def cmd_spectrum_build(conf, args, out):
    if args.correct:
        consts = estimate_lemma_constants(conf.R, conf.B, K=args.window, h=1 / (args.grid or 128), tol=args.tol)
        plan = corrected_plan(conf.R, conf.B, _require_L(conf), consts, args.K)
    else:
        plan = _plan(conf, args.K)
    K = len(plan.stages)
    lam = build_lambda(plan, K)
    orth = check_orthogonal(conf.R, conf.B, lam, args.tol)

    def write(p):
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(f"lambda{i + 1}" for i in range(len(lam[0]))) + "\n")
            for v in sorted(lam):
                fh.write(",".join(str(x) for x in v) + "\n")

    path = _atomic_csv(out / "lambda.csv", write)
    results = {"stages": [{"n": st.n, "size": len(st.J), "corrected": st.is_corrected} for st in plan.stages],
               "m": plan.m, "size": len(lam), "max_orthogonality_residual": orth}
    return PASS, results, {"lambda": path.name}


def cmd_jp_check(conf, args, out):
    plan = _plan(conf, args.K)
    lam = build_lambda(plan, len(plan.stages))
    grid = jp_grid(len(conf.R), args.grid or 16)
    rep = jp_check(conf.R, conf.B, lam, grid, args.tol, workers=args.threads)
    path = _atomic_csv(out / "jp_check.csv", rep.write_csv)
    upper = 1 + 1e-9
    ok = bool(np.all(rep.Q > args.threshold) and np.all(rep.Q <= upper))
    results = {"size": len(lam), "points": len(grid), "Q_min": float(rep.Q.min()), "Q_max": float(rep.Q.max()),
               "threshold": args.threshold, "upper": upper, "bessel_bound": rep.bessel_bound}
    return (PASS if ok else FAIL), results, {"Q": path.name}


def cmd_delta(conf, args, out):
    consts = None
    if args.correct:
        consts = estimate_lemma_constants(conf.R, conf.B, K=args.window, h=1 / (args.grid or 128), tol=args.tol)
        plan = corrected_plan(conf.R, conf.B, _require_L(conf), consts, args.K)
    else:
        plan = _plan(conf, args.K)
    rep = delta_lambda(plan, len(plan.stages), args.tol, constants=consts)
    path = _atomic_write(out / "delta.txt", rep.to_text())
    results = {"delta": rep.delta, "running": rep.running, "bound": rep.bound_note}
    return (PASS if rep.delta > 0 else FAIL), results, {"delta": path.name}


def _level(args, default=1):
    return args.depth if args.depth else default


def cmd_frame_bounds(conf, args, out):
    n = _level(args)
    if conf.J is not None:
        J = conf.J
    else:
        from .digits import dual_expand
        J = dual_expand(conf.R, _require_L(conf), n).elements
    rep = frame_bounds(conf.R, conf.B, n, J)
    path = _atomic_write(out / "frame_report.txt", rep.to_text())
    results = {"n": n, "rows": len(J), "sigma2_min": rep.sigma2_min, "sigma2_max": rep.sigma2_max,
               "epsilon": rep.epsilon}
    return (PASS if rep.sigma2_min > 0 else FAIL), results, {"report": path.name}


def cmd_frame_search(conf, args, out):
    n = _level(args)
    pool = list(conf.J) if conf.J is not None else default_pool(conf.R, n)
    s = args.size or len(conf.B) ** n
    feasible = math.comb(len(pool), s) <= ENUMERATION_CAP
    exact = exhaustive_subset_search(conf.R, conf.B, n, s, pool) if feasible else None
    rep = greedy_subset_search(conf.R, conf.B, n, s, pool, seed=args.seed) if args.greedy or not feasible else exact
    path = _atomic_write(out / "frame_report.txt", rep.to_text())
    results = {"method": rep.method, "n": n, "size": s, "pool": len(pool), "J": [list(j) for j in rep.J],
               "sigma2_min": rep.sigma2_min, "sigma2_max": rep.sigma2_max, "epsilon": rep.epsilon}
    if rep is not exact and exact is not None:
        results["exhaustive_sigma2_min"] = exact.sigma2_min
        results["greedy_gap"] = exact.sigma2_min - rep.sigma2_min
    return (PASS if rep.sigma2_min > 0 else FAIL), results, {"report": path.name}


def cmd_step_check(conf, args, out):
    plan = _plan(conf, args.K)
    lam = build_lambda(plan, len(plan.stages))
    m_K = plan.m[-1]
    n = _level(args, min(4, m_K))
    rep = step_frame_check(conf.R, conf.B, lam, n, m_K, trials=args.trials, seed=args.seed, tol=args.tol)

    def write(p):
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write("trial,ratio\n")
            for i, r in enumerate(rep.ratios):
                fh.write(f"{i},{format(float(r), '.17g')}\n")

    path = _atomic_csv(out / "step_ratios.csv", write)
    results = {"level": n, "m_K": m_K, "trials": args.trials, "min_ratio": rep.min_ratio,
               "max_ratio": rep.max_ratio}
    return (PASS if rep.min_ratio > 0 else FAIL), results, {"ratios": path.name}


HANDLERS = {
    "verify-triple": cmd_verify_triple,
    "lattice-info": cmd_lattice_info,
    "attractor": cmd_attractor,
    "zero-scan": cmd_zero_scan,
    "spectrum-build": cmd_spectrum_build,
    "jp-check": cmd_jp_check,
    "delta": cmd_delta,
    "frame-bounds": cmd_frame_bounds,
    "frame-search": cmd_frame_search,
    "step-check": cmd_step_check,
}


def load_config(args) -> cfg.ProblemConfig:
    if args.config:
        conf = cfg.parse_config(args.config)
        if args.preset:
            merged = dict(cfg.PRESETS[args.preset], **{k: v for k, v in conf.to_dict().items() if k != "preset"})
            conf = cfg.config_from_dict(dict(merged, preset=args.preset))
        return conf
    if args.preset:
        return cfg.preset_config(args.preset)
    raise SelfAffineError("either --preset or --config is required")


def run(command: str, args) -> tuple[int, dict]:
    """Dispatch ``command``; returns the exit code and the report written to ``--out``."""
    if command not in HANDLERS:
        raise UnknownCommand(f"unknown command {command!r}")
    out = Path(args.out)
    start = time.perf_counter()
    report = {"command": command, "tolerances": {"tol": args.tol}}
    try:
        conf = load_config(args)
        report["inputs"] = conf.to_dict()
        verdict, results, artifacts = HANDLERS[command](conf, args, out)
        code = 0 if verdict == PASS else 1
        report.update(verdict=verdict, results=results, artifacts=artifacts)
    except ObstructionFound as exc:
        code = 1
        report.update(verdict="obstruction", error=str(exc), point=[str(x) for x in exc.x])
    except SelfAffineError as exc:
        code = 2
        report.update(verdict="error", error=f"{type(exc).__name__}: {exc}")
    report["flags"] = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "func")}
    report["wall_time"] = time.perf_counter() - start
    _atomic_write(out / "report.json", json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    return code, report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selfaffine", description="Spectral self-affine measures: triples, zero sets, spectra and frames.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--preset", choices=sorted(cfg.PRESETS))
    p.add_argument("--config", help="JSON problem file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--tol", type=float, default=1e-8, help="transform evaluation tolerance")
    p.add_argument("--grid", type=int, default=None, help="grid points per axis")
    p.add_argument("--window", type=int, default=8, help="shift window K for [-K, K]^d")
    p.add_argument("--K", type=int, default=8, help="number of stages")
    p.add_argument("--depth", type=int, default=None, help="level n / sample depth / tower height")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=None, help="subset size for frame-search")
    p.add_argument("--greedy", action="store_true", help="force greedy frame-search")
    p.add_argument("--correct", action="store_true", help="apply the k(j) correction to each stage")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.99, help="jp-check lower threshold")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, report = run(args.command, args)
    summary = {"command": report["command"], "verdict": report["verdict"]}
    if "error" in report:
        summary["error"] = report["error"]
    print(json.dumps(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
