"""Problem configuration: presets, JSON parsing and serialization.

A config is a JSON object::

    {"d": 2, "R": [[4, 0], [1, 2]], "B": [[0, 0], [0, 3], [1, 0], [1, 3]],
     "L": [[0, 0], [2, 0], [0, 1], [2, 1]]}

or ``{"preset": "ex_4_0_1_2"}``, optionally with overrides. Optional keys:
``J`` (frequency rows), ``stages`` (list of ``{"n": int, "J": [...]}``) and
``points`` (vectors whose entries may be integers or ``"p/q"`` strings).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ParseError, ShapeError

PRESETS = {
    "quarter_cantor": {"d": 1, "R": [[4]], "B": [[0], [2]], "L": [[0], [1]]},
    "third_cantor": {"d": 1, "R": [[3]], "B": [[0], [2]]},
    "gasket_d3": {
        "d": 3,
        "R": [[2, 0, 0], [0, 2, 0], [0, 0, 2]],
        "B": [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        # from the normalized Hadamard matrix [[1,1,1,1],[1,-1,1,-1],[1,1,-1,-1],[1,-1,-1,1]]
        "L": [[0, 0, 0], [1, 0, 1], [0, 1, 1], [1, 1, 0]],
    },
    "ex_4_0_1_4": {
        "d": 2,
        "R": [[4, 0], [1, 4]],
        "B": [[0, 0], [0, 3], [1, 0], [1, 3]],
        "L": [[0, 0], [2, 0], [0, 2], [2, 2]],
    },
    "ex_4_0_1_2": {
        "d": 2,
        "R": [[4, 0], [1, 2]],
        "B": [[0, 0], [0, 3], [1, 0], [1, 3]],
        "L": [[0, 0], [2, 0], [0, 1], [2, 1]],
    },
}

_KEYS = {"d", "R", "B", "L", "J", "stages", "points", "preset"}


@dataclass(frozen=True)
class ProblemConfig:
    d: int
    R: tuple
    B: tuple
    L: tuple | None = None
    J: tuple | None = None
    stages: tuple | None = None
    points: tuple | None = None
    preset: str | None = None

    def to_dict(self) -> dict:
        out = {"d": self.d, "R": [list(r) for r in self.R], "B": [list(b) for b in self.B]}
        if self.L is not None:
            out["L"] = [list(v) for v in self.L]
        if self.J is not None:
            out["J"] = [list(v) for v in self.J]
        if self.stages is not None:
            out["stages"] = [{"n": n, "J": [list(v) for v in J]} for n, J in self.stages]
        if self.points is not None:
            out["points"] = [[_format_rational(x) for x in p] for p in self.points]
        if self.preset is not None:
            out["preset"] = self.preset
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _format_rational(x: Fraction):
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return value


def _rational(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected an integer or 'p/q', got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            pass
    raise ParseError(f"{where}: expected an integer or 'p/q', got {value!r}")


def _vectors(value, d: int, where: str, parse=_int) -> tuple:
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected a list of vectors")
    out = []
    for i, v in enumerate(value):
        if not isinstance(v, list):
            raise ParseError(f"{where}[{i}]: expected a list")
        if len(v) != d:
            raise ShapeError(f"{where}[{i}]: length {len(v)} does not match d={d}")
        out.append(tuple(parse(x, f"{where}[{i}][{j}]") for j, x in enumerate(v)))
    return tuple(out)


def config_from_dict(data: dict) -> ProblemConfig:
    if not isinstance(data, dict):
        raise ParseError("top level: expected an object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ParseError(f"unknown field(s): {', '.join(sorted(unknown))}")
    merged = {}
    preset = data.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ParseError(f"preset: unknown name {preset!r} (choose from {', '.join(PRESETS)})")
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in data.items() if k != "preset"})
    for key in ("R", "B"):
        if key not in merged:
            raise ParseError(f"{key}: missing")
    R = merged["R"]
    if isinstance(R, int) and not isinstance(R, bool):
        R = [[R]]
    if not isinstance(R, list) or not R or not all(isinstance(r, list) for r in R):
        raise ParseError("R: expected a non-empty array of arrays")
    d = _int(merged.get("d", len(R)), "d")
    if len(R) != d or any(len(r) != d for r in R):
        raise ShapeError(f"R: expected a {d}x{d} matrix")
    R = tuple(tuple(_int(x, f"R[{i}][{j}]") for j, x in enumerate(r)) for i, r in enumerate(R))
    B = _vectors(merged["B"], d, "B")
    if not B:
        raise ParseError("B: must be non-empty")
    L = _vectors(merged["L"], d, "L") if merged.get("L") is not None else None
    J = _vectors(merged["J"], d, "J") if merged.get("J") is not None else None
    stages = None
    if merged.get("stages") is not None:
        if not isinstance(merged["stages"], list):
            raise ParseError("stages: expected a list")
        stages = []
        for i, st in enumerate(merged["stages"]):
            if not isinstance(st, dict) or set(st) != {"n", "J"}:
                raise ParseError(f"stages[{i}]: expected an object with keys 'n' and 'J'")
            n = _int(st["n"], f"stages[{i}].n")
            if n < 1:
                raise ParseError(f"stages[{i}].n: must be >= 1")
            stages.append((n, _vectors(st["J"], d, f"stages[{i}].J")))
        stages = tuple(stages)
    points = _vectors(merged["points"], d, "points", _rational) if merged.get("points") is not None else None
    return ProblemConfig(d, R, B, L, J, stages, points, preset)


def preset_config(name: str) -> ProblemConfig:
    return config_from_dict({"preset": name})


def parse_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)
