"""Finite discrete memoryless channels.

A :class:`Dmc` holds the input law ``px`` and the row-stochastic transition
matrix ``pyx`` as exact rationals.  Float views are available for numerics;
the rationals are what the quantized-LLR machinery in :mod:`chansynth.llr`
works from, so that bin decisions never depend on rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyAlphabet, NegativeEntry, NonStochastic

STOCHASTIC_TOL = 1e-12
SINGULAR_TOL = 1e-12


def to_fraction(v) -> Fraction:
    """Exact rational for a probability given as str, int, Fraction or float.

    Floats go through ``repr`` so that ``0.11`` means 11/100 rather than the
    nearest binary double.
    """
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite probability {v!r}")
        return Fraction(repr(float(v)))
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot interpret {v!r} as a probability")


def log2_fraction(r: Fraction) -> float:
    """log2 of a positive rational, safe for numerators/denominators of any size."""
    return math.log2(r.numerator) - math.log2(r.denominator)


@dataclass(frozen=True)
class Dmc:
    px: tuple[Fraction, ...]
    pyx: tuple[tuple[Fraction, ...], ...]

    @property
    def x_size(self) -> int:
        return len(self.px)

    @property
    def y_size(self) -> int:
        return len(self.pyx[0])

    @cached_property
    def py(self) -> tuple[Fraction, ...]:
        return tuple(
            sum((self.px[a] * self.pyx[a][y] for a in range(self.x_size)), Fraction(0))
            for y in range(self.y_size)
        )

    @cached_property
    def px_f(self) -> np.ndarray:
        return np.array([float(p) for p in self.px])

    @cached_property
    def pyx_f(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.pyx])

    @cached_property
    def py_f(self) -> np.ndarray:
        return np.array([float(p) for p in self.py])

    @cached_property
    def pxy_f(self) -> np.ndarray:
        return np.array([[float(self.px[a] * self.pyx[a][y]) for y in range(self.y_size)]
                         for a in range(self.x_size)])

    @cached_property
    def llr(self) -> "LlrTable":
        return llr_table(self)

    def support(self) -> list[tuple[int, int]]:
        """Pairs (x, y) with positive joint probability."""
        return [(a, y) for a in range(self.x_size) for y in range(self.y_size)
                if self.px[a] > 0 and self.pyx[a][y] > 0]

    def __repr__(self) -> str:
        rows = ", ".join("[" + ", ".join(str(p) for p in row) + "]" for row in self.pyx)
        return f"Dmc(px=[{', '.join(str(p) for p in self.px)}], pyx=[{rows}])"


@dataclass(frozen=True)
class LlrTable:
    """Per-symbol base-2 log-likelihood ratios, defined on the joint support only."""

    lam: np.ndarray          # NaN off-support
    mask: np.ndarray         # bool, p_XY(x, y) > 0
    ratio: dict              # (x, y) -> exact p(y|x)/p(y) on the support


def validate_dmc(px: Sequence, pyx: Sequence[Sequence]) -> Dmc:
    """Check and freeze a channel.

    Entries may be decimal strings, floats, ints or Fractions.  Vectors that
    are stochastic only to within ``1e-12`` are renormalised exactly so that
    downstream pmfs sum to one without residue.
    """
    if len(px) == 0 or len(pyx) == 0 or any(len(row) == 0 for row in pyx):
        raise EmptyAlphabet("input and output alphabets must be non-empty")
    if len(pyx) != len(px):
        raise ValueError(f"pyx has {len(pyx)} rows but px has {len(px)} entries")
    width = len(pyx[0])
    if any(len(row) != width for row in pyx):
        raise ValueError("pyx rows have inconsistent lengths")

    fpx = [to_fraction(p) for p in px]
    fpyx = [[to_fraction(p) for p in row] for row in pyx]
    entries = fpx + [p for row in fpyx for p in row]
    for p in entries:
        if p < 0:
            raise NegativeEntry(f"negative probability {p}")
    for p in entries:
        if p > 1:
            raise NonStochastic(f"probability {p} exceeds 1")

    def _normalise(vec: list[Fraction], what: str) -> tuple[Fraction, ...]:
        s = sum(vec, Fraction(0))
        if abs(float(s - 1)) > STOCHASTIC_TOL:
            raise NonStochastic(f"{what} sums to {float(s)!r}, not 1")
        return tuple(vec) if s == 1 else tuple(p / s for p in vec)

    return Dmc(
        px=_normalise(fpx, "px"),
        pyx=tuple(_normalise(row, f"pyx row {a}") for a, row in enumerate(fpyx)),
    )


def marginal_y(dmc: Dmc) -> np.ndarray:
    return dmc.py_f.copy()


def llr_table(dmc: Dmc) -> LlrTable:
    lam = np.full((dmc.x_size, dmc.y_size), np.nan)
    mask = np.zeros((dmc.x_size, dmc.y_size), dtype=bool)
    ratio = {}
    for a, y in dmc.support():
        r = dmc.pyx[a][y] / dmc.py[y]
        ratio[(a, y)] = r
        lam[a, y] = log2_fraction(r)
        mask[a, y] = True
    return LlrTable(lam=lam, mask=mask, ratio=ratio)


def mutual_information(dmc: Dmc) -> float:
    """I(X;Y) in bits."""
    t = dmc.llr
    return math.fsum(float(dmc.pxy_f[a, y]) * t.lam[a, y] for a, y in dmc.support())


def llr_sigma2(dmc: Dmc) -> float:
    """Variance of the single-letter LLR under p_XY, in bits^2."""
    t = dmc.llr
    mean = mutual_information(dmc)
    return math.fsum(float(dmc.pxy_f[a, y]) * (t.lam[a, y] - mean) ** 2
                     for a, y in dmc.support())


def is_singular(dmc: Dmc) -> tuple[bool, tuple[int, int, int] | None]:
    """Whether every output is reached with one common likelihood.

    Returns ``(flag, witness)``; the witness ``(y, x1, x2)`` is the first
    violating triple in (y, x1, x2) lexicographic order.
    """
    xs = [a for a in range(dmc.x_size) if dmc.px[a] > 0]
    for y in range(dmc.y_size):
        for i, x1 in enumerate(xs):
            for x2 in xs[i + 1:]:
                p1, p2 = dmc.pyx[x1][y], dmc.pyx[x2][y]
                if p1 > 0 and p2 > 0 and abs(float(p1 - p2)) > SINGULAR_TOL:
                    return False, (y, x1, x2)
    return True, None


# Named channels used throughout the tests and experiments.

def bsc(eps, px=("1/2", "1/2")) -> Dmc:
    e = to_fraction(eps)
    return validate_dmc(px, [[1 - e, e], [e, 1 - e]])


def bec(eps, px=("1/2", "1/2")) -> Dmc:
    e = to_fraction(eps)
    return validate_dmc(px, [[1 - e, 0, e], [0, 1 - e, e]])


def identity(k: int = 2) -> Dmc:
    px = [Fraction(1, k)] * k
    return validate_dmc(px, [[int(a == b) for b in range(k)] for a in range(k)])


# Channel spec files: JSON with x_size, y_size, px, pyx (decimal strings).

def parse_channel_spec(text: str) -> Dmc:
    doc = json.loads(text)
    for key in ("x_size", "y_size", "px", "pyx"):
        if key not in doc:
            raise ValueError(f"channel spec missing field {key!r}")
    dmc = validate_dmc(doc["px"], doc["pyx"])
    if dmc.x_size != int(doc["x_size"]) or dmc.y_size != int(doc["y_size"]):
        raise ValueError("declared alphabet sizes disagree with px/pyx dimensions")
    return dmc


def load_channel(path: str | Path) -> Dmc:
    return parse_channel_spec(Path(path).read_text())


def channel_spec_text(dmc: Dmc) -> str:
    return json.dumps({
        "x_size": dmc.x_size,
        "y_size": dmc.y_size,
        "px": [_decimal_str(p) for p in dmc.px],
        "pyx": [[_decimal_str(p) for p in row] for row in dmc.pyx],
    }, indent=2)


def _decimal_str(p: Fraction) -> str:
    # keep exact: terminating decimals as decimals, otherwise as a ratio
    d = p.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{p.numerator}/{p.denominator}"
    k = 0
    while (p * 10 ** k).denominator != 1:
        k += 1
    s = f"{p.numerator * 10 ** k // p.denominator}"
    if k == 0:
        return s
    s = s.rjust(k + 1, "0")
    return f"{s[:-k]}.{s[-k:]}"
