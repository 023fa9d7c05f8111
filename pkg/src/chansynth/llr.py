"""Exact laws of the quantized block LLR and its side-information triple.

For a blocklength ``n`` the block LLR of ``(x^n, y^n)`` is a sum of
per-letter terms ``lam(x_i, y_i)``.  Cells (x, y) whose likelihood ratio
``p(y|x)/p(y)`` coincide are merged into one *group*, so the block LLR is
``log2(prod_g r_g ** c_g)`` for the vector ``c`` of group counts.  Every
probability below is built from multinomial weights over those count
vectors in exact rational arithmetic, and every quantization is decided
exactly (``2**(j*Delta) <= R`` is an integer comparison once ``Delta`` is
rational).  Nothing here can land ambiguously on a bin edge.

Conditioning on ``x^n`` goes through its type: given the input sequence,
the per-letter terms are independent with laws that depend only on the
letter, so the conditional law depends on ``x^n`` only through its counts.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, Mapping, NamedTuple, Sequence

from .dmc import Dmc, log2_fraction, to_fraction
from .errors import BinBoundaryAmbiguity, ZeroProbabilityConditioning

AMBIGUITY_TOL = 1e-9


@dataclass(frozen=True)
class Quantizer:
    """Uniform quantizer onto the left edges of ``[j*delta, (j+1)*delta)``."""

    delta: Fraction

    def __post_init__(self):
        d = to_fraction(self.delta)
        if d <= 0:
            raise ValueError(f"quantizer step must be positive, got {d}")
        object.__setattr__(self, "delta", d)

    @property
    def delta_f(self) -> float:
        return float(self.delta)


@dataclass(frozen=True, order=True)
class BinValue:
    j: int
    delta: Fraction = field(compare=False)

    @property
    def value(self) -> float:
        return float(self.j * self.delta)


class BarTriple(NamedTuple):
    """Bin indices of (Gamma-bar-1, Gamma-bar-2, Gamma-double-bar); values are index * delta."""

    g1: int
    g2: int
    gg: int

    @property
    def gbar(self) -> int:
        return self.g2 - self.g1


@dataclass(frozen=True)
class XType:
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)


def xtype_of(xseq: Sequence[int], x_size: int) -> XType:
    counts = [0] * x_size
    for a in xseq:
        counts[a] += 1
    return XType(tuple(counts))


@dataclass(frozen=True)
class GammaPmf:
    probs: dict[int, Fraction]      # bin index -> probability
    delta: Fraction
    n: int
    given: str = ""

    def __getitem__(self, j: int) -> float:
        return float(self.probs.get(j, 0))

    def __len__(self) -> int:
        return len(self.probs)

    def support(self) -> list[int]:
        return sorted(self.probs)

    def float_probs(self) -> dict[int, float]:
        return {j: float(p) for j, p in sorted(self.probs.items())}

    def by_value(self) -> dict[float, float]:
        return {float(j * self.delta): float(p) for j, p in sorted(self.probs.items())}

    def mean(self) -> float:
        return math.fsum(float(j * self.delta) * float(p) for j, p in self.probs.items())


def quantize(q: Quantizer, v: float) -> BinValue:
    """Bin of a float value, refusing values numerically on an edge."""
    if not math.isfinite(v):
        raise ValueError(f"cannot quantize {v!r}")
    d = q.delta_f
    ratio = v / d
    nearest = round(ratio)
    if ratio != nearest and abs(ratio - nearest) < AMBIGUITY_TOL:
        raise BinBoundaryAmbiguity(
            f"value {v!r} is within {AMBIGUITY_TOL:g} bins of edge {nearest}*{d}")
    return BinValue(math.floor(ratio), q.delta)


def floor_log2_over_delta(r: Fraction, delta: Fraction) -> int:
    """Exact ``floor(log2(r) / delta)`` for a positive rational ``r``."""
    if r <= 0:
        raise ValueError("log of a non-positive number")
    p, q = delta.numerator, delta.denominator
    num_q, den_q = r.numerator ** q, r.denominator ** q

    def below(j: int) -> bool:
        # 2**(j*p/q) <= r  <=>  2**(j*p) * den**q <= num**q
        e = j * p
        if e >= 0:
            return (den_q << e) <= num_q
        return den_q <= (num_q << -e)

    j = math.floor(log2_fraction(r) / float(delta))
    while not below(j):
        j -= 1
    while below(j + 1):
        j += 1
    return j


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial(total: int, parts: Sequence[int]) -> int:
    out = math.factorial(total)
    for c in parts:
        out //= math.factorial(c)
    return out


class LlrModel:
    """All exact quantized-LLR laws for one (channel, quantizer, blocklength)."""

    def __init__(self, dmc: Dmc, q: Quantizer, n: int):
        if n < 1:
            raise ValueError("blocklength must be >= 1")
        self.dmc, self.q, self.n = dmc, q, n
        ratios = sorted({dmc.pyx[a][y] / dmc.py[y] for a, y in dmc.support()})
        self.group_ratio: list[Fraction] = ratios
        self.group_lam: list[float] = [log2_fraction(r) for r in ratios]
        index = {r: g for g, r in enumerate(ratios)}
        self.gid: dict[tuple[int, int], int] = {
            (a, y): index[dmc.pyx[a][y] / dmc.py[y]] for a, y in dmc.support()}
        self.symbols = [a for a in range(dmc.x_size) if dmc.px[a] > 0]
        # per input letter: groups reachable and their merged probabilities
        self._row_groups: dict[int, list[tuple[int, Fraction]]] = {}
        for a in self.symbols:
            acc: dict[int, Fraction] = defaultdict(Fraction)
            for y in range(dmc.y_size):
                if dmc.pyx[a][y] > 0:
                    acc[self.gid[(a, y)]] += dmc.pyx[a][y]
            self._row_groups[a] = sorted(acc.items())
        self._bin_cache: dict[tuple[int, ...], int] = {}
        self._type_cache: dict[XType, dict[int, Fraction]] = {}
        self._triple_cache: dict[XType, dict[int, BarTriple]] = {}
        self._pair_cache: dict[XType, dict[tuple[int, int], Fraction]] = {}

    @property
    def k(self) -> int:
        return len(self.group_ratio)

    # -- keys ---------------------------------------------------------------

    def key_bin(self, key: tuple[int, ...]) -> int:
        j = self._bin_cache.get(key)
        if j is None:
            r = Fraction(1)
            for g, c in enumerate(key):
                if c:
                    r *= self.group_ratio[g] ** c
            j = floor_log2_over_delta(r, self.q.delta)
            self._bin_cache[key] = j
        return j

    def key_llr(self, key: tuple[int, ...]) -> float:
        """Unquantized block LLR in bits."""
        return math.fsum(c * self.group_lam[g] for g, c in enumerate(key) if c)

    def seq_key(self, xseq: Sequence[int], yseq: Sequence[int]) -> tuple[int, ...] | None:
        """Group counts of a sequence pair, or None off the joint support."""
        counts = [0] * self.k
        for a, y in zip(xseq, yseq):
            g = self.gid.get((a, y))
            if g is None:
                return None
            counts[g] += 1
        return tuple(counts)

    @cached_property
    def y_group(self) -> dict[int, int]:
        """Output letter -> group; only meaningful when every output has one LLR."""
        out: dict[int, int] = {}
        for (a, y), g in self.gid.items():
            if out.setdefault(y, g) != g:
                raise ValueError("channel is not singular: output LLR depends on the input")
        return out

    def y_key(self, yseq: Sequence[int]) -> tuple[int, ...]:
        counts = [0] * self.k
        yg = self.y_group
        for y in yseq:
            counts[yg[y]] += 1
        return tuple(counts)

    # -- types ----------------------------------------------------------------

    @cached_property
    def types(self) -> list[XType]:
        out = []
        for comp in _compositions(self.n, len(self.symbols)):
            counts = [0] * self.dmc.x_size
            for a, c in zip(self.symbols, comp):
                counts[a] = c
            out.append(XType(tuple(counts)))
        return out

    def type_prob(self, t: XType) -> Fraction:
        p = Fraction(_multinomial(self.n, t.counts))
        for a, c in enumerate(t.counts):
            if c:
                p *= self.dmc.px[a] ** c
        return p

    def check_type(self, t: XType) -> None:
        if len(t.counts) != self.dmc.x_size or t.n != self.n or min(t.counts) < 0:
            raise ValueError(f"{t} is not a type of length {self.n}")
        for a, c in enumerate(t.counts):
            if c and self.dmc.px[a] == 0:
                raise ValueError(f"type uses input {a} which has zero probability")

    def key_law_given_type(self, t: XType) -> tuple[dict[tuple[int, ...], int], int]:
        """Integer weights over group-count keys, with their common denominator."""
        dist: dict[tuple[int, ...], int] = {(0,) * self.k: 1}
        den = 1
        for a, c in enumerate(t.counts):
            if not c:
                continue
            groups = self._row_groups[a]
            d_a = math.lcm(*(p.denominator for _, p in groups))
            nums = [p.numerator * (d_a // p.denominator) for _, p in groups]
            den *= d_a ** c
            sub: dict[tuple[int, ...], int] = {}
            for comp in _compositions(c, len(groups)):
                w = _multinomial(c, comp)
                for num, ci in zip(nums, comp):
                    if ci:
                        w *= num ** ci
                key = [0] * self.k
                for (g, _), ci in zip(groups, comp):
                    key[g] += ci
                sub[tuple(key)] = w
            new: dict[tuple[int, ...], int] = defaultdict(int)
            for k1, w1 in dist.items():
                for k2, w2 in sub.items():
                    new[tuple(u + v for u, v in zip(k1, k2))] += w1 * w2
            dist = dict(new)
        return dist, den

    def gamma_given_type(self, t: XType) -> dict[int, Fraction]:
        cached = self._type_cache.get(t)
        if cached is not None:
            return cached
        self.check_type(t)
        dist, den = self.key_law_given_type(t)
        acc: dict[int, int] = defaultdict(int)
        for key, w in dist.items():
            acc[self.key_bin(key)] += w
        out = {j: Fraction(w, den) for j, w in sorted(acc.items()) if w}
        self._type_cache[t] = out
        return out

    @cached_property
    def gamma_marginal(self) -> dict[int, Fraction]:
        acc: dict[int, Fraction] = defaultdict(Fraction)
        for t in self.types:
            pt = self.type_prob(t)
            for j, p in self.gamma_given_type(t).items():
                acc[j] += pt * p
        return dict(sorted(acc.items()))

    # -- side information ---------------------------------------------------------

    def neglog_bin(self, p: Fraction) -> int:
        """Bin of -log2(p) for 0 < p <= 1."""
        return floor_log2_over_delta(1 / p, self.q.delta)

    def _side_info(self, t: XType) -> None:
        if t in self._triple_cache:
            return
        cond = self.gamma_given_type(t)
        marg = self.gamma_marginal
        pairs: dict[int, tuple[int, int]] = {
            j: (self.neglog_bin(p), self.neglog_bin(marg[j])) for j, p in cond.items()}
        mass: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
        for j, pair in pairs.items():
            mass[pair] += cond[j]
        gg = {pair: self.neglog_bin(m) for pair, m in mass.items()}
        self._pair_cache[t] = dict(mass)
        self._triple_cache[t] = {j: BarTriple(g1, g2, gg[(g1, g2)])
                                 for j, (g1, g2) in pairs.items()}

    def triples_given_type(self, t: XType) -> dict[int, BarTriple]:
        self._side_info(t)
        return self._triple_cache[t]

    def pair_mass(self, t: XType, g1: int, g2: int) -> Fraction:
        self._side_info(t)
        return self._pair_cache[t].get((g1, g2), Fraction(0))

    def triple(self, t: XType, j: int) -> BarTriple:
        tr = self.triples_given_type(t).get(j)
        if tr is None:
            raise ZeroProbabilityConditioning(f"bin {j} has zero probability given {t}")
        return tr

    def cond_gamma_given_pair(self, t: XType, g1: int, g2: int) -> dict[int, Fraction]:
        m = self.pair_mass(t, g1, g2)
        if m == 0:
            raise ZeroProbabilityConditioning(f"pair ({g1}, {g2}) impossible given {t}")
        cond = self.gamma_given_type(t)
        return {j: cond[j] / m for j, tr in self.triples_given_type(t).items()
                if (tr.g1, tr.g2) == (g1, g2)}

    @cached_property
    def triple_marginal(self) -> dict[BarTriple, Fraction]:
        acc: dict[BarTriple, Fraction] = defaultdict(Fraction)
        for t in self.types:
            pt = self.type_prob(t)
            cond = self.gamma_given_type(t)
            for j, tr in self.triples_given_type(t).items():
                acc[tr] += pt * cond[j]
        return dict(sorted(acc.items()))

    def triple_given_type(self, t: XType) -> dict[BarTriple, Fraction]:
        cond = self.gamma_given_type(t)
        acc: dict[BarTriple, Fraction] = defaultdict(Fraction)
        for j, tr in self.triples_given_type(t).items():
            acc[tr] += cond[j]
        return dict(sorted(acc.items()))

    # -- summaries ---------------------------------------------------------------

    def component_marginals(self) -> tuple[dict[int, Fraction], ...]:
        """Marginal laws of the three side-information bins."""
        out = (defaultdict(Fraction), defaultdict(Fraction), defaultdict(Fraction))
        for tr, p in self.triple_marginal.items():
            for i in range(3):
                out[i][tr[i]] += p
        return tuple(dict(sorted(d.items())) for d in out)

    @cached_property
    def entropies(self) -> dict[str, float]:
        g1, g2, gg = self.component_marginals()
        h_gamma = pmf_entropy(self.gamma_marginal)
        h_cond = math.fsum(float(self.type_prob(t)) * pmf_entropy(self.gamma_given_type(t))
                           for t in self.types)
        return {
            "H_gamma": h_gamma,
            "H_gamma_given_x": h_cond,
            "I_gamma_x": h_gamma - h_cond,
            "H_g1": pmf_entropy(g1),
            "H_g2": pmf_entropy(g2),
            "H_gg": pmf_entropy(gg),
            "H_triple": pmf_entropy(self.triple_marginal),
        }

    def llr_moments(self) -> tuple[float, float]:
        """Mean and variance of the unquantized block LLR, from the exact key laws."""
        terms1, terms2 = [], []
        for t in self.types:
            pt = self.type_prob(t)
            dist, den = self.key_law_given_type(t)
            for key, w in dist.items():
                p = float(pt * Fraction(w, den))
                v = self.key_llr(key)
                terms1.append(p * v)
                terms2.append(p * v * v)
        m1 = math.fsum(terms1)
        m2 = math.fsum(terms2)
        return m1, m2 - m1 * m1

    def gamma_pmf(self, probs: Mapping[int, Fraction], given: str) -> GammaPmf:
        return GammaPmf(dict(probs), self.q.delta, self.n, given)


def pmf_entropy(pmf: Mapping) -> float:
    """Shannon entropy in bits of a mapping atom -> probability."""
    if isinstance(pmf, GammaPmf):
        pmf = pmf.probs
    terms = []
    for p in pmf.values():
        if p > 0:
            if isinstance(p, Fraction):
                terms.append(-float(p) * log2_fraction(p))
            else:
                p = float(p)
                terms.append(-p * math.log2(p))
    return max(0.0, math.fsum(terms))


@lru_cache(maxsize=64)
def llr_model(dmc: Dmc, q: Quantizer, n: int) -> LlrModel:
    return LlrModel(dmc, q, n)


# Function-style entry points -------------------------------------------------

def _as_q(q) -> Quantizer:
    return q if isinstance(q, Quantizer) else Quantizer(q)


def _as_j(gamma) -> int:
    return gamma.j if isinstance(gamma, BinValue) else int(gamma)


def gamma_given_xtype(dmc: Dmc, q, n: int, t: XType) -> GammaPmf:
    m = llr_model(dmc, _as_q(q), n)
    return m.gamma_pmf(m.gamma_given_type(t), f"type={t.counts}")


def gamma_marginal(dmc: Dmc, q, n: int) -> GammaPmf:
    m = llr_model(dmc, _as_q(q), n)
    return m.gamma_pmf(m.gamma_marginal, "marginal")


def bar_triple(dmc: Dmc, q, n: int, t: XType, gamma) -> BarTriple:
    return llr_model(dmc, _as_q(q), n).triple(t, _as_j(gamma))


def triple_marginal(dmc: Dmc, q, n: int) -> dict[BarTriple, Fraction]:
    return llr_model(dmc, _as_q(q), n).triple_marginal


def cond_gamma_given_triple(dmc: Dmc, q, n: int, t: XType, triple) -> GammaPmf:
    m = llr_model(dmc, _as_q(q), n)
    g1, g2 = triple[0], triple[1]
    return m.gamma_pmf(m.cond_gamma_given_pair(t, g1, g2), f"type={t.counts},pair=({g1},{g2})")
