"""Rejection sampling against re-derivable codebooks.

Common randomness is a counter-mode stream: word ``i`` of the stream keyed
by ``(seed, domain_key)`` is

    base = mix64(seed XOR keyhash(domain_key))
    word(i) = mix64(base + i * 0x9E3779B97F4A7C15 mod 2**64)

where ``mix64`` is the SplitMix64 finalizer and ``keyhash`` takes the first
eight bytes (big-endian) of SHA-256 of the key.  A uniform variate is the top
53 bits of a word scaled by 2**-53.  Both parties can therefore regenerate
any codeword from its index alone, on any platform.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

from .errors import CeilingViolation, IterationLimit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
DEFAULT_ITERATION_LIMIT = 10 ** 9
CEILING_RTOL = 1e-9
TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def keyhash(domain_key: bytes | str) -> int:
    if isinstance(domain_key, str):
        domain_key = domain_key.encode()
    return int.from_bytes(hashlib.sha256(domain_key).digest()[:8], "big")


def sub_key(domain_key: bytes | str, *ints: int) -> bytes:
    """Domain key for an integer-indexed sub-stream, e.g. ``("primary", 7)``."""
    if isinstance(domain_key, str):
        domain_key = domain_key.encode()
    return domain_key + b"".join(b"/" + str(int(v)).encode() for v in ints)


def stream_base(seed: int, domain_key: bytes | str) -> int:
    return mix64((seed & MASK64) ^ keyhash(domain_key))


def stream_word(seed: int, domain_key: bytes | str, i: int) -> int:
    return mix64(stream_base(seed, domain_key) + i * GOLDEN)


def word_to_uniform(w: int) -> float:
    return (w >> 11) * TWO_M53


def derive_seed(master: int, *parts: int | str | bytes) -> int:
    """Deterministic 64-bit seed from a master seed and labelled parts."""
    h = mix64(master & MASK64)
    for p in parts:
        v = keyhash(p) if isinstance(p, (str, bytes)) else (int(p) & MASK64)
        h = mix64(h ^ mix64(v + GOLDEN))
    return h


class CounterRng:
    """Sequential uniforms from one counter-mode stream (starting at counter 1)."""

    __slots__ = ("seed", "key", "_base", "counter")

    def __init__(self, seed: int, key: bytes | str = b"private"):
        self.seed = seed & MASK64
        self.key = key
        self._base = stream_base(self.seed, key)
        self.counter = 0

    def random(self) -> float:
        self.counter += 1
        return word_to_uniform(mix64(self._base + self.counter * GOLDEN))

    def word(self) -> int:
        self.counter += 1
        return mix64(self._base + self.counter * GOLDEN)


class UniformSource(Protocol):
    def random(self) -> float: ...


class Proposal(Protocol):
    """Maps ``draws`` uniforms to one codebook item."""

    draws: int

    def __call__(self, us: Sequence[float]) -> Any: ...


@dataclass(frozen=True)
class DiscreteProposal:
    """Inverse-CDF sampler over atoms listed in a fixed order."""

    atoms: tuple
    cdf: tuple[float, ...]   # cumulative, last entry exactly 1.0
    draws: int = 1

    @classmethod
    def from_pmf(cls, pmf: dict) -> "DiscreteProposal":
        atoms = tuple(sorted(a for a, p in pmf.items() if p > 0))
        return cls(atoms, cdf_from_probs([pmf[a] for a in atoms]))

    def index(self, u: float) -> int:
        return bisect.bisect_right(self.cdf, u)

    def __call__(self, us: Sequence[float]):
        return self.atoms[self.index(us[0])]


def cdf_from_probs(probs: Sequence) -> tuple[float, ...]:
    """Float CDF from exact (or float) probabilities, accumulated exactly."""
    out = []
    acc = 0
    for p in probs:
        acc += p
        out.append(float(acc))
    out[-1] = 1.0
    return tuple(out)


@dataclass(frozen=True)
class SequenceProposal:
    """i.i.d. letters from one discrete law; item is a tuple of ``n`` symbols."""

    letter: DiscreteProposal
    n: int

    @property
    def draws(self) -> int:
        return self.n

    def __call__(self, us: Sequence[float]):
        return tuple(self.letter.atoms[self.letter.index(u)] for u in us)


def codebook_item(seed: int, domain_key: bytes | str, i: int, proposal: Proposal):
    """Item ``i`` (1-based) of the codebook keyed by (seed, domain_key)."""
    if i < 1:
        raise ValueError("codebook indices start at 1")
    base = stream_base(seed, domain_key)
    d = proposal.draws
    us = [word_to_uniform(mix64(base + c * GOLDEN)) for c in range((i - 1) * d + 1, i * d + 1)]
    return proposal(us)


class CodebookStream:
    """Infinite i.i.d. codebook, addressable by index."""

    def __init__(self, seed: int, domain_key: bytes | str, proposal: Proposal):
        self.seed = seed & MASK64
        self.domain_key = domain_key
        self.proposal = proposal
        self._base = stream_base(self.seed, domain_key)

    def item(self, i: int):
        if i < 1:
            raise ValueError("codebook indices start at 1")
        d = self.proposal.draws
        base = self._base
        us = [word_to_uniform(mix64(base + c * GOLDEN))
              for c in range((i - 1) * d + 1, i * d + 1)]
        return self.proposal(us)


class FilteredCodebook:
    """The sub-sequence of a codebook whose items satisfy ``keep``.

    Index ``i`` is the ``i``-th kept item, so encoder and decoder agree as long
    as both apply the same filter.  Raw positions are remembered, making
    sequential scans linear.
    """

    def __init__(self, raw: CodebookStream, keep: Callable[[Any], bool],
                 raw_limit: int = DEFAULT_ITERATION_LIMIT):
        self.raw = raw
        self.keep = keep
        self.raw_limit = raw_limit
        self._positions: list[int] = []
        self._items: list = []
        self._next_raw = 1

    def item(self, i: int):
        if i < 1:
            raise ValueError("codebook indices start at 1")
        while len(self._items) < i:
            if self._next_raw > self.raw_limit:
                raise IterationLimit(f"filter kept only {len(self._items)} of "
                                     f"{self.raw_limit} raw items")
            y = self.raw.item(self._next_raw)
            if self.keep(y):
                self._positions.append(self._next_raw)
                self._items.append(y)
            self._next_raw += 1
        return self._items[i - 1]

    @property
    def raw_draws(self) -> int:
        return self._next_raw - 1


@dataclass
class AcceptRule:
    """Likelihood ratio target/proposal together with its ceiling."""

    ratio: Callable[[Any], float]
    ceiling: float

    def __post_init__(self):
        if not self.ceiling >= 1:
            raise ValueError(f"ceiling must be >= 1, got {self.ceiling}")


@dataclass(frozen=True)
class SampleResult:
    index: int
    item: Any
    max_quotient: float = field(default=0.0, compare=False)


def rs_sample(cb, rule: AcceptRule, urand: UniformSource,
              max_iter: int = DEFAULT_ITERATION_LIMIT) -> SampleResult:
    """First index whose private uniform falls under ratio/ceiling."""
    m = rule.ceiling
    worst = 0.0
    for i in range(1, max_iter + 1):
        item = cb.item(i)
        r = rule.ratio(item)
        q = r / m
        if q > worst:
            worst = q
            if r > m * (1 + CEILING_RTOL):
                raise CeilingViolation(f"ratio {r!r} exceeds ceiling {m!r} at index {i}")
        if urand.random() <= q:
            return SampleResult(i, item, worst)
    raise IterationLimit(f"no acceptance within {max_iter} codewords (ceiling {m:g})")


def geometric_index(p: float, u: float) -> int:
    """Inverse-CDF draw of a geometric variable on {1, 2, ...} with success probability p."""
    if p >= 1.0:
        return 1
    # P(I > k) = (1-p)**k ; smallest k with 1 - (1-p)**k >= u
    v = 1.0 - u  # in (0, 1]
    if v >= 1.0:
        return 1
    return max(1, math.ceil(math.log(v) / math.log1p(-p)))
