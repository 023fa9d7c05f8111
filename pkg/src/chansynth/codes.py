"""Prefix-free codes and bit I/O.

Bit order is MSB-first: the first bit written becomes the most significant
bit of the first byte when a :class:`BitString` is serialised with
``to_bytes`` (trailing pad bits are zero).
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

from .errors import DomainError, EmptySupport, MalformedBitstream, UnexpectedEndOfStream


@dataclass(frozen=True)
class BitString:
    value: int = 0
    length: int = 0

    def __post_init__(self):
        if self.length < 0 or self.value < 0 or self.value >> self.length:
            raise ValueError("value does not fit in length bits")

    @classmethod
    def from_str(cls, s: str) -> "BitString":
        s = s.strip()
        if s and set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {s!r}")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        v = n = 0
        for b in bits:
            v = (v << 1) | (1 if b else 0)
            n += 1
        return cls(v, n)

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitString":
        v = int.from_bytes(data, "big") >> (8 * len(data) - length) if data else 0
        return cls(v, length)

    def __len__(self) -> int:
        return self.length

    def __add__(self, other: "BitString") -> "BitString":
        return BitString((self.value << other.length) | other.value, self.length + other.length)

    def __getitem__(self, i: int) -> int:
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> (self.length - 1 - i)) & 1

    def __iter__(self):
        for i in range(self.length):
            yield (self.value >> (self.length - 1 - i)) & 1

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def to_bytes(self) -> bytes:
        nbytes = (self.length + 7) // 8
        return (self.value << (8 * nbytes - self.length)).to_bytes(nbytes, "big")

    def flip(self, i: int) -> "BitString":
        return BitString(self.value ^ (1 << (self.length - 1 - i)), self.length)


class BitWriter:
    def __init__(self):
        self._value = 0
        self._length = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits < 0 or value >> nbits:
            raise ValueError(f"{value} does not fit in {nbits} bits")
        self._value = (self._value << nbits) | value
        self._length += nbits

    def write_bit(self, bit: int) -> None:
        self.write(1 if bit else 0, 1)

    def append(self, bits: BitString) -> None:
        self.write(bits.value, bits.length)

    def __len__(self) -> int:
        return self._length

    def getvalue(self) -> BitString:
        return BitString(self._value, self._length)


class BitReader:
    def __init__(self, bits: BitString):
        self.bits = bits
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self.bits.length - self.pos

    def read(self, nbits: int) -> int:
        if nbits > self.remaining:
            raise UnexpectedEndOfStream(
                f"wanted {nbits} bits at offset {self.pos}, only {self.remaining} left")
        shift = self.bits.length - self.pos - nbits
        self.pos += nbits
        return (self.bits.value >> shift) & ((1 << nbits) - 1)

    def read_bit(self) -> int:
        return self.read(1)

    def read_unary(self) -> int:
        """Count of 1s before the terminating 0."""
        q = 0
        while self.read_bit():
            q += 1
        return q


# Golomb codes for indices 1, 2, 3, ...

def golomb_param_for(p_success: float) -> int:
    """Optimal Golomb parameter for a geometric law on {1, 2, ...}.

    Smallest m with theta**m + theta**(m+1) <= 1, theta = 1 - p.
    """
    p = float(p_success)
    if not 0.0 < p < 1.0:
        raise DomainError(f"success probability must lie in (0, 1), got {p!r}")
    log_theta = math.log1p(-p)

    def pw(k: int) -> float:
        return math.exp(k * log_theta)

    m = max(1, math.ceil(math.log(2.0 - p) / -log_theta))
    while pw(m) + pw(m + 1) > 1.0:
        m += 1
    while m > 1 and pw(m - 1) + pw(m) <= 1.0:
        m -= 1
    return m


def _truncated_binary_params(m: int) -> tuple[int, int]:
    b = (m - 1).bit_length()      # ceil(log2 m) for m >= 1
    return b, (1 << b) - m


def golomb_length(m: int, k: int) -> int:
    q, r = divmod(k - 1, m)
    b, cut = _truncated_binary_params(m)
    return q + 1 + (b - 1 if r < cut else b)


def golomb_write(w: BitWriter, m: int, k: int) -> None:
    if m < 1:
        raise ValueError("Golomb parameter must be >= 1")
    if k < 1:
        raise ValueError("Golomb-coded indices start at 1")
    q, r = divmod(k - 1, m)
    w.write((1 << (q + 1)) - 2, q + 1)   # q ones then a zero
    b, cut = _truncated_binary_params(m)
    if r < cut:
        w.write(r, b - 1)
    else:
        w.write(r + cut, b)


def golomb_read(rd: BitReader, m: int) -> int:
    q = rd.read_unary()
    b, cut = _truncated_binary_params(m)
    if b == 0:
        r = 0
    else:
        r = rd.read(b - 1)
        if r >= cut:
            r = ((r << 1) | rd.read_bit()) - cut
    return q * m + r + 1


def golomb_encode(m: int, k: int) -> BitString:
    w = BitWriter()
    golomb_write(w, m, k)
    return w.getvalue()


def golomb_decode(m: int, bits: BitString) -> tuple[int, int]:
    """Decode one codeword from the front of ``bits``; returns (k, bits consumed)."""
    rd = BitReader(bits)
    k = golomb_read(rd, m)
    return k, rd.pos


# Huffman codes over finite ordered supports

@dataclass(frozen=True)
class HuffmanCode:
    """Canonical Huffman code; ``codewords`` preserves the support order."""

    codewords: dict
    lengths: dict

    @property
    def max_depth(self) -> int:
        return max(self.lengths.values())

    def kraft_sum(self) -> Fraction:
        return sum((Fraction(1, 2 ** l) for l in self.lengths.values()), Fraction(0))

    def expected_length(self, pmf: Mapping) -> float:
        return math.fsum(float(p) * self.lengths[a] for a, p in pmf.items())

    @property
    def _decode_table(self) -> dict[tuple[int, int], Hashable]:
        table = self.__dict__.get("_table")
        if table is None:
            table = {(cw.length, cw.value): a for a, cw in self.codewords.items()}
            object.__setattr__(self, "_table", table)
        return table

    def write(self, w: BitWriter, symbol) -> None:
        try:
            w.append(self.codewords[symbol])
        except KeyError:
            raise ValueError(f"{symbol!r} is not in the code's support") from None

    def encode(self, symbol) -> BitString:
        w = BitWriter()
        self.write(w, symbol)
        return w.getvalue()

    def read(self, rd: BitReader):
        table = self._decode_table
        depth = self.max_depth
        v = 0
        for length in range(0, depth + 1):
            sym = table.get((length, v))
            if sym is not None:
                return sym
            if length == depth:
                break
            v = (v << 1) | rd.read_bit()
        raise MalformedBitstream("bits do not form a Huffman codeword")

    def decode(self, bits: BitString):
        rd = BitReader(bits)
        sym = self.read(rd)
        return sym, rd.pos


def huffman_lengths(pmf: Mapping) -> dict:
    """Optimal codeword lengths with deterministic tie-breaking.

    Repeatedly merges the two lightest subtrees; among equal weights, the
    subtree whose smallest support element sorts first is taken first.
    """
    atoms = sorted(a for a, p in pmf.items() if p > 0)
    if not atoms:
        raise EmptySupport("Huffman code needs at least one atom of positive probability")
    if len(pmf) != len(atoms):
        raise ValueError("Huffman atoms must have positive probability")
    if len(atoms) == 1:
        return {atoms[0]: 0}
    depth = {a: 0 for a in atoms}
    # heap entries: (weight, rank of smallest element, members)
    heap = [(pmf[a], rank, [a]) for rank, a in enumerate(atoms)]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, r1, m1 = heapq.heappop(heap)
        w2, r2, m2 = heapq.heappop(heap)
        for a in itertools.chain(m1, m2):
            depth[a] += 1
        heapq.heappush(heap, (w1 + w2, min(r1, r2), m1 + m2))
    return depth


def canonical_code(lengths: Mapping) -> HuffmanCode:
    """Canonical codewords: sorted by (length, symbol), consecutive values."""
    order = sorted(lengths, key=lambda a: (lengths[a], a))
    codewords = {}
    code = 0
    prev = lengths[order[0]]
    for i, a in enumerate(order):
        l = lengths[a]
        if i:
            code = (code + 1) << (l - prev)
        codewords[a] = BitString(code, l)
        prev = l
    ordered = {a: codewords[a] for a in sorted(lengths)}
    return HuffmanCode(ordered, {a: lengths[a] for a in sorted(lengths)})


def huffman_build(pmf: Mapping) -> HuffmanCode:
    total = sum(pmf.values())
    if pmf and abs(float(total) - 1.0) > 1e-9:
        raise ValueError(f"pmf sums to {float(total)!r}")
    return canonical_code(huffman_lengths(pmf))


def huffman_encode(code: HuffmanCode, symbol) -> BitString:
    return code.encode(symbol)


def huffman_decode(code: HuffmanCode, bits: BitString):
    return code.decode(bits)


def geometric_entropy(p: float, tail: float = 1e-12) -> float:
    """Entropy in bits of a geometric law on {1, 2, ...}, by direct series summation."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"success probability must lie in (0, 1], got {p!r}")
    if p == 1.0:
        return 0.0
    terms = []
    log_q = math.log2(1.0 - p)
    log_p = math.log2(p)
    k = 1
    surv = 1.0
    while surv > tail:
        pk = p * surv
        terms.append(-pk * (log_p + (k - 1) * log_q))
        surv *= 1.0 - p
        k += 1
    return math.fsum(terms)


def golomb_expected_length(m: int, p: float, tail: float = 1e-12) -> float:
    """Mean Golomb codeword length under a geometric(p) index, summed directly."""
    terms = []
    k = 1
    surv = 1.0
    while surv > tail:
        terms.append(p * surv * golomb_length(m, k))
        surv *= 1.0 - p
        k += 1
    return math.fsum(terms)
