"""Compiled encode/decode loops for many short blocks.

The kernels here replay :func:`chansynth.scheme.encode` and
:func:`chansynth.scheme.decode` over enumerated sequence alphabets, using
tables exported from :class:`~chansynth.scheme.SchemeTables`.  Every float
they compare is computed once in Python and shipped in a table, and the
arithmetic done in the kernels repeats the reference expressions in the
same order, so transcripts agree bit for bit with the reference path.
Only block sizes whose sequence pairs can be enumerated are supported.
"""

from __future__ import annotations

import itertools
from collections import namedtuple
from dataclasses import dataclass

import numba
import numpy as np

from .errors import CeilingViolation, IterationLimit
from .llr import xtype_of
from .rejection import GOLDEN, MASK64, keyhash, sub_key
from .scheme import (AUX_KEY, BASELINE_KEY, PRIMARY_KEY, SchemeConfig, baseline_tables,
                     tables_for)

MAX_BITS = 1024
MAX_ENUM = 1 << 20

# status codes
OK, VIOLATION, LIMIT, OVERFLOW = 0, 1, 2, 3

U64 = np.uint64
_G = U64(GOLDEN)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53

Tables = namedtuple("Tables", [
    "n", "x_size", "y_size", "singular",
    "px_cdf", "px_atoms", "py_cdf", "py_atoms",
    "type_of_x",                          # x-seq -> type id
    "ghost_cdf", "ghost_atoms", "ghost_len",   # per type, atoms are gamma ids
    "gamma_cdf", "gamma_bin",            # aux proposal over gamma ids; bin index per id
    "triple_of",                          # [type, gamma id] -> triple id or -1
    "code_val", "code_len", "max_depth",  # canonical Huffman per triple id
    "tau_aux", "m_aux", "aux_ratio",      # aux_ratio[type, triple id, gamma id]
    "tau_p", "m_p", "const",              # [triple id, gamma id], const[type, gamma id]
    "pair_bin", "pair_twolr", "pair_ok",  # [x-seq, y-seq]
    "y_bin",                              # y-seq -> bin of the output-only LLR (singular)
    "aux_hash", "primary_hash", "private_hash", "source_hash",
    "aux_limit", "primary_limit",
])

BaseTables = namedtuple("BaseTables", [
    "n", "x_size", "y_size", "px_cdf", "px_atoms", "py_cdf", "py_atoms",
    "pair_twolr", "pair_ok", "ceiling", "m", "deterministic",
    "base_hash", "private_hash", "source_hash", "limit",
])


def _padded(rows, fill, dtype):
    width = max(1, max((len(r) for r in rows), default=1))
    out = np.full((len(rows), width), fill, dtype=dtype)
    for i, r in enumerate(rows):
        out[i, :len(r)] = r
    return out


def _seq_index(seq, size):
    v = 0
    for s in seq:
        v = v * size + s
    return v


def _check_enumerable(cfg: SchemeConfig) -> None:
    if cfg.dmc.x_size ** cfg.n * cfg.dmc.y_size ** cfg.n > MAX_ENUM:
        raise ValueError(f"|X|^n |Y|^n exceeds {MAX_ENUM}; batch kernels need enumerable blocks")


def build_tables(cfg: SchemeConfig) -> Tables:
    _check_enumerable(cfg)
    tb = tables_for(cfg)
    model = tb.model
    dmc, n = cfg.dmc, cfg.n
    xs_all = list(itertools.product(range(dmc.x_size), repeat=n))
    ys_all = list(itertools.product(range(dmc.y_size), repeat=n))
    types = model.types
    type_id = {t: i for i, t in enumerate(types)}
    type_of_x = np.array([type_id.get(xtype_of(x, dmc.x_size), -1)
                          if all(dmc.px[a] > 0 for a in x) else -1 for x in xs_all], np.int64)

    gbins = list(tb.gamma_proposal.atoms)
    gid = {j: i for i, j in enumerate(gbins)}
    ghosts = [tb.ghost_proposal(t) for t in types]
    ghost_cdf = _padded([g.cdf for g in ghosts], 1.0, np.float64)
    ghost_atoms = _padded([[gid[j] for j in g.atoms] for g in ghosts], 0, np.int64)
    ghost_len = np.array([len(g.atoms) for g in ghosts], np.int64)

    triples = list(tb.triple_code.codewords)
    tid = {tr: i for i, tr in enumerate(triples)}
    triple_of = np.full((len(types), len(gbins)), -1, np.int64)
    for ti, t in enumerate(types):
        for j, tr in model.triples_given_type(t).items():
            triple_of[ti, gid[j]] = tid[tr]
    code_val = np.array([tb.triple_code.codewords[tr].value for tr in triples], np.int64)
    code_len = np.array([tb.triple_code.codewords[tr].length for tr in triples], np.int64)

    tau_aux = np.array([tb.tau_aux(tr) for tr in triples])
    m_aux = np.array([tb.golomb_m(v) for v in tau_aux], np.int64)
    aux_ratio = np.zeros((len(types), len(triples), len(gbins)))
    for ti, t in enumerate(types):
        for tr in set(model.triples_given_type(t).values()):
            for j, r in tb.aux_row(t, tr.g1, tr.g2).items():
                aux_ratio[ti, tid[tr], gid[j]] = r
    tau_p = np.array([[tb.tau_primary(j, tr) for j in gbins] for tr in triples])
    m_p = np.array([[tb.golomb_m(v) for v in row] for row in tau_p], np.int64)
    const = np.array([[tb.const(t, j) for j in gbins] for t in types])

    pair_bin = np.zeros((len(xs_all), len(ys_all)), np.int64)
    pair_twolr = np.zeros((len(xs_all), len(ys_all)))
    pair_ok = np.zeros((len(xs_all), len(ys_all)), np.bool_)
    for xi, x in enumerate(xs_all):
        for yi, y in enumerate(ys_all):
            key = model.seq_key(x, y)
            if key is not None:
                pair_ok[xi, yi] = True
                pair_bin[xi, yi] = model.key_bin(key)
                pair_twolr[xi, yi] = tb.twolr(key)
    y_bin = np.zeros(len(ys_all), np.int64)
    if tb.singular:
        for yi, y in enumerate(ys_all):
            if all(dmc.py[s] > 0 for s in y):
                y_bin[yi] = tb.y_bin(y)

    px_prop = _letter_prop(dmc.px)
    return Tables(
        n=n, x_size=dmc.x_size, y_size=dmc.y_size, singular=tb.singular,
        px_cdf=np.array(px_prop.cdf), px_atoms=np.array(px_prop.atoms, np.int64),
        py_cdf=np.array(tb.y_proposal.letter.cdf),
        py_atoms=np.array(tb.y_proposal.letter.atoms, np.int64),
        type_of_x=type_of_x, ghost_cdf=ghost_cdf, ghost_atoms=ghost_atoms, ghost_len=ghost_len,
        gamma_cdf=np.array(tb.gamma_proposal.cdf), gamma_bin=np.array(gbins, np.int64),
        triple_of=triple_of, code_val=code_val, code_len=code_len,
        max_depth=int(code_len.max()),
        tau_aux=tau_aux, m_aux=m_aux, aux_ratio=aux_ratio, tau_p=tau_p, m_p=m_p, const=const,
        pair_bin=pair_bin, pair_twolr=pair_twolr, pair_ok=pair_ok, y_bin=y_bin,
        aux_hash=U64(keyhash(AUX_KEY)),
        primary_hash=np.array([keyhash(sub_key(PRIMARY_KEY, j)) for j in gbins], np.uint64),
        private_hash=U64(keyhash(b"private")), source_hash=U64(keyhash(b"source")),
        aux_limit=min(cfg.aux_limit, 2 ** 62), primary_limit=min(cfg.primary_limit, 2 ** 62),
    )


def build_baseline_tables(cfg: SchemeConfig) -> BaseTables:
    _check_enumerable(cfg)
    bt = baseline_tables(cfg.dmc, cfg.n)
    dmc, n = cfg.dmc, cfg.n
    xs_all = list(itertools.product(range(dmc.x_size), repeat=n))
    ys_all = list(itertools.product(range(dmc.y_size), repeat=n))
    pair_twolr = np.zeros((len(xs_all), len(ys_all)))
    pair_ok = np.zeros((len(xs_all), len(ys_all)), np.bool_)
    for xi, x in enumerate(xs_all):
        for yi, y in enumerate(ys_all):
            if bt.model.seq_key(x, y) is not None:
                pair_ok[xi, yi] = True
                pair_twolr[xi, yi] = bt.ratio(x, y)
    px_prop = _letter_prop(dmc.px)
    return BaseTables(
        n=n, x_size=dmc.x_size, y_size=dmc.y_size,
        px_cdf=np.array(px_prop.cdf), px_atoms=np.array(px_prop.atoms, np.int64),
        py_cdf=np.array(bt.y_proposal.letter.cdf),
        py_atoms=np.array(bt.y_proposal.letter.atoms, np.int64),
        pair_twolr=pair_twolr, pair_ok=pair_ok, ceiling=bt.ceiling, m=bt.m,
        deterministic=bt.deterministic, base_hash=U64(keyhash(BASELINE_KEY)),
        private_hash=U64(keyhash(b"private")), source_hash=U64(keyhash(b"source")),
        limit=min(cfg.primary_limit, 2 ** 62),
    )


def _letter_prop(probs):
    from .rejection import DiscreteProposal
    return DiscreteProposal.from_pmf({a: p for a, p in enumerate(probs) if p > 0})


# ---------------------------------------------------------------------------
# compiled helpers

@numba.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@numba.njit(inline="always")
def _uniform(base, counter):
    w = _mix(base + U64(counter) * _G)
    return np.float64(w >> U64(11)) * _TWO_M53


@numba.njit(inline="always")
def _derive(h, v):
    return _mix(h ^ _mix(v + _G))


@numba.njit(inline="always")
def _bisect(cdf, length, u):
    k = 0
    while k < length and cdf[k] <= u:
        k += 1
    return k


@numba.njit
def trial_seeds(master, tag_hash, n, trial, common_hash, private_hash, source_hash):
    h = _mix(master)
    h = _derive(h, tag_hash)
    h = _derive(h, U64(n))
    h = _derive(h, U64(trial))
    return (_derive(_mix(h), common_hash), _derive(_mix(h), private_hash),
            _derive(_mix(h), source_hash))


@numba.njit
def _draw_x(T_px_cdf, T_px_atoms, n, x_size, source_base):
    xi = 0
    for c in range(1, n + 1):
        u = _uniform(source_base, c)
        xi = xi * x_size + T_px_atoms[_bisect(T_px_cdf, T_px_cdf.shape[0], u)]
    return xi


@numba.njit
def _raw_y(py_cdf, py_atoms, n, y_size, base, i):
    yi = 0
    for c in range((i - 1) * n + 1, i * n + 1):
        u = _uniform(base, c)
        yi = yi * y_size + py_atoms[_bisect(py_cdf, py_cdf.shape[0], u)]
    return yi


@numba.njit
def _bit_length(v):
    b = 0
    while v > 0:
        v >>= 1
        b += 1
    return b


@numba.njit
def _golomb_write(bits, pos, m, k):
    q = (k - 1) // m
    r = (k - 1) % m
    if pos + q + 1 + 64 > bits.shape[0]:
        return -1
    for _ in range(q):
        bits[pos] = 1
        pos += 1
    bits[pos] = 0
    pos += 1
    b = _bit_length(m - 1)
    cut = (1 << b) - m
    if r < cut:
        width, v = b - 1, r
    else:
        width, v = b, r + cut
    for s in range(width - 1, -1, -1):
        bits[pos] = (v >> s) & 1
        pos += 1
    return pos


@numba.njit
def _golomb_read(bits, pos, nbits, m):
    """Returns (k, new pos); pos = -1 on end of stream."""
    q = 0
    while True:
        if pos >= nbits:
            return 0, -1
        bit = bits[pos]
        pos += 1
        if bit == 0:
            break
        q += 1
    b = _bit_length(m - 1)
    cut = (1 << b) - m
    r = 0
    if b > 0:
        if pos + b - 1 > nbits:
            return 0, -1
        for _ in range(b - 1):
            r = (r << 1) | bits[pos]
            pos += 1
        if r >= cut:
            if pos >= nbits:
                return 0, -1
            r = ((r << 1) | bits[pos]) - cut
            pos += 1
    return q * m + r + 1, pos


@numba.njit
def _huffman_read(bits, pos, nbits, code_val, code_len, max_depth):
    v = 0
    for length in range(max_depth + 1):
        for t in range(code_val.shape[0]):
            if code_len[t] == length and code_val[t] == v:
                return t, pos
        if length == max_depth or pos >= nbits:
            break
        v = (v << 1) | bits[pos]
        pos += 1
    return -1, -1


@numba.njit
def _primary_item(T, common_seed, gi, J):
    """Item J of the primary codebook (filtered in the singular branch); -1 on limit."""
    base = _mix(common_seed ^ T.primary_hash[gi])
    if not T.singular:
        return _raw_y(T.py_cdf, T.py_atoms, T.n, T.y_size, base, J)
    target = T.gamma_bin[gi]
    kept = 0
    raw = 0
    while raw < T.primary_limit:
        raw += 1
        yi = _raw_y(T.py_cdf, T.py_atoms, T.n, T.y_size, base, raw)
        if T.y_bin[yi] == target:
            kept += 1
            if kept == J:
                return yi
    return -1


@numba.njit
def encode_trial(T, common_seed, private_seed, xi, bits):
    """Two-stage encoder. Returns (nbits, status, gi, K, J, yi, worst quotient)."""
    private_base = _mix(private_seed ^ T.private_hash)
    pc = 0
    ti = T.type_of_x[xi]
    pc += 1
    u = _uniform(private_base, pc)
    ghost = T.ghost_atoms[ti, _bisect(T.ghost_cdf[ti], T.ghost_len[ti], u)]
    tid = T.triple_of[ti, ghost]
    pos = 0
    L = T.code_len[tid]
    for s in range(L - 1, -1, -1):
        bits[pos] = (T.code_val[tid] >> s) & 1
        pos += 1

    worst = 0.0
    # auxiliary stage
    tau = T.tau_aux[tid]
    aux_base = _mix(common_seed ^ T.aux_hash)
    K = 0
    gi = -1
    i = 0
    while i < T.aux_limit:
        i += 1
        g = _bisect(T.gamma_cdf, T.gamma_cdf.shape[0], _uniform(aux_base, i))
        r = T.aux_ratio[ti, tid, g]
        q = r / tau
        if q > worst:
            worst = q
            if r > tau * (1 + 1e-9):
                return pos, VIOLATION, g, i, 0, -1, worst
        pc += 1
        if _uniform(private_base, pc) <= q:
            K = i
            gi = g
            break
    if K == 0:
        return pos, LIMIT, -1, 0, 0, -1, worst
    pos = _golomb_write(bits, pos, T.m_aux[tid], K)
    if pos < 0:
        return 0, OVERFLOW, gi, K, 0, -1, worst

    # primary stage
    tau = T.tau_p[tid, gi]
    c = T.const[ti, gi]
    target = T.gamma_bin[gi]
    base = _mix(common_seed ^ T.primary_hash[gi])
    J = 0
    yi_acc = -1
    kept = 0
    raw = 0
    while raw < T.primary_limit:
        raw += 1
        yi = _raw_y(T.py_cdf, T.py_atoms, T.n, T.y_size, base, raw)
        if T.singular and T.y_bin[yi] != target:
            continue
        kept += 1
        if T.pair_ok[xi, yi] and T.pair_bin[xi, yi] == target:
            r = T.pair_twolr[xi, yi] * c
        else:
            r = 0.0
        q = r / tau
        if q > worst:
            worst = q
            if r > tau * (1 + 1e-9):
                return pos, VIOLATION, gi, K, kept, yi, worst
        pc += 1
        if _uniform(private_base, pc) <= q:
            J = kept
            yi_acc = yi
            break
    if J == 0:
        return pos, LIMIT, gi, K, 0, -1, worst
    pos = _golomb_write(bits, pos, T.m_p[tid, gi], J)
    if pos < 0:
        return 0, OVERFLOW, gi, K, J, yi_acc, worst
    return pos, OK, gi, K, J, yi_acc, worst


@numba.njit
def decode_trial(T, common_seed, bits, nbits, index_offset):
    """Two-stage decoder; returns the output y-seq index or a negative error code."""
    tid, pos = _huffman_read(bits, 0, nbits, T.code_val, T.code_len, T.max_depth)
    if tid < 0:
        return -1
    K, pos = _golomb_read(bits, pos, nbits, T.m_aux[tid])
    if pos < 0:
        return -1
    aux_base = _mix(common_seed ^ T.aux_hash)
    gi = _bisect(T.gamma_cdf, T.gamma_cdf.shape[0], _uniform(aux_base, K))
    J, pos = _golomb_read(bits, pos, nbits, T.m_p[tid, gi])
    if pos < 0 or pos != nbits:
        return -1
    return _primary_item(T, common_seed, gi, J + index_offset)


@numba.njit
def run_two_stage(T, master, tag_hash, common_hash, private_hash, source_hash,
                  start, count, index_offset, out_x, out_y, out_len, out_k, out_j,
                  out_status, out_quot):
    bits = np.zeros(MAX_BITS, np.uint8)
    for k in range(count):
        cs, ps, ss = trial_seeds(master, tag_hash, T.n, start + k,
                                 common_hash, private_hash, source_hash)
        xi = _draw_x(T.px_cdf, T.px_atoms, T.n, T.x_size, _mix(ss ^ T.source_hash))
        nb, st, gi, K, J, yi, worst = encode_trial(T, cs, ps, xi, bits)
        out_x[k] = xi
        out_status[k] = st
        out_quot[k] = worst
        out_k[k] = K
        out_j[k] = J
        out_len[k] = nb
        if st != OK:
            out_y[k] = -1
            continue
        yd = decode_trial(T, cs, bits, nb, index_offset)
        if index_offset == 0 and yd != yi:
            out_status[k] = 4
        out_y[k] = yd


@numba.njit
def encode_baseline_trial(B, common_seed, private_seed, xi, bits):
    private_base = _mix(private_seed ^ B.private_hash)
    base = _mix(common_seed ^ B.base_hash)
    tau = max(B.ceiling, 1.0)
    worst = 0.0
    J = 0
    yi_acc = -1
    i = 0
    while i < B.limit:
        i += 1
        yi = _raw_y(B.py_cdf, B.py_atoms, B.n, B.y_size, base, i)
        r = B.pair_twolr[xi, yi] if B.pair_ok[xi, yi] else 0.0
        q = r / tau
        if q > worst:
            worst = q
            if r > tau * (1 + 1e-9):
                return 0, VIOLATION, i, yi, worst
        if _uniform(private_base, i) <= q:
            J = i
            yi_acc = yi
            break
    if J == 0:
        return 0, LIMIT, 0, -1, worst
    pos = 0
    if not B.deterministic:
        pos = _golomb_write(bits, 0, B.m, J)
        if pos < 0:
            return 0, OVERFLOW, J, yi_acc, worst
    return pos, OK, J, yi_acc, worst


@numba.njit
def decode_baseline_trial(B, common_seed, bits, nbits, index_offset):
    J = 1
    pos = 0
    if not B.deterministic:
        J, pos = _golomb_read(bits, 0, nbits, B.m)
    if pos < 0 or pos != nbits:
        return -1
    base = _mix(common_seed ^ B.base_hash)
    return _raw_y(B.py_cdf, B.py_atoms, B.n, B.y_size, base, J + index_offset)


@numba.njit
def run_baseline(B, master, tag_hash, common_hash, private_hash, source_hash,
                 start, count, index_offset, out_x, out_y, out_len, out_j,
                 out_status, out_quot):
    bits = np.zeros(MAX_BITS, np.uint8)
    for k in range(count):
        cs, ps, ss = trial_seeds(master, tag_hash, B.n, start + k,
                                 common_hash, private_hash, source_hash)
        xi = _draw_x(B.px_cdf, B.px_atoms, B.n, B.x_size, _mix(ss ^ B.source_hash))
        nb, st, J, yi, worst = encode_baseline_trial(B, cs, ps, xi, bits)
        out_x[k] = xi
        out_status[k] = st
        out_quot[k] = worst
        out_j[k] = J
        out_len[k] = nb
        if st != OK:
            out_y[k] = -1
            continue
        yd = decode_baseline_trial(B, cs, bits, nb, index_offset)
        if index_offset == 0 and yd != yi:
            out_status[k] = 4
        out_y[k] = yd


# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    x: np.ndarray
    y: np.ndarray
    length: np.ndarray
    K: np.ndarray | None
    J: np.ndarray
    status: np.ndarray
    quotient: np.ndarray

    @property
    def violations(self) -> int:
        return int((self.status == VIOLATION).sum())

    @property
    def mismatches(self) -> int:
        return int((self.status == 4).sum())


TAG_HASH = {"two-stage": U64(keyhash("two-stage")), "baseline": U64(keyhash("baseline"))}
COMMON_HASH = U64(keyhash("common"))
PRIVATE_HASH = U64(keyhash("private"))
SOURCE_HASH = U64(keyhash("source"))


def run_batch(cfg: SchemeConfig, master: int, trials: int, scheme: str = "two-stage",
              start: int = 0, index_offset: int = 0, tables=None,
              chunk: int = 200_000) -> BatchResult:
    """Encode then decode ``trials`` independent blocks through the compiled path."""
    if tables is None:
        tables = build_tables(cfg) if scheme == "two-stage" else build_baseline_tables(cfg)
    x = np.empty(trials, np.int64)
    y = np.empty(trials, np.int64)
    length = np.empty(trials, np.int64)
    K = np.empty(trials, np.int64)
    J = np.empty(trials, np.int64)
    status = np.empty(trials, np.int64)
    quot = np.empty(trials)
    master = U64(master & MASK64)
    for lo in range(0, trials, chunk):
        hi = min(trials, lo + chunk)
        sl = slice(lo, hi)
        if scheme == "two-stage":
            run_two_stage(tables, master, TAG_HASH[scheme], COMMON_HASH, PRIVATE_HASH,
                          SOURCE_HASH, start + lo, hi - lo, index_offset, x[sl], y[sl],
                          length[sl], K[sl], J[sl], status[sl], quot[sl])
        else:
            run_baseline(tables, master, TAG_HASH[scheme], COMMON_HASH, PRIVATE_HASH,
                         SOURCE_HASH, start + lo, hi - lo, index_offset, x[sl], y[sl],
                         length[sl], J[sl], status[sl], quot[sl])
    if (status == LIMIT).any():
        raise IterationLimit(f"{int((status == LIMIT).sum())} trials hit the iteration limit")
    if (status == OVERFLOW).any():
        raise OverflowError("transcript exceeded the kernel bit buffer")
    res = BatchResult(x, y, length, K if scheme == "two-stage" else None, J, status, quot)
    if res.violations:
        raise CeilingViolation(f"{res.violations} ceiling violations in batch")
    return res
