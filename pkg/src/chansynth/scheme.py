"""Two-stage exact channel synthesis, plus a one-stage baseline.

Stage one (auxiliary) simulates the quantized block LLR ``Gamma`` given the
input block: a side-information triple is drawn from its conditional law
and Huffman-coded, then ``Gamma`` is rejection-sampled from a shared
``p_Gamma`` codebook and its index ``K`` Golomb-coded.  Stage two (primary)
rejection-samples ``y^n`` from ``p(y^n | x^n, Gamma = gamma)`` against a
shared codebook drawn from ``p(y^n | gamma)`` (singular channels) or
``p(y^n)`` (otherwise), and Golomb-codes the index ``J``.

Transcript layout: huffman(triple) | golomb(K) | golomb(J).

All ceilings are powers of two:

    tau_aux = 2 ** (gbar + gg + 3*delta)
    tau_s   = 2 ** (gamma - gbar + 2*delta)      (singular)
    tau_ns  = 2 ** (gamma + g1 + 2*delta)        (nonsingular)

with ``gbar = g2 - g1``.  The one-stage baseline uses ``2 ** (n * max lam)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

from .codes import (BitReader, BitString, BitWriter, HuffmanCode, golomb_param_for,
                    golomb_read, golomb_write, huffman_build)
from .dmc import Dmc, is_singular
from .errors import MalformedBitstream
from .llr import BarTriple, LlrModel, Quantizer, XType, llr_model, xtype_of
from .rejection import (DEFAULT_ITERATION_LIMIT, AcceptRule, CodebookStream, DiscreteProposal,
                        FilteredCodebook, SequenceProposal, UniformSource, geometric_index,
                        rs_sample, sub_key)

MODES = ("auto", "force-singular", "force-nonsingular")
SEARCHES = ("scan", "index-law", "auto")

AUX_KEY = b"aux"
PRIMARY_KEY = b"primary"
BASELINE_KEY = b"baseline"


@dataclass(frozen=True)
class SchemeConfig:
    dmc: Dmc
    n: int
    q: Quantizer = Quantizer(Fraction(1, 2))
    mode: str = "auto"
    seed: int = 0
    aux_limit: int = DEFAULT_ITERATION_LIMIT
    primary_limit: int = DEFAULT_ITERATION_LIMIT
    # "index-law" draws J from its exact geometric law instead of scanning the
    # codebook; transcripts keep their exact length law but cannot be decoded.
    primary_search: str = "scan"
    scan_ceiling: float = 2.0 ** 12

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("blocklength must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.primary_search not in SEARCHES:
            raise ValueError(f"primary_search must be one of {SEARCHES}")
        if not isinstance(self.q, Quantizer):
            object.__setattr__(self, "q", Quantizer(self.q))


@dataclass
class Transcript:
    bits: BitString
    len_triple: int
    len_K: int
    len_J: int

    def __len__(self) -> int:
        return self.bits.length


@dataclass
class SchemeTrace:
    gamma_bin: int
    g1: int
    g2: int
    gg: int
    tau_aux: float
    tau: float
    K: int
    J: int
    len_triple: int
    len_K: int
    len_J: int
    branch: str
    ghost_bin: int
    xtype: tuple[int, ...]
    output: tuple[int, ...] | None
    index_law: bool = False
    aux_quotient: float = 0.0
    primary_quotient: float = 0.0

    def to_record(self) -> dict:
        keys = ("gamma_bin", "g1", "g2", "gg", "tau_aux", "tau", "K", "J",
                "len_triple", "len_K", "len_J")
        return {k: getattr(self, k) for k in keys}


def pow2(exponent: Fraction) -> float:
    return math.ldexp(1.0, int(exponent)) if exponent.denominator == 1 else 2.0 ** float(exponent)


def golomb_param_for_ceiling(tau: float) -> int:
    return 1 if tau <= 1.0 else golomb_param_for(1.0 / tau)


class SchemeTables:
    """Everything encoder and decoder precompute for one (channel, n, delta, branch)."""

    def __init__(self, dmc: Dmc, q: Quantizer, n: int, singular: bool):
        self.dmc, self.q, self.n = dmc, q, n
        self.singular = singular
        self.model: LlrModel = llr_model(dmc, q, n)
        if singular:
            self.model.y_group  # raises if the channel has no output-only LLR
        self.gamma_proposal = DiscreteProposal.from_pmf(self.model.gamma_marginal)
        self.triple_code: HuffmanCode = huffman_build(self.model.triple_marginal)
        py = {y: p for y, p in enumerate(dmc.py) if p > 0}
        self.y_proposal = SequenceProposal(DiscreteProposal.from_pmf(py), n)
        self._aux_rows: dict = {}
        self._const: dict = {}
        self._twolr: dict = {}
        self._tau_cache: dict = {}
        self._ghost: dict = {}

    @property
    def branch(self) -> str:
        return "singular" if self.singular else "nonsingular"

    # ceilings ----------------------------------------------------------------

    def tau_aux(self, tr: BarTriple) -> float:
        key = ("aux", tr)
        v = self._tau_cache.get(key)
        if v is None:
            v = pow2(self.q.delta * (tr.gbar + tr.gg + 3))
            self._tau_cache[key] = v
        return v

    def tau_primary(self, gamma: int, tr: BarTriple) -> float:
        key = ("primary", gamma, tr.g1, tr.g2)
        v = self._tau_cache.get(key)
        if v is None:
            e = gamma - tr.gbar + 2 if self.singular else gamma + tr.g1 + 2
            v = pow2(self.q.delta * e)
            self._tau_cache[key] = v
        return v

    @cached_property
    def _golomb_cache(self) -> dict:
        return {}

    def golomb_m(self, tau: float) -> int:
        m = self._golomb_cache.get(tau)
        if m is None:
            m = golomb_param_for_ceiling(tau)
            self._golomb_cache[tau] = m
        return m

    def ghost_proposal(self, t: XType) -> DiscreteProposal:
        prop = self._ghost.get(t)
        if prop is None:
            prop = self._ghost[t] = DiscreteProposal.from_pmf(self.model.gamma_given_type(t))
        return prop

    # likelihood ratios -----------------------------------------------------------

    def aux_row(self, t: XType, g1: int, g2: int) -> dict[int, float]:
        """Target/proposal ratio of every gamma bin for the auxiliary stage."""
        key = (t, g1, g2)
        row = self._aux_rows.get(key)
        if row is None:
            marg = self.model.gamma_marginal
            row = {j: float(p / marg[j])
                   for j, p in self.model.cond_gamma_given_pair(t, g1, g2).items()}
            self._aux_rows[key] = row
        return row

    def const(self, t: XType, gamma: int) -> float:
        """gamma-dependent factor of the primary ratio (0 if gamma is impossible)."""
        key = (t, gamma)
        v = self._const.get(key)
        if v is None:
            pc = self.model.gamma_given_type(t).get(gamma, Fraction(0))
            if pc == 0:
                v = 0.0
            elif self.singular:
                v = float(self.model.gamma_marginal[gamma] / pc)
            else:
                v = float(1 / pc)
            self._const[key] = v
        return v

    def twolr(self, key: tuple[int, ...]) -> float:
        """2 ** (block LLR) = p(y^n|x^n) / p(y^n), correctly rounded."""
        v = self._twolr.get(key)
        if v is None:
            r = Fraction(1)
            for g, c in enumerate(key):
                if c:
                    r *= self.model.group_ratio[g] ** c
            v = float(r)
            self._twolr[key] = v
        return v

    def primary_ratio(self, t: XType, xseq, gamma: int, yseq) -> float:
        key = self.model.seq_key(xseq, yseq)
        if key is None or self.model.key_bin(key) != gamma:
            return 0.0
        return self.twolr(key) * self.const(t, gamma)

    def scan_cost(self, gamma: int, tau: float) -> float:
        """Expected raw codebook draws of a primary scan (filtering included)."""
        if self.singular:
            return tau / float(self.model.gamma_marginal[gamma])
        return tau

    # codebooks ---------------------------------------------------------------

    def y_bin(self, yseq) -> int:
        return self.model.key_bin(self.model.y_key(yseq))

    def primary_codebook(self, seed: int, gamma: int, raw_limit: int = DEFAULT_ITERATION_LIMIT):
        raw = CodebookStream(seed, sub_key(PRIMARY_KEY, gamma), self.y_proposal)
        if not self.singular:
            return raw
        return FilteredCodebook(raw, lambda y: self.y_bin(y) == gamma, raw_limit)

    def aux_codebook(self, seed: int) -> CodebookStream:
        return CodebookStream(seed, AUX_KEY, self.gamma_proposal)


@lru_cache(maxsize=32)
def scheme_tables(dmc: Dmc, q: Quantizer, n: int, singular: bool) -> SchemeTables:
    return SchemeTables(dmc, q, n, singular)


def resolve_branch(cfg: SchemeConfig) -> bool:
    """True for the singular construction."""
    if cfg.mode == "force-nonsingular":
        return False
    sing, witness = is_singular(cfg.dmc)
    if cfg.mode == "force-singular" and not sing:
        raise ValueError(f"force-singular needs a singular channel; witness {witness}")
    return sing


def tables_for(cfg: SchemeConfig) -> SchemeTables:
    return scheme_tables(cfg.dmc, cfg.q, cfg.n, resolve_branch(cfg))


def check_input(cfg: SchemeConfig, xseq: Sequence[int]) -> tuple[int, ...]:
    xseq = tuple(int(a) for a in xseq)
    if len(xseq) != cfg.n:
        raise ValueError(f"input block has length {len(xseq)}, expected {cfg.n}")
    for a in xseq:
        if not 0 <= a < cfg.dmc.x_size or cfg.dmc.px[a] == 0:
            raise ValueError(f"input symbol {a} has zero source probability")
    return xseq


def encode(cfg: SchemeConfig, xseq: Sequence[int], private_rng: UniformSource
           ) -> tuple[Transcript, SchemeTrace]:
    xseq = check_input(cfg, xseq)
    tb = tables_for(cfg)
    model = tb.model
    t = xtype_of(xseq, cfg.dmc.x_size)

    # side information: a ghost bin drawn from p(Gamma | x^n) fixes the triple
    ghost = tb.ghost_proposal(t)([private_rng.random()])
    tr = model.triple(t, ghost)
    w = BitWriter()
    tb.triple_code.write(w, tr)
    len_triple = len(w)

    # auxiliary stage
    tau_aux = tb.tau_aux(tr)
    row = tb.aux_row(t, tr.g1, tr.g2)
    aux = rs_sample(tb.aux_codebook(cfg.seed), AcceptRule(lambda j: row.get(j, 0.0), tau_aux),
                    private_rng, cfg.aux_limit)
    K, gamma = aux.index, aux.item
    golomb_write(w, tb.golomb_m(tau_aux), K)
    len_K = len(w) - len_triple

    # primary stage
    tau = tb.tau_primary(gamma, tr)
    index_law = cfg.primary_search == "index-law" or (
        cfg.primary_search == "auto" and tb.scan_cost(gamma, tau) > cfg.scan_ceiling)
    if index_law:
        J, y, quotient = geometric_index(1.0 / tau, private_rng.random()), None, 0.0
    else:
        cb = tb.primary_codebook(cfg.seed, gamma, cfg.primary_limit)
        res = rs_sample(cb, AcceptRule(lambda ys: tb.primary_ratio(t, xseq, gamma, ys), tau),
                        private_rng, cfg.primary_limit)
        J, y, quotient = res.index, res.item, res.max_quotient
    golomb_write(w, tb.golomb_m(tau), J)
    len_J = len(w) - len_triple - len_K

    transcript = Transcript(w.getvalue(), len_triple, len_K, len_J)
    trace = SchemeTrace(
        gamma_bin=gamma, g1=tr.g1, g2=tr.g2, gg=tr.gg, tau_aux=tau_aux, tau=tau, K=K, J=J,
        len_triple=len_triple, len_K=len_K, len_J=len_J, branch=tb.branch, ghost_bin=ghost,
        xtype=t.counts, output=y, index_law=index_law,
        aux_quotient=aux.max_quotient, primary_quotient=quotient)
    return transcript, trace


def decode(cfg: SchemeConfig, bits: BitString | Transcript, index_offset: int = 0
           ) -> tuple[int, ...]:
    """Regenerate the encoder's accepted output block.

    ``index_offset`` shifts the decoded primary index; it exists only as a
    negative control for the exactness harness.
    """
    if isinstance(bits, Transcript):
        bits = bits.bits
    tb = tables_for(cfg)
    rd = BitReader(bits)
    tr = tb.triple_code.read(rd)
    K = golomb_read(rd, tb.golomb_m(tb.tau_aux(tr)))
    gamma = tb.aux_codebook(cfg.seed).item(K)
    J = golomb_read(rd, tb.golomb_m(tb.tau_primary(gamma, tr)))
    if rd.remaining:
        raise MalformedBitstream(f"{rd.remaining} trailing bits after the primary index")
    return tb.primary_codebook(cfg.seed, gamma, cfg.primary_limit).item(J + index_offset)


def primary_lr(cfg: SchemeConfig, xseq: Sequence[int], gamma, yseq: Sequence[int]) -> float:
    """Primary-stage target/proposal ratio of ``yseq`` (zero outside the gamma bin)."""
    xseq = check_input(cfg, xseq)
    tb = tables_for(cfg)
    j = gamma.j if hasattr(gamma, "j") else int(gamma)
    return tb.primary_ratio(xtype_of(xseq, cfg.dmc.x_size), xseq, j, tuple(yseq))


def primary_ceiling(cfg: SchemeConfig, gamma: int, tr: BarTriple) -> float:
    return tables_for(cfg).tau_primary(gamma, tr)


def conditional_proposal_sampler(cfg: SchemeConfig, gamma, seed: int | None = None
                                 ) -> FilteredCodebook:
    """Codebook of i.i.d. draws from p(y^n | Gamma = gamma) for singular channels."""
    tb = scheme_tables(cfg.dmc, cfg.q, cfg.n, True)
    j = gamma.j if hasattr(gamma, "j") else int(gamma)
    if tb.model.gamma_marginal.get(j, 0) == 0:
        raise ValueError(f"bin {j} has zero probability")
    return tb.primary_codebook(cfg.seed if seed is None else seed, j, cfg.primary_limit)


# one-stage baseline ----------------------------------------------------------------

@dataclass
class BaselineTrace:
    ceiling: float
    J: int
    len_J: int
    output: tuple[int, ...] | None
    index_law: bool = False
    quotient: float = 0.0


class BaselineTables:
    def __init__(self, dmc: Dmc, n: int):
        self.dmc, self.n = dmc, n
        self.model = llr_model(dmc, Quantizer(1), n)
        rmax = max(self.model.group_ratio)
        self.ceiling = float(rmax ** n)
        self.m = golomb_param_for_ceiling(self.ceiling)
        self.deterministic = self.ceiling <= 1.0
        py = {y: p for y, p in enumerate(dmc.py) if p > 0}
        self.y_proposal = SequenceProposal(DiscreteProposal.from_pmf(py), n)
        self._twolr: dict = {}

    def ratio(self, xseq, yseq) -> float:
        key = self.model.seq_key(xseq, yseq)
        if key is None:
            return 0.0
        v = self._twolr.get(key)
        if v is None:
            r = Fraction(1)
            for g, c in enumerate(key):
                if c:
                    r *= self.model.group_ratio[g] ** c
            v = self._twolr[key] = float(r)
        return v

    def codebook(self, seed: int) -> CodebookStream:
        return CodebookStream(seed, BASELINE_KEY, self.y_proposal)


@lru_cache(maxsize=32)
def baseline_tables(dmc: Dmc, n: int) -> BaselineTables:
    return BaselineTables(dmc, n)


def baseline_encode(cfg: SchemeConfig, xseq: Sequence[int], private_rng: UniformSource
                    ) -> tuple[Transcript, BaselineTrace]:
    xseq = check_input(cfg, xseq)
    tb = baseline_tables(cfg.dmc, cfg.n)
    index_law = cfg.primary_search == "index-law" or (
        cfg.primary_search == "auto" and tb.ceiling > cfg.scan_ceiling)
    if index_law:
        J, y, quotient = geometric_index(1.0 / tb.ceiling, private_rng.random()), None, 0.0
    else:
        res = rs_sample(tb.codebook(cfg.seed),
                        AcceptRule(lambda ys: tb.ratio(xseq, ys), max(tb.ceiling, 1.0)),
                        private_rng, cfg.primary_limit)
        J, y, quotient = res.index, res.item, res.max_quotient
    w = BitWriter()
    if not tb.deterministic:
        golomb_write(w, tb.m, J)
    bits = w.getvalue()
    return (Transcript(bits, 0, 0, bits.length),
            BaselineTrace(tb.ceiling, J, bits.length, y, index_law, quotient))


def baseline_decode(cfg: SchemeConfig, bits: BitString | Transcript, index_offset: int = 0
                    ) -> tuple[int, ...]:
    if isinstance(bits, Transcript):
        bits = bits.bits
    tb = baseline_tables(cfg.dmc, cfg.n)
    rd = BitReader(bits)
    J = 1 if tb.deterministic else golomb_read(rd, tb.m)
    if rd.remaining:
        raise MalformedBitstream(f"{rd.remaining} trailing bits after the index")
    return tb.codebook(cfg.seed).item(J + index_offset)
