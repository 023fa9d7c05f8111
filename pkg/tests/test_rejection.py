import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from chansynth.errors import CeilingViolation, IterationLimit
from chansynth.rejection import (AcceptRule, CodebookStream, CounterRng, DiscreteProposal,
                                 FilteredCodebook, codebook_item, derive_seed, geometric_index,
                                 rs_sample, stream_word, word_to_uniform)

VECTORS = json.loads((Path(__file__).parent / "data" / "stream_vectors.json").read_text())


def _independent_word(seed, key, i):
    # restated from the stream definition with numpy wrap-around arithmetic
    import hashlib
    u = np.uint64
    kh = u(int(hashlib.sha256(key.encode()).hexdigest()[:16], 16))

    def fin(z):
        with np.errstate(over="ignore"):
            z = (z ^ (z >> u(30))) * u(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> u(27))) * u(0x94D049BB133111EB)
        return z ^ (z >> u(31))

    base = fin(u(seed) ^ kh)
    with np.errstate(over="ignore"):
        return int(fin(base + u(i) * u(0x9E3779B97F4A7C15)))


def test_recorded_stream_vectors():
    for i, w in enumerate(VECTORS["words"], start=1):
        assert stream_word(VECTORS["seed"], VECTORS["key"], i) == int(w, 16)
        assert _independent_word(0, "test", i) == int(w, 16)
        assert word_to_uniform(int(w, 16)) == float.fromhex(VECTORS["uniforms"][i - 1])


PGAMMA = {0: 0.25, 2: 0.5, 4: 0.25}


def test_codebook_is_deterministic():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    assert [codebook_item(7, b"aux", i, prop) for i in range(1, 50)] == \
           [CodebookStream(7, b"aux", prop).item(i) for i in range(1, 50)]


def test_domain_keys_give_unrelated_streams():
    a = [stream_word(3, b"aux", i) for i in range(1, 2001)]
    b = [stream_word(3, b"primary/2", i) for i in range(1, 2001)]
    assert sum(x == y for x, y in zip(a, b)) == 0
    ua = np.array([word_to_uniform(w) for w in a])
    ub = np.array([word_to_uniform(w) for w in b])
    assert abs(np.corrcoef(ua, ub)[0, 1]) < 4 / math.sqrt(2000)


def test_codebook_follows_proposal():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    cb = CodebookStream(11, b"aux", prop)
    draws = [cb.item(i) for i in range(1, 10_001)]
    obs = [draws.count(a) for a in prop.atoms]
    exp = [10_000 * PGAMMA[a] for a in prop.atoms]
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_unit_ceiling_accepts_first():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    cb = CodebookStream(1, b"x", prop)
    rng = CounterRng(5)
    for _ in range(100):
        res = rs_sample(cb, AcceptRule(lambda s: 1.0, 1.0), rng)
        assert res.index == 1 and res.item == cb.item(1)


def test_equal_laws_give_geometric_half():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    rng = CounterRng(9)
    trials = 100_000
    ones = 0
    for t in range(trials):
        cb = CodebookStream(derive_seed(1, t), b"x", prop)
        ones += rs_sample(cb, AcceptRule(lambda s: 1.0, 2.0), rng).index == 1
    se = math.sqrt(0.25 / trials)
    assert abs(ones / trials - 0.5) < 3 * se


def test_ceiling_violation_raised():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    cb = CodebookStream(1, b"x", prop)
    with pytest.raises(CeilingViolation):
        rs_sample(cb, AcceptRule(lambda s: 3.0, 2.0), CounterRng(0))
    # within the relative tolerance is fine
    rs_sample(cb, AcceptRule(lambda s: 2.0 * (1 + 1e-12), 2.0), CounterRng(0))


def test_iteration_limit():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    cb = CodebookStream(1, b"x", prop)
    with pytest.raises(IterationLimit):
        rs_sample(cb, AcceptRule(lambda s: 0.0, 2.0), CounterRng(0), max_iter=50)


def test_ceiling_must_be_at_least_one():
    with pytest.raises(ValueError):
        AcceptRule(lambda s: 0.5, 0.5)


def test_filtered_codebook_indexes_kept_items():
    prop = DiscreteProposal.from_pmf(PGAMMA)
    raw = CodebookStream(4, b"x", prop)
    f = FilteredCodebook(raw, lambda s: s == 2)
    kept = [raw.item(i) for i in range(1, 200) if raw.item(i) == 2]
    assert [f.item(i) for i in range(1, 21)] == kept[:20]
    with pytest.raises(IterationLimit):
        FilteredCodebook(raw, lambda s: s == 3, raw_limit=100).item(1)


def test_private_stream_differs_by_key():
    a, b = CounterRng(1, b"private"), CounterRng(1, b"source")
    assert [a.random() for _ in range(5)] != [b.random() for _ in range(5)]


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1e-4, 0.999), u=st.floats(0, 1, exclude_max=True))
def test_geometric_index_inverse_cdf(p, u):
    k = geometric_index(p, u)
    assert k >= 1
    cdf = lambda j: 1 - (1 - p) ** j
    assert cdf(k) >= u - 1e-12
    assert k == 1 or cdf(k - 1) <= u + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.integers(-5, 5), st.integers(1, 9), min_size=1, max_size=6),
       st.floats(0, 1, exclude_max=True))
def test_discrete_proposal_inverse_cdf(w, u):
    tot = sum(w.values())
    prop = DiscreteProposal.from_pmf({k: v / tot for k, v in w.items()})
    a = prop([u])
    assert a in w
    assert prop.cdf[-1] == 1.0
