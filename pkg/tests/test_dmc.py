import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chansynth.dmc import (bec, bsc, channel_spec_text, identity, is_singular, llr_sigma2,
                           llr_table, marginal_y, mutual_information, parse_channel_spec,
                           validate_dmc)
from chansynth.errors import EmptyAlphabet, NegativeEntry, NonStochastic


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_bsc_is_valid():
    d = validate_dmc([0.5, 0.5], [[0.89, 0.11], [0.11, 0.89]])
    assert d.pyx[0][1] == Fraction(11, 100)


def test_degenerate_channel():
    d = validate_dmc([1.0], [[1.0]])
    assert d.x_size == d.y_size == 1
    assert mutual_information(d) == 0.0


def test_rows_off_by_a_tenth_rejected():
    with pytest.raises(NonStochastic):
        validate_dmc([0.5, 0.5], [[0.9, 0.2], [0.1, 0.8]])


@pytest.mark.parametrize("px,pyx,err", [
    ([], [[1.0]], EmptyAlphabet),
    ([1.0], [[]], EmptyAlphabet),
    ([1.5, -0.5], [[1.0], [1.0]], NegativeEntry),
    ([0.5, 0.5], [[1.2, -0.2], [0.5, 0.5]], NegativeEntry),
    ([0.6, 0.5], [[1.0], [1.0]], NonStochastic),
])
def test_validation_errors(px, pyx, err):
    with pytest.raises(err):
        validate_dmc(px, pyx)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        validate_dmc([0.5, 0.5], [[1.0]])


def test_near_stochastic_rows_are_renormalised():
    d = validate_dmc([0.5, 0.5 + 1e-14], [[1, 0], [0, 1]])
    assert sum(d.px) == 1


def test_marginals():
    assert np.allclose(marginal_y(bsc("0.11")), [0.5, 0.5])
    assert np.allclose(marginal_y(bec("0.5")), [0.25, 0.25, 0.5])
    d = validate_dmc([1, 0], [[0.2, 0.3, 0.5], [0.6, 0.4, 0]])
    assert np.allclose(marginal_y(d), [0.2, 0.3, 0.5])
    assert abs(marginal_y(d).sum() - 1) < 1e-12


def test_mutual_information_examples():
    assert mutual_information(bsc("0.5")) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(bsc("0.11")) == pytest.approx(1 - h2(0.11), abs=1e-12)
    assert mutual_information(bec("0.5")) == pytest.approx(0.5, abs=1e-12)
    assert mutual_information(identity(3)) == pytest.approx(math.log2(3), abs=1e-12)


def test_llr_mean_is_mutual_information():
    for d in (bsc("0.11"), bec("0.3"), validate_dmc(["0.2", "0.8"],
                                                     [["0.1", "0.6", "0.3"], ["0.5", "0.5", "0"]])):
        t = llr_table(d)
        mean = np.nansum(d.pxy_f * np.where(t.mask, t.lam, 0.0))
        assert mean == pytest.approx(mutual_information(d), abs=1e-9)
        assert np.isnan(t.lam[~t.mask]).all()


def test_singularity():
    assert is_singular(bsc("0.11")) == (False, (0, 0, 1))
    assert is_singular(bec("0.5")) == (True, None)
    assert is_singular(identity(2)) == (True, None)
    # a zero-probability input row is ignored
    d = validate_dmc([1, 0], [[0.5, 0.5], [0.1, 0.9]])
    assert is_singular(d) == (True, None)


def test_sigma2_examples():
    assert llr_sigma2(bsc("0.5")) == pytest.approx(0.0, abs=1e-15)
    a, b = math.log2(1.78), math.log2(0.22)
    mean = 0.89 * a + 0.11 * b
    want = 0.89 * (a - mean) ** 2 + 0.11 * (b - mean) ** 2
    assert llr_sigma2(bsc("0.11")) == pytest.approx(want, rel=1e-12)
    assert llr_sigma2(bec("0.5")) == pytest.approx(0.25, abs=1e-12)


def test_channel_spec_round_trip():
    for d in (bsc("0.11"), bec("1/3"), identity(3)):
        assert parse_channel_spec(channel_spec_text(d)) == d


def test_channel_spec_rejects_bad_sizes():
    with pytest.raises(ValueError):
        parse_channel_spec('{"x_size": 3, "y_size": 2, "px": ["1"], "pyx": [["0.5", "0.5"]]}')


@st.composite
def channels(draw):
    nx = draw(st.integers(1, 3))
    ny = draw(st.integers(1, 3))

    def vec(k):
        w = draw(st.lists(st.integers(0, 9), min_size=k, max_size=k).filter(any))
        return [Fraction(v, sum(w)) for v in w]

    return validate_dmc(vec(nx), [vec(ny) for _ in range(nx)])


@settings(max_examples=60, deadline=None)
@given(channels())
def test_information_bounds(d):
    mi = mutual_information(d)
    assert -1e-12 <= mi <= min(math.log2(d.x_size), math.log2(d.y_size)) + 1e-12
    assert abs(d.py_f.sum() - 1) < 1e-12
