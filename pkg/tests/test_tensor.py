import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocksig.signature import segment_signature
from blocksig.tensor import (
    ShapeError,
    TruncatedTensor,
    TruncationError,
    enumerate_words,
    hs_inner,
    hs_norm,
    level_sq_norms,
    shuffle,
    shuffle_tensor,
    tensor_dim,
    tensor_mul,
    tensors_from_csv,
    tensors_to_csv,
    word_index,
    word_label,
)


def naive_mul(a: TruncatedTensor, b: TruncatedTensor) -> dict:
    """Word-dictionary product: sum over splittings w = u v of a[u] b[v]."""
    out = {}
    words = enumerate_words(a.d, a.M)
    for u in words:
        for v in words:
            if len(u) + len(v) <= a.M:
                out[u + v] = out.get(u + v, 0.0) + a[u] * b[v]
    return out


def random_tensor(rng, d, M, unit=False):
    c = rng.uniform(-1, 1, tensor_dim(d, M))
    if unit:
        c[0] = 1.0
    return TruncatedTensor(d, M, c)


# --- layout -----------------------------------------------------------------

def test_enumerate_words_examples():
    assert enumerate_words(2, 2) == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]
    assert len(enumerate_words(2, 4)) == 31
    assert len(enumerate_words(1, 3)) == 4


def test_word_index_matches_enumeration_order():
    for d, M in [(1, 3), (2, 4), (3, 3)]:
        words = enumerate_words(d, M)
        assert [word_index(w, d) for w in words] == list(range(tensor_dim(d, M)))


def test_word_index_rejects_bad_letter():
    with pytest.raises(ValueError):
        word_index((0,), 2)
    with pytest.raises(ValueError):
        word_index((3,), 2)


def test_labels():
    assert word_label(()) == "e"
    assert word_label((1, 2)) == "12"
    assert word_label((10, 2)) == "10-2"


def test_shape_validation():
    with pytest.raises(ShapeError):
        TruncatedTensor(2, 2, np.zeros(5))
    with pytest.raises(ShapeError):
        tensor_mul(TruncatedTensor.unit(2, 2), TruncatedTensor.unit(2, 3))
    with pytest.raises(ShapeError):
        hs_inner(TruncatedTensor.unit(2, 2), TruncatedTensor.unit(3, 2))


def test_coefficients_read_only():
    t = TruncatedTensor.unit(2, 2)
    with pytest.raises(ValueError):
        t.coeffs[0] = 2.0


# --- product ----------------------------------------------------------------

def test_mul_unit_plus_letters():
    a = TruncatedTensor.from_words(2, 2, {(): 1.0, (1,): 1.0})
    b = TruncatedTensor.from_words(2, 2, {(): 1.0, (2,): 1.0})
    expect = TruncatedTensor.from_words(2, 2, {(): 1, (1,): 1, (2,): 1, (1, 2): 1})
    assert np.array_equal((a @ b).coeffs, expect.coeffs)


def test_mul_matches_word_dictionary_oracle():
    rng = np.random.default_rng(0)
    for d, M in [(1, 4), (2, 4), (3, 3)]:
        a, b = random_tensor(rng, d, M), random_tensor(rng, d, M)
        prod = tensor_mul(a, b)
        ref = naive_mul(a, b)
        for w in enumerate_words(d, M):
            assert prod[w] == pytest.approx(ref[w], abs=1e-13)


def test_unit_is_identity():
    rng = np.random.default_rng(1)
    a = random_tensor(rng, 2, 4)
    e = TruncatedTensor.unit(2, 4)
    assert np.array_equal((e @ a).coeffs, a.coeffs)
    assert np.array_equal((a @ e).coeffs, a.coeffs)


def test_exp_squared_is_exp_of_double():
    v = np.array([0.3, -0.7])
    s = segment_signature(v, 4)
    assert (s @ s).allclose(segment_signature(2 * v, 4), rtol=1e-14, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 4))
def test_mul_associative(seed, d, M):
    rng = np.random.default_rng(seed)
    a, b, c = (random_tensor(rng, d, M) for _ in range(3))
    lhs = (a @ b) @ c
    rhs = a @ (b @ c)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12


# --- HS geometry ----------------------------------------------------------

def test_hs_examples():
    e12 = TruncatedTensor.from_words(2, 2, {(1, 2): 1.0})
    e21 = TruncatedTensor.from_words(2, 2, {(2, 1): 1.0})
    assert hs_inner(e12, e12) == 1.0
    assert hs_inner(e12, e21) == 0.0
    one_e1 = TruncatedTensor.from_words(2, 2, {(): 1.0, (1,): 1.0})
    assert hs_norm(one_e1) ** 2 == pytest.approx(2.0)


def test_level_norms_sum_and_orthogonality():
    rng = np.random.default_rng(2)
    a = random_tensor(rng, 2, 4)
    assert level_sq_norms(a).sum() == pytest.approx(hs_norm(a) ** 2, rel=1e-14)
    lev2 = TruncatedTensor.from_words(2, 4, {w: rng.normal() for w in enumerate_words(2, 4) if len(w) == 2})
    lev3 = TruncatedTensor.from_words(2, 4, {w: rng.normal() for w in enumerate_words(2, 4) if len(w) == 3})
    assert hs_inner(lev2, lev3) == 0.0


# --- shuffle ------------------------------------------------------------------

def test_shuffle_examples():
    assert shuffle((1,), (2,)) == {(1, 2): 1, (2, 1): 1}
    assert shuffle((1,), (1,)) == {(1, 1): 2}
    six = shuffle((1, 1), (2, 2))
    assert six == {w: 1 for w in [(1, 1, 2, 2), (1, 2, 1, 2), (1, 2, 2, 1),
                                  (2, 1, 1, 2), (2, 1, 2, 1), (2, 2, 1, 1)]}


def test_shuffle_tensor_truncation():
    with pytest.raises(TruncationError):
        shuffle_tensor((1, 2), (1,), 2, 2)
    t = shuffle_tensor((1,), (2,), 2, 2)
    assert t[(1, 2)] == 1 and t[(2, 1)] == 1


words_st = st.lists(st.integers(1, 3), min_size=0, max_size=3).map(tuple)


@given(words_st, words_st)
def test_shuffle_commutative_and_counts(u, v):
    s = shuffle(u, v)
    assert s == shuffle(v, u)
    assert sum(s.values()) == math.comb(len(u) + len(v), len(u))
    for w in s:
        assert sorted(w) == sorted(u + v)


@given(words_st, words_st, words_st)
def test_shuffle_associative(u, v, w):
    def lift(counter, x):
        out = {}
        for word, m in counter.items():
            for word2, m2 in shuffle(word, x).items():
                out[word2] = out.get(word2, 0) + m * m2
        return out

    left = lift(shuffle(u, v), w)
    right = {}
    for word, m in shuffle(v, w).items():
        for word2, m2 in shuffle(u, word).items():
            right[word2] = right.get(word2, 0) + m * m2
    assert left == right


# --- serialization ----------------------------------------------------------

def test_csv_round_trip_and_header():
    rng = np.random.default_rng(3)
    ts = [random_tensor(rng, 2, 4) for _ in range(3)]
    text = tensors_to_csv(ts)
    header = text.splitlines()[0].split(",")
    assert header == [word_label(w) for w in enumerate_words(2, 4)]
    back = tensors_from_csv(text)
    for a, b in zip(ts, back):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_all_words_products_cover_every_split():
    # each level-m word of a product of pure letters appears exactly once
    d, M = 2, 3
    letters = [TruncatedTensor.from_words(d, M, {(): 1.0, (i,): 1.0}) for i in (1, 2)]
    prod = TruncatedTensor.unit(d, M)
    for t in itertools.islice(itertools.cycle(letters), 3):
        prod = prod @ t
    # (1+e1)(1+e2)(1+e1): coefficient of e1 is 2, of e12 is 1, of e121 is 1, of e21 is 1, of e11 is 1
    assert prod[(1,)] == 2 and prod[(1, 2, 1)] == 1 and prod[(1, 1)] == 1 and prod[(2, 1)] == 1
