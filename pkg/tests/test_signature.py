import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blocksig.fou import FouParams
from blocksig.signature import (
    PathDataError,
    PiecewiseLinearPath,
    brute_force_signature,
    chen_concat,
    segment_signature,
    shuffle_identity_residual,
    signature_arrays,
    signature_of_path,
)
from blocksig.simulate import StationarySampler
from blocksig.tensor import ShapeError, TruncatedTensor, enumerate_words


def rel_err(a, b):
    return float(np.linalg.norm(a.coeffs - b.coeffs) / np.linalg.norm(b.coeffs))


def test_segment_signature_scalar_levels():
    s = segment_signature([2.0], 4)
    assert np.allclose(s.coeffs, [1, 2, 2, 4 / 3, 2 / 3], rtol=0, atol=1e-15)


def test_segment_signature_zero_and_square():
    assert np.array_equal(segment_signature([0.0, 0.0], 3).coeffs, TruncatedTensor.unit(2, 3).coeffs)
    s = segment_signature([1.0, 1.0], 2)
    assert np.allclose(s.level(2), 0.5)


def test_segment_level_m_is_power_over_factorial():
    v = np.array([0.4, -1.3, 0.7])
    s = segment_signature(v, 4)
    for w in enumerate_words(3, 4):
        expect = np.prod([v[i - 1] for i in w]) / math.factorial(len(w))
        assert s[w] == pytest.approx(expect, abs=1e-15)


def test_l_path_levy_area():
    sig = signature_of_path([[0, 0], [1, 0], [1, 1]], 2)
    assert sig[(1, 1)] == 0.5 and sig[(2, 2)] == 0.5
    assert sig[(1, 2)] == 1.0 and sig[(2, 1)] == 0.0
    assert 0.5 * (sig[(1, 2)] - sig[(2, 1)]) == 0.5


def test_chen_unit_and_checks():
    a = signature_of_path([[0, 0], [0.3, 1.2], [1, -1]], 4)
    assert np.array_equal(chen_concat(a, TruncatedTensor.unit(2, 4)).coeffs, a.coeffs)
    with pytest.raises(ShapeError):
        chen_concat(a, TruncatedTensor.unit(2, 3))
    with pytest.raises(ValueError):
        chen_concat(a, TruncatedTensor.zero(2, 4))


def test_chen_is_signature_of_concatenation():
    rng = np.random.default_rng(0)
    pts = np.cumsum(rng.normal(size=(9, 2)), axis=0)
    whole = signature_of_path(pts, 4)
    split = chen_concat(signature_of_path(pts[:4], 4), signature_of_path(pts[3:], 4))
    assert np.max(np.abs(whole.coeffs - split.coeffs)) < 1e-12


def test_reversal_cancels():
    rng = np.random.default_rng(1)
    for _ in range(10):
        pts = np.cumsum(rng.normal(size=(11, 2)), axis=0)
        prod = chen_concat(signature_of_path(pts, 4), signature_of_path(pts[::-1], 4))
        assert np.max(np.abs(prod.coeffs - TruncatedTensor.unit(2, 4).coeffs)) < 1e-10


def test_single_segment_and_level_one():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(2, 3))
    assert signature_of_path(pts, 4).allclose(segment_signature(pts[1] - pts[0], 4), rtol=0, atol=1e-15)
    pts = np.cumsum(rng.normal(size=(7, 3)), axis=0)
    sig = signature_of_path(pts, 3)
    assert np.max(np.abs(sig.level(1) - (pts[-1] - pts[0]))) < 1e-12


def test_collinear_midpoint_invariance():
    rng = np.random.default_rng(3)
    pts = np.cumsum(rng.normal(size=(6, 2)), axis=0)
    refined = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        refined += [a + 0.37 * (b - a), b]
    s1 = signature_of_path(pts, 4)
    s2 = signature_of_path(np.array(refined), 4)
    assert np.max(np.abs(s1.coeffs - s2.coeffs)) < 1e-12


def test_translation_invariance():
    pts = np.array([[0.0, 1.0], [0.5, -0.2], [1.1, 0.4]])
    assert signature_of_path(pts, 4).allclose(signature_of_path(pts + 7.5, 4), rtol=1e-12, atol=1e-12)


def test_batch_matches_single():
    rng = np.random.default_rng(4)
    pts = np.cumsum(rng.normal(size=(3, 5, 6, 2)), axis=-2)
    batch = signature_arrays(pts, 4)
    for i in range(3):
        for j in range(5):
            assert np.array_equal(batch[i, j], signature_of_path(pts[i, j], 4).coeffs)


def test_path_validation():
    with pytest.raises(PathDataError):
        PiecewiseLinearPath([[0.0, 0.0]])
    with pytest.raises(PathDataError):
        PiecewiseLinearPath([[0.0, 0.0], [np.nan, 1.0]])
    with pytest.raises(PathDataError):
        PiecewiseLinearPath([[0.0], [1.0]], times=[0.0, 0.0])
    p = PiecewiseLinearPath([0.0, 1.0, 3.0])
    assert p.d == 1 and np.array_equal(p.increments()[:, 0], [1.0, 2.0])


# --- oracle ------------------------------------------------------------------

def test_brute_force_straight_segment_level_one():
    pts = np.array([[0.0, 0.0], [0.3, -0.8]])
    bf = brute_force_signature(pts, 4, 7)
    assert np.allclose(bf.level(1), [0.3, -0.8], atol=1e-15)


def test_brute_force_l_path_level_two_exact():
    pts = np.array([[0, 0], [1, 0], [1, 1]], dtype=float)
    bf = brute_force_signature(pts, 2, 1)
    ex = signature_of_path(pts, 2)
    assert bf[(1, 2)] == ex[(1, 2)] and bf[(2, 1)] == ex[(2, 1)]


def test_brute_force_first_order_convergence():
    rng = np.random.default_rng(5)
    pts = np.cumsum(rng.normal(size=(4, 2)), axis=0)
    exact = signature_of_path(pts, 4)
    errs = [rel_err(brute_force_signature(pts, 4, 2**k), exact) for k in range(3, 8)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))


def test_brute_force_fou_block_m3():
    # five segments on the estimator grid h = 0.1 / 99; the Riemann error scales like |increment|^2 / refine
    p = FouParams(0.5, 1.0, 1.0, d=2, delta=0.1)
    sampler = StationarySampler(p, 0.1 / 99, 6)
    for rep in range(20):
        pts = sampler.sample(rep, 9)
        assert rel_err(brute_force_signature(pts, 3, 64), signature_of_path(pts, 3)) < 1e-3


# --- shuffle identity (property) ---------------------------------------------

path_st = arrays(np.float64, st.tuples(st.integers(2, 7), st.just(2)),
                 elements=st.floats(-3, 3, allow_nan=False, allow_infinity=False))


@settings(max_examples=60, deadline=None)
@given(path_st)
def test_shuffle_identity_on_random_paths(pts):
    sig = signature_of_path(pts, 4)
    length = float(np.abs(np.diff(pts, axis=0)).sum(axis=1).sum())
    assert shuffle_identity_residual(sig, length) < 1e-10


def test_shuffle_identity_on_generic_paths_level_scaled():
    rng = np.random.default_rng(6)
    for _ in range(100):
        pts = np.cumsum(rng.normal(size=(6, 2)), axis=0)
        assert shuffle_identity_residual(signature_of_path(pts, 4)) < 1e-10
