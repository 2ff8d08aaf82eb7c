import numpy as np
import pytest
from scipy import stats

from blocksig.estimator import replicate_estimates
from blocksig.fou import FouParams, autocovariance, covariance_table
from blocksig.simulate import (
    EmbeddingError,
    SimulationError,
    SimSpec,
    StationarySampler,
    _fast_size,
    block_view,
    embedding_spectrum,
    sample_stationary_path,
    stream,
)


# --- embedding ---------------------------------------------------------------

def test_white_noise_spectrum_is_flat():
    r = np.zeros(33)
    r[0] = 1.0
    s = embedding_spectrum(r)
    assert s.size == 64
    assert np.allclose(s.eigenvalues, 1.0, atol=1e-14)


def test_constant_process_spectrum():
    L = 17
    s = embedding_spectrum(np.ones(L))
    assert s.eigenvalues[0] == pytest.approx(2 * (L - 1))
    assert np.allclose(s.eigenvalues[1:], 0.0, atol=1e-12)


def test_spectrum_matches_dense_circulant():
    r = covariance_table(FouParams(0.4, 1.0, 1.0, d=1), 0.05, 12).values[0]
    row = np.concatenate([r, r[-2:0:-1]])
    m = len(row)
    C = np.array([[row[(j - i) % m] for j in range(m)] for i in range(m)])
    dense = np.sort(np.linalg.eigvalsh(C))
    assert np.allclose(np.sort(embedding_spectrum(r).eigenvalues), np.clip(dense, 0, None), atol=1e-12)


@pytest.mark.xfail(strict=True, raises=EmbeddingError,
                   reason="a 0.2-long window is far shorter than the H = 0.6 memory; min eigenvalue -1.44")
def test_fou_h06_fine_grid_embedding_is_nonnegative():
    r = covariance_table(FouParams(0.6, 1.0, 1.0, d=1), 1e-4, 2048).values[0]
    s = embedding_spectrum(r)
    assert np.all(s.eigenvalues >= 0)


def test_fou_h06_fine_grid_needs_longer_embedding():
    p = FouParams(0.6, 1.0, 1.0, d=1)
    for L in (32768, 131072):
        r = covariance_table(p, 1e-4, L).values[0]
        assert embedding_spectrum(r).min_eigenvalue >= -1e-9 * r[0]
    for L in (2048, 4096, 8192, 16384):
        with pytest.raises(EmbeddingError):
            embedding_spectrum(covariance_table(p, 1e-4, L).values[0])
    # the retry policy stops at 8x the minimal size
    with pytest.raises(SimulationError, match="8x"):
        StationarySampler(p, 1e-4, 2048)
    assert StationarySampler(p, 1e-3, 2048).m >= 2 * 2047


def test_embedding_failure_is_reported():
    # a sequence that is not a covariance: negative-definite circulant
    with pytest.raises(EmbeddingError, match="eigenvalue"):
        embedding_spectrum(np.array([1.0, 2.0, 0.0]))
    with pytest.raises(ValueError):
        embedding_spectrum(np.array([1.0]))


def test_tiny_negatives_are_clipped():
    s = embedding_spectrum(np.array([1.0, 1.0 + 1e-11, 1.0]))
    assert s.clipped >= 1 and np.all(s.eigenvalues >= 0)


def test_fast_size_is_even_and_large_enough():
    for n in (2, 3, 101, 1001, 9901, 100001):
        m = _fast_size(n)
        assert m % 2 == 0 and m >= 2 * (n - 1)


# --- sampling ------------------------------------------------------------------

def test_spec_grid():
    spec = SimSpec(FouParams(0.5, 1.0, 1.0, d=2, delta=0.1), K=7, n=11)
    assert spec.n_points == 71 and spec.h == pytest.approx(0.01)
    with pytest.raises(ValueError):
        SimSpec(FouParams(0.5), K=0, n=11)
    with pytest.raises(ValueError):
        SimSpec(FouParams(0.5), K=2, n=1)


def test_shapes_and_determinism():
    p = FouParams(0.4, 1.0, 1.0, d=3)
    s = StationarySampler(p, 0.01, 257)
    a = s.sample(5, 123)
    assert a.shape == (257, 3)
    assert np.array_equal(a, StationarySampler(p, 0.01, 257).sample(5, 123))
    assert not np.array_equal(a, s.sample(6, 123))
    assert not np.array_equal(a, s.sample(5, 124))
    batch = s.sample_many([4, 5, 6], 123)
    assert np.array_equal(batch[1], a)


def test_streams_are_distinct_per_coordinate():
    a = stream(1, 2, 0).standard_normal(4)
    b = stream(1, 2, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, stream(1, 2, 0).standard_normal(4))


def test_thread_count_does_not_change_output():
    spec = SimSpec(FouParams(0.6, 1.0, 1.0, d=2, delta=0.1), K=20, n=11, master_seed=9)
    one = replicate_estimates(spec, 4, 6, threads=1)
    three = replicate_estimates(spec, 4, 6, threads=3)
    assert np.array_equal(one, three)


def test_ou_mean_and_variance():
    p = FouParams(0.5, 1.0, 1.0, d=1)
    x = StationarySampler(p, 0.05, 1001).sample_many(range(100), 3)[..., 0]
    # replications are independent; use per-path means as iid draws
    means = x.mean(axis=1)
    assert abs(means.mean()) < 4 * means.std(ddof=1) / np.sqrt(len(means))
    var = (x**2).mean(axis=1)
    assert abs(var.mean() - 0.5) < 4 * var.std(ddof=1) / np.sqrt(len(var))


@pytest.mark.parametrize("H", [0.4, 0.5, 0.6])
def test_lag_autocovariance_within_five_se(H):
    p = FouParams(H, 1.0, 1.0, d=1)
    h, n_points, reps = 0.01, 2001, 500
    x = StationarySampler(p, h, n_points).sample_many(range(reps), 17)[..., 0]
    for k in (0, 1, 10, 100):
        per_rep = (x[:, : n_points - k] * x[:, k:]).mean(axis=1)
        se = per_rep.std(ddof=1) / np.sqrt(reps)
        assert abs(per_rep.mean() - autocovariance(p, 0, k * h)) < 5 * se


def test_increment_covariance_h04():
    p = FouParams(0.4, 1.0, 1.0, d=1)
    h = 0.01
    x = StationarySampler(p, h, 401).sample_many(range(400), 5)[..., 0]
    dx = np.diff(x, axis=1)
    target = covariance_table(p, h, 5).increment_cov(0)
    for lag in (0, 1, 3):
        per_rep = (dx[:, : dx.shape[1] - lag] * dx[:, lag:]).mean(axis=1)
        se = per_rep.std(ddof=1) / np.sqrt(len(per_rep))
        assert abs(per_rep.mean() - target[lag]) < 5 * se


def test_linear_functional_is_gaussian():
    p = FouParams(0.4, 1.0, 1.0, d=1)
    n_points, h = 64, 0.02
    s = StationarySampler(p, h, n_points)
    x = s.sample_many(range(1000), 8)[..., 0]
    a = np.cos(np.linspace(0, 3, n_points))
    r = covariance_table(p, h, n_points).values[0]
    cov = r[np.abs(np.subtract.outer(np.arange(n_points), np.arange(n_points)))]
    sd = float(np.sqrt(a @ cov @ a))
    res = stats.goodness_of_fit(stats.norm, x @ a, known_params=dict(loc=0.0, scale=sd),
                                statistic="ad", n_mc_samples=2000, rng=np.random.default_rng(0))
    assert res.pvalue > 0.001


def test_replications_are_uncorrelated():
    p = FouParams(0.6, 1.0, 1.0, d=1)
    x = StationarySampler(p, 0.01, 101).sample_many(range(801), 2)[..., 0]
    a, b = x[:-1, 50], x[1:, 50]
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 4 / np.sqrt(len(a))


def test_coordinates_are_uncorrelated():
    p = FouParams(0.5, 1.0, 1.0, d=2)
    x = StationarySampler(p, 0.01, 101).sample_many(range(800), 4)
    rho = np.corrcoef(x[:, 30, 0], x[:, 30, 1])[0, 1]
    assert abs(rho) < 4 / np.sqrt(800)


# --- blocks --------------------------------------------------------------------

def test_block_view_shares_endpoints():
    vals = np.arange(2 * 13, dtype=float).reshape(13, 2)
    b = block_view(vals, 4, 4)
    assert b.shape == (4, 4, 2)
    for k in range(3):
        assert np.array_equal(b[k, -1], b[k + 1, 0])
    assert np.array_equal(b[2], vals[6:10])
    with pytest.raises(ValueError):
        block_view(vals, 3, 4)


def test_sampled_path_csv_and_blocks():
    spec = SimSpec(FouParams(0.5, 1.0, 1.0, d=2, delta=0.1), K=3, n=5, master_seed=1)
    path = sample_stationary_path(spec, 0)
    assert path.blocks().shape == (3, 5, 2)
    lines = path.to_csv().splitlines()
    assert lines[0] == "t,x1,x2" and len(lines) == 14
    assert float(lines[-1].split(",")[0]) == pytest.approx(0.3)
