"""Exact stationary Gaussian sampling by circulant embedding (Davies-Harte)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .fou import CovarianceTable, FouParams, covariance_table

NEGATIVE_EIG_TOL = 1e-9
MAX_GROWTH = 8


class EmbeddingError(RuntimeError):
    """The circulant embedding has a significantly negative eigenvalue."""


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimSpec:
    fou: FouParams
    K: int
    n: int
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.K < 1:
            raise ValueError(f"need n >= 2 and K >= 1, got n={self.n}, K={self.K}")

    @property
    def n_points(self) -> int:
        return self.K * (self.n - 1) + 1

    @property
    def h(self) -> float:
        return self.fou.delta / (self.n - 1)

    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.h


@dataclass(frozen=True, eq=False)
class EmbeddingSpectrum:
    eigenvalues: np.ndarray
    min_eigenvalue: float
    clipped: int

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


def embedding_spectrum(cov) -> EmbeddingSpectrum:
    """Eigenvalues of the circulant with first row (r0..r_{L-1}, r_{L-2}..r1).

    Negative eigenvalues down to -1e-9 r0 are clipped to zero; anything
    lower raises ``EmbeddingError``.
    """
    r = np.asarray(cov, dtype=np.float64)
    if r.ndim != 1 or len(r) < 2:
        raise ValueError("need at least two autocovariances")
    row = np.concatenate([r, r[-2:0:-1]])
    eig = sfft.rfft(row).real
    # rfft returns the first m//2+1 of m eigenvalues; the rest mirror them
    full = np.concatenate([eig, eig[1:len(row) - len(eig) + 1][::-1]])
    lo = float(full.min())
    if lo < -NEGATIVE_EIG_TOL * r[0]:
        raise EmbeddingError(
            f"circulant embedding of size {len(row)} has eigenvalue {lo:.3e} "
            f"(r0={r[0]:.3e}); the covariance cannot be embedded at this length"
        )
    clipped = int(np.sum(full < 0))
    np.maximum(full, 0.0, out=full)
    return EmbeddingSpectrum(full, lo, clipped)


def _fast_size(n_points: int) -> int:
    """Even FFT length >= 2(n_points - 1) with only small prime factors."""
    m = sfft.next_fast_len(2 * max(n_points - 1, 1), real=True)
    while m % 2:
        m = sfft.next_fast_len(m + 1, real=True)
    return m


class StationarySampler:
    """Davies-Harte sampler for d independent stationary coordinates on a grid.

    The embedding is built once per (params, spacing, length); samples are
    then one FFT per coordinate per replication.
    """

    def __init__(self, fou: FouParams, h: float, n_points: int):
        self.fou = fou
        self.h = h
        self.n_points = n_points
        m = _fast_size(n_points)
        for _ in range(int(math.log2(MAX_GROWTH)) + 1):
            try:
                table = covariance_table(fou, h, m // 2 + 1)
                self.spectra = [embedding_spectrum(table.values[i]) for i in range(fou.d)]
                self.table = table
                break
            except EmbeddingError as exc:
                last = exc
                m *= 2
        else:
            raise SimulationError(f"embedding failed up to {MAX_GROWTH}x minimal length: {last}")
        self.m = m
        self._scales = [np.sqrt(s.eigenvalues / m) for s in self.spectra]

    @classmethod
    def for_spec(cls, spec: SimSpec) -> "StationarySampler":
        return cls(spec.fou, spec.h, spec.n_points)

    @property
    def covariance(self) -> CovarianceTable:
        return self.table

    def _coordinate(self, rng: np.random.Generator, i: int, size: int) -> np.ndarray:
        # complex Gaussian weights; the real part of the FFT is an exact
        # sample with the target Toeplitz covariance on the first m/2+1 points
        m = self.m
        z = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
        y = sfft.fft(self._scales[i] * z, axis=-1)
        return y.real[:, : self.n_points]

    def sample(self, replication: int, master_seed: int = 0) -> np.ndarray:
        """One path, shape (n_points, d)."""
        out = np.empty((self.n_points, self.fou.d))
        for i in range(self.fou.d):
            rng = stream(master_seed, replication, i)
            out[:, i] = self._coordinate(rng, i, 1)[0]
        return out

    def sample_many(self, replications, master_seed: int = 0) -> np.ndarray:
        """Paths for several replications, shape (R, n_points, d)."""
        reps = list(replications)
        out = np.empty((len(reps), self.n_points, self.fou.d))
        for r, rep in enumerate(reps):
            out[r] = self.sample(rep, master_seed)
        return out


def stream(master_seed: int, replication: int, coordinate: int) -> np.random.Generator:
    """Counter-based generator for one (replication, coordinate) pair."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1),
                                                         int(replication), int(coordinate)]))


@dataclass(frozen=True, eq=False)
class SampledPath:
    values: np.ndarray
    h: float
    K: int
    n: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.h

    def blocks(self) -> np.ndarray:
        """Block view, shape (K, n, d); adjacent blocks share an endpoint."""
        return block_view(self.values, self.K, self.n)

    def to_csv(self) -> str:
        d = self.values.shape[1]
        lines = ["t," + ",".join(f"x{i + 1}" for i in range(d))]
        for t, row in zip(self.times, self.values):
            lines.append(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def block_view(values: np.ndarray, K: int, n: int) -> np.ndarray:
    """(…, K(n-1)+1, d) -> (…, K, n, d) without copying."""
    values = np.asarray(values)
    if values.shape[-2] != K * (n - 1) + 1:
        raise ValueError(
            f"path has {values.shape[-2]} points, expected K(n-1)+1 = {K * (n - 1) + 1}"
        )
    s = values.strides
    shape = values.shape[:-2] + (K, n, values.shape[-1])
    strides = s[:-2] + ((n - 1) * s[-2], s[-2], s[-1])
    return np.lib.stride_tricks.as_strided(values, shape=shape, strides=strides, writeable=False)


def sample_stationary_path(spec: SimSpec, replication: int,
                           sampler: StationarySampler | None = None) -> SampledPath:
    sampler = sampler or StationarySampler.for_spec(spec)
    return SampledPath(sampler.sample(replication, spec.master_seed), spec.h, spec.K, spec.n)
