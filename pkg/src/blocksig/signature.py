"""Exact truncated signatures of piecewise-linear paths.

A straight segment has signature exp(increment); a piecewise-linear path is
the Chen product of its segments, accumulated left to right.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    ShapeError,
    TruncatedTensor,
    enumerate_words,
    exp_arrays,
    mul_exp_inplace,
    tensor_dim,
    tensor_mul,
    word_index,
)


class PathDataError(ValueError):
    """Raised for malformed or non-finite path data."""


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    points: np.ndarray = field(repr=False)
    times: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise PathDataError(f"need at least 2 points of shape (n, d), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise PathDataError("path contains non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.times is not None:
            t = np.asarray(self.times, dtype=np.float64)
            if t.shape != (pts.shape[0],) or np.any(np.diff(t) <= 0):
                raise PathDataError("times must be strictly increasing, one per point")
            object.__setattr__(self, "times", t)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def increments(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    def reversed(self) -> "PiecewiseLinearPath":
        return PiecewiseLinearPath(self.points[::-1])


def _as_path(path) -> PiecewiseLinearPath:
    return path if isinstance(path, PiecewiseLinearPath) else PiecewiseLinearPath(path)


def segment_signature(increment, M: int) -> TruncatedTensor:
    inc = np.atleast_1d(np.asarray(increment, dtype=np.float64))
    return TruncatedTensor(inc.shape[0], M, exp_arrays(inc, M))


def chen_concat(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    if (a.d, a.M) != (b.d, b.M):
        raise ShapeError(f"shape mismatch: (d={a.d}, M={a.M}) vs (d={b.d}, M={b.M})")
    for name, t in (("left", a), ("right", b)):
        if not np.isclose(t.coeffs[0], 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"{name} operand is not group-like (level 0 = {t.coeffs[0]})")
    return tensor_mul(a, b)


def signature_arrays(points: np.ndarray, M: int) -> np.ndarray:
    """Signatures of a batch of paths.

    ``points`` has shape (..., n, d); the result has shape (..., dim). The
    running product runs over the n - 1 segments in order, vectorized over
    the leading batch axes.
    """
    points = np.asarray(points, dtype=np.float64)
    d = points.shape[-1]
    out = np.zeros(points.shape[:-2] + (tensor_dim(d, M),))
    out[..., 0] = 1.0
    incs = np.diff(points, axis=-2)
    for k in range(incs.shape[-2]):
        mul_exp_inplace(out, incs[..., k, :], d, M)
    return out


def signature_of_path(path, M: int) -> TruncatedTensor:
    p = _as_path(path)
    return TruncatedTensor(p.d, M, signature_arrays(p.points, M))


def brute_force_signature(path, M: int, refine: int) -> TruncatedTensor:
    """Nested left-point Riemann sums on a mesh refined ``refine`` times per segment.

    Test oracle only: level m of word w is sum_{j_1 < ... < j_m} prod dx^{w_r}_{j_r}
    over the refined increments, computed by the standard cumulative-sum
    recursion. Converges to the exact signature at rate O(1/refine).
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    p = _as_path(path)
    pts = p.points
    frac = np.arange(refine) / refine
    fine = [pts[k] + f * (pts[k + 1] - pts[k]) for k in range(len(pts) - 1) for f in frac]
    fine.append(pts[-1])
    dx = np.diff(np.array(fine), axis=0)
    coeffs = np.zeros(tensor_dim(p.d, M))
    coeffs[0] = 1.0
    for w in enumerate_words(p.d, M):
        if not w:
            continue
        # acc[j] = sum over j_1 < ... < j_r = j of prod dx
        acc = dx[:, w[0] - 1].copy()
        for letter in w[1:]:
            strictly_before = np.concatenate(([0.0], np.cumsum(acc)[:-1]))
            acc = strictly_before * dx[:, letter - 1]
        coeffs[word_index(w, p.d)] = acc.sum()
    return TruncatedTensor(p.d, M, coeffs)


def shuffle_identity_residual(sig: TruncatedTensor, length: float | None = None) -> float:
    """Largest violation of <u,S><v,S> = <u⧢v, S> over |u|+|v| <= M.

    The identity is bilinear in levels |u| and |v|, so each defect is divided
    by the product of those two level scales. The scale of level m is its
    norm, or ``length**m / m!`` when the path length is given; the latter
    bounds the level norm and is the right yardstick for round-off when a
    long path nearly cancels itself.
    """
    from .tensor import shuffle

    if length is None:
        norms = [float(np.linalg.norm(sig.level(m))) for m in range(sig.M + 1)]
    else:
        norms = [float(length) ** m / math.factorial(m) for m in range(sig.M + 1)]
    worst = 0.0
    words = [w for w in enumerate_words(sig.d, sig.M) if w]
    for u, v in itertools.product(words, repeat=2):
        if len(u) + len(v) > sig.M:
            continue
        scale = norms[len(u)] * norms[len(v)]
        if scale == 0.0:
            continue
        rhs = sum(mult * sig[w] for w, mult in shuffle(u, v).items())
        worst = max(worst, abs(sig[u] * sig[v] - rhs) / scale)
    return worst
