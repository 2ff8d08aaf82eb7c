"""Deterministic expected signatures E[S^(M)] of stationary fOU blocks.

Levels 0-2 are exact for every H. Level 4 comes from one of:

* ``wick_mesh`` - the exact expected signature of the piecewise-linear
  interpolation of the process on an L-point mesh of [0, Delta]. Each
  level-4 coefficient expands into sums over weakly increasing segment
  indices (ties weighted by 1/run!), and Isserlis' theorem turns the
  expectation into products of increment covariances. Every pattern of
  distinct positions reduces to an O(L^2) array sum.
* ``closed`` - the pairing integrals P1 (adjacent), P2 (alternating) and
  P3 (nested) in R and R', evaluated by adaptive quadrature (H >= 1/2).

Odd levels vanish identically for a centered Gaussian process.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .fou import (
    FouParams,
    autocov_closed,
    autocov_derivative_closed,
    covariance_table,
    derivative_at_zero,
)
from .tensor import (
    TruncatedTensor,
    Word,
    enumerate_words,
    shuffle,
    tensor_dim,
    word_index,
)

DEFAULT_MESH = 1024
QUAD_EPSREL = 1e-10


class RegimeError(ValueError):
    """Closed-form level-4 formulas requested outside H >= 1/2."""


class DegenerateError(ZeroDivisionError):
    pass


PAIRINGS = {
    "P1": ((0, 1), (2, 3)),
    "P2": ((0, 2), (1, 3)),
    "P3": ((0, 3), (1, 2)),
}


def valid_pairings(word: Word) -> list[str]:
    return [name for name, pairs in PAIRINGS.items()
            if all(word[a] == word[b] for a, b in pairs)]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    tensor: TruncatedTensor
    method: str
    provenance: dict = field(default_factory=dict)
    mesh: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, word) -> float:
        return self.tensor[word]

    @property
    def d(self) -> int:
        return self.tensor.d

    @property
    def M(self) -> int:
        return self.tensor.M

    def provenance_csv(self) -> str:
        lines = ["word,method"]
        from .tensor import word_label
        for w in enumerate_words(self.d, self.M):
            lines.append(f"{word_label(w)},{self.provenance.get(w, '')}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# level 2
# ---------------------------------------------------------------------------

def increment_variance(p: FouParams, i: int) -> float:
    theta, sigma = p.coord(i)
    return float(autocov_closed(p.H, theta, sigma, 0.0) - autocov_closed(p.H, theta, sigma, p.delta))


def ground_truth_level2(p: FouParams) -> np.ndarray:
    """d x d matrix E[S_ij]: v_i on the diagonal, zero elsewhere."""
    return np.diag([increment_variance(p, i) for i in range(p.d)])


# ---------------------------------------------------------------------------
# mesh-Wick level 4
# ---------------------------------------------------------------------------

def _compositions(total: int):
    for k in range(1, total + 1):
        for cuts in itertools.combinations(range(1, total), k - 1):
            bounds = (0,) + cuts + (total,)
            yield tuple(bounds[j + 1] - bounds[j] for j in range(k))


def _ordered_sum(n: int, r: int, edges: tuple, covs: list[np.ndarray]) -> float:
    """sum_{1 <= t_1 < ... < t_r <= n} prod_edges c_coord(t_b - t_a).

    ``edges`` holds (a, b, coord) with a <= b; a == b contributes c(0).
    """
    if r > n:
        return 0.0
    const = 1.0
    live = []
    for a, b, c in edges:
        if a == b:
            const *= covs[c][0]
        else:
            live.append((a, b, c))
    if r == 1:
        return const * n
    if r == 2:
        g = np.arange(1, n)
        val = (n - g).astype(np.float64)
        for _, _, c in live:
            val = val * covs[c][g]
        return const * float(val.sum())
    if r == 3:
        g = np.arange(1, n)
        g1, g2 = g[:, None], g[None, :]
        weight = np.maximum(n - g1 - g2, 0).astype(np.float64)
        val = weight
        for a, b, c in live:
            if (a, b) == (0, 1):
                lag = np.broadcast_to(g1, weight.shape)
            elif (a, b) == (1, 2):
                lag = np.broadcast_to(g2, weight.shape)
            else:
                lag = np.minimum(g1 + g2, n - 1)
            val = val * covs[c][lag]
        return const * float(val.sum())
    if r == 4:
        pairs = tuple(sorted((a, b) for a, b, _ in live))
        cov = {(a, b): covs[c] for a, b, c in live}
        g = np.arange(1, n)
        if pairs == ((0, 1), (2, 3)):
            f, h = cov[(0, 1)][1:], cov[(2, 3)][1:]
            conv = np.convolve(f, h)  # conv[k] <-> u + w = k + 2
            s = np.arange(2, 2 + len(conv))
            m = n - s
            tri = np.where(m >= 1, m * (m - 1) / 2.0, 0.0)
            return const * float(np.dot(conv, tri))
        if pairs == ((0, 2), (1, 3)):
            f, h = cov[(0, 2)], cov[(1, 3)]
            x, y = g[:, None], g[None, :]
            q = np.minimum(x, y) - 1
            c0 = n - x - y

            def tri(z):
                return np.where(z > 0, z * (z + 1) / 2.0, 0.0)

            inner = tri(c0 + q) - tri(c0)
            return const * float(np.sum(f[g][:, None] * h[g][None, :] * inner))
        if pairs == ((0, 3), (1, 2)):
            f, h = cov[(0, 3)], cov[(1, 2)]
            G, g2 = g[:, None], g[None, :]
            count = np.maximum(G - g2 - 1, 0)
            return const * float(np.sum(((n - g) * f[g])[:, None] * h[g][None, :] * count))
    raise ValueError(f"unsupported pattern r={r}, edges={edges}")


def _wick_word(word: Word, n: int, covs: list[np.ndarray], cache: dict) -> float:
    """Expected PL-signature coefficient of a length-4 word on n segments."""
    total = 0.0
    for comp in _compositions(len(word)):
        pos = [j for j, run in enumerate(comp) for _ in range(run)]
        weight = 1.0 / math.prod(math.factorial(run) for run in comp)
        for name in valid_pairings(word):
            edges = tuple(sorted((pos[a], pos[b], word[a] - 1) for a, b in PAIRINGS[name]))
            key = (len(comp), edges)
            if key not in cache:
                cache[key] = _ordered_sum(n, len(comp), edges, covs)
            total += weight * cache[key]
    return total


def _mesh_level2(n: int, cov: np.ndarray) -> float:
    g = np.arange(1, n)
    return float(np.dot(n - g, cov[1:n]) + n * cov[0] / 2.0)


def ground_truth_wick_mesh(p: FouParams, M: int = 4, L: int = DEFAULT_MESH) -> GroundTruth:
    if M > 4:
        raise ValueError("ground truth is only available up to level 4")
    if L < 4:
        raise ValueError("mesh needs L >= 4 points")
    return expected_pl_signature(p, M, L)


def expected_pl_signature(p: FouParams, M: int, L: int) -> GroundTruth:
    """Exact E[S^(M)] of the PL interpolation through L equispaced points (L >= 2)."""
    if M > 4:
        raise ValueError("ground truth is only available up to level 4")
    if L < 2:
        raise ValueError("need at least two mesh points")
    n = L - 1
    table = covariance_table(p, p.delta / n, n + 1)
    covs = [table.increment_cov(i) for i in range(p.d)]
    coeffs = np.zeros(tensor_dim(p.d, M))
    coeffs[0] = 1.0
    prov = {(): "exact"}
    cache: dict = {}
    for w in enumerate_words(p.d, M):
        if not w:
            continue
        idx = word_index(w, p.d)
        if len(w) % 2:
            prov[w] = "parity"
        elif len(w) == 2:
            coeffs[idx] = _mesh_level2(n, covs[w[0] - 1]) if w[0] == w[1] else 0.0
            prov[w] = f"wick_mesh(L={L})"
        else:
            coeffs[idx] = _wick_word(w, n, covs, cache) if valid_pairings(w) else 0.0
            prov[w] = f"wick_mesh(L={L})"
    return GroundTruth(TruncatedTensor(p.d, M, coeffs), f"wick_mesh(L={L})", prov, mesh=L)


# ---------------------------------------------------------------------------
# closed-form pairing integrals
# ---------------------------------------------------------------------------

class _Kernel:
    """Scalar R, R' for one coordinate (closed-form route)."""

    def __init__(self, p: FouParams, i: int):
        self.H = p.H
        self.theta, self.sigma = p.coord(i)
        self.r0 = float(autocov_closed(self.H, self.theta, self.sigma, 0.0))
        self.dr0 = derivative_at_zero(p, i)

    def R(self, t):
        return float(autocov_closed(self.H, self.theta, self.sigma, t))

    def dR(self, t):
        if t <= 0.0:
            return self.dr0
        return float(autocov_derivative_closed(self.H, self.theta, self.sigma, t))


def _quad(f, a, b, **kw):
    val, _ = integrate.quad(f, a, b, epsabs=kw.pop("epsabs", 0.0),
                            epsrel=kw.pop("epsrel", QUAD_EPSREL), limit=kw.pop("limit", 400), **kw)
    return val


def _triangle(f, delta: float, epsrel: float) -> float:
    """int_0^delta du int_0^{delta-u} f(s, u) ds (u is the diagonal distance)."""
    def inner(u):
        if u >= delta:
            return 0.0
        return _quad(lambda s: f(s, u), 0.0, delta - u, epsrel=epsrel)
    return _quad(inner, 0.0, delta, epsrel=epsrel)


@functools.lru_cache(maxsize=256)
def p1_adjacent(p: FouParams, i: int, j: int, *, epsrel: float = QUAD_EPSREL) -> float:
    """int_0^Delta R_i'(s) [R_j(Delta - s) - R_j(0)] ds."""
    ki, kj = _Kernel(p, i), _Kernel(p, j)
    D = p.delta
    return _quad(lambda s: ki.dR(s) * (kj.R(D - s) - kj.r0), 0.0, D, epsrel=epsrel)


@functools.lru_cache(maxsize=256)
def p1_adjacent_boundary(p: FouParams, i: int, j: int, *, epsrel: float = 1e-9) -> float:
    """Adjacent pairing with the R'(0+) boundary terms retained (2D form)."""
    ki, kj = _Kernel(p, i), _Kernel(p, j)
    D = p.delta

    # t2 = s, t3 = s + u
    def f(s, u):
        return (ki.dr0 - ki.dR(s)) * (kj.dr0 - kj.dR(D - s - u))
    return _triangle(f, D, epsrel)


@functools.lru_cache(maxsize=256)
def p2_alternating(p: FouParams, i: int, j: int, *, epsrel: float = 1e-9) -> float:
    """int_{0<t2<t3<Delta} [R_i'(t3) - R_i'(t3-t2)][R_j'(Delta-t2) - R_j'(t3-t2)]."""
    ki, kj = _Kernel(p, i), _Kernel(p, j)
    D = p.delta

    def f(s, u):  # t2 = s, t3 = s + u
        return (ki.dR(s + u) - ki.dR(u)) * (kj.dR(D - s) - kj.dR(u))
    return _triangle(f, D, epsrel)


@functools.lru_cache(maxsize=256)
def p3_nested(p: FouParams, i: int, j: int, *, epsrel: float = QUAD_EPSREL) -> float:
    """int R_i'(t)[R_j(t) - R_j(0)] dt - int (Delta - w) R_i'(w) R_j'(w) dw."""
    ki, kj = _Kernel(p, i), _Kernel(p, j)
    D = p.delta
    first = _quad(lambda t: ki.dR(t) * (kj.R(t) - kj.r0), 0.0, D, epsrel=epsrel)
    second = _quad(lambda w: (D - w) * ki.dR(w) * kj.dR(w), 0.0, D, epsrel=epsrel)
    return first - second


@functools.lru_cache(maxsize=256)
def p3_nested_boundary(p: FouParams, i: int, j: int, *, epsrel: float = 1e-9) -> float:
    """Nested pairing with the R_j'(0+) boundary term retained (2D form)."""
    ki, kj = _Kernel(p, i), _Kernel(p, j)
    D = p.delta

    def f(s, u):  # t2 = s, t4 = s + u
        return (ki.dR(s + u) - ki.dR(u)) * (kj.dR(u) - kj.dr0)
    return _triangle(f, D, epsrel)


def ground_truth_level4_closed(p: FouParams, word, *, half_forms: str = "boundary") -> float:
    """Level-4 expected signature coefficient by pairing quadrature (H >= 1/2).

    At H = 1/2, ``half_forms="boundary"`` evaluates P1 and P3 with the
    R'(0+) boundary terms kept; ``half_forms="smooth"`` uses the same
    integrals as for H > 1/2.
    """
    word = tuple(word)
    if len(word) != 4:
        raise ValueError("closed forms exist for length-4 words only")
    if p.H < 0.5:
        raise RegimeError(f"closed forms are not valid for H={p.H} < 1/2; use the mesh route")
    if half_forms not in ("boundary", "smooth"):
        raise ValueError(f"unknown half_forms {half_forms!r}")
    boundary = p.is_ou and half_forms == "boundary"
    total = 0.0
    for name in valid_pairings(word):
        i, j = word[0] - 1, word[1] - 1
        if name == "P1":
            j = word[2] - 1
            total += p1_adjacent_boundary(p, i, j) if boundary else p1_adjacent(p, i, j)
        elif name == "P2":
            total += p2_alternating(p, i, j)
        else:
            total += p3_nested_boundary(p, i, j) if boundary else p3_nested(p, i, j)
    return total


def ground_truth_closed(p: FouParams, M: int = 4, *, half_forms: str = "boundary") -> GroundTruth:
    if M > 4:
        raise ValueError("ground truth is only available up to level 4")
    coeffs = np.zeros(tensor_dim(p.d, M))
    coeffs[0] = 1.0
    prov = {(): "exact"}
    v = ground_truth_level2(p)
    tag = "boundary_form" if (p.is_ou and half_forms == "boundary") else "closed_form"
    cache: dict = {}
    for w in enumerate_words(p.d, M):
        if not w:
            continue
        if len(w) % 2:
            prov[w] = "parity"
            continue
        if len(w) == 2:
            coeffs[word_index(w, p.d)] = v[w[0] - 1, w[1] - 1]
            prov[w] = "closed_form"
            continue
        if not valid_pairings(w):
            prov[w] = "parity"
            continue
        if w not in cache:
            cache[w] = ground_truth_level4_closed(p, w, half_forms=half_forms)
        coeffs[word_index(w, p.d)] = cache[w]
        prov[w] = tag
    return GroundTruth(TruncatedTensor(p.d, M, coeffs), tag, prov)


# ---------------------------------------------------------------------------
# public entry point and checks
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def ground_truth(p: FouParams, M: int = 4, method: str = "wick_mesh", L: int = DEFAULT_MESH) -> GroundTruth:
    """Cached ground truth; ``method`` is ``wick_mesh`` or ``closed``."""
    if method == "wick_mesh":
        return ground_truth_wick_mesh(p, M, L)
    if method == "closed":
        return ground_truth_closed(p, M)
    raise ValueError(f"unknown method {method!r}")


def shuffle_consistency(gt: GroundTruth, i: int, j: int) -> float:
    """Relative defect of sum_{w in (ii)⧢(jj)} E[S_w] = E[S_ii] E[S_jj] (letters 1-based)."""
    if i == j:
        raise ValueError("shuffle consistency needs two distinct coordinates")
    if gt.M < 4:
        raise ValueError("need truncation M >= 4")
    lhs = sum(mult * gt[w] for w, mult in shuffle((i, i), (j, j)).items())
    rhs = gt[(i, i)] * gt[(j, j)]
    if rhs == 0.0:
        raise DegenerateError("E[S_ii] E[S_jj] is zero")
    return abs(lhs - rhs) / abs(rhs)


def mesh_convergence(p: FouParams, meshes=(64, 128, 256, 512, 1024), M: int = 4) -> list[dict]:
    """Successive HS gaps between mesh ground truths, as a diagnostic table."""
    rows = []
    prev = None
    for L in meshes:
        gt = ground_truth_wick_mesh(p, M, L)
        row = {"L": L, "level4_norm": float(np.linalg.norm(gt.tensor.level(4))) if M >= 4 else 0.0}
        if prev is not None:
            row["gap"] = float(np.linalg.norm((gt.tensor - prev.tensor).coeffs))
        rows.append(row)
        prev = gt
    return rows
