"""Quick self-checks run by the ``verify`` subcommand.

Each check returns (passed, detail). They are small versions of the
properties exercised by the test suite and finish in well under a minute.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import fou
from .ground_truth import ground_truth_wick_mesh, shuffle_consistency
from .signature import (
    brute_force_signature,
    chen_concat,
    shuffle_identity_residual,
    signature_of_path,
)
from .simulate import SimSpec, StationarySampler
from .tensor import TruncatedTensor, level_slice


def _random_paths(count: int, segments: int, d: int = 2, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [np.cumsum(rng.normal(size=(segments + 1, d)), axis=0) for _ in range(count)]


def check_shuffle() -> tuple[bool, str]:
    worst = max(shuffle_identity_residual(signature_of_path(p, 4)) for p in _random_paths(20, 6))
    return worst < 1e-10, f"max relative residual {worst:.2e}"


def check_chen() -> tuple[bool, str]:
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        a, b, c = (signature_of_path(np.cumsum(rng.normal(size=(4, 2)), axis=0), 4) for _ in range(3))
        lhs = chen_concat(chen_concat(a, b), c)
        rhs = chen_concat(a, chen_concat(b, c))
        worst = max(worst, float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
    return worst < 1e-12, f"max abs associativity gap {worst:.2e}"


def check_reversal() -> tuple[bool, str]:
    worst = 0.0
    for p in _random_paths(20, 5, seed=2):
        prod = chen_concat(signature_of_path(p, 4), signature_of_path(p[::-1], 4))
        worst = max(worst, float(np.max(np.abs(prod.coeffs - TruncatedTensor.unit(2, 4).coeffs))))
    return worst < 1e-10, f"max |S(x) S(x reversed) - 1| {worst:.2e}"


def check_oracle() -> tuple[bool, str]:
    p = fou.FouParams(0.5, 1.0, 1.0, d=2, delta=0.1)
    path = StationarySampler(p, 0.02, 6).sample(0, 3)
    exact = signature_of_path(path, 4).coeffs
    errs = []
    for r in (8, 16, 32, 64):
        approx = brute_force_signature(path, 4, r).coeffs
        errs.append(float(np.linalg.norm(approx - exact) / np.linalg.norm(exact)))
    ratios = [errs[k] / errs[k + 1] for k in range(3)]
    ok = errs[-1] < 1e-2 and all(1.6 < q < 2.4 for q in ratios)
    return ok, "relative errors " + ", ".join(f"{e:.2e}" for e in errs)


def check_telescoping() -> tuple[bool, str]:
    from .estimator import block_signatures

    p = fou.FouParams(0.4, 1.0, 1.0, d=2, delta=0.1)
    spec = SimSpec(p, 50, 20, 5)
    x = StationarySampler.for_spec(spec).sample(0, 5)
    est = block_signatures(x, 50, 20, 4).mean(axis=0)
    gap = float(np.max(np.abs(est[level_slice(2, 1)] - (x[-1] - x[0]) / 50)))
    return gap < 1e-12, f"level-1 gap {gap:.2e}"


def check_ou_spectral() -> tuple[bool, str]:
    p = fou.FouParams(0.5, 1.0, 1.0, d=1)
    worst = 0.0
    for tau in np.linspace(0.0, 10.0, 21):
        a = fou.autocovariance(p, 0, tau, force_spectral=True)
        b = 0.5 * math.exp(-tau)
        worst = max(worst, abs(a - b) / 0.5)
    return worst < 1e-7, f"max relative gap {worst:.2e}"


def check_closed_kernel() -> tuple[bool, str]:
    worst = 0.0
    for H in (0.3, 0.6, 0.9):
        p = fou.FouParams(H, 1.0, 1.0, d=1)
        r0 = fou.stationary_variance(p, 0)
        for tau in (0.01, 0.3, 2.0, 15.0):
            a = fou.autocovariance(p, 0, tau)
            b = fou.autocovariance(p, 0, tau, method="closed")
            worst = max(worst, abs(a - b) / r0)
    return worst < 1e-8, f"spectral vs closed max gap {worst:.2e} R(0)"


def check_embedding() -> tuple[bool, str]:
    p = fou.FouParams(0.6, 1.0, 1.0, d=1, delta=0.1)
    s = StationarySampler(p, 0.01, 200)
    lo = min(float(sp.min_eigenvalue) for sp in s.spectra)
    return True, f"embedding size {s.m}, min eigenvalue {lo:.2e}"


def check_ground_truth() -> tuple[bool, str]:
    errs = []
    for H in (0.4, 0.5, 0.6):
        gt = ground_truth_wick_mesh(fou.FouParams(H, 1.0, 1.0, d=2, delta=0.1), 4, 256)
        errs.append(shuffle_consistency(gt, 1, 2))
    return max(errs) <= 0.0075, "shuffle defects " + ", ".join(f"{e:.1e}" for e in errs)


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("shuffle identity", check_shuffle),
    ("Chen associativity", check_chen),
    ("reversal cancellation", check_reversal),
    ("brute-force oracle", check_oracle),
    ("level-1 telescoping", check_telescoping),
    ("OU spectral quadrature", check_ou_spectral),
    ("closed vs spectral kernel", check_closed_kernel),
    ("circulant embedding", check_embedding),
    ("ground-truth shuffle", check_ground_truth),
]


def run_checks() -> list[tuple[str, bool, str]]:
    rows = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, ok, detail))
    return rows

