"""Block-averaging estimator of the expected signature and its error metrics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ground_truth import GroundTruth
from .signature import signature_arrays
from .simulate import SampledPath, SimSpec, StationarySampler, block_view
from .tensor import ShapeError, TruncatedTensor, level_slice


def block_signatures(values: np.ndarray, K: int, n: int, M: int) -> np.ndarray:
    """Signatures of the K blocks of one path, shape (K, dim)."""
    try:
        blocks = block_view(values, K, n)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return signature_arrays(blocks, M)


def block_average_estimate(path: SampledPath, M: int) -> TruncatedTensor:
    """Mean of the K block signatures, accumulated in block order."""
    d = path.values.shape[1]
    sigs = block_signatures(path.values, path.K, path.n, M)
    est = sigs.mean(axis=0)
    est[0] = 1.0
    return TruncatedTensor(d, M, est)


def level_squared_errors(estimate: np.ndarray, target: np.ndarray, d: int, M: int) -> np.ndarray:
    """Squared HS error of each level, shape (..., M + 1)."""
    diff = np.asarray(estimate) - np.asarray(target)
    return np.stack([np.sum(diff[..., level_slice(d, m)] ** 2, axis=-1) for m in range(M + 1)], axis=-1)


@dataclass(frozen=True, eq=False)
class EstimateRecord:
    estimate: TruncatedTensor
    K: int
    n: int
    delta: float
    H: float
    level_squared_error: np.ndarray

    @property
    def squared_error(self) -> float:
        return float(self.level_squared_error.sum())


def estimate_record(path: SampledPath, gt: GroundTruth, H: float, delta: float) -> EstimateRecord:
    est = block_average_estimate(path, gt.M)
    lse = level_squared_errors(est.coeffs, gt.tensor.coeffs, gt.d, gt.M)
    return EstimateRecord(est, path.K, path.n, delta, H, lse)


def jackknife_se(x: np.ndarray) -> float:
    """Leave-one-out jackknife standard error of the sample mean."""
    x = np.asarray(x, dtype=np.float64)
    R = len(x)
    if R < 2:
        raise ValueError("need at least two replications")
    loo = (x.sum() - x) / (R - 1)
    return float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True, eq=False)
class MseResult:
    """Replication summary of ||estimate - E[S]||^2_HS."""

    mse: float
    se: float
    level_mse: np.ndarray
    per_rep: np.ndarray = field(repr=False)
    per_rep_levels: np.ndarray = field(repr=False)
    mean_estimate: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    reps: int = 0
    estimate_var: np.ndarray = field(default=None, repr=False)

    @property
    def mean_error_sq(self) -> float:
        """||mean over reps of the estimate - E[S]||^2 (bias diagnostic)."""
        return float(np.sum((self.mean_estimate - self.target) ** 2))

    @property
    def debiased_mean_error_sq(self) -> float:
        """mean_error_sq with the Monte Carlo part (trace of Cov / reps) removed."""
        return self.mean_error_sq - float(np.sum(self.estimate_var)) / self.reps


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def replicate_estimates(spec: SimSpec, M: int, reps: int, *, threads: int = 1,
                        sampler: StationarySampler | None = None, first_rep: int = 0) -> np.ndarray:
    """Block-average estimates of ``reps`` independent paths, shape (reps, dim)."""
    sampler = sampler or StationarySampler.for_spec(spec)

    def one(rep: int) -> np.ndarray:
        values = sampler.sample(rep, spec.master_seed)
        est = block_signatures(values, spec.K, spec.n, M).mean(axis=0)
        est[0] = 1.0
        return est

    return np.array(_map(one, range(first_rep, first_rep + reps), threads))


def replicate_mse(spec: SimSpec, M: int, gt: GroundTruth, reps: int, *, threads: int = 1,
                  sampler: StationarySampler | None = None) -> MseResult:
    """Mean squared HS error over independent replications, with per-level split."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    if gt.M != M or gt.d != spec.fou.d:
        raise ShapeError(f"ground truth is (d={gt.d}, M={gt.M}), expected (d={spec.fou.d}, M={M})")
    ests = replicate_estimates(spec, M, reps, threads=threads, sampler=sampler)
    return summarize(ests, gt)


def summarize(ests: np.ndarray, gt: GroundTruth) -> MseResult:
    target = gt.tensor.coeffs
    levels = level_squared_errors(ests, target, gt.d, gt.M)
    per_rep = levels.sum(axis=1)
    return MseResult(
        mse=float(per_rep.mean()),
        se=jackknife_se(per_rep),
        level_mse=levels.mean(axis=0),
        per_rep=per_rep,
        per_rep_levels=levels,
        mean_estimate=ests.mean(axis=0),
        target=np.array(target),
        reps=len(ests),
        estimate_var=ests.var(axis=0, ddof=1),
    )


def mse_csv(result: MseResult) -> str:
    M = result.per_rep_levels.shape[1] - 1
    lines = ["rep,total_sq_err," + ",".join(f"level{m}_sq_err" for m in range(1, M + 1))]
    for r, (tot, lv) in enumerate(zip(result.per_rep, result.per_rep_levels)):
        lines.append(f"{r},{tot!r}," + ",".join(repr(float(x)) for x in lv[1:]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class MonteCarloSignature:
    mean: TruncatedTensor
    se: np.ndarray
    reps: int


def mc_expected_signature(p, M: int, n_points: int, reps: int, master_seed: int = 0,
                          chunk: int = 5000) -> MonteCarloSignature:
    """Monte Carlo E[S^(M)] of one block sampled on ``n_points`` grid points."""
    if reps < 2:
        raise ValueError("need reps >= 2")
    sampler = StationarySampler(p, p.delta / (n_points - 1), n_points)
    total = None
    total_sq = None
    for start in range(0, reps, chunk):
        stop = min(reps, start + chunk)
        sigs = signature_arrays(sampler.sample_many(range(start, stop), master_seed), M)
        s, s2 = sigs.sum(axis=0), (sigs**2).sum(axis=0)
        total = s if total is None else total + s
        total_sq = s2 if total_sq is None else total_sq + s2
    mean = total / reps
    var = np.maximum(total_sq / reps - mean**2, 0.0) * reps / (reps - 1)
    return MonteCarloSignature(TruncatedTensor(p.d, M, mean), np.sqrt(var / reps), reps)
