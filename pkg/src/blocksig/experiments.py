"""Rate experiments: bias in n, variance in K, and budget allocation in N.

Each experiment sweeps one parameter per Hurst index, estimates the mean
squared HS error by replication, and fits a log-log OLS slope with a pairs
bootstrap confidence interval. Target slopes come from ``theory_exponents``.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .estimator import MseResult, block_signatures, replicate_estimates, summarize
from .fou import FouParams, optimal_allocation, theory_exponents
from .ground_truth import DEFAULT_MESH, expected_pl_signature, ground_truth
from .simulate import SimSpec, StationarySampler
from .tensor import level_slice

KINDS = ("bias", "variance", "allocation")


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    H: tuple = (0.40, 0.50, 0.60)
    sweep: tuple = ()
    delta: float = 0.1
    theta: float = 1.0
    sigma: float = 1.0
    d: int = 2
    M: int = 4
    reps: int = 200
    bootstrap: int = 2000
    seed: int = 20240601
    preset: str = "desk"
    fixed_K: int = 10_000
    fixed_n: int = 100
    mesh: int = DEFAULT_MESH
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if len(self.sweep) < 4:
            raise ValueError("sweep needs at least 4 points")
        if self.reps < 2:
            raise ValueError("reps must be >= 2")
        if self.bootstrap < 100:
            raise ValueError("bootstrap resamples must be >= 100")
        for h in self.H:
            if not 0.25 < h < 1.0:
                raise ValueError(f"H={h} outside (1/4, 1)")
        object.__setattr__(self, "H", tuple(float(h) for h in self.H))
        object.__setattr__(self, "sweep", tuple(int(v) for v in self.sweep))

    def fou(self, H: float) -> FouParams:
        return FouParams(H, self.theta, self.sigma, d=self.d, delta=self.delta)

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "desk": {
        "bias": dict(delta=1.0, fixed_K=10_000, sweep=(3, 5, 9, 17, 33)),
        "variance": dict(delta=0.1, fixed_n=100, sweep=(64, 128, 256, 512, 1024)),
        "allocation": dict(delta=0.1, sweep=(10**2, 10**3, 10**4, 10**5)),
        "common": dict(reps=200, bootstrap=2000),
    },
    "paper": {
        "bias": dict(delta=1.0, fixed_K=1_000_000, sweep=(3, 5, 9, 17, 33)),
        "variance": dict(delta=0.1, fixed_n=1000, sweep=(64, 128, 256, 512, 1024, 2048)),
        "allocation": dict(delta=0.1, sweep=tuple(10**k for k in range(2, 8))),
        "common": dict(reps=1000, bootstrap=10_000),
    },
}


def preset_config(kind: str, preset: str = "desk", **overrides) -> ExperimentConfig:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    if kind not in KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    if preset == "paper":
        warnings.warn("paper preset: full published scale, expect hours of runtime and "
                      "several GB of memory per bias path", RuntimeWarning, stacklevel=2)
    kw = dict(PRESETS[preset]["common"])
    kw.update(PRESETS[preset][kind])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(kind=kind, preset=preset, **kw)


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    ci_low: float = math.nan
    ci_high: float = math.nan
    n_points: int = 0


def _loglog(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DataError("points must be (x, y) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DataError("log-log regression needs finite positive x and y")
    return np.log10(pts[:, 0]), np.log10(pts[:, 1])


def ols_loglog(points) -> RegressionResult:
    """Least squares of log10(y) on log10(x)."""
    x, y = _loglog(points)
    if len(x) < 2:
        raise DataError("need at least 2 points")
    if np.ptp(x) == 0:
        raise DataError("x values are all equal")
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionResult(slope, intercept, r2, n_points=len(x))


def pairs_bootstrap_ci(points, B: int, seed: int, level: float = 0.95) -> tuple[float, float]:
    """Percentile CI of the OLS slope over B resamples of (x, y) pairs.

    Resamples whose x values are all identical are redrawn.
    """
    x, y = _loglog(points)
    k = len(x)
    if k < 3:
        raise DataError("bootstrap needs at least 3 points")
    if B < 100:
        raise DataError("need B >= 100 resamples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, k, size=(B, k))
    while True:
        bad = np.ptp(x[idx], axis=1) == 0
        if not bad.any():
            break
        idx[bad] = rng.integers(0, k, size=(int(bad.sum()), k))
    xb, yb = x[idx], y[idx]
    xc = xb - xb.mean(axis=1, keepdims=True)
    slopes = np.sum(xc * (yb - yb.mean(axis=1, keepdims=True)), axis=1) / np.sum(xc * xc, axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(slopes, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def fit_slope(points, B: int, seed: int) -> RegressionResult:
    """OLS fit plus bootstrap CI; the CI is widened to contain the point estimate."""
    fit = ols_loglog(points)
    if len(points) < 3:
        return fit
    lo, hi = pairs_bootstrap_ci(points, B, seed)
    return replace(fit, ci_low=min(lo, fit.slope), ci_high=max(hi, fit.slope))


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

def bound_slope(kind: str, H: float) -> float:
    e = theory_exponents(H)
    return {"bias": -e.gamma, "variance": -e.eta, "allocation": -e.combined}[kind]


@dataclass
class Cell:
    H: float
    x: int
    n: int
    K: int
    result: MseResult
    exact_bias_sq: float = math.nan

    @property
    def mse(self) -> float:
        return self.result.mse

    @property
    def se(self) -> float:
        return self.result.se


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def cells_for(self, H: float) -> list:
        return [c for c in self.cells if c.H == H]


def cell_design(cfg: ExperimentConfig, H: float, value: int) -> tuple[int, int]:
    """(n, K) for one sweep value."""
    if cfg.kind == "bias":
        return value, cfg.fixed_K
    if cfg.kind == "variance":
        return cfg.fixed_n, value
    e = theory_exponents(H)
    return optimal_allocation(value, e.gamma, e.eta)


def sweep_x(cfg: ExperimentConfig, value: int) -> int:
    return value - 1 if cfg.kind == "bias" else value


def _cell_seed(cfg: ExperimentConfig, H: float, value: int) -> int:
    # distinct, reproducible stream family per cell
    return (cfg.seed * 1_000_003 + int(round(H * 1000)) * 7919 + value) % (2**63)


def run_cell(cfg: ExperimentConfig, H: float, value: int) -> Cell:
    p = cfg.fou(H)
    gt = ground_truth(p, cfg.M, "wick_mesh", cfg.mesh)
    n, K = cell_design(cfg, H, value)
    spec = SimSpec(p, K, n, _cell_seed(cfg, H, value))
    ests = replicate_estimates(spec, cfg.M, cfg.reps, threads=cfg.threads)
    res = summarize(ests, gt)
    cell = Cell(H, sweep_x(cfg, value), n, K, res)
    if cfg.kind == "bias":
        mean_pl = expected_pl_signature(p, cfg.M, n).tensor.coeffs
        cell.exact_bias_sq = float(np.sum((mean_pl - gt.tensor.coeffs) ** 2))
    return cell


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None, progress=None) -> ExperimentResult:
    """Run every (H, sweep value) cell, fit slopes, and optionally write outputs.

    If a cell fails, the cells completed so far are written before the
    exception propagates.
    """
    result = ExperimentResult(cfg)
    try:
        for H in cfg.H:
            for value in cfg.sweep:
                cell = run_cell(cfg, H, value)
                result.cells.append(cell)
                if progress:
                    progress(cell)
            _fit_panel(result, H)
    finally:
        if out_dir is not None:
            write_outputs(result, out_dir)
    return result


def _fit_panel(result: ExperimentResult, H: float) -> None:
    cfg = result.config
    cells = result.cells_for(H)
    pts = [(c.x, c.mse) for c in cells]
    seed = _cell_seed(cfg, H, 0) + 17
    result.fits[H] = fit_slope(pts, cfg.bootstrap, seed)
    diag = {"bound": bound_slope(cfg.kind, H)}
    if cfg.kind == "bias":
        exact = [(c.x, c.exact_bias_sq) for c in cells if c.exact_bias_sq > 0]
        if len(exact) >= 2:
            diag["exact_bias_slope"] = ols_loglog(exact).slope
        debiased = [(c.x, c.result.debiased_mean_error_sq) for c in cells]
        if all(v > 0 for _, v in debiased):
            diag["mean_error_slope"] = ols_loglog(debiased).slope
    result.diagnostics[H] = diag


# ---------------------------------------------------------------------------
# level-wise variance concentration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelShares:
    levels: tuple
    variances: np.ndarray
    shares: np.ndarray


def levelwise_report(spec: SimSpec, M: int, reps: int, threads: int = 1) -> LevelShares:
    """Share of each level m >= 2 in the total block-signature variance.

    Per-word variances are pooled over all K blocks of all replications.
    """
    if M < 2:
        raise ValueError("need M >= 2")
    if reps < 1:
        raise ValueError("need reps >= 1")
    d = spec.fou.d
    sampler = StationarySampler.for_spec(spec)
    # pooled mean/variance, merged replication by replication (Chan et al.)
    count, mean, m2 = 0, None, None
    for rep in range(reps):
        sigs = block_signatures(sampler.sample(rep, spec.master_seed), spec.K, spec.n, M)
        k = len(sigs)
        mu = sigs.mean(axis=0)
        sq = np.sum((sigs - mu) ** 2, axis=0)
        if mean is None:
            count, mean, m2 = k, mu, sq
            continue
        delta = mu - mean
        total = count + k
        mean = mean + delta * k / total
        m2 = m2 + sq + delta**2 * count * k / total
        count = total
    var = m2 / (count - 1)
    levels = tuple(range(2, M + 1))
    per_level = np.array([var[level_slice(d, m)].sum() for m in levels])
    return LevelShares(levels, per_level, per_level / per_level.sum())


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _h_tag(H: float) -> str:
    return f"{H:.2f}"


SWEEP_NAME = {"bias": "n_minus_1", "variance": "K", "allocation": "N"}


def panel_csv(result: ExperimentResult, H: float) -> str:
    kind = result.config.kind
    header = [SWEEP_NAME[kind], "mse", "se", "n", "K", "reps", "mean_error_sq_debiased"]
    if kind == "bias":
        header.append("exact_bias_sq")
    header += [f"level{m}_mse" for m in range(1, result.config.M + 1)]
    lines = [",".join(header)]
    for c in result.cells_for(H):
        row = [c.x, repr(c.mse), repr(c.se), c.n, c.K, c.result.reps, repr(c.result.debiased_mean_error_sq)]
        if kind == "bias":
            row.append(repr(c.exact_bias_sq))
        row += [repr(float(v)) for v in c.result.level_mse[1:]]
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def slopes_csv(result: ExperimentResult) -> str:
    lines = ["H,slope,ci_low,ci_high,r2,bound,points"]
    for H, f in result.fits.items():
        b = result.diagnostics[H]["bound"]
        lines.append(f"{_h_tag(H)},{f.slope!r},{f.ci_low!r},{f.ci_high!r},{f.r2!r},{b!r},{f.n_points}")
    return "\n".join(lines) + "\n"


def write_outputs(result: ExperimentResult, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    kind = result.config.kind
    written = []
    for H in result.config.H:
        if not result.cells_for(H):
            continue
        path = os.path.join(out_dir, f"{kind}_{_h_tag(H)}.csv")
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(panel_csv(result, H))
        written.append(path)
    if result.fits:
        path = os.path.join(out_dir, f"{kind}_slopes.csv")
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(slopes_csv(result))
        written.append(path)
        from .plotting import experiment_svg
        path = os.path.join(out_dir, f"{kind}.svg")
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(experiment_svg(result))
        written.append(path)
    return written
