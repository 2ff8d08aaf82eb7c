"""Command-line interface: simulate, ground-truth, estimate, experiment, verify.

Every run writes ``manifest.json`` (resolved arguments, seed, version) into
its output directory; ``--from-manifest`` replays such a run.
Exit codes: 0 success, 1 invalid input, 2 numerical or simulation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .estimator import mse_csv, replicate_mse
from .experiments import KINDS, preset_config, run_experiment
from .fou import FouParams, QuadratureError, covariance_table
from .ground_truth import ground_truth_closed, ground_truth_wick_mesh, mesh_convergence
from .simulate import EmbeddingError, SimSpec, SimulationError, StationarySampler, sample_stationary_path

class UsageError(Exception):
    pass


class VerificationFailure(RuntimeError):
    pass


NUMERIC_ERRORS = (QuadratureError, EmbeddingError, SimulationError, ArithmeticError, VerificationFailure)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# config files and manifests
# ---------------------------------------------------------------------------

def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Lists are comma separated."""
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


_CONFIG_TYPES = {
    "H": lambda s: tuple(float(v) for v in s.split(",")),
    "sweep": lambda s: tuple(int(float(v)) for v in s.split(",")),
    "delta": float, "theta": float, "sigma": float,
    "d": int, "M": int, "reps": int, "bootstrap": int, "seed": int,
    "fixed_K": int, "fixed_n": int, "mesh": int, "threads": int,
    "preset": str, "kind": str,
}


def coerce_config(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in _CONFIG_TYPES:
            raise UsageError(f"unknown config key {key!r}")
        try:
            out[key] = _CONFIG_TYPES[key](value)
        except ValueError as exc:
            raise UsageError(f"bad value for {key!r}: {value!r}") from exc
    return out


def write_manifest(out_dir: str, argv: list[str], args: argparse.Namespace, extra: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "version": __version__,
        "argv": argv,
        "resolved": resolved,
        "seed": resolved.get("seed"),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        extra = dict(extra)
        manifest["argv"] = extra.pop("replay_argv", argv)
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _fou(args) -> FouParams:
    return FouParams(args.H, tuple(args.theta), tuple(args.sigma), d=args.d, delta=args.delta)


def cmd_simulate(args) -> dict:
    spec = SimSpec(_fou(args), args.K, args.n, args.seed)
    path = sample_stationary_path(spec, args.rep)
    f = _write(args.out, "path.csv", path.to_csv())
    print(f"wrote {f} ({len(path.values)} points)")
    return {}


def cmd_ground_truth(args) -> dict:
    p = _fou(args)
    if args.method == "wick_mesh":
        gt = ground_truth_wick_mesh(p, args.M, args.mesh)
    else:
        gt = ground_truth_closed(p, args.M, half_forms=args.half_forms)
    _write(args.out, "ground_truth.csv", gt.tensor.to_csv())
    sidecar = gt.provenance_csv()
    sidecar += f"# method={gt.method}\n# mesh={gt.mesh}\n# quad_epsrel=1e-10 (1D), 1e-9 (2D)\n"
    _write(args.out, "ground_truth_provenance.csv", sidecar)
    if args.dump_cov:
        L = args.mesh
        _write(args.out, "covariance.csv", covariance_table(p, p.delta / (L - 1), L).to_csv())
    if args.convergence:
        meshes = [L for L in (64, 128, 256, 512, 1024, 2048, 4096) if L <= max(args.mesh, 64)]
        rows = mesh_convergence(p, meshes, args.M)
        lines = ["L,level4_norm,gap_to_previous"]
        for r in rows:
            gap = repr(r["gap"]) if "gap" in r else ""
            lines.append(f"{r['L']},{r['level4_norm']!r},{gap}")
        text = "\n".join(lines) + "\n"
        _write(args.out, "mesh_convergence.csv", text)
    print(f"wrote ground truth ({gt.method}) with {len(gt.tensor.coeffs)} coefficients to {args.out}")
    return {"method": gt.method}


def cmd_estimate(args) -> dict:
    from .ground_truth import ground_truth

    p = _fou(args)
    spec = SimSpec(p, args.K, args.n, args.seed)
    gt = ground_truth(p, args.M, "wick_mesh", args.mesh)
    res = replicate_mse(spec, args.M, gt, args.reps, threads=args.threads,
                        sampler=StationarySampler.for_spec(spec))
    _write(args.out, "estimate.csv", mse_csv(res))
    print(f"MSE = {res.mse:.6e} +/- {res.se:.2e} over {res.reps} replications")
    return {"mse": res.mse, "se": res.se}


def cmd_experiment(args) -> dict:
    overrides = {}
    if args.config:
        overrides.update(coerce_config(read_config(args.config)))
    if args.config_json:
        overrides.update(json.loads(args.config_json))
    kind = overrides.pop("kind", args.kind)
    if kind != args.kind:
        raise UsageError(f"config kind {kind!r} does not match subcommand {args.kind!r}")
    preset = args.preset or overrides.pop("preset", "desk")
    overrides.pop("preset", None)
    for key in ("H", "reps", "bootstrap", "seed", "threads", "mesh"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = tuple(val) if key == "H" else val
    if args.sweep:
        overrides["sweep"] = tuple(args.sweep)
    cfg = preset_config(kind, preset, **overrides)

    def progress(cell):
        print(f"  H={cell.H:.2f} x={cell.x:>8d} n={cell.n:>5d} K={cell.K:>8d} "
              f"MSE={cell.mse:.4e} SE={cell.se:.2e}", flush=True)

    res = run_experiment(cfg, out_dir=args.out, progress=progress)
    for H, fit in res.fits.items():
        bound = res.diagnostics[H]["bound"]
        print(f"H={H:.2f} slope={fit.slope:.3f} CI=[{fit.ci_low:.3f}, {fit.ci_high:.3f}] "
              f"R2={fit.r2:.3f} bound={bound:.3f}")
    resolved = cfg.to_dict()
    replay = ["experiment", kind, "--config-json", json.dumps(resolved, sort_keys=True), "--out", args.out]
    return {"config": resolved, "replay_argv": replay}


def cmd_verify(args) -> dict:
    from .checks import run_checks

    rows = run_checks()
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = [name for name, ok, _ in rows if not ok]
    _write(args.out, "verify.csv", "check,passed,detail\n" + "".join(
        f"{name},{int(ok)},\"{detail}\"\n" for name, ok, detail in rows))
    if failed:
        raise VerificationFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    return {}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _model_flags(p: argparse.ArgumentParser, M: bool = True) -> None:
    p.add_argument("--H", type=float, required=True, help="Hurst index in (1/4, 1)")
    p.add_argument("--theta", type=float, nargs="+", default=[1.0])
    p.add_argument("--sigma", type=float, nargs="+", default=[1.0])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1, help="block length")
    if M:
        p.add_argument("--M", type=int, default=4, help="truncation level (<= 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blocksig", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--from-manifest", metavar="PATH",
                        help="replay the run recorded in a manifest (must come first; --out may follow)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample one stationary fOU path")
    _model_flags(s, M=False)
    s.add_argument("--K", type=int, default=1)
    s.add_argument("--n", type=int, default=101)
    s.add_argument("--rep", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out/simulate")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("ground-truth", help="expected truncated signature of one block")
    _model_flags(g)
    g.add_argument("--method", choices=("wick_mesh", "closed"), default="wick_mesh")
    g.add_argument("--mesh", type=int, default=1024)
    g.add_argument("--half-forms", choices=("boundary", "smooth"), default="boundary")
    g.add_argument("--dump-cov", action="store_true", help="also write the covariance table")
    g.add_argument("--convergence", action="store_true",
                   help="also write successive mesh gaps up to --mesh (mesh_convergence.csv)")
    g.add_argument("--out", default="out/ground_truth")
    g.set_defaults(func=cmd_ground_truth)

    e = sub.add_parser("estimate", help="replicated block-average MSE")
    _model_flags(e)
    e.add_argument("--K", type=int, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--reps", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mesh", type=int, default=1024)
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    e.add_argument("--out", default="out/estimate")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="rate experiment with slope fits")
    x.add_argument("kind", choices=KINDS)
    x.add_argument("--preset", choices=("desk", "paper"))
    x.add_argument("--config", help="key = value file mirroring the experiment fields")
    x.add_argument("--config-json", help=argparse.SUPPRESS)
    x.add_argument("--H", type=float, nargs="+")
    x.add_argument("--sweep", type=int, nargs="+")
    x.add_argument("--reps", type=int)
    x.add_argument("--bootstrap", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--mesh", type=int)
    x.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    x.add_argument("--out", default="out/experiment")
    x.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run the quick property suite")
    v.add_argument("--out", default="out/verify")
    v.set_defaults(func=cmd_verify)
    return parser


def _replay_argv(path: str, argv: list[str]) -> list[str]:
    if not os.path.isfile(path):
        raise UsageError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        recorded = json.load(fh)["argv"]
    # an explicit --out on the replay command wins
    if "--out" in argv:
        k = argv.index("--out")
        if "--out" in recorded:
            j = recorded.index("--out")
            recorded[j + 1] = argv[k + 1]
        else:
            recorded += ["--out", argv[k + 1]]
    return recorded


def run_cli(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv[:1] == ["--from-manifest"]:
            if len(argv) < 2:
                raise UsageError("--from-manifest needs a path")
            argv = _replay_argv(argv[1], argv[2:])
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_usage().strip())
        extra = {}
        try:
            extra = args.func(args) or {}
        finally:
            write_manifest(args.out, argv, args, extra)
        return 0
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
