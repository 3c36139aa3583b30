"""Experiment runner: every verification and sweep as a reproducible subcommand.

Subcommands: verify, sweep, rademacher, embedding, build, eval.  Options can
come from flags or a JSON config file (flags win); every run writes its fully
resolved configuration to a metadata file next to the outputs, and CSV bodies
are byte-deterministic for a fixed config (timestamps live in the metadata
only).  Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analysis import RademacherConfig, ShellSpectrum, embedding_series, rademacher_estimate
from .constructor import BuildConfig, build_h1, build_l2
from .metrics import QuadratureSpec, slope_fit, verify_cos_lemma
from .network import build_beta, build_gamma_tail, compose, load_network, save_network
from .spectral import load_target, synth_target

SEED_ENV_VAR = "BARRONFORGE_SEED"


# --- reference formulas for the identity suite -------------------------------

def beta_reference(t) -> np.ndarray:
    """Closed form relu(2t) - 2*relu(2t - 1)."""
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(2.0 * t, 0.0) - 2.0 * np.maximum(2.0 * t - 1.0, 0.0)


def gamma_reference(t, r) -> np.ndarray:
    """Three-branch piecewise definition of the kernel on [0, 1] x [-1/2, 1/2]."""
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    folded = np.minimum(t, 1.0 - t)
    return np.where(
        folded <= np.abs(r),
        np.maximum(r, 0.0),
        folded - np.maximum(-r, 0.0),
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def check_beta_exactness(grid_points: int = 10_001, builder=build_beta) -> CheckResult:
    t = np.linspace(0.0, 1.0, grid_points)
    net = builder()
    dev = float(np.abs(net.eval(t[:, None])[:, 0] - beta_reference(t)).max())
    return CheckResult("beta-exactness", dev, 1e-12)


def check_gamma_exactness(
    t_points: int = 2000, r_points: int = 200, builder=build_gamma_tail
) -> CheckResult:
    t = np.linspace(0.0, 1.0, t_points)
    worst = 0.0
    for r in np.linspace(-0.5, 0.5, r_points):
        net = builder(r)
        dev = np.abs(net.eval(t[:, None])[:, 0] - gamma_reference(t, r)).max()
        worst = max(worst, float(dev))
    return CheckResult("gamma-exactness", worst, 1e-12)


def check_composition_law(
    max_chain: int = 10,
    r_draws: int = 100,
    grid_points: int = 10_000,
    seed: int = 0,
    gamma_builder=build_gamma_tail,
) -> CheckResult:
    """Triangle chain plus kernel tail equals gamma(2^L t mod 1, r) on a grid."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, grid_points)[:, None]
    worst = 0.0
    chain = build_beta()
    for chain_len in range(1, max_chain + 1):
        rs = rng.uniform(-0.5, 0.5, size=r_draws)
        folded = (2.0**chain_len * t[:, 0]) % 1.0
        for r in rs:
            net = compose(gamma_builder(r), chain)
            dev = np.abs(net.eval(t)[:, 0] - gamma_reference(folded, r)).max()
            worst = max(worst, float(dev))
        if chain_len < max_chain:
            chain = compose(build_beta(), chain)
    return CheckResult("composition-law", worst, 1e-9)


def check_cosine_reconstruction(
    max_n: int = 64, t_points: int = 512, quad_points: int = 100_000
) -> CheckResult:
    t_grid = (2.0 * np.arange(t_points) + 1.0) / (2.0 * t_points)
    dev = verify_cos_lemma(range(1, max_n + 1), t_grid, quad_points)
    return CheckResult("cosine-reconstruction", dev, 1e-8)


def check_log_submultiplicative(grid_points: int = 100) -> CheckResult:
    c = np.linspace(0.0, 100.0, grid_points)
    t = np.linspace(0.0, 100.0, grid_points)
    lhs = np.log2(2.0 + np.outer(c, t))
    rhs = np.outer(np.log2(2.0 + c), np.log2(2.0 + t))
    violation = float((lhs - rhs).max())
    return CheckResult("log-submultiplicative", max(violation, 0.0), 1e-12)


def run_identity_checks(seed: int = 0) -> list[CheckResult]:
    return [
        check_beta_exactness(),
        check_gamma_exactness(),
        check_composition_law(seed=seed),
        check_cosine_reconstruction(),
        check_log_submultiplicative(),
    ]


# --- config plumbing ----------------------------------------------------------

class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    resolved = dict(defaults)
    resolved.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _write_meta(path: str, resolved: dict) -> None:
    meta = {
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": resolved,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _derived_seed(parts: list[int]) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _stem(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root if ext else path


# --- subcommands ---------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"seed": _default_seed()})
    checks = run_identity_checks(seed=int(resolved["seed"]))
    name_w = max(len(c.name) for c in checks) + 2
    print(f"{'check':<{name_w}}{'max deviation':>16}{'tolerance':>12}  status")
    failures = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        failures += 0 if c.passed else 1
        print(f"{c.name:<{name_w}}{c.deviation:>16.3e}{c.tolerance:>12.0e}  {status}")
    return 0 if failures == 0 else 1


SWEEP_HEADER = [
    "d", "m", "seed", "variant", "error", "std_err", "error_bound",
    "total_depth", "depth_bound", "retries", "accepted", "C_factor",
]


def run_sweep_cell(
    variant: str,
    d: int,
    m: int,
    seed: int,
    n_modes: int,
    log_exponent: float,
    quad_points: int,
    max_retries: int,
    error_slack: float,
) -> dict:
    """One sweep cell: synthesize the (d, seed) target, build at size m, measure."""
    target = synth_target(d, n_modes, log_exponent, _derived_seed([seed, d, 11]))
    quad = QuadratureSpec("monte-carlo", quad_points, _derived_seed([seed, d, m, 13]))
    config = BuildConfig(
        m=m,
        variant=variant,
        seed=_derived_seed([seed, d, m, 17]),
        quad=quad,
        max_retries=max_retries,
        error_slack=error_slack,
    )
    build = build_l2 if variant == "l2" else build_h1
    _, report = build(target, config)
    return {
        "d": d,
        "m": m,
        "seed": seed,
        "variant": variant,
        "error": report.error_estimate,
        "std_err": report.error_std_err,
        "error_bound": report.error_bound,
        "total_depth": report.total_depth,
        "depth_bound": report.depth_bound,
        "retries": report.retries_used,
        "accepted": report.accepted,
        "C_factor": report.c_factor,
    }


def _sweep_summary(rows: list[dict]) -> list[list]:
    summary = []
    dims = sorted({row["d"] for row in rows})
    for d in dims:
        by_m: dict[int, list[float]] = {}
        for row in rows:
            if row["d"] == d and row["accepted"]:
                by_m.setdefault(row["m"], []).append(row["error"])
        points = [(m, float(np.median(errs))) for m, errs in sorted(by_m.items())]
        if len(points) >= 3:
            slope, intercept, r2 = slope_fit(points)
        else:
            slope = intercept = r2 = math.nan
        summary.append([d, rows[0]["variant"], slope, intercept, r2, len(points)])
    return summary


def _write_sweep_svg(rows: list[dict], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for d in sorted({row["d"] for row in rows}):
        by_m: dict[int, list[float]] = {}
        for row in rows:
            if row["d"] == d and row["accepted"]:
                by_m.setdefault(row["m"], []).append(row["error"])
        ms = sorted(by_m)
        med = [float(np.median(by_m[m])) for m in ms]
        ax.loglog(ms, med, marker="o", label=f"d={d}")
    ax.set_xlabel("m")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_sweep(args: argparse.Namespace) -> int:
    defaults = {
        "variant": "l2",
        "dims": [4],
        "ms": [16, 64, 256],
        "seeds": [_default_seed()],
        "n_modes": 64,
        "log_exponent": 3.0,
        "quad_points": 4096,
        "max_retries": 16,
        "error_slack": 1.0,
        "jobs": 4,
        "svg": False,
        "out": None,
    }
    resolved = _resolve(args, defaults)
    if not resolved["out"]:
        raise UsageError("sweep requires --out")

    cells = [
        (int(d), int(m), int(seed))
        for d in resolved["dims"]
        for m in resolved["ms"]
        for seed in resolved["seeds"]
    ]

    def runner(cell):
        d, m, seed = cell
        return run_sweep_cell(
            resolved["variant"], d, m, seed,
            int(resolved["n_modes"]), float(resolved["log_exponent"]),
            int(resolved["quad_points"]), int(resolved["max_retries"]),
            float(resolved["error_slack"]),
        )

    jobs = max(1, int(resolved["jobs"]))
    with ThreadPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
        rows = list(pool.map(runner, cells))
    rows.sort(key=lambda r: (r["d"], r["m"], r["seed"]))

    out = resolved["out"]
    _write_csv(out, SWEEP_HEADER, [[row[k] for k in SWEEP_HEADER] for row in rows])
    _write_csv(
        _stem(out) + "_summary.csv",
        ["d", "variant", "slope", "intercept", "r2", "points"],
        _sweep_summary(rows),
    )
    _write_meta(_stem(out) + "_meta.json", resolved)
    if resolved["svg"]:
        _write_sweep_svg(rows, _stem(out) + ".svg")
    flagged = sum(1 for row in rows if not row["accepted"])
    print(f"sweep: {len(rows)} cells -> {out} ({flagged} not accepted)")
    return 0


def cmd_rademacher(args: argparse.Namespace) -> int:
    defaults = {
        "d": 4,
        "q": 1.0,
        "ns": [64, 256, 1024, 4096],
        "sigma_draws": 64,
        "shells": 6,
        "candidates_per_shell": 32,
        "seed": _default_seed(),
        "out": None,
    }
    resolved = _resolve(args, defaults)
    if not resolved["out"]:
        raise UsageError("rademacher requires --out")

    rows = []
    for n in sorted(int(v) for v in resolved["ns"]):
        config = RademacherConfig(
            n=n,
            d=int(resolved["d"]),
            Q=float(resolved["q"]),
            sigma_draws=int(resolved["sigma_draws"]),
            shells=int(resolved["shells"]),
            candidates_per_shell=int(resolved["candidates_per_shell"]),
            seed=int(resolved["seed"]),
        )
        estimate, bound = rademacher_estimate(config)
        rows.append([n, config.d, config.Q, config.sigma_draws, estimate, bound])

    out = resolved["out"]
    _write_csv(out, ["n", "d", "Q", "sigma_draws", "estimate", "bound"], rows)
    positive = [(row[0], row[4]) for row in rows if row[4] > 0]
    if len(positive) >= 3:
        slope, intercept, r2 = slope_fit(positive)
    else:
        slope = intercept = r2 = math.nan
    _write_csv(
        _stem(out) + "_summary.csv",
        ["d", "Q", "exponent", "intercept", "r2"],
        [[resolved["d"], resolved["q"], slope, intercept, r2]],
    )
    _write_meta(_stem(out) + "_meta.json", resolved)
    print(f"rademacher: exponent {slope:.4f} -> {out}")
    return 0


def cmd_embedding(args: argparse.Namespace) -> int:
    defaults = {
        "construction": "uniform-shell",
        "d": 4,
        "s": 3.0,
        "p": None,
        "shells_max": 60,
        "out": None,
    }
    resolved = _resolve(args, defaults)
    if not resolved["out"]:
        raise UsageError("embedding requires --out")
    spec = ShellSpectrum(
        d=int(resolved["d"]),
        s=float(resolved["s"]),
        construction=resolved["construction"],
        K=int(resolved["shells_max"]),
        p=None if resolved["p"] is None else float(resolved["p"]),
    )
    series = embedding_series(spec)
    rows = [
        [
            int(series.k[i]),
            series.hs_increment_log2[i],
            series.hs_partial_log2[i],
            series.blog_increment_log2[i],
            series.blog_partial_log2[i],
        ]
        for i in range(spec.K)
    ]
    out = resolved["out"]
    _write_csv(
        out,
        ["k", "hs_increment_log2", "hs_partial_log2", "blog_increment_log2", "blog_partial_log2"],
        rows,
    )
    verdicts = []
    for name, v in (("hs", series.hs_verdict), ("blog", series.blog_verdict)):
        verdicts.append(
            [name, v.is_cauchy, v.growing, v.ratio_estimate, v.fitted_power, v.last_rel_increment]
        )
    _write_csv(
        _stem(out) + "_summary.csv",
        ["series", "is_cauchy", "growing", "ratio_estimate", "fitted_power", "last_rel_increment"],
        verdicts,
    )
    _write_meta(_stem(out) + "_meta.json", resolved)
    print(
        f"embedding {spec.construction}: hs cauchy={series.hs_verdict.is_cauchy} "
        f"blog cauchy={series.blog_verdict.is_cauchy} -> {out}"
    )
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    defaults = {
        "target": None,
        "variant": "l2",
        "m": 64,
        "seed": _default_seed(),
        "quad_points": 4096,
        "quad_kind": "monte-carlo",
        "max_retries": 16,
        "error_slack": 1.0,
        "out": None,
    }
    resolved = _resolve(args, defaults)
    if not resolved["target"] or not resolved["out"]:
        raise UsageError("build requires --target and --out")
    try:
        target = load_target(resolved["target"])
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load target: {exc}") from exc
    quad = QuadratureSpec(
        resolved["quad_kind"], int(resolved["quad_points"]),
        _derived_seed([int(resolved["seed"]), 13]),
    )
    config = BuildConfig(
        m=int(resolved["m"]),
        variant=resolved["variant"],
        seed=int(resolved["seed"]),
        quad=quad,
        max_retries=int(resolved["max_retries"]),
        error_slack=float(resolved["error_slack"]),
    )
    build = build_l2 if config.variant == "l2" else build_h1
    net, report = build(target, config)
    stem = _stem(resolved["out"])
    save_network(net, stem + ".network.json")
    with open(stem + ".report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
    _write_meta(stem + "_meta.json", resolved)
    status = "accepted" if report.accepted else "NOT accepted"
    print(
        f"build {config.variant} m={config.m}: error {report.error_estimate:.6g} "
        f"(bound {report.error_bound:.6g}), depth {report.total_depth} "
        f"(budget {report.depth_bound:.6g}), {status} after {report.retries_used} retries"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.network:
        raise UsageError("eval requires --network")
    try:
        net = load_network(args.network)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load network: {exc}") from exc
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            point = [float(tok) for tok in line.replace(",", " ").split()]
        except ValueError as exc:
            raise UsageError(f"bad point {line!r}: {exc}") from exc
        if len(point) != net.input_dim:
            raise UsageError(
                f"point has {len(point)} components, network expects {net.input_dim}"
            )
        value = net.eval(np.asarray(point))
        print(" ".join(repr(float(v)) for v in np.atleast_1d(value)))
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barronforge",
        description="Constructive deep narrow ReLU approximation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the exactness and identity suite")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="build/measure sweep over (d, m, seed) cells")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--variant", choices=["l2", "h1"])
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--ms", type=int, nargs="+")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--log-exponent", dest="log_exponent", type=float)
    p.add_argument("--quad-points", dest="quad_points", type=int)
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--error-slack", dest="error_slack", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--svg", action="store_const", const=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rademacher", help="complexity estimate scaling run")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--d", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--ns", type=int, nargs="+")
    p.add_argument("--sigma-draws", dest="sigma_draws", type=int)
    p.add_argument("--shells", type=int)
    p.add_argument("--candidates-per-shell", dest="candidates_per_shell", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_rademacher)

    p = sub.add_parser("embedding", help="dyadic shell series run")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--construction", choices=["uniform-shell", "thin-set"])
    p.add_argument("--d", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--shells-max", dest="shells_max", type=int)
    p.set_defaults(func=cmd_embedding)

    p = sub.add_parser("build", help="single build: write network and report JSON")
    p.add_argument("--config")
    p.add_argument("--target")
    p.add_argument("--out")
    p.add_argument("--variant", choices=["l2", "h1"])
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--quad-points", dest="quad_points", type=int)
    p.add_argument("--quad-kind", dest="quad_kind", choices=["monte-carlo", "tensor-grid"])
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--error-slack", dest="error_slack", type=float)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="evaluate a saved network at stdin points")
    p.add_argument("--network")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
