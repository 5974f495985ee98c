"""Command-line front end.

Subcommands: estimate, generate, theory, calibrate, test, regress, study.
Exit codes: 0 success, 2 validation error, 3 partial per-row failure.
Reports are delimited (CSV + JSON sidecars); ``--figure`` additionally
renders a matplotlib figure next to the tabular output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .dependence import NullCalibration, calibrate_null, independence_test
from .engine import (
    RandomBreak,
    Reject,
    SampleMatrix,
    default_subsample_count,
    estimate_exhaustive,
    estimate_random,
)
from .exact import identity_suite, stirling_bound_check
from .generators import GeneratorSpec, generate
from .nulltheory import moment_summary
from .smoothing import conditional_slice, fit_joint_model
from .studies import load_experiment_spec, run_experiment_spec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _tie_policy(name: str, seed: int):
    return RandomBreak(seed) if name == "random-break" else Reject()


def _figure_path(requested: str | None, output: str | None, default_stem: str) -> Path:
    if requested:
        return Path(requested)
    base = Path(output) if output else Path(default_stem)
    return base.with_suffix(".png")


# -- subcommand handlers -----------------------------------------------------------


def _cmd_estimate(args) -> int:
    sample = SampleMatrix.from_csv(args.input)
    policy = _tie_policy(args.tie_policy, args.seed)
    if args.exhaustive:
        grid = estimate_exhaustive(sample, args.m, tie_policy=policy)
        strategy = {"strategy": "exhaustive", "b": None, "seed": None}
    else:
        b = args.subsamples or default_subsample_count(args.m, sample.d)
        grid = estimate_random(
            sample, args.m, b, args.seed, tie_policy=policy, threads=args.threads
        )
        strategy = {"strategy": "random", "b": b, "seed": args.seed}
    meta = {"n": sample.n, **strategy}
    out = Path(args.output or "grid.csv")
    grid.to_csv(out, metadata=meta)
    if args.figure is not False:
        if sample.d == 2:
            fig = plotting.save_grid_bubbles(grid, _figure_path(args.figure, args.output, "grid"))
            print(f"figure written to {fig}")
        else:
            print("figure skipped: bubble plot is defined for d = 2 only", file=sys.stderr)
    print(f"grid written to {out} (m={grid.m}, d={grid.d}, total_weight={grid.total_weight})")
    return EXIT_OK


def _cmd_generate(args) -> int:
    if args.spec:
        payload = json.loads(Path(args.spec).read_text())
        spec = GeneratorSpec(**payload)
    else:
        spec = GeneratorSpec(
            kind=args.kind,
            n=args.n,
            d=args.d,
            seed=args.seed,
            p=args.p,
            coef=args.coef,
            a=args.a,
            dep_dim=args.dep_dim,
            rho=args.rho,
        )
    sample = generate(spec)
    out = Path(args.output or "sample.csv")
    sample.to_csv(out)
    print(f"{sample.n} x {sample.d} sample ({spec.kind}) written to {out}")
    return EXIT_OK


def _cmd_theory(args) -> int:
    payload: dict = {"m": args.m}
    if args.identities:
        suite = identity_suite(args.m)
        payload["identities"] = {
            "all_passed": suite.all_passed,
            "checks": [
                {"name": c.name, "lhs": str(c.lhs), "rhs": str(c.rhs), "passed": c.passed}
                for c in suite.checks
            ],
        }
    if args.stirling:
        rep = stirling_bound_check(args.stirling)
        payload["stirling_bound"] = {
            "m_max": rep.m_max,
            "all_within_bounds": rep.all_within_bounds,
            "c_min": rep.c_min,
            "c_max": rep.c_max,
            "violations": list(rep.violations),
        }
    payload["moments"] = [moment_summary(args.m, d) for d in args.d]
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(f"m = {args.m}")
        if "identities" in payload:
            print(f"  identity suite: {'PASS' if payload['identities']['all_passed'] else 'FAIL'}")
        if "stirling_bound" in payload:
            sb = payload["stirling_bound"]
            ok = "PASS" if sb["all_within_bounds"] else "FAIL"
            print(f"  stirling bound (m <= {sb['m_max']}): {ok}  c in [{sb['c_min']:.6f}, {sb['c_max']:.6f}]")
        for row in payload["moments"]:
            print(
                f"  d={row['d']}: E(T)n -> {row['mean_limit']} = {row['mean_limit_float']:.6g}; "
                f"Var(T)n^2 -> {row['var_limit_sign_corrected']} = "
                f"{row['var_limit_sign_corrected_float']:.6g} (sign-corrected)"
            )
            print(
                f"        printed-variant variance = {row['var_limit_printed_float']:.6g} "
                f"(discrepancy {row['variance_variant_discrepancy_float']:.6g}); "
                f"approx = {row['variance_approx']:.6g}"
            )
        first = payload["moments"][0]
        print(
            f"  border dimension: {first['border_dimension_sign_corrected']} (sign-corrected), "
            f"{first['border_dimension_printed']} (printed)"
        )
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    calib = calibrate_null(
        args.m,
        args.d,
        args.n,
        args.subsamples,
        args.sims,
        args.seed,
        args.statistic,
        threads=args.threads,
        cache_dir=args.cache_dir,
    )
    out = Path(args.output or "calibration.json")
    calib.to_json(out)
    print(f"calibration ({calib.n_sims} draws) written to {out}")
    return EXIT_OK


def _cmd_test(args) -> int:
    sample = SampleMatrix.from_csv(args.input)
    if args.calibration:
        calib = NullCalibration.from_json(args.calibration)
    else:
        b = args.subsamples or default_subsample_count(args.m, sample.d)
        calib = calibrate_null(
            args.m,
            sample.d,
            sample.n,
            b,
            args.sims,
            args.seed,
            args.statistic,
            threads=args.threads,
            cache_dir=args.cache_dir,
        )
    result = independence_test(sample, calib, args.level)
    print(json.dumps(result.to_dict(), indent=2))
    return EXIT_OK


def _parse_condition(expr: str) -> dict[int, float]:
    fixed: dict[int, float] = {}
    for part in expr.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, value = part.partition("=")
        name = name.strip().lower()
        if not name.startswith("x"):
            raise ValueError(f"condition terms look like x3=0, got {part!r}")
        fixed[int(name[1:]) - 1] = float(value)
    return fixed


def _parse_grid(expr: str) -> tuple[int, int]:
    nx, _, ny = expr.lower().partition("x")
    return int(nx), int(ny or nx)


def _cmd_regress(args) -> int:
    sample = SampleMatrix.from_csv(args.input)
    b = args.subsamples or default_subsample_count(args.m, sample.d)
    model = fit_joint_model(sample, args.m, b, args.seed, threads=args.threads)
    fixed = _parse_condition(args.condition) if args.condition else {}
    free = [l for l in range(sample.d) if l not in fixed]
    if len(free) != 2:
        raise ValueError(
            f"conditioning must leave exactly two free coordinates, got {len(free)}"
        )
    nx, ny = _parse_grid(args.grid)
    if args.range and args.range != "auto":
        lo, _, hi = args.range.partition(":")
        x_lo = y_lo = float(lo)
        x_hi = y_hi = float(hi)
    else:
        vx, vy = sample.values[:, free[0]], sample.values[:, free[1]]
        mx, my = 0.1 * (vx.max() - vx.min()), 0.1 * (vy.max() - vy.min())
        x_lo, x_hi = vx.min() - mx, vx.max() + mx
        y_lo, y_hi = vy.min() - my, vy.max() + my
    xs = np.linspace(x_lo, x_hi, nx)
    ys = np.linspace(y_lo, y_hi, ny)
    _, field = conditional_slice(model, fixed, xs, ys)
    out = Path(args.output or "slice.csv")
    with out.open("w") as fh:
        fh.write("x,y,density\n")
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                fh.write(f"{float(x)!r},{float(y)!r},{float(field[i, j])!r}\n")
    print(f"conditional slice ({nx} x {ny}) written to {out}")
    if args.figure is not False:
        fig = plotting.save_slice_heatmap(
            xs, ys, field, _figure_path(args.figure, args.output, "slice"),
            title=f"conditioned on {args.condition}" if args.condition else None,
        )
        print(f"figure written to {fig}")
    if args.sample:
        pts = model.sample(args.sample, args.seed + 1)
        sample_out = Path(args.sample_output or "synthetic.csv")
        SampleMatrix(pts).to_csv(sample_out)
        print(f"{args.sample} synthetic observations written to {sample_out}")
    return EXIT_OK


def _cmd_study(args) -> int:
    spec = load_experiment_spec(args.spec)
    if spec["kind"] != args.kind:
        raise ValueError(f"spec kind {spec['kind']!r} does not match subcommand {args.kind!r}")
    report = run_experiment_spec(spec, seed=args.seed if args.seed_set else None, threads=args.threads)
    out = Path(args.output or f"{args.kind}_study.csv")
    report.write(out)
    print(f"{args.kind} study written to {out} ({len(report.rows)} rows)")
    if args.figure is not False and args.kind == "convergence":
        values: dict[str, np.ndarray] = {}
        for row in report.rows:
            if row.get("section") == "cell_distribution":
                values.setdefault(row["cell"], []).append(row["p_hat"])
        if values:
            fig = plotting.save_cell_histograms(
                {k: np.asarray(v) for k, v in values.items()},
                _figure_path(args.figure, args.output, f"{args.kind}_study"),
            )
            print(f"figure written to {fig}")
    if report.metadata.get("partial_failure") or any("error" in r for r in report.rows):
        return EXIT_PARTIAL
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranksub",
        description="Rank-grid dependence estimation by sub-sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--output", type=str, default=None, help="output path")

    p = sub.add_parser("estimate", help="estimate the rank grid of a CSV sample")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, required=True, help="sub-sample size")
    p.add_argument("--exhaustive", action="store_true", help="enumerate all C(n,m) sub-samples")
    p.add_argument("-b", "--subsamples", type=int, default=None, help="random sub-sample count")
    p.add_argument("--tie-policy", choices=["reject", "random-break"], default="reject")
    p.add_argument("--figure", nargs="?", const=None, default=False, help="render a bubble figure")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("generate", help="generate a simulated sample")
    add_common(p)
    p.add_argument("--spec", type=str, default=None, help="generator spec JSON file")
    p.add_argument(
        "--kind",
        choices=[
            "independent_gaussian",
            "polynomial",
            "random_volatility",
            "comonotone",
            "sphere_noise",
            "gaussian_copula",
        ],
        default="independent_gaussian",
    )
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=int, default=1, help="polynomial power")
    p.add_argument("--coef", type=float, default=0.5, help="polynomial coefficient")
    p.add_argument("--a", type=float, default=0.0, help="volatility scale / sphere radius")
    p.add_argument("--dep-dim", type=int, default=2, help="random-volatility dependent coordinates")
    p.add_argument("--rho", type=float, default=0.0, help="gaussian copula equicorrelation")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("theory", help="exact null moments, identities, border dimension")
    add_common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, nargs="+", default=[2], help="dimensions to report")
    p.add_argument("--identities", action="store_true", help="run the exact identity suite")
    p.add_argument("--stirling", type=int, default=0, help="check the c_m bound up to this m")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(handler=_cmd_theory)

    p = sub.add_parser("calibrate", help="simulate the null distribution of the statistic")
    add_common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("-b", "--subsamples", type=int, required=True)
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--statistic", choices=["kl", "l2"], default="kl")
    p.add_argument("--cache-dir", type=str, default=None)
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("test", help="test independence of a CSV sample")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("-b", "--subsamples", type=int, default=None)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--statistic", choices=["kl", "l2"], default="kl")
    p.add_argument("--calibration", type=str, default=None, help="calibration JSON from `calibrate`")
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--cache-dir", type=str, default=None)
    p.set_defaults(handler=_cmd_test)

    p = sub.add_parser("regress", help="smoothed joint density and conditional slices")
    add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("-b", "--subsamples", type=int, default=None)
    p.add_argument("--condition", type=str, default="", help='e.g. "x3=0,x4=0,x5=0"')
    p.add_argument("--grid", type=str, default="50x50")
    p.add_argument("--range", type=str, default="auto", help='"auto" or "lo:hi"')
    p.add_argument("--figure", nargs="?", const=None, default=False, help="render a heatmap figure")
    p.add_argument("--sample", type=int, default=0, help="emit this many synthetic points")
    p.add_argument("--sample-output", type=str, default=None)
    p.set_defaults(handler=_cmd_regress)

    p = sub.add_parser("study", help="run a reproduction study from a JSON spec")
    add_common(p)
    p.add_argument("kind", choices=["moment", "power", "convergence"])
    p.add_argument("--spec", required=True, help="experiment spec JSON")
    p.add_argument("--figure", nargs="?", const=None, default=False)
    p.set_defaults(handler=_cmd_study)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_set = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
