"""Command-line surface for the certificate library.

Exit codes: 0 every certified check passed, 1 a bound check failed, 2 usage
or input error, 3 numerical error (singular kernel, non-convergence,
infeasible primal).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .data import (
    GaussianKernel,
    LinearKernel,
    PolynomialKernel,
    Task,
    load_csv,
    split_by_indices,
)
from .errors import GenboundError, InvalidInputError, NumericalError
from .experiments import (
    SCENARIOS,
    TrialConfig,
    emit_report,
    run,
)
from .interpolation import (
    DissimilarityMethod,
    dissimilarity_crude,
    dissimilarity_eig,
    dissimilarity_singleton,
    interp_bound_report,
)
from .maxmargin import batch_bound_report, loo_report, solve_hard_margin
from .parametric import (
    QuadraticEvaluation,
    check_growth_bound,
    check_localization_bound,
    check_metric_regularity,
)

EXIT_OK = 0
EXIT_BOUND_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=["linear", "polynomial", "gaussian"], default="gaussian",
                   help="kernel family (default: gaussian)")
    p.add_argument("--gamma", type=float, default=1.0, help="gaussian width (default: 1.0)")
    p.add_argument("--degree", type=int, default=2, help="polynomial degree (default: 2)")
    p.add_argument("--offset", type=float, default=1.0, help="polynomial offset (default: 1.0)")


def _kernel_from_args(args) -> object:
    if args.kernel == "linear":
        return LinearKernel()
    if args.kernel == "polynomial":
        return PolynomialKernel(degree=args.degree, offset=args.offset)
    return GaussianKernel(gamma=args.gamma)


def _parse_indices(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise InvalidInputError(f"--split-in must be comma-separated integers: {exc}") from exc


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"body": payload, "tool_version": __version__},
                  fh, sort_keys=True, separators=(",", ":"))


def _cmd_interp_bound(args) -> int:
    kernel = _kernel_from_args(args)
    data = load_csv(args.data, Task.REGRESSION, has_header=args.header)
    pair = split_by_indices(data, _parse_indices(args.split_in))
    rep = interp_bound_report(pair, kernel, tol_rel=args.tol)
    print(f"lhs            = {rep.lhs:.12g}")
    print(f"d_sq           = {rep.d_sq:.12g}")
    print(f"rhs_diff_norm  = {rep.rhs_diff_norm:.12g}   slack = {rep.slack_diff_norm:.3e}")
    print(f"rhs_norm_gap   = {rep.rhs_norm_gap:.12g}   slack = {rep.slack_norm_gap:.3e}")
    print(f"tol            = {rep.tol:.3e}")
    print("PASS" if rep.passed else "FAIL")
    if args.out:
        _write_json(args.out, {
            "check": "interp_bound", "lhs": rep.lhs, "d_sq": rep.d_sq,
            "rhs_diff_norm": rep.rhs_diff_norm, "rhs_norm_gap": rep.rhs_norm_gap,
            "slack_diff_norm": rep.slack_diff_norm, "slack_norm_gap": rep.slack_norm_gap,
            "tol": rep.tol, "passed": rep.passed,
        })
    return EXIT_OK if rep.passed else EXIT_BOUND_FAILED


def _cmd_dissim(args) -> int:
    kernel = _kernel_from_args(args)
    data = load_csv(args.data, Task.REGRESSION, has_header=args.header)
    pair = split_by_indices(data, _parse_indices(args.split_in))
    if args.method == "eigen":
        res = dissimilarity_eig(pair.s_in, pair.s_out, kernel)
    elif args.method == "singleton":
        if len(pair.s_out) != 1:
            raise InvalidInputError("--method singleton needs exactly one held-out point")
        res = dissimilarity_singleton(pair.s_in, pair.s_out.points[0], kernel)
    else:
        res = dissimilarity_crude(pair.s_out, kernel)
    print(f"d_sq   = {res.d_sq:.12g}")
    print(f"method = {res.method.value}")
    if res.r_dim is not None:
        print(f"r_dim  = {res.r_dim}")
    if args.out:
        _write_json(args.out, {
            "check": "dissimilarity", "d_sq": res.d_sq, "method": res.method.value,
            "r_dim": res.r_dim,
            "witness": None if res.witness is None else [float(v) for v in res.witness],
        })
    return EXIT_OK


def _cmd_svm_solve(args) -> int:
    kernel = _kernel_from_args(args)
    data = load_csv(args.data, Task.CLASSIFICATION, has_header=args.header)
    model = solve_hard_margin(data, kernel, tol=args.tol, max_iter=args.max_iter)
    margins = model.margins(data.points, data.labels)
    identity = abs(float(np.sum(model.alpha)) - model.norm_sq)
    identity_ok = identity <= 1e-6 * (1.0 + model.norm_sq)
    print(f"norm_sq     = {model.norm_sq:.12g}")
    print(f"sum_alpha   = {float(np.sum(model.alpha)):.12g}   |gap| = {identity:.3e}")
    print(f"min_margin  = {float(np.min(margins)):.9f}")
    print(f"iterations  = {model.iterations}   kkt = {model.kkt_residual:.3e}")
    print("PASS" if identity_ok else "FAIL")
    if args.out:
        _write_json(args.out, {
            "check": "svm_solve", "norm_sq": model.norm_sq,
            "sum_alpha": float(np.sum(model.alpha)),
            "alpha": [float(a) for a in model.alpha],
            "min_margin": float(np.min(margins)), "iterations": model.iterations,
            "kkt_residual": model.kkt_residual, "passed": identity_ok,
        })
    return EXIT_OK if identity_ok else EXIT_BOUND_FAILED


def _cmd_svm_loo(args) -> int:
    kernel = _kernel_from_args(args)
    data = load_csv(args.data, Task.CLASSIFICATION, has_header=args.header)
    rep = loo_report(data, kernel, tol=args.loo_tol, solver_tol=args.tol, max_iter=args.max_iter)
    print(f"mean_hinge = {rep.mean_hinge:.12g}")
    print(f"bound      = {rep.bound:.12g}   (R^2 = {rep.r_sq:.6g}, norm_sq = {rep.norm_sq:.6g})")
    print("PASS" if rep.passed else "FAIL")
    if args.out:
        _write_json(args.out, {
            "check": "svm_loo", "mean_hinge": rep.mean_hinge, "bound": rep.bound,
            "r_sq": rep.r_sq, "norm_sq": rep.norm_sq,
            "per_index_hinge": [float(h) for h in rep.per_index_hinge],
            "tol": rep.tol, "passed": rep.passed,
        })
    return EXIT_OK if rep.passed else EXIT_BOUND_FAILED


def _cmd_svm_batch_bound(args) -> int:
    kernel = _kernel_from_args(args)
    data = load_csv(args.data, Task.CLASSIFICATION, has_header=args.header)
    pair = split_by_indices(data, _parse_indices(args.split_in))
    rep = batch_bound_report(pair, kernel, tol=args.bound_tol, solver_tol=args.tol)
    print(f"lhs (mean sq hinge)   = {rep.lhs:.12g}")
    print(f"rhs (spectral gap)    = {rep.rhs:.12g}")
    print(f"lambda_max(K_out)     = {rep.lambda_max_out:.6g}")
    print("PASS" if rep.passed else "FAIL")
    if args.out:
        _write_json(args.out, {
            "check": "svm_batch_bound", "lhs": rep.lhs, "rhs": rep.rhs,
            "lambda_max_out": rep.lambda_max_out,
            "reference_norm_sq": rep.reference_norm_sq,
            "insample_norm_sq": rep.insample_norm_sq,
            "tol": rep.tol, "passed": rep.passed,
        })
    return EXIT_OK if rep.passed else EXIT_BOUND_FAILED


def _cmd_parametric(args) -> int:
    q_in = _quadratic_from_csv(args.in_data, args.header)
    q_out = _quadratic_from_csv(args.out_data, args.header)
    passed = True
    results: dict = {"check": "parametric"}
    if args.check in ("growth", "all"):
        rep = check_growth_bound(q_in, q_out, eps=args.eps, rho=args.rho,
                                 trial_dirs=args.trials, seed=args.seed, tol=args.tol)
        print(f"growth: c = {rep.c:.6g}, kappa = {rep.kappa:.6g}, "
              f"max_ratio = {rep.max_ratio:.6g}, skipped = {rep.skipped} -> "
              + ("PASS" if rep.passed else "FAIL"))
        results["growth"] = {"c": rep.c, "kappa": rep.kappa, "max_ratio": rep.max_ratio,
                             "worst_slack": None if rep.worst_slack == float("inf") else rep.worst_slack,
                             "trials": rep.trials, "skipped": rep.skipped, "passed": rep.passed}
        passed = passed and rep.passed
    if args.check in ("metric", "all"):
        rep = check_metric_regularity(q_in, q_out, tol=args.tol)
        print(f"metric-regularity: lhs = {rep.lhs:.6g}, rhs = {rep.rhs:.6g}, "
              f"slack = {rep.slack:.3e} -> " + ("PASS" if rep.passed else "FAIL"))
        results["metric"] = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack,
                             "passed": rep.passed}
        passed = passed and rep.passed
    if args.check in ("localization", "all"):
        deltas = np.geomspace(args.delta_min, args.delta_max, args.delta_count)
        rep = check_localization_bound(q_in, q_out, deltas)
        star = "inf" if rep.vacuous else f"{rep.delta_star:.6g}"
        print(f"localization: |f_in - f_out| = {rep.distance:.6g}, delta_star = {star}"
              + (" (vacuous)" if rep.vacuous else "") + " -> "
              + ("PASS" if rep.passed else "FAIL"))
        results["localization"] = {"distance": rep.distance,
                                   "delta_star": None if rep.vacuous else rep.delta_star,
                                   "vacuous": rep.vacuous, "passed": rep.passed}
        passed = passed and rep.passed
    if args.out:
        _write_json(args.out, results)
    return EXIT_OK if passed else EXIT_BOUND_FAILED


def _quadratic_from_csv(path: str, header: bool) -> QuadraticEvaluation:
    data = load_csv(path, Task.REGRESSION, has_header=header)
    return QuadraticEvaluation(design=data.points.copy(), targets=data.labels.copy())


def _cmd_montecarlo(args) -> int:
    fields: dict = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    defaults = TrialConfig.__dataclass_fields__
    explicit = {
        "scenario": args.scenario, "seed": args.seed, "trials": args.trials,
        "n": args.n, "d": args.d, "teacher_norm": args.B, "radius": args.R,
        "margin": args.margin, "eval_draws": args.eval_draws,
    }
    for key, value in explicit.items():
        if value is not None:
            fields[key] = value
    if args.kernel is not None:
        k = _kernel_from_args(args)
        from .data import kernel_to_dict

        fields["kernel"] = kernel_to_dict(k)
    if "scenario" not in fields:
        raise InvalidInputError("montecarlo needs --scenario (or a --config carrying one)")
    fields.setdefault("seed", 0)
    fields.setdefault("trials", 100)
    cfg = TrialConfig.from_dict(fields)
    report = run(cfg)
    print(f"scenario = {cfg.scenario}  trials = {cfg.trials}  seed = {cfg.seed}")
    for key in sorted(report.aggregates):
        val = report.aggregates[key]
        if isinstance(val, float):
            print(f"  {key} = {val:.6g}")
        elif not isinstance(val, list):
            print(f"  {key} = {val}")
    for key in sorted(report.verdicts):
        print(f"  verdict[{key}] = {'PASS' if report.verdicts[key] else 'FAIL'}")
    if args.out:
        emit_report(report, args.out, format=args.format)
    return EXIT_OK if all(report.verdicts.values()) else EXIT_BOUND_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genbound",
        description="Certified deterministic generalization bounds and Monte Carlo bridges.",
    )
    parser.add_argument("--version", action="version", version=f"genbound {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interp-bound", help="certify the interpolation out-of-sample bounds")
    p.add_argument("--data", required=True, help="regression CSV (features..., label)")
    p.add_argument("--split-in", required=True, help="comma-separated in-sample row indices")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--tol", type=float, default=1e-7, help="relative slack tolerance (default: 1e-7)")
    p.add_argument("--out", help="write a JSON report here")
    _add_kernel_flags(p)
    p.set_defaults(fn=_cmd_interp_bound)

    p = sub.add_parser("dissim", help="compute the in/out dissimilarity D^2")
    p.add_argument("--data", required=True)
    p.add_argument("--split-in", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--method", choices=["eigen", "singleton", "crude"], default="eigen",
                   help="computation path (default: eigen)")
    p.add_argument("--out")
    _add_kernel_flags(p)
    p.set_defaults(fn=_cmd_dissim)

    p = sub.add_parser("svm-solve", help="train a hard-margin SVM and certify the dual identity")
    p.add_argument("--data", required=True, help="classification CSV (features..., label in {-1,1})")
    p.add_argument("--header", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8, help="KKT tolerance (default: 1e-8)")
    p.add_argument("--max-iter", type=int, default=200_000, help="sweep budget (default: 200000)")
    p.add_argument("--out")
    _add_kernel_flags(p)
    p.set_defaults(fn=_cmd_svm_solve)

    p = sub.add_parser("svm-loo", help="certify the leave-one-out hinge bound")
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8, help="solver KKT tolerance (default: 1e-8)")
    p.add_argument("--loo-tol", type=float, default=1e-6, help="bound slack tolerance (default: 1e-6)")
    p.add_argument("--max-iter", type=int, default=200_000)
    p.add_argument("--out")
    _add_kernel_flags(p)
    p.set_defaults(fn=_cmd_svm_loo)

    p = sub.add_parser("svm-batch-bound", help="certify the batch margin bound on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--split-in", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8, help="solver KKT tolerance (default: 1e-8)")
    p.add_argument("--bound-tol", type=float, default=1e-6, help="bound slack tolerance (default: 1e-6)")
    p.add_argument("--out")
    _add_kernel_flags(p)
    p.set_defaults(fn=_cmd_svm_batch_bound)

    p = sub.add_parser("parametric", help="certify quadratic growth / metric regularity / localization")
    p.add_argument("--in-data", required=True, help="in-sample CSV (design..., target)")
    p.add_argument("--out-data", required=True, help="out-sample CSV (design..., target)")
    p.add_argument("--header", action="store_true")
    p.add_argument("--check", choices=["growth", "metric", "localization", "all"], default="all")
    p.add_argument("--eps", type=float, default=0.0, help="excess level for growth trials (default: 0)")
    p.add_argument("--rho", type=float, default=10.0, help="neighborhood radius (default: 10)")
    p.add_argument("--trials", type=int, default=16, help="growth trial directions (default: 16)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8, help="slack tolerance (default: 1e-8)")
    p.add_argument("--delta-min", type=float, default=1e-3)
    p.add_argument("--delta-max", type=float, default=10.0)
    p.add_argument("--delta-count", type=int, default=40)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_parametric)

    p = sub.add_parser("montecarlo", help="run a seeded Monte Carlo scenario")
    p.add_argument("--scenario", choices=list(SCENARIOS))
    p.add_argument("--config", help="JSON file of TrialConfig fields; explicit flags override")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--B", type=float, help="teacher norm")
    p.add_argument("--R", type=float, help="data radius")
    p.add_argument("--margin", type=float)
    p.add_argument("--eval-draws", type=int, dest="eval_draws")
    p.add_argument("--kernel", choices=["linear", "polynomial", "gaussian"])
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--offset", type=float, default=1.0)
    p.add_argument("--out", help="write the full report here")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(fn=_cmd_montecarlo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GenboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
