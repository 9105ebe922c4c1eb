"""Seeded Monte Carlo bridges from the deterministic certificates to their
average-case counterparts, plus sweep batching and report persistence.

Every trial derives its own seed from (config seed, trial index), so a trial
replays bit for bit in isolation and aggregation is order-independent. The
JSON report format is { "body": {config, records, aggregates, verdicts},
"tool_version": ... }: identical configs produce byte-identical bodies.
"""

from __future__ import annotations

import csv as _csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import (
    Dataset,
    GaussianKernel,
    KernelSpec,
    LinearKernel,
    PolynomialKernel,
    Task,
    kernel_from_dict,
    kernel_matrix,
    kernel_to_dict,
)
from .errors import (
    ConstructionError,
    InvalidInputError,
    NearSingularKernelError,
    NumericalError,
)
from .instances import (
    draw_margin_sample,
    random_interp_instance,
    random_quadratic_pair,
    random_svm_instance,
    random_svm_split,
    _margin_teacher,
)
from .interpolation import (
    evaluate_loss,
    interp_bound_report,
    sharpness_witness,
)
from .linalg import solve_spd
from .maxmargin import (
    batch_bound_report,
    loo_report,
    sandwich_report,
    solve_hard_margin,
)
from .parametric import (
    check_growth_bound,
    check_localization_bound,
    check_metric_regularity,
    gap_lipschitz,
    growth_certificate,
    localization_curve,
    minimize,
    sym_eig,
)
from .rng import Seed, derive_seed, rng_stream

SCENARIOS = (
    "interp_corollary",
    "svm_generalization",
    "interp_bounds_sweep",
    "svm_bounds_sweep",
    "parametric_sweep",
)


@dataclass(frozen=True)
class TrialConfig:
    """Full description of a Monte Carlo run; hashable into trial seeds."""

    scenario: str
    seed: int
    trials: int
    n: int = 20
    d: int = 2
    kernel: KernelSpec = field(default_factory=lambda: GaussianKernel(gamma=1.0))
    teacher_norm: float = 2.0
    radius: float = 1.0
    margin: float = 1.0
    eval_draws: int = 20
    teacher_anchors: int = 5

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {self.scenario!r}; pick one of {SCENARIOS}")
        if self.trials < 0:
            raise InvalidInputError("trials must be nonnegative")
        if self.n < 1 or self.d < 1:
            raise InvalidInputError("n and d must be positive")
        if self.teacher_norm < 0 or self.radius <= 0 or self.margin <= 0:
            raise InvalidInputError("teacher_norm must be >= 0; radius and margin positive")
        if self.eval_draws < 1 or self.teacher_anchors < 1:
            raise InvalidInputError("eval_draws and teacher_anchors must be positive")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "trials": self.trials,
            "n": self.n,
            "d": self.d,
            "kernel": kernel_to_dict(self.kernel),
            "teacher_norm": self.teacher_norm,
            "radius": self.radius,
            "margin": self.margin,
            "eval_draws": self.eval_draws,
            "teacher_anchors": self.teacher_anchors,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialConfig":
        d = dict(d)
        if "kernel" in d:
            d["kernel"] = kernel_from_dict(d["kernel"])
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    """Realized quantities of one trial; reproducible from (config, index)."""

    index: int
    seed: int
    values: dict
    flags: dict


@dataclass(frozen=True)
class AggregateReport:
    config: TrialConfig
    records: list[TrialRecord]
    aggregates: dict
    verdicts: dict


def _native(x):
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_native(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_native(v) for v in x]
    if isinstance(x, dict):
        return {k: _native(v) for k, v in x.items()}
    return x


def effective_radius_sq(kernel: KernelSpec, radius: float) -> float:
    """Largest possible K(x, x) over the sampling support."""
    if isinstance(kernel, GaussianKernel):
        return 1.0
    if isinstance(kernel, LinearKernel):
        return radius**2
    if isinstance(kernel, PolynomialKernel):
        return (radius**2 + kernel.offset) ** kernel.degree
    raise InvalidInputError(f"unknown kernel {kernel!r}")


def _ball_draw(rng: np.random.Generator, count: int, d: int, radius: float) -> np.ndarray:
    v = rng.standard_normal((count, d))
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
    return v * radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / d)


def _corollary_draw(rng: np.random.Generator, cfg: TrialConfig, count: int) -> np.ndarray:
    if isinstance(cfg.kernel, GaussianKernel):
        return rng.standard_normal((count, cfg.d))
    return _ball_draw(rng, count, cfg.d, cfg.radius)


def _scaled_teacher(rng: np.random.Generator, cfg: TrialConfig):
    anchors = _corollary_draw(rng, cfg, cfg.teacher_anchors)
    coef = rng.standard_normal(cfg.teacher_anchors)
    if cfg.teacher_norm == 0.0:
        return anchors, np.zeros_like(coef)
    ka = kernel_matrix(cfg.kernel, anchors, anchors)
    scale_sq = float(coef @ ka @ coef)
    if scale_sq < 1e-10:
        raise NearSingularKernelError("degenerate teacher draw")
    return anchors, coef * (cfg.teacher_norm / math.sqrt(scale_sq))


# ---------------------------------------------------------------------------
# Per-scenario trial functions
# ---------------------------------------------------------------------------


def _interp_corollary_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    trial_seed = derive_seed(cfg.seed, index)
    for attempt in range(8):
        rng = rng_stream(derive_seed(trial_seed, attempt))
        try:
            anchors, coef = _scaled_teacher(rng, cfg)
            pts = _corollary_draw(rng, cfg, cfg.n)
            x_out = _corollary_draw(rng, cfg, 1)
            y = kernel_matrix(cfg.kernel, pts, anchors) @ coef
            y_out = float((kernel_matrix(cfg.kernel, x_out, anchors) @ coef)[0])
            k = kernel_matrix(cfg.kernel, pts, pts)
            k_out = kernel_matrix(cfg.kernel, x_out, pts).ravel()
            losses = []
            for m in range(1, cfg.n + 1):
                alpha = solve_spd(k[:m, :m], y[:m])
                losses.append(float((y_out - k_out[:m] @ alpha) ** 2))
            return TrialRecord(
                index=index,
                seed=trial_seed.value,
                values={"losses": _native(losses)},
                flags={},
            )
        except NumericalError:
            continue
    raise ConstructionError(f"trial {index}: could not draw an interpolable sample")


def _aggregate_interp_corollary(cfg: TrialConfig, records: list[TrialRecord]) -> tuple[dict, dict]:
    bound = cfg.teacher_norm**2 * effective_radius_sq(cfg.kernel, cfg.radius) / cfg.n
    if not records:
        return {"bound": bound}, {}
    losses = np.array([r.values["losses"] for r in records])  # (trials, n)
    means = losses.mean(axis=0)
    ses = (
        losses.std(axis=0, ddof=1) / math.sqrt(len(records))
        if len(records) > 1
        else np.zeros(cfg.n)
    )
    argmin = int(np.argmin(means))
    min_mean = float(means[argmin])
    se_at_min = float(ses[argmin])
    aggregates = {
        "mean_per_m": _native(means),
        "se_per_m": _native(ses),
        "best_m": argmin + 1,
        "min_mean": min_mean,
        "se_at_min": se_at_min,
        "bound": bound,
    }
    verdicts = {"corollary": bool(min_mean <= bound + 3.0 * se_at_min)}
    return aggregates, verdicts


def _svm_generalization_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    trial_seed = derive_seed(cfg.seed, index)
    rng = rng_stream(trial_seed)
    anchors, coef = _margin_teacher(
        rng, cfg.kernel, cfg.d, cfg.teacher_norm,
        n_anchors=cfg.teacher_anchors, margin=cfg.margin,
    )
    radius = None if isinstance(cfg.kernel, GaussianKernel) else cfg.radius
    x_train, y_train = draw_margin_sample(
        rng, cfg.kernel, anchors, coef, cfg.n, margin=cfg.margin, radius=radius
    )
    x_eval, y_eval = draw_margin_sample(
        rng, cfg.kernel, anchors, coef, cfg.eval_draws, margin=cfg.margin, radius=radius
    )
    s = Dataset(points=x_train, labels=y_train, task=Task.CLASSIFICATION)
    try:
        model = solve_hard_margin(s, cfg.kernel)
        loo = loo_report(s, cfg.kernel)
    except NumericalError as exc:
        # The teacher guarantees separability; a solver failure is a bug.
        raise ConstructionError(f"trial {index}: solver failed on a separable sample: {exc}")
    margins_eval = model.margins(x_eval, y_eval)
    return TrialRecord(
        index=index,
        seed=trial_seed.value,
        values={
            "error_rate": float(np.mean(margins_eval <= 0.0)),
            "norm_sq": float(model.norm_sq),
            "loo_mean_hinge": float(loo.mean_hinge),
            "loo_bound": float(loo.bound),
        },
        flags={"loo_pass": bool(loo.passed)},
    )


def _aggregate_svm_generalization(cfg: TrialConfig, records: list[TrialRecord]) -> tuple[dict, dict]:
    r_sq = effective_radius_sq(cfg.kernel, cfg.radius)
    bound = r_sq * cfg.teacher_norm**2 / cfg.n
    vacuous = bound >= 1.0
    if not records:
        return {"bound": bound, "vacuous": vacuous}, {}
    errors = np.array([r.values["error_rate"] for r in records])
    err_mean = float(errors.mean())
    err_se = float(errors.std(ddof=1) / math.sqrt(len(records))) if len(records) > 1 else 0.0
    loo_pass_rate = float(np.mean([r.flags["loo_pass"] for r in records]))
    aggregates = {
        "error_mean": err_mean,
        "error_se": err_se,
        "bound": bound,
        "vacuous": vacuous,
        "loo_pass_rate": loo_pass_rate,
        "loo_mean_hinge_avg": float(np.mean([r.values["loo_mean_hinge"] for r in records])),
        "norm_sq_avg": float(np.mean([r.values["norm_sq"] for r in records])),
    }
    verdicts = {
        "generalization": bool(vacuous or err_mean <= bound + 3.0 * err_se),
        "loo_all_pass": bool(loo_pass_rate == 1.0),
    }
    return aggregates, verdicts


def _interp_sweep_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    trial_seed = derive_seed(cfg.seed, index)
    rng = rng_stream(trial_seed)
    pair, kernel = random_interp_instance(
        rng, d_range=(1, min(cfg.d, 5)), n_in_cap=min(cfg.n, 20), m_cap=10
    )
    rep = interp_bound_report(pair, kernel)
    norm_in = math.sqrt(max(rep.norm_sq_in, 0.0))
    norm_full = math.sqrt(max(rep.norm_sq_full, 0.0))
    sharp_ok = True
    worst_sharp_slack = math.inf
    for r in (norm_in, 1.25 * norm_in + 0.1, norm_full):
        if r < norm_in:
            continue
        wit = sharpness_witness(pair, kernel, r=r, eps=1e-3)
        in_loss = evaluate_loss(pair.s_in, wit.model)
        norm_ok = math.sqrt(max(wit.model.norm_sq, 0.0)) <= r + 1e-8
        slack = wit.achieved - wit.certified_rhs
        worst_sharp_slack = min(worst_sharp_slack, slack)
        sharp_ok = sharp_ok and norm_ok and in_loss <= wit.model.fit_tol**2 and slack >= -1e-8
    return TrialRecord(
        index=index,
        seed=trial_seed.value,
        values={
            "lhs": rep.lhs,
            "d_sq": rep.d_sq,
            "slack_diff_norm": rep.slack_diff_norm,
            "slack_norm_gap": rep.slack_norm_gap,
            "sharp_slack": worst_sharp_slack,
        },
        flags={"bound_pass": bool(rep.passed), "sharp_pass": bool(sharp_ok)},
    )


def _svm_sweep_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    trial_seed = derive_seed(cfg.seed, index)
    rng = rng_stream(trial_seed)
    s, kernel = random_svm_instance(rng, n_range=(4, min(cfg.n, 30)))
    model = solve_hard_margin(s, kernel)
    margins = model.margins(s.points, s.labels)
    identity = abs(float(np.sum(model.alpha)) - model.norm_sq) / (1.0 + model.norm_sq)
    comp_slack = float(np.max(model.alpha * np.abs(1.0 - margins) / (1.0 + model.alpha)))
    min_margin = float(np.min(margins))
    pair = random_svm_split(rng, s)
    sw = sandwich_report(pair, kernel)
    lower_gap_min = sw.lower_gap
    for _ in range(5):
        gamma = np.abs(rng.standard_normal(len(pair.s_out))) * rng.uniform(0.0, 2.0)
        extra = sandwich_report(pair, kernel, gamma=gamma)
        lower_gap_min = min(lower_gap_min, extra.lower_gap)
    bb = batch_bound_report(pair, kernel)
    loo = loo_report(s, kernel)
    flags = {
        "identity_pass": bool(identity <= 1e-6),
        "kkt_pass": bool(min_margin >= 1.0 - 1e-6 and comp_slack <= 1e-6),
        "sandwich_pass": bool(sw.passed and lower_gap_min >= -1e-6),
        "batch_pass": bool(bb.passed),
        "loo_pass": bool(loo.passed),
    }
    return TrialRecord(
        index=index,
        seed=trial_seed.value,
        values={
            "identity_resid": identity,
            "min_margin": min_margin,
            "comp_slack": comp_slack,
            "sandwich_upper_gap": sw.upper_gap,
            "sandwich_lower_gap": lower_gap_min,
            "batch_slack": bb.rhs - bb.lhs,
            "loo_slack": loo.bound - loo.mean_hinge,
        },
        flags=flags,
    )


def _localization_grid(q_in, q_out, dist: float):
    """A log grid wide enough to certify both the crossing and the
    consistency comparison against the gap Lipschitz constant."""
    c = growth_certificate(q_in).c
    rho = max(4.0 * dist, 1.0)
    for _ in range(8):
        kappa = gap_lipschitz(q_in, q_out, rho)
        if kappa / c <= 0.75 * rho:
            break
        rho = 2.0 * kappa / c
    hi = min(rho, 1e3)
    return np.geomspace(max(1e-4, 1e-3 * hi), hi, 40), kappa, c


def _parametric_sweep_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    trial_seed = derive_seed(cfg.seed, index)
    rng = rng_stream(trial_seed)
    q_in, q_out = random_quadratic_pair(rng, d_range=(1, min(cfg.d, 10)), n_range=(0, min(cfg.n, 50)))
    eps = float(rng.uniform(0.0, 0.3)) if rng.uniform() < 0.7 else 0.0
    mset_in = minimize(q_in)
    f_out0 = minimize(q_out).particular
    lam_min_out = float(sym_eig(q_out.hessian_half()).eigenvalues[-1])
    step_max = math.sqrt(eps / lam_min_out) if eps > 0 else 0.0
    rho = 2.0 * (mset_in.distance(f_out0) + step_max) + 1.0
    growth = check_growth_bound(
        q_in, q_out, eps=eps, rho=rho, trial_dirs=8, seed=derive_seed(trial_seed, 1)
    )
    metric = check_metric_regularity(q_in, q_out)
    dist = float(np.linalg.norm(mset_in.particular - f_out0))
    grid, kappa_loc, c = _localization_grid(q_in, q_out, dist)
    loc = check_localization_bound(q_in, q_out, grid, refine_rel=1e-7)
    consistency_slack = (
        kappa_loc / c + 1e-6 - loc.delta_star if not loc.vacuous else math.inf
    )
    flags = {
        "growth_pass": bool(growth.passed),
        "metric_pass": bool(metric.passed),
        "localization_pass": bool(loc.passed),
        "consistency_pass": bool(loc.vacuous or consistency_slack >= 0.0),
    }
    return TrialRecord(
        index=index,
        seed=trial_seed.value,
        values={
            "eps": eps,
            "growth_worst_slack": growth.worst_slack,
            "growth_max_ratio": growth.max_ratio,
            "growth_skipped": growth.skipped,
            "metric_slack": metric.slack,
            "localization_distance": loc.distance,
            "delta_star": loc.delta_star if not loc.vacuous else -1.0,
            "localization_vacuous": bool(loc.vacuous),
            "consistency_slack": consistency_slack if not loc.vacuous else -1.0,
        },
        flags=flags,
    )


_TRIAL_FNS = {
    "interp_corollary": _interp_corollary_trial,
    "svm_generalization": _svm_generalization_trial,
    "interp_bounds_sweep": _interp_sweep_trial,
    "svm_bounds_sweep": _svm_sweep_trial,
    "parametric_sweep": _parametric_sweep_trial,
}


def _aggregate_sweep(cfg: TrialConfig, records: list[TrialRecord]) -> tuple[dict, dict]:
    if not records:
        return {}, {}
    flag_keys = sorted(records[0].flags)
    aggregates: dict = {}
    for key in flag_keys:
        aggregates[f"pass_rate_{key}"] = float(np.mean([r.flags[key] for r in records]))
    for key in sorted(records[0].values):
        vals = [r.values[key] for r in records]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            aggregates[f"worst_{key}"] = float(np.min(vals))
    failing = [[r.index, r.seed] for r in records if not all(r.flags.values())]
    aggregates["failing_seeds"] = failing
    verdicts = {"all_pass": bool(not failing)}
    return aggregates, verdicts


_AGGREGATE_FNS = {
    "interp_corollary": _aggregate_interp_corollary,
    "svm_generalization": _aggregate_svm_generalization,
    "interp_bounds_sweep": _aggregate_sweep,
    "svm_bounds_sweep": _aggregate_sweep,
    "parametric_sweep": _aggregate_sweep,
}


def run_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    """Run (or replay) a single trial; bit-identical given (config, index)."""
    if not 0 <= index:
        raise InvalidInputError("trial index must be nonnegative")
    return _TRIAL_FNS[cfg.scenario](cfg, index)


replay_trial = run_trial


def run(cfg: TrialConfig) -> AggregateReport:
    """Run every trial of a config and aggregate. Trials are independently
    seeded, so they could run concurrently; execution here is sequential and
    the aggregation is order-independent either way."""
    records = [run_trial(cfg, i) for i in range(cfg.trials)]
    aggregates, verdicts = _AGGREGATE_FNS[cfg.scenario](cfg, records)
    return AggregateReport(
        config=cfg, records=records, aggregates=_native(aggregates), verdicts=_native(verdicts)
    )


def run_interp_corollary(cfg: TrialConfig) -> AggregateReport:
    if cfg.scenario != "interp_corollary":
        raise InvalidInputError("config scenario must be interp_corollary")
    return run(cfg)


def run_svm_generalization(cfg: TrialConfig) -> AggregateReport:
    if cfg.scenario != "svm_generalization":
        raise InvalidInputError("config scenario must be svm_generalization")
    return run(cfg)


def run_bound_sweeps(cfg: TrialConfig) -> AggregateReport:
    if not cfg.scenario.endswith("_sweep"):
        raise InvalidInputError("config scenario must be one of the *_sweep scenarios")
    return run(cfg)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def report_body(r: AggregateReport) -> dict:
    return {
        "config": r.config.to_dict(),
        "records": [
            {"index": rec.index, "seed": rec.seed, "values": _native(rec.values), "flags": _native(rec.flags)}
            for rec in r.records
        ],
        "aggregates": _native(r.aggregates),
        "verdicts": _native(r.verdicts),
    }


def _flatten(prefix: str, value) -> list[tuple[str, object]]:
    if isinstance(value, list):
        out = []
        for i, v in enumerate(value):
            out.extend(_flatten(f"{prefix}.{i}", v))
        return out
    return [(prefix, value)]


def emit_report(r: AggregateReport, path, format: str = "json") -> None:
    """Write a report as canonical JSON or as a one-row-per-trial CSV."""
    if format == "json":
        payload = {"body": report_body(r), "tool_version": __version__}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise InvalidInputError(f"cannot write report to {path}: {exc}") from exc
        return
    if format == "csv":
        rows = []
        header: list[str] = []
        for rec in r.records:
            flat = [("index", rec.index), ("seed", rec.seed)]
            for key in sorted(rec.values):
                flat.extend(_flatten(key, _native(rec.values[key])))
            for key in sorted(rec.flags):
                flat.append((key, int(bool(rec.flags[key]))))
            if not header:
                header = [k for k, _ in flat]
            rows.append([v for _, v in flat])
        try:
            with open(path, "w", newline="") as fh:
                writer = _csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise InvalidInputError(f"cannot write report to {path}: {exc}") from exc
        return
    raise InvalidInputError(f"unknown report format {format!r}")


def read_report(path) -> AggregateReport:
    """Reconstruct an AggregateReport from its JSON form."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read report from {path}: {exc}") from exc
    body = payload["body"]
    return AggregateReport(
        config=TrialConfig.from_dict(body["config"]),
        records=[
            TrialRecord(
                index=rec["index"], seed=rec["seed"], values=rec["values"], flags=rec["flags"]
            )
            for rec in body["records"]
        ],
        aggregates=body["aggregates"],
        verdicts=body["verdicts"],
    )
