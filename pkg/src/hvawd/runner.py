"""Experiment runner: the predict -> observe -> commit loop, per-step CSV
emission, summary reports and report figures."""

import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .bounds import (
    BoundReport,
    ComparatorTrace,
    RegretLedger,
    discount_adaptive_bound,
    discount_grid_size,
    drift_loss_rate,
    dynamic_regret,
    hierarchy_regret_envelope,
    optimal_discount_odds,
    prediction_energy_bound,
)
from .config import RunConfig
from .errors import ConfigError, NumericError
from .features import derive_seed
from .hierarchy import HierarchyForecaster, build_hierarchy
from .streams import StreamRecord, generate, ingest, stream_label_bound

FLOAT_FMT = "%.17g"


@dataclass
class StepRow:
    t: int
    prediction: float
    y: float
    hint: float
    zetas: np.ndarray
    loss: float
    cum_loss: float
    cum_regret: float | None


@dataclass
class RunSummary:
    horizon: int
    steps: int
    expert_names: list[str]
    final_cumulative_loss: float
    dynamic_regret: float | None
    per_expert_loss: dict[str, float]
    per_expert_regret: dict[str, float] | None
    path_length: float | None
    comparator_norm_cap: float | None
    label_bound: float
    hint_bound: float
    delta_sq_sum: float
    max_delta_sq: float
    bounds: dict | None
    wall_time_per_step_mean: float
    wall_time_per_step_median: float

    def as_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "steps": self.steps,
            "expert_names": self.expert_names,
            "final_cumulative_loss": self.final_cumulative_loss,
            "dynamic_regret": self.dynamic_regret,
            "per_expert_loss": self.per_expert_loss,
            "per_expert_regret": self.per_expert_regret,
            "path_length": self.path_length,
            "comparator_norm_cap": self.comparator_norm_cap,
            "label_bound": self.label_bound,
            "hint_bound": self.hint_bound,
            "delta_sq_sum": self.delta_sq_sum,
            "max_delta_sq": self.max_delta_sq,
            "bounds": self.bounds,
            "wall_time_per_step_mean": self.wall_time_per_step_mean,
            "wall_time_per_step_median": self.wall_time_per_step_median,
        }


def run_stream(
    forecaster: HierarchyForecaster,
    records: list[StreamRecord],
    trace: ComparatorTrace | None,
) -> tuple[RegretLedger, list[StepRow], list[float]]:
    """Drive the forecaster over the records; returns the ledger, the
    per-step rows and the per-step wall times (predict + commit only)."""
    ledger = RegretLedger()
    rows: list[StepRow] = []
    step_times: list[float] = []
    names = forecaster.expert_names
    largest_m = forecaster.blocks[-1].m if forecaster.blocks else None
    cum_loss = 0.0
    cum_regret = 0.0
    for i, rec in enumerate(records):
        try:
            t0 = time.perf_counter()
            prediction, strace = forecaster.predict(rec.x, external_hint=rec.hint)
            t1 = time.perf_counter()
            comparator_value = trace.functions[i].evaluate(rec.x) if trace is not None else None
            t2 = time.perf_counter()
            forecaster.commit(strace, rec.y)
            t3 = time.perf_counter()
        except (NumericError, OverflowError) as exc:
            raise NumericError(f"step {rec.t}: {exc}") from exc
        step_times.append((t1 - t0) + (t3 - t2))
        ledger.record(
            y=rec.y,
            hint=strace.hint,
            prediction=prediction,
            comparator_value=comparator_value,
            expert_predictions=dict(zip(names, strace.zetas)),
            feat_sq_norm=strace.feat_sq_norms.get(largest_m),
        )
        loss = ledger.alg_losses[-1]
        if not math.isfinite(loss):
            raise NumericError(f"step {rec.t}: non-finite loss")
        cum_loss += loss
        if comparator_value is not None:
            cum_regret += loss - ledger.comparator_losses[-1]
            row_regret = cum_regret
        else:
            row_regret = None
        rows.append(
            StepRow(
                t=rec.t,
                prediction=prediction,
                y=rec.y,
                hint=strace.hint,
                zetas=strace.zetas.copy(),
                loss=loss,
                cum_loss=cum_loss,
                cum_regret=row_regret,
            )
        )
    return ledger, rows, step_times


def _bound_report(
    config: RunConfig,
    ledger: RegretLedger,
    trace: ComparatorTrace,
    label_bound: float,
    hint_bound: float,
    largest_m: int,
    steps: int,
) -> BoundReport:
    a = config.kernel.a
    R = trace.norm_cap
    P = trace.path
    d2 = ledger.delta_sq_sum
    rho = drift_loss_rate(a, R, label_bound, largest_m)
    eta = optimal_discount_odds(largest_m, d2, rho, P)
    gamma_star = 1.0 if math.isinf(eta) else eta / (1.0 + eta)
    constants = {
        "a": a,
        "Y": label_bound,
        "hint_bound": hint_bound,
        "R": R,
        "m": largest_m,
        "lambda2": config.lambda2,
        "lambda_base": 1.0 / largest_m,
        "grid_base": config.grid_base,
        "grid_size": discount_grid_size(largest_m, steps, config.grid_base),
        "horizon": steps,
        "gamma_star": gamma_star,
    }
    if math.isfinite(eta):
        constants["eta_star"] = eta
    values = {
        "drift_loss_rate": rho,
        "drift_loss_rate_limit": drift_loss_rate(a, R, label_bound, math.inf),
        "prediction_energy": prediction_energy_bound(
            largest_m, steps, config.grid_base, config.lambda2, label_bound, hint_bound, a
        ),
        "block_bound": discount_adaptive_bound(
            a=a, Y=label_bound, hint_bound=hint_bound, R=R, m=largest_m,
            base=config.grid_base, lam=config.lambda2, lam_base=1.0 / largest_m,
            horizon=steps, path=P, hint_sq_sum=d2,
        ),
        "envelope": hierarchy_regret_envelope(
            steps, P, d2, a, label_bound, hint_bound, R, config.grid_base,
            constants=config.envelope_constants,
        ),
    }
    return BoundReport(constants=constants, values=values)


def _write_csv(path: str, rows: list[StepRow], names: list[str]) -> None:
    header = ["t", "y_hat", "y", "hint"] + [f"zeta_{n}" for n in names] + [
        "loss", "cum_loss", "cum_regret",
    ]
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [str(row.t)] + [
                FLOAT_FMT % v for v in (row.prediction, row.y, row.hint)
            ] + [FLOAT_FMT % z for z in row.zetas] + [
                FLOAT_FMT % row.loss, FLOAT_FMT % row.cum_loss,
            ]
            cells.append("" if row.cum_regret is None else FLOAT_FMT % row.cum_regret)
            fh.write(",".join(cells) + "\n")
    os.replace(tmp, path)


def _write_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def run(config: RunConfig, output_dir: str | None = None) -> RunSummary:
    """Execute a full run. Files are written only when an output directory
    is set (argument overrides the config); each file is written to a
    temporary name and renamed on success."""
    if config.scenario is not None:
        records, trace = generate(
            config.scenario,
            config.horizon,
            config.dim,
            config.kernel,
            derive_seed(config.master_seed, "stream"),
        )
        label_bound = config.scenario.label_clip
    else:
        records = ingest(config.input_path, config.input_format)
        if len(records) < config.horizon:
            raise ConfigError(
                f"stream file has {len(records)} rows, fewer than horizon {config.horizon}"
            )
        records = records[: config.horizon]
        for rec in records:
            if rec.x.shape[0] != config.dim:
                raise ConfigError(
                    f"stream row t={rec.t} has dimension {rec.x.shape[0]}, expected {config.dim}"
                )
        trace = None
        label_bound = stream_label_bound(records)

    policy = config.hint_policy(label_bound)
    forecaster = build_hierarchy(
        config.horizon,
        config.kernel,
        master_seed=config.master_seed,
        base=config.grid_base,
        lambda2=config.lambda2,
        hint_policy=policy,
    )
    ledger, rows, step_times = run_stream(forecaster, records, trace)

    names = forecaster.expert_names
    per_expert_loss = ledger.expert_totals()
    regret = None
    per_expert_regret = None
    if trace is not None:
        regret = dynamic_regret(ledger, trace)
        per_expert_regret = {
            name: total - ledger.comparator_total for name, total in per_expert_loss.items()
        }

    bounds = None
    if config.evaluate_bounds and trace is not None and forecaster.blocks:
        bounds = _bound_report(
            config, ledger, trace, label_bound, policy.clip,
            forecaster.blocks[-1].m, ledger.steps,
        ).as_dict()

    summary = RunSummary(
        horizon=config.horizon,
        steps=ledger.steps,
        expert_names=names,
        final_cumulative_loss=ledger.algorithm_total,
        dynamic_regret=regret,
        per_expert_loss=per_expert_loss,
        per_expert_regret=per_expert_regret,
        path_length=trace.path if trace is not None else None,
        comparator_norm_cap=trace.norm_cap if trace is not None else None,
        label_bound=label_bound,
        hint_bound=policy.clip,
        delta_sq_sum=ledger.delta_sq_sum,
        max_delta_sq=ledger.max_delta_sq,
        bounds=bounds,
        wall_time_per_step_mean=float(np.mean(step_times)),
        wall_time_per_step_median=float(np.median(step_times)),
    )

    outdir = output_dir if output_dir is not None else config.output_dir
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        _write_csv(os.path.join(outdir, "steps.csv"), rows, names)
        payload = summary.as_dict()
        payload["config"] = config.as_dict()
        # wall times vary run to run; keeping them out of the files keeps
        # repeated runs byte-identical (they are logged by the CLI instead)
        payload.pop("wall_time_per_step_mean")
        payload.pop("wall_time_per_step_median")
        _write_json(os.path.join(outdir, "summary.json"), payload)
        if config.plots:
            from .figures import render_run_figures

            render_run_figures(outdir, rows, names)
    return summary
