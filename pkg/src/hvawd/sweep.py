"""Scaling sweeps: regret and per-step cost as functions of the horizon."""

import json
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .bounds import dynamic_regret
from .config import RunConfig
from .errors import ConfigError
from .features import derive_seed
from .hierarchy import build_hierarchy
from .runner import run_stream
from .streams import DriftScenario, generate

FLOAT_FMT = "%.17g"

REGIMES = ("constant", "sqrt", "linear")


def scenario_for_regime(regime: str, horizon: int, template: DriftScenario) -> DriftScenario:
    """Drift scenario whose path length follows the requested growth law.

    A coefficient random walk accumulates roughly ``step_size`` per step of
    path, so a fixed step gives a linear path and a step of
    ``step_size / sqrt(T)`` gives a square-root path.
    """
    if regime == "constant":
        return replace(template, kind="constant", step_size=0.0, segment_length=None)
    if regime == "sqrt":
        return replace(
            template,
            kind="coefficient-random-walk",
            step_size=template.step_size / math.sqrt(horizon),
            segment_length=None,
        )
    if regime == "linear":
        return replace(template, kind="coefficient-random-walk", segment_length=None)
    raise ConfigError(f"unknown sweep regime: {regime!r} (known: {', '.join(REGIMES)})")


@dataclass
class SweepRow:
    horizon: int
    regret: float
    path_length: float
    cumulative_loss: float
    step_seconds: float


@dataclass
class SweepReport:
    regime: str
    rows: list[SweepRow]
    regret_slope: float
    time_slope: float

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "rows": [vars(r) for r in self.rows],
            "regret_slope": self.regret_slope,
            "time_slope": self.time_slope,
        }


def run_horizon(config: RunConfig, horizon: int, regime: str, repeats: int = 1) -> SweepRow:
    """One sweep cell: average regret over ``repeats`` seeds at this horizon."""
    if config.scenario is None:
        raise ConfigError("sweeps require a scenario stream")
    scenario = scenario_for_regime(regime, horizon, config.scenario)
    regrets, paths, losses, times = [], [], [], []
    for rep in range(repeats):
        seed = derive_seed(config.master_seed, "sweep", regime, horizon, rep)
        records, trace = generate(scenario, horizon, config.dim, config.kernel, seed)
        policy = config.hint_policy(scenario.label_clip)
        forecaster = build_hierarchy(
            horizon,
            config.kernel,
            master_seed=seed,
            base=config.grid_base,
            lambda2=config.lambda2,
            hint_policy=policy,
        )
        ledger, _, step_times = run_stream(forecaster, records, trace)
        regrets.append(dynamic_regret(ledger, trace))
        paths.append(trace.path)
        losses.append(ledger.algorithm_total)
        times.append(float(np.median(step_times)))
    return SweepRow(
        horizon=horizon,
        regret=float(np.mean(regrets)),
        path_length=float(np.mean(paths)),
        cumulative_loss=float(np.mean(losses)),
        step_seconds=float(np.mean(times)),
    )


def fit_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.maximum(np.asarray(ys, dtype=float), 1e-12)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def sweep(
    config: RunConfig,
    horizons,
    regime: str,
    output_dir: str | None = None,
    repeats: int = 1,
) -> SweepReport:
    """Run each horizon, fit log-log slopes of regret and per-step time,
    and (optionally) write the table, a summary and scaling figures."""
    horizons = sorted(int(h) for h in horizons)
    if len(horizons) < 3:
        raise ConfigError(f"a sweep needs at least 3 horizons, got {len(horizons)}")
    if regime not in REGIMES:
        raise ConfigError(f"unknown sweep regime: {regime!r} (known: {', '.join(REGIMES)})")
    rows = [run_horizon(config, h, regime, repeats=repeats) for h in horizons]
    report = SweepReport(
        regime=regime,
        rows=rows,
        regret_slope=fit_slope(horizons, [r.regret for r in rows]),
        time_slope=fit_slope(horizons, [r.step_seconds for r in rows]),
    )
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        table = os.path.join(output_dir, "sweep.csv")
        tmp = table + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("horizon,regret,path_length,cumulative_loss,step_seconds\n")
            for r in rows:
                fh.write(
                    ",".join(
                        [str(r.horizon)]
                        + [FLOAT_FMT % v for v in (r.regret, r.path_length, r.cumulative_loss, r.step_seconds)]
                    )
                    + "\n"
                )
        os.replace(tmp, table)
        summary = os.path.join(output_dir, "sweep_summary.json")
        tmp = summary + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, summary)
        if config.plots:
            from .figures import render_sweep_figures

            render_sweep_figures(
                output_dir,
                horizons,
                [r.regret for r in rows],
                [r.step_seconds for r in rows],
                report.regret_slope,
                report.time_slope,
            )
    return report


def measure_step_seconds(
    config: RunConfig,
    horizon: int,
    steps: int = 48,
    warmup: int = 8,
) -> float:
    """Median wall time of one forecaster step (predict + commit) for a
    hierarchy sized for ``horizon``. The cost of a step does not depend on
    how many steps have already been taken, so a short measured stretch
    stands in for the whole run."""
    if config.scenario is None:
        raise ConfigError("step timing requires a scenario stream")
    seed = derive_seed(config.master_seed, "timing", horizon)
    records, _ = generate(config.scenario, warmup + steps, config.dim, config.kernel, seed)
    policy = config.hint_policy(config.scenario.label_clip)
    forecaster = build_hierarchy(
        horizon,
        config.kernel,
        master_seed=seed,
        base=config.grid_base,
        lambda2=config.lambda2,
        hint_policy=policy,
    )
    times = []
    for i, rec in enumerate(records):
        t0 = time.perf_counter()
        _, strace = forecaster.predict(rec.x)
        forecaster.commit(strace, rec.y)
        elapsed = time.perf_counter() - t0
        if i >= warmup:
            times.append(elapsed)
    return float(np.median(times))
