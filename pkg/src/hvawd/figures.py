"""Report figures rendered next to the delimited outputs.

Everything is drawn through the Agg backend with fixed sizes so that
repeated runs produce byte-identical PNG files.
"""

import os

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_FIGSIZE = (7.0, 4.2)
_DPI = 120


def _save(fig, path: str) -> None:
    tmp = path + ".tmp"
    fig.savefig(tmp, dpi=_DPI, format="png")
    plt.close(fig)
    os.replace(tmp, path)


def render_run_figures(outdir: str, rows, names: list[str]) -> list[str]:
    """Predictions-vs-labels and cumulative loss/regret curves for one run."""
    t = np.array([r.t for r in rows])
    y = np.array([r.y for r in rows])
    yhat = np.array([r.prediction for r in rows])
    cum_loss = np.array([r.cum_loss for r in rows])
    regrets = [r.cum_regret for r in rows]
    have_regret = all(r is not None for r in regrets)

    paths = []
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(t, y, lw=0.8, alpha=0.7, label="label")
    ax.plot(t, yhat, lw=0.8, label="prediction")
    ax.set_xlabel("step")
    ax.set_ylabel("value")
    ax.legend(loc="best")
    ax.set_title("labels and predictions")
    fig.tight_layout()
    path = os.path.join(outdir, "predictions.png")
    _save(fig, path)
    paths.append(path)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(t, cum_loss, label="cumulative loss")
    if have_regret:
        ax.plot(t, np.array(regrets, dtype=float), label="cumulative regret")
    ax.set_xlabel("step")
    ax.set_ylabel("cumulative value")
    ax.legend(loc="best")
    ax.set_title("loss and regret accumulation")
    fig.tight_layout()
    path = os.path.join(outdir, "regret.png")
    _save(fig, path)
    paths.append(path)
    return paths


def render_sweep_figures(outdir: str, horizons, regrets, step_seconds,
                         regret_slope: float, time_slope: float) -> list[str]:
    """Log-log scaling plots with the fitted slopes."""
    horizons = np.asarray(horizons, dtype=float)
    regrets = np.asarray(regrets, dtype=float)
    step_seconds = np.asarray(step_seconds, dtype=float)

    paths = []
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.loglog(horizons, regrets, "o-", label="measured regret")
    anchor = regrets[0] if regrets[0] > 0 else 1.0
    ax.loglog(
        horizons,
        anchor * (horizons / horizons[0]) ** regret_slope,
        "--",
        label=f"fit slope {regret_slope:.3f}",
    )
    ax.set_xlabel("horizon T")
    ax.set_ylabel("dynamic regret")
    ax.legend(loc="best")
    ax.set_title("regret scaling")
    fig.tight_layout()
    path = os.path.join(outdir, "regret_scaling.png")
    _save(fig, path)
    paths.append(path)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.loglog(horizons, step_seconds, "o-", label="per-step seconds")
    anchor = step_seconds[0] if step_seconds[0] > 0 else 1.0
    ax.loglog(
        horizons,
        anchor * (horizons / horizons[0]) ** time_slope,
        "--",
        label=f"fit slope {time_slope:.3f}",
    )
    ax.set_xlabel("horizon T")
    ax.set_ylabel("seconds per step")
    ax.legend(loc="best")
    ax.set_title("per-step cost scaling")
    fig.tight_layout()
    path = os.path.join(outdir, "step_time.png")
    _save(fig, path)
    paths.append(path)
    return paths
