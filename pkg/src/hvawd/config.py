"""Run configuration: a single JSON file describing one reproducible run.

Schema (see configs/example.json for a complete instance):

    horizon            int >= 1, steps to run (grids are sized from it)
    dim                int >= 1, covariate dimension
    kernel             {"kind": "gaussian-rff", "dim": d, "bandwidth": s}
                       or {"kind": "finite-dictionary", "points": [[...]],
                           "table": [[...]], "a": bound}
    grid_base          float > 1, discount-odds grid base (default 2.0)
    lambda2            float > 0, level-2 ridge weight (default 1.0)
    hint               {"kind": "zero"|"last-label"|"external",
                        "clip": float >= 0 or null for the label bound}
    stream             {"source": "scenario", "scenario": {...}} or
                       {"source": "file", "path": "...", "format": "csv"|"jsonl"}
    master_seed        int, required; every random draw derives from it
    output_dir         string or null (run artifacts land here)
    evaluate_bounds    bool (default true)
    envelope_constants [C1, C2, C3], positive (default [1, 1, 1])
    plots              bool (default true), render figures next to the CSV
"""

import json
import os
from dataclasses import dataclass

from .errors import ConfigError
from .features import KernelSpec, kernel_spec_from_config, kernel_spec_to_config
from .forecaster import HintPolicy
from .streams import DriftScenario

_SCENARIO_KEYS = {
    "kind", "anchors", "coeff_scale", "segment_length", "step_size",
    "noise", "label_clip", "box",
}


@dataclass
class RunConfig:
    horizon: int
    dim: int
    kernel: KernelSpec
    master_seed: int
    grid_base: float = 2.0
    lambda2: float = 1.0
    hint_kind: str = "last-label"
    hint_clip: float | None = None  # None: use the stream's label bound
    scenario: DriftScenario | None = None
    input_path: str | None = None
    input_format: str | None = None
    output_dir: str | None = None
    evaluate_bounds: bool = True
    envelope_constants: tuple[float, float, float] = (1.0, 1.0, 1.0)
    plots: bool = True

    def hint_policy(self, label_bound: float) -> HintPolicy:
        clip = label_bound if self.hint_clip is None else self.hint_clip
        return HintPolicy(kind=self.hint_kind, clip=clip)

    def as_dict(self) -> dict:
        stream = (
            {"source": "file", "path": self.input_path, "format": self.input_format}
            if self.input_path is not None
            else {"source": "scenario", "scenario": vars(self.scenario)}
        )
        return {
            "horizon": self.horizon,
            "dim": self.dim,
            "kernel": kernel_spec_to_config(self.kernel),
            "grid_base": self.grid_base,
            "lambda2": self.lambda2,
            "hint": {"kind": self.hint_kind, "clip": self.hint_clip},
            "stream": stream,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "evaluate_bounds": self.evaluate_bounds,
            "envelope_constants": list(self.envelope_constants),
            "plots": self.plots,
        }


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    """Validate raw config data; raises ConfigError with a diagnostic."""
    try:
        horizon = int(data["horizon"])
        dim = int(data["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"horizon and dim are required integers: {exc}") from exc
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")

    if "master_seed" not in data or data["master_seed"] is None:
        raise ConfigError("master_seed is required; runs without a seed are not reproducible")
    master_seed = int(data["master_seed"])

    kernel_data = data.get("kernel")
    if not isinstance(kernel_data, dict):
        raise ConfigError("kernel section is required")
    kernel_data = dict(kernel_data)
    if kernel_data.get("kind") == "gaussian-rff":
        kernel_data.setdefault("dim", dim)
    try:
        spec = kernel_spec_from_config(kernel_data)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid kernel: {exc}") from exc
    if spec.dim != dim:
        raise ConfigError(f"kernel dim {spec.dim} does not match stream dim {dim}")

    grid_base = float(data.get("grid_base", 2.0))
    if not grid_base > 1.0:
        raise ConfigError(f"grid_base must exceed 1, got {grid_base}")
    lambda2 = float(data.get("lambda2", 1.0))
    if not lambda2 > 0:
        raise ConfigError(f"lambda2 must be positive, got {lambda2}")

    hint = data.get("hint", {}) or {}
    hint_kind = hint.get("kind", "last-label")
    if hint_kind not in ("zero", "last-label", "external"):
        raise ConfigError(f"unknown hint kind: {hint_kind!r}")
    hint_clip = hint.get("clip")
    if hint_clip is not None:
        hint_clip = float(hint_clip)
        if hint_clip < 0:
            raise ConfigError(f"hint clip must be >= 0, got {hint_clip}")

    stream = data.get("stream")
    if not isinstance(stream, dict) or stream.get("source") not in ("scenario", "file"):
        raise ConfigError('stream section must declare source "scenario" or "file"')
    scenario = None
    input_path = None
    input_format = None
    if stream["source"] == "scenario":
        raw = stream.get("scenario")
        if not isinstance(raw, dict):
            raise ConfigError("scenario stream requires a scenario section")
        unknown = set(raw) - _SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            scenario = DriftScenario(**raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario: {exc}") from exc
    else:
        input_path = stream.get("path")
        if not input_path:
            raise ConfigError("file stream requires a path")
        if not os.path.isabs(input_path):
            input_path = os.path.join(base_dir, input_path)
        if not os.path.exists(input_path):
            raise ConfigError(f"stream file does not exist: {input_path}")
        input_format = stream.get("format")
        if input_format not in (None, "csv", "jsonl"):
            raise ConfigError(f"unknown stream format: {input_format!r}")

    constants = data.get("envelope_constants", [1.0, 1.0, 1.0])
    if not (isinstance(constants, (list, tuple)) and len(constants) == 3):
        raise ConfigError("envelope_constants must be a list of three positive numbers")
    constants = tuple(float(c) for c in constants)
    if any(c <= 0 for c in constants):
        raise ConfigError("envelope_constants must be positive")

    return RunConfig(
        horizon=horizon,
        dim=dim,
        kernel=spec,
        master_seed=master_seed,
        grid_base=grid_base,
        lambda2=lambda2,
        hint_kind=hint_kind,
        hint_clip=hint_clip,
        scenario=scenario,
        input_path=input_path,
        input_format=input_format,
        output_dir=data.get("output_dir"),
        evaluate_bounds=bool(data.get("evaluate_bounds", True)),
        envelope_constants=constants,
        plots=bool(data.get("plots", True)),
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return parse_config(data, base_dir=os.path.dirname(os.path.abspath(path)))
