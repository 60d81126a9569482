"""Synthetic non-stationary streams with exactly known comparator traces,
plus CSV / JSON-lines ingestion of external labeled streams.

Stream files use the header ``t,x_0,...,x_{d-1},y[,hint]``. Floats are
written with 17 significant digits, so a generate -> write -> ingest round
trip reproduces every value bit for bit.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .bounds import ComparatorTrace
from .errors import ParseError, SchemaError
from .features import KernelSpec, RkhsFunction, kernel_gram

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class StreamRecord:
    t: int
    x: np.ndarray
    y: float
    hint: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        x.flags.writeable = False


@dataclass(frozen=True)
class DriftScenario:
    """Recipe for a comparator sequence with a controllable path length.

    kinds: ``constant`` (zero path), ``piecewise-constant`` (fresh
    coefficients every ``segment_length`` steps) and
    ``coefficient-random-walk`` (per-step coefficient increments of scale
    ``step_size``). Labels are y_t = clamp(f_t(x_t) + noise, -label_clip,
    label_clip) with the noise itself truncated at three standard
    deviations before clamping.
    """

    kind: str = "constant"
    anchors: int = 5
    coeff_scale: float = 1.0
    segment_length: int | None = None
    step_size: float = 0.0
    noise: float = 0.1
    label_clip: float = 1.0
    box: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise-constant", "coefficient-random-walk"):
            raise ValueError(f"unknown scenario kind: {self.kind!r}")
        if self.anchors < 1:
            raise ValueError(f"scenario needs at least one anchor, got {self.anchors}")
        if self.kind == "piecewise-constant" and (self.segment_length is None or self.segment_length < 1):
            raise ValueError("piecewise-constant scenario requires a positive segment_length")
        if self.kind == "coefficient-random-walk" and self.step_size < 0:
            raise ValueError(f"step_size must be >= 0, got {self.step_size}")
        if self.noise < 0 or self.label_clip <= 0 or self.box <= 0:
            raise ValueError("noise must be >= 0 and label_clip, box positive")


def generate(
    scenario: DriftScenario,
    horizon: int,
    dim: int,
    spec: KernelSpec,
    seed: int,
) -> tuple[list[StreamRecord], ComparatorTrace]:
    """Generate ``horizon`` records and the exact comparator trace."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if dim != spec.dim:
        raise ValueError(f"dim {dim} does not match kernel spec dim {spec.dim}")
    rng = np.random.default_rng(int(seed) % 2**64)
    n = scenario.anchors
    anchors = rng.uniform(-scenario.box, scenario.box, size=(n, dim))
    coeffs = scenario.coeff_scale * rng.standard_normal(n) / math.sqrt(n)

    records: list[StreamRecord] = []
    functions: list[RkhsFunction] = []
    for t in range(1, horizon + 1):
        if t > 1:
            if scenario.kind == "piecewise-constant" and (t - 1) % scenario.segment_length == 0:
                coeffs = scenario.coeff_scale * rng.standard_normal(n) / math.sqrt(n)
            elif scenario.kind == "coefficient-random-walk":
                coeffs = coeffs + scenario.step_size * rng.standard_normal(n) / math.sqrt(n)
        f_t = RkhsFunction(spec=spec, anchors=anchors, coeffs=coeffs.copy())
        functions.append(f_t)
        x = rng.uniform(-scenario.box, scenario.box, size=dim)
        fx = float(coeffs @ kernel_gram(spec, anchors, x[None, :])[:, 0])
        noise = scenario.noise * float(np.clip(rng.standard_normal(), -3.0, 3.0))
        y = float(np.clip(fx + noise, -scenario.label_clip, scenario.label_clip))
        records.append(StreamRecord(t=t, x=x, y=y))
    return records, ComparatorTrace(spec=spec, functions=functions)


def stream_label_bound(records: list[StreamRecord]) -> float:
    """Observed label bound max_t |y_t| (0 for an empty stream)."""
    return max((abs(r.y) for r in records), default=0.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _header(dim: int, with_hint: bool) -> list[str]:
    cols = ["t"] + [f"x_{i}" for i in range(dim)] + ["y"]
    if with_hint:
        cols.append("hint")
    return cols


def write_stream(records: list[StreamRecord], path: str, fmt: str = "csv") -> None:
    """Write records as CSV or JSON-lines with exact decimal round trips."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown stream format: {fmt!r}")
    with_hint = any(r.hint is not None for r in records)
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "csv":
            dim = records[0].x.shape[0] if records else 0
            fh.write(",".join(_header(dim, with_hint)) + "\n")
            for r in records:
                row = [str(r.t)] + [FLOAT_FMT % v for v in r.x] + [FLOAT_FMT % r.y]
                if with_hint:
                    row.append("" if r.hint is None else FLOAT_FMT % r.hint)
                fh.write(",".join(row) + "\n")
        else:
            for r in records:
                obj = {"t": r.t, "x": list(r.x), "y": r.y}
                if r.hint is not None:
                    obj["hint"] = r.hint
                fh.write(json.dumps(obj) + "\n")


def _parse_csv(lines: list[str]) -> list[StreamRecord]:
    header = lines[0].rstrip("\n").split(",")
    if header[0] != "t" or "y" not in header:
        raise SchemaError(f"unrecognized stream header: {header}")
    with_hint = header[-1] == "hint"
    y_col = header.index("y")
    dim = y_col - 1
    expected = _header(dim, with_hint)
    if header != expected:
        raise SchemaError(f"stream header {header} does not match expected {expected}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(
                f"line {lineno}: row has {len(parts)} fields, header has {len(header)}"
            )
        try:
            t = int(parts[0])
            x = np.array([float(p) for p in parts[1 : 1 + dim]])
            y = float(parts[y_col])
            hint = None
            if with_hint and parts[-1] != "":
                hint = float(parts[-1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        records.append(StreamRecord(t=t, x=x, y=y, hint=hint))
    return records


def _parse_jsonl(lines: list[str]) -> list[StreamRecord]:
    records = []
    dim = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            t = int(obj["t"])
            x = np.asarray(obj["x"], dtype=float)
            y = float(obj["y"])
            hint = float(obj["hint"]) if "hint" in obj and obj["hint"] is not None else None
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if x.ndim != 1:
            raise ParseError("x must be a flat list", line=lineno)
        if dim is None:
            dim = x.shape[0]
        elif x.shape[0] != dim:
            raise SchemaError(
                f"line {lineno}: dimension {x.shape[0]} differs from earlier rows ({dim})"
            )
        records.append(StreamRecord(t=t, x=x, y=y, hint=hint))
    return records


def ingest(path: str, fmt: str | None = None) -> list[StreamRecord]:
    """Read a stream file; the format defaults from the file extension.

    Raises ParseError (with a line number) on malformed rows and
    SchemaError on dimension mismatches. Step indices must be strictly
    increasing.
    """
    if fmt is None:
        fmt = "jsonl" if str(path).endswith((".jsonl", ".ndjson")) else "csv"
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        return []
    records = _parse_csv(lines) if fmt == "csv" else _parse_jsonl(lines)
    for prev, cur in zip(records, records[1:]):
        if cur.t <= prev.t:
            raise SchemaError(f"step indices must be strictly increasing (saw {prev.t} then {cur.t})")
    return records
