"""Text snapshot format for approximator parameters.

A snapshot is a UTF-8 file whose first line is a JSON header (kind,
architecture/grid metadata, optional ``extras`` such as z_avg or the learned
control-cost matrix) followed by one parameter per line, written with repr so
that floats round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "paclmdp-snapshot-1"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def save_snapshot(approx, path, extras: dict | None = None) -> None:
    from .mlp import MlpZApproximator
    from .rbf import RbfZApproximator
    from .tabular import TabularZApproximator

    if isinstance(approx, RbfZApproximator):
        header = {
            "kind": "rbf",
            "ranges": approx.grid_ranges.tolist(),
            "counts": list(approx.grid_counts),
            "bandwidth_factor": approx.bandwidth_factor,
        }
    elif isinstance(approx, MlpZApproximator):
        header = {
            "kind": "mlp",
            "layer_sizes": list(approx.layer_sizes),
            "out_act": approx.out_act,
            "input_low": approx.input_low.tolist(),
            "input_high": approx.input_high.tolist(),
        }
    elif isinstance(approx, TabularZApproximator):
        header = {"kind": "tabular", "states": approx.states.tolist()}
    else:
        raise TypeError(f"cannot snapshot {type(approx).__name__}")
    header["format"] = FORMAT
    header["extras"] = _jsonable(extras or {})

    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(repr(float(p)) for p in approx.params)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_snapshot(path):
    """Returns (approximator, extras)."""
    from .mlp import MlpZApproximator
    from .rbf import build_rbf_grid
    from .tabular import TabularZApproximator

    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(text[0])
    if header.get("format") != FORMAT:
        raise ValueError(f"not a recognized snapshot file: {path}")
    params = np.array([float(line) for line in text[1:] if line.strip()])

    kind = header["kind"]
    if kind == "rbf":
        approx = build_rbf_grid(
            np.array(header["ranges"]),
            header["counts"],
            bandwidth_factor=header["bandwidth_factor"],
        )
        if params.shape != approx.weights.shape:
            raise ValueError("snapshot parameter count does not match grid")
        approx.weights[:] = params
    elif kind == "mlp":
        approx = MlpZApproximator(
            tuple(header["layer_sizes"]),
            header["out_act"],
            params,
            np.array(header["input_low"]),
            np.array(header["input_high"]),
        )
    elif kind == "tabular":
        approx = TabularZApproximator(np.array(header["states"]), params)
    else:
        raise ValueError(f"unknown snapshot kind {kind!r}")
    return approx, header.get("extras", {})
