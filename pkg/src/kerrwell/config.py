"""Strict JSON ingestion of sweep specifications.

The document mirrors :class:`~kerrwell.sweep.SweepSpec` field for field::

    {
      "model": {"family": "kpo", "eps1": 0.0, "eps2": 7.7, "phi": 0.0},
      "axes": [{"name": "eps1", "start": 0.0, "stop": 8.0, "count": 81}],
      "task": "dynamics_T",
      "solver": {"dim": 60, "method": "spectral"},
      "dissipation": {"kappa": 0.025, "n_th": 0.05},
      "output_path": "fig3b.csv"
    }

Any key that does not name a field is rejected.
"""

from __future__ import annotations

import dataclasses
import json
import os

from .dynamics import DissipationParams
from .errors import ConfigError, UsageError
from .hilbert import ModelParams
from .sweep import Axis, SolverSettings, SweepSpec


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(sorted(names))}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError, UsageError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def spec_from_dict(doc: dict) -> SweepSpec:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {f.name for f in dataclasses.fields(SweepSpec)}
    unknown = sorted(set(doc) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    for key in ("model", "axes", "task"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    model = _strict(ModelParams, doc["model"], "model")
    if not isinstance(doc["axes"], list):
        raise ConfigError("axes must be a list")
    axes = tuple(_strict(Axis, a, f"axes[{i}]") for i, a in enumerate(doc["axes"]))
    solver_doc = dict(doc.get("solver") or {})
    if "pairs" in solver_doc and isinstance(solver_doc["pairs"], list):
        solver_doc["pairs"] = tuple(tuple(p) for p in solver_doc["pairs"])
    solver = _strict(SolverSettings, solver_doc, "solver")
    dissipation = _strict(DissipationParams, doc.get("dissipation") or {}, "dissipation")
    try:
        return SweepSpec(model, axes, doc["task"], solver, dissipation, doc.get("output_path"))
    except (TypeError, ValueError, UsageError) as exc:
        raise ConfigError(str(exc)) from exc


def load_sweep_spec(path: str | os.PathLike) -> SweepSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(doc)
