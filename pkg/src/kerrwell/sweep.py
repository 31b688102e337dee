"""Parameter sweeps: grid expansion, parallel evaluation, CSV and manifest output."""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, semiclassics, spectra
from .errors import UsageError
from .hilbert import AXES, Family, ModelParams, build_hamiltonian, default_dim

logger = logging.getLogger(__name__)

WORKERS_ENV = "KERRWELL_WORKERS"


class Task(str, enum.Enum):
    SPECTRUM = "spectrum"
    GAP_TRACE = "gap_trace"
    ILAS = "ilas"
    DYNAMICS_T = "dynamics_T"
    STEADY_RATIO = "steady_ratio"
    EBK = "ebk"
    DETAILED_BALANCE = "detailed_balance"


DISSIPATIVE = {Task.DYNAMICS_T, Task.STEADY_RATIO, Task.DETAILED_BALANCE}


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 2:
            raise UsageError(f"axis {self.name!r}: count must be an integer >= 2")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "stop", float(self.stop))

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SolverSettings:
    dim: int | None = None
    n_keep: int | None = None
    method: str = "spectral"  # dynamics_T: "spectral" or "fit"
    t_max: float | None = None
    n_time_points: int = 200
    pairs: tuple[tuple[int, int], ...] = ((0, 1),)  # gap_trace
    n_cff: int | None = None  # ilas
    threshold: float = 1e-6  # detailed_balance

    def __post_init__(self):
        dynamics.Method(self.method)
        object.__setattr__(self, "pairs", tuple(tuple(int(i) for i in p) for p in self.pairs))
        if self.dim is not None and self.dim < 2:
            raise UsageError("dim must be >= 2")


@dataclass(frozen=True)
class SweepSpec:
    model: ModelParams
    axes: tuple[Axis, ...]
    task: Task
    solver: SolverSettings = SolverSettings()
    dissipation: dynamics.DissipationParams = dynamics.DissipationParams()
    output_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise UsageError("a sweep needs one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise UsageError(f"duplicate axis names {names}")
        for name in names:
            if name not in AXES[self.model.family]:
                raise UsageError(f"axis {name!r} is not valid for the {self.model.family.value} model")
        if self.task is Task.EBK and self.model.family is not Family.KPO:
            raise UsageError("the ebk task is defined for the KPO model only")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    def points(self) -> list[ModelParams]:
        """Grid points in row-major order (last axis fastest)."""
        out = []
        for combo in itertools.product(*(a.values() for a in self.axes)):
            p = self.model
            for axis, v in zip(self.axes, combo):
                p = p.with_value(axis.name, float(v))
            out.append(p)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.as_dict()
        d["task"] = self.task.value
        d["axes"] = [asdict(a) for a in self.axes]
        d["solver"]["pairs"] = [list(p) for p in self.solver.pairs]
        return d


@dataclass
class RowStatus:
    index: int
    ok: bool
    error: str | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class SweepResult:
    spec: SweepSpec
    columns: list[str]
    rows: list[list]
    status: list[RowStatus]
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[RowStatus]:
        return [s for s in self.status if not s.ok]

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([_as_float(r[j]) for r in self.rows])

    def grid(self, name: str) -> np.ndarray:
        return self.column(name).reshape(self.spec.shape)

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        from . import __version__

        return {
            "toolkit_version": __version__,
            "spec": self.spec.to_dict(),
            "columns": self.columns,
            "row_order": "row-major over axes, last axis fastest",
            "n_rows": len(self.rows),
            "n_failed": len(self.failed),
            "rows": [asdict(s) for s in self.status if not s.ok or s.warnings],
            "wall_time_s": round(self.wall_time, 3),
            **self.extra,
        }

    def write(self, path: str | os.PathLike | None = None) -> Path:
        path = Path(path or self.spec.output_path)
        path.write_text(self.csv_text())
        manifest_path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True, default=str) + "\n")
        return path


def manifest_path(csv_path: str | os.PathLike) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


def _as_float(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return math.nan
    return math.nan if v is None else float(v)


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------------------
# columns


def parameter_columns(spec: SweepSpec) -> list[str]:
    if spec.model.family is Family.KPO:
        cols = ["eps1_over_K", "eps2_over_K", "phi_deg"]
    else:
        cols = ["k1_over_k4", "k2_over_k4"]
    if spec.task in DISSIPATIVE:
        cols += ["kappa_over_K", "n_th"]
    if spec.task is not Task.EBK:
        cols.append("dim")
    return cols


def output_columns(spec: SweepSpec) -> list[str]:
    task, s = spec.task, spec.solver
    if task is Task.DYNAMICS_T:
        return ["T_K", "offset", "fit_rmse", "method"]
    if task is Task.STEADY_RATIO:
        return ["p_shallow", "ratio"]
    if task is Task.DETAILED_BALANCE:
        return ["beta_avg", "beta_std", "trace_distance", "n_pairs"]
    if task is Task.SPECTRUM:
        return [f"dE_{n}" for n in range(1, _n_keep(s))]
    if task is Task.GAP_TRACE:
        return [f"gap_{a}_{b}" for a, b in s.pairs]
    if task is Task.ILAS:
        return ["ilas", "n_cff"]
    return ["shallow_action", "deep_action", "shallow_orbits", "deep_orbits", "asymmetry_A"]


def _n_keep(solver):
    return solver.n_keep if solver.n_keep is not None else 12


def _param_values(spec, p: ModelParams, dim):
    if p.family is Family.KPO:
        vals = [p.eps1, p.eps2, math.degrees(p.phi)]
    else:
        vals = [p.k1, p.k2]
    if spec.task in DISSIPATIVE:
        vals += [spec.dissipation.kappa, spec.dissipation.n_th]
    if spec.task is not Task.EBK:
        vals.append(dim)
    return vals


# ---------------------------------------------------------------------------
# point evaluation (runs in worker processes)


def _evaluate(spec: SweepSpec, p: ModelParams, dim: int) -> tuple[list, list[str]]:
    task, s, d = spec.task, spec.solver, spec.dissipation
    if task is Task.DYNAMICS_T:
        fit = dynamics.activation_time(p, d, dim, s.method, s.t_max, s.n_time_points)
        return [fit.T, fit.O, fit.rmse, fit.method.value], list(fit.warnings)
    if task is Task.STEADY_RATIO:
        return list(dynamics.steady_ratio(p, d, dim)), []
    if task is Task.DETAILED_BALANCE:
        rep = dynamics.detailed_balance_at(p, d, dim, s.threshold)
        return [rep.beta_avg, rep.beta_std, rep.trace_distance, len(rep.beta_values)], []
    if task is Task.EBK:
        land = semiclassics.analyze_landscape(p)
        a = semiclassics.lobe_action(p, semiclassics.Well.SHALLOW)
        b = semiclassics.lobe_action(p, semiclassics.Well.DEEP)
        return [a, b, semiclassics.orbit_count(a), semiclassics.orbit_count(b), land.asymmetry_A], []
    h = build_hamiltonian(p, dim)
    if task is Task.SPECTRUM:
        spec_ = spectra.eigensystem(h, min(_n_keep(s), dim))
        return list(spectra.transition_spectrum(spec_)[1:]), list(h.warnings)
    if task is Task.ILAS:
        n_cff = s.n_cff if s.n_cff is not None else spectra.default_n_cff(p.depth_drive)
        spec_ = spectra.eigensystem(h, min(n_cff + 2, dim))
        return [spectra.ilas(spec_, n_cff), n_cff], list(h.warnings)
    raise UsageError(f"task {task.value} is not evaluated point-wise")


def _run_job(spec: SweepSpec, start: int, points: list[ModelParams]):
    """Evaluate one job; returns a list of (index, values, RowStatus)."""
    out = []
    if spec.task is Task.GAP_TRACE:
        # one job is a line along the last axis so levels can be tracked
        axis = spec.axes[-1]
        dim = spec.solver.dim or max(default_dim(p) for p in points)
        try:
            trace = spectra.gap_trace(points[0], axis.name, axis.values(), spec.solver.pairs, dim, spec.solver.n_keep)
            for j, p in enumerate(points):
                notes = trace.warnings.get(j, [])
                out.append((start + j, _param_values(spec, p, dim) + list(trace.gaps[j]), RowStatus(start + j, True, None, notes)))
        except Exception as exc:  # isolate the failure to this line
            for j, p in enumerate(points):
                out.append((start + j, _failed_row(spec, p, dim), RowStatus(start + j, False, _describe(exc))))
        return out
    for j, p in enumerate(points):
        dim = spec.solver.dim or default_dim(p)
        try:
            values, notes = _evaluate(spec, p, dim)
            row = _param_values(spec, p, dim) + values
            out.append((start + j, row, RowStatus(start + j, True, None, notes)))
        except Exception as exc:  # per-row isolation: record, never abort the sweep
            logger.debug("row %d failed:\n%s", start + j, traceback.format_exc())
            out.append((start + j, _failed_row(spec, p, dim), RowStatus(start + j, False, _describe(exc))))
    return out


def _failed_row(spec, p, dim):
    return _param_values(spec, p, dim) + [None] * len(output_columns(spec))


def _describe(exc):
    return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# driver


def resolve_workers(flag: int | None = None) -> int:
    """Worker count: explicit flag, else $KERRWELL_WORKERS, else 1."""
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(WORKERS_ENV)
        try:
            n = int(env) if env else 1
        except ValueError as exc:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    if n < 1:
        raise UsageError(f"worker count must be >= 1, got {n}")
    return n


def check_writable(path: str | os.PathLike) -> None:
    """Fail before any computation if ``path`` (and its manifest) cannot be written."""
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory {parent} does not exist")
    for target in (p, manifest_path(p)):
        if target.exists() and not os.access(target, os.W_OK):
            raise OSError(f"{target} is not writable")
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory {parent} is not writable")


def _jobs(spec: SweepSpec):
    pts = spec.points()
    if spec.task is Task.GAP_TRACE:
        step = spec.axes[-1].count
        return [(i, pts[i : i + step]) for i in range(0, len(pts), step)]
    return [(i, [p]) for i, p in enumerate(pts)]


def run_sweep(spec: SweepSpec, workers: int | None = None, write: bool = True) -> SweepResult:
    """Evaluate ``spec.task`` over the grid; rows come back in row-major order
    regardless of worker count or completion order."""
    if write and spec.output_path:
        check_writable(spec.output_path)
    n_workers = resolve_workers(workers)
    jobs = _jobs(spec)
    t0 = time.perf_counter()
    if n_workers == 1 or len(jobs) == 1:
        results = [_run_job(spec, start, pts) for start, pts in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
            futures = [pool.submit(_run_job, spec, start, pts) for start, pts in jobs]
            results = [f.result() for f in futures]
    flat = sorted((item for chunk in results for item in chunk), key=lambda item: item[0])
    result = SweepResult(
        spec=spec,
        columns=parameter_columns(spec) + output_columns(spec),
        rows=[row for _, row, _ in flat],
        status=[st for _, _, st in flat],
        wall_time=time.perf_counter() - t0,
    )
    if result.failed:
        logger.warning("%d of %d rows failed", len(result.failed), len(result.rows))
    if write and spec.output_path:
        result.write()
    return result
