"""Command-line interface.

Exit status: 0 on success, 2 on usage errors (bad flags, bad config, unwritable
output), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, presets, semiclassics, spectra
from .config import load_sweep_spec
from .errors import KerrwellError, NumericalError, UsageError
from .hilbert import Family, ModelParams, build_hamiltonian, default_dim
from .sweep import Axis, SolverSettings, SweepSpec, Task, check_writable, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("kerrwell")


def _shared(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and solver")
    g.add_argument("--model", choices=["kpo", "chemical"], default="kpo")
    g.add_argument("--eps1", type=float, default=0.0, help="linear drive eps1/K")
    g.add_argument("--eps2", type=float, default=7.7, help="squeezing drive eps2/K")
    g.add_argument("--phi-deg", type=float, default=0.0, help="linear-drive phase in degrees")
    g.add_argument("--k1", type=float, default=None, help="chemical k1/k4 (defaults to --eps1)")
    g.add_argument("--k2", type=float, default=None, help="chemical k2/k4 (defaults to 12.6)")
    g.add_argument("--rescale", type=float, default=1.0, help="input rescale applied to (eps1, eps2)")
    g.add_argument("--kappa", type=float, default=0.025, help="loss rate kappa/K")
    g.add_argument("--nth", type=float, default=0.05, help="thermal photon number")
    g.add_argument("--dim", type=int, default=None, help="Fock truncation (default: model rule)")
    g.add_argument("--tmax", type=float, default=None, help="trajectory length for fit-based T")
    g.add_argument("--out", default=None, help="output CSV path (or directory for reproduce)")
    g.add_argument("--workers", type=int, default=None, help="process count (default $KERRWELL_WORKERS or 1)")
    g.add_argument(
        "--axis",
        nargs=4,
        action="append",
        metavar=("NAME", "START", "STOP", "COUNT"),
        help="sweep axis (repeat for a 2D grid)",
    )
    g.add_argument("-v", "--verbose", action="store_true")


def _params(args) -> ModelParams:
    if args.model == "chemical":
        k1 = args.k1 if args.k1 is not None else args.eps1
        k2 = args.k2 if args.k2 is not None else 12.6
        return ModelParams.chemical(k1, k2)
    return ModelParams.kpo(args.eps1, args.eps2, math.radians(args.phi_deg), args.rescale)


def _dissipation(args) -> dynamics.DissipationParams:
    return dynamics.DissipationParams(args.kappa, args.nth)


def _axes(args):
    out = []
    for name, start, stop, count in args.axis or []:
        try:
            start, stop, count_f = float(start), float(stop), float(count)
        except ValueError as exc:
            raise UsageError(f"bad --axis values for {name}: {exc}") from exc
        if name == "phi":  # the CLI speaks degrees
            start, stop = math.radians(start), math.radians(stop)
        if count_f != int(count_f):
            raise UsageError("axis COUNT must be an integer")
        out.append(Axis(name, start, stop, int(count_f)))
    return out


def _emit(obj, args):
    text = json.dumps(obj, indent=2, default=_json_default)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def _sweep_or_none(args, task: Task, **solver):
    axes = _axes(args)
    if not axes:
        return None
    spec = SweepSpec(_params(args), tuple(axes), task, SolverSettings(dim=args.dim, **solver), _dissipation(args), args.out)
    result = run_sweep(spec, workers=args.workers)
    if not args.out:
        sys.stdout.write(result.csv_text())
    else:
        print(f"wrote {args.out} ({len(result.rows)} rows, {len(result.failed)} failed)")
    return result


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args):
    if _sweep_or_none(args, Task.SPECTRUM, n_keep=args.n_keep):
        return
    p = _params(args)
    h = build_hamiltonian(p, args.dim)
    spec = spectra.eigensystem(h, min(args.n_keep, h.dim))
    _emit(
        {
            "params": p.as_dict(),
            "dim": h.dim,
            "quasi_energies": spec.energies,
            "transitions": spectra.transition_spectrum(spec),
            "parity": spec.parity(),
            "warnings": list(h.warnings),
        },
        args,
    )


def cmd_gaps(args):
    pairs = tuple(tuple(int(i) for i in s.split(",")) for s in args.pairs)
    if any(len(pr) != 2 for pr in pairs):
        raise UsageError("--pairs entries look like 4,5")
    if not args.axis:
        raise UsageError("gaps needs --axis NAME START STOP COUNT")
    _sweep_or_none(args, Task.GAP_TRACE, pairs=pairs, n_keep=args.n_keep)


def cmd_ilas(args):
    if _sweep_or_none(args, Task.ILAS, n_cff=args.n_cff):
        return
    p = _params(args)
    n_cff = args.n_cff if args.n_cff is not None else spectra.default_n_cff(p.depth_drive)
    h = build_hamiltonian(p, args.dim)
    spec = spectra.eigensystem(h, min(n_cff + 2, h.dim))
    _emit({"params": p.as_dict(), "dim": h.dim, "n_cff": n_cff, "ilas": spectra.ilas(spec, n_cff)}, args)


def cmd_dynamics(args):
    if _sweep_or_none(args, Task.DYNAMICS_T, method=args.method, t_max=args.tmax):
        return
    p = _params(args)
    fit = dynamics.activation_time(p, _dissipation(args), args.dim, args.method, args.tmax)
    _emit(
        {
            "params": p.as_dict(),
            "dim": args.dim or default_dim(p),
            "T": fit.T,
            "offset": fit.O,
            "fit_rmse": fit.rmse,
            "method": fit.method.value,
            "warnings": fit.warnings,
            "sector_rates": [vars(r) for r in fit.sector_rates],
        },
        args,
    )


def cmd_steady(args):
    task = Task.DETAILED_BALANCE if args.detailed_balance else Task.STEADY_RATIO
    if _sweep_or_none(args, task):
        return
    p, d = _params(args), _dissipation(args)
    out = {"params": p.as_dict()}
    p_sh, ratio = dynamics.steady_ratio(p, d, args.dim)
    out.update(p_shallow=p_sh, ratio=ratio)
    if args.detailed_balance:
        rep = dynamics.detailed_balance_at(p, d, args.dim)
        out.update(beta_avg=rep.beta_avg, beta_std=rep.beta_std, trace_distance=rep.trace_distance, beta_values=rep.beta_values)
    _emit(out, args)


def cmd_ebk(args):
    if args.model != "kpo":
        raise UsageError("ebk is defined for the KPO model")
    if _sweep_or_none(args, Task.EBK):
        return
    phi = math.radians(args.phi_deg)
    if args.n is None:
        p = _params(args)
        land = semiclassics.analyze_landscape(p)
        a = semiclassics.lobe_action(p, "shallow")
        b = semiclassics.lobe_action(p, "deep")
        _emit(
            {
                "params": p.as_dict(),
                "well_minima": land.well_minima,
                "saddle": land.saddle,
                "asymmetry_A": land.asymmetry_A,
                "barrier_heights": land.barrier_heights,
                "shallow_action": a,
                "deep_action": b,
                "shallow_orbits": semiclassics.orbit_count(a),
                "deep_orbits": semiclassics.orbit_count(b),
            },
            args,
        )
        return
    lo, hi, step = args.eps2_range
    values = np.arange(lo, hi + 0.5 * step, step)
    curve = semiclassics.ebk_curve(args.n, args.well, values, phi)
    lines = ["n,well,eps1_over_K,eps2_over_K"]
    lines += [f"{curve.n_quantum},{curve.well.value},{e1!r},{e2!r}" for e1, e2 in curve.points]
    _write_lines(lines, args)
    log.info("%d eps2 values without a root", len(curve.omitted))


def cmd_intersections(args):
    lo, hi = args.eps2_range
    pts = semiclassics.triple_intersections(args.n_max, args.m_max, (lo, hi), math.radians(args.phi_deg))
    lines = ["n,m,resonance,eps1_over_K,eps2_over_K,deep_eps2_offset"]
    lines += [f"{t.n},{t.m},{t.resonance},{t.eps1!r},{t.eps2!r},{t.deep_eps2_offset!r}" for t in pts]
    _write_lines(lines, args)


def _write_lines(lines, args):
    text = "\n".join(lines) + "\n"
    if args.out:
        check_writable(args.out)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args):
    spec = load_sweep_spec(args.config)
    if args.out:
        spec = SweepSpec(spec.model, spec.axes, spec.task, spec.solver, spec.dissipation, args.out)
    if not spec.output_path:
        raise UsageError("no output path: set output_path in the config or pass --out")
    result = run_sweep(spec, workers=args.workers)
    print(f"wrote {spec.output_path} ({len(result.rows)} rows, {len(result.failed)} failed)")


def cmd_optimal(args):
    lo, hi, count = args.eps2_values
    depths = np.linspace(lo, hi, int(count))
    base = _params(args)
    curve = presets.optimal_asymmetry(
        depths, tuple(args.search), _dissipation(args), base=base, dim=args.dim or 60, step=args.step, workers=args.workers
    )
    depth_col, asym_col = ("eps2_over_K", "eps1_star") if base.family is Family.KPO else ("k2_over_k4", "k1_star")
    lines = [f"{depth_col},{asym_col},T_star,T_symmetric"]
    lines += [
        f"{v!r},{x!r},{t!r},{t0!r}"
        for v, x, t, t0 in zip(curve.depth_values.tolist(), curve.eps1_star.tolist(), curve.T_star.tolist(), curve.T_symmetric.tolist())
    ]
    _write_lines(lines, args)
    for j, err in curve.errors.items():
        log.warning("depth %g failed: %s", depths[j], err)


def cmd_reproduce(args):
    out_dir = Path(args.out or ".")
    if not out_dir.is_dir():
        raise UsageError(f"output directory {out_dir} does not exist")
    check_writable(out_dir / f"{args.figure}.csv")
    res = presets.reproduce_figure(args.figure, out_dir, args.fine, args.workers)
    for c in res.extra.get("checks", []):
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['check']} ({c['tolerance']}): {c['value']}")
    print(f"wrote {out_dir / (args.figure + '.csv')} ({len(res.rows)} rows, {len(res.failed)} failed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrwell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="quasi-energies and transition spectrum")
    _shared(p)
    p.add_argument("--n-keep", type=int, default=12)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gaps", help="tracked level-pair gaps along an axis")
    _shared(p)
    p.add_argument("--pairs", nargs="+", default=["4,5"], help="level pairs such as 4,5")
    p.add_argument("--n-keep", type=int, default=None)
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("ilas", help="inverse logarithmic anticrossing sum")
    _shared(p)
    p.add_argument("--n-cff", type=int, default=None)
    p.set_defaults(func=cmd_ilas)

    p = sub.add_parser("dynamics", help="activation time out of the shallow well")
    _shared(p)
    p.add_argument("--method", choices=["spectral", "fit"], default="spectral")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("steady", help="steady-state well populations")
    _shared(p)
    p.add_argument("--detailed-balance", action="store_true")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("ebk", help="lobe actions, or an EBK curve with --n")
    _shared(p)
    p.add_argument("--n", type=int, default=None, help="quantum number of the curve")
    p.add_argument("--well", choices=["shallow", "deep"], default="shallow")
    p.add_argument("--eps2-range", type=float, nargs=3, default=[1.0, 12.0, 0.05], metavar=("LO", "HI", "STEP"))
    p.set_defaults(func=cmd_ebk)

    p = sub.add_parser("intersections", help="parabola / EBK triple points")
    _shared(p)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--m-max", type=int, default=8)
    p.add_argument("--eps2-range", type=float, nargs=2, default=[1.0, 12.0], metavar=("LO", "HI"))
    p.set_defaults(func=cmd_intersections)

    p = sub.add_parser("sweep", help="run a sweep described by a JSON config")
    _shared(p)
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimal-asymmetry", help="argmax of T over the asymmetry for each depth")
    _shared(p)
    p.add_argument("--eps2-values", type=float, nargs=3, default=[4.0, 12.0, 9], metavar=("LO", "HI", "COUNT"))
    p.add_argument("--search", type=float, nargs=2, default=[0.0, 3.0], metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.05)
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("reproduce", help="run a canned figure preset")
    _shared(p)
    p.add_argument("figure", choices=presets.FIGURES)
    p.add_argument("--fine", type=float, default=1.0, help="grid resolution multiplier")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, KerrwellError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
