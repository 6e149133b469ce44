"""Execution of experiment configs: Ne sweeps, time evolutions and artifacts."""

from __future__ import annotations

import gc
import json
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from ..elliptic import EllipticPESolver, compute_error_norms
from ..evolution import HeatStepper, NavierStokesStepper, SolverFailure, TimeGrid
from ..extension import RankDeficiencyError
from .config import ExperimentConfig, validate_config
from .registry import REGISTRY
from .report import ConvergenceReport, emit_csv, emit_report


def _mean_free(values, weights):
    return values - np.sum(weights * values) / np.sum(weights)


def _time_grid(time_cfg):
    return TimeGrid(time_cfg["dt"], time_cfg["T"], time_cfg.get("scheme", "bdf4"),
                    time_cfg.get("init_policy", "exact"), time_cfg.get("init_ratio", 1))


def _stokes_solver(key, problem, Ne):
    from ..stokes import ChannelStokesSolver, SphereStokesSolver, TorusStokesSolver

    if key == "stokes_channel":
        return ChannelStokesSolver(Ne, flow_rate=problem.flow_rate is not None)
    if key == "stokes_sphere":
        return SphereStokesSolver(Ne)
    return TorusStokesSolver(Ne)


def _solve_elliptic(bench, problem, Ne, cfg):
    solver = EllipticPESolver(Ne).fit(problem)
    u = solver.predict(problem.domain.interior_points)
    errors = compute_error_norms(u, problem.exact, problem.domain) if problem.exact else {}
    return {"u": u}, errors, {}, None


def _solve_heat(bench, problem, Ne, cfg):
    stepper = HeatStepper(problem, Ne, _time_grid(cfg.time))
    run = stepper.run(record_every=cfg.output["stride"])
    series = {"t": run.times, "error_Linf": run.errors, "boundary_deviation": run.boundary_deviation}
    return {"u": run.final.values}, dict(run.final_errors), {}, series


def _solve_stokes(bench, problem, Ne, cfg):
    from ..stokes import pressure_normalize

    dom = problem.domain
    solver = _stokes_solver(bench.key, problem, Ne).fit(problem)
    sol = pressure_normalize(solver.solution_, dom)
    pts = dom.interior_points
    u, p = sol.velocity(pts), sol.pressure(pts)
    errors, comps = {}, {}
    if problem.exact_velocity is not None:
        ref = problem.exact_velocity(pts)
        errors = compute_error_norms(u, ref, dom)
        for i in range(2):
            e = compute_error_norms(u[:, i], ref[:, i], dom)
            comps[f"u{i + 1}_Linf"], comps[f"u{i + 1}_L2"] = e["Linf"], e["L2"]
        pe = compute_error_norms(p, _mean_free(problem.exact_pressure(pts), dom.interior_weights), dom)
        comps["p_Linf"], comps["p_L2"] = pe["Linf"], pe["L2"]
    if problem.flow_rate is not None and hasattr(solver, "flow_rate_of"):
        comps["flow_rate"] = float(solver.flow_rate_of(sol))
    return {"u": u, "p": p}, errors, comps, None


def _solve_navier_stokes(bench, problem, Ne, cfg):
    stepper = NavierStokesStepper(problem, Ne, _time_grid(cfg.time))
    run = stepper.run(record_every=cfg.output["stride"])
    u, p = run.final.values, stepper.pressure(run.final)
    errors, comps = {}, {}
    if problem.exact_velocity is not None:
        errors = compute_error_norms(u, problem.exact_velocity(run.final.t, stepper.interior_nodes), problem.domain)
        comps = dict(run.final_errors)
    comps["max_divergence"] = float(max(run.divergence)) if run.divergence else 0.0
    series = {"t": run.times, "boundary_deviation": run.boundary_deviation, "divergence": run.divergence}
    if run.errors:
        series["error_Linf"] = run.errors
    return {"u": u, "p": p}, errors, comps, series


_SOLVERS = {"elliptic": _solve_elliptic, "heat": _solve_heat, "stokes": _solve_stokes,
            "navier_stokes": _solve_navier_stokes}


def solve_point(cfg, Ne):
    """Solve one sweep point; returns a dict with fields, errors, components, series and seconds.

    Raises:
        SolverFailure: with the problem key and ``Ne`` in the message.
    """
    bench = REGISTRY[cfg.problem]
    t0 = time.perf_counter()
    try:
        problem = bench.build(cfg.discretization, cfg.params)
        fields, errors, comps, series = _SOLVERS[bench.kind](bench, problem, Ne, cfg)
    except SolverFailure as exc:
        raise SolverFailure(f"{cfg.problem} at Ne={Ne}: {exc.message}", exc.step) from exc
    except RankDeficiencyError as exc:
        raise SolverFailure(f"{cfg.problem} at Ne={Ne}: {exc}") from exc
    seconds = time.perf_counter() - t0 if cfg.output.get("timing", True) else 0.0
    # solvers and their solutions reference each other; free the factorization before the next point
    del problem
    gc.collect()
    return {"Ne": Ne, "fields": fields, "errors": errors, "components": comps, "series": series, "seconds": seconds}


def _solve_point_from_dict(cfg_dict, Ne):
    return solve_point(ExperimentConfig(**cfg_dict), Ne)


def run_points(cfg, jobs=1):
    """Solve every sweep value, in parallel when ``jobs > 1``; results keep sweep order."""
    sweep = cfg.sweep
    if jobs <= 1 or len(sweep) == 1:
        return [solve_point(cfg, ne) for ne in sweep]
    with ProcessPoolExecutor(max_workers=min(jobs, len(sweep))) as pool:
        return list(pool.map(partial(_solve_point_from_dict, cfg.to_dict()), sweep))


def successive_differences(points, domain_weights):
    """Errors of each point against the next finer one; the last point has no row."""
    out = []
    for a, b in zip(points, points[1:]):
        comps = {}
        main = None
        for name in sorted(a["fields"]):
            d = a["fields"][name] - b["fields"][name]
            mag = np.sqrt(np.sum(d ** 2, axis=1)) if d.ndim > 1 else np.abs(d)
            norms = {"Linf": float(mag.max()), "L2": float(np.sqrt(np.sum(domain_weights * mag ** 2)))}
            comps[f"{name}_Linf"], comps[f"{name}_L2"] = norms["Linf"], norms["L2"]
            if d.ndim > 1:
                for i in range(d.shape[1]):
                    comps[f"{name}{i + 1}_Linf"] = float(np.abs(d[:, i]).max())
            if name == "u":
                main = norms
        out.append((a["Ne"], main, comps))
    return out


def build_report(cfg, points):
    """Assemble a :class:`ConvergenceReport` from solved points."""
    report = ConvergenceReport(cfg.problem, mode=cfg.mode, fit_options=dict(cfg.fit))
    if cfg.mode == "exact":
        for pt in points:
            report.rows.append((pt["Ne"], pt["errors"]["Linf"], pt["errors"]["L2"], pt["seconds"]))
            report.extra.append({"Ne": pt["Ne"], **pt["components"]})
        return report
    weights = REGISTRY[cfg.problem].build(cfg.discretization, cfg.params).domain.interior_weights
    by_ne = {pt["Ne"]: pt for pt in points}
    for ne, main, comps in successive_differences(points, weights):
        report.rows.append((ne, main["Linf"], main["L2"], by_ne[ne]["seconds"]))
        report.extra.append({"Ne": ne, **comps, **by_ne[ne]["components"]})
    return report


def _emit_components(report, path):
    keys = sorted({k for row in report.extra for k in row if k != "Ne"})
    rows = [[row["Ne"]] + [row.get(k, float("nan")) for k in keys] for row in report.extra]
    return emit_csv(rows, path, ["Ne"] + keys)


def _emit_series(series, path):
    keys = list(series)
    return emit_csv(list(zip(*(series[k] for k in keys))), path, keys)


def run_viscoelastic(cfg, outdir):
    """Run the Oldroyd-B channel problem and write its time series and summary."""
    from ..viscoelastic import OldroydBChannelSolver, OldroydBParams

    d, t, p = cfg.discretization, cfg.time, cfg.params
    stride = cfg.output["stride"]
    model = OldroydBChannelSolver(d["Nx"], d["Ny"], tuple(d["Ne"]), dt=t["dt"], T=t["T"],
                                  params=OldroydBParams(**p), tensor_Ne=d.get("tensor_Ne"), record_every=stride,
                                  half_length=d.get("half_length", 6 * np.pi), flow_weight=d.get("flow_weight", 1.0))
    snap = cfg.output.get("checkpoint_stride", 0)
    try:
        model.fit(snapshot_dir=outdir / "snapshots" if snap else None, snapshot_stride=snap)
    except RankDeficiencyError as exc:
        raise SolverFailure(f"oldroydb_channel: {exc}") from exc
    run = model.run_
    paths = [run.write_csv(outdir / "oldroydb_channel_timeseries.csv")]
    bnd = model.tau_xx_on_boundary(run.final)
    inner = model.tau_xx_interior(run.final)
    summary = {
        "problem": cfg.problem, "config": cfg.to_dict(),
        "C_D_final": run.C_D_boundary[-1], "C_D_bulk_final": run.C_D_bulk[-1],
        "max_flowrate_error": max(run.flowrate_error), "min_eig_sigma": min(run.min_eig_sigma),
        "tau_xx_max_boundary": float(bnd.max()), "tau_xx_max_interior": float(inner.max()),
        "tau_xx_max_angle": float(np.arctan2(*model.obstacle_nodes[int(np.argmax(bnd))][::-1])),
        "seconds": run.seconds if cfg.output.get("timing", True) else 0.0,
    }
    path = outdir / "oldroydb_channel_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths + [path], model


def run_experiment(config, output=None, jobs=1, paper_scale=False):
    """Run a config (dict or :class:`ExperimentConfig`) and write its artifacts.

    Args:
        config: parsed config mapping or a validated :class:`ExperimentConfig`.
        output: directory overriding ``output.directory``.
        jobs: maximum number of sweep points solved concurrently.
        paper_scale: use full-resolution defaults for problems that have them.

    Returns:
        ``(paths, result)``: the written files and the report (or viscoelastic model).
    """
    cfg = config if isinstance(config, ExperimentConfig) else validate_config(config, paper_scale)
    outdir = Path(output or cfg.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    if REGISTRY[cfg.problem].kind == "viscoelastic":
        return run_viscoelastic(cfg, outdir)
    points = run_points(cfg, jobs)
    report = build_report(cfg, points)
    key = cfg.problem
    paths = [emit_report(report, outdir / f"{key}.csv"), _emit_components(report, outdir / f"{key}_components.csv")]
    for pt in points:
        if pt["series"]:
            paths.append(_emit_series(pt["series"], outdir / f"{key}_Ne{pt['Ne']}_series.csv"))
    summary = {**report.summary(), "config": cfg.to_dict()}
    path = outdir / f"{key}_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(path)
    return paths, report
