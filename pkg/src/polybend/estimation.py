"""Batch shape and force estimation over scenario logs.

For every sample the measured tip pose is fitted (quadratic-curvature
solver streamed with warm starts, or the closed-form constant-curvature
baseline), errors are scored against the retained ground truth, and in
force mode the tip load is recovered from the measured tensions.

Error conventions: along-body position error is the RMS over 25 evenly
spaced arclength samples of the distance between the fitted backbone and
the logged ground-truth polyline; bending-angle error compares the
unsigned tangent-to-base-axis angle at the same stations.  Force errors
are signed, per tension level, measured along the applied-force axis.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import InstrumentParams, ShapeState, backbone_position
from .rotations import matrix_from_quat, rot_z
from .scenarios import ScenarioLog
from .shape_solver import (
    SolveResult,
    SolverConfig,
    objective,
    solve_constant_curvature,
    solve_shape,
)
from .statics import TensionVector, estimate_tip_force, estimate_wrench

N_BODY_SAMPLES = 25

MODELS = ("cc", "poly2")
MODES = ("shape", "shape+force")
WRENCH_MODES = ("force-only", "min-norm")


def model_backbone_points(state: ShapeState, params: InstrumentParams,
                          s_values):
    """Base-frame backbone points of the fitted model at given arclengths."""
    Rzm = rot_z(-state.delta)
    return np.array([Rzm @ backbone_position(state, params, s) for s in s_values])


def interp_polyline(polyline, stations, s_values_mm):
    """Linear interpolation of a ground-truth polyline by arclength."""
    return np.column_stack([
        np.interp(s_values_mm, stations, polyline[:, k]) for k in range(3)])


def tangent_angles(points):
    """Unsigned angle between successive-segment tangents and the base axis."""
    seg = np.diff(points, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    norms[norms == 0.0] = 1.0
    cosang = np.clip(seg[:, 2] / norms, -1.0, 1.0)
    return np.arccos(cosang)


def body_errors(state, params, polyline, stations):
    """(position RMS mm, bending-angle RMS rad) against a GT polyline."""
    s_norm = np.linspace(0.0, 1.0, N_BODY_SAMPLES)
    model_pts = model_backbone_points(state, params, s_norm)
    gt_pts = interp_polyline(polyline, stations, s_norm * params.L)
    pos_rms = float(np.sqrt(np.mean(np.sum((model_pts - gt_pts) ** 2, axis=1))))
    ang_rms = float(np.sqrt(np.mean(
        (tangent_angles(model_pts) - tangent_angles(gt_pts)) ** 2)))
    return pos_rms, ang_rms


@dataclass
class SampleEstimate:
    t: float
    solve: SolveResult
    body_pos_rms: float
    body_angle_rms: float
    gt_tip_error: float
    wrench: np.ndarray = None       # (6,) when force mode ran on this row
    wrench_residual_norm: float = None
    rank_deficient: bool = False


@dataclass
class EstimationResult:
    model: str
    mode: str
    samples: list
    summary: dict
    log: ScenarioLog = field(repr=False, default=None)


def _fit_cc(observed, params) -> SolveResult:
    state = solve_constant_curvature(observed, params)
    from .kinematics import forward_pose
    from .rotations import log_so3
    predicted = forward_pose(state, params)
    return SolveResult(
        state=state,
        objective=float(objective(state, params, observed)),
        iterations=0,
        converged=True,
        tip_position_error=float(np.linalg.norm(
            observed.position - predicted.position)),
        tip_angle_error=float(np.linalg.norm(
            log_so3(observed.rotation @ predicted.rotation.T))),
    )


def estimate_log(log: ScenarioLog, model="poly2", mode="shape",
                 solver_config: SolverConfig = None,
                 wrench_mode="force-only") -> EstimationResult:
    """Run per-sample estimation over a scenario log."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if wrench_mode not in WRENCH_MODES:
        raise ValueError(f"wrench_mode must be one of {WRENCH_MODES}")
    params = log.params
    if solver_config is not None:
        config = solver_config
    else:
        # MAP weighting: modal prior strength matches the scaled pose-noise
        # variance recorded with the log, so clean logs run unregularized
        noise_var = ((log.noise.sigma_pos_mm / params.L) ** 2
                     + np.deg2rad(log.noise.sigma_rot_deg) ** 2)
        config = SolverConfig(modal_regularization_weight=noise_var)

    samples = []
    rejected_rows = 0
    nonconverged = 0
    rank_deficient = 0
    previous = None
    for i in range(log.n_samples):
        observed = log.measured_pose(i)
        if model == "cc":
            solve = _fit_cc(observed, params)
        else:
            # constant-curvature seeding keeps every fit in the physical
            # basin; drifting along the weakly observable modal direction
            # (previous-frame chaining under pose noise) is a random walk.
            # The previous state is only the fallback when the closed-form
            # seed is unavailable.
            try:
                solve = solve_shape(observed, params, config)
            except ValueError:
                if previous is None:
                    raise
                from dataclasses import replace
                cfg = replace(config, initial_state=previous,
                              seed_from_constant_curvature=False)
                solve = solve_shape(observed, params, cfg)
            previous = solve.state
            if not solve.converged:
                nonconverged += 1

        pos_rms, ang_rms = body_errors(solve.state, params,
                                       log.gt_polyline[i], log.stations)
        gt_tip_error = float(np.linalg.norm(
            log.gt_pos[i] - model_backbone_points(
                solve.state, params, [1.0])[0]))
        sample = SampleEstimate(
            t=float(log.t[i]), solve=solve,
            body_pos_rms=pos_rms, body_angle_rms=ang_rms,
            gt_tip_error=gt_tip_error)

        if mode == "shape+force":
            tau_row = log.tau_meas[i]
            if np.any(tau_row < 0.0) or not np.all(np.isfinite(tau_row)):
                rejected_rows += 1
            else:
                tensions = TensionVector(tau_row)
                if wrench_mode == "force-only":
                    report = estimate_tip_force(solve.state, params, tensions)
                else:
                    report = estimate_wrench(solve.state, params, tensions)
                sample.wrench = report.wrench_estimate.as_vector()
                sample.wrench_residual_norm = float(
                    np.linalg.norm(report.residual))
                sample.rank_deficient = report.rank_deficiency_flag
                rank_deficient += int(report.rank_deficiency_flag)
        samples.append(sample)

    summary = {
        "model": model,
        "mode": mode,
        "samples": log.n_samples,
        "rejected_rows": rejected_rows,
        "nonconverged_solves": nonconverged,
        "rank_deficient_estimates": rank_deficient,
        "rms_tip_position_error_mm": _rms([s.gt_tip_error for s in samples]),
        "rms_body_position_error_mm": _rms([s.body_pos_rms for s in samples]),
        "rms_bending_angle_error_rad": _rms([s.body_angle_rms for s in samples]),
    }
    if mode == "shape+force":
        summary["force_levels"] = _force_level_table(log, samples, wrench_mode)
    return EstimationResult(model=model, mode=mode, samples=samples,
                            summary=summary, log=log)


def _rms(values):
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(values**2))) if values.size else 0.0


def _mean_pose(log: ScenarioLog, rows) -> "RigidTransform":
    """Average the measured poses over a static plateau.

    Positions average linearly; the tightly clustered quaternions are
    sign-aligned and renormalized.  Averaging the raw sensor data before
    the nonlinear fit suppresses both the noise and the rectification
    bias the fit would otherwise pick up sample by sample.
    """
    from .kinematics import RigidTransform
    pos = log.pose_meas_pos[rows].mean(axis=0)
    qs = log.pose_meas_quat[rows]
    qs = np.where((qs @ qs[0])[:, None] < 0.0, -qs, qs)
    q = qs.mean(axis=0)
    q /= np.linalg.norm(q)
    return RigidTransform(rotation=matrix_from_quat(q), position=pos)


def _force_level_table(log: ScenarioLog, samples, wrench_mode):
    """Signed force error per distinct applied-force plateau.

    Reports two aggregates: the mean of the per-sample recoveries, and a
    steady-state recovery computed from the plateau-averaged pose and
    tensions (one fit, one estimate per level).
    """
    applied = log.wrench_applied[:, :3]
    mags = np.linalg.norm(applied, axis=1)
    levels = np.unique(np.round(mags, 9))
    params = log.params
    table = []
    for level in levels:
        rows = np.flatnonzero(np.isclose(mags, level))
        rec = []
        valid_rows = []
        axis = np.array([0.0, 0.0, 1.0])
        for i in rows:
            if samples[i].wrench is None:
                continue
            if level > 0.0:
                axis = applied[i] / mags[i]
            rec.append(float(samples[i].wrench[:3] @ axis))
            valid_rows.append(i)
        if not rec:
            continue
        applied_along = float(level)
        mean_rec = float(np.mean(rec))
        entry = {
            "applied_n": applied_along,
            "recovered_mean_n": mean_rec,
            "signed_error_n": mean_rec - applied_along,
            "n_samples": len(rec),
        }
        valid_rows = np.asarray(valid_rows)
        pose = _mean_pose(log, valid_rows)
        mean_tau = TensionVector(np.clip(
            log.tau_meas[valid_rows].mean(axis=0), 0.0, None))
        noise_var = ((log.noise.sigma_pos_mm / params.L) ** 2
                     + np.deg2rad(log.noise.sigma_rot_deg) ** 2) / len(valid_rows)
        cfg = SolverConfig(modal_regularization_weight=noise_var)
        state = solve_shape(pose, params, cfg).state
        if wrench_mode == "force-only":
            rep = estimate_tip_force(state, params, mean_tau)
        else:
            rep = estimate_wrench(state, params, mean_tau)
        steady = float(rep.wrench_estimate.force @ axis)
        entry["recovered_steady_n"] = steady
        if applied_along > 0.0:
            entry["rel_error"] = (mean_rec - applied_along) / applied_along
            entry["rel_error_steady"] = (steady - applied_along) / applied_along
        table.append(entry)
    return table


def write_estimates(result: EstimationResult, out_dir, stem,
                    write_shapes=True):
    """Per-sample CSV, summary JSON, and plot-ready shape polylines."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = result.log.params

    est_path = out / f"{stem}.estimates.csv"
    force_cols = ["fx", "fy", "fz", "mx", "my", "mz",
                  "residual_norm", "rank_deficient"] \
        if result.mode == "shape+force" else []
    with open(est_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m0", "m1", "m2", "delta", "objective", "iterations",
                    "converged", "tip_pos_err_mm", "tip_rot_err_rad",
                    "body_pos_rms_mm", "body_angle_rms_rad",
                    "gt_tip_err_mm"] + force_cols)
        for s in result.samples:
            row = [repr(float(v)) for v in (
                s.t, s.solve.state.m0, s.solve.state.m1, s.solve.state.m2,
                s.solve.state.delta, s.solve.objective)]
            row += [s.solve.iterations, int(s.solve.converged)]
            row += [repr(float(v)) for v in (
                s.solve.tip_position_error, s.solve.tip_angle_error,
                s.body_pos_rms, s.body_angle_rms, s.gt_tip_error)]
            if result.mode == "shape+force":
                if s.wrench is None:
                    row += [""] * 7 + [""]
                else:
                    row += [repr(float(v)) for v in s.wrench]
                    row += [repr(float(s.wrench_residual_norm)),
                            int(s.rank_deficient)]
            w.writerow(row)

    summary_path = out / f"{stem}.summary.json"
    with open(summary_path, "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if write_shapes:
        shapes_path = out / f"{stem}.shapes.csv"
        s_norm = np.linspace(0.0, 1.0, N_BODY_SAMPLES)
        with open(shapes_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "source", "s_norm", "x", "y", "z"])
            for i, s in enumerate(result.samples):
                gt_pts = interp_polyline(result.log.gt_polyline[i],
                                         result.log.stations,
                                         s_norm * params.L)
                fit_pts = model_backbone_points(s.solve.state, params, s_norm)
                for k in range(N_BODY_SAMPLES):
                    w.writerow([repr(float(s.t)), "gt",
                                repr(float(s_norm[k]))]
                               + [repr(float(v)) for v in gt_pts[k]])
                for k in range(N_BODY_SAMPLES):
                    w.writerow([repr(float(s.t)), result.model,
                                repr(float(s_norm[k]))]
                               + [repr(float(v)) for v in fit_pts[k]])
    return est_path, summary_path
