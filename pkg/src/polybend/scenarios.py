"""Synthetic experiment scenarios: generation, logging, and file formats.

A scenario is a quasi-static sweep: at each sample time the tension and
tip-wrench profiles are evaluated, the elastica plant is solved (warm
started from the previous sample), and the noiseless ground truth is
logged next to sensor channels with Gaussian noise applied to the tip
pose and to the tension readings via the simulated actuation unit.

File layout per scenario (all flat files, deterministic for a fixed seed):

    <stem>.csv            sensor log: t, px, py, pz, qw, qx, qy, qz,
                          tau1..tauN, fx, fy, fz, mx, my, mz
    <stem>.gt.csv         noiseless pose and tensions per sample
    <stem>.polyline.csv   ground-truth backbone: t, station_mm, x, y, z
    <stem>.json           sidecar: schema version, spec, file references
"""

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .actuation import ActuationUnitSim, chirp_profile, measure_tension
from .kinematics import InstrumentParams, RigidTransform
from .plant import ElasticaPlant, PlantEquilibrium, plant_equilibrium
from .rotations import exp_so3, matrix_from_quat, quat_from_matrix, rot_z
from .statics import TensionVector, Wrench, articulation_tensions

SCHEMA_VERSION = "1.0"

SCENARIO_KINDS = ("free-articulation", "tip-contact", "tension-staircase", "chirp")

LOG_COLUMNS_FIXED = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"]
WRENCH_COLUMNS = ["fx", "fy", "fz", "mx", "my", "mz"]


@dataclass(frozen=True)
class NoiseSpec:
    sigma_pos_mm: float = 0.5
    sigma_rot_deg: float = 0.5
    sigma_tension_n: float = 0.05

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0)

    def to_json_dict(self):
        return {"sigma_pos_mm": self.sigma_pos_mm,
                "sigma_rot_deg": self.sigma_rot_deg,
                "sigma_tension_n": self.sigma_tension_n}

    @classmethod
    def from_json_dict(cls, d):
        return cls(sigma_pos_mm=float(d["sigma_pos_mm"]),
                   sigma_rot_deg=float(d["sigma_rot_deg"]),
                   sigma_tension_n=float(d["sigma_tension_n"]))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to regenerate a scenario byte-for-byte."""

    kind: str = "free-articulation"
    params: InstrumentParams = field(default_factory=InstrumentParams)
    theta_deg: float = 45.0
    delta_deg: float = 135.0
    # tip-contact pairs rising tension levels with rising contact force
    # (pressing harder requires pulling harder).  The force schedule is
    # affine in the level: base + step*(level-1).  Forces large relative
    # to tension push the true shape outside the fitted family; forces
    # below a few tenths of a newton drown in the pose-noise floor.
    tension_levels: tuple = (2.5, 3.0, 3.5, 4.0, 4.5)
    contact_force_base_n: float = 0.5
    contact_force_step_n: float = 0.15
    pretension_n: float = 0.2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    duration_s: float = 4.0
    rate_hz: float = 50.0
    n_links: int = 50
    chirp_magnitude_rad: float = 0.052
    chirp_f_start_hz: float = 0.1
    chirp_f_end_hz: float = 10.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(
                f"invalid field 'kind': {self.kind!r} is not one of {SCENARIO_KINDS}")
        if not (self.duration_s > 0.0):
            raise ValueError(f"invalid field 'duration_s': must be > 0, got {self.duration_s}")
        if not (self.rate_hz > 0.0):
            raise ValueError(f"invalid field 'rate_hz': must be > 0, got {self.rate_hz}")
        if len(self.tension_levels) < 1:
            raise ValueError("invalid field 'tension_levels': need at least one level")
        if any(s <= 0.0 for s in self.tension_levels):
            raise ValueError("invalid field 'tension_levels': scales must be positive")
        if self.pretension_n < 0.0:
            raise ValueError("invalid field 'pretension_n': must be >= 0")
        if self.seed < 0:
            raise ValueError("invalid field 'seed': must be >= 0")

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "instrument": self.params.to_json_dict(),
            "theta_deg": self.theta_deg,
            "delta_deg": self.delta_deg,
            "tension_levels": list(self.tension_levels),
            "contact_force_base_n": self.contact_force_base_n,
            "contact_force_step_n": self.contact_force_step_n,
            "pretension_n": self.pretension_n,
            "noise": self.noise.to_json_dict(),
            "seed": self.seed,
            "duration_s": self.duration_s,
            "rate_hz": self.rate_hz,
            "n_links": self.n_links,
            "chirp_magnitude_rad": self.chirp_magnitude_rad,
            "chirp_f_start_hz": self.chirp_f_start_hz,
            "chirp_f_end_hz": self.chirp_f_end_hz,
        }

    @classmethod
    def from_json_dict(cls, d):
        known = {
            "kind": d.get("kind", "free-articulation"),
            "theta_deg": float(d.get("theta_deg", 45.0)),
            "delta_deg": float(d.get("delta_deg", 135.0)),
            "contact_force_base_n": float(d.get("contact_force_base_n", 0.5)),
            "contact_force_step_n": float(d.get("contact_force_step_n", 0.15)),
            "pretension_n": float(d.get("pretension_n", 0.2)),
            "seed": int(d.get("seed", 0)),
            "duration_s": float(d.get("duration_s", 4.0)),
            "rate_hz": float(d.get("rate_hz", 50.0)),
            "n_links": int(d.get("n_links", 50)),
            "chirp_magnitude_rad": float(d.get("chirp_magnitude_rad", 0.052)),
            "chirp_f_start_hz": float(d.get("chirp_f_start_hz", 0.1)),
            "chirp_f_end_hz": float(d.get("chirp_f_end_hz", 10.0)),
        }
        if "tension_levels" in d:
            known["tension_levels"] = tuple(float(v) for v in d["tension_levels"])
        if "instrument" in d:
            known["params"] = InstrumentParams.from_json_dict(d["instrument"])
        if "noise" in d:
            known["noise"] = NoiseSpec.from_json_dict(d["noise"])
        return cls(**known)

    @classmethod
    def from_json_file(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ScenarioLog:
    """Time series of sensor channels plus retained ground truth."""

    t: np.ndarray                 # (N,)
    pose_meas_pos: np.ndarray     # (N, 3) noisy tip position
    pose_meas_quat: np.ndarray    # (N, 4) noisy tip orientation (w,x,y,z)
    tau_meas: np.ndarray          # (N, n_cables) measured tensions
    wrench_applied: np.ndarray    # (N, 6) ground-truth applied tip wrench
    gt_pos: np.ndarray            # (N, 3)
    gt_quat: np.ndarray           # (N, 4)
    gt_tau: np.ndarray            # (N, n_cables)
    gt_polyline: np.ndarray       # (N, n_pts, 3)
    stations: np.ndarray          # (n_pts,) arclength of each polyline point
    params: InstrumentParams
    noise: NoiseSpec
    seed: int
    kind: str
    link_angles: np.ndarray = None   # (N, n_links, 2), in-memory only
    saturated_samples: int = 0

    @property
    def n_samples(self):
        return len(self.t)

    def measured_pose(self, i) -> RigidTransform:
        return RigidTransform(rotation=matrix_from_quat(self.pose_meas_quat[i]),
                              position=self.pose_meas_pos[i].copy())

    def gt_pose(self, i) -> RigidTransform:
        return RigidTransform(rotation=matrix_from_quat(self.gt_quat[i]),
                              position=self.gt_pos[i].copy())


def _tau_columns(n_cables):
    return [f"tau{i + 1}" for i in range(n_cables)]


def write_scenario(log: ScenarioLog, out_dir, stem):
    """Write the scenario files; returns the sidecar path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_cables = log.tau_meas.shape[1]
    tau_cols = _tau_columns(n_cables)

    main = out / f"{stem}.csv"
    with open(main, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS_FIXED + tau_cols + WRENCH_COLUMNS)
        for i in range(log.n_samples):
            w.writerow([repr(float(v)) for v in (
                log.t[i], *log.pose_meas_pos[i], *log.pose_meas_quat[i],
                *log.tau_meas[i], *log.wrench_applied[i])])

    gt = out / f"{stem}.gt.csv"
    with open(gt, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS_FIXED + tau_cols)
        for i in range(log.n_samples):
            w.writerow([repr(float(v)) for v in (
                log.t[i], *log.gt_pos[i], *log.gt_quat[i], *log.gt_tau[i])])

    poly = out / f"{stem}.polyline.csv"
    with open(poly, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "station_mm", "x", "y", "z"])
        for i in range(log.n_samples):
            for k in range(len(log.stations)):
                w.writerow([repr(float(v)) for v in (
                    log.t[i], log.stations[k], *log.gt_polyline[i, k])])

    sidecar = out / f"{stem}.json"
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": log.kind,
        "seed": log.seed,
        "instrument": log.params.to_json_dict(),
        "noise": log.noise.to_json_dict(),
        "saturated_samples": log.saturated_samples,
        "n_samples": log.n_samples,
        "files": {"log": main.name, "ground_truth": gt.name,
                  "polyline": poly.name},
        "non_paper_defaults": (
            "instrument geometry and noise magnitudes are repository "
            "conventions, not published hardware values"),
    }
    with open(sidecar, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def _require_columns(header, expected, path):
    for col in expected:
        if col not in header:
            raise ValueError(f"{path}: missing required column '{col}'")


def read_scenario(sidecar_path) -> ScenarioLog:
    """Load a scenario from its sidecar; rejects unknown schema majors."""
    sidecar_path = Path(sidecar_path)
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    major = str(meta.get("schema_version", "0")).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise ValueError(
            f"unsupported schema version {meta.get('schema_version')!r}; "
            f"this reader handles major {SCHEMA_VERSION.split('.')[0]}")
    params = InstrumentParams.from_json_dict(meta["instrument"])
    noise = NoiseSpec.from_json_dict(meta["noise"])
    base = sidecar_path.parent
    tau_cols = _tau_columns(params.n_cables)

    def load_csv(name, required):
        path = base / name
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], rows[1:]
        _require_columns(header, required, path)
        idx = {c: header.index(c) for c in header}
        arr = np.array([[float(v) for v in row] for row in data])
        return header, idx, arr

    _, idx, main = load_csv(meta["files"]["log"],
                            LOG_COLUMNS_FIXED + tau_cols + WRENCH_COLUMNS)
    _, gidx, gt = load_csv(meta["files"]["ground_truth"],
                           LOG_COLUMNS_FIXED + tau_cols)
    _, pidx, poly = load_csv(meta["files"]["polyline"],
                             ["t", "station_mm", "x", "y", "z"])

    n = main.shape[0]
    taus = np.column_stack([main[:, idx[c]] for c in tau_cols])
    gt_taus = np.column_stack([gt[:, gidx[c]] for c in tau_cols])
    stations = np.unique(poly[:, pidx["station_mm"]])
    n_pts = len(stations)
    polyline = poly[:, [pidx["x"], pidx["y"], pidx["z"]]].reshape(n, n_pts, 3)

    return ScenarioLog(
        t=main[:, idx["t"]],
        pose_meas_pos=main[:, [idx["px"], idx["py"], idx["pz"]]],
        pose_meas_quat=main[:, [idx["qw"], idx["qx"], idx["qy"], idx["qz"]]],
        tau_meas=taus,
        wrench_applied=main[:, [idx[c] for c in WRENCH_COLUMNS]],
        gt_pos=gt[:, [gidx["px"], gidx["py"], gidx["pz"]]],
        gt_quat=gt[:, [gidx["qw"], gidx["qx"], gidx["qy"], gidx["qz"]]],
        gt_tau=gt_taus,
        gt_polyline=polyline,
        stations=stations,
        params=params,
        noise=noise,
        seed=int(meta["seed"]),
        kind=meta["kind"],
        saturated_samples=int(meta.get("saturated_samples", 0)),
    )


# ---------------------------------------------------------------------------
# profile construction per scenario kind

def _staircase(levels, duration):
    """Piecewise-constant level index over [0, duration)."""
    levels = list(levels)
    n_lev = len(levels)

    def at(t):
        k = min(int(t / duration * n_lev), n_lev - 1)
        return levels[k]

    return at


def contact_normal(theta_e, delta):
    """Unit direction of the platform reaction for a tip-contact scenario.

    In the bending plane the reaction opposes further articulation
    (perpendicular to the tip tangent); rotated into the base frame.
    """
    n_plane = np.array([-np.cos(theta_e), 0.0, np.sin(theta_e)])
    return rot_z(-delta) @ n_plane


def build_profiles(spec: ExperimentSpec):
    """Tension and wrench time-functions for an experiment spec."""
    params = spec.params
    theta = np.deg2rad(spec.theta_deg)
    delta = np.deg2rad(spec.delta_deg)
    zero_wrench = Wrench.zero()

    def articulation(scale_theta):
        return articulation_tensions(params, theta * scale_theta, delta,
                                     pretension=spec.pretension_n)

    if spec.kind == "free-articulation":
        # pull to the target over the first 40%, hold, release symmetric
        def tension_profile(t):
            x = t / spec.duration_s
            ramp = min(x / 0.4, 1.0) if x < 0.6 else max((1.0 - x) / 0.4, 0.0)
            return articulation(ramp)

        return tension_profile, (lambda t: zero_wrench)

    if spec.kind == "tension-staircase":
        level_at = _staircase(spec.tension_levels, spec.duration_s)
        base = articulation(1.0)

        def tension_profile(t):
            return TensionVector(base.tau * level_at(t))

        return tension_profile, (lambda t: zero_wrench)

    if spec.kind == "tip-contact":
        level_idx = _staircase(list(range(1, len(spec.tension_levels) + 1)),
                               spec.duration_s)
        scales = list(spec.tension_levels)
        base = articulation(1.0)
        n_hat = contact_normal(theta, delta)

        def tension_profile(t):
            return TensionVector(base.tau * scales[level_idx(t) - 1])

        def wrench_profile(t):
            f = spec.contact_force_base_n \
                + spec.contact_force_step_n * (level_idx(t) - 1)
            return Wrench(force=f * n_hat, moment=np.zeros(3))

        return tension_profile, wrench_profile

    if spec.kind == "chirp":
        wave = chirp_profile(spec.chirp_magnitude_rad, spec.chirp_f_start_hz,
                             spec.chirp_f_end_hz, spec.duration_s)

        def tension_profile(t):
            return articulation(1.0 + wave(t) / max(theta, 1e-6))

        return tension_profile, (lambda t: zero_wrench)

    raise ValueError(f"invalid field 'kind': {spec.kind!r}")


def generate_scenario(plant: ElasticaPlant, tension_profile, tip_wrench_profile,
                      noise: NoiseSpec, duration, rate, seed=0,
                      kind="custom") -> ScenarioLog:
    """Quasi-static sweep of the plant along the given profiles.

    Solves the plant at each sample (warm started), then corrupts the tip
    pose and the tension readings per the noise spec.  Ground truth is
    retained alongside the noisy channels; with a zero noise spec the
    noisy channels equal the ground truth exactly.
    """
    rng = np.random.default_rng(seed)
    params = plant.params
    n_samples = max(int(round(duration * rate)), 1)
    t_axis = np.arange(n_samples) / rate

    unit = ActuationUnitSim(torque_noise_sigma=noise.sigma_tension_n * 10.0)
    # torque noise sigma chosen so tension noise is sigma_tension_n after
    # dividing by the pulley radius (10 mm)

    n_pts = plant.n_links + 2
    log = ScenarioLog(
        t=t_axis,
        pose_meas_pos=np.zeros((n_samples, 3)),
        pose_meas_quat=np.zeros((n_samples, 4)),
        tau_meas=np.zeros((n_samples, params.n_cables)),
        wrench_applied=np.zeros((n_samples, 6)),
        gt_pos=np.zeros((n_samples, 3)),
        gt_quat=np.zeros((n_samples, 4)),
        gt_tau=np.zeros((n_samples, params.n_cables)),
        gt_polyline=np.zeros((n_samples, n_pts, 3)),
        stations=np.zeros(n_pts),
        params=params,
        noise=noise,
        seed=seed,
        kind=kind,
        link_angles=np.zeros((n_samples, plant.n_links, 2)),
    )

    sigma_rot = np.deg2rad(noise.sigma_rot_deg)
    angles = None
    saturated = 0
    for i, t in enumerate(t_axis):
        tension = tension_profile(t)
        wrench = tip_wrench_profile(t)
        eq = plant_equilibrium(plant, tension, wrench, initial_angles=angles)
        angles = eq.link_angles

        log.stations = eq.stations
        log.gt_polyline[i] = eq.polyline
        log.link_angles[i] = eq.link_angles
        log.gt_pos[i] = eq.tip_pose.position
        log.gt_quat[i] = quat_from_matrix(eq.tip_pose.rotation)
        log.gt_tau[i] = tension.tau
        log.wrench_applied[i] = wrench.as_vector()

        if noise.sigma_pos_mm > 0.0:
            log.pose_meas_pos[i] = eq.tip_pose.position \
                + rng.normal(0.0, noise.sigma_pos_mm, 3)
        else:
            log.pose_meas_pos[i] = eq.tip_pose.position
        if sigma_rot > 0.0:
            R_noisy = exp_so3(rng.normal(0.0, sigma_rot, 3)) @ eq.tip_pose.rotation
        else:
            R_noisy = eq.tip_pose.rotation
        log.pose_meas_quat[i] = quat_from_matrix(R_noisy)

        for c in range(params.n_cables):
            meas, sat = measure_tension(
                tension.tau[c], unit,
                rng if noise.sigma_tension_n > 0.0 else None)
            log.tau_meas[i, c] = meas
            saturated += int(sat)

    log.saturated_samples = saturated
    return log


def build_scenario(spec: ExperimentSpec) -> ScenarioLog:
    """Generate the scenario described by an experiment spec."""
    plant = ElasticaPlant(params=spec.params, n_links=spec.n_links)
    tension_profile, wrench_profile = build_profiles(spec)
    return generate_scenario(plant, tension_profile, wrench_profile,
                             spec.noise, spec.duration_s, spec.rate_hz,
                             seed=spec.seed, kind=spec.kind)
