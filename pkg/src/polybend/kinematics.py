"""Shape-state kinematics for a tendon-driven continuum segment.

The bent configuration is described by four coordinates: three modal
coefficients (m0, m1, m2) of a quadratic curvature profile over the
normalized arclength s in [0, 1], plus the bending-plane direction angle
delta about the base z-axis.  Curvature here is measured per unit
*normalized* arclength, so bending angles come out in radians without a
length factor.

Units: millimeters for lengths, radians for angles.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .rotations import rot_y, rot_z

# Fixed-order Gauss-Legendre rule used for all backbone integrals.  16 points
# resolve the sin/cos-of-cubic integrands far below 1e-12 relative error for
# bending angles up to pi, at constant cost.
_GL_NODES, _GL_WEIGHTS = leggauss(16)
# mapped to [0, 1]
_GL_T01 = 0.5 * (_GL_NODES + 1.0)
_GL_W01 = 0.5 * _GL_WEIGHTS

_ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class ShapeState:
    """Modal curvature coefficients plus bending-plane direction.

    curvature(s) = m0 + m1*s + m2*s**2, s in [0, 1] (normalized arclength);
    delta rotates the bending plane about the base z-axis.
    """

    m0: float
    m1: float
    m2: float
    delta: float

    def __post_init__(self):
        vals = (self.m0, self.m1, self.m2, self.delta)
        if not all(np.isfinite(vals)):
            raise ValueError(f"shape state components must be finite, got {vals}")

    @property
    def modal(self):
        return np.array([self.m0, self.m1, self.m2])

    def theta_end(self):
        """Total bending angle at the tip, theta(s=1)."""
        return self.m0 + self.m1 / 2.0 + self.m2 / 3.0

    def as_vector(self):
        return np.array([self.m0, self.m1, self.m2, self.delta])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (4,):
            raise ValueError(f"shape state vector must have 4 components, got {v.shape}")
        return cls(*v)

    def canonicalized(self):
        """Equivalent state with theta_end >= 0 and delta in (-pi, pi].

        (m, delta) and (-m, delta + pi) describe the same shape; the
        canonical form keeps the bend angle non-negative.
        """
        m0, m1, m2, delta = self.m0, self.m1, self.m2, self.delta
        if self.theta_end() < 0.0:
            m0, m1, m2 = -m0, -m1, -m2
            delta = delta + np.pi
        delta = wrap_angle(delta)
        return ShapeState(m0, m1, m2, delta)

    def to_json_dict(self):
        return {"m0": self.m0, "m1": self.m1, "m2": self.m2, "delta": self.delta}

    @classmethod
    def from_json_dict(cls, d):
        return cls(m0=float(d["m0"]), m1=float(d["m1"]), m2=float(d["m2"]),
                   delta=float(d["delta"]))


def wrap_angle(angle):
    """Wrap an angle into (-pi, pi]."""
    wrapped = np.remainder(angle + np.pi, 2.0 * np.pi) - np.pi
    if wrapped == -np.pi:
        wrapped = np.pi
    return float(wrapped)


@dataclass(frozen=True)
class InstrumentParams:
    """Geometry and material constants of one continuum segment.

    L: backbone length (mm); r: cable pitch-circle radius (mm);
    gamma0: mounting angle of cable 1 in the cross-section (rad);
    beta: angular spacing between adjacent cables (rad);
    E: Young's modulus (N/mm^2); I: second moment of area (mm^4).
    """

    L: float = 60.0
    r: float = 3.0
    gamma0: float = 0.0
    beta: float = np.pi / 2.0
    n_cables: int = 4
    E: float = 6.0e4
    I: float = np.pi * 0.6**4 / 64.0  # 0.6 mm NiTi wire
    evenly_spaced: bool = True

    def __post_init__(self):
        if not (self.L > 0.0):
            raise ValueError(f"L must be positive, got {self.L}")
        if not (self.r > 0.0):
            raise ValueError(f"r must be positive, got {self.r}")
        if self.n_cables not in (2, 3, 4):
            raise ValueError(f"n_cables must be 2, 3 or 4, got {self.n_cables}")
        if not (self.E > 0.0):
            raise ValueError(f"E must be positive, got {self.E}")
        if not (self.I > 0.0):
            raise ValueError(f"I must be positive, got {self.I}")
        if self.evenly_spaced and abs(self.beta * self.n_cables - 2.0 * np.pi) > 1e-12:
            raise ValueError(
                f"evenly spaced cables require beta * n_cables == 2*pi, "
                f"got beta={self.beta}, n_cables={self.n_cables}")

    @property
    def bending_stiffness(self):
        """E*I in N*mm^2."""
        return self.E * self.I

    def cable_mount_angles(self):
        """Body-frame angular positions of the cables in the cross-section."""
        return self.gamma0 + self.beta * np.arange(self.n_cables)

    def to_json_dict(self):
        return {
            "L_mm": self.L,
            "r_mm": self.r,
            "gamma0_rad": self.gamma0,
            "beta_rad": self.beta,
            "n_cables": self.n_cables,
            "E_nmm2": self.E,
            "I_mm4": self.I,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            L=float(d["L_mm"]),
            r=float(d["r_mm"]),
            gamma0=float(d["gamma0_rad"]),
            beta=float(d["beta_rad"]),
            n_cables=int(d["n_cables"]),
            E=float(d["E_nmm2"]),
            I=float(d["I_mm4"]),
        )

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


@dataclass(frozen=True)
class RigidTransform:
    """Homogeneous pose: 3x3 rotation plus position in mm."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        p = np.asarray(self.position, dtype=float)
        if R.shape != (3, 3) or p.shape != (3,):
            raise ValueError("rotation must be 3x3 and position a 3-vector")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "position", p)

    def validate(self):
        """Raise ValueError unless the rotation is orthonormal with det +1."""
        R = self.rotation
        err = np.max(np.abs(R.T @ R - np.eye(3)))
        if err > _ORTHONORMALITY_TOL:
            raise ValueError(f"rotation is not orthonormal (max deviation {err:.3e})")
        det_err = abs(np.linalg.det(R) - 1.0)
        if det_err > _ORTHONORMALITY_TOL:
            raise ValueError(f"rotation determinant differs from +1 by {det_err:.3e}")
        if not np.all(np.isfinite(self.position)):
            raise ValueError("position has non-finite components")
        return self

    def as_matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        return cls(rotation=T[:3, :3].copy(), position=T[:3, 3].copy())

    @classmethod
    def identity(cls):
        return cls(rotation=np.eye(3), position=np.zeros(3))


@dataclass(frozen=True)
class JointVector:
    """Signed cable pull(+>released / -<pulled-in) displacements in mm.

    q_i = L_i - L: negative entries correspond to cables reeled in.
    """

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)


def _check_arclength(s):
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"normalized arclength must lie in [0, 1], got {s}")


def curvature_at(state: ShapeState, s):
    """Curvature (per unit normalized arclength) at s in [0, 1]."""
    _check_arclength(s)
    return state.m0 + state.m1 * s + state.m2 * s**2


def bending_angle_at(state: ShapeState, s):
    """Bending angle theta(s): running integral of the curvature profile."""
    _check_arclength(s)
    return state.m0 * s + state.m1 * s**2 / 2.0 + state.m2 * s**3 / 3.0


def _bending_angle_any(state, s):
    # vectorized theta(s) without the domain check (internal quadrature use)
    return state.m0 * s + state.m1 * s**2 / 2.0 + state.m2 * s**3 / 3.0


def backbone_position(state: ShapeState, params: InstrumentParams, s=1.0):
    """Backbone position at arclength s, in the bending-plane frame.

    Integrates the unit tangent [sin(theta), 0, cos(theta)] scaled by L with
    a fixed 16-point Gauss-Legendre rule on [0, s].  The y-component is
    exactly zero by construction.
    """
    _check_arclength(s)
    t = s * _GL_T01
    theta = _bending_angle_any(state, t)
    x = params.L * s * np.dot(_GL_W01, np.sin(theta))
    z = params.L * s * np.dot(_GL_W01, np.cos(theta))
    return np.array([x, 0.0, z])


def forward_pose(state: ShapeState, params: InstrumentParams, s=1.0) -> RigidTransform:
    """Pose of the body frame at arclength s relative to the base frame.

    Rotation is the sandwich Rz(-delta) @ Ry(theta(s)) @ Rz(delta); position
    is the bending-plane integral rotated into the base frame by Rz(-delta).
    """
    _check_arclength(s)
    theta = bending_angle_at(state, s)
    Rzm = rot_z(-state.delta)
    rotation = Rzm @ rot_y(theta) @ rot_z(state.delta)
    position = Rzm @ backbone_position(state, params, s)
    return RigidTransform(rotation=rotation, position=position)


def constant_curvature_pose(theta, delta, params: InstrumentParams) -> RigidTransform:
    """Closed-form tip pose of a constant-curvature bend (analytic oracle)."""
    if abs(theta) < 1e-12:
        p_plane = np.array([0.0, 0.0, params.L])
    else:
        p_plane = params.L / theta * np.array([1.0 - np.cos(theta), 0.0, np.sin(theta)])
    Rzm = rot_z(-delta)
    return RigidTransform(rotation=Rzm @ rot_y(theta) @ rot_z(delta),
                          position=Rzm @ p_plane)


def cable_plane_angles(state: ShapeState, params: InstrumentParams):
    """Angular coordinate of each cable measured in the bending-plane frame.

    sigma_i = delta + gamma0 + (i-1)*beta.  The delta term makes the cable
    length formula and its delta-derivative mutually consistent (verified by
    finite differences in the jacobians module).
    """
    return state.delta + params.cable_mount_angles()


def cable_lengths(state: ShapeState, params: InstrumentParams):
    """Length of each cable inside the segment: L_i = L - theta_e * r * cos(sigma_i)."""
    sigma = cable_plane_angles(state, params)
    return params.L - state.theta_end() * params.r * np.cos(sigma)


def joint_displacements(state: ShapeState, params: InstrumentParams) -> JointVector:
    """Cable displacement relative to straight: q_i = L_i - L."""
    sigma = cable_plane_angles(state, params)
    return JointVector(q=-state.theta_end() * params.r * np.cos(sigma))


def random_shape_state(rng, theta_range=(0.1, 1.5), modal_spread=0.5):
    """Random state with |theta_end| in theta_range and delta in (-pi, pi].

    Draws raw modal coefficients, then rescales them so the tip bending
    angle lands uniformly in the requested range (sign random).
    """
    lo, hi = theta_range
    while True:
        m = rng.uniform(-modal_spread, modal_spread, size=3)
        theta = m[0] + m[1] / 2.0 + m[2] / 3.0
        if abs(theta) > 1e-6:
            break
    target = rng.uniform(lo, hi) * rng.choice([-1.0, 1.0])
    m = m * (target / theta)
    delta = rng.uniform(-np.pi, np.pi)
    return ShapeState(m[0], m[1], m[2], delta)
