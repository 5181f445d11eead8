"""Closed-form Jacobians of the shape-state kinematics, with an FD harness.

Two maps are differentiated with respect to the shape state
[m0, m1, m2, delta]: the cable displacements (joint space) and the tip pose
(task space).  Columns for the modal coefficients inherit the [1, 1/2, 1/3]
scaling of d(theta_e)/d(m_i).

Rotation sensitivities use the spatial (base-frame) axis-angle rate: the
column k is the angular velocity of the tip frame, expressed in the base
frame, for unit rate of shape coordinate k.  This is the convention under
which a base-frame tip moment m contributes m . omega of virtual work, as
the statics module requires.
"""

from dataclasses import dataclass

import numpy as np

from .kinematics import (
    InstrumentParams,
    RigidTransform,
    ShapeState,
    _GL_T01,
    _GL_W01,
    _bending_angle_any,
    cable_lengths,
    cable_plane_angles,
    forward_pose,
)
from .rotations import log_so3, rot_y, rot_z


@dataclass(frozen=True)
class JointShapeJacobian:
    """d(cable displacement)/d(shape state), n_cables x 4, mm per unit."""

    matrix: np.ndarray


@dataclass(frozen=True)
class TaskShapeJacobian:
    """Tip-pose sensitivity: position rows (mm) and rotation rows (rad)."""

    position_block: np.ndarray  # 3x4
    rotation_block: np.ndarray  # 3x4

    def stacked(self):
        """6x4 matrix [position_block; rotation_block]."""
        return np.vstack([self.position_block, self.rotation_block])


def joint_shape_jacobian(state: ShapeState, params: InstrumentParams) -> JointShapeJacobian:
    """Analytic derivative of q_i = -theta_e * r * cos(sigma_i)."""
    sigma = cable_plane_angles(state, params)
    cos_s = np.cos(sigma)
    sin_s = np.sin(sigma)
    theta_e = state.theta_end()
    J = -params.r * np.column_stack([cos_s, cos_s / 2.0, cos_s / 3.0,
                                     -theta_e * sin_s])
    return JointShapeJacobian(matrix=J)


# d(theta at node)/d(m_i) = tau^(i+1)/(i+1), precomputed at the GL nodes
_DTHETA_DM = np.stack([_GL_T01 ** (i + 1) / (i + 1) for i in range(3)])


def pose_and_task_jacobian(state: ShapeState, params: InstrumentParams):
    """Tip pose together with its shape-state Jacobian, sharing quadrature.

    Modal position columns integrate the tangent derivative weighted by
    d(theta)/d(m_i) = tau^(i+1)/(i+1) with the fixed Gauss-Legendre rule.
    The delta column is the analytic derivative of the plane-to-base
    rotation applied to the in-plane tip position; the in-plane position
    itself does not depend on delta.  Rotation columns are spatial rates:
    theta_dot spins the tip about the bending axis [sin d, cos d, 0];
    delta_dot tilts that axis with the tip held at theta.
    """
    theta = _bending_angle_any(state, _GL_T01)
    cos_th, sin_th = np.cos(theta), np.sin(theta)
    theta_tip = _bending_angle_any(state, 1.0)
    c_t, s_t = np.cos(theta_tip), np.sin(theta_tip)
    c_d, s_d = np.cos(state.delta), np.sin(state.delta)
    Rzm = rot_z(-state.delta)

    px = params.L * float(np.dot(_GL_W01, sin_th))
    pz = params.L * float(np.dot(_GL_W01, cos_th))
    rotation = Rzm @ rot_y(theta_tip) @ rot_z(state.delta)
    pose = RigidTransform(rotation=rotation, position=Rzm @ np.array([px, 0.0, pz]))

    pos_plane = np.zeros((3, 4))
    pos_plane[0, :3] = params.L * (_DTHETA_DM @ (_GL_W01 * cos_th))
    pos_plane[2, :3] = -params.L * (_DTHETA_DM @ (_GL_W01 * sin_th))
    pos_plane[1, 3] = -px  # d(Rz(-d))/dd @ p == Rz(-d) @ [0, -px, 0]
    pos = Rzm @ pos_plane

    axis = np.array([s_d, c_d, 0.0])
    rot = np.empty((3, 4))
    rot[:, 0] = axis
    rot[:, 1] = axis / 2.0
    rot[:, 2] = axis / 3.0
    rot[:, 3] = [s_t * c_d, -s_t * s_d, c_t - 1.0]

    return pose, TaskShapeJacobian(position_block=pos, rotation_block=rot)


def task_shape_jacobian(state: ShapeState, params: InstrumentParams) -> TaskShapeJacobian:
    """Tip position and rotation sensitivities at s = 1."""
    return pose_and_task_jacobian(state, params)[1]


@dataclass(frozen=True)
class FiniteDifferenceReport:
    """Worst-case discrepancies between analytic Jacobians and central FD."""

    max_abs_error_position: float
    max_abs_error_rotation: float
    max_abs_error_joint: float
    step: float

    def to_json_dict(self):
        return {
            "max_abs_error_position": self.max_abs_error_position,
            "max_abs_error_rotation": self.max_abs_error_rotation,
            "max_abs_error_joint": self.max_abs_error_joint,
            "step": self.step,
        }


def finite_difference_check(state: ShapeState, params: InstrumentParams,
                            step=1e-6) -> FiniteDifferenceReport:
    """Compare analytic Jacobians against central differences at one state.

    Rotation columns are differenced as log(R+ @ R-^T) / (2 step), i.e. the
    spatial axis-angle increment, matching the convention of
    task_shape_jacobian.
    """
    if not (1e-9 <= step <= 1e-3):
        raise ValueError(f"step must lie in [1e-9, 1e-3], got {step}")

    J_q = joint_shape_jacobian(state, params).matrix
    J_x = task_shape_jacobian(state, params)

    x0 = state.as_vector()
    err_q = 0.0
    err_p = 0.0
    err_w = 0.0
    for k in range(4):
        dx = np.zeros(4)
        dx[k] = step
        s_plus = ShapeState.from_vector(x0 + dx)
        s_minus = ShapeState.from_vector(x0 - dx)

        q_fd = (cable_lengths(s_plus, params) - cable_lengths(s_minus, params)) / (2 * step)
        err_q = max(err_q, np.max(np.abs(q_fd - J_q[:, k])))

        pose_plus = forward_pose(s_plus, params)
        pose_minus = forward_pose(s_minus, params)
        p_fd = (pose_plus.position - pose_minus.position) / (2 * step)
        err_p = max(err_p, np.max(np.abs(p_fd - J_x.position_block[:, k])))

        w_fd = log_so3(pose_plus.rotation @ pose_minus.rotation.T) / (2 * step)
        err_w = max(err_w, np.max(np.abs(w_fd - J_x.rotation_block[:, k])))

    return FiniteDifferenceReport(
        max_abs_error_position=float(err_p),
        max_abs_error_rotation=float(err_w),
        max_abs_error_joint=float(err_q),
        step=float(step),
    )
