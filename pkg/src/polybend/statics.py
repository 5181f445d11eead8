"""Elastic energy, virtual-work equilibrium, and tip-wrench estimation.

The static balance in shape-state coordinates reads

    Q_tension(S, tau) + J_x(S)^T F = grad U(S)

where Q_tension is the generalized force exerted by the cable tensions
(positive work as a cable shortens, so Q_tension = -J_q^T tau with
q_i = L_i - L), J_x is the shape-to-task Jacobian, F the base-frame tip
wrench [force N; moment N*mm], and U the bending strain energy.

With curvature measured per unit normalized arclength, the physically
consistent energy is U = (E*I / 2L) * m^T G m with the Gram matrix
G[i][j] = 1/(i+j+1); its gradient (E*I/L) * G m carries the full
off-diagonal couplings 1/2, 1/3, 1/4 (finite differences reject the
variant with halved off-diagonal terms).
"""

from dataclasses import dataclass, field

import numpy as np

from .jacobians import joint_shape_jacobian, task_shape_jacobian
from .kinematics import InstrumentParams, ShapeState, cable_plane_angles

# Gram matrix of the monomial curvature basis {1, s, s^2} on [0, 1].
GRAM_MATRIX = np.array([
    [1.0, 1.0 / 2.0, 1.0 / 3.0],
    [1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0],
    [1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0],
])

# Relative singular-value cutoff for the equilibrium pseudo-inverse.
SVD_TRUNCATION_RTOL = 1e-8


@dataclass(frozen=True)
class Wrench:
    """Tip load in the base frame: force (N) and moment (N*mm)."""

    force: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        m = np.asarray(self.moment, dtype=float)
        if f.shape != (3,) or m.shape != (3,):
            raise ValueError("force and moment must be 3-vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(m))):
            raise ValueError("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "moment", m)

    def as_vector(self):
        return np.concatenate([self.force, self.moment])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ValueError(f"wrench vector must have 6 components, got {v.shape}")
        return cls(force=v[:3], moment=v[3:])

    @classmethod
    def zero(cls):
        return cls(force=np.zeros(3), moment=np.zeros(3))

    def to_json_dict(self):
        return {"force_n": list(self.force), "moment_nmm": list(self.moment)}


@dataclass(frozen=True)
class TensionVector:
    """Per-cable tensions in N; cables cannot push, so entries must be >= 0."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 1:
            raise ValueError("tension vector must be 1-D")
        if not np.all(np.isfinite(tau)):
            raise ValueError("tensions must be finite")
        if np.any(tau < 0.0):
            raise ValueError(f"tensions must be non-negative, got {tau}")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def zero(cls, n_cables):
        return cls(tau=np.zeros(n_cables))


@dataclass(frozen=True)
class EquilibriumReport:
    """Wrench estimate plus the equilibrium residual it leaves behind."""

    wrench_estimate: Wrench
    residual: np.ndarray  # 4-vector, N*mm per unit shape coordinate
    rank_deficiency_flag: bool
    singular_values: np.ndarray = field(default=None)

    def to_json_dict(self):
        return {
            "wrench_estimate": self.wrench_estimate.to_json_dict(),
            "residual": list(self.residual),
            "residual_norm": float(np.linalg.norm(self.residual)),
            "rank_deficiency_flag": bool(self.rank_deficiency_flag),
            "singular_values": list(self.singular_values)
            if self.singular_values is not None else None,
        }


def elastic_energy(state: ShapeState, params: InstrumentParams):
    """Bending strain energy in N*mm.

    U = (E*I / 2L) * integral of (physical curvature)^2 over the backbone,
    expressed through the normalized-arclength modal coefficients as
    (E*I / 2L) * m^T G m.
    """
    m = state.modal
    return 0.5 * params.bending_stiffness / params.L * float(m @ GRAM_MATRIX @ m)


def elastic_energy_gradient(state: ShapeState, params: InstrumentParams,
                            gram=None):
    """Gradient of the bending energy with respect to [m0, m1, m2, delta].

    The delta component is exactly zero: rotating the bending plane stores
    no energy.  The gram override exists for fault-injection testing only.
    """
    G = GRAM_MATRIX if gram is None else np.asarray(gram, dtype=float)
    grad_m = params.bending_stiffness / params.L * (G @ state.modal)
    return np.concatenate([grad_m, [0.0]])


def tension_generalized_force(state: ShapeState, params: InstrumentParams,
                              tensions: TensionVector):
    """Generalized shape-space force exerted by the cable tensions.

    A tension does positive work as its cable shortens, hence the sign
    flip against the displacement Jacobian: Q = -J_q^T tau.
    """
    _check_cable_count(params, tensions)
    J_q = joint_shape_jacobian(state, params).matrix
    return -J_q.T @ tensions.tau


def equilibrium_residual(state: ShapeState, params: InstrumentParams,
                         tensions: TensionVector, wrench: Wrench):
    """Imbalance of the static equation; zero at a consistent (S, tau, F)."""
    J_x = task_shape_jacobian(state, params).stacked()
    q_tension = tension_generalized_force(state, params, tensions)
    grad_u = elastic_energy_gradient(state, params)
    return q_tension + J_x.T @ wrench.as_vector() - grad_u


def _check_cable_count(params, tensions):
    if tensions.tau.shape != (params.n_cables,):
        raise ValueError(
            f"expected {params.n_cables} tensions, got {tensions.tau.shape}")


def _scaled_system(state, params, tensions):
    """Equilibrium system A_s x = b in moment-scaled wrench coordinates.

    Forces stay in N while moments are divided by L, so the minimum-norm
    metric treats a moment of magnitude L*|f| as comparable to a force |f|.
    Returns (A_s, b, scale) with x = scale^-1 * wrench-vector.
    """
    J_x = task_shape_jacobian(state, params).stacked()
    A = J_x.T  # 4x6
    b = (elastic_energy_gradient(state, params)
         - tension_generalized_force(state, params, tensions))
    scale = np.concatenate([np.ones(3), np.full(3, params.L)])
    return A * scale, b, scale


def estimate_wrench(state: ShapeState, params: InstrumentParams,
                    tensions: TensionVector, prior: Wrench = None) -> EquilibriumReport:
    """Recover the tip wrench closest to a prior among equilibrium solutions.

    Solves the 4-equation balance for the 6 wrench components via a
    truncated-SVD pseudo-inverse in moment-scaled coordinates, then adds
    the null-space projection of the prior.  With a zero prior this is the
    minimum-norm solution.  Directions with singular values below
    SVD_TRUNCATION_RTOL * sigma_max are truncated and flagged rather than
    amplified (theta_e -> 0 genuinely removes delta observability).
    """
    if prior is None:
        prior = Wrench.zero()
    A_s, b, scale = _scaled_system(state, params, tensions)
    f0 = prior.as_vector() / scale

    U, sv, Vt = np.linalg.svd(A_s, full_matrices=False)
    tol = SVD_TRUNCATION_RTOL * (sv[0] if sv.size else 0.0)
    keep = sv > tol
    rank_deficient = bool(np.count_nonzero(keep) < A_s.shape[0])

    V_r = Vt[keep].T          # 6 x rank
    inv_sv = 1.0 / sv[keep]
    x_min = V_r @ (inv_sv * (U[:, keep].T @ b))
    x = x_min + f0 - V_r @ (V_r.T @ f0)

    wrench = Wrench.from_vector(x * scale)
    residual = equilibrium_residual(state, params, tensions, wrench)
    return EquilibriumReport(
        wrench_estimate=wrench,
        residual=residual,
        rank_deficiency_flag=rank_deficient,
        singular_values=sv,
    )


def estimate_tip_force(state: ShapeState, params: InstrumentParams,
                       tensions: TensionVector) -> EquilibriumReport:
    """Recover a pure tip force under the known-zero-moment constraint.

    For point contact (no applied tip moment) the 4-equation balance
    over-determines the 3 force components; solving it in least squares
    avoids the minimum-norm estimator's smearing of the load into the
    moment coordinates, which is unobservable from the balance alone.
    """
    A_s, b, _ = _scaled_system(state, params, tensions)
    A_f = A_s[:, :3]  # force columns are unscaled
    U, sv, Vt = np.linalg.svd(A_f, full_matrices=False)
    tol = SVD_TRUNCATION_RTOL * (sv[0] if sv.size else 0.0)
    keep = sv > tol
    rank_deficient = bool(np.count_nonzero(keep) < 3)
    f = Vt[keep].T @ ((U[:, keep].T @ b) / sv[keep])

    wrench = Wrench(force=f, moment=np.zeros(3))
    residual = equilibrium_residual(state, params, tensions, wrench)
    return EquilibriumReport(
        wrench_estimate=wrench,
        residual=residual,
        rank_deficiency_flag=rank_deficient,
        singular_values=sv,
    )


def articulation_tensions(params: InstrumentParams, theta_e, delta,
                          pretension=0.0):
    """Tensions that hold a constant-curvature bend (theta_e, delta) in
    equilibrium with no external wrench.

    Distributes tension as t0 + a*cos(sigma_i), which for evenly spaced
    cables loads only the bending direction; t0 keeps the slackest cable
    at the pretension level so sensor noise cannot read it negative.
    """
    state = ShapeState(theta_e, 0.0, 0.0, delta)
    sigma = cable_plane_angles(state, params)
    cos_s = np.cos(sigma)
    denom = params.r * float(cos_s @ cos_s)
    if denom < 1e-12:
        raise ValueError("cable layout cannot generate a bending moment")
    a = params.bending_stiffness / params.L * theta_e / denom
    t0 = abs(a) * float(np.max(np.abs(cos_s))) + pretension
    tau = t0 + a * cos_s
    tau[np.abs(tau) < 1e-15] = 0.0
    return TensionVector(tau=tau)
