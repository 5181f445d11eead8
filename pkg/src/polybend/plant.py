"""Discretized-elastica ground-truth plant for a cable-driven segment.

The backbone is modeled as n rigid links joined by isotropic bending
springs (two orthogonal banks per joint, stiffness E*I divided by the
link length).  Cables run in straight segments between holes at radius r
on the disks, terminate at the tip disk, and carry prescribed tensions.
A tip wrench may be applied at the last disk.

Equilibrium minimizes

    V(u) = sum_j k/2 |u_j|^2 + sum_i tau_i (l_i(u) - l_i(0)) - f . p_tip(u)

over the per-joint in-plane rotation vectors u_j, via damped Newton
iteration with analytic gradient and Hessian (an applied tip couple adds
its generalized force to the residual).  None of this code touches the
polynomial-curvature model: the plant stays an independent oracle.
"""

from dataclasses import dataclass

import numpy as np

from .kinematics import InstrumentParams, RigidTransform
from .statics import TensionVector, Wrench

_MAX_ITERATIONS = 500
_GRAD_TOL = 1e-10


class PlantConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last iterate for diagnosis."""

    def __init__(self, message, last_angles, residual_norm):
        super().__init__(message)
        self.last_angles = last_angles
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class ElasticaPlant:
    params: InstrumentParams
    n_links: int = 50

    def __post_init__(self):
        if self.n_links < 10:
            raise ValueError(f"n_links must be >= 10, got {self.n_links}")

    @property
    def link_length(self):
        return self.params.L / self.n_links

    @property
    def joint_stiffness(self):
        """Torsional spring constant per joint, N*mm/rad."""
        return self.params.bending_stiffness / self.link_length


@dataclass(frozen=True)
class PlantEquilibrium:
    polyline: np.ndarray        # (n_links+2, 3) backbone points, mm
    stations: np.ndarray        # (n_links+2,) arclengths of the points, mm
    frames: np.ndarray          # (n_links+2, 3, 3) frames at the points
    tip_pose: RigidTransform
    link_angles: np.ndarray     # (n_links, 2) in-plane joint rotation vectors
    cable_lengths: np.ndarray   # (n_cables,) in-segment lengths, mm
    iterations: int
    residual_norm: float


# ---------------------------------------------------------------------------
# batched small-angle SO(3) helpers (rotation vectors constrained in-plane)

def _trig_coeffs(theta):
    """Rodrigues/left-Jacobian coefficients with series fallbacks.

    Returns (a1, b1, a, b, da, db) where exp = I + a1 K + b1 K^2,
    J_l = I + a K + b K^2, and da/db are d(a)/d(theta), d(b)/d(theta).
    """
    theta = np.asarray(theta)
    small = theta < 1e-3
    t = np.where(small, 1.0, theta)  # avoid 0/0; small branch uses series
    t2 = theta * theta

    a1 = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(t) / t)
    b1 = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0,
                  (1.0 - np.cos(t)) / t**2)
    a = b1
    b = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
                 (t - np.sin(t)) / t**3)
    da = np.where(small, -theta / 12.0 + theta * t2 / 180.0,
                  (t * np.sin(t) - 2.0 * (1.0 - np.cos(t))) / t**3)
    db = np.where(small, -theta / 60.0 + theta * t2 / 1260.0,
                  ((1.0 - np.cos(t)) * t - 3.0 * (t - np.sin(t))) / t**4)
    return a1, b1, a, b, da, db


def _batched_joint_maps(u):
    """Per-joint exp, left Jacobian, and its coordinate derivatives.

    u: (n, 2) in-plane rotation vectors.  Returns (E, Jl, dJl) with shapes
    (n,3,3), (n,3,3), (n,2,3,3); dJl[j,c] = d Jl(u_j) / d u_j[c].
    """
    n = u.shape[0]
    w = np.zeros((n, 3))
    w[:, :2] = u
    theta = np.linalg.norm(w, axis=1)

    K = np.zeros((n, 3, 3))
    K[:, 0, 2] = w[:, 1]
    K[:, 2, 0] = -w[:, 1]
    K[:, 1, 2] = -w[:, 0]
    K[:, 2, 1] = w[:, 0]
    K2 = K @ K

    a1, b1, a, b, da, db = _trig_coeffs(theta)
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    E = eye + a1[:, None, None] * K + b1[:, None, None] * K2
    Jl = eye + a[:, None, None] * K + b[:, None, None] * K2

    # d theta / d u_c = u_c / theta (zero by series limit at theta -> 0)
    safe = np.where(theta < 1e-12, 1.0, theta)
    dth = np.zeros((n, 2))
    dth[:, 0] = np.where(theta < 1e-12, 0.0, u[:, 0] / safe)
    dth[:, 1] = np.where(theta < 1e-12, 0.0, u[:, 1] / safe)

    Ex = np.zeros((3, 3)); Ex[1, 2] = -1.0; Ex[2, 1] = 1.0    # skew(e1)
    Ey = np.zeros((3, 3)); Ey[0, 2] = 1.0; Ey[2, 0] = -1.0    # skew(e2)
    Ec = (Ex, Ey)

    dJl = np.zeros((n, 2, 3, 3))
    for c in range(2):
        EcK = Ec[c] @ K  # (n,3,3) via broadcasting
        KEc = K @ Ec[c]
        dJl[:, c] = (da * dth[:, c])[:, None, None] * K \
            + a[:, None, None] * Ec[c] \
            + (db * dth[:, c])[:, None, None] * K2 \
            + b[:, None, None] * (EcK + KEc)
    return E, Jl, dJl


class _Geometry:
    """Forward pass: frames, guide rings, joint axes for a configuration u.

    Joint j bends at arclength (j + 1/2) * dl, the midpoint of the elastic
    segment it lumps (midpoint placement keeps the discretization error at
    O(1/n^2)).  A cable guide ring sits exactly at every joint station,
    rigid with the post-joint frame, plus rings on the base and tip disks;
    kinking the cable exactly at the joints avoids the O(L*theta/n^2)
    moment-arm excess that mid-segment chord sag would otherwise introduce.
    """

    def __init__(self, plant: ElasticaPlant, u):
        n = plant.n_links
        params = plant.params
        dl = plant.link_length
        E, Jl, dJl = _batched_joint_maps(u)

        frames = np.empty((n + 1, 3, 3))   # frames[j]: after j joint rotations
        anchors = np.empty((n, 3))         # joint stations
        frames[0] = np.eye(3)
        half = np.array([0.0, 0.0, 0.5 * dl])
        full = np.array([0.0, 0.0, dl])
        prev = np.zeros(3)
        for j in range(n):
            frames[j + 1] = frames[j] @ E[j]
            anchors[j] = prev + frames[j] @ (half if j == 0 else full)
            prev = anchors[j]
        tip = anchors[-1] + frames[n] @ half

        # spatial rotation axes per DOF: W[2j+c] = frames[j] @ Jl(u_j)[:, c]
        W = np.einsum('jab,jbc->jca', frames[:-1], Jl[:, :, :2]).reshape(2 * n, 3)
        # same-joint axis derivatives: dW[j,c,c'] = frames[j] @ dJl[j,c][:, c']
        dW = np.einsum('jab,jcbd->jcda', frames[:-1], dJl[:, :, :, :2])

        # guide rings: base disk, one ring per joint (post frame), tip disk.
        # ring_pos[k] for k = 0 .. n+1; ring k moves under joints j < k
        # (the tip ring under all joints).
        ring_pos = np.vstack([np.zeros(3), anchors, tip])
        ring_frames = np.vstack([[np.eye(3)], frames[1:], [frames[n]]])
        phi = params.cable_mount_angles()
        offsets = params.r * np.column_stack([np.cos(phi), np.sin(phi),
                                              np.zeros_like(phi)])
        holes = ring_pos[None, :, :] + np.einsum(
            'kab,cb->cka', ring_frames, offsets)

        self.plant = plant
        self.u = u
        self.frames = frames
        self.anchors = anchors
        self.tip = tip
        self.polyline = np.vstack([np.zeros(3), anchors, tip])
        self.W = W
        self.dW = dW
        self.holes = holes  # (n_cables, n+2, 3)
        seg = holes[:, 1:, :] - holes[:, :-1, :]
        self.seg_vec = seg
        self.seg_len = np.linalg.norm(seg, axis=2)  # (n_cables, n+1)
        self.cable_lengths = self.seg_len.sum(axis=1)

    def potential(self, tensions, force):
        plant = self.plant
        spring = 0.5 * plant.joint_stiffness * float(np.sum(self.u**2))
        slack = self.cable_lengths - plant.params.L
        return spring + float(tensions @ slack) - float(force @ self.tip)


def _hole_forces(geom, tensions, force):
    """Gradient of V with respect to every material point.

    Returns (gh, g_tip): per-hole gradients (n_cables, n+1, 3) and the tip
    center gradient (3,).
    """
    u_hat = geom.seg_vec / geom.seg_len[:, :, None]
    pull = tensions[:, None, None] * u_hat
    gh = np.zeros_like(geom.holes)
    gh[:, 1:, :] += pull
    gh[:, :-1, :] -= pull
    return gh, -force


def _residual(geom, tensions, force, moment):
    """Generalized-force imbalance per DOF (gradient of V minus couple work)."""
    plant = geom.plant
    n = plant.n_links
    gh, g_tip = _hole_forces(geom, tensions, force)

    # per-ring force/moment aggregates of the point gradients
    G = gh.sum(axis=0)                                   # (n+2, 3)
    N = np.cross(geom.holes, gh).sum(axis=0)             # (n+2, 3)
    G[-1] += g_tip
    N[-1] += np.cross(geom.tip, g_tip)

    # suffix sums over rings k >= j+1 for joint j
    F_after = np.cumsum(G[::-1], axis=0)[::-1][1:n + 1]  # (n, 3)
    N_after = np.cumsum(N[::-1], axis=0)[::-1][1:n + 1]
    anchors = geom.anchors
    M = N_after - np.cross(anchors, F_after) - moment    # downstream moment per joint

    res = plant.joint_stiffness * geom.u.reshape(-1) \
        + np.einsum('Ai,Ai->A', geom.W, np.repeat(M, 2, axis=0))
    return res, (G, N, F_after, N_after, M, gh, g_tip)


def _hessian(geom, tensions, force, moment, aux):
    """Exact second derivative of the generalized-force residual."""
    plant = geom.plant
    n = plant.n_links
    D = 2 * n
    W = geom.W
    G, N, F_after, N_after, M, gh, g_tip = aux
    joint_of = np.repeat(np.arange(n), 2)
    anchors = geom.anchors

    # downstream moment of the point forces alone; the applied couple enters
    # the Hessian only through the axis-derivative term below
    M_force = M + moment

    # dyadic aggregates sum_P P g_P^T per ring, suffix-summed
    Dy = np.einsum('cdi,cdj->dij', geom.holes, gh)
    Dy[-1] += np.outer(geom.tip, g_tip)
    Dy_after = np.cumsum(Dy[::-1], axis=0)[::-1][1:n + 1]  # (n,3,3)
    X = Dy_after - anchors[:, :, None] * F_after[:, None, :]
    s = np.trace(Dy_after, axis1=1, axis2=2) - np.einsum('ji,ji->j', anchors, F_after)

    # geometric stiffness for joint(A) < joint(B): value uses the later joint
    crossW = np.cross(W[:, None, :], W[None, :, :])      # (D,D,3)
    M_dof = M_force[joint_of]                            # (D,3)
    X_dof = X[joint_of]
    s_dof = s[joint_of]
    term1 = np.einsum('ABi,Bi->AB', crossW, M_dof)
    Z = np.einsum('Bji,Bj->Bi', X_dof, W)                # X_{jB}^T w_B
    term2 = W @ Z.T                                      # w_A . (X_{jB}^T w_B)
    term3 = -(W @ W.T) * s_dof[None, :]
    geo = term1 + term2 + term3
    jA = joint_of[:, None]
    jB = joint_of[None, :]
    upper = jA < jB
    H = np.zeros((D, D))
    H[upper] = geo[upper]
    H = H + H.T

    # same-joint 2x2 blocks: axis derivative replaces the cross product
    for j in range(n):
        A0 = 2 * j
        blk = np.empty((2, 2))
        for ca in range(2):
            for cb in range(2):
                T = geom.dW[j, ca, cb]
                blk[ca, cb] = float(T @ M_force[j]) \
                    + float(W[A0 + cb] @ (X[j] @ W[A0 + ca])) \
                    - float(W[A0 + ca] @ W[A0 + cb]) * s[j]
        H[A0:A0 + 2, A0:A0 + 2] += blk

    # material stiffness of the cable segments
    # columns of d(segment vector)/du: cross(w_A, seg) when both ends move
    # (joint(A) < k for segment k), cross(w_A, hole - anchor_k) when only
    # the far ring moves (joint(A) == k <= n-1), zero otherwise
    n_c = geom.holes.shape[0]
    n_seg = n + 1
    segs = geom.seg_vec.reshape(-1, 3)                   # (n_c*(n+1), 3)
    lens = geom.seg_len.reshape(-1)
    taus = np.repeat(tensions, n_seg)
    d_idx = np.tile(np.arange(n_seg), n_c)
    dJ = np.cross(W[None, :, :], segs[:, None, :])       # (S, D, 3)
    mask = joint_of[None, :] < d_idx[:, None]
    dJ *= mask[:, :, None]
    inner = d_idx <= n - 1                               # segments ending at a joint ring
    far = geom.holes[:, 1:, :].reshape(-1, 3)
    rho = far[inner] - anchors[d_idx[inner]]
    rows = np.flatnonzero(inner)
    for c in range(2):
        cols = 2 * d_idx[inner] + c
        dJ[rows, cols] = np.cross(W[cols], rho)
    w_seg = taus / lens
    P1 = np.einsum('sAi,sBi,s->AB', dJ, dJ, w_seg, optimize=True)
    u_hat = segs / lens[:, None]
    cproj = np.einsum('sAi,si->sA', dJ, u_hat)
    P2 = np.einsum('sA,sB,s->AB', cproj, cproj, w_seg, optimize=True)
    H += P1 - P2

    # spring stiffness
    H[np.diag_indices_from(H)] += plant.joint_stiffness

    # applied couple: unsymmetric term from the axis derivatives
    if np.any(moment != 0.0):
        lower = jA > jB
        C = np.zeros((D, D))
        C[lower] = np.einsum('ABi,i->AB', crossW, moment)[lower]
        for j in range(n):
            A0 = 2 * j
            for ca in range(2):
                for cb in range(2):
                    C[A0 + ca, A0 + cb] -= float(geom.dW[j, cb, ca] @ moment)
        H += C
    return H


def plant_equilibrium(plant: ElasticaPlant, tensions: TensionVector,
                      tip_wrench: Wrench = None,
                      initial_angles=None) -> PlantEquilibrium:
    """Solve the static equilibrium of the discretized rod.

    Damped Newton iteration on the generalized-force residual; steps are
    line-searched on the potential (merit ||residual||^2 when a tip couple
    is applied, since a constant couple admits no potential).  Raises
    PlantConvergenceError after 500 iterations.
    """
    if tip_wrench is None:
        tip_wrench = Wrench.zero()
    if tensions.tau.shape != (plant.params.n_cables,):
        raise ValueError(
            f"expected {plant.params.n_cables} tensions, got {tensions.tau.shape}")
    force = tip_wrench.force
    moment = tip_wrench.moment
    has_moment = bool(np.any(moment != 0.0))

    n = plant.n_links
    u = np.zeros((n, 2)) if initial_angles is None \
        else np.array(initial_angles, dtype=float).reshape(n, 2)

    geom = _Geometry(plant, u)
    res, aux = _residual(geom, tensions.tau, force, moment)

    def merit(g, r):
        return 0.5 * float(r @ r) if has_moment \
            else g.potential(tensions.tau, force)

    m_val = merit(geom, res)
    lam = 0.0
    iterations = 0
    while np.linalg.norm(res) > _GRAD_TOL:
        if iterations >= _MAX_ITERATIONS:
            raise PlantConvergenceError(
                f"no equilibrium after {_MAX_ITERATIONS} iterations "
                f"(residual {np.linalg.norm(res):.3e})",
                last_angles=u, residual_norm=float(np.linalg.norm(res)))
        iterations += 1
        H = _hessian(geom, tensions.tau, force, moment, aux)
        step = None
        for _ in range(12):
            try:
                cand = np.linalg.solve(
                    H + lam * np.eye(H.shape[0]) if lam else H, -res)
            except np.linalg.LinAlgError:
                lam = max(10.0 * lam, 1e-6 * plant.joint_stiffness)
                continue
            # directional derivative of the merit along the step: res . cand
            # for the potential, -2*merit for the squared-residual case
            dphi = -2.0 * m_val if has_moment else float(res @ cand)
            res_norm = np.linalg.norm(res)
            alpha = 1.0
            for _ in range(30):
                u_try = u + alpha * cand.reshape(n, 2)
                geom_try = _Geometry(plant, u_try)
                res_try, aux_try = _residual(geom_try, tensions.tau, force, moment)
                m_try = merit(geom_try, res_try)
                # Armijo on the merit; near convergence the merit decrease
                # drops below float resolution, so a sufficient residual
                # reduction (Newton contracts quadratically) also accepts
                if (m_try <= m_val + 1e-4 * alpha * dphi
                        or np.linalg.norm(res_try) <= (1.0 - 1e-4 * alpha) * res_norm):
                    step = (u_try, geom_try, res_try, aux_try, m_try)
                    break
                alpha *= 0.5
            if step is not None:
                lam *= 0.25
                break
            lam = max(10.0 * lam, 1e-6 * plant.joint_stiffness)
        if step is None:
            raise PlantConvergenceError(
                "line search failed to reduce the merit function",
                last_angles=u, residual_norm=float(np.linalg.norm(res)))
        u, geom, res, aux, m_val = step

    tip = RigidTransform(rotation=geom.frames[-1], position=geom.tip)
    dl = plant.link_length
    stations = np.concatenate([[0.0], (np.arange(n) + 0.5) * dl, [plant.params.L]])
    frames = np.concatenate([geom.frames[:1], geom.frames[1:], geom.frames[-1:]])
    return PlantEquilibrium(
        polyline=geom.polyline.copy(),
        stations=stations,
        frames=frames,
        tip_pose=tip,
        link_angles=u.copy(),
        cable_lengths=geom.cable_lengths.copy(),
        iterations=iterations,
        residual_norm=float(np.linalg.norm(res)),
    )


def plant_gradient_norm(plant: ElasticaPlant, angles, tensions: TensionVector,
                        tip_wrench: Wrench = None):
    """Residual norm at a given configuration (consistency checks on logs)."""
    if tip_wrench is None:
        tip_wrench = Wrench.zero()
    geom = _Geometry(plant, np.asarray(angles, dtype=float).reshape(plant.n_links, 2))
    res, _ = _residual(geom, tensions.tau, tip_wrench.force, tip_wrench.moment)
    return float(np.linalg.norm(res))
