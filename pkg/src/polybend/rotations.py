"""SO(3) helpers shared by the kinematics, solver, and plant modules.

All rotations are 3x3 orthonormal matrices acting on column vectors.
Angles are in radians; rotation vectors use the axis-angle convention
(direction = axis, norm = angle).
"""

import numpy as np

_EPS_ANGLE = 1e-8


def skew(v):
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def exp_so3(w):
    """Rotation matrix for rotation vector w (Rodrigues formula)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    K = skew(w)
    if theta < _EPS_ANGLE:
        # 2nd-order series; error O(theta^3) ~ 1e-24 below the cutoff
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R):
    """Rotation vector of R; inverse of exp_so3 for angles in [0, pi]."""
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    axial = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _EPS_ANGLE:
        return axial  # sin(theta)/theta ~= 1
    if np.pi - theta < 1e-6:
        # near-pi: axial part degenerates, recover axis from R + I
        M = 0.5 * (R + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(M), 0.0, None))
        # fix signs using the largest component
        k = int(np.argmax(axis))
        signs = np.sign(M[k, :])
        signs[signs == 0] = 1.0
        axis = axis * signs * np.sign(axis[k] if axis[k] != 0 else 1.0)
        axis /= np.linalg.norm(axis)
        return theta * axis
    return theta / np.sin(theta) * axial


def left_jacobian_so3(w):
    """Left Jacobian J_l of SO(3): d/dt exp(w(t)) = skew(J_l dw/dt) exp(w)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    K = skew(w)
    if theta < _EPS_ANGLE:
        return np.eye(3) + 0.5 * K + (1.0 / 6.0) * (K @ K)
    a = (1.0 - np.cos(theta)) / theta**2
    b = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + a * K + b * (K @ K)


def left_jacobian_deriv_so3(w, c):
    """Derivative of left_jacobian_so3(w) with respect to component w[c].

    Computed from the series J_l = sum_k K^k / (k+1)!, which converges to
    machine precision for the per-joint angles used here (|w| well below 1).
    """
    w = np.asarray(w, dtype=float)
    K = skew(w)
    E = skew(np.eye(3)[c])
    # terms k>=1 of d/dw_c sum K^k/(k+1)!  (k=0 term is constant)
    dJ = np.zeros((3, 3))
    # K powers up to 11 keep the truncation error below 1e-16 for |w| <= 1.2
    K_pows = [np.eye(3)]
    for _ in range(11):
        K_pows.append(K_pows[-1] @ K)
    fact = 1.0
    for k in range(1, 12):
        fact *= k + 1  # (k+1)!
        term = np.zeros((3, 3))
        for a in range(k):
            term += K_pows[a] @ E @ K_pows[k - 1 - a]
        dJ += term / fact
    return dJ


def random_rotation(rng):
    """Uniform-ish random rotation from a normal rotation vector."""
    w = rng.normal(size=3)
    n = np.linalg.norm(w)
    if n == 0:
        return np.eye(3)
    angle = rng.uniform(0.0, np.pi)
    return exp_so3(w / n * angle)


def quat_from_matrix(R):
    """Unit quaternion (w, x, y, z) of a rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def matrix_from_quat(q):
    """Rotation matrix of a (w, x, y, z) quaternion (normalized first)."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
