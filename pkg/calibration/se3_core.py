"""Lie group and Lie algebra tools for SE(3).

Twists are 6-vectors ordered rotation first, ``[phi; rho]``, so that the
adjoint matrices have the block layout ``[[R, 0], [[t]x R, R]]``. Many other
libraries order twists translation first; convert before mixing the two.

The scalar functions (``exp_twist``, ``log_pose``, ``right_jacobian``...)
are thin wrappers over batched kernels working on ``(N, ...)`` arrays, which
the solvers call directly.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateRotation, InvalidArgument, OutOfDomain

logger = logging.getLogger(__name__)

# Below this angle the Rodrigues coefficients switch to their Taylor series.
ANGLE_EPS = 1e-4
# The Jacobian coefficients divide by up to theta**5 and need a wider band.
JACOBIAN_SERIES_EPS = 1e-2
# log is rejected for rotations closer than this to a half turn.
PI_MARGIN = 1e-6
ROTATION_TOL = 1e-9
# Composition re-projects onto SO(3) once drift exceeds this.
DRIFT_TOL = 1e-10


def _checked(values, shape, name):
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise InvalidArgument(f'{name} must have shape {shape}, got {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f'{name} has non-finite entries')
    return arr


def is_rotation(m, tol=ROTATION_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        return False
    return (np.linalg.norm(m.T @ m - np.eye(3)) <= tol
            and abs(np.linalg.det(m) - 1.0) <= tol)


def project_to_so3(m):
    """Closest rotation matrix in the Frobenius sense (SVD polar factor)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform stored as rotation ``r`` (3x3) and translation ``t`` (m)."""

    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        r = _checked(self.r, (3, 3), 'rotation')
        t = _checked(self.t, (3,), 'translation')
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, 'r', r)
        object.__setattr__(self, 't', t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m, reorthonormalize=False):
        m = _checked(m, (4, 4), 'homogeneous matrix')
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise InvalidArgument('homogeneous matrix bottom row must be [0, 0, 0, 1]')
        r = project_to_so3(m[:3, :3]) if reorthonormalize else m[:3, :3]
        return cls(r, m[:3, 3])

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.r
        m[:3, 3] = self.t
        return m

    def inverse(self):
        rt = self.r.T
        return Pose(rt, -rt @ self.t)

    def __matmul__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        r = self.r @ other.r
        if np.linalg.norm(r.T @ r - np.eye(3)) > DRIFT_TOL:
            r = project_to_so3(r)
        return Pose(r, self.r @ other.t + self.t)

    def normalized(self):
        return Pose(project_to_so3(self.r), self.t)

    def is_valid(self, tol=ROTATION_TOL):
        return is_rotation(self.r, tol)

    def allclose(self, other, atol=1e-9):
        return (np.allclose(self.r, other.r, rtol=0.0, atol=atol)
                and np.allclose(self.t, other.t, rtol=0.0, atol=atol))

    def __repr__(self):
        return f'Pose(r={self.r.tolist()}, t={self.t.tolist()})'


@dataclass(frozen=True)
class ScrewParams:
    """Screw motion: angle ``theta``, pitch ``h``, unit axis ``k``, axis point ``c``."""

    theta: float
    h: float
    k: np.ndarray
    c: np.ndarray
    degenerate: bool = False


def twist(phi, rho):
    return np.concatenate([np.asarray(phi, dtype=float), np.asarray(rho, dtype=float)])


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def skew_batch(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def hat(zeta):
    zeta = _checked(zeta, (6,), 'twist')
    m = np.zeros((4, 4))
    m[:3, :3] = skew(zeta[:3])
    m[:3, 3] = zeta[3:]
    return m


def vee(m):
    m = np.asarray(m, dtype=float)
    return np.array([m[2, 1], m[0, 2], m[1, 0], m[0, 3], m[1, 3], m[2, 3]])


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rodrigues_coefficients(theta, series=None):
    """Return ``(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)``.

    ``series`` forces the Taylor form (True) or the closed form (False);
    by default the Taylor form is used below ``ANGLE_EPS``.
    """
    theta = np.asarray(theta, dtype=float)
    t2 = theta * theta
    if series is None:
        small = theta < ANGLE_EPS
    else:
        small = np.full(theta.shape, bool(series))
    th = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - t2 / 6.0 + t2 ** 2 / 120.0 - t2 ** 3 / 5040.0,
                 np.sin(th) / th)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 ** 2 / 720.0 - t2 ** 3 / 40320.0,
                 (1.0 - np.cos(th)) / th ** 2)
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2 ** 2 / 5040.0 - t2 ** 3 / 362880.0,
                 (th - np.sin(th)) / th ** 3)
    return a, b, c


def so3_left_jacobian(phi, series=None):
    """The V matrix mapping rho to the translation of exp([phi; rho])."""
    phi = np.asarray(phi, dtype=float)
    _, b, c = rodrigues_coefficients(np.linalg.norm(phi), series)
    k = skew(phi)
    return np.eye(3) + b * k + c * (k @ k)


def exp_arrays(zetas):
    """Batched exponential: ``(N, 6)`` twists to rotations ``(N, 3, 3)`` and translations ``(N, 3)``."""
    zetas = np.asarray(zetas, dtype=float)
    phi, rho = zetas[:, :3], zetas[:, 3:]
    a, b, c = rodrigues_coefficients(np.linalg.norm(phi, axis=1))
    k = skew_batch(phi)
    k2 = k @ k
    eye = np.eye(3)
    r = eye + a[:, None, None] * k + b[:, None, None] * k2
    v = eye + b[:, None, None] * k + c[:, None, None] * k2
    return r, np.einsum('nij,nj->ni', v, rho)


def exp_twist(zeta):
    zeta = _checked(zeta, (6,), 'twist')
    r, t = exp_arrays(zeta[None, :])
    return Pose(r[0], t[0])


def _rotation_angles(r):
    w = 0.5 * np.stack([r[:, 2, 1] - r[:, 1, 2],
                        r[:, 0, 2] - r[:, 2, 0],
                        r[:, 1, 0] - r[:, 0, 1]], axis=1)
    cos_theta = 0.5 * (np.trace(r, axis1=1, axis2=2) - 1.0)
    theta = np.arctan2(np.linalg.norm(w, axis=1), cos_theta)
    return theta, w


def rotation_angles(r):
    return _rotation_angles(np.asarray(r, dtype=float))[0]


def rotation_angle(r):
    return float(rotation_angles(np.asarray(r, dtype=float)[None])[0])


def log_rotations(r, indices=None):
    """Batched SO(3) logarithm, raising DegenerateRotation near a half turn."""
    theta, w = _rotation_angles(r)
    bad = np.flatnonzero(theta > np.pi - PI_MARGIN)
    if bad.size:
        pair = int(bad[0]) if indices is None else indices[int(bad[0])]
        raise DegenerateRotation(
            f'rotation angle {theta[bad[0]]:.9f} rad is within {PI_MARGIN} of pi', pair=pair)
    t2 = theta * theta
    small = theta < ANGLE_EPS
    safe = np.where(small, 1.0, theta)
    factor = np.where(small, 1.0 + t2 / 6.0 + 7.0 * t2 ** 2 / 360.0, safe / np.sin(safe))
    return factor[:, None] * w


def log_arrays(r, t, indices=None):
    """Batched SE(3) logarithm returning ``(N, 6)`` twists; rho = V(phi)^-1 t."""
    phi = log_rotations(r, indices)
    _, b, c = rodrigues_coefficients(np.linalg.norm(phi, axis=1))
    k = skew_batch(phi)
    v = np.eye(3) + b[:, None, None] * k + c[:, None, None] * (k @ k)
    rho = np.linalg.solve(v, t[..., None])[..., 0]
    return np.concatenate([phi, rho], axis=1)


def log_pose(p):
    return log_arrays(p.r[None], p.t[None])[0]


def wrap_twist(zeta):
    """Equivalent twist whose rotation angle lies in [0, pi]."""
    zeta = np.asarray(zeta, dtype=float)
    theta = np.linalg.norm(zeta[:3])
    if theta <= np.pi:
        return zeta
    p = exp_twist(zeta)
    phi = zeta[:3] * (1.0 - 2.0 * np.pi * np.ceil((theta - np.pi) / (2.0 * np.pi)) / theta)
    rho = np.linalg.solve(so3_left_jacobian(phi), p.t)
    return np.concatenate([phi, rho])


def poses_to_arrays(poses):
    r = np.array([p.r for p in poses]).reshape(-1, 3, 3)
    t = np.array([p.t for p in poses]).reshape(-1, 3)
    return r, t


def arrays_to_poses(r, t):
    return [Pose(ri, ti) for ri, ti in zip(r, t)]


def adjoint_arrays(r, t):
    n = r.shape[0]
    out = np.zeros((n, 6, 6))
    out[:, :3, :3] = r
    out[:, 3:, 3:] = r
    out[:, 3:, :3] = skew_batch(t) @ r
    return out


def adjoint_group(p):
    return adjoint_arrays(p.r[None], p.t[None])[0]


def _algebra_adjoints(zetas):
    n = zetas.shape[0]
    out = np.zeros((n, 6, 6))
    k = skew_batch(zetas[:, :3])
    out[:, :3, :3] = k
    out[:, 3:, 3:] = k
    out[:, 3:, :3] = skew_batch(zetas[:, 3:])
    return out


def adjoint_algebra(zeta):
    zeta = _checked(zeta, (6,), 'twist')
    return _algebra_adjoints(zeta[None])[0]


def _jacobian_coefficients(theta):
    t2 = theta * theta
    small = theta < JACOBIAN_SERIES_EPS
    th = np.where(small, 1.0, theta)
    s, c = np.sin(th), np.cos(th)
    c1 = np.where(small, 0.5 - t2 ** 2 / 720.0 + t2 ** 3 / 20160.0,
                  (4.0 - th * s - 4.0 * c) / (2.0 * th ** 2))
    c2 = np.where(small, 1.0 / 6.0 - t2 ** 2 / 5040.0,
                  (4.0 * th - 5.0 * s + th * c) / (2.0 * th ** 3))
    c3 = np.where(small, 1.0 / 24.0 - t2 / 360.0 + t2 ** 2 / 13440.0,
                  (2.0 - th * s - 2.0 * c) / (2.0 * th ** 4))
    c4 = np.where(small, 1.0 / 120.0 - t2 / 2520.0 + t2 ** 2 / 120960.0,
                  (2.0 * th - 3.0 * s + th * c) / (2.0 * th ** 5))
    return c1, c2, c3, c4


def right_jacobians(zetas, indices=None, strict=True):
    """Batched right Jacobians as the degree-4 polynomial in ad(zeta).

    With ``strict=False`` angles near a half turn are allowed; the polynomial
    itself only becomes singular at a full turn.
    """
    zetas = np.asarray(zetas, dtype=float)
    theta = np.linalg.norm(zetas[:, :3], axis=1)
    bad = np.flatnonzero(theta >= np.pi - PI_MARGIN)
    if strict and bad.size:
        pair = int(bad[0]) if indices is None else indices[int(bad[0])]
        raise DegenerateRotation('Jacobian undefined this close to a half turn', pair=pair)
    ad = _algebra_adjoints(zetas)
    ad2 = ad @ ad
    ad3 = ad2 @ ad
    ad4 = ad3 @ ad
    c1, c2, c3, c4 = (c[:, None, None] for c in _jacobian_coefficients(theta))
    return np.eye(6) - c1 * ad + c2 * ad2 - c3 * ad3 + c4 * ad4


def left_jacobians(zetas, indices=None, strict=True):
    return right_jacobians(-np.asarray(zetas, dtype=float), indices, strict)


def right_jacobian(zeta):
    zeta = _checked(zeta, (6,), 'twist')
    return right_jacobians(zeta[None])[0]


def left_jacobian(zeta):
    zeta = _checked(zeta, (6,), 'twist')
    return right_jacobians(-zeta[None])[0]


def screw_decompose(p):
    """Screw parameters of a pose.

    A pure translation gives ``theta = 0``, ``h = |t|`` and ``k = t / |t|``;
    the identity gives zeros with ``k = e_z`` and ``degenerate=True``.
    """
    theta, w = _rotation_angles(p.r[None])
    theta, w = float(theta[0]), w[0]
    t = p.t
    if theta < ANGLE_EPS:
        norm_t = np.linalg.norm(t)
        if norm_t < 1e-12:
            return ScrewParams(0.0, 0.0, np.array([0.0, 0.0, 1.0]), np.zeros(3), degenerate=True)
        return ScrewParams(0.0, float(norm_t), t / norm_t, np.zeros(3))
    if theta > np.pi - PI_MARGIN:
        sym = p.r + np.eye(3)
        col = sym[:, np.argmax(np.linalg.norm(sym, axis=0))]
        k = col / np.linalg.norm(col)
    else:
        k = w / np.linalg.norm(w)
    along = float(k @ t)
    t_perp = t - along * k
    c = 0.5 * (t_perp + np.cross(k, t_perp) / np.tan(0.5 * theta))
    return ScrewParams(theta, along / theta, k, c)


def screw_to_pose(s):
    if s.theta < ANGLE_EPS:
        return Pose(np.eye(3), s.h * np.asarray(s.k))
    k = np.asarray(s.k, dtype=float)
    r = exp_twist(np.concatenate([s.theta * k, np.zeros(3)])).r
    t = (np.eye(3) - r) @ np.asarray(s.c, dtype=float) + s.h * s.theta * k
    return Pose(r, t)


def exp_series(m, terms=30):
    """Truncated matrix exponential series; a test oracle for ``exp_twist``."""
    m = np.asarray(m, dtype=float)
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def log_series(g, terms=40):
    """Truncated matrix logarithm series around the identity."""
    g = np.asarray(g, dtype=float)
    x = g - np.eye(g.shape[0])
    if np.linalg.norm(x, 2) >= 1.0:
        raise OutOfDomain('log series diverges for |G - I| >= 1')
    out = np.zeros_like(x)
    power = np.eye(g.shape[0])
    for k in range(1, terms + 1):
        power = power @ x
        out = out + ((-1.0) ** (k + 1)) * power / k
    return out
