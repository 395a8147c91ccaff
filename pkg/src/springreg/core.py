"""Domain types, cloud preprocessing and SO(3) helpers.

Conventions used throughout the package:

* points are stored as ``(N, 3)`` float arrays, one row per point;
* the flattened 18-dim state is ``[com_position; vec(R); com_velocity; omega]``
  with ``vec(R)`` stacking the columns of ``R`` (column-major);
* the scene cloud is shifted by its mass-weighted centroid before any
  dynamics is set up, and that shift is kept so poses can be reported in the
  caller's original frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class RegistrationError(Exception):
    """Base class for errors raised by this package."""


class DegenerateCloud(RegistrationError):
    pass


class NonPositiveSigma(RegistrationError):
    pass


class SingularInput(RegistrationError):
    pass


class SingularInertia(RegistrationError):
    pass


class NonFiniteState(RegistrationError):
    pass


class DegenerateSpectrum(RegistrationError):
    pass


RANK_TOL = 1e-9
ROTATION_TOL = 1e-9


def hat(v):
    """Skew-symmetric matrix with ``hat(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(S):
    """Inverse of :func:`hat` (uses the skew part of ``S``)."""
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def is_rotation(R, tol=ROTATION_TOL):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    ortho = np.linalg.norm(R.T @ R - np.eye(3))
    return ortho <= tol and abs(np.linalg.det(R) - 1.0) <= tol


def project_so3(M):
    """Nearest rotation to ``M`` in Frobenius norm.

    The sign fix for ``det(U V^T) = -1`` is applied to the direction of the
    smallest singular value.
    """
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    if not s[0] > 0 or s[-1] < 1e-12 * s[0]:
        raise SingularInput(f"cannot project a (near) singular matrix, singular values {s}")
    d = np.sign(np.linalg.det(U @ Vt))
    return (U * np.array([1.0, 1.0, d])) @ Vt


def rotation_geodesic_error(R1, R2):
    """Angle in ``[0, pi]`` of the relative rotation ``R1^T R2``."""
    c = (np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0
    return float(abs(np.arccos(np.clip(c, -1.0, 1.0))))


def axis_angle(axis, angle):
    """Rodrigues' formula."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = hat(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def _as_points(a, name):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite coordinates")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not is_rotation(R):
            raise ValueError("pose rotation is not in SO(3)")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def apply(self, points):
        return np.asarray(points) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class ProblemInstance:
    """Model points ``x_i``, scene points ``y_i`` and per-pair noise ``sigma_i``.

    Only shapes and finiteness are checked here; the sigma and rank checks
    happen in :func:`check_instance` so they surface from the solvers.
    """

    model_points: np.ndarray
    scene_points: np.ndarray
    sigmas: np.ndarray
    ground_truth: Pose | None = None

    def __post_init__(self):
        x = _as_points(self.model_points, "model_points")
        y = _as_points(self.scene_points, "scene_points")
        s = np.array(self.sigmas, dtype=float).reshape(-1)
        if s.size == 1 and len(x) > 1:
            s = np.full(len(x), s[0])
        if not (len(x) == len(y) == len(s)):
            raise ValueError(f"length mismatch: {len(x)} model, {len(y)} scene, {len(s)} sigmas")
        if len(x) < 3:
            raise ValueError("at least three correspondences are required")
        s.setflags(write=False)
        object.__setattr__(self, "model_points", x)
        object.__setattr__(self, "scene_points", y)
        object.__setattr__(self, "sigmas", s)

    @property
    def n(self):
        return len(self.sigmas)

    @property
    def weights(self):
        return 1.0 / self.sigmas**2


def weighted_centroid(points, weights):
    return weights @ points / weights.sum()


def check_instance(instance):
    if not np.all(np.isfinite(instance.sigmas)) or np.any(instance.sigmas <= 0):
        raise NonPositiveSigma("all sigmas must be strictly positive")
    w = instance.weights
    centered = instance.model_points - weighted_centroid(instance.model_points, w)
    s = np.linalg.svd(centered.T, compute_uv=False)
    if s[0] == 0 or s[1] <= RANK_TOL * s[0]:
        raise DegenerateCloud("model points are collinear (centered rank < 2)")


@dataclass(frozen=True)
class BodyModel:
    """The rigid particle system built from a problem instance.

    ``scene_centered`` and ``model_offsets`` live in the frame obtained by
    subtracting ``scene_shift`` from both clouds.
    """

    masses: np.ndarray
    spring_constants: np.ndarray
    total_mass: float
    scene_centered: np.ndarray
    model_offsets: np.ndarray
    model_centroid_initial: np.ndarray
    inertia: np.ndarray
    damping: float
    scene_shift: np.ndarray
    inertia_inv: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return len(self.masses)

    @cached_property
    def cloud_scale(self):
        """Mass-weighted RMS radius of the model about its centroid."""
        r2 = np.sum(self.model_offsets**2, axis=1)
        return float(np.sqrt(self.masses @ r2 / self.total_mass))


def build_body_model(instance, mu=1.0):
    check_instance(instance)
    if not mu > 0:
        raise ValueError("damping mu must be positive")
    m = 1.0 / instance.sigmas**2
    k = 2.0 / instance.sigmas**2
    M = float(m.sum())
    y_bar = weighted_centroid(instance.scene_points, m)
    y = instance.scene_points - y_bar
    x = instance.model_points - y_bar
    x_bar = weighted_centroid(x, m)
    xt = x - x_bar
    # J = -sum m hat(x)^2 = sum m (|x|^2 I - x x^T)
    J = np.sum(m * np.sum(xt**2, axis=1)) * np.eye(3) - (xt.T * m) @ xt
    J = 0.5 * (J + J.T)
    try:
        J_inv = np.linalg.inv(J)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rank check guards this
        raise SingularInertia(str(exc)) from exc
    for a in (m, k, y, xt, x_bar, J, J_inv, y_bar):
        a.setflags(write=False)
    return BodyModel(
        masses=m,
        spring_constants=k,
        total_mass=M,
        scene_centered=y,
        model_offsets=xt,
        model_centroid_initial=x_bar,
        inertia=J,
        damping=float(mu),
        scene_shift=y_bar,
        inertia_inv=J_inv,
    )


@dataclass(frozen=True)
class State:
    com_position: np.ndarray
    rotation: np.ndarray
    com_velocity: np.ndarray
    angular_velocity: np.ndarray

    def __post_init__(self):
        for name, shape in (("com_position", (3,)), ("rotation", (3, 3)),
                            ("com_velocity", (3,)), ("angular_velocity", (3,))):
            a = np.array(getattr(self, name), dtype=float).reshape(shape)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def flatten(self):
        return np.concatenate([
            self.com_position,
            self.rotation.reshape(-1, order="F"),
            self.com_velocity,
            self.angular_velocity,
        ])

    @classmethod
    def unflatten(cls, s):
        s = np.asarray(s, dtype=float)
        if s.shape != (18,):
            raise ValueError(f"flat state must have shape (18,), got {s.shape}")
        return cls(s[0:3], s[3:12].reshape(3, 3, order="F"), s[12:15], s[15:18])


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    potential: float
    total: float
    rate: float


def pose_from_state(state, model):
    """Rigid transform mapping original model points onto original scene points."""
    R = state.rotation
    t_shifted = state.com_position - R @ model.model_centroid_initial
    # both clouds were shifted by y_bar; undo it
    t = t_shifted + model.scene_shift - R @ model.scene_shift
    return Pose(R, t)
