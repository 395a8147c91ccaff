"""Equilibrium enumeration, Jacobian stability certificates and symmetric continua.

At an equilibrium the model centroid sits on the scene centroid, both
velocities vanish and the spring torque ``sum k_i x_i x R^T y_i`` is zero,
i.e. ``R^T H`` is symmetric for ``H = sum k_i y_i x_i^T``.  With distinct
nonzero singular values ``H = U S V^T`` this leaves exactly the four
rotations ``U D V^T`` with ``D`` a sign matrix of the right determinant.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (DegenerateSpectrum, ProblemInstance, RegistrationError, State,
                   axis_angle, build_body_model, rotation_geodesic_error)
from .dynamics import SimConfig, Termination, Trajectory, derivative_flat, integrate, total_torque
from .horn import horn_solve

CERTIFY_TOL = 1e-6
SPECTRUM_TOL = 1e-9
INSTABILITY_REL = 1e-6


class EscapeFailed(RegistrationError):
    pass


@dataclass(frozen=True)
class EquilibriumCertificate:
    rotation: np.ndarray
    torque_residual: float  # relative to sum k_i |x_i| |y_i|
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    unstable_count: int
    rotation_error_vs_horn: float

    def state(self):
        return equilibrium_state(self.rotation)


def equilibrium_state(R):
    return State(np.zeros(3), R, np.zeros(3), np.zeros(3))


def cross_covariance(model):
    return (model.scene_centered.T * model.spring_constants) @ model.model_offsets


def torque_scale(model):
    return float(model.spring_constants @ (np.linalg.norm(model.model_offsets, axis=1)
                                           * np.linalg.norm(model.scene_centered, axis=1)))


def torque_residual(model, R):
    """Relative spring torque at the static state with aligned centroids."""
    a = model.scene_centered @ R
    tau = model.spring_constants @ np.cross(model.model_offsets, a)
    return float(np.linalg.norm(tau)) / torque_scale(model)


def jacobian(model, state, epsilon=None, spring_constants=None):
    """Central differences of the state derivative on the flat 18-dim embedding.

    The rotation block is perturbed entrywise without re-projection.
    """
    s = state.flatten() if isinstance(state, State) else np.asarray(state, dtype=float)
    if epsilon is None:
        epsilon = 1e-6 * (1.0 + np.max(np.abs(s)))
    A = np.empty((18, 18))
    for j in range(18):
        e = np.zeros(18)
        e[j] = epsilon
        A[:, j] = (derivative_flat(model, s + e, spring_constants)
                   - derivative_flat(model, s - e, spring_constants)) / (2 * epsilon)
    return A


def instability_threshold(eigenvalues, rel=INSTABILITY_REL):
    return rel * float(np.max(np.abs(eigenvalues)))


def classify_stability(eigenvalues, rel=INSTABILITY_REL):
    """Number of eigenvalues strictly right of ``rel * spectral_radius``.

    Zero is *no instability certificate*, not a stability proof: the embedding
    always adds six (numerically) zero eigenvalues.
    """
    eigenvalues = np.asarray(eigenvalues)
    return int(np.count_nonzero(eigenvalues.real > instability_threshold(eigenvalues, rel)))


def certify(model, R, R_opt=None, epsilon=None):
    if R_opt is None:
        R_opt = _horn_rotation(model)
    A = jacobian(model, equilibrium_state(R), epsilon)
    lam = np.linalg.eigvals(A)
    return EquilibriumCertificate(
        rotation=R,
        torque_residual=torque_residual(model, R),
        jacobian=A,
        eigenvalues=lam,
        unstable_count=classify_stability(lam),
        rotation_error_vs_horn=rotation_geodesic_error(R, R_opt),
    )


def _horn_rotation(model):
    sigmas = np.sqrt(1.0 / model.masses)
    return horn_solve(ProblemInstance(model.model_offsets, model.scene_centered, sigmas)).rotation


def candidate_rotations(model):
    H = cross_covariance(model)
    U, s, Vt = np.linalg.svd(H)
    scale = s[0]
    if scale == 0 or s[2] <= SPECTRUM_TOL * scale or np.min(np.diff(-s)) <= SPECTRUM_TOL * scale:
        raise DegenerateSpectrum(
            f"singular values {s} are repeated or vanish; the equilibrium set is not finite "
            "(symmetric cloud), use the symmetry constructors instead")
    parity = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    out = []
    for s1, s2 in itertools.product((1.0, -1.0), repeat=2):
        D = np.array([s1, s2, parity * s1 * s2])
        out.append((U * D) @ Vt)
    return out


def enumerate_equilibria(model, tol=CERTIFY_TOL, epsilon=None):
    R_opt = _horn_rotation(model)
    certs = []
    for R in candidate_rotations(model):
        if torque_residual(model, R) <= tol:
            certs.append(certify(model, R, R_opt, epsilon))
    return sorted(certs, key=lambda c: c.unstable_count)


# --- symmetric configurations -------------------------------------------------


def _planar_points(l, angles, offset=None):
    pts = l * np.column_stack([np.cos(angles), np.sin(angles), np.zeros(len(angles))])
    if offset is not None:
        pts[0] += offset
        pts -= pts.mean(axis=0)
    return pts


def _flipped(scene, theta):
    # reflect about the symmetry line through vertex 1 (the y axis), then rotate by theta
    flip = np.diag([-1.0, 1.0, 1.0])
    return scene @ (axis_angle([0, 0, 1], theta) @ flip).T


def make_equilateral_triangle(l, theta, sigma=1.0, vertex_offset=None):
    """Scene: equilateral triangle of circumradius ``l`` in ``z = 0``, vertex 1 on ``+y``.

    Model: the scene rotated CCW by ``theta`` and flipped about the line through
    the (rotated) vertex 1 and the center.  Vertices are ordered 1, 2, 3 with
    vertex 3 at ``+120`` degrees from vertex 1.  ``vertex_offset`` moves scene
    vertex 1 before the model is built (then both clouds are re-centered).
    """
    if not l > 0:
        raise ValueError("l must be positive")
    angles = np.pi / 2 + np.array([0.0, -2 * np.pi / 3, 2 * np.pi / 3])
    scene = _planar_points(l, angles, vertex_offset)
    return ProblemInstance(_flipped(scene, theta), scene, sigma)


def make_square(l, theta, sigma=1.0, vertex_offset=None):
    """Square analogue of :func:`make_equilateral_triangle` (``l`` = center-to-vertex)."""
    if not l > 0:
        raise ValueError("l must be positive")
    angles = np.pi / 2 + np.arange(4) * np.pi / 2
    scene = _planar_points(l, angles, vertex_offset)
    return ProblemInstance(_flipped(scene, theta), scene, sigma)


def per_point_torques(instance):
    """Spring torque of each pair at the identity pose with aligned centroids."""
    model = build_body_model(instance)
    return model.spring_constants[:, None] * np.cross(model.model_offsets, model.scene_centered)


def symmetry_torque_residual(instance):
    model = build_body_model(instance)
    static = State(np.zeros(3), np.eye(3), np.zeros(3), np.zeros(3))
    return float(np.linalg.norm(total_torque(model, static)))


# --- escaping unstable equilibria -------------------------------------------------


def _concat(legs):
    if len(legs) == 1:
        return legs[0]
    times, states, energies, active = [], [], [], []
    t0, steps = 0.0, 0
    for leg in legs:
        times.extend(leg.times + t0)
        states.extend(leg.states)
        energies.extend(leg.energies)
        active.extend(leg.active_springs or ())
        t0 = times[-1]
        steps += leg.steps
    last = legs[-1]
    return Trajectory(np.array(times), tuple(states), tuple(energies), last.termination, steps,
                      last.final_state, last.final_derivative_norm, tuple(active))


def _kick(state, scale, rng):
    s = state.flatten()
    u = rng.normal(size=6)
    s[12:18] += scale * u / np.linalg.norm(u)
    return State.unflatten(s)


def escape_and_resimulate(model, cert, config=SimConfig(), rng=None, max_restarts=20):
    """Kick the velocities at ``cert`` and simulate; re-kick while stuck at an unstable point.

    Each leg stops by the usual ``|s'|`` rule.  If a leg ends where the
    Jacobian still certifies instability, the velocities are kicked again from
    there.  The returned trajectory concatenates all legs.
    """
    rng = np.random.default_rng() if rng is None else rng
    scale = config.perturbation_scale
    if scale is None:
        scale = 1e-3 * model.cloud_scale
    start = equilibrium_state(cert.rotation)
    if scale == 0:
        return integrate(model, start, config)

    legs = []
    state = start
    for _ in range(max_restarts + 1):
        leg = integrate(model, _kick(state, scale, rng), config)
        legs.append(leg)
        state = leg.final_state
        if leg.termination is not Termination.CONVERGED:
            break
        lam = np.linalg.eigvals(jacobian(model, state))
        if classify_stability(lam) == 0:
            break
    traj = _concat(legs)
    if cert.unstable_count > 0 and rotation_geodesic_error(traj.final_state.rotation, cert.rotation) < 1e-3:
        raise EscapeFailed("simulation did not leave the perturbed unstable equilibrium")
    return traj
