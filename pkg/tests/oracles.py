"""Independent reference computations used by the tests.

Nothing here calls the code paths it is used to check.
"""
import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation as ScipyRotation


def inertia_elementwise(masses, offsets):
    """J = -sum m hat(x)^2 assembled entry by entry from hat(x)^2 = x x^T - |x|^2 I."""
    J = np.zeros((3, 3))
    for m, x in zip(masses, offsets):
        sq = x[0] ** 2 + x[1] ** 2 + x[2] ** 2
        for a in range(3):
            for b in range(3):
                J[a, b] -= m * (x[a] * x[b] - (sq if a == b else 0.0))
    return J


def particle_forces(model, state):
    """Per-particle force on each model point, in the scene frame."""
    R, xbar = state.rotation, state.com_position
    v, w = state.com_velocity, state.angular_velocity
    out = []
    for m, k, xt, y in zip(model.masses, model.spring_constants, model.model_offsets, model.scene_centered):
        vel = v + R @ np.cross(w, xt)
        out.append(k * (y - R @ xt - xbar) - model.damping * m * vel)
    return np.array(out)


def particle_force_sum(model, state):
    return particle_forces(model, state).sum(axis=0)


def particle_torque_sum(model, state):
    R = state.rotation
    fx = particle_forces(model, state) @ R  # rows R^T f_i
    return sum(np.cross(xt, f) for xt, f in zip(model.model_offsets, fx))


def particle_kinetic(model, state):
    R, v, w = state.rotation, state.com_velocity, state.angular_velocity
    return sum(0.5 * m * np.sum((v + R @ np.cross(w, xt)) ** 2)
               for m, xt in zip(model.masses, model.model_offsets))


def richardson_jacobian(f, s, h):
    """Five-point stencil derivative (fourth order)."""
    n = len(s)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((-f(s + 2 * e) + 8 * f(s + e) - 8 * f(s - e) + f(s - 2 * e)) / (12 * h))
    return np.column_stack(cols)


def random_rotations(n, seed):
    return ScipyRotation.random(n, random_state=seed).as_matrix()


def zyz_grid(step_deg=30):
    a = np.deg2rad(np.arange(0, 360, step_deg))
    b = np.deg2rad(np.arange(0, 181, step_deg))
    angles = np.array([[p, q, r] for p in a for q in b for r in a])
    return ScipyRotation.from_euler("ZYZ", angles).as_matrix()


def torque_vector(model, R):
    return model.spring_constants @ np.cross(model.model_offsets, model.scene_centered @ R)


def descent_equilibria(model, starts, seed, scale):
    """Random-restart Levenberg-Marquardt on the relative torque, parametrized by rotation vectors.

    Returns ``(rotations, residuals)`` of the local minima reached.
    """
    rng_rots = ScipyRotation.random(starts, random_state=seed)
    found, res = [], []
    for r0 in rng_rots:
        R0 = r0.as_matrix()

        def fun(th, R0=R0):
            return torque_vector(model, R0 @ ScipyRotation.from_rotvec(th).as_matrix()) / scale

        sol = least_squares(fun, np.zeros(3), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        R = R0 @ ScipyRotation.from_rotvec(sol.x).as_matrix()
        found.append(R)
        res.append(np.linalg.norm(fun(sol.x)))
    return found, np.array(res)
