"""Saturated (truncated least squares) springs.

Each spring carries potential ``min(|r_i|^2 / beta_i^2, cbar^2)`` and is cut
(coefficient zero) once ``|r_i|^2 > cbar^2 beta_i^2``.  Damping keeps acting on
every particle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BodyModel
from .dynamics import SimConfig, _residuals, integrate


@dataclass(frozen=True)
class RobustSpringModel:
    base: BodyModel
    betas: np.ndarray
    cbar: float

    def __post_init__(self):
        betas = np.array(self.betas, dtype=float).reshape(-1)
        if betas.size == 1:
            betas = np.full(self.base.n, betas[0])
        if betas.shape != (self.base.n,):
            raise ValueError("need one beta per correspondence")
        if np.any(betas <= 0) or not self.cbar > 0:
            raise ValueError("betas and cbar must be positive")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "cbar", float(self.cbar))

    @classmethod
    def from_body(cls, base, cbar, betas=None):
        """``betas`` defaults to the sigmas the body was built from."""
        if betas is None:
            betas = np.sqrt(1.0 / base.masses)
        return cls(base, betas, cbar)

    @property
    def thresholds_sq(self):
        return self.cbar**2 * self.betas**2

    @property
    def full_coefficients(self):
        return 2.0 / self.betas**2


def _residual_sq(model, xbar, R):
    return np.sum(_residuals(model.base, xbar, R)**2, axis=1)


def active_spring_coefficient(model, residual_sq, i):
    if residual_sq <= model.cbar**2 * model.betas[i]**2:
        return 2.0 / model.betas[i]**2
    return 0.0


def active_coefficients(model, residual_sq):
    return np.where(residual_sq <= model.thresholds_sq, model.full_coefficients, 0.0)


def robust_potential(model, state):
    r2 = _residual_sq(model, state.com_position, state.rotation)
    return float(np.sum(np.minimum(r2 / model.betas**2, model.cbar**2)))


def robust_force_torque(model, state):
    base = model.base
    xbar, R = state.com_position, state.rotation
    k = active_coefficients(model, _residual_sq(model, xbar, R))
    f = k @ _residuals(base, xbar, R) - base.damping * base.total_mass * state.com_velocity
    a = (base.scene_centered - xbar) @ R
    tau = k @ np.cross(base.model_offsets, a) - base.damping * base.inertia @ state.angular_velocity
    return f, tau


def _flat_coefficients(model, s):
    R = s[3:12].reshape(3, 3, order="F")
    return active_coefficients(model, _residual_sq(model, s[0:3], R))


def robust_simulate(model, initial, config=SimConfig()):
    """Same explicit Euler loop as the quadratic system with the saturated coefficients.

    Terminates with ``Stalled`` when every spring is cut and the velocities are
    below the stop threshold; the recorded potential is :func:`robust_potential`.
    """
    def stalled(s, k):
        return not np.any(k) and np.linalg.norm(s[12:18]) < config.stop_threshold

    return integrate(
        model.base, initial, config,
        coefficients=lambda s: _flat_coefficients(model, s),
        potential=lambda st: robust_potential(model, st),
        stalled=stalled,
    )


def inactive_springs(model, state):
    """Indices of springs cut at ``state`` (putative outliers)."""
    r2 = _residual_sq(model, state.com_position, state.rotation)
    return np.flatnonzero(r2 > model.thresholds_sq)
