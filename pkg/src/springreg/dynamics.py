"""Spring-damper rigid body dynamics of the model cloud and its integration.

The model cloud moves in the scene frame under springs ``k_i = 2 / sigma_i^2``
and viscous damping proportional to particle mass.  Everything here works on
the flat 18-vector internally; :class:`~springreg.core.State` is the public
currency.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import EnergyReport, NonFiniteState, SingularInput, State, hat, project_so3


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_STEPS = "MaxSteps"
    STALLED = "Stalled"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    stop_threshold: float = 1e-4
    max_steps: int = 200_000
    # None means "1e-3 x cloud scale" when used for escaping equilibria
    perturbation_scale: float | None = None
    record_every: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.stop_threshold > 0:
            raise ValueError("stop_threshold must be positive")
        if self.max_steps < 1 or self.record_every < 1:
            raise ValueError("max_steps and record_every must be >= 1")
        if self.dt * self.max_steps > 1e7:
            raise ValueError("dt * max_steps exceeds 1e7 simulated seconds")
        if self.perturbation_scale is not None and self.perturbation_scale < 0:
            raise ValueError("perturbation_scale must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple
    energies: tuple
    termination: Termination
    steps: int
    final_state: State
    final_derivative_norm: float
    active_springs: tuple | None = None

    def energy_array(self):
        """``(n_samples, 4)`` array of ``Vk, Vp, V, Vdot``."""
        return np.array([[e.kinetic, e.potential, e.total, e.rate] for e in self.energies])


def _residuals(model, xbar, R):
    return model.scene_centered - model.model_offsets @ R.T - xbar


def _spring_force_torque(model, xbar, R, k):
    f = k @ _residuals(model, xbar, R)
    # rows of a are (R^T (y_i - xbar))^T
    a = (model.scene_centered - xbar) @ R
    tau = k @ np.cross(model.model_offsets, a)
    return f, tau


def _derivative(model, s, k):
    xbar, v, w = s[0:3], s[12:15], s[15:18]
    R = s[3:12].reshape(3, 3, order="F")
    f, tau = _spring_force_torque(model, xbar, R, k)
    f = f - model.damping * model.total_mass * v
    Jw = model.inertia @ w
    tau = tau - model.damping * Jw
    out = np.empty(18)
    out[0:3] = v
    out[3:12] = (R @ hat(w)).reshape(-1, order="F")
    out[12:15] = f / model.total_mass
    out[15:18] = model.inertia_inv @ (tau - np.cross(w, Jw))
    return out


def derivative_flat(model, s, spring_constants=None):
    """``F(s)`` on the flat embedding; the rotation block may be any 3x3 matrix."""
    k = model.spring_constants if spring_constants is None else spring_constants
    return _derivative(model, np.asarray(s, dtype=float), k)


def total_force(model, state):
    f, _ = _spring_force_torque(model, state.com_position, state.rotation, model.spring_constants)
    return f - model.damping * model.total_mass * state.com_velocity


def total_torque(model, state):
    _, tau = _spring_force_torque(model, state.com_position, state.rotation, model.spring_constants)
    # sum_i m_i x_i x (w x x_i) == J w
    return tau - model.damping * model.inertia @ state.angular_velocity


def state_derivative(model, state):
    return derivative_flat(model, state.flatten())


def kinetic_energy(model, v, w):
    return 0.5 * model.total_mass * float(v @ v) + 0.5 * float(w @ model.inertia @ w)


def dissipation_rate(model, v, w):
    return -model.damping * (model.total_mass * float(v @ v) + float(w @ model.inertia @ w))


def potential_energy(model, state):
    r = _residuals(model, state.com_position, state.rotation)
    return float(0.5 * model.spring_constants @ np.sum(r**2, axis=1))


def energies(model, state):
    vk = kinetic_energy(model, state.com_velocity, state.angular_velocity)
    vp = potential_energy(model, state)
    return EnergyReport(vk, vp, vk + vp, dissipation_rate(model, state.com_velocity, state.angular_velocity))


def initial_state(model):
    return State(model.model_centroid_initial, np.eye(3), np.zeros(3), np.zeros(3))


def _euler(s, d, dt):
    nxt = s + dt * d
    if not np.all(np.isfinite(nxt)):
        raise NonFiniteState(f"state became non-finite with dt={dt}; reduce the time step")
    nxt[3:12] = project_so3(nxt[3:12].reshape(3, 3, order="F")).reshape(-1, order="F")
    return nxt


def step(model, state, dt):
    """One explicit Euler step followed by projection of the rotation onto SO(3)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = state.flatten()
    return State.unflatten(_euler(s, derivative_flat(model, s), dt))


def integrate(model, initial, config, *, coefficients=None, potential=None, stalled=None):
    """Explicit Euler loop shared by the quadratic and the saturated-spring systems.

    ``coefficients(s)`` returns the spring constants to use at flat state ``s``
    (default: the model's constants), ``potential(state)`` the potential energy
    to record, and ``stalled(s, k)`` flags a stall before the convergence test.
    """
    if coefficients is None:
        k_fixed = model.spring_constants
        coefficients = lambda s: k_fixed  # noqa: E731
    if potential is None:
        potential = lambda st: potential_energy(model, st)  # noqa: E731

    times, states, reports, active = [], [], [], []

    def record(n, s, k):
        st = State.unflatten(s)
        v, w = s[12:15], s[15:18]
        vk = kinetic_energy(model, v, w)
        vp = potential(st)
        times.append(n * config.dt)
        states.append(st)
        reports.append(EnergyReport(vk, vp, vk + vp, dissipation_rate(model, v, w)))
        active.append(int(np.count_nonzero(k)))

    s = initial.flatten()
    if not np.all(np.isfinite(s)):
        raise NonFiniteState("initial state is not finite")
    n = 0
    while True:
        k = coefficients(s)
        d = _derivative(model, s, k)
        dnorm = float(np.linalg.norm(d))
        if not math.isfinite(dnorm):
            raise NonFiniteState(f"state derivative became non-finite at step {n}")
        if stalled is not None and stalled(s, k):
            reason = Termination.STALLED
        elif dnorm < config.stop_threshold:
            reason = Termination.CONVERGED
        elif n >= config.max_steps:
            reason = Termination.MAX_STEPS
        else:
            reason = None
        if reason is not None or n % config.record_every == 0:
            record(n, s, k)
        if reason is not None:
            break
        try:
            s = _euler(s, d, config.dt)
        except SingularInput as exc:
            # R (I + dt hat(w)) only loses rank numerically once |w| dt blows up
            raise NonFiniteState(f"rotation update diverged at step {n} with dt={config.dt}; "
                                 "reduce the time step") from exc
        n += 1

    return Trajectory(
        times=np.array(times),
        states=tuple(states),
        energies=tuple(reports),
        termination=reason,
        steps=n,
        final_state=states[-1],
        final_derivative_norm=dnorm,
        active_springs=tuple(active),
    )


def simulate(model, initial, config=SimConfig()):
    return integrate(model, initial, config)
