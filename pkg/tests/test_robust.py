import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from springreg.core import ProblemInstance, State, axis_angle, build_body_model, pose_from_state, rotation_geodesic_error
from springreg.dynamics import SimConfig, Termination, initial_state, potential_energy, simulate, total_force, total_torque
from springreg.horn import horn_solve
from springreg.robust import (RobustSpringModel, active_spring_coefficient, inactive_springs,
                              robust_force_torque, robust_potential, robust_simulate)

from conftest import random_instance, random_state


def _model(seed=0, n=10, sigma=0.01, cbar=10.0):
    inst, _, _ = random_instance(np.random.default_rng(seed), n=n, sigma=sigma, hetero=True)
    base = build_body_model(inst)
    return RobustSpringModel.from_body(base, cbar)


def _at_rest(s):
    return State(s.com_position, s.rotation, np.zeros(3), np.zeros(3))


def test_active_coefficient_branches():
    m = _model()
    b = m.betas[2]
    t = m.cbar**2 * b**2
    assert active_spring_coefficient(m, 0.0, 2) == 2 / b**2
    assert active_spring_coefficient(m, 2 * t, 2) == 0.0
    assert active_spring_coefficient(m, t, 2) == 2 / b**2


def test_potential_limits(rng):
    m = _model(cbar=3.0)
    opt = State(np.zeros(3), horn_solve(ProblemInstance(m.base.model_offsets, m.base.scene_centered,
                                                        m.betas)).rotation, np.zeros(3), np.zeros(3))
    far = State([1e3, 0, 0], np.eye(3), np.zeros(3), np.zeros(3))
    assert robust_potential(m, far) == pytest.approx(m.base.n * m.cbar**2, rel=1e-15)
    x = rng.normal(size=(5, 3))
    exact = build_body_model(ProblemInstance(x, x, 0.1))
    assert robust_potential(RobustSpringModel.from_body(exact, 1.0), initial_state(exact)) <= 1e-24
    # inside the inlier region the saturated and quadratic potentials agree
    loose = RobustSpringModel.from_body(m.base, 1e6)
    for _ in range(20):
        s = random_state(rng)
        assert robust_potential(loose, s) == pytest.approx(potential_energy(m.base, s), rel=1e-12)
    assert robust_potential(m, opt) <= potential_energy(m.base, opt) + 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0), st.floats(1.0, 5.0))
def test_potential_bounds_and_monotone_in_cbar(seed, cbar, factor):
    rng = np.random.default_rng(seed)
    m = _model(seed % 7, cbar=cbar)
    s = random_state(rng, scale=0.05)
    v = robust_potential(m, s)
    assert v <= potential_energy(m.base, s) * (1 + 1e-12)
    assert v <= m.base.n * cbar**2 * (1 + 1e-12)
    assert v <= robust_potential(RobustSpringModel.from_body(m.base, cbar * factor), s) * (1 + 1e-12)


def test_force_torque_all_saturated_and_no_saturation(rng):
    m = _model()
    far = State([50.0, 0, 0], np.eye(3), np.zeros(3), np.zeros(3))
    f, tau = robust_force_torque(m, far)
    assert np.array_equal(f, np.zeros(3)) and np.array_equal(tau, np.zeros(3))
    loose = RobustSpringModel.from_body(m.base, 1e9)
    for _ in range(10):
        s = random_state(rng)
        f, tau = robust_force_torque(loose, s)
        assert np.allclose(f, total_force(m.base, s), rtol=1e-12, atol=1e-12 * np.abs(f).max())
        assert np.allclose(tau, total_torque(m.base, s), rtol=1e-12, atol=1e-12 * np.abs(tau).max())


def test_single_active_spring():
    x = np.array([[1.0, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    y = x.copy()
    y[1:] += 100.0
    base = build_body_model(ProblemInstance(x, y, 1.0))
    m = RobustSpringModel.from_body(base, 5.0)
    s = initial_state(base)
    r = base.scene_centered[0] - base.model_offsets[0] - s.com_position
    assert list(inactive_springs(m, s)) == [1, 2, 3]
    f, _ = robust_force_torque(m, s)
    assert np.allclose(f, 2.0 * r)


def test_force_is_negative_potential_gradient(rng):
    m = _model(n=8, cbar=2.0)
    h = 1e-7
    checked = 0
    while checked < 100:
        s = _at_rest(random_state(rng, scale=0.02))
        r2 = np.sum((m.base.scene_centered - m.base.model_offsets @ s.rotation.T - s.com_position) ** 2, axis=1)
        if np.min(np.abs(r2 - m.thresholds_sq) / m.thresholds_sq) < 1e-3:
            continue
        grad = np.empty(3)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            up = robust_potential(m, State(s.com_position + e, s.rotation, np.zeros(3), np.zeros(3)))
            dn = robust_potential(m, State(s.com_position - e, s.rotation, np.zeros(3), np.zeros(3)))
            grad[j] = (up - dn) / (2 * h)
        f, _ = robust_force_torque(m, s)
        if np.linalg.norm(f) == 0:
            assert np.linalg.norm(grad) == 0
        else:
            assert np.linalg.norm(f + grad) <= 1e-5 * np.linalg.norm(f)
        checked += 1


def test_stall_when_everything_saturated():
    m = _model()
    far = State(m.base.model_centroid_initial + 100.0, np.eye(3), np.zeros(3), np.zeros(3))
    traj = robust_simulate(m, far)
    assert traj.termination is Termination.STALLED
    assert traj.steps == 0
    assert traj.active_springs == (0,)


def test_huge_cbar_reproduces_quadratic_trajectory():
    inst, _, _ = random_instance(np.random.default_rng(8), n=12, sigma=0.01)
    base = build_body_model(inst)
    cfg = SimConfig()
    quad = simulate(base, initial_state(base), cfg)
    rob = robust_simulate(RobustSpringModel.from_body(base, 1e9), initial_state(base), cfg)
    assert rob.termination is quad.termination and rob.steps == quad.steps
    for a, b, ea, eb in zip(quad.states, rob.states, quad.energies, rob.energies):
        assert np.abs(a.flatten() - b.flatten()).max() <= 1e-9
        assert ea.potential == pytest.approx(eb.potential, rel=1e-9, abs=1e-9)


def _outlier_instance(seed, n=20, frac=0.2, sigma=0.01):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    # springs only engage within cbar * beta of their targets, so start close
    R = axis_angle(rng.normal(size=3), np.deg2rad(1.0))
    t = rng.normal(size=3) * 0.01
    y = x @ R.T + t + rng.normal(size=(n, 3)) * sigma
    n_out = int(round(frac * n))
    out = rng.choice(n, n_out, replace=False)
    radius = 5 * np.sqrt(np.mean(np.sum((x - x.mean(0)) ** 2, axis=1)))
    d = rng.normal(size=(n_out, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    y[out] = y.mean(0) + d * radius * rng.uniform(size=(n_out, 1)) ** (1 / 3)
    inliers = np.setdiff1d(np.arange(n), out)
    return ProblemInstance(x, y, sigma), inliers, out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_outliers_rejected(seed):
    inst, inliers, out = _outlier_instance(seed)
    base = build_body_model(inst)
    m = RobustSpringModel.from_body(base, 10.0)
    traj = robust_simulate(m, initial_state(base))
    assert traj.termination is Termination.CONVERGED
    ref = horn_solve(ProblemInstance(inst.model_points[inliers], inst.scene_points[inliers], 0.01))
    pose = pose_from_state(traj.final_state, base)
    assert np.degrees(rotation_geodesic_error(pose.rotation, ref.rotation)) < 1.0
    assert set(inactive_springs(m, traj.final_state)) == set(out)

    # between changes of the active set the energy only decreases, up to Euler error
    E = traj.energy_array()
    dV = np.diff(E[:, 2])
    same = np.diff(np.array(traj.active_springs)) == 0
    bound = 10 * 0.01 * np.abs(E[:, 3]).max() * 0.1
    assert np.all(dV[same] <= bound)
