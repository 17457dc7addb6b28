import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import fsolve

from cbflearn import (PDGains, SegwayParams, eval_dynamics, integrate_step, pd_control,
                      perturb_params, residual_oracle, simulate)
from cbflearn.dynamics import PERTURBED_FIELDS, SimulationError, Trajectory, rk4_step

finite = st.floats(-1.0, 1.0, allow_nan=False)
state_st = st.tuples(st.floats(-5, 5), st.floats(-3, 3), st.floats(-1.2, 1.2), st.floats(-3, 3))


def _check_shape(traj: Trajectory):
    assert len(traj.states) == len(traj.times)
    assert len(traj.inputs) == len(traj.times) - 1
    assert traj.states.shape[1] == 4


# parameters ----------------------------------------------------------------


def test_default_params_plausible(nom):
    assert 40 <= nom.cart_mass + nom.pendulum_mass <= 50
    assert nom.wheel_radius == 0.195 and nom.com_offset == 0.27


@pytest.mark.parametrize("field", ["cart_mass", "pendulum_inertia", "wheel_radius", "gravity"])
def test_params_reject_nonpositive(field):
    with pytest.raises(ValueError, match=field):
        SegwayParams(**{field: 0.0})


def test_params_reject_nan():
    with pytest.raises(ValueError):
        SegwayParams(torque_constant=float("nan"))


# eval_dynamics -------------------------------------------------------------


def test_upright_rest_is_equilibrium(nom):
    u_eq = fsolve(lambda u: eval_dynamics(nom, [0.7, 0, 0, 0], u[0])[3:], [5.0])
    assert abs(u_eq[0]) < 1e-9
    np.testing.assert_allclose(eval_dynamics(nom, [0.7, 0, 0, 0], 0.0), 0.0, atol=1e-12)


def test_cruise_equilibrium_matches_closed_form(nom):
    v = 0.5
    p = nom
    tau = -p.ground_friction * v * p.wheel_radius
    theta = math.asin(-tau / (p.pendulum_mass * p.gravity * p.com_offset))
    u = (tau - p.back_emf * v / p.wheel_radius) / p.torque_constant
    # independent numeric solve of the two acceleration equations
    sol = fsolve(lambda z: eval_dynamics(p, [0, v, z[0], 0], z[1])[[1, 3]], [0.0, 0.0], xtol=1e-12)
    np.testing.assert_allclose(sol, [theta, u], rtol=1e-9, atol=1e-12)
    d = eval_dynamics(p, [0, v, theta, 0], u)
    np.testing.assert_allclose(d[1:], [0, 0, 0], atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(x=state_st, u1=st.floats(-100, 100), u2=st.floats(-100, 100), lam=st.floats(0, 1))
def test_control_affine(x, u1, u2, lam):
    p = SegwayParams()
    lhs = eval_dynamics(p, x, lam * u1 + (1 - lam) * u2)
    rhs = lam * eval_dynamics(p, x, u1) + (1 - lam) * eval_dynamics(p, x, u2)
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale * 10


def test_affine_doubling(nom, rng):
    for _ in range(100):
        x = rng.uniform(-1, 1, 4)
        u = rng.uniform(-50, 50)
        e0 = eval_dynamics(nom, x, 0.0)
        np.testing.assert_allclose(eval_dynamics(nom, x, 2 * u) - e0, 2 * (eval_dynamics(nom, x, u) - e0),
                                   rtol=1e-10, atol=1e-10)


def test_eval_rejects_non_finite(nom):
    with pytest.raises(ValueError):
        eval_dynamics(nom, [0, np.nan, 0, 0], 0.0)
    with pytest.raises(ValueError):
        eval_dynamics(nom, [0, 0, 0], 0.0)


def test_perturbed_differs(nom):
    true_p = perturb_params(nom, 0.15, 0)
    x = [0, 0.3, 0.1, -0.2]
    assert not np.allclose(eval_dynamics(true_p, x, 10.0), eval_dynamics(nom, x, 10.0))


# residual oracle -----------------------------------------------------------


def test_residual_zero_for_identical_models(nom):
    r = residual_oracle(nom, nom, [0.1, 0.2, 0.3, 0.4])
    assert np.all(r.b_vec == 0) and np.all(r.A_mat == 0)
    assert r.A_mat.shape == (4, 1)


def test_residual_reproduces_model_gap(nom, rng):
    true_p = perturb_params(nom, 0.15, 7)
    for _ in range(1000):
        x = rng.uniform([-1, -2, -0.8, -2], [1, 2, 0.8, 2])
        u = rng.uniform(-100, 100)
        r = residual_oracle(true_p, nom, x)
        gap = eval_dynamics(true_p, x, u) - eval_dynamics(nom, x, u)
        np.testing.assert_allclose(gap, r.b_vec + r.A_mat[:, 0] * u, rtol=1e-9, atol=1e-9)


def test_residual_nonzero_off_equilibrium(nom):
    r = residual_oracle(perturb_params(nom, 0.15, 1), nom, [0.0, 0.4, 0.15, -0.3])
    assert np.linalg.norm(r.b_vec) > 1e-3


# perturbation --------------------------------------------------------------


def test_perturb_zero_is_identity(nom):
    assert perturb_params(nom, 0.0, 5) == nom


def test_perturb_bounds_over_seeds(nom):
    for seed in range(100):
        p = perturb_params(nom, 0.15, seed)
        assert p == perturb_params(nom, 0.15, seed)
        for name in PERTURBED_FIELDS:
            ratio = getattr(p, name) / getattr(nom, name)
            assert 0.85 <= ratio <= 1.15
        for name in ("com_offset", "wheel_radius", "gravity", "ground_friction"):
            assert getattr(p, name) == getattr(nom, name)


def test_perturb_rejects_bad_fraction(nom):
    with pytest.raises(ValueError):
        perturb_params(nom, 1.5, 0)


# integration ---------------------------------------------------------------


def test_rk4_zero_dynamics_fixed_point():
    x = np.array([1.0, -2.0, 0.3, 4.0])
    assert np.array_equal(rk4_step(lambda x, u: np.zeros(4), x, 3.0, 0.1), x)


def _linear_upright(p: SegwayParams) -> np.ndarray:
    """Jacobian at the upright rest state with u = 0, derived by hand."""
    M, m, L, J, R = p.cart_mass, p.pendulum_mass, p.com_offset, p.pendulum_inertia, p.wheel_radius
    bt, bx, g = p.back_emf, p.ground_friction, p.gravity
    a11, a12, a22 = M + m, m * L, J + m * L * L
    det = a11 * a22 - a12 * a12
    # tau = bt xdot / R - bt thdot;  r1 = -bx xdot - tau / R;  r2 = m g L th + tau
    r1 = np.array([0.0, -bx - bt / R**2, 0.0, bt / R])
    r2 = np.array([0.0, bt / R, m * g * L, -bt])
    A = np.zeros((4, 4))
    A[0, 1] = A[2, 3] = 1.0
    A[1] = (a22 * r1 - a12 * r2) / det
    A[3] = (a11 * r2 - a12 * r1) / det
    return A


def test_linearization_matches_plant(nom):
    A = _linear_upright(nom)
    eps = 1e-6
    J = np.column_stack([(eval_dynamics(nom, eps * e, 0) - eval_dynamics(nom, -eps * e, 0)) / (2 * eps)
                         for e in np.eye(4)])
    np.testing.assert_allclose(J, A, rtol=1e-6, atol=1e-8)


def test_rk4_matches_exponential_solution(nom):
    A = _linear_upright(nom)
    x0 = np.array([0.0, 0.1, 0.05, -0.1])
    x, dt = x0.copy(), 1e-3
    for _ in range(100):
        x = rk4_step(lambda z, u: A @ z, x, 0.0, dt)
    exact = expm(A * 0.1) @ x0
    assert np.linalg.norm(x - exact) / np.linalg.norm(exact) < 1e-6


def _integrate(p, x0, u, T, dt):
    return integrate_step(p, x0, u, dt, int(round(T / dt)))


def test_rk4_global_order(nom):
    x0, u, T = np.array([0.0, 0.4, 0.2, -0.5]), 3.0, 0.5
    dt = 0.02
    ref = _integrate(nom, x0, u, T, dt / 100)
    e1 = np.linalg.norm(_integrate(nom, x0, u, T, dt) - ref)
    e2 = np.linalg.norm(_integrate(nom, x0, u, T, dt / 2) - ref)
    order = math.log2(e1 / e2)
    assert 3.8 <= order <= 4.2


def test_rk4_one_step_error_ratio(nom):
    x0, u = np.array([0.0, 0.4, 0.2, -0.5]), 3.0
    errs = []
    for dt in (0.04, 0.02):
        ref = integrate_step(nom, x0, u, dt / 100, 100)
        errs.append(np.linalg.norm(integrate_step(nom, x0, u, dt) - ref))
    # local truncation error is O(dt^5)
    assert 2**4.5 <= errs[0] / errs[1] <= 2**5.5


def test_rk4_agrees_with_solve_ivp(nom):
    x0, u = np.array([0.0, 0.2, 0.1, 0.0]), -5.0
    sol = solve_ivp(lambda t, x: eval_dynamics(nom, x, u), (0, 1.0), x0, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(_integrate(nom, x0, u, 1.0, 1e-3), sol.y[:, -1], rtol=1e-7, atol=1e-8)


def test_integrate_rejects_bad_dt(nom):
    with pytest.raises(ValueError):
        integrate_step(nom, np.zeros(4), 0.0, 0.0)


def test_integrate_non_finite_raises(nom):
    with pytest.raises(SimulationError):
        integrate_step(nom, [0, 0, 0, 1e200], 0.0, 1e-3, 10)


# simulate ------------------------------------------------------------------


def test_single_interval(nom):
    traj = simulate(nom, lambda x: 0.0, np.zeros(4), 0.01, 0.01, 10)
    _check_shape(traj)
    assert len(traj.states) == 2 and len(traj.inputs) == 1


def test_zero_order_hold_matches_manual_loop(nom):
    calls = []

    def ctrl(x):
        calls.append(x.copy())
        return 40.0 * math.sin(len(calls))

    traj = simulate(nom, ctrl, [0, 0, 0.05, 0], 0.2, 0.01, 10)
    _check_shape(traj)
    assert len(calls) == len(traj.inputs) == 20
    x = traj.states[0]
    for i, u in enumerate(traj.inputs):
        x = integrate_step(nom, x, u, 1e-3, 10)
        assert np.array_equal(x, traj.states[i + 1])


def test_input_saturation(nom):
    traj = simulate(nom, lambda x: 1e6, np.zeros(4), 0.05, 0.01)
    assert np.all(traj.inputs == 100.0)


def test_blow_up_flagged(nom):
    traj = simulate(nom, lambda x: 0.0, [0, 0, 0.3, 0], 10.0, 0.01)
    _check_shape(traj)
    assert traj.blew_up and "guard" in traj.reason
    assert len(traj.states) < 1001


def test_non_finite_controller_aborts(nom):
    with pytest.raises(SimulationError):
        simulate(nom, lambda x: float("nan"), np.zeros(4), 0.1, 0.01)


@pytest.mark.parametrize("kw", [dict(horizon=0.0), dict(dt_ctrl=-1.0), dict(substeps=0)])
def test_simulate_rejects_bad_arguments(nom, kw):
    args = dict(horizon=1.0, dt_ctrl=0.01, substeps=10) | kw
    with pytest.raises(ValueError):
        simulate(nom, lambda x: 0.0, np.zeros(4), **args)


def test_pd_contracts_pitch(nom):
    g = PDGains(150.0, 35.0, 0.2, 0.0)
    traj = simulate(nom, lambda x: pd_control(g, x), [0, 0, 0.1, 0], 3.0, 0.01)
    assert not traj.blew_up
    assert abs(traj.states[-1, 2]) < 0.02 < abs(traj.states[0, 2])
