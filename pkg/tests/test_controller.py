import numpy as np
import pytest

from cbflearn import (CBFQP, LCBFQP, FilterResult, HalfspaceQP, PDGains, ResidualEstimator, blend,
                      cbf_qp_controller, hdot_nominal_affine, lcbf_qp_controller, pd_control,
                      solve_halfspace_qp)
from cbflearn.controller import controller_inputs


def random_qps(n, rng, active_only=False):
    """Instances whose minimizer lies well inside [-200, 200]."""
    out = []
    while len(out) < n:
        u_des = rng.uniform(-100, 100)
        a = rng.choice([-1, 1]) * rng.uniform(0.05, 5.0)
        c = rng.uniform(-150, 150)
        u = solve_halfspace_qp(HalfspaceQP(u_des, a, c)).u
        if abs(u) > 190 or (active_only and a * u_des >= c):
            continue
        out.append(HalfspaceQP(u_des, a, c))
    return out


def grid_minimizer(qp, grid):
    feasible = grid[qp.a * grid >= qp.c]
    return feasible[np.argmin(np.abs(feasible - qp.u_des))]


# pd ------------------------------------------------------------------------


def test_pd_zero_at_setpoint():
    g = PDGains(150, 35, 0.2, 1.5, 0.01)
    assert pd_control(g, [3.0, 1.5, 0.01, 0.0]) == 0.0


def test_pd_linear_before_saturation():
    g = PDGains(150, 35, 0.2, 0.0)
    x = np.array([0.0, 0.05, 0.02, -0.03])
    assert pd_control(g, 2 * x) == pytest.approx(2 * pd_control(g, x), rel=1e-12)


def test_pd_saturates():
    assert pd_control(PDGains(), [0, 0, 2.0, 0]) == -100.0


def test_gains_must_be_finite():
    with pytest.raises(ValueError):
        PDGains(kp_theta=float("inf"))


# half-space QP -------------------------------------------------------------


def test_qp_examples():
    assert solve_halfspace_qp(HalfspaceQP(0.5, 1.0, 0.0)) == FilterResult(0.5, False, False)
    assert solve_halfspace_qp(HalfspaceQP(0.0, 1.0, 1.0)) == FilterResult(1.0, True, False)


def test_qp_infeasible_fallback():
    r = solve_halfspace_qp(HalfspaceQP(2.0, 1e-12, 1.0))
    assert r == FilterResult(2.0, False, True)
    # satisfied degenerate constraint is simply inactive
    assert solve_halfspace_qp(HalfspaceQP(2.0, 0.0, -1.0)) == FilterResult(2.0, False, False)


def test_qp_rejects_non_finite():
    with pytest.raises(ValueError):
        solve_halfspace_qp(HalfspaceQP(float("nan"), 1.0, 0.0))


def test_qp_matches_grid_oracle(rng):
    grid = np.round(np.arange(-200000, 200001) * 1e-3, 3)
    for qp in random_qps(100, rng):
        assert abs(solve_halfspace_qp(qp).u - grid_minimizer(qp, grid)) <= 2e-3


def test_qp_kkt(rng):
    for qp in random_qps(1000, rng, active_only=True):
        r = solve_halfspace_qp(qp)
        assert r.active
        lam = (r.u - qp.u_des) / qp.a
        assert lam >= 0
        assert abs(qp.a * r.u - qp.c) <= 1e-9 * max(1.0, abs(qp.c))


def test_qp_idempotent(rng):
    for qp in random_qps(200, rng):
        r = solve_halfspace_qp(qp)
        again = solve_halfspace_qp(HalfspaceQP(r.u, qp.a, qp.c))
        if not r.active:
            assert again.u == r.u
        # projected points are feasible up to round-off
        assert qp.a * again.u >= qp.c - 1e-9 * max(1.0, abs(qp.c))


# filters -------------------------------------------------------------------


def test_cbf_inactive_deep_inside(bf, alpha, nom):
    g = PDGains(150, 35, 0.2, 0.0)
    x = np.array([0.0, 0.0, 0.01, 0.0])
    r = cbf_qp_controller(bf, alpha, nom, g, x)
    assert not r.active and r.u == pd_control(g, x)


def test_cbf_boundary_condition(bf, alpha, nom, gains, rng):
    a, b = bf.semi_axes()
    for phi in rng.uniform(0, 2 * np.pi, 100):
        x = np.array([0.0, rng.uniform(-1, 1), a * np.cos(phi), b * np.sin(phi)])
        r = cbf_qp_controller(bf, alpha, nom, gains, x)
        hd = hdot_nominal_affine(bf, nom, x)
        if not r.infeasible_fallback and abs(r.u) < 100:
            assert hd(r.u) >= -1e-9


class _ConstEstimator:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def corrections(self, x):
        return self.a, self.b


def test_lcbf_constraint_satisfied(bf, alpha, nom, gains, rng):
    est = _ConstEstimator(0.02, -0.05)
    for _ in range(300):
        x = rng.uniform([-1, -1, -0.3, -0.9], [1, 1, 0.3, 0.9])
        r = lcbf_qp_controller(bf, alpha, nom, gains, est, x)
        hd = hdot_nominal_affine(bf, nom, x)
        s_dot = hd.drift + (hd.act + est.a) * r.u + est.b
        if not r.infeasible_fallback and abs(r.u) < 100:
            assert s_dot >= -alpha(bf.value(x)) - 1e-9


def test_zero_estimator_equivalence(bf, alpha, nom, gains, rng):
    est = ResidualEstimator.zero((200,))
    k0, k1 = CBFQP(bf, alpha, nom, gains), LCBFQP(bf, alpha, nom, gains, est)
    for _ in range(1000):
        x = rng.uniform([-1, -3, -0.4, -1.5], [1, 3, 0.4, 1.5])
        assert k0(x) == k1(x)


def test_filter_lipschitz_smoke(bf, alpha, nom, gains, rng):
    k0 = CBFQP(bf, alpha, nom, gains)
    ratios = []
    for _ in range(300):
        x = rng.uniform([-1, -1, -0.3, -0.9], [1, 1, 0.3, 0.9])
        d = rng.normal(size=4)
        d *= rng.uniform(1e-6, 1e-4) / np.linalg.norm(d)
        r0, r1 = k0(x), k0(x + d)
        if r0.infeasible_fallback or r1.infeasible_fallback:
            continue
        ratios.append(abs(r1.u - r0.u) / np.linalg.norm(d))
    assert len(ratios) > 250
    assert np.isfinite(max(ratios)) and max(ratios) < 1e5


# blend ---------------------------------------------------------------------


def test_blend_weights(rng):
    k0 = lambda x: FilterResult(float(x[0]), False, False)  # noqa: E731
    k1 = lambda x: FilterResult(float(x[1]), True, False)  # noqa: E731
    xs = rng.uniform(-50, 50, size=(50, 4))
    np.testing.assert_array_equal(controller_inputs(blend(k0, k1, 0.0), xs), xs[:, 0])
    np.testing.assert_array_equal(controller_inputs(blend(k0, k1, 1.0), xs), xs[:, 1])
    np.testing.assert_allclose(controller_inputs(blend(k0, k1, 0.5), xs), 0.5 * (xs[:, 0] + xs[:, 1]))


def test_blend_saturates_and_accepts_floats():
    b = blend(lambda x: 100.0, lambda x: 300.0, 0.5)
    assert b(np.zeros(4)).u == 100.0


@pytest.mark.parametrize("w", [-0.1, 1.5])
def test_blend_rejects_bad_weight(w):
    with pytest.raises(ValueError):
        blend(lambda x: 0.0, lambda x: 0.0, w)
