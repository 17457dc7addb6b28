import os
import subprocess
import sys

import numpy as np
import pytest

from cbflearn import SegwayParams, kernels, perturb_params

PY = kernels.load_backend("python")


def _states(n, seed=3):
    rng = np.random.default_rng(seed)
    return rng.uniform([-1, -2, -0.6, -2], [1, 2, 0.6, 2], size=(n, 4))


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.BACKENDS


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree_bitwise():
    cy = kernels.load_backend("cython")
    p = perturb_params(SegwayParams(), 0.15, 4).packed
    for x, u in zip(_states(20000), np.linspace(-100, 100, 20000)):
        xt = tuple(float(v) for v in x)
        assert cy.segway_deriv(p, *xt[1:], float(u)) == PY.segway_deriv(p, *xt[1:], float(u))
    for x, u in zip(_states(200), np.linspace(-100, 100, 200)):
        xt = tuple(float(v) for v in x)
        assert cy.segway_deriv(p, *xt[1:], float(u)) == PY.segway_deriv(p, *xt[1:], float(u))
        assert cy.rk4_hold(p, xt, float(u), 1e-3, 10) == PY.rk4_hold(p, xt, float(u), 1e-3, 10)


def test_env_var_forces_python_backend():
    env = dict(os.environ, CBFLEARN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import cbflearn; print(cbflearn.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_rk4_hold_stops_on_non_finite():
    p = SegwayParams().packed
    out = PY.rk4_hold(p, (0.0, 0.0, 0.0, 1e300), 0.0, 1e-3, 10)
    assert not all(np.isfinite(out))


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_rollouts_agree_across_backends(monkeypatch):
    from cbflearn import CBFQP, ClassKFunction, PDGains, PitchEllipseBarrier, simulate
    nom, bf = SegwayParams(), PitchEllipseBarrier()
    plant = perturb_params(nom, 0.15, 0)
    ctrl = CBFQP(bf, ClassKFunction(0.5), nom, PDGains(150, 35, 0.2, 3.0))
    runs = []
    for name in ("cython", "python"):
        monkeypatch.setattr(kernels, "rk4_hold", kernels.load_backend(name).rk4_hold)
        runs.append(simulate(plant, ctrl, [0.0, 0.3, 0.1, -0.2], 5.0, 0.005, 5))
    assert np.array_equal(runs[0].states, runs[1].states)
    assert np.array_equal(runs[0].inputs, runs[1].inputs)
