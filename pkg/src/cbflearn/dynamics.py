"""Planar Segway plant, parameter perturbation and sample-hold simulation.

States are length-4 float arrays ordered ``(x_pos, x_vel, theta, theta_dot)``.
The input is a single motor command in percent of battery voltage. A positive
command pitches the body forward and drives the wheel backward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from . import kernels

X_POS, X_VEL, THETA, THETA_DOT = range(4)
STATE_DIM = 4
STATE_NAMES = ("x_pos", "x_vel", "theta", "theta_dot")
U_MAX = 100.0


class SimulationError(RuntimeError):
    """Raised when a rollout produces non-finite values."""


def saturate(u: float) -> float:
    return min(U_MAX, max(-U_MAX, u))


@dataclass(frozen=True)
class SegwayParams:
    """Physical and electrical constants of the planar Segway.

    Attributes:
        cart_mass: wheel/base mass [kg]
        pendulum_mass: body mass [kg]
        com_offset: body center-of-mass distance from the wheel axle [m]
        pendulum_inertia: body inertia about its center of mass [kg m^2]
        wheel_radius: [m]
        torque_constant: motor torque per command unit [N m / %]
        back_emf: motor back-EMF damping [N m s / rad]
        ground_friction: viscous rolling friction [N s / m]
        gravity: [m / s^2]
    """

    cart_mass: float = 20.0
    pendulum_mass: float = 25.0
    com_offset: float = 0.27
    pendulum_inertia: float = 2.0
    wheel_radius: float = 0.195
    torque_constant: float = 1.0
    back_emf: float = 1.0
    ground_friction: float = 1.0
    gravity: float = 9.81

    _POSITIVE = ("cart_mass", "pendulum_mass", "com_offset", "pendulum_inertia",
                 "wheel_radius", "torque_constant", "gravity")
    _NONNEGATIVE = ("back_emf", "ground_friction")

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
        for name in self._POSITIVE:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        for name in self._NONNEGATIVE:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")

    @cached_property
    def packed(self) -> tuple:
        """Parameters as the flat tuple the kernels expect."""
        return tuple(float(getattr(self, f.name)) for f in fields(self))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# masses/inertia and the two motor constants; geometry and gravity stay fixed
PERTURBED_FIELDS = ("cart_mass", "pendulum_mass", "pendulum_inertia",
                    "torque_constant", "back_emf")


def _check_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (STATE_DIM,):
        raise ValueError(f"state must have shape (4,), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"state must be finite, got {x}")
    return x


def eval_dynamics(params: SegwayParams, x, u: float) -> np.ndarray:
    """State derivative f(x) + g(x) u."""
    x = _check_state(x)
    return np.array(kernels.segway_deriv(params.packed, float(x[1]), float(x[2]), float(x[3]), float(u)))


def drift_and_actuation(params: SegwayParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(f(x), g(x))`` with g as a (4, 1) column."""
    f = eval_dynamics(params, x, 0.0)
    g = eval_dynamics(params, x, 1.0) - f
    return f, g.reshape(STATE_DIM, 1)


class ResidualTerms(NamedTuple):
    b_vec: np.ndarray
    A_mat: np.ndarray


def residual_oracle(true_p: SegwayParams, nom_p: SegwayParams, x) -> ResidualTerms:
    """Model gap ``b = f - f_hat`` and ``A = g - g_hat`` at ``x``.

    Only tests and validation use this; controllers never see the true plant.
    """
    f, g = drift_and_actuation(true_p, x)
    f_hat, g_hat = drift_and_actuation(nom_p, x)
    return ResidualTerms(f - f_hat, g - g_hat)


def perturb_params(nominal: SegwayParams, fraction: float, seed: int) -> SegwayParams:
    """Scale each mass/inertia and motor constant by an i.i.d. U[1-f, 1+f] factor."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction!r}")
    if fraction == 0.0:
        return nominal
    rng = np.random.default_rng(seed)
    factors = rng.uniform(1.0 - fraction, 1.0 + fraction, size=len(PERTURBED_FIELDS))
    changes = {name: getattr(nominal, name) * float(k) for name, k in zip(PERTURBED_FIELDS, factors)}
    return replace(nominal, **changes)


def rk4_step(deriv: Callable, x, u: float, dt: float) -> np.ndarray:
    """One classical RK4 step for an arbitrary ``deriv(x, u)``."""
    x = np.asarray(x, dtype=float)
    k1 = deriv(x, u)
    k2 = deriv(x + 0.5 * dt * k1, u)
    k3 = deriv(x + 0.5 * dt * k2, u)
    k4 = deriv(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(params: SegwayParams, x, u: float, dt: float, substeps: int = 1) -> np.ndarray:
    """Advance the plant by ``substeps`` RK4 steps of ``dt`` with ``u`` held."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    x = _check_state(x)
    xt = (float(x[0]), float(x[1]), float(x[2]), float(x[3]))
    out = np.array(kernels.rk4_hold(params.packed, xt, float(u), float(dt), int(substeps)))
    if not np.all(np.isfinite(out)):
        raise SimulationError(f"non-finite state after RK4 step from x={x}, u={u}")
    return out


@dataclass
class Trajectory:
    """Sample-hold rollout sampled at the control rate.

    ``states`` has one more row than ``inputs``; input ``i`` is held over
    ``[times[i], times[i + 1])``.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    active: np.ndarray
    infeasible: np.ndarray
    blew_up: bool = False
    reason: str = ""
    dt: float = field(default=0.0)

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise ValueError("states and times must have equal length")
        if len(self.inputs) != len(self.times) - 1:
            raise ValueError("need exactly one input per control interval")

    def __len__(self):
        return len(self.times)


def _as_filter_output(out):
    # controllers may return a bare float or an object with (u, active, infeasible_fallback)
    if isinstance(out, tuple) and hasattr(out, "infeasible_fallback"):
        return float(out.u), bool(out.active), bool(out.infeasible_fallback)
    return float(out), False, False


def simulate(
    params: SegwayParams,
    controller: Callable,
    x0,
    horizon: float,
    dt_ctrl: float,
    substeps: int = 10,
    theta_e: float = 0.0,
    max_pitch: float = math.pi / 2,
    max_norm: float = 1e3,
) -> Trajectory:
    """Closed-loop rollout with a zero-order hold on the input.

    The controller runs once per ``dt_ctrl``; its output is saturated to
    [-100, 100] and held across ``substeps`` RK4 substeps. The rollout stops
    early, with ``blew_up`` set, once ``|theta - theta_e| > max_pitch`` or
    ``||x|| > max_norm``.
    """
    if horizon <= 0 or dt_ctrl <= 0:
        raise ValueError("horizon and dt_ctrl must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n_steps = max(1, int(round(horizon / dt_ctrl)))
    dt = dt_ctrl / substeps
    p = params.packed
    x = tuple(float(v) for v in _check_state(x0))

    states = [x]
    inputs, active, infeasible = [], [], []
    blew_up, reason = False, ""
    for i in range(n_steps):
        u, act, inf = _as_filter_output(controller(np.array(x)))
        if not math.isfinite(u):
            raise SimulationError(f"controller returned non-finite input {u!r} at step {i}, x={x}")
        u = saturate(u)
        x = kernels.rk4_hold(p, x, u, dt, substeps)
        inputs.append(u)
        active.append(act)
        infeasible.append(inf)
        if not all(map(math.isfinite, x)):
            # keep the last finite state; the interval that diverged is dropped
            inputs.pop(), active.pop(), infeasible.pop()
            blew_up, reason = True, f"non-finite state at t={(i + 1) * dt_ctrl:.4f}"
            break
        states.append(x)
        if abs(x[THETA] - theta_e) > max_pitch or math.sqrt(sum(v * v for v in x)) > max_norm:
            blew_up, reason = True, f"blow-up guard tripped at t={(i + 1) * dt_ctrl:.4f}"
            break

    times = dt_ctrl * np.arange(len(states))
    return Trajectory(
        times=times,
        states=np.array(states, dtype=float),
        inputs=np.array(inputs, dtype=float),
        active=np.array(active, dtype=bool),
        infeasible=np.array(infeasible, dtype=bool),
        blew_up=blew_up,
        reason=reason,
        dt=dt_ctrl,
    )
