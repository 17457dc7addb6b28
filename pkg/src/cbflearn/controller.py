"""PD balancing controller, min-norm barrier filters and trust-weight blending."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .barrier import BarrierFunction, ClassKFunction, hdot_nominal_affine
from .dynamics import THETA, THETA_DOT, X_VEL, saturate

logger = logging.getLogger(__name__)

EPS_A = 1e-10


@dataclass(frozen=True)
class PDGains:
    """Pitch PD with an outer proportional velocity loop.

    The pitch target is ``theta_target + kp_vel * (v_des - x_vel)``.
    """

    kp_theta: float = 150.0
    kd_theta: float = 35.0
    kp_vel: float = 0.2
    v_des: float = 0.0
    theta_target: float = 0.0

    def __post_init__(self):
        for name in ("kp_theta", "kd_theta", "kp_vel", "v_des", "theta_target"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def pd_control(g: PDGains, x) -> float:
    target = g.theta_target + g.kp_vel * (g.v_des - x[X_VEL])
    u = g.kp_theta * (target - x[THETA]) - g.kd_theta * x[THETA_DOT]
    return saturate(float(u))


class HalfspaceQP(NamedTuple):
    """min 0.5 (u - u_des)^2  s.t.  a * u >= c, for a scalar input."""

    u_des: float
    a: float
    c: float


class FilterResult(NamedTuple):
    u: float
    active: bool
    infeasible_fallback: bool


def solve_halfspace_qp(qp: HalfspaceQP) -> FilterResult:
    u_des, a, c = qp
    if not (math.isfinite(u_des) and math.isfinite(a) and math.isfinite(c)):
        raise ValueError(f"non-finite QP data {qp}")
    slack = a * u_des
    if slack >= c:
        return FilterResult(u_des, False, False)
    if abs(a) > EPS_A:
        return FilterResult(u_des + a * (c - slack) / (a * a), True, False)
    logger.debug("barrier constraint infeasible: a=%g, c=%g, a*u_des=%g", a, c, slack)
    return FilterResult(u_des, False, True)


def _filter(bf, alpha, nom_p, gains, x, a_corr=0.0, b_corr=0.0) -> FilterResult:
    u_des = pd_control(gains, x)
    hd = hdot_nominal_affine(bf, nom_p, x)
    h = float(bf.value(x))
    res = solve_halfspace_qp(HalfspaceQP(u_des, hd.act + a_corr, -alpha(h) - hd.drift - b_corr))
    return FilterResult(saturate(res.u), res.active, res.infeasible_fallback)


def cbf_qp_controller(bf: BarrierFunction, alpha: ClassKFunction, nom_p, gains: PDGains, x) -> FilterResult:
    """Nearest input to the PD command satisfying the nominal barrier condition."""
    return _filter(bf, alpha, nom_p, gains, x)


def lcbf_qp_controller(bf: BarrierFunction, alpha: ClassKFunction, nom_p, gains: PDGains, est, x) -> FilterResult:
    """Same filter with the learned corrections a_hat(x) u + b_hat(x) added to the constraint."""
    a_corr, b_corr = est.corrections(x)
    return _filter(bf, alpha, nom_p, gains, x, a_corr, b_corr)


class CBFQP:
    """Callable ``x -> FilterResult`` wrapping :func:`cbf_qp_controller`."""

    def __init__(self, bf, alpha, nom_p, gains):
        self.bf, self.alpha, self.nom_p, self.gains = bf, alpha, nom_p, gains

    def __call__(self, x) -> FilterResult:
        return _filter(self.bf, self.alpha, self.nom_p, self.gains, x)


class LCBFQP(CBFQP):
    """Callable wrapping :func:`lcbf_qp_controller` with a frozen estimator."""

    def __init__(self, bf, alpha, nom_p, gains, estimator):
        super().__init__(bf, alpha, nom_p, gains)
        self.estimator = estimator

    def __call__(self, x) -> FilterResult:
        a_corr, b_corr = self.estimator.corrections(x)
        return _filter(self.bf, self.alpha, self.nom_p, self.gains, x, a_corr, b_corr)


def _unpack(out):
    if isinstance(out, FilterResult):
        return out
    return FilterResult(float(out), False, False)


class Blend:
    """x -> sat((1 - w) k0(x) + w k_aug(x))."""

    def __init__(self, k0: Callable, k_aug: Callable, w: float):
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"blend weight must lie in [0, 1], got {w!r}")
        self.k0, self.k_aug, self.w = k0, k_aug, float(w)

    def __call__(self, x) -> FilterResult:
        # skip the unused branch so w = 0 / w = 1 reproduce k0 / k_aug bit-exactly
        if self.w == 0.0:
            return _unpack(self.k0(x))
        if self.w == 1.0:
            r = _unpack(self.k_aug(x))
            return FilterResult(saturate(r.u), r.active, r.infeasible_fallback)
        r0 = _unpack(self.k0(x))
        r1 = _unpack(self.k_aug(x))
        u = (1.0 - self.w) * r0.u + self.w * r1.u
        return FilterResult(
            saturate(u), r0.active or r1.active, r0.infeasible_fallback or r1.infeasible_fallback
        )


def blend(k0: Callable, k_aug: Callable, w: float) -> Blend:
    return Blend(k0, k_aug, w)


def controller_inputs(controller: Callable, states) -> np.ndarray:
    """Evaluate a controller at each row of ``states``; returns the inputs."""
    return np.array([_unpack(controller(x)).u for x in np.asarray(states, dtype=float)])
