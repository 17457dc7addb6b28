"""Barrier functions on pitch and pitch rate, class-K gains, and the nominal
barrier derivative split into drift and actuation parts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .dynamics import THETA, THETA_DOT, SegwayParams


def h_pitch_ellipse(x, theta_max: float, theta_e: float, c: float):
    """0.5 * (theta_max^2 - (theta - theta_e)^2 - c * theta_dot^2); works on stacked states."""
    x = np.asarray(x, dtype=float)
    d = x[..., THETA] - theta_e
    return 0.5 * (theta_max * theta_max - d * d - c * x[..., THETA_DOT] ** 2)


def h_pitch_rate(x, c: float):
    """0.5 * (1 - c * theta_dot^2)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 - c * x[..., THETA_DOT] ** 2)


class BarrierFunction:
    """Safe set {x : h(x) >= 0} with an analytic gradient."""

    kind = ""

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class PitchEllipseBarrier(BarrierFunction):
    theta_max: float = 0.3
    theta_e: float = 0.0
    c: float = 0.1

    kind = "pitch_ellipse"

    def __post_init__(self):
        if not self.theta_max > 0:
            raise ValueError(f"theta_max must be positive, got {self.theta_max!r}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c!r}")

    def value(self, x):
        return h_pitch_ellipse(x, self.theta_max, self.theta_e, self.c)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grad = np.zeros_like(x)
        grad[..., THETA] = -(x[..., THETA] - self.theta_e)
        grad[..., THETA_DOT] = -self.c * x[..., THETA_DOT]
        return grad

    def semi_axes(self) -> tuple[float, float]:
        """Zero level set semi-axes along theta and theta_dot."""
        return self.theta_max, self.theta_max / math.sqrt(self.c)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "theta_max": self.theta_max, "theta_e": self.theta_e, "c": self.c}


@dataclass(frozen=True)
class PitchRateBarrier(BarrierFunction):
    c: float = 0.25
    theta_e: float = 0.0  # not part of h; only centers the blow-up guard

    kind = "pitch_rate"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c!r}")

    def value(self, x):
        return h_pitch_rate(x, self.c)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grad = np.zeros_like(x)
        grad[..., THETA_DOT] = -self.c * x[..., THETA_DOT]
        return grad

    def rate_limit(self) -> float:
        return 1.0 / math.sqrt(self.c)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "c": self.c, "theta_e": self.theta_e}


def make_barrier(kind: str, **params) -> BarrierFunction:
    if kind == PitchEllipseBarrier.kind:
        return PitchEllipseBarrier(**params)
    if kind == PitchRateBarrier.kind:
        return PitchRateBarrier(**params)
    raise ValueError(f"unknown barrier kind {kind!r}")


def grad_h(bf: BarrierFunction, x) -> np.ndarray:
    return bf.gradient(x)


@dataclass(frozen=True)
class ClassKFunction:
    """Linear extended class-K function alpha(r) = gamma * r."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")

    def __call__(self, r):
        return self.gamma * r


def alpha_eval(k: ClassKFunction, r):
    return k(r)


class HdotAffine(NamedTuple):
    drift: float
    act: float

    def __call__(self, u: float) -> float:
        return self.drift + self.act * u


def hdot_nominal_affine(bf: BarrierFunction, nom_p, x) -> HdotAffine:
    """Split dh/dx (f_hat + g_hat u) into ``drift + act * u``.

    ``nom_p`` is normally a :class:`SegwayParams`; any callable ``(x, u) -> xdot``
    that is affine in ``u`` also works.
    """
    x = np.asarray(x, dtype=float)
    grad = bf.gradient(x)
    if isinstance(nom_p, SegwayParams):
        v, th, om = float(x[1]), float(x[2]), float(x[3])
        f0 = kernels.segway_deriv(nom_p.packed, v, th, om, 0.0)
        f1 = kernels.segway_deriv(nom_p.packed, v, th, om, 1.0)
    else:
        f0 = nom_p(x, 0.0)
        f1 = nom_p(x, 1.0)
    drift = 0.0
    act = 0.0
    for i in range(4):
        drift += grad[i] * f0[i]
        act += grad[i] * (f1[i] - f0[i])
    return HdotAffine(float(drift), float(act))
