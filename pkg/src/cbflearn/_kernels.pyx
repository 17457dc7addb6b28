# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled plant kernels; see ``_kernels_py.py`` for the reference version."""

from libc.math cimport sin, cos, isfinite


cdef inline void _deriv(double M, double m, double L, double J, double R,
                        double km, double bt, double bx, double g,
                        double x_vel, double theta, double theta_dot, double u,
                        double* out) noexcept nogil:
    cdef double s = sin(theta)
    cdef double c = cos(theta)
    cdef double tau = km * u - bt * (theta_dot - x_vel / R)
    cdef double a11 = M + m
    cdef double a12 = m * L * c
    cdef double a22 = J + m * L * L
    cdef double r1 = m * L * s * theta_dot * theta_dot - bx * x_vel - tau / R
    cdef double r2 = m * g * L * s + tau
    cdef double det = a11 * a22 - a12 * a12
    out[0] = x_vel
    out[1] = (a22 * r1 - a12 * r2) / det
    out[2] = theta_dot
    out[3] = (a11 * r2 - a12 * r1) / det


def segway_deriv(tuple p, double x_vel, double theta, double theta_dot, double u):
    cdef double out[4]
    _deriv(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8],
           x_vel, theta, theta_dot, u, out)
    return (out[0], out[1], out[2], out[3])


def rk4_hold(tuple p, x, double u, double dt, int substeps):
    cdef double M = p[0], m = p[1], L = p[2], J = p[3], R = p[4]
    cdef double km = p[5], bt = p[6], bx = p[7], g = p[8]
    cdef double x0 = x[0], x1 = x[1], x2 = x[2], x3 = x[3]
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef int i
    with nogil:
        for i in range(substeps):
            _deriv(M, m, L, J, R, km, bt, bx, g, x1, x2, x3, u, k1)
            _deriv(M, m, L, J, R, km, bt, bx, g,
                   x1 + h2 * k1[1], x2 + h2 * k1[2], x3 + h2 * k1[3], u, k2)
            _deriv(M, m, L, J, R, km, bt, bx, g,
                   x1 + h2 * k2[1], x2 + h2 * k2[2], x3 + h2 * k2[3], u, k3)
            _deriv(M, m, L, J, R, km, bt, bx, g,
                   x1 + dt * k3[1], x2 + dt * k3[2], x3 + dt * k3[3], u, k4)
            x0 = x0 + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            x1 = x1 + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            x2 = x2 + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            x3 = x3 + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            if not (isfinite(x0) and isfinite(x1) and isfinite(x2) and isfinite(x3)):
                break
    return (x0, x1, x2, x3)
