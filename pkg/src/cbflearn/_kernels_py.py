"""Pure-Python plant kernels.

Mirrors ``_kernels.pyx`` operation for operation so both backends produce the
same floating-point results. The parameter tuple layout is

    (cart_mass, pendulum_mass, com_offset, pendulum_inertia, wheel_radius,
     torque_constant, back_emf, ground_friction, gravity)
"""

from math import cos, isfinite, isinf, nan, sin


def segway_deriv(p, x_vel, theta, theta_dot, u):
    M, m, L, J, R, km, bt, bx, g = p
    if isinf(theta):
        # math.sin raises on inf where C returns nan; match the compiled kernel
        return (x_vel, nan, theta_dot, nan)
    s = sin(theta)
    c = cos(theta)
    # motor torque acts +tau on the body and -tau on the wheel
    tau = km * u - bt * (theta_dot - x_vel / R)
    a11 = M + m
    a12 = m * L * c
    a22 = J + m * L * L
    r1 = m * L * s * theta_dot * theta_dot - bx * x_vel - tau / R
    r2 = m * g * L * s + tau
    det = a11 * a22 - a12 * a12
    x_acc = (a22 * r1 - a12 * r2) / det
    theta_acc = (a11 * r2 - a12 * r1) / det
    return (x_vel, x_acc, theta_dot, theta_acc)


def rk4_hold(p, x, u, dt, substeps):
    """Integrate ``substeps`` RK4 steps of size ``dt`` with ``u`` held constant.

    Returns the new state as a 4-tuple. Non-finite values are returned as-is;
    callers decide how to report them.
    """
    x0, x1, x2, x3 = x[0], x[1], x[2], x[3]
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for _ in range(substeps):
        k1 = segway_deriv(p, x1, x2, x3, u)
        k2 = segway_deriv(p, x1 + h2 * k1[1], x2 + h2 * k1[2], x3 + h2 * k1[3], u)
        k3 = segway_deriv(p, x1 + h2 * k2[1], x2 + h2 * k2[2], x3 + h2 * k2[3], u)
        k4 = segway_deriv(p, x1 + dt * k3[1], x2 + dt * k3[2], x3 + dt * k3[3], u)
        x0 = x0 + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        x1 = x1 + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        x2 = x2 + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        x3 = x3 + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        if not (isfinite(x0) and isfinite(x1) and isfinite(x2) and isfinite(x3)):
            break
    return (x0, x1, x2, x3)
