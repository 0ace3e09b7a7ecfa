# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 loops for the self-shrinking plane-curve integrators.

Semantics match ``_pyloop`` exactly (same operation order), so the two
backends agree to the last bit on identical inputs.
"""

from libc.math cimport sqrt


def shoot_loop(double gx, double gy, double tx, double ty,
               double ds, Py_ssize_t n_steps, double[:, ::1] out):
    """Integrate gamma' = T, T' = kappa*N with kappa = -<gamma, N>,
    N = rot90(T); the tangent is renormalized after every step.

    ``out`` must have shape (n_steps + 1, 6); columns are
    (gx, gy, tx, ty, kappa, phi) with phi the accumulated tangent angle.
    """
    cdef double phi = 0.0
    cdef double k1gx, k1gy, k1tx, k1ty, k1phi
    cdef double k2gx, k2gy, k2tx, k2ty, k2phi
    cdef double k3gx, k3gy, k3tx, k3ty, k3phi
    cdef double k4gx, k4gy, k4tx, k4ty, k4phi
    cdef double ax, ay, bx, by, kappa, norm
    cdef Py_ssize_t i

    kappa = gx * ty - gy * tx
    out[0, 0] = gx; out[0, 1] = gy; out[0, 2] = tx; out[0, 3] = ty
    out[0, 4] = kappa; out[0, 5] = phi

    for i in range(n_steps):
        kappa = gx * ty - gy * tx
        k1gx = tx; k1gy = ty
        k1tx = -kappa * ty; k1ty = kappa * tx
        k1phi = kappa

        ax = gx + 0.5 * ds * k1gx; ay = gy + 0.5 * ds * k1gy
        bx = tx + 0.5 * ds * k1tx; by = ty + 0.5 * ds * k1ty
        kappa = ax * by - ay * bx
        k2gx = bx; k2gy = by
        k2tx = -kappa * by; k2ty = kappa * bx
        k2phi = kappa

        ax = gx + 0.5 * ds * k2gx; ay = gy + 0.5 * ds * k2gy
        bx = tx + 0.5 * ds * k2tx; by = ty + 0.5 * ds * k2ty
        kappa = ax * by - ay * bx
        k3gx = bx; k3gy = by
        k3tx = -kappa * by; k3ty = kappa * bx
        k3phi = kappa

        ax = gx + ds * k3gx; ay = gy + ds * k3gy
        bx = tx + ds * k3tx; by = ty + ds * k3ty
        kappa = ax * by - ay * bx
        k4gx = bx; k4gy = by
        k4tx = -kappa * by; k4ty = kappa * bx
        k4phi = kappa

        gx = gx + ds * (k1gx + 2.0 * k2gx + 2.0 * k3gx + k4gx) / 6.0
        gy = gy + ds * (k1gy + 2.0 * k2gy + 2.0 * k3gy + k4gy) / 6.0
        tx = tx + ds * (k1tx + 2.0 * k2tx + 2.0 * k3tx + k4tx) / 6.0
        ty = ty + ds * (k1ty + 2.0 * k2ty + 2.0 * k3ty + k4ty) / 6.0
        phi = phi + ds * (k1phi + 2.0 * k2phi + 2.0 * k3phi + k4phi) / 6.0

        norm = sqrt(tx * tx + ty * ty)
        tx = tx / norm
        ty = ty / norm

        kappa = gx * ty - gy * tx
        out[i + 1, 0] = gx; out[i + 1, 1] = gy
        out[i + 1, 2] = tx; out[i + 1, 3] = ty
        out[i + 1, 4] = kappa; out[i + 1, 5] = phi
    return n_steps


def intrinsic_loop(double kappa, double kappa_s, double ds,
                   Py_ssize_t n_steps, double kappa_min,
                   double[:, ::1] out):
    """Integrate the curvature ODE kappa'' = kappa_s^2/kappa + kappa - kappa^3.

    ``out`` must have shape (n_steps + 1, 2); columns (kappa, kappa_s).
    Returns the number of completed steps (fewer than n_steps iff kappa
    dropped to ``kappa_min`` or below, where the ODE is singular).
    """
    cdef double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b
    cdef double a, b
    cdef Py_ssize_t i

    out[0, 0] = kappa; out[0, 1] = kappa_s
    for i in range(n_steps):
        if kappa <= kappa_min:
            return i
        k1a = kappa_s
        k1b = kappa_s * kappa_s / kappa + kappa - kappa ** 3

        a = kappa + 0.5 * ds * k1a; b = kappa_s + 0.5 * ds * k1b
        if a <= kappa_min:
            return i
        k2a = b
        k2b = b * b / a + a - a ** 3

        a = kappa + 0.5 * ds * k2a; b = kappa_s + 0.5 * ds * k2b
        if a <= kappa_min:
            return i
        k3a = b
        k3b = b * b / a + a - a ** 3

        a = kappa + ds * k3a; b = kappa_s + ds * k3b
        if a <= kappa_min:
            return i
        k4a = b
        k4b = b * b / a + a - a ** 3

        kappa = kappa + ds * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
        kappa_s = kappa_s + ds * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0
        out[i + 1, 0] = kappa; out[i + 1, 1] = kappa_s
    return n_steps
