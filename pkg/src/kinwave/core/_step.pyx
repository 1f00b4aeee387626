# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled upwind-plus-reaction steps on a (velocity, space) grid."""

from libc.math cimport exp


cdef inline void _transport(double[:, ::1] g, const double[::1] a, double dt, double dx,
                            const double[::1] left_in, const double[::1] right_in) noexcept nogil:
    cdef Py_ssize_t nv = g.shape[0], nx = g.shape[1], i, j
    cdef double nu, prev, cur
    for j in range(nv):
        nu = a[j] * dt / dx
        if nu > 0:
            prev = left_in[j]
            for i in range(nx):
                cur = g[j, i]
                g[j, i] = cur - nu * (cur - prev)
                prev = cur
        elif nu < 0:
            prev = right_in[j]
            for i in range(nx - 1, -1, -1):
                cur = g[j, i]
                g[j, i] = cur - nu * (prev - cur)
                prev = cur


cdef inline void _density(double[:, ::1] g, const double[::1] q, double[::1] rho) noexcept nogil:
    cdef Py_ssize_t nv = g.shape[0], nx = g.shape[1], i, j
    cdef double w
    for i in range(nx):
        rho[i] = 0.0
    for j in range(nv):
        w = q[j]
        for i in range(nx):
            rho[i] += w * g[j, i]


def kinetic_step(double[:, ::1] g, const double[::1] a, const double[::1] M, const double[::1] q,
                 double r, double dt, double dx, const double[::1] left_in,
                 const double[::1] right_in, double[::1] rho, bint duhamel):
    """Transport then reaction, in place.  ``rho`` receives the post-transport density."""
    cdef Py_ssize_t nv = g.shape[0], nx = g.shape[1], i, j
    cdef double loss, decay, gain
    with nogil:
        _transport(g, a, dt, dx, left_in, right_in)
        _density(g, q, rho)
        if duhamel:
            for j in range(nv):
                for i in range(nx):
                    loss = 1.0 + r * rho[i]
                    decay = exp(-loss * dt)
                    gain = (1.0 + r) * M[j] * rho[i] / loss
                    g[j, i] = g[j, i] * decay + gain * (1.0 - decay)
        else:
            for j in range(nv):
                for i in range(nx):
                    g[j, i] += dt * ((1.0 + r) * M[j] * rho[i] - (1.0 + r * rho[i]) * g[j, i])


def linear_step(double[:, ::1] u, const double[::1] a, const double[::1] loss,
                const double[:, ::1] gain, const double[::1] q, double dt, double dx,
                const double[::1] inflow, double[::1] rho):
    """Frozen-coefficient linear step ``u += dt (gain * rho_u - loss * u)`` after transport."""
    cdef Py_ssize_t nv = u.shape[0], nx = u.shape[1], i, j
    with nogil:
        _transport(u, a, dt, dx, inflow, inflow)
        _density(u, q, rho)
        for j in range(nv):
            for i in range(nx):
                u[j, i] += dt * (gain[j, i] * rho[i] - loss[i] * u[j, i])
