"""Numpy versions of the compiled steps; same signatures and arithmetic order."""

import numpy as np


def _transport(g, a, dt, dx, left_in, right_in):
    nu = (a * dt / dx)[:, None]
    pos = a > 0
    neg = a < 0
    if pos.any():
        gp = g[pos]
        up = np.concatenate([left_in[pos, None], gp[:, :-1]], axis=1)
        g[pos] = gp - nu[pos] * (gp - up)
    if neg.any():
        gn = g[neg]
        dn = np.concatenate([gn[:, 1:], right_in[neg, None]], axis=1)
        g[neg] = gn - nu[neg] * (dn - gn)


def _density(g, q, rho):
    rho[:] = q @ g


def kinetic_step(g, a, M, q, r, dt, dx, left_in, right_in, rho, duhamel):
    _transport(g, a, dt, dx, left_in, right_in)
    _density(g, q, rho)
    if duhamel:
        loss = 1.0 + r * rho
        decay = np.exp(-loss * dt)
        gain = (1.0 + r) * M[:, None] * rho[None, :] / loss
        g[:] = g * decay + gain * (1.0 - decay)
    else:
        g += dt * ((1.0 + r) * M[:, None] * rho[None, :] - (1.0 + r * rho[None, :]) * g)


def linear_step(u, a, loss, gain, q, dt, dx, inflow, rho):
    _transport(u, a, dt, dx, inflow, inflow)
    _density(u, q, rho)
    u += dt * (gain * rho[None, :] - loss[None, :] * u)
