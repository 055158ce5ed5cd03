"""Closed-form benchmark solution on the unit square.

u is the vector curl of sin^2(pi x) sin^2(pi y); the pressure carries the
factor exp(-(x-0.3)^-2 - (y-0.064)^-2), extended by its limit 0 on the two
lines where the exponent blows up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

PI = math.pi
P_SCALE = 1e6
X0 = 0.3
Y0 = 32 / 500


def velocity(x, y):
    sx, sy = np.sin(PI * x), np.sin(PI * y)
    return (sx**2 * sy * np.cos(PI * y), -sy**2 * sx * np.cos(PI * x))


def velocity_gradient(x, y):
    """Array [..., c, d] = d u_c / d x_d."""
    s2 = 0.5 * PI * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    g = np.empty(np.broadcast(x, y).shape + (2, 2))
    g[..., 0, 0] = s2
    g[..., 0, 1] = PI * np.sin(PI * x) ** 2 * np.cos(2 * PI * y)
    g[..., 1, 0] = -PI * np.sin(PI * y) ** 2 * np.cos(2 * PI * x)
    g[..., 1, 1] = -s2
    return g


def minus_laplacian(x, y):
    return (PI**2 * (1 - 2 * np.cos(2 * PI * x)) * np.sin(2 * PI * y),
            PI**2 * (2 * np.cos(2 * PI * y) - 1) * np.sin(2 * PI * x))


def _inv_square(t):
    """1/t^2 with +inf at t == 0 (no warnings)."""
    t2 = np.asarray(t, dtype=float) ** 2
    out = np.full(t2.shape, np.inf)
    np.divide(1.0, t2, out=out, where=t2 > 0)
    return out


def _bump_1d(t):
    """exp(-1/t^2) with value 0 at t = 0."""
    return np.exp(-_inv_square(t))


@lru_cache(maxsize=None)
def pressure_shift() -> float:
    """Constant making the pressure mean-zero on (0,1)^2 (separable integral)."""
    ix, _ = quad(lambda s: float(_bump_1d(s - X0)), 0.0, 1.0, points=[X0],
                 epsabs=1e-15, epsrel=1e-14, limit=200)
    iy, _ = quad(lambda s: float(_bump_1d(s - Y0)), 0.0, 1.0, points=[Y0],
                 epsabs=1e-15, epsrel=1e-14, limit=200)
    return -P_SCALE * ix * iy


def pressure(x, y):
    return P_SCALE * _bump_1d(x - X0) * _bump_1d(y - Y0) + pressure_shift()


def pressure_gradient(x, y):
    """grad of the pressure, evaluated in log space to stay finite near the lines."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx, dy = x - X0, y - Y0
    expo = -_inv_square(dx) - _inv_square(dy)
    gx = np.zeros(np.broadcast(dx, dy).shape)
    gy = np.zeros_like(gx)
    ok = np.isfinite(expo)
    ax = np.abs(np.broadcast_to(dx, gx.shape)[ok])
    ay = np.abs(np.broadcast_to(dy, gx.shape)[ok])
    e = expo[ok]
    sx = np.sign(np.broadcast_to(dx, gx.shape)[ok])
    sy = np.sign(np.broadcast_to(dy, gx.shape)[ok])
    gx[ok] = sx * np.exp(e + math.log(2 * P_SCALE) - 3 * np.log(ax))
    gy[ok] = sy * np.exp(e + math.log(2 * P_SCALE) - 3 * np.log(ay))
    return gx, gy


def force(x, y):
    lx, ly = minus_laplacian(x, y)
    gx, gy = pressure_gradient(x, y)
    return lx + gx, ly + gy


@dataclass(frozen=True)
class ManufacturedSolution:
    u: object
    grad_u: object
    p: object
    f: object


def manufactured_solution() -> ManufacturedSolution:
    return ManufacturedSolution(velocity, velocity_gradient, pressure, force)
