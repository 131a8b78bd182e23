"""Monomial moments over the intersection of a box with the unit ball.

ball_box_moments(lo, hi, D) returns all integrals of z^alpha (per-axis powers
up to D) over [lo, hi] ∩ B(0, 1).  The integrands are polynomials, so after
slicing the region along the lines where the y2(y1) limits change character
the even-in-rho part integrates exactly by Gauss and the odd part becomes a
trigonometric polynomial under y1 = sin t, which Gauss resolves to machine
precision.  Callers normalize general balls B(x, delta) to this form.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .mollifier import bump_ball_moment


@lru_cache(maxsize=None)
def _leggauss(g: int):
    return np.polynomial.legendre.leggauss(g)


def _gl_nodes(a: float, b: float, g: int):
    x, w = _leggauss(g)
    return a + 0.5 * (b - a) * (x + 1.0), 0.5 * (b - a) * w


@lru_cache(maxsize=None)
def unit_ball_moments(n: int, D: int) -> np.ndarray:
    """Rectangular table of integrals of z^alpha over the full unit ball."""
    M = np.zeros((D + 1,) * n)
    for alpha in np.ndindex(*M.shape):
        if all(a % 2 == 0 for a in alpha):
            M[alpha] = bump_ball_moment(n, 0, tuple(a // 2 for a in alpha))
    return M


def _box_moments(lo, hi, D: int) -> np.ndarray:
    axes = [
        np.array([(b ** (k + 1) - a ** (k + 1)) / (k + 1) for k in range(D + 1)])
        for a, b in zip(lo, hi)
    ]
    M = axes[0]
    for ax in axes[1:]:
        M = np.multiply.outer(M, ax)
    return M


def ball_box_moments(lo, hi, D: int) -> np.ndarray:
    """Moments of z^alpha over [lo, hi] ∩ B(0, 1); shape (D+1,)*n."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    if np.any(lo >= hi):
        return np.zeros((D + 1,) * n)
    gap = np.maximum(lo, 0.0) + np.maximum(-hi, 0.0)
    if float(gap @ gap) >= 1.0:
        return np.zeros((D + 1,) * n)  # box and ball disjoint
    if np.all(lo <= -1.0) and np.all(hi >= 1.0):
        return unit_ball_moments(n, D).copy()
    if float(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2)) <= 1.0:
        return _box_moments(lo, hi, D)  # box entirely inside the ball
    if n == 1:
        a, b = max(lo[0], -1.0), min(hi[0], 1.0)
        return _box_moments([a], [b], D)
    if n == 2:
        return _moments_2d(lo, hi, D)
    if n == 3:
        return _moments_3d(lo, hi, D)
    raise NotImplementedError("ball_box_moments supports n <= 3")


def _moments_2d(lo, hi, D: int) -> np.ndarray:
    A, B = max(lo[0], -1.0), min(hi[0], 1.0)
    M = np.zeros((D + 1, D + 1))
    if A >= B:
        return M
    bps = {A, B}
    for v in (lo[1], hi[1]):
        if abs(v) < 1.0:
            w = math.sqrt(1.0 - v * v)
            for t in (-w, w):
                if A < t < B:
                    bps.add(t)
    bps = sorted(bps)
    gE = D + 3
    gO = max(24, D + 8)
    t0s, t1s, arcU, arcL = [], [], [], []
    for t0, t1 in zip(bps[:-1], bps[1:]):
        tm = 0.5 * (t0 + t1)
        rho_m = math.sqrt(max(1.0 - tm * tm, 0.0))
        if min(hi[1], rho_m) <= max(lo[1], -rho_m):
            continue
        t0s.append(t0)
        t1s.append(t1)
        arcU.append(rho_m < hi[1])
        arcL.append(-rho_m > lo[1])
    if not t0s:
        return M
    t0s = np.array(t0s)
    t1s = np.array(t1s)
    arcU = np.array(arcU)
    arcL = np.array(arcL)
    # even-in-rho part: polynomial in y1, exact Gauss, all pieces batched
    xe, we = _leggauss(gE)
    y = (t0s[:, None] + 0.5 * (t1s - t0s)[:, None] * (xe + 1.0)).ravel()
    w = (0.5 * (t1s - t0s)[:, None] * we).ravel()
    aU = np.repeat(arcU, gE)
    aL = np.repeat(arcL, gE)
    rho = np.sqrt(np.maximum(1.0 - y * y, 0.0))
    E = 0.5 * (_flayers_masked(rho, aU, aL, hi[1], lo[1], D)
               + _flayers_masked(-rho, aU, aL, hi[1], lo[1], D))
    P = np.vander(y, D + 1, increasing=True)
    M += (P * w[:, None]).T @ E
    # odd part: y1 = sin t turns it into a trigonometric polynomial
    sel = arcU | arcL
    if np.any(sel):
        ta = np.arcsin(np.clip(t0s[sel], -1.0, 1.0))
        tb = np.arcsin(np.clip(t1s[sel], -1.0, 1.0))
        xo, wo = _leggauss(gO)
        t = (ta[:, None] + 0.5 * (tb - ta)[:, None] * (xo + 1.0)).ravel()
        wt = (0.5 * (tb - ta)[:, None] * wo).ravel()
        aU = np.repeat(arcU[sel], gO)
        aL = np.repeat(arcL[sel], gO)
        y = np.sin(t)
        rho = np.cos(t)
        O = 0.5 * (_flayers_masked(rho, aU, aL, hi[1], lo[1], D)
                   - _flayers_masked(-rho, aU, aL, hi[1], lo[1], D))
        P = np.vander(y, D + 1, increasing=True)
        M += (P * (wt * rho)[:, None]).T @ O
    return M


def _flayers_masked(rho, arcU, arcL, hi2, lo2, D):
    u = np.where(arcU, rho, hi2)
    l = np.where(arcL, -rho, lo2)
    pu = np.vander(u, D + 2, increasing=True)
    pl = np.vander(l, D + 2, increasing=True)
    return (pu[:, 1:] - pl[:, 1:]) / np.arange(1, D + 2)


def _f_layers(rho, hi2, lo2, up_arc, low_arc, qv):
    """F[q] = (u^(q+1) - l^(q+1)) / (q+1) with u = hi2 or rho, l = lo2 or -rho."""
    rho = np.atleast_1d(rho)
    u = rho if up_arc else np.full_like(rho, hi2)
    l = -rho if low_arc else np.full_like(rho, lo2)
    D1 = qv.shape[0] + 1
    pu = np.vander(u, D1, increasing=True)  # powers 0..D via repeated multiply
    pl = np.vander(l, D1, increasing=True)
    return (pu[:, 1:] - pl[:, 1:]) / (qv + 1)


def _moments_3d(lo, hi, D: int) -> np.ndarray:
    A, B = max(lo[0], -1.0), min(hi[0], 1.0)
    M = np.zeros((D + 1, D + 1, D + 1))
    if A >= B:
        return M
    crit = set()
    for v in (lo[1], hi[1], lo[2], hi[2]):
        crit.add(abs(v))
    for v2 in (lo[1], hi[1]):
        for v3 in (lo[2], hi[2]):
            crit.add(math.hypot(v2, v3))
    bps = {A, B}
    for rc in crit:
        if rc < 1.0:
            t = math.sqrt(1.0 - rc * rc)
            for s in (-t, t):
                if A < s < B:
                    bps.add(s)
    if A < 0.0 < B:
        bps.add(0.0)
    bps = sorted(bps)
    gr = 16
    powsum = np.add.outer(np.arange(D + 1), np.arange(D + 1)).astype(float) + 2.0
    for t0, t1 in zip(bps[:-1], bps[1:]):
        tmid = 0.5 * (t0 + t1)
        for (a, b) in ((t0, tmid), (tmid, t1)):
            # sqrt-regularize the outer endpoint of each half: t = e + (m-e) v^2
            e, m0 = (a, b) if a != tmid else (b, a)
            v, wv = _gl_nodes(0.0, 1.0, gr)
            y1 = e + (m0 - e) * v ** 2
            wy = 2.0 * (m0 - e) * v * wv
            if m0 < e:
                wy = -wy
            for yi, wi in zip(y1, wy):
                rho2 = 1.0 - yi * yi
                if rho2 <= 0.0:
                    continue
                rho = math.sqrt(rho2)
                M2 = ball_box_moments(
                    np.array([lo[1] / rho, lo[2] / rho]),
                    np.array([hi[1] / rho, hi[2] / rho]),
                    D,
                )
                scale = rho ** powsum
                contrib = wi * (M2 * scale)
                y1pow = yi ** np.arange(D + 1)
                M += y1pow[:, None, None] * contrib[None, :, :]
    return M
