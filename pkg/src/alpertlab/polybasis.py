"""Total-degree polynomial bases on boxes, exact moments, tensor Gauss rules.

Polynomials are stored as dense coefficient vectors over the graded-lex
monomial list {u^alpha : |alpha| < kappa}, in coordinates u = (x - c) / w
centered at the box center and scaled by the per-axis widths.  All moment
integrals have closed forms, so Gram matrices and orthonormalizations are
exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(n: int, kappa: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with |alpha| < kappa in graded lexicographic order."""
    if n < 1 or kappa < 1:
        raise ValueError("need n >= 1 and kappa >= 1")
    out = []
    for total in range(kappa):
        out.extend(_compositions(n, total))
    return tuple(out)


def _compositions(n: int, total: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend((first,) + rest for rest in _compositions(n - 1, total - first))
    return out


def basis_dimension(n: int, kappa: int) -> int:
    """d = C(n + kappa - 1, n), the dimension of degree-<kappa polynomials."""
    return math.comb(n + kappa - 1, n)


def _interval_moment(k: int, a: float, b: float, c: float) -> float:
    # exact integral of (t - c)^k over [a, b]
    return ((b - c) ** (k + 1) - (a - c) ** (k + 1)) / (k + 1)


def box_monomial_moment(alpha, lo, hi, center=None) -> float:
    """Exact integral over the box of prod_i (x_i - c_i)^alpha_i."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c = 0.5 * (lo + hi) if center is None else np.asarray(center, dtype=float)
    val = 1.0
    for k, a, b, ci in zip(alpha, lo, hi, c):
        val *= _interval_moment(int(k), float(a), float(b), float(ci))
    return val


@lru_cache(maxsize=None)
def _unit_interval_moments(max_order: int) -> tuple[float, ...]:
    # integral of u^k over [-1/2, 1/2]: 0 for odd k, (1/2)^k / (k+1) for even k
    return tuple(0.0 if k % 2 else 0.5 ** k / (k + 1) for k in range(max_order + 1))


def unit_gram(n: int, kappa: int) -> np.ndarray:
    """Gram matrix of the monomials u^alpha on [-1/2, 1/2]^n, exact."""
    idx = multi_indices(n, kappa)
    mom = _unit_interval_moments(2 * kappa)
    d = len(idx)
    G = np.empty((d, d))
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            v = 1.0
            for ai, bi in zip(a, b):
                v *= mom[ai + bi]
            G[i, j] = v
    return G


@lru_cache(maxsize=None)
def orthonormal_coeffs(n: int, kappa: int) -> np.ndarray:
    """Rows are coefficient vectors of the L2([-1/2,1/2]^n)-orthonormal basis.

    Cholesky of the exact Gram, with one refinement pass to push the Gram
    identity to machine precision for the larger kappa.
    """
    G = unit_gram(n, kappa)
    L = np.linalg.cholesky(G)
    C = np.linalg.inv(L)
    G2 = C @ G @ C.T
    L2 = np.linalg.cholesky(G2)
    C = np.linalg.inv(L2) @ C
    return C


@dataclass(frozen=True)
class PolynomialRep:
    """Polynomial sum_a coeffs[a] * prod_i ((x_i - center_i)/scale_i)^alpha_i."""

    coeffs: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    kappa: int

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def eval(self, x) -> float:
        return float(self.eval_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def eval_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = (X - self.center) / self.scale
        mono = monomials_many(U, multi_indices(self.dim, self.kappa))
        return mono @ self.coeffs


def monomials_many(U: np.ndarray, idx) -> np.ndarray:
    """Monomial values U^alpha for each row of U and each alpha; shape (N, d)."""
    N, n = U.shape
    kmax = max((max(a) for a in idx), default=0)
    pows = np.ones((n, kmax + 1, N))
    for i in range(n):
        for k in range(1, kmax + 1):
            pows[i, k] = pows[i, k - 1] * U[:, i]
    out = np.empty((N, len(idx)))
    for j, a in enumerate(idx):
        v = pows[0, a[0]]
        for i in range(1, n):
            v = v * pows[i, a[i]]
        out[:, j] = v
    return out


def orthonormal_poly_basis(lo, hi, kappa: int) -> list[PolynomialRep]:
    """L2(box)-orthonormal basis of polynomials of total degree < kappa."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    C = orthonormal_coeffs(n, kappa)
    vol = float(np.prod(hi - lo))
    center = 0.5 * (lo + hi)
    scale = hi - lo
    return [
        PolynomialRep(C[i] / math.sqrt(vol), center, scale, kappa)
        for i in range(C.shape[0])
    ]


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on a box; exact per-axis degree <= 2g - 1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@lru_cache(maxsize=None)
def _leggauss(g: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(g)
    return x, w


def gauss_rule(g: int, lo, hi) -> QuadratureRule:
    """g-point-per-axis tensor Gauss rule mapped to the box [lo, hi]."""
    if g < 1:
        raise ValueError("need g >= 1")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    x, w = _leggauss(g)
    axes_pts = [lo[i] + 0.5 * (hi[i] - lo[i]) * (x + 1.0) for i in range(n)]
    axes_wts = [0.5 * (hi[i] - lo[i]) * w for i in range(n)]
    grids = np.meshgrid(*axes_pts, indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    wts = axes_wts[0]
    for i in range(1, n):
        wts = np.multiply.outer(wts, axes_wts[i]).ravel()
    return QuadratureRule(pts, np.asarray(wts, dtype=float).ravel())


def ball_rule(n: int, deg: int, center, radius: float) -> QuadratureRule:
    """Quadrature over the ball B(center, radius), exact for polynomials <= deg.

    Product form: Gauss in the radius (weight r^(n-1)) and, for n >= 2, an
    angular rule exact on the corresponding trigonometric/spherical degree.
    """
    center = np.asarray(center, dtype=float)
    gr = deg // 2 + 2
    xr, wr = _leggauss(gr)
    r = 0.5 * radius * (xr + 1.0)
    wr = 0.5 * radius * wr * r ** (n - 1)
    if n == 1:
        pts = np.concatenate([center[0] - r, center[0] + r])[:, None]
        wts = np.concatenate([wr, wr])
        return QuadratureRule(pts, wts)
    if n == 2:
        nt = deg + 2
        theta = 2.0 * np.pi * np.arange(nt) / nt
        wt = np.full(nt, 2.0 * np.pi / nt)
        pr, pt = np.meshgrid(r, theta, indexing="ij")
        pts = np.stack(
            [pr.ravel() * np.cos(pt.ravel()), pr.ravel() * np.sin(pt.ravel())], axis=1
        )
        wts = np.multiply.outer(wr, wt).ravel()
        return QuadratureRule(pts + center, wts)
    if n == 3:
        gz = deg // 2 + 2
        xz, wz = _leggauss(gz)
        nt = deg + 2
        theta = 2.0 * np.pi * np.arange(nt) / nt
        wt = np.full(nt, 2.0 * np.pi / nt)
        s = np.sqrt(1.0 - xz ** 2)
        pr, pz, pt = np.meshgrid(r, xz, theta, indexing="ij")
        ps = np.sqrt(1.0 - pz ** 2)
        pts = np.stack(
            [
                (pr * ps * np.cos(pt)).ravel(),
                (pr * ps * np.sin(pt)).ravel(),
                (pr * pz).ravel(),
            ],
            axis=1,
        )
        wts = np.einsum("i,j,k->ijk", wr, wz, wt).ravel()
        del s
        return QuadratureRule(pts + center, wts)
    raise NotImplementedError("ball_rule supports n <= 3")


def integrate(f, rule: QuadratureRule) -> float:
    """Sum w_i f(x_i); f may take a single point or an (N, n) array."""
    try:
        vals = np.asarray(f(rule.points), dtype=float).ravel()
        if vals.shape[0] != rule.size:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([f(p) for p in rule.points], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand returned non-finite values")
    return float(vals @ rule.weights)


def poly_inner_box(p: PolynomialRep, q: PolynomialRep, lo, hi) -> float:
    """Exact integral of p*q over [lo, hi] via closed-form moments."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    ia = multi_indices(n, p.kappa)
    ib = multi_indices(n, q.kappa)
    total = 0.0
    for i, a in enumerate(ia):
        if p.coeffs[i] == 0.0:
            continue
        for j, b in enumerate(ib):
            if q.coeffs[j] == 0.0:
                continue
            m = 1.0
            for ax in range(n):
                m *= _cross_moment(
                    a[ax], b[ax],
                    float(p.center[ax]), float(p.scale[ax]),
                    float(q.center[ax]), float(q.scale[ax]),
                    float(lo[ax]), float(hi[ax]),
                )
            total += p.coeffs[i] * q.coeffs[j] * m
    return total


def _cross_moment(ka, kb, ca, sa, cb, sb, a, b):
    # integral over [a,b] of ((t-ca)/sa)^ka * ((t-cb)/sb)^kb via the expansion
    # (t-cb)/sb = (sa/sb) * (t-ca)/sa - (cb-ca)/sb, exact binomial form
    if ca == cb and sa == sb:
        return _interval_moment(ka + kb, a, b, ca) / sa ** (ka + kb)
    v = 0.0
    shift = (cb - ca) / sb
    for r in range(kb + 1):
        v += (
            math.comb(kb, r)
            * (sa / sb) ** r
            * (-shift) ** (kb - r)
            * _interval_moment(ka + r, a, b, ca) / sa ** (ka + r)
        )
    return v
