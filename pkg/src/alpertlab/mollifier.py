"""Compactly supported mollifiers with vanishing moments of positive order.

phi(x) = (1 - |x|^2)_+^m * p(x) on the closed unit ball, with p a polynomial
in all-even monomials chosen so that phi has unit integral and all moments of
order 0 < |gamma| < kappa vanish.  Every moment of the bump has a closed form
in Gamma functions, so the small correction system is solved exactly up to
rounding and the resulting residuals sit at machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polybasis import multi_indices


def bump_ball_moment(n: int, m: int, tau) -> float:
    """Exact integral over the unit ball of (1-|x|^2)^m * prod x_i^(2 tau_i).

    Closed form Gamma(m+1) * prod Gamma(tau_i + 1/2) / Gamma(m + |tau| + n/2 + 1).
    """
    tt = sum(tau)
    num = math.gamma(m + 1)
    for t in tau:
        num *= math.gamma(t + 0.5)
    return num / math.gamma(m + tt + n / 2 + 1)


@lru_cache(maxsize=None)
def _even_indices(n: int, kappa: int) -> tuple[tuple[int, ...], ...]:
    # multi-indices with all components even and |gamma| < kappa
    return tuple(
        a for a in multi_indices(n, kappa) if all(ai % 2 == 0 for ai in a)
    )


@dataclass(frozen=True)
class MollifierSpec:
    """phi(x) = (1 - |x|^2)_+^m * sum_s p[s] x^(2 sigma_s), support the unit ball."""

    dim: int
    kappa: int
    m: int
    even_exponents: tuple[tuple[int, ...], ...]
    p_coeffs: np.ndarray
    normalized: bool

    @property
    def smoothness(self) -> int:
        """phi is C^(m-1) across the support boundary."""
        return self.m - 1


def build_mollifier(n: int, kappa: int, m: int | None = None) -> MollifierSpec:
    """Solve the even-moment system for the correction polynomial.

    Any m >= 1 yields a valid mollifier; derivative estimates of order r need
    m >= r + 2, so the default m = kappa + 4 leaves margin for the smoothing
    bounds.  Callers that differentiate enforce their own order limit.
    """
    if kappa < 1:
        raise ValueError("need kappa >= 1")
    if m is None:
        m = kappa + 4
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    evens = _even_indices(n, kappa)
    k = len(evens)
    A = np.empty((k, k))
    for i, gam in enumerate(evens):
        for j, sig in enumerate(evens):
            tau = tuple((g + s) // 2 for g, s in zip(gam, sig))
            A[i, j] = bump_ball_moment(n, m, tau)
    rhs = np.zeros(k)
    rhs[0] = 1.0
    p = np.linalg.solve(A, rhs)
    spec = MollifierSpec(n, kappa, m, evens, p, normalized=False)
    resid = max(abs(moment(spec, g) - r) for g, r in zip(evens, rhs))
    assert resid < 1e-10, f"moment system residual {resid:.3e}"
    return MollifierSpec(n, kappa, m, evens, p, normalized=True)


def moment(spec: MollifierSpec, gamma) -> float:
    """Exact integral of phi(y) y^gamma via closed-form ball moments."""
    gamma = tuple(int(g) for g in gamma)
    if any(g % 2 for g in gamma):
        return 0.0
    total = 0.0
    for sig, c in zip(spec.even_exponents, spec.p_coeffs):
        tau = tuple((g + s) // 2 for g, s in zip(gamma, sig))
        total += c * bump_ball_moment(spec.dim, spec.m, tau)
    return total


def eval_mollifier(spec: MollifierSpec, delta: float, x) -> float:
    """phi_delta(x) = delta^-n phi(x / delta); zero for |x| >= delta."""
    return float(eval_mollifier_many(spec, delta, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def eval_mollifier_many(spec: MollifierSpec, delta: float, X) -> np.ndarray:
    if delta <= 0:
        raise ValueError("delta must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float)) / delta
    r2 = np.sum(X ** 2, axis=1)
    inside = r2 < 1.0
    out = np.zeros(X.shape[0])
    if np.any(inside):
        U = X[inside]
        base = (1.0 - r2[inside]) ** spec.m
        corr = np.zeros(U.shape[0])
        for sig, c in zip(spec.even_exponents, spec.p_coeffs):
            term = np.full(U.shape[0], c)
            for i, s in enumerate(sig):
                if s:
                    term = term * U[:, i] ** s
            corr += term
        out[inside] = base * corr / delta ** spec.dim
    return out


@lru_cache(maxsize=None)
def _bump_expansion(n: int, m: int) -> tuple[tuple[tuple[int, ...], ...], tuple[float, ...]]:
    # multinomial expansion of (1 - x_1^2 - ... - x_n^2)^m into monomials
    terms: dict[tuple[int, ...], float] = {}
    for combo in _weak_compositions_upto(n + 1, m):
        k0, ks = combo[0], combo[1:]
        coeff = math.factorial(m)
        for c in combo:
            coeff //= math.factorial(c)
        sign = (-1) ** (m - k0)
        exps = tuple(2 * k for k in ks)
        terms[exps] = terms.get(exps, 0.0) + sign * coeff
    exps = tuple(sorted(terms))
    return exps, tuple(terms[e] for e in exps)


def _weak_compositions_upto(parts: int, total: int):
    # all tuples of `parts` nonnegative ints summing to exactly `total`
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _weak_compositions_upto(parts - 1, total - first):
            yield (first,) + rest


def polynomial_expansion(spec: MollifierSpec) -> tuple[np.ndarray, np.ndarray]:
    """phi as a raw polynomial on the ball: exponent rows (T, n) and coefficients (T,).

    Valid only for |x| <= 1; used by the exact convolution engines.
    """
    exps_b, coeffs_b = _bump_expansion(spec.dim, spec.m)
    terms: dict[tuple[int, ...], float] = {}
    for eb, cb in zip(exps_b, coeffs_b):
        for sig, cp in zip(spec.even_exponents, spec.p_coeffs):
            e = tuple(a + b for a, b in zip(eb, sig))
            terms[e] = terms.get(e, 0.0) + cb * cp
    keys = sorted(terms)
    return np.array(keys, dtype=int), np.array([terms[k] for k in keys])
