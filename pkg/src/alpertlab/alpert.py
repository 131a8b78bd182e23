"""Alpert multiwavelets of order kappa on dyadic cubes, and the associated
multiresolution transform on grid truncations.

On a cube Q the wavelets span the orthogonal complement of the degree-<kappa
polynomials inside the space of piecewise degree-<kappa polynomials on the
children of Q: (2^n - 1) * d functions, d = C(n+kappa-1, n).  The complement
basis is built once on a reference cube by projecting the child orthonormal
polynomials against the parent scaling basis and orthonormalizing in a fixed
graded child/degree order, with signs fixed so the first nonzero coefficient
is positive.  All other cubes reuse the same coefficients by affine rescaling,
so scale covariance is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dyadic import DyadicCube, GridTruncation, children
from .polybasis import (
    PolynomialRep,
    gauss_rule,
    monomials_many,
    multi_indices,
    orthonormal_coeffs,
    orthonormal_poly_basis,
    unit_gram,
)

MAX_KAPPA = 6


@lru_cache(maxsize=None)
def reference(n: int, kappa: int) -> "AlpertReference":
    if kappa > MAX_KAPPA:
        raise ValueError(
            f"kappa = {kappa} exceeds the supported conditioning limit {MAX_KAPPA}"
        )
    idx = multi_indices(n, kappa)
    d = len(idx)
    C = orthonormal_coeffs(n, kappa)
    G = unit_gram(n, kappa)
    nc = 2 ** n
    # refinement blocks: A[eps, i, j] = <q_{eps,i}, S_j> on the reference cube
    A = np.empty((nc, d, d))
    for eps in range(nc):
        t = _child_center_offsets(n, eps)
        sub = _affine_substitution(idx, t, 0.5)
        A[eps] = 2.0 ** (-n / 2) * (C @ G @ sub.T @ C.T)
    A_flat = A.reshape(nc * d, d)
    # orthonormality of the scaling columns in child coordinates
    assert np.max(np.abs(A_flat.T @ A_flat - np.eye(d))) < 1e-12
    W = _complement_basis(A_flat, nc, d)
    return AlpertReference(n, kappa, idx, C, A, W)


def _child_center_offsets(n: int, eps_mask: int) -> np.ndarray:
    # center of child eps of [-1/2, 1/2]^n; bit order matches dyadic.children
    t = np.empty(n)
    for i in range(n):
        e = (eps_mask >> (n - 1 - i)) & 1
        t[i] = (2 * e - 1) / 4.0
    return t


def _affine_substitution(idx, t: np.ndarray, s: float) -> np.ndarray:
    """Matrix of u^alpha -> (t + s v)^alpha expanded over v^beta (same index list)."""
    d = len(idx)
    n = t.shape[0]
    pos = {a: k for k, a in enumerate(idx)}
    sub = np.zeros((d, d))
    for k, alpha in enumerate(idx):
        for beta_key, coeff in _expand_affine(alpha, t, s, n).items():
            sub[k, pos[beta_key]] += coeff
    return sub


def _expand_affine(alpha, t, s, n):
    terms = {(): 1.0}
    for i in range(n):
        new = {}
        for prefix, c in terms.items():
            ai = alpha[i]
            for b in range(ai + 1):
                coeff = c * math.comb(ai, b) * (s ** b) * (t[i] ** (ai - b))
                if coeff != 0.0 or b == 0:
                    key = prefix + (b,)
                    new[key] = new.get(key, 0.0) + coeff
        terms = new
    return terms


def _complement_basis(A_flat: np.ndarray, nc: int, d: int) -> np.ndarray:
    """Orthonormal basis of the complement of the scaling columns.

    Modified Gram-Schmidt with one reorthogonalization pass over the identity
    columns in their natural (child, degree) order; dependent directions are
    skipped.  Equivalent to an order-pivoted Cholesky of the projected Gram.
    """
    N = nc * d
    basis = [A_flat[:, j].copy() for j in range(d)]
    out = []
    for col in range(N):
        v = np.zeros(N)
        v[col] = 1.0
        for _ in range(2):
            for b in basis:
                v -= (b @ v) * b
        nrm = float(np.linalg.norm(v))
        if nrm < 1e-6:
            continue
        v /= nrm
        lead = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))[0]
        if v[lead] < 0:
            v = -v
        basis.append(v)
        out.append(v)
    W = np.array(out)
    assert W.shape[0] == (nc - 1) * d, f"complement rank {W.shape[0]}"
    return W.reshape((nc - 1) * d, nc, d)


@dataclass(frozen=True)
class AlpertReference:
    n: int
    kappa: int
    idx: tuple
    C: np.ndarray  # orthonormal poly coeffs on the unit reference cube
    A: np.ndarray  # (2^n, d, d) refinement blocks
    W: np.ndarray  # ((2^n-1) d, 2^n, d) wavelet coords in child orthonormal polys

    @property
    def d(self) -> int:
        return self.C.shape[0]

    @property
    def num_wavelets(self) -> int:
        return (2 ** self.n - 1) * self.d

    @property
    def A_flat(self) -> np.ndarray:
        return self.A.reshape(2 ** self.n * self.d, self.d)

    @property
    def W_flat(self) -> np.ndarray:
        return self.W.reshape(self.num_wavelets, 2 ** self.n * self.d)


@dataclass(frozen=True)
class ScalingBasis:
    """The d orthonormal polynomials of degree < kappa on a cube."""

    cube: DyadicCube
    kappa: int

    @property
    def polys(self) -> list[PolynomialRep]:
        return orthonormal_poly_basis(self.cube.lower, self.cube.upper, self.kappa)

    def eval_many(self, X) -> np.ndarray:
        """Values on the cube only: rows are points, columns the d functions."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ref = reference(self.cube.dim, self.kappa)
        U = (X - self.cube.center) / self.cube.side
        vals = monomials_many(U, ref.idx) @ ref.C.T / math.sqrt(self.cube.volume)
        inside = np.all((X >= self.cube.lower) & (X < self.cube.upper), axis=1)
        vals[~inside] = 0.0
        return vals


@dataclass(frozen=True)
class AlpertWaveletSet:
    """The (2^n - 1) d order-kappa Alpert wavelets on a cube."""

    cube: DyadicCube
    kappa: int

    @property
    def ref(self) -> AlpertReference:
        return reference(self.cube.dim, self.kappa)

    @property
    def size(self) -> int:
        return self.ref.num_wavelets

    def child_poly_values(self, X) -> np.ndarray:
        """Values q_{eps,i}(x) of the child orthonormal polynomials, (N, 2^n, d).

        Each point contributes only in the child that contains it (half-open),
        zero outside the cube.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ref = self.ref
        n, d = ref.n, ref.d
        nc = 2 ** n
        cube = self.cube
        out = np.zeros((X.shape[0], nc, d))
        kids = children(cube)
        inside = np.all((X >= cube.lower) & (X < cube.upper), axis=1)
        if not np.any(inside):
            return out
        Xi = X[inside]
        mid = cube.center
        masks = np.zeros(Xi.shape[0], dtype=int)
        for i in range(n):
            masks |= (Xi[:, i] >= mid[i]).astype(int) << (n - 1 - i)
        scale = 1.0 / math.sqrt(kids[0].volume)
        vals = np.zeros((Xi.shape[0], nc, d))
        for eps in range(nc):
            sel = masks == eps
            if not np.any(sel):
                continue
            ch = kids[eps]
            U = (Xi[sel] - ch.center) / ch.side
            vals[sel, eps, :] = monomials_many(U, ref.idx) @ ref.C.T * scale
        out[inside] = vals
        return out

    def eval_many(self, a: int, X) -> np.ndarray:
        q = self.child_poly_values(X)
        return np.einsum("ncd,cd->n", q, self.ref.W[a])

    def eval(self, a: int, x) -> float:
        return float(self.eval_many(a, np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def eval_all(self, X) -> np.ndarray:
        """All wavelets at once: shape (N, (2^n-1) d)."""
        q = self.child_poly_values(X)
        return q.reshape(q.shape[0], -1) @ self.ref.W_flat.T


def build_alpert(cube: DyadicCube, kappa: int) -> AlpertWaveletSet:
    reference(cube.dim, kappa)  # validates kappa and warms the cache
    return AlpertWaveletSet(cube, kappa)


def wavelet_eval(ws: AlpertWaveletSet, a: int, x) -> float:
    """Exact polynomial-piece value on the child containing x; 0 outside the cube."""
    return ws.eval(a, x)


def _child_inner_products(f, cube: DyadicCube, kappa: int, g: int | None = None) -> np.ndarray:
    ref = reference(cube.dim, kappa)
    if g is None:
        g = kappa + 6
    out = np.empty((2 ** cube.dim, ref.d))
    for eps, ch in enumerate(children(cube)):
        rule = gauss_rule(g, ch.lower, ch.upper)
        fv = np.asarray(f(rule.points), dtype=float).ravel()
        if not np.all(np.isfinite(fv)):
            raise ValueError("integrand returned non-finite values")
        U = (rule.points - ch.center) / ch.side
        mono = monomials_many(U, ref.idx) @ ref.C.T / math.sqrt(ch.volume)
        out[eps] = mono.T @ (fv * rule.weights)
    return out


def analysis(f, cube: DyadicCube, kappa: int, g: int | None = None) -> np.ndarray:
    """Wavelet coefficients <f, h^a> on one cube, computed child by child."""
    v = _child_inner_products(f, cube, kappa, g)
    ref = reference(cube.dim, kappa)
    return ref.W_flat @ v.ravel()


@dataclass(frozen=True)
class DeltaProjection:
    """The projection Delta_{Q;kappa} f = sum_a <f,h^a> h^a."""

    wavelets: AlpertWaveletSet
    coeffs: np.ndarray

    def eval_many(self, X) -> np.ndarray:
        return self.wavelets.eval_all(X) @ self.coeffs

    def __call__(self, X) -> np.ndarray:
        return self.eval_many(X)

    def norm_sq(self) -> float:
        return float(self.coeffs @ self.coeffs)


def project_delta(f, cube: DyadicCube, kappa: int, g: int | None = None) -> DeltaProjection:
    ws = build_alpert(cube, kappa)
    return DeltaProjection(ws, analysis(f, cube, kappa, g))


@dataclass
class TruncatedExpansion:
    """Root scaling block plus one wavelet block per cube at levels 0..L-1."""

    trunc: GridTruncation
    kappa: int
    scaling: np.ndarray
    wavelets: list[np.ndarray]  # wavelets[k] has shape (2^(n k), (2^n - 1) d)

    @property
    def ref(self) -> AlpertReference:
        return reference(self.trunc.dim, self.kappa)

    def block_count(self) -> int:
        return sum(w.shape[0] for w in self.wavelets)

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def norm_sq(self) -> float:
        s = float(self.scaling @ self.scaling)
        for w in self.wavelets:
            s += float(np.sum(w * w))
        return s

    def as_vector(self) -> np.ndarray:
        parts = [self.scaling] + [w.ravel() for w in self.wavelets]
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec: np.ndarray, trunc: GridTruncation, kappa: int) -> "TruncatedExpansion":
        ref = reference(trunc.dim, kappa)
        d, nw = ref.d, ref.num_wavelets
        scaling = np.array(vec[:d])
        pos = d
        blocks = []
        for k in range(trunc.max_depth):
            cnt = 2 ** (trunc.dim * k)
            blocks.append(np.array(vec[pos : pos + cnt * nw]).reshape(cnt, nw))
            pos += cnt * nw
        if pos != vec.shape[0]:
            raise ValueError("coefficient vector length does not match the truncation")
        return cls(trunc, kappa, scaling, blocks)

    def copy(self) -> "TruncatedExpansion":
        return TruncatedExpansion(
            self.trunc, self.kappa, self.scaling.copy(), [w.copy() for w in self.wavelets]
        )


def _cell_inner_products(f, trunc: GridTruncation, kappa: int, g: int | None = None) -> np.ndarray:
    """Inner products of f against the orthonormal polynomials on the finest cells."""
    n = trunc.dim
    L = trunc.max_depth
    ref = reference(n, kappa)
    if g is None:
        g = kappa + 6
    cells = trunc.cubes_at_level(L)
    out = np.empty((len(cells), ref.d))
    rule0 = gauss_rule(g, np.zeros(n), np.ones(n) * cells[0].side)
    U0 = (rule0.points - 0.5 * cells[0].side) / cells[0].side
    mono0 = monomials_many(U0, ref.idx) @ ref.C.T / math.sqrt(cells[0].volume)
    for ci, cell in enumerate(cells):
        pts = rule0.points + cell.lower
        fv = np.asarray(f(pts), dtype=float).ravel()
        if not np.all(np.isfinite(fv)):
            raise ValueError("integrand returned non-finite values")
        out[ci] = mono0.T @ (fv * rule0.weights)
    return out


def _cell_order_index(trunc: GridTruncation, level: int) -> dict[tuple[int, ...], int]:
    return {c.index: i for i, c in enumerate(trunc.cubes_at_level(level))}


def expand(f, trunc: GridTruncation, kappa: int, g: int | None = None) -> TruncatedExpansion:
    """Multiresolution analysis: scaling block at the root plus wavelet blocks.

    For f in the span of grid-aligned piecewise degree-<kappa polynomials at
    the finest level the transform is exact; otherwise it represents the
    L2-best approximation from that span (up to cell quadrature).
    """
    n, L = trunc.dim, trunc.max_depth
    ref = reference(n, kappa)
    fine = _cell_inner_products(f, trunc, kappa, g)
    wavelet_blocks: list[np.ndarray] = [None] * L  # type: ignore[list-item]
    current = fine  # coefficients against cell polynomials at level k+1
    for k in range(L - 1, -1, -1):
        cubes_k = trunc.cubes_at_level(k)
        child_pos = _cell_order_index(trunc, k + 1)
        s = np.empty((len(cubes_k), ref.d))
        w = np.empty((len(cubes_k), ref.num_wavelets))
        for qi, Q in enumerate(cubes_k):
            v = np.concatenate([current[child_pos[ch.index]] for ch in children(Q)])
            s[qi] = ref.A_flat.T @ v
            w[qi] = ref.W_flat @ v
        wavelet_blocks[k] = w
        current = s
    if L == 0:
        # no wavelet levels: scaling block only
        return TruncatedExpansion(trunc, kappa, fine[0].copy(), [])
    return TruncatedExpansion(trunc, kappa, current[0], wavelet_blocks)


@dataclass(frozen=True)
class PiecewiseSynthesis:
    """Grid-aligned piecewise polynomial reconstructed from an expansion."""

    trunc: GridTruncation
    kappa: int
    cell_coeffs: np.ndarray  # (num finest cells, d) against cell orthonormal polys

    def eval_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, L = self.trunc.dim, self.trunc.max_depth
        ref = reference(n, kappa=self.kappa)
        side = 2.0 ** (-L)
        out = np.zeros(X.shape[0])
        inside = np.all((X >= 0.0) & (X < 1.0), axis=1)
        if not np.any(inside):
            return out
        Xi = X[inside]
        cell_idx = np.minimum((Xi / side).astype(int), 2 ** L - 1)
        pos_map = _cell_order_index(self.trunc, L)
        flat = np.array([pos_map[tuple(int(v) for v in row)] for row in cell_idx])
        centers = (cell_idx + 0.5) * side
        U = (Xi - centers) / side
        mono = monomials_many(U, ref.idx) @ ref.C.T / math.sqrt(side ** n)
        out[inside] = np.sum(mono * self.cell_coeffs[flat], axis=1)
        return out

    def __call__(self, X) -> np.ndarray:
        return self.eval_many(X)

    def norm_sq(self) -> float:
        return float(np.sum(self.cell_coeffs ** 2))


def synthesize(expn: TruncatedExpansion) -> PiecewiseSynthesis:
    """Inverse transform onto the finest cells; Parseval holds exactly."""
    trunc, kappa = expn.trunc, expn.kappa
    n, L = trunc.dim, trunc.max_depth
    ref = reference(n, kappa)
    if len(expn.wavelets) != L:
        raise ValueError("wavelet block count does not match the truncation depth")
    current = expn.scaling[None, :]
    for k in range(L):
        cubes_k = trunc.cubes_at_level(k)
        if expn.wavelets[k].shape != (len(cubes_k), ref.num_wavelets):
            raise ValueError(f"wavelet block at level {k} has wrong shape")
        child_pos = _cell_order_index(trunc, k + 1)
        nxt = np.empty((len(child_pos), ref.d))
        for qi, Q in enumerate(cubes_k):
            v = ref.A_flat @ current[qi] + ref.W_flat.T @ expn.wavelets[k][qi]
            v = v.reshape(2 ** n, ref.d)
            for eps, ch in enumerate(children(Q)):
                nxt[child_pos[ch.index]] = v[eps]
        current = nxt
    return PiecewiseSynthesis(trunc, kappa, current)
