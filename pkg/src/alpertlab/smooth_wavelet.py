"""Smoothed Alpert wavelets h * phi_(eta l(Q)) and their inner products.

Off the halo {x : dist(x, S_Q) < delta} the smoothed function coincides with
the base wavelet, so evaluation branches: an exact polynomial branch away from
the halo and a convolution branch on it.  The convolution is computed in the
normalized variable z = (x - y) / delta, where the integrand is a polynomial
over (box intersect unit ball) regions and clipmoments supplies the exact
monomial moments.  In one dimension every quantity here is a piecewise
polynomial and all integrals are evaluated exactly by breakpoint-aware Gauss
rules; in higher dimensions pointwise values are exact and halo integrals use
cells aligned to all jump hyperplanes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .alpert import ScalingBasis, build_alpert, reference
from .clipmoments import ball_box_moments
from .dyadic import (
    DyadicCube,
    Face,
    boundary_faces,
    children,
    faces_box_distance_sq,
    faces_distance_many,
    skeleton_faces,
)
from .mollifier import MollifierSpec, build_mollifier, polynomial_expansion
from .polybasis import monomials_many, multi_indices

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(g: int):
    if g not in _GL_CACHE:
        _GL_CACHE[g] = np.polynomial.legendre.leggauss(g)
    return _GL_CACHE[g]


def _gl_nodes(a: float, b: float, g: int):
    x, w = _leggauss(g)
    return a + 0.5 * (b - a) * (x + 1.0), 0.5 * (b - a) * w


def default_mollifier(n: int, kappa: int, m: int | None = None) -> MollifierSpec:
    return build_mollifier(n, kappa, m)


# ---------------------------------------------------------------------------
# piece data: polynomial pieces of the base functions in child-local coords


@dataclass(frozen=True)
class _Piece:
    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    scale: float
    coeffs: np.ndarray  # (nfuncs, d) monomial coeffs in ((y - center)/scale)^alpha


def base_pieces(cube: DyadicCube, kind: str, kappa: int) -> list[_Piece]:
    """Monomial pieces of all wavelets (kind='wavelet') or scaling functions."""
    ref = reference(cube.dim, kappa)
    if kind == "wavelet":
        out = []
        for eps, ch in enumerate(children(cube)):
            pc = (ref.W[:, eps, :] @ ref.C) / math.sqrt(ch.volume)
            out.append(_Piece(ch.lower, ch.upper, ch.center, ch.side, pc))
        return out
    if kind == "scaling":
        pc = ref.C / math.sqrt(cube.volume)
        return [_Piece(cube.lower, cube.upper, cube.center, cube.side, pc)]
    raise ValueError(f"unknown kind {kind!r}")


def break_faces(cube: DyadicCube, kind: str) -> list[Face]:
    """Faces across which the base function jumps: skeleton for wavelets,
    outer boundary for scaling functions."""
    return skeleton_faces(cube) if kind == "wavelet" else boundary_faces(cube)


def base_values(cube: DyadicCube, kind: str, kappa: int, X) -> np.ndarray:
    """(nfuncs, N) values of the plain basis functions."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kind == "wavelet":
        return build_alpert(cube, kappa).eval_all(X).T
    return ScalingBasis(cube, kappa).eval_many(X).T


def num_funcs(cube: DyadicCube, kind: str, kappa: int) -> int:
    ref = reference(cube.dim, kappa)
    return ref.num_wavelets if kind == "wavelet" else ref.d


# ---------------------------------------------------------------------------
# exact pointwise convolution


@lru_cache(maxsize=None)
def _sub_structure(n: int, kappa: int):
    idx = multi_indices(n, kappa)
    pos = {a: k for k, a in enumerate(idx)}
    entries = []
    for k, alpha in enumerate(idx):
        for j, beta in enumerate(idx):
            if all(b <= a for a, b in zip(alpha, beta)):
                comb = 1
                for a, b in zip(alpha, beta):
                    comb *= math.comb(a, b)
                entries.append((k, j, comb, tuple(a - b for a, b in zip(alpha, beta)), sum(beta)))
    return idx, pos, entries


@lru_cache(maxsize=None)
def _phi_tables(n: int, spec_kappa: int, m: int, kappa: int):
    spec = build_mollifier(n, spec_kappa, m)
    exps, coeffs = polynomial_expansion(spec)
    idx = multi_indices(n, kappa)
    D = int(np.max(exps)) + (kappa - 1)
    shape = (D + 1,) * n
    beta = np.array(idx, dtype=int)  # (d, n)
    comb = beta[:, None, :] + exps[None, :, :]  # (d, T, n)
    flat = np.ravel_multi_index(np.moveaxis(comb, -1, 0), shape)
    return D, shape, flat, np.asarray(coeffs)


class SmoothedSet:
    """All smoothed basis functions (wavelet block or scaling block) on a cube."""

    def __init__(self, cube: DyadicCube, kind: str, kappa: int, eta: float,
                 spec: MollifierSpec | None = None):
        if not 0.0 < eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        self.cube = cube
        self.kind = kind
        self.kappa = kappa
        self.eta = eta
        self.spec = spec if spec is not None else default_mollifier(cube.dim, kappa)
        if self.spec.dim != cube.dim or self.spec.kappa < kappa:
            raise ValueError("mollifier does not match dimension/order")
        self.delta = eta * cube.side
        self.faces = break_faces(cube, kind)
        self.pieces = base_pieces(cube, kind, kappa)
        self.size = num_funcs(cube, kind, kappa)
        n = cube.dim
        self._D, self._shape, self._flat, self._phi_coeffs = _phi_tables(
            n, self.spec.kappa, self.spec.m, kappa
        )
        self._idx, self._pos, self._sub_entries = _sub_structure(n, kappa)

    # -- pointwise -----------------------------------------------------------

    def quad_values_at(self, x: np.ndarray) -> np.ndarray:
        """Convolution values of all functions at one point (quadrature branch)."""
        n = self.cube.dim
        delta = self.delta
        total = np.zeros(self.size)
        for piece in self.pieces:
            zlo = (x - piece.hi) / delta
            zhi = (x - piece.lo) / delta
            gap = np.maximum(zlo, 0.0) + np.maximum(-zhi, 0.0)
            if float(gap @ gap) >= 1.0:
                continue
            M = ball_box_moments(zlo, zhi, self._D)
            K = M.ravel()[self._flat] @ self._phi_coeffs  # (d,)
            sub = self._sub_matrix(x, piece)
            total += (piece.coeffs @ sub) @ K
        return total

    def _sub_matrix(self, x: np.ndarray, piece: _Piece) -> np.ndarray:
        # expansion of ((x - delta z - center)/scale)^alpha over z^beta
        d = len(self._idx)
        u0 = (x - piece.center) / piece.scale
        ratio = self.delta / piece.scale
        sub = np.zeros((d, d))
        for k, j, comb, diff, btot in self._sub_entries:
            v = comb * (-ratio) ** btot
            for ui, di in zip(u0, diff):
                if di:
                    v *= ui ** di
            sub[k, j] = v
        return sub

    def values(self, X, force_quadrature: bool = False) -> np.ndarray:
        """(nfuncs, N) values of the smoothed functions; exact branch off the halo."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        dist = faces_distance_many(X, self.faces)
        out = np.zeros((self.size, X.shape[0]))
        on_halo = dist < self.delta if not force_quadrature else np.ones(len(dist), bool)
        off = ~on_halo
        if np.any(off):
            out[:, off] = base_values(self.cube, self.kind, self.kappa, X[off])
        for i in np.flatnonzero(on_halo):
            out[:, i] = self.quad_values_at(X[i])
        return out

    def diff_values(self, X) -> np.ndarray:
        """(nfuncs, N) values of (smoothed - base); identically zero off the halo."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        dist = faces_distance_many(X, self.faces)
        out = np.zeros((self.size, X.shape[0]))
        sel = np.flatnonzero(dist < self.delta)
        if sel.size:
            base = base_values(self.cube, self.kind, self.kappa, X[sel])
            for col, i in enumerate(sel):
                out[:, i] = self.quad_values_at(X[i]) - base[:, col]
        return out


@dataclass(frozen=True)
class SmoothWavelet:
    """One smoothed Alpert wavelet h^eta = h * phi_(eta l(Q))."""

    cube: DyadicCube
    a: int
    kappa: int
    eta: float
    spec: MollifierSpec | None = None
    kind: str = "wavelet"
    renormalized: bool = False

    @cached_property
    def _set(self) -> SmoothedSet:
        return SmoothedSet(self.cube, self.kind, self.kappa, self.eta, self.spec)

    @property
    def delta(self) -> float:
        return self.eta * self.cube.side

    @cached_property
    def _norm(self) -> float:
        return smooth_l2_norm(self) if self.renormalized else 1.0

    def base_eval_many(self, X) -> np.ndarray:
        return base_values(self.cube, self.kind, self.kappa, X)[self.a]


def smooth_eval(sw: SmoothWavelet, x, force_quadrature: bool = False) -> float:
    """Pointwise value; exact base-branch when dist(x, S_Q) >= delta."""
    return float(smooth_eval_many(sw, np.atleast_2d(np.asarray(x, dtype=float)),
                                  force_quadrature)[0])


def smooth_eval_many(sw: SmoothWavelet, X, force_quadrature: bool = False) -> np.ndarray:
    vals = sw._set.values(X, force_quadrature)[sw.a]
    return vals / sw._norm


# ---------------------------------------------------------------------------
# halo integration


def _axis_breaks(lo: float, hi: float, values) -> np.ndarray:
    vals = [lo, hi] + [v for v in values if lo < v < hi]
    return np.array(sorted(set(vals)))


def _halo_cells(sm: SmoothedSet, clip_lo, clip_hi, extra_faces: list[Face],
                max_cell: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Axis-aligned cells covering halo(sm) within the clip box, aligned to all
    jump hyperplanes of both functions and to the halo slab edges."""
    n = sm.cube.dim
    delta = sm.delta
    clip_lo = np.maximum(np.asarray(clip_lo, float), sm.cube.lower - delta)
    clip_hi = np.minimum(np.asarray(clip_hi, float), sm.cube.upper + delta)
    if np.any(clip_lo >= clip_hi):
        return []
    breaks = []
    for ax in range(n):
        vals = []
        for f in sm.faces:
            if f.axis == ax:
                vals.extend((f.value - delta, f.value, f.value + delta))
        for f in extra_faces:
            if f.axis == ax:
                vals.append(f.value)
        breaks.append(_axis_breaks(float(clip_lo[ax]), float(clip_hi[ax]), vals))
    cells = []
    grids = [list(zip(b[:-1], b[1:])) for b in breaks]
    idx = np.indices([len(g) for g in grids]).reshape(n, -1).T
    for row in idx:
        lo = np.array([grids[ax][row[ax]][0] for ax in range(n)])
        hi = np.array([grids[ax][row[ax]][1] for ax in range(n)])
        if faces_box_distance_sq(sm.faces, lo, hi) >= delta * delta:
            continue  # smoothed and base coincide on this cell
        cells.extend(_subdivide(lo, hi, max_cell))
    return cells


def _subdivide(lo: np.ndarray, hi: np.ndarray, max_cell: float):
    parts = [max(1, int(math.ceil((h - l) / max_cell))) for l, h in zip(lo, hi)]
    if all(p == 1 for p in parts):
        return [(lo, hi)]
    axes = [np.linspace(l, h, p + 1) for l, h, p in zip(lo, hi, parts)]
    out = []
    idx = np.indices(parts).reshape(len(parts), -1).T
    for row in idx:
        out.append(
            (
                np.array([axes[ax][row[ax]] for ax in range(len(parts))]),
                np.array([axes[ax][row[ax] + 1] for ax in range(len(parts))]),
            )
        )
    return out


def _cell_rule(lo: np.ndarray, hi: np.ndarray, g: int):
    n = lo.shape[0]
    pts_axes, wts_axes = [], []
    for ax in range(n):
        p, w = _gl_nodes(float(lo[ax]), float(hi[ax]), g)
        pts_axes.append(p)
        wts_axes.append(w)
    grids = np.meshgrid(*pts_axes, indexing="ij")
    pts = np.stack([g_.ravel() for g_ in grids], axis=1)
    wts = wts_axes[0]
    for ax in range(1, n):
        wts = np.multiply.outer(wts, wts_axes[ax]).ravel()
    return pts, np.asarray(wts).ravel()


def smooth_inner_block(I: DyadicCube, Q: DyadicCube, eta: float, kappa: int,
                       spec: MollifierSpec | None = None,
                       kind_i: str = "wavelet", kind_j: str = "wavelet",
                       cell_frac: float = 1.0, g_cell: int | None = None) -> np.ndarray:
    """Matrix of <b_i^eta, b_j> over the two blocks, via the halo correction.

    <b_i^eta, b_j> = delta_(ij) + integral over halo(I) of (b_i^eta - b_i) b_j,
    using orthonormality of the plain system and the coincidence identity.
    Pairs whose halo misses supp b_j are exact zeros.
    """
    n = I.dim
    smi = SmoothedSet(I, kind_i, kappa, eta, spec)
    ni = smi.size
    nj = num_funcs(Q, kind_j, kappa)
    block = np.zeros((ni, nj))
    same = (I == Q) and (kind_i == kind_j)
    if same:
        block += np.eye(ni)
    if faces_box_distance_sq(smi.faces, Q.lower, Q.upper) >= smi.delta ** 2:
        return block  # zero case: correction support misses supp b_j
    extra = break_faces(Q, kind_j)
    if n == 1:
        g = smi.spec.m + 2 * kappa + 2
        vals = []
        for f in extra:
            vals.append(f.value)
        breaks = _axis_breaks(
            float(max(Q.lower[0], I.lower[0] - smi.delta)),
            float(min(Q.upper[0], I.upper[0] + smi.delta)),
            [f.value + s for f in smi.faces for s in (-smi.delta, 0.0, smi.delta)] + vals,
        )
        for a, b in zip(breaks[:-1], breaks[1:]):
            pts, wts = _gl_nodes(float(a), float(b), g)
            X = pts[:, None]
            dv = smi.diff_values(X)
            bv = base_values(Q, kind_j, kappa, X)
            block += np.einsum("an,bn,n->ab", dv, bv, wts)
        return block
    g = g_cell if g_cell is not None else 5
    cells = _halo_cells(smi, Q.lower, Q.upper, extra, cell_frac * smi.delta)
    for lo, hi in cells:
        pts, wts = _cell_rule(lo, hi, g)
        dv = smi.diff_values(pts)
        bv = base_values(Q, kind_j, kappa, pts)
        block += np.einsum("an,bn,n->ab", dv, bv, wts)
    return block


def smooth_inner(I: DyadicCube, a: int, Q: DyadicCube, b: int, eta: float,
                 kappa: int, spec: MollifierSpec | None = None, **kw) -> float:
    """<h_I^(eta,a), h_Q^b>: exact zero when the support analysis prunes the pair."""
    return float(smooth_inner_block(I, Q, eta, kappa, spec, **kw)[a, b])


def smooth_moment(sw: SmoothWavelet, beta) -> float:
    """Integral of h^eta(x) x^beta; |beta| < kappa makes it vanish."""
    beta = tuple(int(x) for x in beta)
    idx = multi_indices(sw.cube.dim, sw.kappa)
    if beta not in idx:
        raise ValueError("moment order must satisfy |beta| < kappa")
    block = smooth_moment_block(sw.cube, sw.kind, sw.kappa, sw.eta, sw.spec)
    return float(block[sw.a, idx.index(beta)]) / sw._norm


@lru_cache(maxsize=None)
def _ball_reference_rule(n: int, spec_kappa: int, m: int, deg: int):
    from .mollifier import build_mollifier, eval_mollifier_many
    from .polybasis import ball_rule

    spec = build_mollifier(n, spec_kappa, m)
    rule = ball_rule(n, deg, np.zeros(n), 1.0)
    phi = eval_mollifier_many(spec, 1.0, rule.points)
    return rule.points, rule.weights * phi


def smooth_moment_block(cube: DyadicCube, kind: str, kappa: int, eta: float,
                        spec: MollifierSpec | None = None) -> np.ndarray:
    """All moments integral of b^eta(x) x^beta, |beta| < kappa; shape (nf, d).

    In one dimension the smoothed functions are integrated directly against
    the monomials on a breakpoint-exact subdivision.  In higher dimensions
    Fubini moves the monomial through the convolution: the inner full-ball
    quadrature of phi against the shifted monomial is evaluated numerically
    (verifying the mollifier's moments), and the outer integral is an exact
    Gauss rule on each polynomial piece.
    """
    sm = SmoothedSet(cube, kind, kappa, eta, spec)
    n = cube.dim
    delta = sm.delta
    idx = multi_indices(n, kappa)
    if n == 1:
        g = sm.spec.m + 2 * kappa + 2
        breaks = _axis_breaks(
            float(cube.lower[0] - delta),
            float(cube.upper[0] + delta),
            [f.value + s for f in sm.faces for s in (-delta, 0.0, delta)],
        )
        out = np.zeros((sm.size, len(idx)))
        for a, b in zip(breaks[:-1], breaks[1:]):
            pts, wts = _gl_nodes(float(a), float(b), g)
            vals = sm.values(pts[:, None])  # (nf, N)
            mono = pts[:, None] ** np.array([al[0] for al in idx])[None, :]
            out += vals @ (mono * wts[:, None])
        return out
    zpts, zwts = _ball_reference_rule(n, sm.spec.kappa, sm.spec.m,
                                      2 * sm.spec.m + 2 * kappa + kappa)
    out = np.zeros((sm.size, len(idx)))
    for piece in sm.pieces:
        pts, wts = _cell_rule(piece.lo, piece.hi, kappa + 2)
        U = (pts - piece.center) / piece.scale
        pvals = monomials_many(U, idx) @ piece.coeffs.T  # (N, nf)
        # g_beta(y) = sum_i w_i phi(z_i) (y + delta z_i)^beta over the unit ball
        shifted = pts[:, None, :] + delta * zpts[None, :, :]  # (N, Z, n)
        mono = monomials_many(shifted.reshape(-1, n), idx).reshape(
            pts.shape[0], zpts.shape[0], len(idx)
        )
        gvals = np.einsum("z,nzd->nd", zwts, mono)
        out += np.einsum("nf,nd,n->fd", pvals, gvals, wts)
    return out


def smooth_norm_block(cube: DyadicCube, kind: str, kappa: int, eta: float,
                      spec: MollifierSpec | None = None) -> np.ndarray:
    """||b^eta||_2 for every index at once, from the halo correction
    ||b^eta||^2 = 1 + 2 <diff, b> + ||diff||^2."""
    sm = SmoothedSet(cube, kind, kappa, eta, spec)
    n = cube.dim
    cross = np.zeros(sm.size)
    diff2 = np.zeros(sm.size)
    if n == 1:
        g = sm.spec.m + 2 * kappa + 2
        breaks = _axis_breaks(
            float(cube.lower[0] - sm.delta),
            float(cube.upper[0] + sm.delta),
            [f.value + s for f in sm.faces for s in (-sm.delta, 0.0, sm.delta)],
        )
        rules = [
            _gl_nodes(float(a), float(b), g) for a, b in zip(breaks[:-1], breaks[1:])
        ]
    else:
        cells = _halo_cells(sm, cube.lower - sm.delta, cube.upper + sm.delta, [], sm.delta)
        rules = [_cell_rule(lo, hi, 6) for lo, hi in cells]
    for pts, wts in rules:
        X = pts[:, None] if n == 1 else pts
        dv = sm.diff_values(X)
        bv = base_values(cube, kind, kappa, X)
        cross += (dv * bv) @ wts
        diff2 += (dv * dv) @ wts
    return np.sqrt(1.0 + 2.0 * cross + diff2)


def smooth_l2_norm(sw: SmoothWavelet) -> float:
    """||h^eta||_2 computed from the halo correction."""
    return float(smooth_norm_block(sw.cube, sw.kind, sw.kappa, sw.eta, sw.spec)[sw.a])


def support_violation(cube: DyadicCube, kind: str, kappa: int, eta: float,
                      spec: MollifierSpec | None, rng, samples: int = 10_000) -> np.ndarray:
    """Max |b^eta| per index over random points outside the delta-fattened cube."""
    sm = SmoothedSet(cube, kind, kappa, eta, spec)
    n = cube.dim
    delta = sm.delta
    X = rng.uniform(cube.lower - 3 * delta, cube.upper + 3 * delta, size=(samples, n))
    outside = np.max(np.abs(X - cube.center), axis=1) >= cube.side / 2 + delta
    if not np.any(outside):
        return np.zeros(sm.size)
    vals = sm.values(X[outside])
    return np.max(np.abs(vals), axis=1)


# ---------------------------------------------------------------------------
# derivative sup-norm estimation

_FD_STENCILS = {
    1: (np.array([-0.5, 0.0, 0.5]), np.array([-1, 0, 1])),
    2: (np.array([1.0, -2.0, 1.0]), np.array([-1, 0, 1])),
    3: (np.array([-0.5, 1.0, 0.0, -1.0, 0.5]), np.array([-2, -1, 0, 1, 2])),
}


def grad_sup_estimate(sw: SmoothWavelet, order: int, halo_samples: int = 240) -> float:
    """Estimate of sup |d^order h^eta| by central differences on halo samples
    plus polynomial-branch samples away from the halo.

    order 0 is the plain sup norm; for n > 1 the estimate takes the max over
    pure axis derivatives.  Requires order <= mollifier smoothness - 2.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > 0 and order > sw._set.spec.m - 2:
        raise ValueError("derivative order too large for the mollifier smoothness")
    if order > 0 and order not in _FD_STENCILS:
        raise ValueError("orders above 3 are not supported")
    n = sw.cube.dim
    delta = sw.delta
    X = _halo_sample_points(sw, halo_samples)
    Xoff = _offhalo_sample_points(sw, 120)
    best = 0.0
    if order == 0:
        vals = smooth_eval_many(sw, X)
        best = float(np.max(np.abs(vals)))
        best = max(best, float(np.max(np.abs(smooth_eval_many(sw, Xoff)))))
        return best
    coeffs, offs = _FD_STENCILS[order]
    h = delta / 64.0
    for axis in range(n):
        shift = np.zeros(n)
        shift[axis] = h
        for pts in (X, Xoff):
            acc = np.zeros(pts.shape[0])
            for c, o in zip(coeffs, offs):
                if c == 0.0:
                    continue
                acc += c * smooth_eval_many(sw, pts + o * shift)
            best = max(best, float(np.max(np.abs(acc))) / h ** order)
    return best


def _halo_sample_points(sw: SmoothWavelet, budget: int) -> np.ndarray:
    n = sw.cube.dim
    delta = sw.delta
    faces = sw._set.faces
    per_face = max(4, budget // len(faces))
    k_across = 5
    k_along = max(1, per_face // k_across)
    pts = []
    across = np.linspace(-delta * 0.85, delta * 0.85, k_across)
    for f in faces:
        base = np.empty((k_along, n))
        for j in range(n):
            if j == f.axis:
                base[:, j] = f.value
            else:
                span = f.hi[j] - f.lo[j]
                base[:, j] = f.lo[j] + span * (np.arange(k_along) + 0.5) / k_along
        for off in across:
            shifted = base.copy()
            shifted[:, f.axis] += off
            pts.append(shifted)
    return np.concatenate(pts, axis=0)


def _offhalo_sample_points(sw: SmoothWavelet, budget: int) -> np.ndarray:
    # deterministic low-discrepancy-ish points inside children, clear of the halo
    n = sw.cube.dim
    pts = []
    for ch in children(sw.cube) if sw.kind == "wavelet" else [sw.cube]:
        k = max(2, int(round(budget ** (1.0 / n) / 2)))
        axes = [ch.lower[i] + (ch.upper[i] - ch.lower[i]) * (np.arange(k) + 0.5) / k
                for i in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts.append(np.stack([g.ravel() for g in grids], axis=1))
    X = np.concatenate(pts, axis=0)
    dist = faces_distance_many(X, sw._set.faces)
    keep = dist >= sw.delta * 1.5 + sw.delta / 16.0
    return X[keep] if np.any(keep) else X[:1]
