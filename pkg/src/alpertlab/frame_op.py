"""The frame operator S_eta on a grid truncation: assembly, inversion,
reproducing formula, square functions, and discretized L^p norms.

Coordinates follow the truncated expansion layout: the root scaling block
first, then one wavelet block per cube, levels ascending.  The matrix entry
M[j, i] = <b_i^eta, b_j> represents the projection of S_eta onto the
truncation span; pruned entries are exact zeros justified by the support
analysis of the smoothed-plain inner products.  All assembly sums run in a
fixed deterministic order, so results are independent of any parallel
scheduling of the pair work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alpert import TruncatedExpansion, build_alpert, expand, reference, synthesize
from .dyadic import DyadicCube, GridTruncation, faces_box_distance_sq, skeleton_distance_many
from .mollifier import MollifierSpec
from .polybasis import gauss_rule
from .smooth_wavelet import (
    SmoothedSet,
    break_faces,
    default_mollifier,
    num_funcs,
    smooth_inner_block,
)

MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit generator; identical sequences in any language.

    state += 0x9E3779B97F4A7C15; z = state; z = (z ^ z>>30) * 0xBF58476D1CE4E5B9;
    z = (z ^ z>>27) * 0x94D049BB133111EB; output z ^ z>>31 (all mod 2^64).
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return (z ^ (z >> 31)) & MASK64

    def uniform(self) -> float:
        return self.next_u64() / 2.0 ** 64

    def symmetric(self) -> float:
        """Uniform in (-1, 1)."""
        return 2.0 * self.uniform() - 1.0


@dataclass(frozen=True)
class EtaSweepConfig:
    """Smoothing sweep eta = 2^-beta plus the L^p exponents to measure."""

    betas: tuple[int, ...]
    ps: tuple[float, ...] = (1.5, 2.0, 3.0)

    def __post_init__(self):
        if any(b < 1 for b in self.betas):
            raise ValueError("every eta = 2^-beta must be < 1")

    @property
    def etas(self) -> tuple[float, ...]:
        return tuple(2.0 ** -b for b in self.betas)


def basis_labels(trunc: GridTruncation, kappa: int) -> list[tuple[str, DyadicCube, int]]:
    """(kind, cube, index) per coordinate, matching TruncatedExpansion.as_vector."""
    ref = reference(trunc.dim, kappa)
    labels = [("scaling", trunc.root, j) for j in range(ref.d)]
    for k in range(trunc.max_depth):
        for Q in trunc.cubes_at_level(k):
            labels.extend(("wavelet", Q, a) for a in range(ref.num_wavelets))
    return labels


@dataclass
class FrameMatrix:
    """Dense coordinate form of P_V S_eta on the truncation."""

    trunc: GridTruncation
    eta: float
    kappa: int
    spec: MollifierSpec
    matrix: np.ndarray
    labels: list
    pairs_total: int = 0
    pairs_pruned: int = 0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def sparsity(self) -> float:
        nnz = int(np.count_nonzero(self.matrix))
        return nnz / self.matrix.size


_block_cache: dict = {}


def _pair_cache_key(kind_i, ci: DyadicCube, kind_j, cj: DyadicCube, eta, kappa, spec, quality):
    if kind_i != "wavelet" or kind_j != "wavelet":
        return None  # scaling blocks are root-anchored; no translation symmetry
    f = max(ci.level, cj.level)
    ri = tuple(v << (f - ci.level) for v in ci.index)
    rj = tuple(v << (f - cj.level) for v in cj.index)
    rel = tuple(b - a for a, b in zip(ri, rj))
    return (cj.level - ci.level, rel, eta, kappa, spec.dim, spec.kappa, spec.m, quality)


def assemble(trunc: GridTruncation, eta: float, kappa: int,
             spec: MollifierSpec | None = None,
             cell_frac: float = 1.0, g_cell: int | None = None) -> FrameMatrix:
    """All surviving inner products <b_i^eta, b_j>, deterministically ordered."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    if spec is None:
        spec = default_mollifier(trunc.dim, kappa)
    ref = reference(trunc.dim, kappa)
    blocks: list[tuple[str, DyadicCube]] = [("scaling", trunc.root)]
    for k in range(trunc.max_depth):
        blocks.extend(("wavelet", Q) for Q in trunc.cubes_at_level(k))
    sizes = [num_funcs(c, kind, kappa) for kind, c in blocks]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    N = int(offsets[-1])
    M = np.zeros((N, N))
    pruned = 0
    quality = (cell_frac, g_cell)
    for bi, (kind_i, ci) in enumerate(blocks):
        delta_i = eta * ci.side
        faces_i = break_faces(ci, kind_i)
        for bj, (kind_j, cj) in enumerate(blocks):
            same = bi == bj
            if not same and faces_box_distance_sq(faces_i, cj.lower, cj.upper) >= delta_i ** 2:
                pruned += 1
                continue
            key = _pair_cache_key(kind_i, ci, kind_j, cj, eta, kappa, spec, quality)
            block = _block_cache.get(key)
            if block is None:
                block = smooth_inner_block(
                    ci, cj, eta, kappa, spec, kind_i=kind_i, kind_j=kind_j,
                    cell_frac=cell_frac, g_cell=g_cell,
                )
                if key is not None:
                    _block_cache[key] = block
            # rows are the plain test function b_j, columns the smoothed b_i
            M[offsets[bj]: offsets[bj] + sizes[bj], offsets[bi]: offsets[bi] + sizes[bi]] = block.T
        # (row loop inner for locality; order fixed either way)
    return FrameMatrix(trunc, eta, kappa, spec, M, basis_labels(trunc, kappa),
                       pairs_total=len(blocks) ** 2, pairs_pruned=pruned)


def deviation(fm: FrameMatrix | np.ndarray, iters: int = 50,
              tol: float = 1e-13, max_iters: int = 5000) -> float:
    """||I - M||_2 by power iteration on (I-M)(I-M)^T, deterministic start.

    Runs at least `iters` steps and continues until the estimate settles to
    `tol`, so transposed assemblies agree to the reporting precision.
    """
    M = fm.matrix if isinstance(fm, FrameMatrix) else np.asarray(fm)
    A = np.eye(M.shape[0]) - M
    B = A @ A.T
    v = np.ones(M.shape[0]) + 1e-3 * np.arange(M.shape[0])
    v /= np.linalg.norm(v)
    prev = -1.0
    sigma2 = 0.0
    for k in range(max_iters):
        w = B @ v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        sigma2 = float(v @ (B @ v))
        if k >= iters - 1 and abs(sigma2 - prev) <= tol * max(sigma2, 1e-30):
            break
        prev = sigma2
    return math.sqrt(max(sigma2, 0.0))


class NeumannDivergenceError(RuntimeError):
    def __init__(self, residuals):
        super().__init__(
            f"Neumann iteration failed to converge: residuals {residuals[:3]} ... {residuals[-1]:.3e}"
        )
        self.residuals = residuals


def neumann_solve(fm: FrameMatrix | np.ndarray, g: np.ndarray, tol: float = 1e-10,
                  max_iter: int = 200) -> tuple[np.ndarray, list[float]]:
    """Solve M c = g by c <- c + (g - M c); requires ||I - M|| < 1 to converge.

    tol = 0 runs exactly max_iter refinement steps (fixed-budget mode);
    otherwise exceeding max_iter raises with the residual history.
    """
    M = fm.matrix if isinstance(fm, FrameMatrix) else np.asarray(fm)
    g = np.asarray(g, dtype=float)
    gn = float(np.linalg.norm(g))
    c = g.copy()
    history: list[float] = []
    if gn == 0.0:
        return np.zeros_like(g), [0.0]
    for _ in range(max_iter):
        r = g - M @ c
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if tol > 0.0 and rn <= tol * gn:
            return c, history
        c = c + r
    if tol == 0.0:
        history.append(float(np.linalg.norm(g - M @ c)))
        return c, history
    raise NeumannDivergenceError(history)


@dataclass
class FunctionSample:
    """Evaluator plus a composite Gauss grid aligned to the dyadic mesh.

    Cells sit extra_levels below the truncation so discontinuities of
    grid-aligned functions land on cell boundaries.
    """

    f: object
    trunc: GridTruncation
    extra_levels: int = 4
    g: int = 8
    _pts: np.ndarray = field(init=False, repr=False)
    _wts: np.ndarray = field(init=False, repr=False)
    _vals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.trunc.dim
        lev = self.trunc.max_depth + self.extra_levels
        side = 2.0 ** -lev
        rule = gauss_rule(self.g, np.zeros(n), np.full(n, side))
        counts = 2 ** lev
        idx = np.indices((counts,) * n).reshape(n, -1).T
        pts = (idx[:, None, :] * side + rule.points[None, :, :]).reshape(-1, n)
        wts = np.tile(rule.weights, idx.shape[0])
        self._pts, self._wts = pts, wts
        self._vals = np.asarray(self.f(pts), dtype=float).ravel()

    def lp(self, p: float) -> float:
        if not 1.0 < p < np.inf:
            raise ValueError("p must lie in (1, inf)")
        return float(np.sum(self._wts * np.abs(self._vals) ** p) ** (1.0 / p))

    def l2(self) -> float:
        return self.lp(2.0)


def lp_norm(fs: FunctionSample, p: float) -> float:
    return fs.lp(p)


def reproduce(f, trunc: GridTruncation, eta: float, kappa: int, tol: float = 1e-10,
              max_iter: int = 200, ps: tuple[float, ...] = (1.5, 3.0),
              fm: FrameMatrix | None = None, spec: MollifierSpec | None = None) -> dict:
    """Run f -> expand -> (S_eta)^-1 by Neumann -> smooth resynthesis.

    Residuals compare the truncation-span projection of the resynthesized sum
    against f: the plain coefficients of sum_i z_i b_i^eta are M z, so the
    projected residual function is synthesize(M z - c).  (The unprojected sum
    carries O(sqrt(eta)) mollification energy outside the span; on an infinite
    grid it cancels telescopically, on a truncation it cannot.)
    """
    if fm is None:
        fm = assemble(trunc, eta, kappa, spec)
    c = expand(f, trunc, kappa).as_vector()
    z, history = neumann_solve(fm, c, tol=tol, max_iter=max_iter)
    r = fm.matrix @ z - c
    cn = float(np.linalg.norm(c))
    out = {
        "residual_l2": float(np.linalg.norm(r)) / cn if cn else 0.0,
        "iterations": len(history),
        "residual_history": history,
        "residual_lp": {},
    }
    if ps:
        rfun = synthesize(TruncatedExpansion.from_vector(r, trunc, kappa))
        for p in ps:
            denom = FunctionSample(f, trunc).lp(p)
            out["residual_lp"][p] = FunctionSample(rfun.eval_many, trunc).lp(p) / denom
    return out


# ---------------------------------------------------------------------------
# square functions


def square_function(expn: TruncatedExpansion, X, variant: str, eta: float | None = None,
                    spec: MollifierSpec | None = None) -> np.ndarray:
    """Pointwise square function of the expansion over the truncated sums.

    variant 'plain': per-coordinate Alpert terms |c h(x)|^2 (scaling included);
    variant 'halo':  halo-indicator form sum_I (|c_I| / sqrt|I| 1_(I cap H))^2
                     over the wavelet blocks, halo width eta * l(I);
    variant 'smooth': like 'plain' with every basis function mollified.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    trunc, kappa = expn.trunc, expn.kappa
    ref = reference(trunc.dim, kappa)
    acc = np.zeros(X.shape[0])
    if variant == "halo":
        if eta is None:
            raise ValueError("variant 'halo' needs eta")
        for k in range(trunc.max_depth):
            for qi, Q in enumerate(trunc.cubes_at_level(k)):
                cnorm2 = float(expn.wavelets[k][qi] @ expn.wavelets[k][qi])
                if cnorm2 == 0.0:
                    continue
                width = eta * Q.side
                inside = np.all((X >= Q.lower) & (X < Q.upper), axis=1)
                hal = skeleton_distance_many(X, Q) < width
                acc += np.where(inside & hal, cnorm2 / Q.volume, 0.0)
        return np.sqrt(acc)
    if variant == "plain":
        from .alpert import ScalingBasis

        sv = ScalingBasis(trunc.root, kappa).eval_many(X)
        acc += np.sum((sv * expn.scaling) ** 2, axis=1)
        for k in range(trunc.max_depth):
            for qi, Q in enumerate(trunc.cubes_at_level(k)):
                coeffs = expn.wavelets[k][qi]
                if not np.any(coeffs):
                    continue
                vals = build_alpert(Q, kappa).eval_all(X)
                acc += np.sum((vals * coeffs) ** 2, axis=1)
        return np.sqrt(acc)
    if variant == "smooth":
        if eta is None:
            raise ValueError("variant 'smooth' needs eta")
        if spec is None:
            spec = default_mollifier(trunc.dim, kappa)
        sm = SmoothedSet(trunc.root, "scaling", kappa, eta, spec)
        acc += np.sum((sm.values(X).T * expn.scaling) ** 2, axis=1)
        for k in range(trunc.max_depth):
            for qi, Q in enumerate(trunc.cubes_at_level(k)):
                coeffs = expn.wavelets[k][qi]
                if not np.any(coeffs):
                    continue
                delta = eta * Q.side
                near = np.all(
                    (X >= Q.lower - delta) & (X <= Q.upper + delta), axis=1
                )
                if not np.any(near):
                    continue
                sm = SmoothedSet(Q, "wavelet", kappa, eta, spec)
                vals = sm.values(X[near]).T
                acc[near] += np.sum((vals * coeffs) ** 2, axis=1)
        return np.sqrt(acc)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# standard test set and ratio experiments


def standard_test_set(trunc: GridTruncation, kappa: int, seed: int = 20240801):
    """Deterministic test functions: random in-span expansion, ball indicator,
    Gaussian bump, and a single Alpert wavelet."""
    n = trunc.dim
    ref = reference(n, kappa)
    rng = SplitMix64(seed)
    scaling = np.array([rng.symmetric() for _ in range(ref.d)])
    blocks = []
    for k in range(trunc.max_depth):
        cnt = 2 ** (n * k)
        blk = np.array(
            [[rng.symmetric() * 2.0 ** -k for _ in range(ref.num_wavelets)] for _ in range(cnt)]
        )
        blocks.append(blk)
    rand_expn = TruncatedExpansion(trunc, kappa, scaling, blocks)
    rand_f = synthesize(rand_expn).eval_many

    center = np.full(n, 0.37)
    ball = lambda X: (np.sum((np.atleast_2d(X) - center) ** 2, axis=1) < 0.3 ** 2).astype(float)
    gcent = np.full(n, 0.45)
    gauss = lambda X: np.exp(-np.sum((np.atleast_2d(X) - gcent) ** 2, axis=1) / (2 * 0.15 ** 2))
    ws = build_alpert(trunc.root, kappa)
    wav = lambda X: ws.eval_many(0, X)
    return [
        ("random_expansion", rand_f, True),
        ("ball_indicator", ball, False),
        ("gaussian_bump", gauss, False),
        ("single_wavelet", wav, True),
    ]


def frame_ratio_experiment(test_set, p: float, eta: float, trunc: GridTruncation,
                           kappa: int, variant: str = "smooth",
                           spec: MollifierSpec | None = None) -> list[dict]:
    """r(f) = || (sum |Delta^eta f|^2)^(1/2) ||_p / ||f||_p per test function."""
    rows = []
    for name, f, in_span in test_set:
        expn = expand(f, trunc, kappa)
        sq = lambda X: square_function(expn, X, variant, eta=eta, spec=spec)
        num = FunctionSample(sq, trunc).lp(p)
        den = FunctionSample(f, trunc).lp(p)
        rows.append({"f": name, "p": p, "eta": eta, "ratio": num / den, "in_span": in_span})
    return rows


def halo_square_ratio(f, trunc: GridTruncation, kappa: int, eta: float) -> float:
    """||R_eta f||_2 / ||f||_2 with exact interval measures in one dimension."""
    expn = expand(f, trunc, kappa)
    if trunc.dim == 1:
        terms: list[tuple[float, list[tuple[float, float]]]] = []
        for k in range(trunc.max_depth):
            for qi, Q in enumerate(trunc.cubes_at_level(k)):
                cn2 = float(expn.wavelets[k][qi] @ expn.wavelets[k][qi])
                if cn2 == 0.0:
                    continue
                w = eta * Q.side
                lo, mid, hi = Q.lower[0], Q.center[0], Q.upper[0]
                ivals = _clip_union(
                    [(lo - w, lo + w), (mid - w, mid + w), (hi - w, hi + w)], lo, hi
                )
                terms.append((cn2 / Q.volume, ivals))
        # exact integral of the sum of squared indicator terms
        cuts = sorted({x for _, ivals in terms for seg in ivals for x in seg})
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            midp = 0.5 * (a + b)
            val = sum(c for c, ivals in terms if any(x0 <= midp < x1 for x0, x1 in ivals))
            total += val * (b - a)
        num = math.sqrt(total)
    else:
        sq = lambda X: square_function(expn, X, "halo", eta=eta)
        num = FunctionSample(sq, trunc).lp(2.0)
    den = FunctionSample(f, trunc).lp(2.0)
    return num / den


def _clip_union(intervals, lo, hi):
    out = []
    for a, b in intervals:
        a, b = max(a, lo), min(b, hi)
        if a < b:
            out.append((a, b))
    merged = []
    for a, b in sorted(out):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged
