"""Dyadic cube geometry on the unit cube.

Cubes are the half-open boxes 2^-k * ([0,1)^n + j).  Everything here is pure
integer/float arithmetic on immutable values, so all operations are safe to
call concurrently.  Side lengths and face coordinates are powers of two and
therefore exact in binary floating point up to the depths used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class DyadicCube:
    """The cube prod_i [j_i 2^-k, (j_i+1) 2^-k) with level k and index j."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if not all(0 <= j < 2 ** self.level for j in self.index):
            raise ValueError(f"index {self.index} out of range at level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 0.5) * self.side

    def contains(self, x) -> bool:
        """Half-open membership: lower <= x < upper in every coordinate."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x < self.upper))


def root_cube(dim: int) -> DyadicCube:
    return DyadicCube(0, (0,) * dim)


def children(cube: DyadicCube) -> list[DyadicCube]:
    """The 2^n dyadic children, ordered by their offset pattern in {0,1}^n."""
    n = cube.dim
    base = tuple(2 * j for j in cube.index)
    out = []
    for mask in range(2 ** n):
        eps = tuple((mask >> (n - 1 - i)) & 1 for i in range(n))
        out.append(DyadicCube(cube.level + 1, tuple(b + e for b, e in zip(base, eps))))
    return out


def child_offset(cube: DyadicCube) -> int:
    """Position of `cube` in children(parent), matching the children() order."""
    n = cube.dim
    mask = 0
    for i, j in enumerate(cube.index):
        mask |= (j & 1) << (n - 1 - i)
    return mask


def ancestor(cube: DyadicCube, s: int) -> DyadicCube:
    """The unique cube s levels up containing this one; requires 1 <= s <= level."""
    if s < 1:
        raise ValueError("ancestor order s must be >= 1")
    if s > cube.level:
        raise ValueError(f"cube at level {cube.level} has no ancestor {s} levels up")
    return DyadicCube(cube.level - s, tuple(j >> s for j in cube.index))


@dataclass(frozen=True)
class Face:
    """An (n-1)-face {x : x_axis = value, lo <= x_j <= hi on the others}."""

    axis: int
    value: float
    lo: tuple[float, ...]
    hi: tuple[float, ...]


def skeleton_faces(cube: DyadicCube) -> list[Face]:
    """Faces making up the skeleton: the union of the child boundaries.

    This is the full grid of walls {x_i in {lower, mid, upper}} clipped to the
    closed cube, 3n faces in all.
    """
    lo, hi = cube.lower, cube.upper
    mid = cube.center
    faces = []
    for axis in range(cube.dim):
        for v in (lo[axis], mid[axis], hi[axis]):
            faces.append(Face(axis, float(v), tuple(lo), tuple(hi)))
    return faces


def boundary_faces(cube: DyadicCube) -> list[Face]:
    """The 2n outer faces of the cube (used for functions with no interior jumps)."""
    lo, hi = cube.lower, cube.upper
    faces = []
    for axis in range(cube.dim):
        for v in (lo[axis], hi[axis]):
            faces.append(Face(axis, float(v), tuple(lo), tuple(hi)))
    return faces


def _face_distance_sq(x: np.ndarray, face: Face) -> float:
    d2 = (x[face.axis] - face.value) ** 2
    for j in range(x.shape[0]):
        if j == face.axis:
            continue
        g = max(face.lo[j] - x[j], 0.0, x[j] - face.hi[j])
        d2 += g * g
    return d2


def faces_distance(x, faces: list[Face]) -> float:
    """Euclidean distance from a point to a union of axis-aligned faces."""
    x = np.asarray(x, dtype=float)
    return math.sqrt(min(_face_distance_sq(x, f) for f in faces))


def skeleton_distance(x, cube: DyadicCube) -> float:
    """Euclidean distance from x to the skeleton S_Q (union of child boundaries)."""
    return faces_distance(x, skeleton_faces(cube))


def faces_distance_many(X, faces: list[Face]) -> np.ndarray:
    """Vectorized faces_distance over rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    best = np.full(X.shape[0], np.inf)
    for f in faces:
        d2 = (X[:, f.axis] - f.value) ** 2
        for j in range(X.shape[1]):
            if j == f.axis:
                continue
            g = np.maximum(f.lo[j] - X[:, j], 0.0)
            np.maximum(g, X[:, j] - f.hi[j], out=g)
            d2 += g * g
        np.minimum(best, d2, out=best)
    return np.sqrt(best)


def skeleton_distance_many(X, cube: DyadicCube) -> np.ndarray:
    """Vectorized skeleton_distance over rows of X (shape (N, n))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lo, hi = cube.lower, cube.upper
    mid = cube.center
    n = cube.dim
    gaps = np.maximum(lo - X, 0.0)
    np.maximum(gaps, X - hi, out=gaps)
    box_d2 = np.sum(gaps ** 2, axis=1)
    best = np.full(X.shape[0], np.inf)
    for axis in range(n):
        rest = box_d2 - gaps[:, axis] ** 2
        for v in (lo[axis], mid[axis], hi[axis]):
            best = np.minimum(best, rest + (X[:, axis] - v) ** 2)
    return np.sqrt(best)


def in_halo(x, cube: DyadicCube, width: float) -> bool:
    """True iff dist(x, S_Q) < width.  Callers standardize on width = eta * side."""
    if width <= 0:
        raise ValueError("halo width must be positive")
    return skeleton_distance(x, cube) < width


@dataclass(frozen=True)
class HaloQuery:
    """Membership query for the halo {x : dist(x, S_Q) < width}."""

    cube: DyadicCube
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("halo width must be positive")

    def contains(self, x) -> bool:
        return in_halo(x, self.cube, self.width)

    def contains_many(self, X) -> np.ndarray:
        return skeleton_distance_many(X, self.cube) < self.width


def faces_box_distance_sq(faces: list[Face], lo, hi) -> float:
    """Squared distance between a union of faces and a closed box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best = math.inf
    for f in faces:
        d2 = max(lo[f.axis] - f.value, 0.0, f.value - hi[f.axis]) ** 2
        for j in range(lo.shape[0]):
            if j == f.axis:
                continue
            g = max(lo[j] - f.hi[j], 0.0, f.lo[j] - hi[j])
            d2 += g * g
        best = min(best, d2)
    return best


def _scaled_bounds(cube: DyadicCube, level: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # integer lower/upper corners of the cube at a finer reference level
    s = level - cube.level
    lo = tuple(j << s for j in cube.index)
    hi = tuple((j + 1) << s for j in cube.index)
    return lo, hi


def is_carleson(inner: DyadicCube, outer: DyadicCube) -> bool:
    """True iff l(I) < l(Q) and I shares an (n-1)-face with Q.

    Sharing a face means a full face of I lies inside a face of Q; I may sit
    inside or outside Q.  All comparisons are exact integer arithmetic.
    """
    if inner.dim != outer.dim:
        raise ValueError("cubes must have equal dimension")
    if inner.level <= outer.level:
        return False
    lvl = inner.level
    ilo, ihi = _scaled_bounds(inner, lvl)
    olo, ohi = _scaled_bounds(outer, lvl)
    n = inner.dim
    for axis in range(n):
        if not (ilo[axis] in (olo[axis], ohi[axis]) or ihi[axis] in (olo[axis], ohi[axis])):
            continue
        if all(olo[j] <= ilo[j] and ihi[j] <= ohi[j] for j in range(n) if j != axis):
            return True
    return False


def sibling_relation(a: DyadicCube, b: DyadicCube) -> str:
    """Classify a pair: 'dyadic_sibling', 'sibling', or 'none'.

    Siblings have equal side length, are disjoint, and have touching closures;
    dyadic siblings additionally share a parent.
    """
    if a.dim != b.dim:
        raise ValueError("cubes must have equal dimension")
    if a.level != b.level or a.index == b.index:
        return "none"
    if any(abs(ja - jb) > 1 for ja, jb in zip(a.index, b.index)):
        return "none"
    if all(ja >> 1 == jb >> 1 for ja, jb in zip(a.index, b.index)):
        return "dyadic_sibling"
    return "sibling"


@dataclass(frozen=True)
class GridTruncation:
    """All dyadic cubes inside [0,1)^n down to a finest level."""

    dim: int
    max_depth: int

    def __post_init__(self):
        if self.dim < 1 or self.max_depth < 0:
            raise ValueError("need dim >= 1 and max_depth >= 0")

    @property
    def root(self) -> DyadicCube:
        return root_cube(self.dim)

    @property
    def num_cubes(self) -> int:
        return sum(2 ** (self.dim * k) for k in range(self.max_depth + 1))

    def cubes_at_level(self, k: int) -> list[DyadicCube]:
        if not 0 <= k <= self.max_depth:
            raise ValueError(f"level {k} outside truncation 0..{self.max_depth}")
        return _level_cubes(self.dim, k)

    def cubes(self) -> list[DyadicCube]:
        """Deterministic enumeration: level ascending, then lexicographic index."""
        out = []
        for k in range(self.max_depth + 1):
            out.extend(self.cubes_at_level(k))
        return out


@lru_cache(maxsize=None)
def _level_cubes(dim: int, k: int) -> list[DyadicCube]:
    side_count = 2 ** k
    idx = np.indices((side_count,) * dim).reshape(dim, -1).T
    return [DyadicCube(k, tuple(int(v) for v in row)) for row in idx]
