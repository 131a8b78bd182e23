import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alpertlab.dyadic import (
    DyadicCube,
    GridTruncation,
    HaloQuery,
    ancestor,
    boundary_faces,
    children,
    child_offset,
    faces_box_distance_sq,
    in_halo,
    is_carleson,
    root_cube,
    sibling_relation,
    skeleton_distance,
    skeleton_distance_many,
    skeleton_faces,
)


def random_cube(rng, n, max_level=5):
    k = int(rng.integers(0, max_level + 1))
    idx = tuple(int(v) for v in rng.integers(0, 2 ** k, size=n))
    return DyadicCube(k, idx)


def test_children_1d_bisection():
    kids = children(root_cube(1))
    assert [(c.lower[0], c.upper[0]) for c in kids] == [(0.0, 0.5), (0.5, 1.0)]


def test_children_2d_quadrants():
    kids = children(root_cube(2))
    assert len(kids) == 4
    lowers = {tuple(c.lower) for c in kids}
    assert lowers == {(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5)}


def test_children_3d_volume_partition():
    Q = DyadicCube(1, (1, 0, 1))
    kids = children(Q)
    assert len(kids) == 8
    assert math.isclose(sum(c.volume for c in kids), Q.volume, rel_tol=0, abs_tol=0)


@given(st.integers(1, 3), st.integers(0, 4), st.data())
def test_children_partition_and_nesting(n, k, data):
    idx = tuple(data.draw(st.integers(0, 2 ** k - 1)) for _ in range(n))
    Q = DyadicCube(k, idx)
    kids = children(Q)
    assert len(kids) == 2 ** n
    # pairwise disjoint with union Q: check lower corners tile the cube exactly
    assert sum(c.volume for c in kids) == Q.volume
    for i, c in enumerate(kids):
        assert ancestor(c, 1) == Q
        assert child_offset(c) == i
        assert np.all(c.lower >= Q.lower) and np.all(c.upper <= Q.upper)


def test_ancestor_examples():
    Q = DyadicCube(2, (1,))  # [1/4, 1/2)
    assert ancestor(Q, 1) == DyadicCube(1, (0,))
    assert ancestor(Q, 2) == root_cube(1)
    with pytest.raises(ValueError):
        ancestor(Q, 0)
    with pytest.raises(ValueError):
        ancestor(Q, 3)


def test_skeleton_distance_1d():
    Q = root_cube(1)
    assert skeleton_distance([0.5], Q) == 0.0
    assert math.isclose(skeleton_distance([0.3], Q), 0.2)
    assert math.isclose(skeleton_distance([-0.1], Q), 0.1)


def test_skeleton_distance_2d_example():
    Q = root_cube(2)
    assert math.isclose(skeleton_distance([0.3, 0.3], Q), 0.2)


def brute_skeleton_distance(x, Q, res=2000):
    # dense sampling of every skeleton face
    best = np.inf
    t = np.linspace(0.0, 1.0, res)
    for f in skeleton_faces(Q):
        pts = np.empty((res ** (Q.dim - 1) if Q.dim > 1 else 1, Q.dim))
        if Q.dim == 1:
            pts[0, 0] = f.value
        elif Q.dim == 2:
            other = 1 - f.axis
            pts = np.empty((res, 2))
            pts[:, f.axis] = f.value
            pts[:, other] = f.lo[other] + (f.hi[other] - f.lo[other]) * t
        else:
            raise NotImplementedError
        d = np.sqrt(np.sum((pts - np.asarray(x)) ** 2, axis=1))
        best = min(best, float(d.min()))
    return best


def test_skeleton_distance_matches_dense_oracle():
    rng = np.random.default_rng(7)
    for n in (1, 2):
        for _ in range(25):
            Q = random_cube(rng, n, max_level=3)
            x = rng.uniform(-0.2, 1.2, size=n)
            ours = skeleton_distance(x, Q)
            brute = brute_skeleton_distance(x, Q)
            assert abs(ours - brute) < 2e-3
            assert ours <= brute + 1e-12  # sampling can only overestimate


def test_skeleton_distance_many_agrees():
    rng = np.random.default_rng(3)
    Q = DyadicCube(2, (1, 2))
    X = rng.uniform(-0.5, 1.5, size=(200, 2))
    d = skeleton_distance_many(X, Q)
    for x, dv in zip(X, d):
        assert math.isclose(dv, skeleton_distance(x, Q), abs_tol=1e-14)


def test_in_halo_examples():
    Q = root_cube(1)
    assert in_halo([0.5], Q, 1e-9)
    assert not in_halo([0.25], Q, 0.1)
    assert HaloQuery(Q, 0.26).contains([0.25])


@given(st.floats(0.01, 0.2), st.floats(0.0, 1.0))
def test_halo_monotone_in_width(w, xval):
    Q = root_cube(1)
    if in_halo([xval], Q, w):
        assert in_halo([xval], Q, 2 * w)


def test_halo_volume_bound_monte_carlo():
    # |halo ∩ Q| <= 2 w * side^(n-1) * (#faces)
    rng = np.random.default_rng(11)
    Q = root_cube(2)
    w = 0.05
    X = rng.uniform(0.0, 1.0, size=(200_000, 2))
    frac = np.mean(skeleton_distance_many(X, Q) < w)
    vol = frac * Q.volume
    assert vol <= 2 * w * Q.side * len(skeleton_faces(Q)) + 0.01


def test_carleson_examples_1d():
    Q = root_cube(1)
    assert not is_carleson(DyadicCube(2, (2,)), Q)  # [1/2, 3/4): interior
    assert is_carleson(DyadicCube(2, (0,)), Q)  # [0, 1/4): shares x=0
    assert is_carleson(DyadicCube(2, (3,)), Q)  # [3/4, 1): shares x=1
    assert is_carleson(DyadicCube(1, (0,)), Q)  # children are Carleson cubes
    assert not is_carleson(Q, Q)
    assert not is_carleson(Q, DyadicCube(1, (0,)))  # bigger cube is never Carleson


def test_carleson_2d_face_containment():
    Q = root_cube(2)
    assert is_carleson(DyadicCube(2, (0, 1)), Q)  # hugging x=0 face
    assert not is_carleson(DyadicCube(2, (1, 1)), Q)  # interior cube
    inner = DyadicCube(2, (3, 2))  # shares x=1 face of Q
    assert is_carleson(inner, Q)


def test_sibling_relations():
    a = DyadicCube(1, (0,))
    b = DyadicCube(1, (1,))
    assert sibling_relation(a, b) == "dyadic_sibling"
    c = DyadicCube(2, (1,))  # [1/4,1/2)
    d = DyadicCube(2, (2,))  # [1/2,3/4): touch at 1/2, parents differ
    assert sibling_relation(c, d) == "sibling"
    assert sibling_relation(a, DyadicCube(2, (2,))) == "none"  # sides differ
    assert sibling_relation(a, a) == "none"
    # diagonal touch counts in 2-D
    e = DyadicCube(1, (0, 0))
    f = DyadicCube(1, (1, 1))
    assert sibling_relation(e, f) == "dyadic_sibling"


def test_enumeration_counts_and_order():
    t = GridTruncation(1, 1)
    cubes = t.cubes()
    assert [(c.level, c.index) for c in cubes] == [(0, (0,)), (1, (0,)), (1, (1,))]
    assert GridTruncation(1, 3).num_cubes == 15
    assert len(GridTruncation(1, 3).cubes()) == 15
    assert GridTruncation(2, 2).num_cubes == 21
    assert len(GridTruncation(2, 2).cubes()) == 21


@given(st.integers(1, 3), st.integers(0, 3))
def test_enumeration_formula(n, L):
    t = GridTruncation(n, L)
    assert len(t.cubes()) == sum(2 ** (n * k) for k in range(L + 1))


def test_faces_box_distance():
    Q = root_cube(1)
    faces = skeleton_faces(Q)
    assert faces_box_distance_sq(faces, [0.2], [0.3]) == pytest.approx(0.04)
    assert faces_box_distance_sq(faces, [0.45], [0.55]) == 0.0
    bfaces = boundary_faces(Q)
    assert faces_box_distance_sq(bfaces, [0.45], [0.55]) == pytest.approx(0.45 ** 2)
