import math

import numpy as np
import pytest

from alpertlab.clipmoments import ball_box_moments, unit_ball_moments


def test_full_ball_inside_box():
    M = ball_box_moments(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 4)
    assert M[0, 0] == pytest.approx(math.pi, abs=1e-13)
    assert M[2, 0] == pytest.approx(math.pi / 4, abs=1e-13)
    assert M[1, 0] == 0.0
    assert M[2, 2] == pytest.approx(math.pi / 24, abs=1e-13)


def test_box_inside_ball():
    lo, hi = np.array([-0.3, -0.2]), np.array([0.4, 0.5])
    M = ball_box_moments(lo, hi, 3)
    exact = (hi[0] ** 2 - lo[0] ** 2) / 2 * (hi[1] - lo[1])
    assert M[1, 0] == pytest.approx(exact, abs=1e-15)


def test_disjoint():
    M = ball_box_moments(np.array([1.2, 1.2]), np.array([2.0, 2.0]), 3)
    assert np.all(M == 0.0)


def test_half_plane_strip_oracle():
    # strip [a,b] x R clipped to the disk: compare with a dense 1-D integral
    a, b = -0.4, 0.7
    M = ball_box_moments(np.array([a, -2.0]), np.array([b, 2.0]), 6)
    y, w = np.polynomial.legendre.leggauss(300)
    y = a + 0.5 * (b - a) * (y + 1)
    w = 0.5 * (b - a) * w
    rho = np.sqrt(1.0 - y ** 2)
    for p in range(7):
        exact = float(((y ** p) * 2.0 * rho) @ w)
        assert M[p, 0] == pytest.approx(exact, abs=1e-12)
    for p in range(7):
        # second-axis square moment: int y2^2 over [-rho, rho] = 2 rho^3 / 3
        exact = float(((y ** p) * (2.0 / 3.0) * rho ** 3) @ w)
        assert M[p, 2] == pytest.approx(exact, abs=1e-12)


def test_additivity_across_splits_2d():
    rng = np.random.default_rng(4)
    for _ in range(20):
        lo = rng.uniform(-1.5, 0.5, size=2)
        hi = lo + rng.uniform(0.2, 1.6, size=2)
        cut = rng.uniform(lo[0] + 0.05, hi[0] - 0.05)
        D = 8
        whole = ball_box_moments(lo, hi, D)
        left = ball_box_moments(lo, np.array([cut, hi[1]]), D)
        right = ball_box_moments(np.array([cut, lo[1]]), hi, D)
        assert np.max(np.abs(whole - (left + right))) < 1e-13


def test_monte_carlo_2d():
    rng = np.random.default_rng(9)
    lo = np.array([-0.8, 0.1])
    hi = np.array([0.5, 1.4])
    M = ball_box_moments(lo, hi, 3)
    N = 2_000_000
    X = rng.uniform(lo, hi, size=(N, 2))
    inside = np.sum(X ** 2, axis=1) < 1.0
    vol = float(np.prod(hi - lo))
    for p in range(3):
        for q in range(3):
            mc = vol * np.mean(np.where(inside, X[:, 0] ** p * X[:, 1] ** q, 0.0))
            assert M[p, q] == pytest.approx(mc, abs=4e-3)


def test_rotational_symmetry_2d():
    # swapping the axes transposes the table
    lo = np.array([-0.7, 0.2])
    hi = np.array([0.6, 1.1])
    M = ball_box_moments(lo, hi, 5)
    Mt = ball_box_moments(lo[::-1].copy(), hi[::-1].copy(), 5)
    assert np.max(np.abs(M - Mt.T)) < 1e-13


def test_additivity_3d():
    rng = np.random.default_rng(11)
    for _ in range(4):
        lo = rng.uniform(-1.2, 0.3, size=3)
        hi = lo + rng.uniform(0.3, 1.4, size=3)
        cut = rng.uniform(lo[1] + 0.05, hi[1] - 0.05)
        D = 4
        whole = ball_box_moments(lo, hi, D)
        bottom = ball_box_moments(lo, np.array([hi[0], cut, hi[2]]), D)
        top = ball_box_moments(np.array([lo[0], cut, lo[2]]), hi, D)
        assert np.max(np.abs(whole - (bottom + top))) < 5e-11


def test_3d_ball_and_octant():
    M = ball_box_moments(np.array([-2.0] * 3), np.array([2.0] * 3), 2)
    assert M[0, 0, 0] == pytest.approx(4 * math.pi / 3, abs=1e-11)
    oct_ = ball_box_moments(np.array([0.0] * 3), np.array([2.0] * 3), 2)
    assert oct_[0, 0, 0] == pytest.approx(math.pi / 6, abs=1e-11)
    assert unit_ball_moments(3, 2)[2, 0, 0] == pytest.approx(4 * math.pi / 15, abs=1e-13)
