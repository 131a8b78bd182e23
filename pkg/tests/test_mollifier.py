import math

import numpy as np
import pytest

from alpertlab.mollifier import (
    MollifierSpec,
    build_mollifier,
    bump_ball_moment,
    eval_mollifier,
    eval_mollifier_many,
    moment,
    polynomial_expansion,
)
from alpertlab.polybasis import ball_rule, gauss_rule, integrate, multi_indices


def quad_moment(spec, delta, gamma, g=40):
    if spec.dim == 1:
        rule = gauss_rule(g, [-delta] * spec.dim, [delta] * spec.dim)
    else:
        rule = ball_rule(spec.dim, 2 * spec.m + 2 * spec.kappa + sum(gamma), [0.0] * spec.dim, delta)
    return integrate(
        lambda X: eval_mollifier_many(spec, delta, X)
        * np.prod(X ** np.array(gamma), axis=1),
        rule,
    )


def test_bump_moment_oracle_1d():
    # integral of (1 - x^2) x^2 over [-1, 1] = 4/15
    assert bump_ball_moment(1, 1, (1,)) == pytest.approx(4 / 15, abs=1e-15)
    assert bump_ball_moment(1, 1, (0,)) == pytest.approx(4 / 3, abs=1e-15)


def test_kappa1_normalization_is_3_4():
    spec = build_mollifier(1, 1, m=1)
    assert spec.p_coeffs[0] == pytest.approx(0.75, abs=1e-14)
    assert eval_mollifier(spec, 1.0, [0.0]) == pytest.approx(0.75)


def test_kappa2_same_as_kappa1_by_parity():
    s1 = build_mollifier(1, 1, m=1)
    s2 = build_mollifier(1, 2, m=1)
    xs = np.linspace(-1, 1, 11)[:, None]
    assert np.allclose(
        eval_mollifier_many(s1, 1.0, xs), eval_mollifier_many(s2, 1.0, xs)
    )


def test_kappa3_m2_correction_oracle():
    # 2x2 system with exact moments: p(x) = 105/64 - (315/64) x^2
    spec = build_mollifier(1, 3, m=2)
    assert spec.p_coeffs[0] == pytest.approx(105 / 64, abs=1e-12)
    assert spec.p_coeffs[1] == pytest.approx(-315 / 64, abs=1e-12)


@pytest.mark.parametrize("n,kappa", [(1, 1), (1, 3), (1, 6), (2, 2), (2, 4), (3, 3)])
def test_moment_system(n, kappa):
    spec = build_mollifier(n, kappa)
    assert moment(spec, (0,) * n) == pytest.approx(1.0, abs=1e-12)
    for gamma in multi_indices(n, kappa)[1:]:
        assert abs(moment(spec, gamma)) < 1e-12


def test_odd_moments_zero():
    spec = build_mollifier(2, 3)
    assert moment(spec, (1, 0)) == 0.0
    assert moment(spec, (1, 2)) == 0.0


def test_scaled_unit_integral_and_moments():
    spec = build_mollifier(1, 3)
    for delta in (1.0, 0.5, 0.125):
        assert quad_moment(spec, delta, (0,)) == pytest.approx(1.0, abs=1e-10)
        assert abs(quad_moment(spec, delta, (1,))) < 1e-10
        assert abs(quad_moment(spec, delta, (2,))) < 1e-10


def test_support_boundary():
    spec = build_mollifier(2, 2)
    assert eval_mollifier(spec, 0.25, [0.25, 0.0]) == 0.0
    assert eval_mollifier(spec, 0.25, [0.3, 0.3]) == 0.0
    assert eval_mollifier(spec, 0.25, [0.0, 0.0]) != 0.0


def test_smoothness_across_support_boundary():
    # phi is C^(m-1); finite differences of orders <= m-1 stay bounded across |x|=1
    spec = build_mollifier(1, 2, m=4)
    h = 1e-3
    xs = np.arange(1.0 - 20 * h, 1.0 + 20 * h, h)[:, None]
    vals = eval_mollifier_many(spec, 1.0, xs)
    for order in range(1, spec.m):
        vals = np.diff(vals) / h
        assert np.max(np.abs(vals)) < 1e3  # bounded derivative, no blow-up


def test_invalid_m_rejected():
    with pytest.raises(ValueError):
        build_mollifier(1, 3, m=0)


def test_polynomial_reproduction():
    # (m_alpha * phi)(x) = x^alpha for |alpha| < kappa, via quadrature
    rng = np.random.default_rng(42)
    for n, kappa in [(1, 3), (2, 2)]:
        spec = build_mollifier(n, kappa)
        delta = 0.3
        rule = ball_rule(n, 2 * spec.m + 2 * kappa, [0.0] * n, delta)
        for alpha in multi_indices(n, kappa):
            for x in rng.uniform(-2, 2, size=(20, n)):
                conv = integrate(
                    lambda Y: eval_mollifier_many(spec, delta, Y)
                    * np.prod((x - Y) ** np.array(alpha), axis=1),
                    rule,
                )
                assert conv == pytest.approx(
                    float(np.prod(x ** np.array(alpha))), abs=1e-9
                )


def test_polynomial_expansion_matches_eval():
    for n, kappa in [(1, 3), (2, 3)]:
        spec = build_mollifier(n, kappa)
        exps, coeffs = polynomial_expansion(spec)
        rng = np.random.default_rng(1)
        X = rng.uniform(-0.6, 0.6, size=(50, n))
        X = X[np.sum(X ** 2, axis=1) < 1.0]
        direct = eval_mollifier_many(spec, 1.0, X)
        poly = np.zeros(X.shape[0])
        for e, c in zip(exps, coeffs):
            poly += c * np.prod(X ** np.array(e), axis=1)
        assert np.allclose(direct, poly, atol=1e-12)
