"""Numeric verification of the quadratic-form, beta-integral and chi-square identities."""

import numpy as np
import pytest

from shrinkpred.canonical import CanonicalProblem
from shrinkpred.predictive import (
    PriorSpec,
    beta_integral_identity,
    lemma_identity_residual,
    shrinkage_components,
)


def random_instance(rng):
    l = int(rng.integers(1, 5))
    m = l + int(rng.integers(0, 4))
    Q = np.linalg.qr(rng.standard_normal((m, l)))[0]
    return l, m, Q


def test_lemma_random_instances():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(200):
        l, m, Q = random_instance(rng)
        F = rng.uniform(0.0, 1.0, l)
        ds = rng.uniform(0.1, 3.0, l)
        y, v = rng.standard_normal(m), rng.standard_normal(l)
        lhs, rhs = lemma_identity_residual(F, ds, Q, y, v)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    assert worst <= 1e-8


def test_quadratic_forms_match_closed_expressions():
    # The direct quadratic forms at the two relevant F settings must agree
    # with the assembled covariance/mean/residual expressions.
    rng = np.random.default_rng(77)
    for _ in range(50):
        l, m, Q = random_instance(rng)
        alpha = rng.uniform(-1.0, 0.95)
        d = np.sort(rng.uniform(0.1, 3.0, l))[::-1]
        c = rng.uniform(1.0, 5.0, l)
        y, v = rng.standard_normal(m), rng.standard_normal(l)
        problem = CanonicalProblem(n=20, k=l, m=m, d=d, Q=Q, case="I" if m >= l else "II",
                                   coef_transform=np.eye(l))
        prior = PriorSpec(c=c, a=0.0, gamma_prior=1.0, n=20, k=l, m=m)
        comp = shrinkage_components(problem, prior, alpha, v)
        ds = (1.0 - alpha) / 2.0 * d
        scale = 2.0 / (1.0 - alpha)

        # F = I: quadratic form around Qv with covariance sigma_u
        direct_a, _ = lemma_identity_residual(np.ones(l), ds, Q, y, v)
        ru = y - Q @ v
        closed_a = scale * float(ru @ np.linalg.solve(comp.sigma_u, ru))
        assert abs(direct_a - closed_a) <= 1e-8 * (1.0 + abs(direct_a))

        # F = I - C^{-1}: shrunken mean, covariance sigma_b, residual r
        direct_b, _ = lemma_identity_residual(1.0 - 1.0 / c, ds, Q, y, v)
        rb = y - Q @ comp.theta_hat_b
        closed_b = scale * (float(rb @ np.linalg.solve(comp.sigma_b, rb)) + comp.r)
        assert abs(direct_b - closed_b) <= 1e-8 * (1.0 + abs(direct_b))


def test_beta_integral_random_instances():
    rng = np.random.default_rng(4321)
    worst = 0.0
    for _ in range(50):
        a_exp = rng.uniform(-0.45, 2.5)
        b_exp = rng.uniform(-0.45, 2.5)
        w = rng.uniform(0.05, 8.0)
        quad_val, closed = beta_integral_identity(a_exp, b_exp, w)
        worst = max(worst, abs(quad_val - closed) / closed)
    assert worst <= 1e-6


def test_beta_integral_domain():
    with pytest.raises(ValueError):
        beta_integral_identity(-1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        beta_integral_identity(0.5, -1.5, 1.0)
