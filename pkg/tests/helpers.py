"""Shared construction helpers for the test suite."""

import math

import numpy as np

from eigenbounds import AffineFamily, ScmState, SubspacePool, append_sample, \
    solve_at_sample


def build_state(family, sample_points, tol=1e-10):
    state = ScmState(family)
    for mu in sample_points:
        pairs = solve_at_sample(family, mu, 1, tol=tol)
        state.append(mu, pairs.values[0], pairs.vectors[:, 0])
    return state


def build_pool(family, sample_points, ell=1, tol=1e-10):
    pool = SubspacePool(family, ell=ell)
    for mu in sample_points:
        append_sample(pool, mu, tol=tol)
    return pool


def make_smooth_family(n=40, seed=0):
    """Q=3, P=2 family with non-polynomial coefficients (for gradient tests)."""
    rng = np.random.default_rng(seed)
    a1 = np.diag(np.linspace(1.0, 4.0, n))
    g2 = rng.standard_normal((n, n))
    g3 = rng.standard_normal((n, n))
    terms = (a1, 0.25 * (g2 + g2.T) / np.sqrt(n),
             0.25 * (g3 + g3.T) / np.sqrt(n))

    def theta(mu):
        return np.array([1.0, math.exp(mu[0]), math.sin(mu[1]) + 2.0])

    def theta_grad(mu):
        return np.array([[0.0, math.exp(mu[0]), 0.0],
                         [0.0, 0.0, math.cos(mu[1])]])  # (P, Q)

    fam = AffineFamily(terms=terms, theta=theta,
                       domain=((-1.0, 1.0), (-1.0, 1.0)))
    return fam, theta_grad
