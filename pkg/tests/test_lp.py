import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from eigenbounds import (InfeasibleError, LPProblem, lp_minimize,
                         tighten_and_resolve)

SQ2 = math.sqrt(2.0)


def enumerate_vertices(problem):
    """Brute-force oracle: solve every Q-subset of constraints as equalities,
    keep the feasible ones, return the minimal objective value."""
    q = problem.q
    rows = [(problem.rows[i], problem.rhs[i]) for i in range(problem.n_rows)]
    for k in range(q):
        e = np.zeros(q)
        e[k] = 1.0
        rows.append((e, problem.lower[k]))
        rows.append((e, problem.upper[k]))
    best = None
    best_y = None
    for combo in itertools.combinations(range(len(rows)), q):
        A = np.vstack([rows[i][0] for i in combo])
        b = np.array([rows[i][1] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        y = np.linalg.solve(A, b)
        feasible = (np.all(y >= problem.lower - 1e-9)
                    and np.all(y <= problem.upper + 1e-9)
                    and (problem.n_rows == 0
                         or np.all(problem.rows @ y >= problem.rhs - 1e-9)))
        if feasible:
            val = float(problem.c @ y)
            if best is None or val < best:
                best, best_y = val, y
    return best, best_y


def gauss_solve(A, b):
    """Independent Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        A[[k, p]] = A[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            A[i, k:] -= f * A[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


class TestLpMinimize:
    def test_two_sample_vertex(self):
        # objective along the diagonal over the half-open box with three cuts
        p = LPProblem(c=[SQ2 / 2, SQ2 / 2], lower=[-1, -1], upper=[1, 1],
                      rows=[[1, 0], [0, 1], [-1, 0]], rhs=[-1, -1, -1])
        sol = lp_minimize(p)
        assert_allclose(sol.y, [-1.0, -1.0], atol=1e-12)
        assert_allclose(sol.value, -SQ2, atol=1e-12)
        assert sol.active == (("sample", 0), ("sample", 1))
        assert not sol.all_box

    def test_box_only(self):
        p = LPProblem(c=[1.0, 0.0], lower=[0, 0], upper=[1, 1],
                      rows=np.zeros((0, 2)), rhs=[])
        sol = lp_minimize(p)
        assert sol.value == 0.0
        assert sol.y[0] == 0.0
        assert sol.all_box
        assert len(sol.active) == 2

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_vertex_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        q, j = 3, 5
        lo = -1.0 - rng.random(q)
        hi = 1.0 + rng.random(q)
        rows = rng.standard_normal((j, q))
        # right-hand sides low enough to keep the region nonempty
        rhs = rows @ ((lo + hi) / 2) - rng.random(j) - 0.5
        p = LPProblem(c=rng.standard_normal(q), lower=lo, upper=hi,
                      rows=rows, rhs=rhs)
        sol = lp_minimize(p)
        best, _ = enumerate_vertices(p)
        assert best is not None
        assert_allclose(sol.value, best, atol=1e-9)

    def test_active_set_reconstructs_optimum(self):
        rng = np.random.default_rng(3)
        p = LPProblem(c=rng.standard_normal(4), lower=-np.ones(4),
                      upper=np.ones(4), rows=rng.standard_normal((6, 4)),
                      rhs=-np.abs(rng.standard_normal(6)) - 2.0)
        sol = lp_minimize(p)
        y = np.linalg.solve(sol.theta_mat, sol.psi)
        assert_allclose(y, sol.y, atol=1e-10)
        assert np.linalg.norm(sol.theta_mat @ sol.y - sol.psi) <= \
            1e-10 * max(np.linalg.norm(sol.psi), 1.0)

    def test_optimum_below_random_feasible_points(self):
        rng = np.random.default_rng(4)
        q, j = 3, 4
        rows = rng.standard_normal((j, q))
        rhs = -np.abs(rng.standard_normal(j)) - 3.0
        p = LPProblem(c=rng.standard_normal(q), lower=-np.ones(q),
                      upper=np.ones(q), rows=rows, rhs=rhs)
        sol = lp_minimize(p)
        count = 0
        while count < 1000:
            y = rng.uniform(-1.0, 1.0, size=q)
            if np.all(rows @ y >= rhs):
                count += 1
                assert sol.value <= p.c @ y + 1e-9

    def test_redundant_row_does_not_change_value(self):
        rng = np.random.default_rng(5)
        rows = rng.standard_normal((4, 3))
        rhs = -np.abs(rng.standard_normal(4)) - 2.0
        p1 = LPProblem(c=rng.standard_normal(3), lower=-np.ones(3),
                       upper=np.ones(3), rows=rows, rhs=rhs)
        sol1 = lp_minimize(p1)
        # duplicate a row and dominate another: optimum must not move
        rows2 = np.vstack([rows, rows[0], rows[1]])
        rhs2 = np.concatenate([rhs, [rhs[0]], [rhs[1] - 1.0]])
        p2 = LPProblem(c=p1.c, lower=p1.lower, upper=p1.upper,
                       rows=rows2, rhs=rhs2)
        sol2 = lp_minimize(p2)
        assert_allclose(sol2.value, sol1.value, atol=1e-10)

    def test_feasibility_of_reported_minimizer(self):
        rng = np.random.default_rng(6)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            rows = rng.standard_normal((6, 3))
            rhs = -np.abs(rng.standard_normal(6)) - 2.5
            p = LPProblem(c=rng.standard_normal(3), lower=-np.ones(3),
                          upper=np.ones(3), rows=rows, rhs=rhs)
            sol = lp_minimize(p)
            assert np.all(sol.y >= p.lower - 1e-9)
            assert np.all(sol.y <= p.upper + 1e-9)
            assert np.all(rows @ sol.y >= rhs - 1e-9)

    def test_infeasible_raises(self):
        p = LPProblem(c=[1.0], lower=[0.0], upper=[1.0],
                      rows=[[1.0], [-1.0]], rhs=[0.8, -0.2])  # y>=0.8, y<=0.2
        with pytest.raises(InfeasibleError):
            lp_minimize(p)

    def test_degenerate_vertex_flagged_and_lexicographic(self):
        # four constraints tight at the optimal corner
        p = LPProblem(c=[SQ2 / 2, SQ2 / 2], lower=[-1, -1], upper=[1, 1],
                      rows=[[1, 0], [0, 1]], rhs=[-1, -1])
        sol = lp_minimize(p)
        assert sol.degenerate
        assert sol.active == (("sample", 0), ("sample", 1))

    def test_warm_start_reuse(self):
        p1 = LPProblem(c=[1.0, 1.0], lower=[-1, -1], upper=[1, 1],
                       rows=[[1.0, 0.0]], rhs=[-0.5])
        sol1 = lp_minimize(p1)
        p2 = LPProblem(c=p1.c, lower=p1.lower, upper=p1.upper,
                       rows=np.vstack([p1.rows, [[0.0, 1.0]]]),
                       rhs=np.append(p1.rhs, -2.0))  # satisfied by sol1
        sol2 = lp_minimize(p2, warm=sol1)
        assert sol2.cache_hit
        assert_allclose(sol2.y, sol1.y, atol=0)
        p3 = LPProblem(c=p1.c, lower=p1.lower, upper=p1.upper,
                       rows=np.vstack([p1.rows, [[0.0, 1.0]]]),
                       rhs=np.append(p1.rhs, -0.3))  # cuts off sol1
        sol3 = lp_minimize(p3, warm=sol1)
        assert not sol3.cache_hit
        assert_allclose(sol3.y, [-0.5, -0.3], atol=1e-10)

    def test_fixed_coordinate_box(self):
        # degenerate box interval lower == upper
        p = LPProblem(c=[1.0, -1.0], lower=[2.0, 0.0], upper=[2.0, 1.0],
                      rows=[[1.0, 1.0]], rhs=[2.1])
        sol = lp_minimize(p)
        assert_allclose(sol.y[0], 2.0)
        assert_allclose(sol.value, 2.0 - 1.0, atol=1e-10)


class TestTightenAndResolve:
    def test_identity_system(self):
        p = LPProblem(c=[SQ2 / 2, SQ2 / 2], lower=[-1, -1], upper=[1, 1],
                      rows=[[1, 0], [0, 1]], rhs=[-1, -1])
        sol = lp_minimize(p)
        out = tighten_and_resolve(sol, {0: 0.5, 1: 0.5}, p.c)
        assert_allclose(out.y, [-0.5, -0.5], atol=1e-12)
        assert_allclose(out.eta, -SQ2 / 2, atol=1e-12)
        assert out.fallback is None

    def test_zero_bumps_reproduce_value(self):
        rng = np.random.default_rng(8)
        p = LPProblem(c=rng.standard_normal(3), lower=-np.ones(3),
                      upper=np.ones(3), rows=rng.standard_normal((5, 3)),
                      rhs=-np.abs(rng.standard_normal(5)) - 2.0)
        sol = lp_minimize(p)
        bumps = {i: 0.0 for i in sol.sample_indices()}
        out = tighten_and_resolve(sol, bumps, p.c)
        assert_allclose(out.y, sol.y, atol=1e-10)
        assert_allclose(out.eta, sol.value, atol=1e-10)

    def test_matches_independent_gaussian_elimination(self):
        rng = np.random.default_rng(9)
        rows = rng.standard_normal((6, 3))
        rhs = rows @ rng.uniform(-0.5, 0.5, 3) - 0.1  # rows cut into the box
        p = LPProblem(c=rng.standard_normal(3), lower=-np.ones(3),
                      upper=np.ones(3), rows=rows, rhs=rhs)
        sol = lp_minimize(p)
        bumps = {i: float(abs(np.sin(i + 1))) for i in sol.sample_indices()}
        assert bumps
        out = tighten_and_resolve(sol, bumps, p.c)
        psi = sol.psi.copy()
        for k, tag in enumerate(sol.active):
            if tag[0] == "sample":
                psi[k] += bumps[tag[1]]
        expected = gauss_solve(sol.theta_mat, psi)
        assert_allclose(out.y, expected, atol=1e-12)

    def test_all_box_fallback(self):
        p = LPProblem(c=[1.0, 1.0], lower=[0, 0], upper=[1, 1],
                      rows=np.zeros((0, 2)), rhs=[])
        sol = lp_minimize(p)
        out = tighten_and_resolve(sol, {}, p.c)
        assert out.fallback == "all_box"
        assert out.eta == sol.value

    def test_missing_bump_rejected(self):
        p = LPProblem(c=[1.0, 1.0], lower=[-1, -1], upper=[1, 1],
                      rows=[[1, 0], [0, 1]], rhs=[-0.5, -0.5])
        sol = lp_minimize(p)
        with pytest.raises(ValueError):
            tighten_and_resolve(sol, {}, p.c)
