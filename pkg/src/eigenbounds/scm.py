"""Classical successive constraint method (SCM).

Given a training set, the greedy loop alternates between sweeping the
current lower/upper bounds over all training parameters and appending the
parameter with the worst relative gap.  Upper bounds come from sampled
joint-Rayleigh points, lower bounds from a small LP over the bounding box
cut by the sampled spectral constraints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .family import (AffineFamily, BoundingBox, compute_bounding_box,
                     joint_rayleigh)
from .hermitian import (DENSE_FALLBACK_SIZE, ArgumentError, DenseHermitian,
                        EigensolverError, dense_smallest,
                        orthonormal_columns, smallest_eigpairs)
from .lp import LPProblem, lp_minimize

__all__ = [
    "GreedyError",
    "GreedyRecord",
    "GreedyResult",
    "ScmState",
    "solve_at_sample",
    "upper_bound",
    "lower_bound",
    "error_ratio",
    "scm_greedy",
    "worst_case_family",
]

RATIO_DENOMINATOR_FLOOR = 1e-14


class GreedyError(RuntimeError):
    """Greedy loop aborted; ``partial`` carries the state built so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class GreedyRecord:
    """One greedy iteration: what was selected and how good the bounds are."""

    iteration: int
    selected_index: int
    selected_mu: np.ndarray
    max_ratio: float
    wall_seconds: float
    eig_seconds: float
    lp_seconds: float
    reduced_seconds: float
    lp_count: int
    eig_count: int
    max_abs_ub_error: float | None = None
    max_abs_lb_error: float | None = None
    heuristic_valid: bool | None = None


@dataclass
class GreedyResult:
    converged: bool
    reason: str
    model: object               # ScmState or SubspacePool
    box: BoundingBox
    records: list
    tables: dict                # per-training-point arrays from the final sweep
    training: object


def solve_at_sample(family, mu, k, tol=1e-6, seed=0):
    """Smallest k eigenpairs of A(mu), choosing dense/iterative per size.

    Takes the dense path when the problem is small or k reaches the full
    dimension (the iterative solver requires k < n).
    """
    n = family.n
    k = min(k, n)
    if k >= n or n <= DENSE_FALLBACK_SIZE:
        return dense_smallest(family.assemble_dense(mu), k, size_cap=max(n, 2000))
    return smallest_eigpairs(family.operator_at(mu), k, tol=tol, seed=seed)


class ScmState:
    """Greedy sample set with eigenvalues, eigenvectors and LP warm starts."""

    def __init__(self, family):
        self.family = family
        self.samples = []
        self.values = []
        self.vectors = []
        self.upper_points = np.zeros((0, family.q))
        self.rows = np.zeros((0, family.q))
        self.rhs = np.zeros(0)
        self.lp_cache = {}

    @property
    def j(self):
        return len(self.samples)

    def has_sample(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return any(np.array_equal(mu, s) for s in self.samples)

    def append(self, mu, value, vector):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.samples.append(mu)
        self.values.append(float(value))
        self.vectors.append(np.asarray(vector).reshape(-1))
        point = joint_rayleigh(self.family, vector)
        self.upper_points = np.vstack([self.upper_points, point])
        self.rows = np.vstack([self.rows, self.family.theta_at(mu)])
        self.rhs = np.append(self.rhs, float(value))


def upper_bound(state, mu):
    """min over stored joint-Rayleigh points of theta(mu)^T R(v_i).

    Returns +inf for an empty sample set.
    """
    if state.j == 0:
        return math.inf
    th = state.family.theta_at(mu)
    return float(np.min(state.upper_points @ th))


def lower_bound(state, box, mu, warm=None, lp_tol=1e-8):
    """LP lower bound over the box cut by the sampled constraints."""
    problem = LPProblem(c=state.family.theta_at(mu), lower=box.lower,
                        upper=box.upper, rows=state.rows, rhs=state.rhs)
    sol = lp_minimize(problem, warm=warm, tol=lp_tol)
    return sol.value, sol


def error_ratio(lb, ub):
    """Relative gap (ub - lb) / |ub|.

    Falls back to the absolute gap when |ub| is below 1e-14 (the caller is
    expected to flag such parameters); +inf for the empty-sample sentinel.
    """
    if math.isinf(ub):
        return math.inf
    if abs(ub) < RATIO_DENOMINATOR_FLOOR:
        return abs(ub - lb)
    return (ub - lb) / abs(ub)


def _ratio_array(lb, ub):
    out = np.empty_like(ub)
    for i in range(len(ub)):
        out[i] = error_ratio(lb[i], ub[i])
    return out


def _fan_out(count, work, workers):
    """Run work(i) for i in range(count), optionally on a thread pool.

    Each call writes only its own slots of preallocated arrays, so the
    results are identical regardless of scheduling.
    """
    if workers <= 1:
        for i in range(count):
            work(i)
        return
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, range(count)))


def scm_greedy(family, train, eps=1e-4, j_max=200, tol=1e-6, *, box=None,
               warm_start=True, oracle=None, lp_tol=1e-8, seed=0, workers=1):
    """Greedy SCM loop.

    Parameters
    ----------
    family, train : problem and training set
    eps : relative-gap stopping tolerance
    j_max : iteration cap; reaching it flags the result as not converged
    tol : eigensolver tolerance for the sampled eigenpairs
    box : precomputed BoundingBox (computed here when omitted)
    warm_start : reuse a parameter's LP minimizer while it stays feasible
    oracle : optional per-training-point exact smallest eigenvalues, used
        only for the error columns of the iteration records
    workers : thread fan-out for the per-parameter sweep (results are
        independent of the worker count)
    """
    pts = train.points
    m = len(pts)
    if m == 0:
        raise ArgumentError("training set is empty")
    t0 = time.perf_counter()
    eig_seconds = lp_seconds = 0.0
    t = time.perf_counter()
    if box is None:
        box = compute_bounding_box(family, tol=tol, seed=seed)
    eig_seconds += time.perf_counter() - t
    eig_count = 2 * family.q
    lp_count = 0

    theta_all = family.theta_table(pts)
    state = ScmState(family)
    sols = [None] * m
    lb = np.full(m, -math.inf)
    ub = np.full(m, math.inf)
    records = []
    converged = False
    reason = ""
    selected = 0  # all ratios are +inf while C_J is empty: first index wins

    def partial_result():
        tables = {"lam_lb": lb.copy(), "lam_ub": ub.copy(),
                  "ratio": _ratio_array(lb, ub),
                  "ratio_fallback": np.abs(ub) < RATIO_DENOMINATOR_FLOOR}
        if oracle is not None:
            tables["oracle"] = np.asarray(oracle, dtype=float)
        return GreedyResult(converged=converged, reason=reason, model=state,
                            box=box, records=records, tables=tables,
                            training=train)

    for it in range(1, j_max + 1):
        mu_new = pts[selected]
        t = time.perf_counter()
        try:
            pairs = solve_at_sample(family, mu_new, 1, tol=tol, seed=seed)
        except EigensolverError as exc:
            reason = f"eigensolver failed at sample {it}: {exc}"
            raise GreedyError(reason, partial=partial_result()) from exc
        eig_seconds += time.perf_counter() - t
        eig_count += 1
        lam_new = float(pairs.values[0])
        state.append(mu_new, lam_new, pairs.vectors[:, 0])

        ub = np.min(theta_all @ state.upper_points.T, axis=1)

        th_new = state.rows[-1]
        t = time.perf_counter()
        solved = np.zeros(m, dtype=bool)

        def sweep_one(i):
            # warm start: the cached minimizer stays optimal as long as it
            # satisfies the one constraint this iteration added
            if (warm_start and sols[i] is not None
                    and float(th_new @ sols[i].y) >= lam_new - lp_tol):
                return
            lb[i], sols[i] = lower_bound(state, box, pts[i],
                                         warm=sols[i] if warm_start else None,
                                         lp_tol=lp_tol)
            solved[i] = not sols[i].cache_hit

        _fan_out(m, sweep_one, workers)
        lp_count += int(solved.sum())
        lp_seconds += time.perf_counter() - t

        state.lp_cache = {i: sols[i] for i in range(m)}
        ratios = _ratio_array(lb, ub)
        max_ratio = float(ratios.max())
        rec = GreedyRecord(
            iteration=it, selected_index=int(selected),
            selected_mu=mu_new.copy(), max_ratio=max_ratio,
            wall_seconds=time.perf_counter() - t0,
            eig_seconds=eig_seconds, lp_seconds=lp_seconds,
            reduced_seconds=0.0, lp_count=lp_count, eig_count=eig_count)
        if oracle is not None:
            rec.max_abs_ub_error = float(np.max(np.abs(ub - oracle)))
            rec.max_abs_lb_error = float(np.max(np.abs(lb - oracle)))
        records.append(rec)

        if max_ratio <= eps:
            converged = True
            reason = f"relative gap {max_ratio:.3e} <= {eps:.1e} after J={it}"
            break
        selected = int(np.argmax(ratios))
    else:
        reason = f"iteration cap J_max={j_max} reached (not converged)"

    return partial_result()


def worst_case_family(state, mu_tilde, y_tilde, max_n=4096):
    """Family that attains the SCM lower bound at ``mu_tilde``.

    Projects every term onto the span of the sampled eigenvectors and fills
    the orthogonal complement with the LP minimizer's coordinates:
    the rebuilt family keeps the sampled smallest eigenvalues and its
    smallest eigenvalue at ``mu_tilde`` drops exactly to the lower bound.
    Used by tests to certify that no better lower bound can be extracted
    from eigenvalue samples alone.
    """
    family = state.family
    n = family.n
    if state.j >= n:
        raise ArgumentError("need fewer samples than the matrix dimension")
    y = np.asarray(y_tilde, dtype=float).reshape(-1)
    if y.size != family.q:
        raise ArgumentError("minimizer length must equal the term count")
    if state.j:
        V, _ = orthonormal_columns(np.column_stack(state.vectors))
    else:
        V = np.zeros((n, 0))
    eye = np.eye(n)
    proj = V @ V.conj().T if V.shape[1] else np.zeros((n, n))
    perp = eye - proj
    terms = []
    for qi, term in enumerate(family.terms):
        A = term.dense(max_n=max_n)
        terms.append(DenseHermitian(proj @ A @ proj + y[qi] * perp))
    return AffineFamily(terms=tuple(terms), theta=family.theta,
                        domain=family.domain,
                        name=family.name + ":worst-case")
