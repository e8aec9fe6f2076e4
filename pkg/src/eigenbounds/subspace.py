"""Subspace-accelerated bounds for the parametric smallest eigenvalue.

Sampled eigenvectors are accumulated in an orthonormal basis V with
precomputed reduced matrices V*A_q V and V*A_q A_q' V, so that for every
parameter the Ritz upper bound, the Ritz residual and the gap-tightened
lower bound all come from small dense problems:

* upper bound: smallest eigenvalue of the projected matrix V*A(mu)V;
* lower bound: a quadratic residual perturbation bound applied to the
  leading Ritz block, with the unknown complementary-subspace eigenvalue
  replaced by eta from the tightened active-set LP system.

The greedy driver mirrors the classical SCM loop but measures the gap
between these subspace bounds instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .family import compute_bounding_box, joint_rayleigh
from .hermitian import ArgumentError, EigensolverError, orthonormal_columns
from .lp import tighten_and_resolve
from .scm import (GreedyError, GreedyRecord, GreedyResult, _fan_out,
                  _ratio_array, lower_bound, solve_at_sample)

__all__ = [
    "SubspacePool",
    "RitzData",
    "append_sample",
    "ritz_upper_bound",
    "residual_norm",
    "beta_gap",
    "eta_estimate",
    "f_bound",
    "subspace_lower_bound",
    "residual_heuristic_bound",
    "subspace_greedy",
]

DROP_TOL = 1e-10
RHO_SQ_FLOOR = -1e-10


class SubspacePool:
    """Samples, their eigen-data, the joint basis and its reduced matrices."""

    def __init__(self, family, ell=1):
        if ell < 1:
            raise ArgumentError("ell must be at least 1")
        self.family = family
        self.ell = int(min(ell, family.n))
        n, q = family.n, family.q
        self.samples = []
        self.sample_values = []   # per sample: ascending, up to ell+1 values
        self.coeffs = []          # per sample: basis coefficients of its vectors
        self.dropped = []         # per sample: number of near-dependent vectors
        self.basis = np.zeros((n, 0))
        self.applied = [np.zeros((n, 0)) for _ in range(q)]   # A_q V
        self.reduced = np.zeros((q, 0, 0))                    # V* A_q V
        self.cross = np.zeros((q, q, 0, 0))                   # V* A_q A_q' V
        self.upper_points = np.zeros((0, q))
        self.rows = np.zeros((0, q))
        self.rhs = np.zeros(0)

    @property
    def j(self):
        return len(self.samples)

    @property
    def dim(self):
        return self.basis.shape[1]

    def has_sample(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return any(np.array_equal(mu, s) for s in self.samples)

    def sample_coeffs(self, i):
        """Basis coefficients of sample i's eigenvectors, zero-padded."""
        C = self.coeffs[i]
        if C.shape[0] < self.dim:
            pad = np.zeros((self.dim - C.shape[0], C.shape[1]), dtype=C.dtype)
            C = np.vstack([C, pad])
        return C


def append_sample(pool, mu_new, tol=1e-6, seed=0):
    """Solve at a new sample and extend the pool incrementally.

    Requests ell+1 eigenvalues (one more than the number of vectors kept:
    the extra value feeds the gap lemma) and ell eigenvectors, orthogonalizes
    the new vectors against the basis with a drop tolerance for
    near-dependence, and extends the reduced and cross matrices with only
    the new rows/columns.
    """
    family = pool.family
    mu_new = np.atleast_1d(np.asarray(mu_new, dtype=float))
    if pool.has_sample(mu_new):
        raise ArgumentError("sample already present in the pool")
    k = min(pool.ell + 1, family.n)
    pairs = solve_at_sample(family, mu_new, k, tol=tol, seed=seed)
    ell_eff = min(pool.ell, pairs.vectors.shape[1])
    vectors = pairs.vectors[:, :ell_eff]

    new_block, kept = orthonormal_columns(vectors, against=pool.basis,
                                          drop_tol=DROP_TOL)
    if pool.basis.shape[1] == 0 and new_block.shape[1] == 0:
        raise ArgumentError("cannot start a pool with an empty block")
    basis = np.hstack([pool.basis, new_block]) if new_block.shape[1] else pool.basis

    q = family.q
    m_old = pool.dim
    m_new = new_block.shape[1]
    if m_new:
        applied_new = [family.terms[qi].matmat(new_block) for qi in range(q)]
        m = m_old + m_new
        reduced = np.zeros((q, m, m), dtype=np.result_type(basis, float))
        cross = np.zeros((q, q, m, m), dtype=reduced.dtype)
        for qi in range(q):
            reduced[qi, :m_old, :m_old] = pool.reduced[qi]
            tr = pool.basis.conj().T @ applied_new[qi] if m_old else \
                np.zeros((0, m_new))
            reduced[qi, :m_old, m_old:] = tr
            reduced[qi, m_old:, :m_old] = tr.conj().T
            br = new_block.conj().T @ applied_new[qi]
            reduced[qi, m_old:, m_old:] = 0.5 * (br + br.conj().T)
        for qi in range(q):
            for qj in range(q):
                cross[qi, qj, :m_old, :m_old] = pool.cross[qi, qj]
                if m_old:
                    cross[qi, qj, :m_old, m_old:] = \
                        pool.applied[qi].conj().T @ applied_new[qj]
                    cross[qi, qj, m_old:, :m_old] = \
                        applied_new[qi].conj().T @ pool.applied[qj]
                cross[qi, qj, m_old:, m_old:] = \
                    applied_new[qi].conj().T @ applied_new[qj]
        pool.applied = [np.hstack([pool.applied[qi], applied_new[qi]])
                        for qi in range(q)]
        pool.reduced = reduced
        pool.cross = cross
        pool.basis = basis

    pool.samples.append(mu_new)
    pool.sample_values.append(pairs.values.copy())
    pool.coeffs.append(pool.basis.conj().T @ vectors if pool.dim else
                       np.zeros((0, ell_eff)))
    pool.dropped.append(ell_eff - m_new)
    pool.upper_points = np.vstack([pool.upper_points,
                                   joint_rayleigh(family, pairs.vectors[:, 0])])
    pool.rows = np.vstack([pool.rows, family.theta_at(mu_new)])
    pool.rhs = np.append(pool.rhs, float(pairs.values[0]))
    return pool


@dataclass
class RitzData:
    """Leading Ritz block of the projected problem at one parameter."""

    mu: np.ndarray
    r: int
    values: np.ndarray        # the r smallest Ritz values, ascending
    coeffs: np.ndarray        # (dim, r) block: Ritz basis = V @ coeffs
    rho: float | None = None
    eta: float | None = None
    eta_fallback: str | None = None
    clamped: bool = False     # r was clamped to the pool dimension
    chosen: bool = False      # selected by the r-sweep


def _reduced_matrix(pool, th):
    return np.tensordot(th, pool.reduced, axes=1)


def _cross_matrix(pool, th):
    return np.einsum("q,p,qpij->ij", th, th, pool.cross, optimize=True)


def ritz_upper_bound(pool, mu, r=1):
    """Smallest r Ritz pairs of A(mu) with respect to the pool basis.

    The first Ritz value is the subspace upper bound for the smallest
    eigenvalue; it can never exceed the classical sampled upper bound.
    """
    if pool.dim == 0:
        raise ArgumentError("subspace pool is empty")
    clamped = r > pool.dim
    r = min(r, pool.dim)
    if r < 1:
        raise ArgumentError("r must be at least 1")
    th = pool.family.theta_at(mu)
    H = _reduced_matrix(pool, th)
    vals, vecs = np.linalg.eigh(0.5 * (H + H.conj().T))
    return RitzData(mu=np.atleast_1d(np.asarray(mu, dtype=float)), r=r,
                    values=vals[:r].copy(), coeffs=vecs[:, :r].copy(),
                    clamped=clamped)


def _rho_from_parts(P_block, values):
    """Residual norm from W*(V*A^2 V)W and the Ritz values."""
    B = P_block - np.diag(values ** 2)
    rho2 = float(np.linalg.eigvalsh(0.5 * (B + B.conj().T)).max())
    if rho2 < RHO_SQ_FLOOR:
        raise ArgumentError(
            f"negative squared residual {rho2:.3e}: reduced matrices are "
            "internally inconsistent")
    return math.sqrt(max(rho2, 0.0))


def residual_norm(pool, mu, ritz):
    """Two-norm of A(mu) U - U (U*A(mu)U) computed from reduced matrices.

    No length-n work: the squared norm is the largest eigenvalue of
    W*(V*A(mu)^2 V)W - Lambda^2.
    """
    th = pool.family.theta_at(mu)
    S = _cross_matrix(pool, th)
    W = ritz.coeffs
    return _rho_from_parts(W.conj().T @ S @ W, ritz.values)


def beta_gap(pool, i, u_coeffs):
    """Certified eigenvalue shift at sample i for vectors orthogonal to U.

    ``u_coeffs`` expresses the orthonormal Ritz basis U in pool-basis
    coordinates (U = V @ u_coeffs).  Returns beta_i such that every unit
    vector orthogonal to U satisfies u*A(mu_i)u >= lambda_i + beta_i,
    assuming exact eigen-data at the sample.
    """
    U = np.asarray(u_coeffs)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    r = U.shape[1]
    n = pool.family.n
    if n - r < r:
        raise ArgumentError("gap lemma requires n - r >= r")
    lam = pool.sample_values[i]
    ell = pool.coeffs[i].shape[1]
    lam_head = lam[:ell]
    lam_top = lam[ell] if len(lam) > ell else lam[-1]
    C = pool.sample_coeffs(i)                     # (dim, ell)
    M = C.conj().T @ U                            # V_i* U
    P = np.eye(ell) - M @ M.conj().T
    # spec(P S) = spec(P^{1/2} S P^{1/2}); the symmetric square root keeps
    # the eigensolve Hermitian even though the raw product is not.
    wp, Up = np.linalg.eigh(0.5 * (P + P.conj().T))
    Ph = (Up * np.sqrt(np.clip(wp, 0.0, None))) @ Up.conj().T
    S = np.diag(lam_head - lam_top)
    smallest = float(np.linalg.eigvalsh(Ph @ S @ Ph).min())
    return smallest + float(lam_top - lam_head[0])


def eta_estimate(lpsol, betas, theta_mu):
    """Lower bound for the complementary-subspace smallest eigenvalue.

    Bumps the active sample constraints of the LP solution by their beta
    shifts and re-solves the active-set system; falls back to the plain LP
    value (flagged) when the active set is all-box or ill-conditioned.
    """
    return tighten_and_resolve(lpsol, betas, theta_mu)


def f_bound(lam_v1, eta, rho):
    """Quadratic residual lower bound min(lam_v1, eta) - correction.

    Monotonically increasing and continuous in eta; with rho = 0 it reduces
    to min(lam_v1, eta) (the correction's 0/0 limit at eta = lam_v1).
    Accepts scalars or broadcastable arrays.
    """
    lam_v1 = np.asarray(lam_v1, dtype=float)
    eta = np.asarray(eta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    delta = np.abs(lam_v1 - eta)
    denom = delta + np.sqrt(delta * delta + 4.0 * rho * rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0.0, 2.0 * rho * rho / np.where(denom > 0, denom, 1.0), 0.0)
    out = np.minimum(lam_v1, eta) - corr
    return float(out) if out.ndim == 0 else out


def subspace_lower_bound(pool, box, mu, r_max=None, warm=None, lp_tol=1e-8):
    """Best certified lower bound over Ritz-space dimensions r = 0..r_max.

    r = 0 reproduces the classical LP lower bound; each r >= 1 combines the
    Ritz residual with the gap-tightened eta.  Returns the maximum over r
    (ties broken toward the smallest r) together with the Ritz data of the
    winning r and the LP solution.
    """
    if pool.dim == 0:
        raise ArgumentError("subspace pool is empty")
    if r_max is None:
        r_max = pool.family.q
    th = pool.family.theta_at(mu)
    lam_lb, sol = lower_bound(pool, box, mu, warm=warm, lp_tol=lp_tol)

    H = _reduced_matrix(pool, th)
    vals, vecs = np.linalg.eigh(0.5 * (H + H.conj().T))
    r_hi = int(min(r_max, pool.dim, (pool.family.n) // 2))

    best_val = lam_lb
    best = RitzData(mu=np.atleast_1d(np.asarray(mu, dtype=float)), r=0,
                    values=vals[:0], coeffs=vecs[:, :0], chosen=True)
    if r_hi >= 1:
        S = _cross_matrix(pool, th)
        W_hi = vecs[:, :r_hi]
        P_full = W_hi.conj().T @ S @ W_hi
        sample_idx = sol.sample_indices()
        for r in range(1, r_hi + 1):
            W = vecs[:, :r]
            rho = _rho_from_parts(P_full[:r, :r], vals[:r])
            betas = {i: beta_gap(pool, i, W) for i in sample_idx}
            tight = eta_estimate(sol, betas, th)
            cand = f_bound(vals[0], tight.eta, rho)
            if cand > best_val:
                best_val = cand
                best = RitzData(mu=np.atleast_1d(np.asarray(mu, dtype=float)),
                                r=r, values=vals[:r].copy(), coeffs=W.copy(),
                                rho=rho, eta=tight.eta,
                                eta_fallback=tight.fallback, chosen=True)
    return float(best_val), best, sol


def residual_heuristic_bound(pool, mu):
    """Upper bound minus the residual norm of the leading Ritz vector.

    A guaranteed lower bound for *some* eigenvalue of A(mu) (first-order
    perturbation), not necessarily the smallest; cheap and often much
    tighter early on.  Returns (value, residual_norm).
    """
    ritz = ritz_upper_bound(pool, mu, r=1)
    rho = residual_norm(pool, mu, ritz)
    return float(ritz.values[0] - rho), rho


def subspace_greedy(family, train, eps=1e-4, j_max=200, ell=1, r_max=None,
                    tol=1e-6, mode="certified", *, box=None, warm_start=True,
                    lazy_sweep=False, oracle=None, lp_tol=1e-8, seed=0,
                    workers=1):
    """Greedy loop driven by the subspace bounds.

    ``mode='certified'`` selects/stops on the relative gap between the
    subspace bounds; ``mode='heuristic'`` uses the relative Ritz residual
    instead (cheaper to trust, not guaranteed).  With ``lazy_sweep`` the
    subspace bounds of a parameter are only recomputed when its LP warm
    start is invalidated, trading tightness for time.  ``workers`` fans the
    per-parameter sweep out to a thread pool without changing any result.

    Returns a GreedyResult whose tables also include the classical bounds
    for comparison.
    """
    if mode not in ("certified", "heuristic"):
        raise ArgumentError(f"unknown mode {mode!r}")
    pts = train.points
    m = len(pts)
    if m == 0:
        raise ArgumentError("training set is empty")
    if r_max is None:
        r_max = family.q
    t0 = time.perf_counter()
    eig_seconds = lp_seconds = reduced_seconds = 0.0
    t = time.perf_counter()
    if box is None:
        box = compute_bounding_box(family, tol=tol, seed=seed)
    eig_seconds += time.perf_counter() - t
    eig_count = 2 * family.q
    lp_count = 0

    theta_all = family.theta_table(pts)
    pool = SubspacePool(family, ell=ell)
    sols = [None] * m
    lam_lb = np.full(m, -math.inf)
    lam_slb = np.full(m, -math.inf)
    lam_sub = np.full(m, math.inf)
    heur = np.full(m, math.inf)
    resid = np.full(m, math.inf)
    chosen_r = np.zeros(m, dtype=np.int64)
    records = []
    converged = False
    reason = ""
    selected = 0

    def tables_now(ub):
        tabs = {"lam_lb": lam_lb.copy(), "lam_slb": lam_slb.copy(),
                "lam_sub": lam_sub.copy(), "lam_ub": ub.copy(),
                "heuristic": heur.copy(), "residual": resid.copy(),
                "chosen_r": chosen_r.copy(),
                "ratio": _ratio_array(lam_slb, lam_sub),
                "ratio_fallback": np.abs(lam_sub) < 1e-14}
        if oracle is not None:
            tabs["oracle"] = np.asarray(oracle, dtype=float)
        return tabs

    ub = np.full(m, math.inf)
    for it in range(1, j_max + 1):
        mu_new = pts[selected]
        t = time.perf_counter()
        try:
            append_sample(pool, mu_new, tol=tol, seed=seed)
        except EigensolverError as exc:
            reason = f"eigensolver failed at sample {it}: {exc}"
            raise GreedyError(reason, partial=GreedyResult(
                converged=False, reason=reason, model=pool, box=box,
                records=records, tables=tables_now(ub),
                training=train)) from exc
        eig_seconds += time.perf_counter() - t
        eig_count += 1
        lam_new = pool.rhs[-1]
        th_new = pool.rows[-1]

        ub = np.min(theta_all @ pool.upper_points.T, axis=1)
        cache_ok = np.zeros(m, dtype=bool)
        if warm_start and it > 1:
            for i in range(m):
                if sols[i] is not None and \
                        float(th_new @ sols[i].y) >= lam_new - lp_tol:
                    cache_ok[i] = True

        t = time.perf_counter()
        solved = np.zeros(m, dtype=bool)

        def sweep_one(i):
            if lazy_sweep and cache_ok[i]:
                return  # stale subspace bounds remain valid, just looser
            warm = sols[i] if (warm_start and cache_ok[i]) else None
            lam_slb[i], data, sols[i] = subspace_lower_bound(
                pool, box, pts[i], r_max=r_max, warm=warm, lp_tol=lp_tol)
            solved[i] = not sols[i].cache_hit
            lam_lb[i] = sols[i].value
            chosen_r[i] = data.r
            ritz1 = ritz_upper_bound(pool, pts[i], r=1)
            lam_sub[i] = float(ritz1.values[0])
            rho1 = residual_norm(pool, pts[i], ritz1)
            resid[i] = rho1
            heur[i] = lam_sub[i] - rho1

        _fan_out(m, sweep_one, workers)
        lp_count += int(solved.sum())
        reduced_seconds += time.perf_counter() - t

        if mode == "certified":
            ratios = _ratio_array(lam_slb, lam_sub)
        else:
            denom = np.maximum(np.abs(lam_sub), 1e-14)
            ratios = resid / denom
        max_ratio = float(ratios.max())
        rec = GreedyRecord(
            iteration=it, selected_index=int(selected),
            selected_mu=mu_new.copy(), max_ratio=max_ratio,
            wall_seconds=time.perf_counter() - t0,
            eig_seconds=eig_seconds, lp_seconds=lp_seconds,
            reduced_seconds=reduced_seconds,
            lp_count=lp_count, eig_count=eig_count)
        if oracle is not None:
            rec.max_abs_ub_error = float(np.max(np.abs(lam_sub - oracle)))
            rec.max_abs_lb_error = float(np.max(np.abs(lam_slb - oracle)))
            rec.heuristic_valid = bool(np.all(heur <= oracle + 1e-9))
        records.append(rec)

        if max_ratio <= eps:
            converged = True
            reason = (f"relative {'gap' if mode == 'certified' else 'residual'} "
                      f"{max_ratio:.3e} <= {eps:.1e} after J={it}")
            break
        selected = int(np.argmax(ratios))
    else:
        reason = f"iteration cap J_max={j_max} reached (not converged)"

    return GreedyResult(converged=converged, reason=reason, model=pool,
                        box=box, records=records, tables=tables_now(ub),
                        training=train)
