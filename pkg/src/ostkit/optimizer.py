"""Constrained signal-to-noise maximization over the nonnegative unit
sphere, its optimality certificates, and a brute-force enumeration oracle.

The solver maximizes ``beta.tau / sqrt(beta.Sigma.beta)`` over
``beta >= 0, ||beta|| = 1``. When some coordinate of tau is positive this is
equivalent (by order-0 homogeneity) to the quadratic program

    minimize  beta . Sigma . beta   subject to  beta >= 0,  beta . tau = 1,

solved here with a primal active-set loop: start from the best single
coordinate with a positive statistic, repeatedly solve the
equality-constrained subsystem on the free coordinates, step to the nearest
bound when the candidate leaves the feasible set, and release the
most-negative bound multiplier otherwise. When every coordinate of tau is
negative the maximizer is the single best-scoring coordinate axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, NumericalError, SingularMatrixError
from .numerics import as_symmetric, sym_inverse, sym_pseudoinverse

__all__ = [
    "OptResult",
    "ZERO_THRESHOLD",
    "KKT_TOL",
    "snr",
    "snr_gradient",
    "beta_infinity",
    "solve_ost",
    "compute_z",
    "kkt_check",
    "enumerate_oracle",
]

# coordinates of the unit-norm maximizer below this are treated as exact zeros
ZERO_THRESHOLD = 1e-9
KKT_TOL = 1e-8
_MAX_ITERS_PER_DIM = 50


@dataclass(frozen=True)
class OptResult:
    """Maximizer, its support, the attained SNR, and a KKT residual.

    ``branch`` records which case produced the result: ``interior_like``
    (two or more active coordinates), ``single_coordinate`` (one active
    coordinate, some statistic nonnegative), or ``all_negative`` (every
    statistic negative, forcing a single coordinate).
    """

    beta_star: np.ndarray
    active_set: tuple[int, ...]
    snr: float
    kkt_residual: float
    branch: str


def _as_pair(tau: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(tau, dtype=float)
    if t.ndim != 1:
        raise DataError(f"tau must be a vector, got shape {t.shape}")
    s = as_symmetric(sigma)
    if s.shape[0] != t.shape[0]:
        raise DataError(
            f"dimension mismatch: |tau|={t.shape[0]}, sigma is {s.shape}"
        )
    return t, s


def snr(beta: np.ndarray, tau: np.ndarray, sigma: np.ndarray) -> float:
    """``beta.tau / sqrt(beta.Sigma.beta)``; order-0 homogeneous in beta."""
    tau, sigma = _as_pair(tau, sigma)
    beta = np.asarray(beta, dtype=float)
    q = float(beta @ sigma @ beta)
    if q <= 0.0:
        raise DataError(f"beta.Sigma.beta must be positive, got {q}")
    return float(beta @ tau) / math.sqrt(q)


def snr_gradient(beta: np.ndarray, tau: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Gradient of the SNR objective: ``z / sqrt(beta.Sigma.beta)`` with
    ``z = tau - Sigma.beta * (beta.tau) / (beta.Sigma.beta)``."""
    tau, sigma = _as_pair(tau, sigma)
    beta = np.asarray(beta, dtype=float)
    q = float(beta @ sigma @ beta)
    if q <= 0.0:
        raise DataError(f"beta.Sigma.beta must be positive, got {q}")
    z = tau - (sigma @ beta) * (float(beta @ tau) / q)
    return z / math.sqrt(q)


def beta_infinity(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Power-optimal direction ``inv(Sigma).mu`` normalized to unit length."""
    mu, sigma = _as_pair(mu, sigma)
    if not np.any(mu):
        raise DataError("mu must be nonzero")
    x = sym_inverse(sigma) @ mu
    return x / np.linalg.norm(x)


def _subsystem_solve(sff: np.ndarray, tf: np.ndarray) -> np.ndarray:
    """Solve ``Sff b = tf`` for a symmetric working-set block; falls back to
    the eigen pseudoinverse when the block is (near-)singular."""
    scale = max(1.0, float(np.max(np.abs(tf))))
    try:
        b = np.linalg.solve(sff, tf)
        if np.all(np.isfinite(b)) and (
            np.max(np.abs(sff @ b - tf)) <= 1e-8 * scale
        ):
            return b
    except np.linalg.LinAlgError:
        pass
    pinv, rank = sym_pseudoinverse(sff)
    if rank == 0:
        raise SingularMatrixError("working-set block is numerically zero", math.inf)
    b = pinv @ tf
    if np.max(np.abs(sff @ b - tf)) > 1e-6 * scale:
        raise NumericalError(
            "working-set subsystem is inconsistent; statistic vector has "
            "components outside the covariance range"
        )
    return b


def _active_set_qp(tau: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Minimize ``beta.Sigma.beta`` over ``beta >= 0, beta.tau = 1``.

    Requires ``max(tau) > 0``. Returns the (unnormalized) minimizer.
    """
    d = tau.shape[0]
    diag = np.diag(sigma)
    if np.any(diag <= 0.0):
        raise SingularMatrixError(
            "covariance has a non-positive diagonal entry", math.inf
        )
    scores = np.where(tau > 0.0, tau / np.sqrt(diag), -np.inf)
    u0 = int(np.argmax(scores))
    beta = np.zeros(d)
    beta[u0] = 1.0 / tau[u0]
    free = np.zeros(d, dtype=bool)
    free[u0] = True

    for _ in range(_MAX_ITERS_PER_DIM * d):
        f_idx = np.flatnonzero(free)
        bf = _subsystem_solve(sigma[np.ix_(f_idx, f_idx)], tau[f_idx])
        denom = float(tau[f_idx] @ bf)
        if denom <= 0.0:
            raise NumericalError(
                "active-set subproblem lost positive definiteness"
            )
        cand = np.zeros(d)
        cand[f_idx] = bf / denom

        if np.all(cand[f_idx] >= -1e-14):
            beta = np.maximum(cand, 0.0)
            grad = 2.0 * (sigma[:, f_idx] @ beta[f_idx])
            lam = 2.0 / denom
            mult = grad - lam * tau
            mult[f_idx] = 0.0
            mscale = max(1.0, float(np.max(np.abs(grad))), abs(lam))
            worst = int(np.argmin(mult))
            if mult[worst] >= -1e-12 * mscale:
                return beta
            free[worst] = True
            continue

        # step toward the candidate until the first coordinate hits zero
        delta = cand - beta
        shrinking = (delta < 0.0) & free
        steps = np.full(d, np.inf)
        steps[shrinking] = beta[shrinking] / -delta[shrinking]
        blocker = int(np.argmin(steps))
        t = min(1.0, float(steps[blocker]))
        beta = np.maximum(beta + t * delta, 0.0)
        beta[blocker] = 0.0
        free[blocker] = False
        if not np.any(free):
            raise NumericalError("active-set iteration emptied the free set")

    raise NumericalError(
        f"active-set solver exceeded {_MAX_ITERS_PER_DIM * d} iterations"
    )


def solve_ost(tau: np.ndarray, sigma: np.ndarray) -> OptResult:
    """Maximize the SNR over ``beta >= 0, ||beta|| = 1``.

    Raises :class:`DataError` for ``tau == 0`` (the maximizer is undefined)
    and :class:`SingularMatrixError`/:class:`NumericalError` when the
    covariance cannot support the computation.
    """
    tau, sigma = _as_pair(tau, sigma)
    d = tau.shape[0]
    if not np.any(tau):
        raise DataError("degenerate input: tau is exactly zero")
    diag = np.diag(sigma)
    if np.any(diag <= 0.0):
        raise SingularMatrixError(
            "covariance has a non-positive diagonal entry", math.inf
        )

    if np.max(tau) <= 0.0:
        # no direction attains a positive value; best single coordinate wins
        scores = tau / np.sqrt(diag)
        u = int(np.argmax(scores))
        beta = np.zeros(d)
        beta[u] = 1.0
        branch = "all_negative" if np.all(tau < 0.0) else "single_coordinate"
    else:
        raw = _active_set_qp(tau, sigma)
        beta = raw / np.linalg.norm(raw)
        beta[beta < ZERO_THRESHOLD] = 0.0
        beta /= np.linalg.norm(beta)
        branch = "interior_like" if np.count_nonzero(beta) >= 2 else "single_coordinate"

    active = tuple(int(u) for u in np.flatnonzero(beta))
    value = snr(beta, tau, sigma)
    if len(active) >= 2 and value < 0.0:
        raise NumericalError(
            f"solver invariant violated: {len(active)} active coordinates "
            f"with negative SNR {value}"
        )
    residual = _kkt_residual(beta, active, value, tau, sigma)
    return OptResult(
        beta_star=beta,
        active_set=active,
        snr=value,
        kkt_residual=residual,
        branch=branch,
    )


def compute_z(opt: OptResult, tau: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Residual vector ``tau - Sigma.beta* (beta*.tau)/(beta*.Sigma.beta*)``.

    Vanishes on the active set at a KKT point; off the active set it is
    nonpositive and proportional to the objective's partial derivatives.
    """
    tau, sigma = _as_pair(tau, sigma)
    beta = opt.beta_star
    q = float(beta @ sigma @ beta)
    return tau - (sigma @ beta) * (float(beta @ tau) / q)


def _v_minus_terms(
    beta: np.ndarray,
    active: tuple[int, ...],
    z: np.ndarray,
    sigma: np.ndarray,
) -> float:
    """Lower truncation point; nonpositive-denominator terms are skipped
    (they correspond to constraints that do not restrict the statistic)."""
    q = float(beta @ sigma @ beta)
    sq = math.sqrt(q)
    sb = sigma @ beta
    best = -math.inf
    active_mask = np.zeros(beta.shape[0], dtype=bool)
    active_mask[list(active)] = True
    for u in np.flatnonzero(~active_mask):
        denom = math.sqrt(sigma[u, u]) * sq - sb[u]
        if denom <= 0.0:
            continue
        best = max(best, z[u] * sq / denom)
    return best


def _kkt_residual(
    beta: np.ndarray,
    active: tuple[int, ...],
    value: float,
    tau: np.ndarray,
    sigma: np.ndarray,
) -> float:
    q = float(beta @ sigma @ beta)
    z = tau - (sigma @ beta) * (float(beta @ tau) / q)
    active_mask = np.zeros(beta.shape[0], dtype=bool)
    active_mask[list(active)] = True

    viol = abs(np.linalg.norm(beta) - 1.0)
    if np.any(~active_mask):
        viol = max(viol, float(np.max(z[~active_mask])),
                   float(np.max(np.abs(beta[~active_mask]))))
    if np.any(active_mask):
        viol = max(viol, float(np.max(np.abs(z[active_mask]))),
                   float(np.max(-beta[active_mask])))
    v_minus = _v_minus_terms(beta, active, z, sigma)
    if math.isfinite(v_minus):
        viol = max(viol, v_minus - value)
    return max(viol, 0.0)


def kkt_check(opt: OptResult, tau: np.ndarray, sigma: np.ndarray) -> float:
    """Maximum violation of the optimality conditions; 0 at an exact optimum.

    Checks that the residual vector vanishes on the active set and is
    nonpositive off it, that the attained value dominates the truncation
    point, and that ``beta*`` is a feasible unit vector supported exactly on
    the active set. Diagnostic: never raises on a bad candidate.
    """
    tau, sigma = _as_pair(tau, sigma)
    value = snr(opt.beta_star, tau, sigma)
    return _kkt_residual(opt.beta_star, opt.active_set, value, tau, sigma)


def enumerate_oracle(tau: np.ndarray, sigma: np.ndarray) -> OptResult:
    """Exhaustive reference solver over all 2^d - 1 candidate supports.

    For every nonempty support, the stationary candidate is the normalized
    pseudoinverse image of tau restricted to the support; infeasible
    (negative) candidates are discarded. All single-coordinate axes are
    included unconditionally. Intended as an independent oracle for
    :func:`solve_ost`; cost is exponential, so ``d <= 20``.
    """
    tau, sigma = _as_pair(tau, sigma)
    d = tau.shape[0]
    if d > 20:
        raise DataError(f"enumeration oracle limited to d <= 20, got d={d}")
    if not np.any(tau):
        raise DataError("degenerate input: tau is exactly zero")

    best_beta: np.ndarray | None = None
    best_val = -math.inf

    def consider(beta: np.ndarray):
        nonlocal best_beta, best_val
        q = float(beta @ sigma @ beta)
        if q <= 0.0:
            return
        val = float(beta @ tau) / math.sqrt(q)
        if val > best_val + 1e-15:
            best_val = val
            best_beta = beta

    for mask in range(1, 1 << d):
        idx = [u for u in range(d) if mask >> u & 1]
        sub = sigma[np.ix_(idx, idx)]
        # LAPACK-backed pseudoinverse: an algebra path independent of the
        # Jacobi-based routines the solver falls back on
        b = np.linalg.pinv(sub, hermitian=True) @ tau[idx]
        norm = np.linalg.norm(b)
        if norm <= 0.0:
            continue
        b = b / norm
        if np.any(b < -1e-12):
            continue
        beta = np.zeros(d)
        beta[idx] = np.maximum(b, 0.0)
        consider(beta)
    for u in range(d):
        beta = np.zeros(d)
        beta[u] = 1.0
        consider(beta)

    assert best_beta is not None  # single-coordinate candidates always valid
    beta = best_beta.copy()
    beta[beta < ZERO_THRESHOLD] = 0.0
    beta /= np.linalg.norm(beta)
    active = tuple(int(u) for u in np.flatnonzero(beta))
    value = snr(beta, tau, sigma)
    if np.all(tau < 0.0):
        branch = "all_negative"
    elif len(active) >= 2:
        branch = "interior_like"
    else:
        branch = "single_coordinate"
    residual = _kkt_residual(beta, active, value, tau, sigma)
    return OptResult(
        beta_star=beta,
        active_set=active,
        snr=value,
        kkt_residual=residual,
        branch=branch,
    )
