"""Selective hypothesis tests on a vector of jointly normal statistics.

Implements the one-sided selective test (OST) with its closed-form
conditional null distributions, the Wald test, selection from the base
statistics via the polyhedral lemma, data splitting, the deliberately
miscalibrated naive baseline, and the beta >= 0 constraint variant.

The OST pipeline: transform to canonical form (rho = inv(Sigma).tau,
Sigma' = inv(Sigma)), maximize the SNR over the nonnegative unit sphere,
read off the active set, and calibrate against chi_l (l active coordinates,
l >= 2) or a normal truncated from below at V^- (l = 1). Near-singular
covariances take the pseudoinverse route: directions in the numerical null
space that carry signal force an immediate rejection (infinite SNR),
otherwise the effective degrees of freedom come from the rank of the
active block of the pseudoinverse.

p-values are an extension of the thresholds: they invert the same
conditional cdfs, so ``reject == (p_value < alpha) == (statistic >
threshold)`` up to one shared floating-point comparison.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DataError, NumericalError, SingularMatrixError
from .kernels import BaseStatistics, KernelSpec, split_base_statistics
from .numerics import (
    RngStream,
    as_symmetric,
    chi_quantile,
    chi_sf,
    std_normal_quantile,
    std_normal_sf,
    sym_eigen,
    sym_pseudoinverse,
    truncated_normal_sf,
)
from .optimizer import OptResult, compute_z, solve_ost

__all__ = [
    "COND_THRESHOLD",
    "NULL_TOL",
    "CanonicalStatistics",
    "TestOutcome",
    "canonicalize",
    "v_minus_ost",
    "ost_threshold",
    "ost_test",
    "wald_test",
    "base_test",
    "split_test",
    "naive_test",
    "ost_beta_pos_test",
]

# condition number beyond which the covariance is treated as singular, and
# the relative signal size in a null direction that forces rejection
COND_THRESHOLD = 1e10
NULL_TOL = 1e-6


@dataclass(frozen=True)
class CanonicalStatistics:
    """Canonical-form statistics: ``rho = Sigma'.tau`` with ``Sigma'`` the
    inverse (or pseudoinverse, on the singular path) of the covariance.

    ``immediate_reject`` is set when a numerical null-space direction
    carries signal; ``rank`` is the retained spectral rank. On the singular
    path the effective degrees of freedom of an active set are the rank of
    its ``Sigma'`` block, exposed via :meth:`effective_l`.
    """

    rho: np.ndarray
    sigma_prime: np.ndarray
    singular: bool
    immediate_reject: bool
    cond_number: float
    rank: int

    def effective_l(self, active_set: tuple[int, ...]) -> int:
        if not self.singular:
            return len(active_set)
        idx = list(active_set)
        sub = self.sigma_prime[np.ix_(idx, idx)]
        _, rank = sym_pseudoinverse(sub, rank_tol=1.0 / COND_THRESHOLD)
        return max(rank, 1)


@dataclass(frozen=True)
class TestOutcome:
    """Result of one hypothesis test plus the selection diagnostics."""

    statistic: float
    threshold: float
    p_value: float
    reject: bool
    l: int
    active_set: tuple[int, ...]
    v_minus: float
    method: str
    branch: str | None = None
    warnings: tuple[str, ...] = ()


# eigendecomposition work per covariance matrix is cached: Monte-Carlo
# conditioning studies call the pipeline many times with the same Sigma
_DECOMP_CACHE: OrderedDict[tuple, tuple] = OrderedDict()
_DECOMP_CACHE_SIZE = 16


def _sigma_decomposition(sigma: np.ndarray, cond_threshold: float):
    """Cached ``(cond, sigma_prime, rank, null_vectors)`` for a covariance.

    ``sigma_prime`` is the inverse when ``cond <= cond_threshold`` and the
    rank-truncated pseudoinverse otherwise; ``null_vectors`` holds the
    discarded eigenvectors (empty on the regular path).
    """
    key = (sigma.tobytes(), sigma.shape[0], cond_threshold)
    hit = _DECOMP_CACHE.get(key)
    if hit is not None:
        _DECOMP_CACHE.move_to_end(key)
        return hit

    lam, vecs = sym_eigen(sigma)
    lam_max = float(lam[-1])
    lam_min = float(lam[0])
    cond = math.inf if lam_min <= 0.0 else lam_max / lam_min
    if cond <= cond_threshold:
        inv = (vecs / lam) @ vecs.T
        result = (cond, 0.5 * (inv + inv.T), sigma.shape[0], vecs[:, :0])
    else:
        cutoff = max(lam_max, 0.0) / cond_threshold
        keep = lam > cutoff
        rank = int(np.count_nonzero(keep))
        if rank == 0:
            pinv = np.zeros_like(sigma)
        else:
            inv_lam = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
            pinv = (vecs * inv_lam) @ vecs.T
            pinv = 0.5 * (pinv + pinv.T)
        result = (cond, pinv, rank, vecs[:, ~keep])

    _DECOMP_CACHE[key] = result
    if len(_DECOMP_CACHE) > _DECOMP_CACHE_SIZE:
        _DECOMP_CACHE.popitem(last=False)
    return result


def canonicalize(
    stats: BaseStatistics,
    cond_threshold: float = COND_THRESHOLD,
    null_tol: float = NULL_TOL,
    ridge: float = 0.0,
) -> CanonicalStatistics:
    """Map base statistics to canonical form, handling singular covariance.

    ``ridge > 0`` adds ``ridge * I`` to the covariance before inversion;
    this restores conditioning but is conservative (it deflates every
    statistic), so it is off by default.
    """
    sigma = as_symmetric(stats.sigma)
    if ridge > 0.0:
        sigma = sigma + ridge * np.eye(sigma.shape[0])
    cond, sigma_prime, rank, null_vecs = _sigma_decomposition(
        sigma, cond_threshold
    )
    tau = stats.tau
    singular = rank < sigma.shape[0]
    immediate = False
    if singular and null_vecs.shape[1] > 0:
        tau_norm = float(np.linalg.norm(tau))
        if tau_norm > 0.0:
            overlap = float(np.max(np.abs(null_vecs.T @ tau)))
            immediate = overlap > null_tol * tau_norm
    return CanonicalStatistics(
        rho=sigma_prime @ tau,
        sigma_prime=sigma_prime,
        singular=singular,
        immediate_reject=immediate,
        cond_number=cond,
        rank=rank,
    )


def v_minus_ost(
    opt: OptResult, z: np.ndarray, sigma_prime: np.ndarray
) -> float:
    """Lower truncation point of the conditional law when one coordinate is
    active: the largest ratio ``z_u sqrt(q) / (sqrt(S_uu) sqrt(q) - (S b)_u)``
    over inactive coordinates (``q = b.S.b``). Empty set of inactive
    coordinates gives ``-inf``."""
    sigma_prime = as_symmetric(sigma_prime)
    beta = opt.beta_star
    q = float(beta @ sigma_prime @ beta)
    if q <= 0.0:
        raise NumericalError("active direction has non-positive variance")
    sq = math.sqrt(q)
    sb = sigma_prime @ beta
    active_mask = np.zeros(beta.shape[0], dtype=bool)
    active_mask[list(opt.active_set)] = True
    best = -math.inf
    for u in np.flatnonzero(~active_mask):
        denom = math.sqrt(sigma_prime[u, u]) * sq - float(sb[u])
        if denom <= 0.0:
            raise NumericalError(
                f"truncation denominator non-positive at coordinate {u}; "
                "covariance violates the strict Cauchy-Schwarz assumption"
            )
        best = max(best, float(z[u]) * sq / denom)
    return best


@lru_cache(maxsize=512)
def _chi_threshold(l: int, alpha: float) -> float:
    return chi_quantile(l, 1.0 - alpha)


def ost_threshold(alpha: float, l: int, v_minus: float) -> float:
    """Selection-adjusted test threshold.

    ``l >= 2``: the ``1 - alpha`` quantile of chi with ``l`` degrees of
    freedom. ``l = 1``: the quantile of a standard normal truncated from
    below at ``v_minus``, computed in complementary form
    ``-Phi^{-1}(alpha * (1 - Phi(v)))`` so large truncation points keep
    precision (identical to the textbook expression
    ``Phi^{-1}((1-alpha)(1-Phi(v)) + Phi(v))``).
    """
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    if l < 1:
        raise DataError(f"l must be >= 1, got {l}")
    if l >= 2:
        return _chi_threshold(l, alpha)
    if math.isnan(v_minus) or (math.isinf(v_minus) and v_minus > 0):
        raise DataError(f"invalid truncation point {v_minus}")
    tail = alpha * std_normal_sf(v_minus)
    return -std_normal_quantile(tail)


def _truncated_p_value(statistic: float, v_minus: float) -> float:
    if statistic <= v_minus:
        # cannot occur at an exact optimum; clamp for fp robustness
        return 1.0
    return min(1.0, truncated_normal_sf(statistic, v_minus))


def _immediate_reject_outcome(
    canon: CanonicalStatistics, alpha: float, method: str
) -> TestOutcome:
    l = max(canon.rank, 1)
    return TestOutcome(
        statistic=math.inf,
        threshold=ost_threshold(alpha, l, -math.inf),
        p_value=0.0,
        reject=True,
        l=l,
        active_set=(),
        v_minus=-math.inf,
        method=method,
        branch=None,
        warnings=("null-space-signal",),
    )


def _theorem_outcome(
    opt: OptResult,
    canon_l: int,
    tau: np.ndarray,
    sigma: np.ndarray,
    alpha: float,
    method: str,
    warnings: tuple[str, ...] = (),
) -> TestOutcome:
    """Calibrate a solved maximization against its conditional null law."""
    stat = opt.snr
    if canon_l >= 2:
        threshold = ost_threshold(alpha, canon_l, -math.inf)
        p_value = chi_sf(canon_l, stat)
        v_minus = -math.inf
    else:
        z = compute_z(opt, tau, sigma)
        v_minus = v_minus_ost(opt, z, sigma)
        threshold = ost_threshold(alpha, 1, v_minus)
        p_value = _truncated_p_value(stat, v_minus)
    return TestOutcome(
        statistic=stat,
        threshold=threshold,
        p_value=p_value,
        reject=stat > threshold,
        l=canon_l,
        active_set=opt.active_set,
        v_minus=v_minus,
        method=method,
        branch=opt.branch,
        warnings=warnings,
    )


def ost_test(
    stats: BaseStatistics,
    alpha: float,
    cond_threshold: float = COND_THRESHOLD,
    null_tol: float = NULL_TOL,
    ridge: float = 0.0,
) -> TestOutcome:
    """The selective one-sided test: canonical transform, SNR maximization,
    and the selection-adjusted threshold."""
    canon = canonicalize(stats, cond_threshold, null_tol, ridge)
    if canon.immediate_reject:
        return _immediate_reject_outcome(canon, alpha, "ost")
    opt = solve_ost(canon.rho, canon.sigma_prime)
    l = canon.effective_l(opt.active_set)
    return _theorem_outcome(
        opt, l, canon.rho, canon.sigma_prime, alpha, "ost"
    )


def wald_test(stats: BaseStatistics, alpha: float) -> TestOutcome:
    """Unconstrained maximization: ``sqrt(tau . inv(Sigma) . tau)`` against a
    chi null with as many degrees of freedom as (effective) dimensions.

    The square root of the quadratic form is taken after a linear solve;
    no matrix square root is formed. Singular covariances use the
    pseudoinverse with degrees of freedom equal to the rank.
    """
    sigma = as_symmetric(stats.sigma)
    tau = stats.tau
    cond, sigma_prime, rank, null_vecs = _sigma_decomposition(
        sigma, COND_THRESHOLD
    )
    warnings: tuple[str, ...] = ()
    if rank == sigma.shape[0]:
        x = np.linalg.solve(sigma, tau)
        dof = stats.d
    else:
        x = sigma_prime @ tau
        dof = max(rank, 1)
        warnings = ("singular-covariance-rank-dof",)
    stat = math.sqrt(max(float(tau @ x), 0.0))
    threshold = _chi_threshold(dof, alpha)
    return TestOutcome(
        statistic=stat,
        threshold=threshold,
        p_value=chi_sf(dof, stat),
        reject=stat > threshold,
        l=dof,
        active_set=tuple(range(stats.d)),
        v_minus=-math.inf,
        method="wald",
        warnings=warnings,
    )


def base_test(stats: BaseStatistics, alpha: float) -> TestOutcome:
    """Select the best-scoring base statistic and calibrate it against the
    polyhedral-lemma truncated normal.

    The winner is ``argmax tau_u / sd_u`` (lowest index on ties); its
    truncation point maximizes ``sd_w z_j / (sd_w sd_j - Sigma_wj)`` over
    the other coordinates. A denominator at zero means two statistics are
    perfectly correlated, which makes the selection ill-posed.
    """
    sigma = as_symmetric(stats.sigma)
    tau = stats.tau
    sd = np.sqrt(np.diag(sigma))
    if np.any(np.diag(sigma) <= 0.0):
        raise DataError("every statistic needs positive variance")
    scores = tau / sd
    w = int(np.argmax(scores))
    stat = float(scores[w])
    z = tau - sigma[:, w] * (tau[w] / sigma[w, w])
    v_minus = -math.inf
    for j in range(stats.d):
        if j == w:
            continue
        denom = float(sd[w] * sd[j] - sigma[w, j])
        if denom <= 1e-12 * float(sd[w] * sd[j]):
            raise DataError(
                f"statistics {w} and {j} are perfectly correlated; "
                "remove duplicated kernels"
            )
        v_minus = max(v_minus, float(sd[w] * z[j]) / denom)
    threshold = ost_threshold(alpha, 1, v_minus)
    p_value = _truncated_p_value(stat, v_minus)
    return TestOutcome(
        statistic=stat,
        threshold=threshold,
        p_value=p_value,
        reject=stat > threshold,
        l=1,
        active_set=(w,),
        v_minus=v_minus,
        method="base",
    )


def naive_test(
    stats: BaseStatistics,
    alpha: float,
    cond_threshold: float = COND_THRESHOLD,
    null_tol: float = NULL_TOL,
    ridge: float = 0.0,
) -> TestOutcome:
    """Same statistic as :func:`ost_test`, but compared against the plain
    normal quantile as if no selection had happened. Not a calibrated test;
    kept as the cautionary baseline and flagged as such."""
    canon = canonicalize(stats, cond_threshold, null_tol, ridge)
    if canon.immediate_reject:
        return _immediate_reject_outcome(canon, alpha, "naive")
    opt = solve_ost(canon.rho, canon.sigma_prime)
    l = canon.effective_l(opt.active_set)
    stat = opt.snr
    threshold = std_normal_quantile(1.0 - alpha)
    return TestOutcome(
        statistic=stat,
        threshold=threshold,
        p_value=std_normal_sf(stat),
        reject=stat > threshold,
        l=l,
        active_set=opt.active_set,
        v_minus=-math.inf,
        method="naive",
        branch=opt.branch,
        warnings=("not-calibrated",),
    )


def ost_beta_pos_test(stats: BaseStatistics, alpha: float) -> TestOutcome:
    """Selective test under the simple positivity constraint ``beta >= 0``
    (no canonical transform); calibrated through the same conditional laws
    evaluated on the untransformed statistics."""
    sigma = as_symmetric(stats.sigma)
    cond, _, rank, _ = _sigma_decomposition(sigma, COND_THRESHOLD)
    if rank < stats.d:
        raise SingularMatrixError(
            "beta >= 0 variant requires a positive definite covariance", cond
        )
    opt = solve_ost(stats.tau, sigma)
    return _theorem_outcome(
        opt, len(opt.active_set), stats.tau, sigma, alpha, "ost_beta_pos"
    )


def split_test(
    X: np.ndarray,
    Y: np.ndarray,
    kernels: list[KernelSpec],
    train_fraction: float,
    alpha: float,
    constraint: str = "sigma_beta_pos",
    stream: RngStream = RngStream(0, 0),
) -> TestOutcome:
    """Data splitting: learn the combination on a training split, test on
    the held-out split with the full-sample covariance.

    ``constraint`` picks the learning feasible set: ``sigma_beta_pos``
    (the canonical-form constraint, solved per the canonical transform) or
    ``beta_pos`` (plain positivity). The held-out statistic is
    ``beta.tau_te / sqrt(beta.Sigma.beta)``, standard normal under the null.
    """
    if constraint not in ("sigma_beta_pos", "beta_pos"):
        raise DataError(f"unknown constraint {constraint!r}")
    train, test = split_base_statistics(X, Y, kernels, train_fraction, stream)
    sigma = as_symmetric(test.sigma)
    warnings: tuple[str, ...] = ()
    try:
        if constraint == "sigma_beta_pos":
            canon = canonicalize(train)
            if canon.singular:
                raise SingularMatrixError(
                    "split with canonical constraint needs an invertible "
                    "covariance",
                    canon.cond_number,
                )
            opt = solve_ost(canon.rho, canon.sigma_prime)
            beta_hat = canon.sigma_prime @ opt.beta_star
        else:
            opt = solve_ost(train.tau, sigma)
            beta_hat = opt.beta_star
        active = opt.active_set
    except DataError:
        # degenerate training optimum (tau_tr = 0): fall back to the first
        # coordinate and flag it
        beta_hat = np.zeros(train.d)
        beta_hat[0] = 1.0
        active = (0,)
        warnings = ("degenerate-training-fallback",)
    q = float(beta_hat @ sigma @ beta_hat)
    if q <= 0.0:
        raise NumericalError("learned direction has non-positive variance")
    stat = float(beta_hat @ test.tau) / math.sqrt(q)
    threshold = std_normal_quantile(1.0 - alpha)
    return TestOutcome(
        statistic=stat,
        threshold=threshold,
        p_value=std_normal_sf(stat),
        reject=stat > threshold,
        l=1,
        active_set=active,
        v_minus=-math.inf,
        method="split",
        warnings=warnings,
    )
