"""Shared test utilities: seeded problem generators and independent oracles.

The oracles here deliberately use different algebra paths than the library
(LAPACK SVD/eigh, explicit loops, scipy.linalg.null_space) so that
agreement is evidence, not tautology.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import null_space

from ostkit.kernels import KernelSpec, eval_kernel, h_statistic, PairedSample


def random_pd(rng: np.random.Generator, d: int, lam_low=0.1, lam_high=10.0):
    """Random PD matrix with eigenvalues uniform in [lam_low, lam_high]."""
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    lam = rng.uniform(lam_low, lam_high, d)
    return q @ np.diag(lam) @ q.T


def ks_statistic(sample: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a callable cdf."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    f = np.array([cdf(v) for v in x])
    upper = np.max(np.arange(1, m + 1) / m - f)
    lower = np.max(f - np.arange(0, m) / m)
    return max(upper, lower)


def brute_force_base_statistics(X, Y, kernels: list[KernelSpec]):
    """Direct per-pair evaluation of tau and sigma through the scalar
    kernel/h functions (the arithmetic oracle for compute_base_statistics)."""
    X = np.atleast_2d(np.asarray(X, float).T).T
    Y = np.atleast_2d(np.asarray(Y, float).T).T
    m = X.shape[0] - (X.shape[0] % 2)
    n = m // 2
    d = len(kernels)
    h = np.zeros((n, d))
    for i in range(n):
        z = PairedSample(X[i], X[n + i], Y[i], Y[n + i])
        for j, k in enumerate(kernels):
            h[i, j] = h_statistic(k, z)
    mean = h.mean(axis=0)
    tau = math.sqrt(n) * mean
    sigma = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            sigma[a, b] = np.mean(h[:, a] * h[:, b]) - mean[a] * mean[b]
    return tau, sigma, n


def brute_force_median_distance(points: np.ndarray) -> float:
    """Lower median of all pairwise distances via explicit loops."""
    pts = np.atleast_2d(np.asarray(points, float).T).T
    dists = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            dists.append(float(np.linalg.norm(pts[i] - pts[j])))
    dists.sort()
    return dists[(len(dists) - 1) // 2]


def original_coordinates_optimum(tau: np.ndarray, sigma: np.ndarray) -> float:
    """Maximum of beta.tau / sqrt(beta.Sigma.beta) over the original
    feasible cone ``Sigma beta >= 0`` by enumerating its faces.

    For each candidate set U of non-binding constraints, the face
    ``{(Sigma beta)_u = 0 for u not in U}`` is the null space of the
    corresponding rows of Sigma; the objective's stationary directions on
    that subspace are ``+-(B' Sigma B)^{-1} B' tau`` for a basis B. Feasible
    stationary candidates across all faces cover the global optimum.
    """
    d = tau.shape[0]
    best = -math.inf
    for mask in range(1, 1 << d):
        binding = [u for u in range(d) if not (mask >> u & 1)]
        if binding:
            B = null_space(sigma[binding, :])
        else:
            B = np.eye(d)
        if B.shape[1] == 0:
            continue
        M = B.T @ sigma @ B
        rhs = B.T @ tau
        try:
            w = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.linalg.norm(w) <= 1e-14:
            w = np.ones(B.shape[1])
        for sign in (1.0, -1.0):
            beta = sign * (B @ w)
            g = sigma @ beta
            if np.any(g < -1e-10 * max(1.0, np.max(np.abs(g)))):
                continue
            q = float(beta @ sigma @ beta)
            if q <= 0.0:
                continue
            best = max(best, float(beta @ tau) / math.sqrt(q))
    return best
