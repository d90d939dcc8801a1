"""Kernel evaluation, bandwidth heuristics, the paired h-statistic of the
linear-time squared-MMD estimator, and estimation of the scaled statistic
vector with its covariance.

Conventions (the literature leaves these open, so they are pinned here):

* Gaussian kernel ``k(a, b) = exp(-||a - b||^2 / (2 * bandwidth^2))``.
* The median heuristic takes the lower median of the unsquared pairwise
  Euclidean distances over the pooled sample, truncated to at most ``cap``
  points taken from the front.
* Samples of size ``2n`` are paired as ``z_i = (x_i, x_{n+i}, y_i, y_{n+i})``
  in the order given; we never reshuffle the caller's data. An odd trailing
  point is dropped from each sample.
* The covariance estimate uses the biased ``1/n`` normalization.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import DataError
from .numerics import RngStream

__all__ = [
    "KernelSpec",
    "PairedSample",
    "BaseStatistics",
    "eval_kernel",
    "median_heuristic",
    "h_statistic",
    "compute_base_statistics",
    "split_base_statistics",
]


@dataclass(frozen=True)
class KernelSpec:
    """A parameterized positive-definite kernel.

    ``kind`` is one of ``gaussian`` (needs ``bandwidth > 0``), ``linear``,
    or ``polynomial`` (the homogeneous polynomial ``(a . b)^degree``,
    ``degree >= 1``).
    """

    kind: str
    bandwidth: float | None = None
    degree: int | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise DataError(
                    f"gaussian kernel needs bandwidth > 0, got {self.bandwidth}"
                )
        elif self.kind == "linear":
            if self.bandwidth is not None or self.degree is not None:
                raise DataError("linear kernel takes no parameters")
        elif self.kind == "polynomial":
            if self.degree is None or self.degree < 1:
                raise DataError(
                    f"polynomial kernel needs degree >= 1, got {self.degree}"
                )
        else:
            raise DataError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, bandwidth: float) -> "KernelSpec":
        return cls("gaussian", bandwidth=float(bandwidth))

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int) -> "KernelSpec":
        return cls("polynomial", degree=int(degree))

    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gauss:{self.bandwidth:g}"
        if self.kind == "polynomial":
            return f"poly:{self.degree}"
        return "linear"


@dataclass(frozen=True)
class PairedSample:
    """One 4-tuple ``(x, x', y, y')`` of points sharing a dimension."""

    x: np.ndarray
    x_prime: np.ndarray
    y: np.ndarray
    y_prime: np.ndarray

    def __post_init__(self):
        pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in
               (self.x, self.x_prime, self.y, self.y_prime)]
        dims = {p.shape for p in pts}
        if len(dims) != 1:
            raise DataError(f"paired sample points disagree in dimension: {dims}")
        object.__setattr__(self, "x", pts[0])
        object.__setattr__(self, "x_prime", pts[1])
        object.__setattr__(self, "y", pts[2])
        object.__setattr__(self, "y_prime", pts[3])


@dataclass(frozen=True)
class BaseStatistics:
    """Scaled statistic vector ``tau = sqrt(n) * mean(h)`` and covariance.

    ``tau`` already carries the ``sqrt(n)`` factor, so under the null it is
    asymptotically ``N(0, sigma)``. ``n`` is the pair count, ``d`` the
    number of kernels.
    """

    tau: np.ndarray
    sigma: np.ndarray
    n: int
    d: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if tau.ndim != 1:
            raise DataError(f"tau must be a vector, got shape {tau.shape}")
        d = tau.shape[0]
        if d < 1 or self.d != d:
            raise DataError(f"inconsistent kernel count: d={self.d}, |tau|={d}")
        if sigma.shape != (d, d):
            raise DataError(f"sigma must be {d}x{d}, got {sigma.shape}")
        if self.n < 2:
            raise DataError(f"need at least 2 pairs, got n={self.n}")
        if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(sigma))):
            raise DataError("statistics contain non-finite entries")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))


def eval_kernel(k: KernelSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate ``k(a, b)`` for two points of equal dimension."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise DataError(f"point dimensions differ: {a.shape} vs {b.shape}")
    if k.kind == "gaussian":
        diff = a - b
        return math.exp(-float(diff @ diff) / (2.0 * k.bandwidth**2))
    dot = float(a @ b)
    if k.kind == "linear":
        return dot
    return dot**k.degree


def median_heuristic(pooled: np.ndarray, cap: int = 1000) -> float:
    """Lower median of pairwise Euclidean distances over the pooled sample.

    At most ``cap`` points, taken deterministically from the front, enter
    the O(cap^2) distance computation. Raises :class:`DataError` when the
    median distance is zero (all points identical, or mostly duplicated).
    """
    pts = np.asarray(pooled, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        raise DataError("median heuristic needs at least 2 points")
    pts = pts[:cap]
    dists = pdist(pts)
    k = (dists.size - 1) // 2  # lower median
    median = float(np.partition(dists, k)[k])
    if median <= 0.0:
        raise DataError(
            "degenerate sample: median pairwise distance is zero "
            "(points identical or mostly duplicated)"
        )
    return median


def h_statistic(k: KernelSpec, z: PairedSample) -> float:
    """``k(x,x') + k(y,y') - k(x,y') - k(y,x')`` for one paired sample."""
    return (
        eval_kernel(k, z.x, z.x_prime)
        + eval_kernel(k, z.y, z.y_prime)
        - eval_kernel(k, z.x, z.y_prime)
        - eval_kernel(k, z.y, z.x_prime)
    )


def _as_points(sample: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(sample, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-D array of points, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def _h_matrix(
    x: np.ndarray, xp: np.ndarray, y: np.ndarray, yp: np.ndarray,
    kernels: list[KernelSpec],
) -> np.ndarray:
    """Per-pair h values, one column per kernel. Shared distance/dot terms
    are computed once across kernels of the same family."""
    n = x.shape[0]
    need_sq = any(k.kind == "gaussian" for k in kernels)
    need_dot = any(k.kind in ("linear", "polynomial") for k in kernels)
    if need_sq:
        sq = [
            np.sum((a - b) ** 2, axis=1)
            for a, b in ((x, xp), (y, yp), (x, yp), (y, xp))
        ]
    if need_dot:
        dots = [
            np.sum(a * b, axis=1)
            for a, b in ((x, xp), (y, yp), (x, yp), (y, xp))
        ]
    h = np.empty((n, len(kernels)))
    for j, k in enumerate(kernels):
        if k.kind == "gaussian":
            g = -0.5 / k.bandwidth**2
            h[:, j] = (
                np.exp(g * sq[0]) + np.exp(g * sq[1])
                - np.exp(g * sq[2]) - np.exp(g * sq[3])
            )
        elif k.kind == "linear":
            h[:, j] = dots[0] + dots[1] - dots[2] - dots[3]
        else:
            u = k.degree
            h[:, j] = dots[0] ** u + dots[1] ** u - dots[2] ** u - dots[3] ** u
    return h


def compute_base_statistics(
    X: np.ndarray, Y: np.ndarray, kernels: list[KernelSpec]
) -> BaseStatistics:
    """Pair the samples, evaluate per-pair h values, and form (tau, sigma).

    ``|X| == |Y|`` is required; an odd trailing point is dropped from each
    sample. ``tau[u] = sqrt(n) * mean_k h_u(z_k)`` and ``sigma`` is the
    biased (1/n) second-moment covariance of the h columns.
    """
    if not kernels:
        raise DataError("need at least one kernel")
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"samples differ in size: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[1] != Y.shape[1]:
        raise DataError(
            f"samples differ in dimension: {X.shape[1]} vs {Y.shape[1]}"
        )
    m = X.shape[0] - (X.shape[0] % 2)
    n = m // 2
    if n < 2:
        raise DataError(f"need at least 2 pairs, got {n}")
    h = _h_matrix(X[:n], X[n:m], Y[:n], Y[n:m], kernels)
    mean_h = h.mean(axis=0)
    tau = math.sqrt(n) * mean_h
    sigma = (h.T @ h) / n - np.outer(mean_h, mean_h)
    return BaseStatistics(tau=tau, sigma=sigma, n=n, d=len(kernels))


def split_base_statistics(
    X: np.ndarray,
    Y: np.ndarray,
    kernels: list[KernelSpec],
    train_fraction: float,
    stream: RngStream = RngStream(0, 0),
) -> tuple[BaseStatistics, BaseStatistics]:
    """Split the pair index range into train/test halves after a seeded
    shuffle of pair order.

    ``floor(train_fraction * n)`` pairs go to training; each half keeps its
    original pairing and is processed by :func:`compute_base_statistics`.
    Both returned statistics carry the full-sample covariance estimate.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    full = compute_base_statistics(X, Y, kernels)
    n = full.n
    n_tr = int(math.floor(train_fraction * n))
    n_te = n - n_tr
    if n_tr < 2 or n_te < 2:
        raise DataError(
            f"split leaves too few pairs: train={n_tr}, test={n_te} (need >= 2)"
        )
    perm = stream.generator().permutation(n)

    def half(idx: np.ndarray) -> BaseStatistics:
        xs = np.concatenate([X[idx], X[n + idx]])
        ys = np.concatenate([Y[idx], Y[n + idx]])
        stats = compute_base_statistics(xs, ys, kernels)
        return dataclasses.replace(stats, sigma=full.sigma)

    return half(perm[:n_tr]), half(perm[n_tr:])
