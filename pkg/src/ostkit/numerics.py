"""Small dense symmetric linear algebra, normal/chi special functions, and
deterministic random streams.

Symmetric matrices are plain ``numpy`` arrays; every entry point symmetrizes
its input exactly via ``(a + a.T)/2`` so downstream code can rely on
``m[i, j] == m[j, i]``. The eigensolver is a cyclic Jacobi sweep with a fixed
rotation order, which keeps results bit-reproducible across runs and
platforms with the same BLAS-free arithmetic.

Normal-distribution quantities are computed through the complementary error
function so that far tails keep full relative precision; quantiles are
obtained by bracketed root finding (bisection plus a secant polish) on the
corresponding cdf rather than by rational approximations.

Random streams follow a counter-style derivation: a stream is the value
``(seed, stream_id)`` and materializes a ``numpy`` PCG64 generator through
``SeedSequence(entropy=seed, spawn_key=(stream_id, ...))``. Identical stream
values always reproduce identical draws; distinct stream ids are independent
by construction. The generator choice (PCG64 via SeedSequence) is part of
the package contract and is documented in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammainc, gammaincc

from .exceptions import DataError, NumericalError, SingularMatrixError

__all__ = [
    "EigenDecomposition",
    "RngStream",
    "as_symmetric",
    "sym_eigen",
    "sym_inverse",
    "sym_pseudoinverse",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_quantile",
    "chi_cdf",
    "chi_sf",
    "chi_quantile",
    "truncated_normal_cdf",
    "truncated_normal_sf",
    "rng_standard_normal",
    "rng_uniform",
    "rng_multivariate_normal",
]

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# symmetric matrices


def as_symmetric(m: np.ndarray) -> np.ndarray:
    """Validate a square real matrix and return its exact symmetrization."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DataError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix contains non-finite entries")
    return 0.5 * (a + a.T)


class EigenDecomposition(NamedTuple):
    """Eigenvalues in ascending order and the matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eigen(m: np.ndarray, max_sweeps: int = 64) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    The sweep order is fixed (row-major over the strict upper triangle), so
    the result is deterministic. Converges when the largest off-diagonal
    entry falls below ``1e-14 * max(1, |A|_max)``; exceeding ``max_sweeps``
    raises :class:`NumericalError`.
    """
    a = as_symmetric(m)
    d = a.shape[0]
    v = np.eye(d)
    if d == 1:
        return EigenDecomposition(a[0].copy(), v)

    scale = max(1.0, float(np.max(np.abs(a))))
    tol = 1e-14 * scale
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max()
        if off <= tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(1.0 + theta * theta)
                )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ rot
    else:
        raise NumericalError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps"
        )

    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    return EigenDecomposition(lam[order], v[:, order])


def _condition_number(eigenvalues: np.ndarray) -> float:
    lam_max = float(eigenvalues[-1])
    lam_min = float(eigenvalues[0])
    if lam_max <= 0.0 or lam_min <= 0.0:
        return math.inf
    return lam_max / lam_min


def sym_inverse(m: np.ndarray, cond_limit: float = 1e10) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix.

    Raises :class:`SingularMatrixError` (carrying the condition number) when
    an eigenvalue is non-positive or the condition number exceeds
    ``cond_limit``.
    """
    lam, vecs = sym_eigen(m)
    cond = _condition_number(lam)
    if cond > cond_limit:
        raise SingularMatrixError("matrix is singular or ill-conditioned", cond)
    inv = (vecs / lam) @ vecs.T
    return 0.5 * (inv + inv.T)


def sym_pseudoinverse(
    m: np.ndarray, rank_tol: float = 1e-12
) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues at or below ``rank_tol * lambda_max`` (and all negative ones)
    are treated as zero. Returns ``(pinv, numerical_rank)``; total on any
    symmetric input.
    """
    lam, vecs = sym_eigen(m)
    lam_max = float(lam[-1])
    cutoff = rank_tol * max(lam_max, 0.0)
    keep = lam > cutoff
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        return np.zeros_like(np.asarray(m, dtype=float)), 0
    inv_lam = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    pinv = (vecs * inv_lam) @ vecs.T
    return 0.5 * (pinv + pinv.T), rank


# ---------------------------------------------------------------------------
# normal / chi distribution functions


def std_normal_cdf(x: float) -> float:
    """Standard normal cdf, stable in both tails (erfc-based)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_sf(x: float) -> float:
    """Standard normal survival function ``1 - cdf(x)`` with full tail precision."""
    return 0.5 * math.erfc(x / _SQRT2)


def _bracketed_root(
    f: Callable[[float], float], lo: float, hi: float, max_iter: int = 200
) -> float:
    """Root of a monotone nondecreasing ``f`` with ``f(lo) <= 0 <= f(hi)``.

    Bisection to localize, then an Illinois false-position polish; iterates
    the abscissa essentially to machine precision.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo > 0.0 or fhi < 0.0:
        raise NumericalError("root not bracketed")

    side = 0
    for _ in range(max_iter):
        if hi - lo <= 4.0 * math.ulp(max(1.0, abs(lo), abs(hi))):
            break
        if hi - lo > 1e-6 * max(1.0, abs(lo), abs(hi)) or fhi <= flo:
            x = 0.5 * (lo + hi)
        else:
            # Illinois secant step: halve the stuck endpoint's weight
            x = (lo * fhi - hi * flo) / (fhi - flo)
            if not (lo < x < hi):
                x = 0.5 * (lo + hi)
        if x <= lo or x >= hi:
            break
        fx = f(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
    return lo if abs(flo) <= abs(fhi) else hi


def std_normal_quantile(p: float) -> float:
    """Inverse standard normal cdf by root finding on :func:`std_normal_cdf`."""
    if not 0.0 < p < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    # cdf is exhausted (0 or 1 in doubles) beyond ~|39|
    return _bracketed_root(lambda t: std_normal_cdf(t) - p, -40.0, 40.0)


def chi_cdf(l: int, x: float) -> float:
    """Cdf of the chi distribution with ``l`` degrees of freedom.

    Equals the regularized lower incomplete gamma ``P(l/2, x^2/2)`` for
    ``x >= 0`` and 0 otherwise.
    """
    if l < 1:
        raise DataError(f"degrees of freedom must be >= 1, got {l}")
    if x <= 0.0:
        return 0.0
    return float(gammainc(0.5 * l, 0.5 * x * x))


def chi_sf(l: int, x: float) -> float:
    """Survival function of the chi distribution (upper incomplete gamma)."""
    if l < 1:
        raise DataError(f"degrees of freedom must be >= 1, got {l}")
    if x <= 0.0:
        return 1.0
    return float(gammaincc(0.5 * l, 0.5 * x * x))


@lru_cache(maxsize=512)
def chi_quantile(l: int, p: float) -> float:
    """Inverse chi cdf by root finding on :func:`chi_cdf`."""
    if not 0.0 < p < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {p}")
    if l < 1:
        raise DataError(f"degrees of freedom must be >= 1, got {l}")
    hi = float(l) + 10.0 * math.sqrt(l) + 10.0
    while chi_cdf(l, hi) < p:
        hi *= 2.0
        if hi > 1e8:
            raise NumericalError("chi quantile bracket expansion failed")
    return _bracketed_root(lambda t: chi_cdf(l, t) - p, 0.0, hi)


def truncated_normal_cdf(x: float, a: float) -> float:
    """Cdf at ``x`` of a standard normal truncated from below at ``a``.

    ``(cdf(x) - cdf(a)) / (1 - cdf(a))``, evaluated through survival
    functions so that large positive truncation points keep relative
    precision. ``a = -inf`` reduces to the plain normal cdf.
    """
    if math.isnan(x) or math.isnan(a):
        raise DataError("truncated normal arguments must not be NaN")
    if x < a:
        raise DataError(f"evaluation point {x} below truncation point {a}")
    if math.isinf(a) and a < 0:
        return std_normal_cdf(x)
    qa = std_normal_sf(a)
    if qa <= 0.0:
        raise NumericalError(f"truncation point {a} too far in the upper tail")
    return (qa - std_normal_sf(x)) / qa


def truncated_normal_sf(x: float, a: float) -> float:
    """Survival function companion of :func:`truncated_normal_cdf`.

    The ratio ``sf(x)/sf(a)`` keeps full relative precision arbitrarily far
    into the tail, which is what selective p-values need.
    """
    if math.isnan(x) or math.isnan(a):
        raise DataError("truncated normal arguments must not be NaN")
    if x < a:
        raise DataError(f"evaluation point {x} below truncation point {a}")
    if math.isinf(a) and a < 0:
        return std_normal_sf(x)
    qa = std_normal_sf(a)
    if qa <= 0.0:
        raise NumericalError(f"truncation point {a} too far in the upper tail")
    return std_normal_sf(x) / qa


# ---------------------------------------------------------------------------
# random streams

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A value identifying one reproducible random stream.

    ``(seed, stream_id)`` fully determines the output sequence; ``child(k)``
    derives an independent substream (used e.g. for split shuffles inside a
    Monte-Carlo trial).
    """

    seed: int
    stream_id: int
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed & _U64,
            spawn_key=tuple(k & _U64 for k in (self.stream_id, *self.path)),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (k,))


def rng_standard_normal(stream: RngStream, n: int) -> np.ndarray:
    return stream.generator().standard_normal(n)


def rng_uniform(
    stream: RngStream, n: int, low: float = 0.0, high: float = 1.0
) -> np.ndarray:
    return stream.generator().uniform(low, high, n)


def rng_multivariate_normal(
    stream: RngStream, mean: np.ndarray, cov: np.ndarray, n: int
) -> np.ndarray:
    """Draw ``n`` samples from N(mean, cov) via an eigenvalue square root.

    ``cov`` must be PSD up to an eigenvalue tolerance of ``-1e-8``; small
    negative eigenvalues above that are clamped to zero. The eigen-based
    square root keeps the sampler total on singular covariances.
    """
    mean = np.asarray(mean, dtype=float)
    lam, vecs = sym_eigen(cov)
    if lam[0] < -1e-8:
        raise DataError(
            f"covariance is not PSD (smallest eigenvalue {lam[0]:.3e})"
        )
    lam = np.clip(lam, 0.0, None)
    root = vecs * np.sqrt(lam)
    z = stream.generator().standard_normal((n, mean.shape[0]))
    return mean + z @ root.T
