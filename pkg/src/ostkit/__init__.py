"""Kernel two-sample tests with selective calibration.

Learn the kernel combination and test on the same data: the conditional
null distribution of the selected statistic is available in closed form
(chi, or normal truncated from below), so no data splitting and no
permutation simulation is needed.
"""

from .exceptions import (
    DataError,
    IdxFormatError,
    NumericalError,
    OstkitError,
    SingularMatrixError,
)
from .kernels import (
    BaseStatistics,
    KernelSpec,
    PairedSample,
    compute_base_statistics,
    eval_kernel,
    h_statistic,
    median_heuristic,
    split_base_statistics,
)
from .numerics import RngStream
from .optimizer import (
    OptResult,
    beta_infinity,
    enumerate_oracle,
    kkt_check,
    snr,
    snr_gradient,
    solve_ost,
)
from .seltest import (
    CanonicalStatistics,
    TestOutcome,
    base_test,
    canonicalize,
    naive_test,
    ost_beta_pos_test,
    ost_test,
    ost_threshold,
    split_test,
    v_minus_ost,
    wald_test,
)

__version__ = "0.1.0"

__all__ = [
    "BaseStatistics",
    "CanonicalStatistics",
    "DataError",
    "IdxFormatError",
    "KernelSpec",
    "NumericalError",
    "OptResult",
    "OstkitError",
    "PairedSample",
    "RngStream",
    "SingularMatrixError",
    "TestOutcome",
    "base_test",
    "beta_infinity",
    "canonicalize",
    "compute_base_statistics",
    "enumerate_oracle",
    "eval_kernel",
    "h_statistic",
    "kkt_check",
    "median_heuristic",
    "naive_test",
    "ost_beta_pos_test",
    "ost_test",
    "ost_threshold",
    "snr",
    "snr_gradient",
    "solve_ost",
    "split_base_statistics",
    "split_test",
    "v_minus_ost",
    "wald_test",
    "__version__",
]
