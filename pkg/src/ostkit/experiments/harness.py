"""Monte-Carlo harness estimating rejection rates across methods.

Every trial derives its own random stream from ``(seed, trial_index)``, so
results are independent of execution order and worker count: running with
one process or eight produces identical rates. Within a trial all methods
see the same generated data (paired comparison), and bandwidth selection is
redone on that trial's pooled sample.

Per-trial errors (e.g. a degenerate covariance) are counted per method and
excluded from the rate denominator; more than 1% failures for any method
fails the whole run.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError, NumericalError, OstkitError
from ..kernels import KernelSpec, compute_base_statistics, median_heuristic
from ..numerics import RngStream
from ..seltest import (
    base_test,
    naive_test,
    ost_beta_pos_test,
    ost_test,
    split_test,
    wald_test,
)
from .datasets import DatasetSpec

__all__ = ["KernelMenuSpec", "MCReport", "run_monte_carlo", "parse_method"]

_D6_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelMenuSpec:
    """A kernel menu: a named preset or an explicit kernel list.

    Presets: ``d1`` (median-bandwidth Gaussian), ``d2`` (that plus linear),
    ``d6`` (Gaussians at 0.25/0.5/1/2/4 times the median bandwidth plus
    linear), ``poly<k>`` (homogeneous polynomials of degree 1..k).
    """

    preset: str | None = None
    kernels: tuple[KernelSpec, ...] | None = None

    def __post_init__(self):
        if (self.preset is None) == (self.kernels is None):
            raise DataError("specify exactly one of preset or kernels")
        if self.preset is not None and self.preset not in ("d1", "d2", "d6"):
            if not (self.preset.startswith("poly") and self.preset[4:].isdigit()
                    and int(self.preset[4:]) >= 1):
                raise DataError(f"unknown kernel menu preset {self.preset!r}")
        if self.kernels is not None and len(self.kernels) == 0:
            raise DataError("explicit kernel menu is empty")

    @classmethod
    def parse(cls, text: str) -> "KernelMenuSpec":
        """Parse ``d1|d2|d6|poly<k>`` or an explicit comma list like
        ``gauss:1.5,linear,poly:3``."""
        text = text.strip()
        if text in ("d1", "d2", "d6") or (
            text.startswith("poly") and text[4:].isdigit()
        ):
            return cls(preset=text)
        kernels = []
        for item in text.split(","):
            item = item.strip()
            if item == "linear":
                kernels.append(KernelSpec.linear())
            elif item.startswith("gauss:"):
                try:
                    kernels.append(KernelSpec.gaussian(float(item[6:])))
                except ValueError:
                    raise DataError(f"bad gaussian bandwidth in {item!r}")
            elif item.startswith("poly:"):
                try:
                    kernels.append(KernelSpec.polynomial(int(item[5:])))
                except ValueError:
                    raise DataError(f"bad polynomial degree in {item!r}")
            else:
                raise DataError(f"cannot parse kernel {item!r}")
        return cls(kernels=tuple(kernels))

    def label(self) -> str:
        if self.preset is not None:
            return self.preset
        return ",".join(k.label() for k in self.kernels)

    def build(self, X: np.ndarray, Y: np.ndarray) -> list[KernelSpec]:
        """Materialize the menu; presets needing a bandwidth compute the
        median heuristic on the pooled sample."""
        if self.kernels is not None:
            return list(self.kernels)
        if self.preset.startswith("poly"):
            return [
                KernelSpec.polynomial(u)
                for u in range(1, int(self.preset[4:]) + 1)
            ]
        pooled = np.vstack([np.atleast_2d(X.T).T, np.atleast_2d(Y.T).T])
        bw = median_heuristic(pooled)
        if self.preset == "d1":
            return [KernelSpec.gaussian(bw)]
        if self.preset == "d2":
            return [KernelSpec.gaussian(bw), KernelSpec.linear()]
        return [
            KernelSpec.gaussian(m * bw) for m in _D6_MULTIPLIERS
        ] + [KernelSpec.linear()]


@dataclass(frozen=True)
class MCReport:
    """Rejection-rate estimate for one method over the evaluated trials.

    ``trials`` counts trials that produced a decision; ``failures`` counts
    per-trial errors (excluded from the rate). ``std_error`` is the
    binomial standard error ``sqrt(r (1 - r) / trials)``.
    """

    method: str
    n: int
    trials: int
    rejection_rate: float
    std_error: float
    seed: int
    wall_time: float
    failures: int


def parse_method(name: str) -> tuple[str, float | None, str | None]:
    """Parse a method label into ``(family, train_fraction, constraint)``.

    Families: ``ost``, ``wald``, ``base``, ``naive``, ``ost_beta_pos``,
    ``split<f>`` (canonical-form constraint), ``split_pos<f>`` (plain
    positivity), with ``<f>`` the training fraction, e.g. ``split0.1``.
    """
    name = name.strip()
    if name in ("ost", "wald", "base", "naive", "ost_beta_pos"):
        return name, None, None
    for prefix, constraint in (("split_pos", "beta_pos"), ("split", "sigma_beta_pos")):
        if name.startswith(prefix):
            try:
                frac = float(name[len(prefix):])
            except ValueError:
                raise DataError(f"cannot parse split fraction in {name!r}")
            if not 0.0 < frac < 1.0:
                raise DataError(f"split fraction must be in (0, 1), got {frac}")
            return "split", frac, constraint
    raise DataError(f"unknown method {name!r}")


# per-trial substream tags: split methods need their own shuffle streams
_SPLIT_STREAM_BASE = 17


def _run_trials(
    dataset: DatasetSpec,
    menu: KernelMenuSpec,
    methods: list[str],
    n: int,
    alpha: float,
    seed: int,
    start: int,
    stop: int,
) -> dict[str, list[float]]:
    """Run trials [start, stop); returns per-method [rejects, failures, time]."""
    parsed = [parse_method(m) for m in methods]
    tally = {m: [0.0, 0.0, 0.0] for m in methods}
    for t in range(start, stop):
        stream = RngStream(seed, t)
        X, Y = dataset.generate(n, stream)
        kernels = menu.build(X, Y)
        stats = None
        stats_error: OstkitError | None = None
        if any(fam != "split" for fam, _, _ in parsed):
            try:
                stats = compute_base_statistics(X, Y, kernels)
            except OstkitError as exc:
                stats_error = exc
        for i, (label, (family, frac, constraint)) in enumerate(
            zip(methods, parsed)
        ):
            t0 = time.perf_counter()
            try:
                if family == "split":
                    outcome = split_test(
                        X, Y, kernels, frac, alpha, constraint,
                        stream.child(_SPLIT_STREAM_BASE + i),
                    )
                else:
                    if stats_error is not None:
                        raise stats_error
                    outcome = {
                        "ost": ost_test,
                        "wald": wald_test,
                        "base": base_test,
                        "naive": naive_test,
                        "ost_beta_pos": ost_beta_pos_test,
                    }[family](stats, alpha)
                tally[label][0] += 1.0 if outcome.reject else 0.0
            except OstkitError:
                tally[label][1] += 1.0
            tally[label][2] += time.perf_counter() - t0
    return tally


def run_monte_carlo(
    dataset: DatasetSpec,
    menu: KernelMenuSpec,
    methods: list[str],
    n: int,
    trials: int,
    alpha: float,
    seed: int,
    workers: int = 1,
) -> list[MCReport]:
    """Estimate rejection rates for each method over seeded trials.

    Deterministic given ``(seed, configuration)`` for any ``workers``;
    raises :class:`NumericalError` if any method fails in more than 1% of
    trials.
    """
    if trials < 1:
        raise DataError(f"trials must be >= 1, got {trials}")
    if not methods:
        raise DataError("no methods given")
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    if workers < 1:
        raise DataError(f"workers must be >= 1, got {workers}")
    for m in methods:
        parse_method(m)

    if workers == 1 or trials < 2 * workers:
        tallies = [
            _run_trials(dataset, menu, methods, n, alpha, seed, 0, trials)
        ]
    else:
        bounds = np.linspace(0, trials, 4 * workers + 1).astype(int)
        chunks = [
            (dataset, menu, methods, n, alpha, seed, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(_run_trials_star, chunks))

    reports = []
    for m in methods:
        rejects = sum(t[m][0] for t in tallies)
        failures = int(sum(t[m][1] for t in tallies))
        elapsed = sum(t[m][2] for t in tallies)
        if failures > 0.01 * trials:
            raise NumericalError(
                f"method {m!r} failed in {failures}/{trials} trials"
            )
        evaluated = trials - failures
        rate = rejects / evaluated if evaluated else float("nan")
        se = (
            (rate * (1.0 - rate) / evaluated) ** 0.5 if evaluated else float("nan")
        )
        reports.append(
            MCReport(
                method=m,
                n=n,
                trials=evaluated,
                rejection_rate=rate,
                std_error=se,
                seed=seed,
                wall_time=elapsed,
                failures=failures,
            )
        )
    return reports


def _run_trials_star(args) -> dict[str, list[float]]:
    return _run_trials(*args)
