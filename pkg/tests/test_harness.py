"""Monte-Carlo harness contracts: menus, method parsing, determinism,
worker invariance, paired data across methods, and failure accounting."""

import dataclasses
import math

import numpy as np
import pytest

from ostkit.exceptions import DataError, NumericalError
from ostkit.experiments import (
    DatasetSpec,
    KernelMenuSpec,
    parse_method,
    run_monte_carlo,
)
from ostkit.kernels import KernelSpec, median_heuristic
from ostkit.numerics import RngStream


class TestKernelMenu:
    def test_d6_multipliers(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((40, 1))
        y = rng.standard_normal((40, 1))
        menu = KernelMenuSpec(preset="d6")
        kernels = menu.build(x, y)
        bw = median_heuristic(np.vstack([x, y]))
        assert len(kernels) == 6
        got = [k.bandwidth for k in kernels[:5]]
        assert got == pytest.approx([m * bw for m in (0.25, 0.5, 1, 2, 4)])
        assert kernels[5].kind == "linear"

    def test_d1_d2(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((30, 2))
        y = rng.standard_normal((30, 2))
        assert len(KernelMenuSpec(preset="d1").build(x, y)) == 1
        d2 = KernelMenuSpec(preset="d2").build(x, y)
        assert [k.kind for k in d2] == ["gaussian", "linear"]

    def test_poly_preset(self):
        menu = KernelMenuSpec(preset="poly4")
        kernels = menu.build(np.zeros((4, 1)), np.zeros((4, 1)))
        assert [k.degree for k in kernels] == [1, 2, 3, 4]

    def test_parse_presets_and_explicit(self):
        assert KernelMenuSpec.parse("d6").preset == "d6"
        assert KernelMenuSpec.parse("poly3").preset == "poly3"
        menu = KernelMenuSpec.parse("gauss:1.5,linear,poly:2")
        assert menu.kernels == (
            KernelSpec.gaussian(1.5),
            KernelSpec.linear(),
            KernelSpec.polynomial(2),
        )

    def test_parse_errors(self):
        for bad in ("d7", "gauss:abc", "poly:x", "rbf", ""):
            with pytest.raises(DataError):
                KernelMenuSpec.parse(bad)

    def test_spec_validation(self):
        with pytest.raises(DataError):
            KernelMenuSpec()
        with pytest.raises(DataError):
            KernelMenuSpec(preset="d1", kernels=(KernelSpec.linear(),))


class TestParseMethod:
    def test_plain_methods(self):
        for name in ("ost", "wald", "base", "naive", "ost_beta_pos"):
            assert parse_method(name) == (name, None, None)

    def test_split_variants(self):
        assert parse_method("split0.1") == ("split", 0.1, "sigma_beta_pos")
        assert parse_method("split_pos0.25") == ("split", 0.25, "beta_pos")

    def test_errors(self):
        for bad in ("split", "split1.5", "split0", "boost", "split_posx"):
            with pytest.raises(DataError):
                parse_method(bad)


class TestRunMonteCarlo:
    def _run(self, **kw):
        args = dict(
            dataset=DatasetSpec("diff_var", null_mode=True),
            menu=KernelMenuSpec(preset="d1"),
            methods=["ost"],
            n=32,
            trials=40,
            alpha=0.05,
            seed=7,
        )
        args.update(kw)
        return run_monte_carlo(**args)

    def test_single_trial_rate_degenerate(self):
        (r,) = self._run(trials=1)
        assert r.trials == 1
        assert r.rejection_rate in (0.0, 1.0)
        assert r.std_error == 0.0

    def test_report_fields(self):
        (r,) = self._run()
        assert r.method == "ost" and r.n == 32 and r.seed == 7
        assert r.failures == 0
        assert 0.0 <= r.rejection_rate <= 1.0
        assert r.std_error == pytest.approx(
            math.sqrt(r.rejection_rate * (1 - r.rejection_rate) / r.trials)
        )
        assert r.wall_time > 0.0

    def test_determinism(self):
        a = self._run(methods=["ost", "base", "split0.5"])
        b = self._run(methods=["ost", "base", "split0.5"])
        for ra, rb in zip(a, b):
            assert dataclasses.replace(ra, wall_time=0.0) == dataclasses.replace(
                rb, wall_time=0.0
            )

    def test_worker_invariance(self):
        serial = self._run(methods=["ost", "split0.3"], trials=24)
        parallel = self._run(methods=["ost", "split0.3"], trials=24, workers=2)
        for rs, rp in zip(serial, parallel):
            assert rs.rejection_rate == rp.rejection_rate
            assert rs.trials == rp.trials and rs.failures == rp.failures

    def test_methods_see_identical_data(self):
        # the ost rate must not depend on which other methods run alongside
        alone = self._run(methods=["ost"], trials=60)
        paired = self._run(methods=["naive", "split0.5", "ost"], trials=60)
        assert alone[0].rejection_rate == paired[2].rejection_rate

    def test_seed_changes_results(self):
        a = self._run(trials=60, seed=1)
        b = self._run(trials=60, seed=2)
        assert a[0].rejection_rate != b[0].rejection_rate

    def test_failures_counted_and_capped(self):
        # duplicated kernels make base_test raise on every trial
        menu = KernelMenuSpec(
            kernels=(KernelSpec.gaussian(1.0), KernelSpec.gaussian(1.0))
        )
        with pytest.raises(NumericalError):
            self._run(menu=menu, methods=["base"], trials=20)

    def test_validation(self):
        with pytest.raises(DataError):
            self._run(trials=0)
        with pytest.raises(DataError):
            self._run(methods=[])
        with pytest.raises(DataError):
            self._run(alpha=1.5)
        with pytest.raises(DataError):
            self._run(workers=0)
        with pytest.raises(DataError):
            self._run(methods=["bogus"])
