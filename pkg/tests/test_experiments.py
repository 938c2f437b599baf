"""Tests of the experiment layer: result types, spec validation, dispatch."""

import math

import numpy as np
import pytest

from sbelab.chaos import k_constant
from sbelab.experiments import (
    EXPERIMENT_NAMES,
    ExperimentResult,
    ExperimentSpec,
    ScalarResult,
    Table,
    default_settings,
    parse_setting,
    resolve,
    run_experiment,
)
from sbelab.simulate import DEFAULT_MOLLIFIER, SimConfig


class TestScalarResult:
    def test_two_sided_boundary(self):
        assert ScalarResult("x", 1.25, 1.0, 0.25).passed
        assert not ScalarResult("x", 1.2500001, 1.0, 0.25).passed
        assert ScalarResult("x", 0.75, 1.0, 0.25).passed

    def test_at_least(self):
        assert ScalarResult("x", 0.96, 0.95, 0.0, "at-least").passed
        assert ScalarResult("x", 0.95, 0.95, 0.0, "at-least").passed
        assert not ScalarResult("x", 0.94, 0.95, 0.0, "at-least").passed

    def test_at_most(self):
        assert ScalarResult("x", 1.19, 1.2, 0.0, "at-most").passed
        assert not ScalarResult("x", 1.21, 1.2, 0.0, "at-most").passed

    def test_nan_fails_quietly(self):
        assert not ScalarResult("x", math.nan, 1.0, 0.1).passed

    def test_rejects_unknown_mode_and_negative_tolerance(self):
        with pytest.raises(ValueError, match="mode"):
            ScalarResult("x", 1.0, 1.0, 0.1, "near")
        with pytest.raises(ValueError, match="tolerance"):
            ScalarResult("x", 1.0, 1.0, -0.1)


class TestTable:
    def test_coerces_to_float_rows(self):
        t = Table("t", ("a", "b"), ((1, 2), (3.5, np.float64(4.0))))
        assert t.rows == ((1.0, 2.0), (3.5, 4.0))
        assert all(isinstance(v, float) for row in t.rows for v in row)

    def test_rejects_ragged_rows(self):
        with pytest.raises(ValueError, match="row width"):
            Table("t", ("a", "b"), ((1.0,),))

    def test_rejects_empty_columns(self):
        with pytest.raises(ValueError, match="column"):
            Table("t", (), ())


class TestParseSetting:
    def test_integer_keys(self):
        assert parse_setting("max_frequency", "128") == 128
        assert parse_setting("seed", 7) == 7
        with pytest.raises(ValueError, match="integer"):
            parse_setting("seed", True)
        with pytest.raises(ValueError):
            parse_setting("drift_level", "8.5")

    def test_float_keys(self):
        assert parse_setting("time_step", "1e-4") == 1e-4
        assert parse_setting("horizon", 1) == 1.0
        with pytest.raises(ValueError, match="number"):
            parse_setting("coupling", False)

    def test_noise_level_none(self):
        assert parse_setting("noise_level", "none") is None
        assert parse_setting("noise_level", None) is None
        assert parse_setting("noise_level", "32") == 32

    def test_n_samples_positive(self):
        assert parse_setting("n_samples", "12") == 12
        with pytest.raises(ValueError, match="at least 1"):
            parse_setting("n_samples", 0)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown configuration key"):
            parse_setting("stepsize", "1")


class TestExperimentSpec:
    def test_rejects_unknown_experiment(self):
        with pytest.raises(ValueError, match="unknown experiment"):
            ExperimentSpec("k-konstant")

    def test_overrides_are_typed(self):
        spec = ExperimentSpec(
            "qv-drift", {"time_step": "2e-4", "seed": "9"}, n_samples="3"
        )
        assert spec.overrides["time_step"] == 2e-4
        assert spec.overrides["seed"] == 9
        assert spec.n_samples == 3

    def test_n_samples_not_an_override(self):
        with pytest.raises(ValueError, match="spec field"):
            ExperimentSpec("qv-drift", {"n_samples": "3"})

    def test_resolve_merges_onto_defaults(self):
        cfg, n = resolve(ExperimentSpec("qv-drift", {"seed": 9}, n_samples=3))
        base, base_n = resolve(ExperimentSpec("qv-drift"))
        assert cfg.seed == 9 and n == 3
        assert base.seed == 606 and base_n == 8
        assert cfg.max_frequency == base.max_frequency


class TestDefaults:
    def test_every_experiment_has_full_settings(self):
        sim_keys = {
            "max_frequency",
            "time_step",
            "horizon",
            "coupling",
            "viscosity",
            "noise_strength",
            "drift_level",
            "noise_level",
            "seed",
            "scheme",
            "positivity",
        }
        for name in EXPERIMENT_NAMES:
            settings = default_settings(name)
            assert set(settings) == sim_keys | {"n_samples"}
            # every default must itself survive the type checker
            for key, value in settings.items():
                parse_setting(key, value)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown experiment"):
            default_settings("drift")


class TestKConstantExperiment:
    def test_matches_direct_evaluation_and_passes(self):
        res = run_experiment(ExperimentSpec("k-constant"))
        assert res.passed
        for level in (16, 64, 256):
            s = res.scalar(f"k-constant-{level}")
            assert s.value == k_constant(DEFAULT_MOLLIFIER, level)
            assert s.target == pytest.approx(1.0 / 12.0)
            assert s.tolerance == pytest.approx(4.0 / (math.pi**2 * level))
        rounded = res.scalar("k-constant-256-rounded")
        assert round(rounded.value, 3) == 0.083

    def test_table_rows_align_with_scalars(self):
        res = run_experiment(ExperimentSpec("k-constant"))
        table = res.table("constants")
        assert table.columns == ("level", "value", "error", "bound")
        for row in table.rows:
            level = int(row[0])
            assert row[1] == res.scalar(f"k-constant-{level}").value
            assert row[2] == pytest.approx(row[1] - 1.0 / 12.0)


class TestQvDriftExperiment:
    def test_small_run_is_deterministic_and_calibrated(self):
        spec = ExperimentSpec("qv-drift", n_samples=3)
        first = run_experiment(spec)
        second = run_experiment(spec)
        assert [s.value for s in first.scalars] == [s.value for s in second.scalars]
        assert first.table("qv-estimates").rows == second.table("qv-estimates").rows
        # even at three samples the noise bracket lands near its exact value
        noise = first.scalar("noise-qv")
        assert noise.value == pytest.approx(noise.target, rel=0.3)
        assert first.scalar("drift-qv-fraction").value < 0.05

    def test_result_lookup_errors(self):
        res = run_experiment(ExperimentSpec("qv-drift", n_samples=3))
        with pytest.raises(KeyError):
            res.scalar("no-such-scalar")
        with pytest.raises(KeyError):
            res.table("no-such-table")


class TestChaosExperimentSmall:
    def test_small_sample_run_keeps_exact_identities(self):
        res = run_experiment(ExperimentSpec("chaos-identities", n_samples=2000))
        # the isometry is algebraic: sample count must not matter
        assert res.scalar("isometry-max-relative-error").value <= 1e-12
        for s in res.scalars:
            assert math.isfinite(s.value)
        assert res.table("covariance").columns == (
            "pair",
            "sample_mean",
            "exact",
            "stderr",
            "z",
        )

    def test_config_echo_carries_the_resolved_values(self):
        res = run_experiment(ExperimentSpec("chaos-identities", {"seed": 11}, 2000))
        assert isinstance(res.config, SimConfig)
        assert res.config.seed == 11
        assert res.n_samples == 2000


class TestExperimentResult:
    def test_passed_aggregates_all_scalars(self):
        good = ScalarResult("a", 1.0, 1.0, 0.1)
        bad = ScalarResult("b", 2.0, 1.0, 0.1)
        cfg = SimConfig()
        assert ExperimentResult("k-constant", cfg, 1, (good,)).passed
        assert not ExperimentResult("k-constant", cfg, 1, (good, bad)).passed
