"""Exponentiated heights, the Q and R correction processes, and the
drift-slope regression of the height-vs-log-Z gap."""

import functools
import math
from fractions import Fraction

import numpy as np
import pytest

from sbelab import (
    MassObserver,
    Mollifier,
    PathRecord,
    RemainderAccumulator,
    SimConfig,
    SpectralField,
    StateView,
    TorusGrid,
    drift_slope,
    exp_height,
    gradient_gap,
    height_qv_density,
    holder_exponent,
    k_constant,
    q_process,
    r_process,
    remainder_observers,
    run_coupled,
    run_ensemble,
    sample_white_noise,
    smoothed_height,
    variance_constant,
)
from sbelab.chaos import grid_variance_constant
from sbelab.simulate import normalize_parameters


def zero_field(K: int) -> SpectralField:
    return SpectralField(TorusGrid(max_frequency=K), np.zeros(K + 1, dtype=complex))


class TestExpHeight:
    def test_zero_velocity_gives_unit_field(self):
        w = exp_height(zero_field(16), Mollifier(), 8, coupling=1.3)
        np.testing.assert_allclose(w.to_physical(), 1.0, rtol=1e-14)

    def test_zero_coupling_gives_unit_field(self):
        rng = np.random.default_rng(2)
        u = sample_white_noise(TorusGrid(max_frequency=16), rng)
        w = exp_height(u, Mollifier(), 8, coupling=0.0)
        np.testing.assert_allclose(w.to_physical(), 1.0, rtol=1e-14)

    def test_single_mode_closed_form(self):
        # u = cos(2 pi x) has smoothed height sin(2 pi x) / (2 pi) whenever
        # the profile is 1 at mode 1.
        K = 16
        grid = TorusGrid(max_frequency=K)
        c = np.zeros(K + 1, dtype=complex)
        c[1] = 0.5
        u = SpectralField(grid, c)
        w = exp_height(u, Mollifier(), 16, coupling=2.0)
        expected = np.exp(2.0 * np.sin(2.0 * np.pi * grid.x) / (2.0 * np.pi))
        np.testing.assert_allclose(w.to_physical(), expected, rtol=1e-12)

    def test_strictly_positive(self):
        rng = np.random.default_rng(3)
        u = sample_white_noise(TorusGrid(max_frequency=64), rng)
        w = exp_height(u, Mollifier(), 32, coupling=-2.5)
        assert w.to_physical().min() > 0.0

    def test_rejects_nonzero_mean(self):
        grid = TorusGrid(max_frequency=8)
        c = np.zeros(9, dtype=complex)
        c[0] = 1.0
        with pytest.raises(ValueError):
            exp_height(SpectralField(grid, c), Mollifier(), 4)

    def test_overflow_guard(self):
        grid = TorusGrid(max_frequency=8)
        c = np.zeros(9, dtype=complex)
        c[1] = 0.5
        with pytest.raises(OverflowError):
            exp_height(SpectralField(grid, c), Mollifier(), 8, coupling=1e5)


class TestHeightQvDensity:
    def test_exact_dyadic_sum_at_level_16(self):
        # Plateau covers k <= 8; the ramp values at k = 9..15 are exact
        # rationals of the quintic smoothstep at s = k/8 - 1.
        total = Fraction(8)  # k = 1..8 contribute 1 each
        for k in range(9, 16):
            s = Fraction(k, 8) - 1
            rho = 1 - s**3 * (10 - 15 * s + 6 * s**2)
            total += rho**2
        expected = 2 * 2 * total  # both signs, then the factor 2 of the QV
        np.testing.assert_allclose(
            height_qv_density(Mollifier(), 16), float(expected), rtol=1e-14
        )

    def test_matches_grid_truncated_sum_when_band_covers_support(self):
        m = Mollifier()
        for level, K in ((8, 16), (16, 32), (16, 128)):
            grid = TorusGrid(max_frequency=K)
            np.testing.assert_allclose(
                height_qv_density(m, level),
                2.0 * grid_variance_constant(m, grid, level),
                rtol=1e-14,
            )

    def test_grows_linearly_in_level(self):
        m = Mollifier()
        ratio = height_qv_density(m, 64) / height_qv_density(m, 32)
        assert 1.9 < ratio < 2.1


@functools.lru_cache(maxsize=1)
def quiet_mass_runs():
    """50 nonlinearity-free coupled runs recording the level-16 mass."""
    m = Mollifier()
    cfg = SimConfig(
        max_frequency=32,
        coupling=0.0,
        drift_level=16,
        time_step=2e-5,
        horizon=0.05,
        seed=314,
    )
    records = []
    for i in range(50):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        records.append(
            run_coupled(cfg, rng, record_every=1, extra_record=MassObserver(m, 16).record)
        )
    return cfg, m, records


class TestMassObserverAndQProcess:
    def synthetic_record(self, s_values, dt=1e-3):
        n = s_values.shape[0]
        return PathRecord(
            times=np.arange(n) * dt,
            values={"S:16": s_values},
            final_u=np.zeros(17, dtype=complex),
            final_z=np.zeros(17, dtype=complex),
            final_h0=0.0,
            positivity_violations=0,
        )

    def test_zero_velocity_gives_linear_q(self):
        m = Mollifier()
        rec = self.synthetic_record(np.zeros(11))
        q = q_process(rec, m, 16)
        expected = (variance_constant(m, 16) + 2.0) * rec.times
        np.testing.assert_allclose(q.values, expected, rtol=1e-14)

    def test_constant_mass_shifts_the_rate(self):
        m = Mollifier()
        rec = self.synthetic_record(np.full(11, 5.0))
        q = q_process(rec, m, 16)
        expected = (variance_constant(m, 16) - 3.0) * rec.times
        np.testing.assert_allclose(q.values, expected, rtol=1e-13)

    def test_left_point_quadrature_ignores_last_sample(self):
        m = Mollifier()
        s = np.zeros(6)
        s[-1] = 1e6  # a final-point spike must not enter the integral
        q = q_process(rec := self.synthetic_record(s), m, 16)
        expected = (variance_constant(m, 16) + 2.0) * rec.times
        np.testing.assert_allclose(q.values, expected, rtol=1e-14)

    def test_missing_series_raises(self):
        rec = self.synthetic_record(np.zeros(5))
        with pytest.raises(ValueError):
            q_process(rec, Mollifier(), 8)

    def test_recorded_mass_matches_final_state(self):
        cfg, m, records = quiet_mass_runs()
        rec = records[0]
        grid = TorusGrid(max_frequency=cfg.max_frequency)
        w2 = m.weights(grid, 16) ** 2
        expected = 2.0 * np.sum(w2[1:] * np.abs(rec.final_u[1:]) ** 2)
        np.testing.assert_allclose(rec.values["S:16"][-1], expected, rtol=1e-12)

    def test_ensemble_mean_rate_is_two(self):
        cfg, m, records = quiet_mass_runs()
        rates = []
        for rec in records:
            q = q_process(rec, m, 16)
            rates.append(q.values[-1] / q.times[-1])
        rates = np.asarray(rates)
        se = rates.std(ddof=1) / math.sqrt(rates.size)
        assert abs(rates.mean() - 2.0) < 3.0 * se

    def test_centered_q_is_three_quarter_holder(self):
        cfg, m, records = quiet_mass_runs()
        paths = []
        for rec in records:
            q = q_process(rec, m, 16)
            from sbelab import ScalarPath

            paths.append(ScalarPath(q.times, q.values - 2.0 * q.times))
        est = holder_exponent(paths, [2e-4 * 2**j for j in range(6)])
        assert est.exponent >= 0.65


class TestRemainderAccumulator:
    def crafted_view(self, c_u, lam=0.7, wick_coeffs=None):
        cfg = SimConfig(max_frequency=32, drift_level=16, coupling=lam)
        grid = TorusGrid(max_frequency=32)
        return StateView(
            0.0,
            cfg,
            grid,
            c_u,
            np.ones(grid.num_points),
            0.0,
            lam,
            wick_coeffs=wick_coeffs,
        )

    def phi_cos(self, K=32):
        grid = TorusGrid(max_frequency=K)
        c = np.zeros(K + 1, dtype=complex)
        c[1] = 0.5
        return SpectralField(grid, c)

    def test_recorded_and_self_computed_drift_coincide(self):
        # Feeding the accumulator the defining mollified square of the state
        # itself must reproduce the no-record route bit for bit.
        rng = np.random.default_rng(5)
        grid = TorusGrid(max_frequency=32)
        c_u = sample_white_noise(grid, rng).c
        m = Mollifier()
        w16 = m.weights(grid, 16)
        c_sq = grid.analyze(grid.synth(w16 * c_u) ** 2)

        acc_a = RemainderAccumulator(m, 8, self.phi_cos())
        acc_b = RemainderAccumulator(m, 8, self.phi_cos())
        acc_a.step(self.crafted_view(c_u, wick_coeffs=c_sq))
        acc_b.step(self.crafted_view(c_u, wick_coeffs=None))
        assert acc_a.value == acc_b.value
        assert acc_a.value != 0.0

    def test_zero_state_integrates_minus_centering(self):
        # u = 0 with a unit test function leaves only the K_L term.
        m = Mollifier()
        grid = TorusGrid(max_frequency=32)
        one = SpectralField(grid, np.eye(33)[0].astype(complex))
        acc = RemainderAccumulator(m, 8, one)
        view = self.crafted_view(np.zeros(33, dtype=complex), lam=0.7)
        acc.step(view)
        expected = -view.cfg.time_step * 0.7**2 * k_constant(m, 8)
        np.testing.assert_allclose(acc.value, expected, rtol=1e-12)
        assert acc.sup_abs == abs(acc.value)

    def test_mean_free_test_function_drops_centering(self):
        # With a mean-free phi the flat K_L term integrates to zero.
        m = Mollifier()
        acc = RemainderAccumulator(m, 8, self.phi_cos())
        acc.step(self.crafted_view(np.zeros(33, dtype=complex), lam=0.7))
        assert acc.value == pytest.approx(0.0, abs=1e-18)

    def test_record_keys_and_r_process_roundtrip(self):
        cfg = SimConfig(
            max_frequency=32,
            drift_level=16,
            coupling=1.0,
            time_step=5e-5,
            horizon=0.02,
            seed=99,
        )
        m = Mollifier()
        acc = RemainderAccumulator(m, 8, self.phi_cos())
        rng = np.random.default_rng(7)
        rec = run_coupled(cfg, rng, record_every=1, per_step=acc.step, extra_record=acc.record)
        r = r_process(rec, 8)
        assert r.values[0] == 0.0
        assert np.all(np.isfinite(r.values))
        sup = rec.values["R:8:sup"]
        assert np.all(np.diff(sup) >= 0.0)
        np.testing.assert_allclose(sup[-1], np.max(np.abs(r.values)), rtol=1e-12)
        assert np.any(r.values != 0.0)

    def test_r_process_missing_series(self):
        rec = PathRecord(
            times=np.arange(3.0),
            values={"h0": np.zeros(3)},
            final_u=np.zeros(5, dtype=complex),
            final_z=np.zeros(5, dtype=complex),
            final_h0=0.0,
            positivity_violations=0,
        )
        with pytest.raises(ValueError):
            r_process(rec, 8)

    def test_phi_on_wrong_grid_rejected(self):
        m = Mollifier()
        acc = RemainderAccumulator(m, 8, self.phi_cos(K=16))
        with pytest.raises(ValueError):
            acc.step(self.crafted_view(np.zeros(33, dtype=complex)))

    def test_observer_pairing_with_run_ensemble(self):
        m = Mollifier()
        cfg = SimConfig(
            max_frequency=32,
            drift_level=16,
            coupling=1.0,
            time_step=5e-5,
            horizon=0.01,
            seed=11,
        )
        step_factory, record_factory = remainder_observers(
            lambda: RemainderAccumulator(m, 8, self.phi_cos())
        )
        summary = run_ensemble(
            cfg,
            3,
            record_every=100,
            per_step_factory=step_factory,
            extra_record_factory=record_factory,
        )
        assert summary.values["R:8"].shape[0] == 3
        assert np.all(summary.values["R:8:sup"][:, -1] > 0.0)

    def test_observer_pairing_misuse_fails_loudly(self):
        m = Mollifier()
        _, record_factory = remainder_observers(
            lambda: RemainderAccumulator(m, 8, self.phi_cos())
        )
        with pytest.raises(IndexError):
            record_factory()


class TestGradientGap:
    def test_exponential_of_height_closes_the_gap(self):
        # With z = e^{lam h} built from a low-band velocity, d/dx log z
        # recovers lam u up to the spectral tail of the exponential.
        K = 32
        grid = TorusGrid(max_frequency=K)
        rng = np.random.default_rng(13)
        c = np.zeros(K + 1, dtype=complex)
        c[1 : K // 4 + 1] = 0.1 * (
            rng.standard_normal(K // 4) + 1j * rng.standard_normal(K // 4)
        )
        u = SpectralField(grid, c)
        lam = 0.9
        from sbelab import integrate_theta

        h = integrate_theta(u).to_physical()
        c_z = grid.analyze(np.exp(lam * h))
        gap = gradient_gap(u.c, c_z, grid, lam)
        assert gap < 1e-8

        bumped = c_z.copy()
        bumped[2] += 1e-2
        assert gradient_gap(u.c, bumped, grid, lam) > 1e-4

    def test_validations(self):
        grid = TorusGrid(max_frequency=32)
        c = np.zeros(33, dtype=complex)
        c[0] = 1.0
        with pytest.raises(ValueError):
            gradient_gap(c, c, grid, 0.0)
        neg = np.zeros(33, dtype=complex)
        neg[0] = -1.0
        with pytest.raises(ValueError):
            gradient_gap(c, neg, grid, 1.0)
        small = TorusGrid(max_frequency=4)
        with pytest.raises(ValueError):
            gradient_gap(np.zeros(5, dtype=complex), c[:5], small, 1.0, band_divisor=8)


@functools.lru_cache(maxsize=2)
def small_drift_regression(coupling: float):
    cfg = SimConfig(
        max_frequency=32,
        time_step=1e-4,
        horizon=0.2,
        coupling=coupling,
        drift_level=16,
        seed=2718,
    )
    return drift_slope(cfg, n_samples=24, record_every=50)


class TestDriftSlope:
    def test_rejects_zero_coupling(self):
        with pytest.raises(ValueError):
            drift_slope(SimConfig(coupling=0.0), 4)

    def test_zero_coupling_additive_gap_is_flat(self):
        # The lam = 0 sanity lives outside the regression: the height zero
        # mode must track the accumulated mean-mode noise exactly.
        cfg = SimConfig(
            max_frequency=16, coupling=0.0, time_step=1e-4, horizon=0.05, seed=4
        )
        rec = run_coupled(cfg, np.random.default_rng(17), record_every=25)
        np.testing.assert_allclose(
            rec.values["h0"], math.sqrt(2.0) * rec.values["B0"], atol=1e-12
        )

    def test_positive_coupling_slope_near_target(self):
        reg = small_drift_regression(1.0)
        assert reg.target == pytest.approx(1.0 / 12.0)
        assert reg.n_samples == 24
        assert reg.residuals.shape == reg.times.shape
        assert reg.stderr > 0.0 and reg.sample_stderr > 0.0
        # the mollified pairing constant at level 16 sits ~6% below 1/12
        assert 0.6 / 12.0 < reg.slope < 1.35 / 12.0

    def test_slope_is_odd_in_the_coupling(self):
        plus = small_drift_regression(1.0)
        minus = small_drift_regression(-1.0)
        assert minus.target == pytest.approx(-1.0 / 12.0)
        band = 3.0 * math.hypot(plus.sample_stderr, minus.sample_stderr)
        assert abs(plus.slope + minus.slope) < band

    def test_gradient_error_is_small(self):
        reg = small_drift_regression(1.0)
        assert 0.0 < reg.gradient_error < 0.05

    def test_gap_mean_starts_near_zero(self):
        reg = small_drift_regression(1.0)
        assert abs(reg.gap_mean[0]) < 1e-3
