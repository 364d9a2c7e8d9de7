import numpy as np
import pytest

from disspec import (Experiment, FrequencyPartition, PreconditionError,
                     Profile, RegimeError, SystemParams, build_initial_state,
                     default_grid, fit_pointwise_rate, optimality_probe,
                     run_decay, three_region_synthesis)
from disspec.decay_lab import packet_decay_time


def small_grid(xi_max=10.0):
    return default_grid(xi_max=xi_max, n_geo=160, n_lin=160)


class TestProfiles:
    def test_gaussian_hermitian_symmetry(self):
        p = SystemParams(1, 1, 0.5, 1, 1)
        grid = small_grid()
        st = build_initial_state(p, Profile(kind="gaussian", width=1.0), grid)
        flipped = np.conj(st.values[::-1])
        assert np.allclose(st.values, flipped)

    def test_box_profile_value_at_zero(self):
        prof = Profile(kind="box", width=0.7)
        amp = prof.amplitude(np.array([0.0, 1e-9]))
        assert amp[0] == pytest.approx(2 * 0.7)
        assert amp[1] == pytest.approx(2 * 0.7, rel=1e-9)

    def test_packet_needs_center(self):
        with pytest.raises(PreconditionError):
            Profile(kind="high_freq_packet", center=0.0).amplitude(np.array([1.0]))

    def test_unknown_component(self):
        with pytest.raises(PreconditionError):
            Profile(kind="gaussian", component="w").vector()

    def test_conservative_profile_requires_gamma2_zero(self):
        p = SystemParams(1, 1, 1, 1, 1)
        with pytest.raises(RegimeError):
            build_initial_state(p, Profile(kind="conservative_mode", center=1.0),
                                small_grid())


class TestExperimentValidation:
    def test_times_must_increase(self):
        with pytest.raises(PreconditionError):
            Experiment(params=SystemParams(1, 1, 1, 1, 1),
                       profile=Profile(kind="gaussian"),
                       times=np.array([1.0, 1.0, 2.0]))


class TestRunDecay:
    def test_heat_like_exponent_j0(self):
        p = SystemParams(1, 1, 0.5, 1, 1)
        exp = Experiment(params=p, profile=Profile(kind="gaussian", width=1.0),
                         times=np.geomspace(1, 1e4, 28), j_orders=(0,),
                         grid=default_grid(xi_max=12.0, n_geo=512, n_lin=256))
        fits = run_decay(exp, fit_window=(1e2, 1e4))
        assert fits[0].exponent == pytest.approx(-0.25, rel=0.10)

    def test_non_decay_with_conservative_data(self):
        p = SystemParams(1, 1, 1, 1, 0)
        exp = Experiment(params=p,
                         profile=Profile(kind="conservative_mode", center=1.0, width=2.0),
                         times=np.geomspace(1, 1e3, 20), j_orders=(0,),
                         grid=default_grid(xi_max=8.0, n_geo=128, n_lin=128))
        fits = run_decay(exp, fit_window=(10, 1e3))
        assert fits[0].exponent >= -0.02
        ratios = fits[0].norms / fits[0].norms[0]
        assert np.all(ratios <= 1.0 + 1e-6)
        assert np.all(ratios >= 0.99)

    def test_gamma2_zero_norm_never_increases(self):
        p = SystemParams(1.2, 0.8, 0.9, 1.0, 0)
        exp = Experiment(params=p, profile=Profile(kind="gaussian", width=1.0),
                         times=np.geomspace(0.5, 1e3, 15), j_orders=(0,),
                         grid=default_grid(xi_max=8.0, n_geo=96, n_lin=96))
        fits = run_decay(exp, fit_window=(1.0, 1e3))
        ratios = fits[0].norms / fits[0].norms[0]
        assert np.all(ratios <= 1.0 + 1e-6)


class TestPointwiseRates:
    def test_conservative_mode_rate_vanishes(self):
        p = SystemParams(1, 1, 1, 1, 0)
        out = fit_pointwise_rate(p, [1.0], t_factor=100.0)
        # worst-case rate includes the undamped pair: essentially zero
        assert out["rate"][0] <= 1e-8

    def test_shape_sandwich_a1(self):
        p = SystemParams(1, 1, 0.5, 1, 1)
        out = fit_pointwise_rate(p, np.geomspace(0.01, 100, 12))
        assert out["ratio_min"] > 0


class TestPacketTiming:
    def test_xi0_squared_scaling_one_weak_direction(self):
        p = SystemParams(2, 1, 1, 1, 1)
        t10 = packet_decay_time(p, 10.0)
        t20 = packet_decay_time(p, 20.0)
        assert t20 / t10 == pytest.approx(4.0, rel=0.10)

    def test_uniform_rate_when_a_is_one(self):
        p = SystemParams(1, 1, 1, 1, 1)
        t10 = packet_decay_time(p, 10.0, t_max=1e3)
        t20 = packet_decay_time(p, 20.0, t_max=1e3)
        assert t20 / t10 == pytest.approx(1.0, rel=0.10)


class TestSynthesis:
    def make_exp(self, params, xi_max=120.0):
        return Experiment(params=params,
                          profile=Profile(kind="gaussian", width=1.0),
                          times=np.geomspace(1, 1e4, 20), j_orders=(0,),
                          grid=default_grid(xi_max=xi_max, n_geo=256, n_lin=512))

    def test_regime_guards(self):
        exp = self.make_exp(SystemParams(1, 1, 0.5, 1, 1))
        with pytest.raises(RegimeError):
            three_region_synthesis(exp, FrequencyPartition(nu=0.05, N=50))
        exp2 = self.make_exp(SystemParams(1, np.sqrt(2.0), 1, 0, 1))
        with pytest.raises(RegimeError):
            three_region_synthesis(exp2, FrequencyPartition(nu=0.05, N=50))

    def test_equal_speeds_synthesis(self):
        exp = self.make_exp(SystemParams(1, 1, 0.5, 0, 1))
        rep = three_region_synthesis(exp, FrequencyPartition(nu=0.05, N=50))
        assert rep["gap"] > 0
        assert rep["q_tail"] == 2
        assert rep["bound_dominates"]
        assert rep["c1_hat"] >= 1.0 and rep["c5_hat"] >= 1.0

    def test_low_region_reproduces_heat_exponent(self):
        # the low-region integral of gaussian data alone must decay like
        # (1+t)^{-1/2} in the squared norm (j = 0): quadrature of the
        # heat-like bound against the measured regional integral
        exp = Experiment(params=SystemParams(1, 1, 0.5, 0, 1),
                         profile=Profile(kind="gaussian", width=1.0),
                         times=np.geomspace(10.0, 1e5, 22), j_orders=(0,),
                         grid=default_grid(xi_max=120.0, n_geo=384, n_lin=384))
        rep = three_region_synthesis(exp, FrequencyPartition(nu=0.05, N=50))
        # the -1/2 law needs t well past 1/(2 c2 nu^2) ~ 1e3
        sel = rep["times"] >= 5e3
        slope = np.polyfit(np.log1p(rep["times"][sel]),
                           np.log(rep["I_low"][sel]), 1)[0]
        assert slope == pytest.approx(-0.5, rel=0.10)
        # quadrature oracle: integral of exp(-2 c xi^2 t) over the low band
        c2 = rep["c2_hat"]
        xi = np.linspace(0, 0.05, 2000)
        oracle = np.array([np.trapezoid(np.exp(-2 * c2 * xi**2 * t), xi)
                           for t in rep["times"][sel]])
        slope_oracle = np.polyfit(np.log1p(rep["times"][sel]), np.log(oracle), 1)[0]
        assert slope_oracle == pytest.approx(-0.5, rel=0.10)
        assert slope == pytest.approx(slope_oracle, rel=0.05)

    def test_partition_invariance_of_total(self):
        exp = self.make_exp(SystemParams(1, 1, 0.5, 0, 1))
        totals = []
        for nu, N in ((0.02, 20.0), (0.05, 50.0), (0.1, 100.0)):
            rep = three_region_synthesis(exp, FrequencyPartition(nu=nu, N=N))
            split_total = rep["I_low"] + rep["I_mid"] + rep["I_high"]
            assert np.allclose(split_total, rep["I_total"], rtol=1e-2)
            totals.append(rep["I_total"])
        assert np.allclose(totals[0], totals[1], rtol=1e-9)
        assert np.allclose(totals[1], totals[2], rtol=1e-9)


class TestOptimalityProbe:
    def test_ratios_bounded_low_frequency(self):
        p = SystemParams(1, 1, 0.5, 1, 1)
        rep = optimality_probe(p, xi_grid=np.geomspace(0.01, 0.1, 8))
        lo, hi = rep["ratio_empirical_bounds"]
        assert 0.5 <= lo <= hi <= 2.0
        assert rep["ratio_lyapunov_bounds"][0] > 0

    def test_high_frequency_rate_floor_a1(self):
        # a = 1: the spectral rate stays bounded below by a constant of the
        # order of the smaller damping (no regularity loss)
        from disspec import eigenvalues
        p = SystemParams(1, 1, 0.5, 1, 1)
        for xi in (50.0, 200.0, 1000.0):
            rate = -2.0 * eigenvalues(p, xi).max_real_part
            assert rate >= 0.25 * min(p.gamma1, p.gamma2)

    def test_high_frequency_rate_decays_a2(self):
        # a != 1: the spectral rate falls like xi^-2 (regularity loss)
        from disspec import eigenvalues
        p = SystemParams(2, 3, 1, 1, 1)
        scaled = []
        for xi in (50.0, 100.0, 200.0):
            scaled.append(-2.0 * eigenvalues(p, xi).max_real_part * xi**2)
        assert max(scaled) / min(scaled) < 1.2

    def test_requires_both_dampings(self):
        with pytest.raises(RegimeError):
            optimality_probe(SystemParams(1, 1, 1, 0, 1))
