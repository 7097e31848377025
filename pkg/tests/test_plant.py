import math

import numpy as np
import pytest

from forcest.plant import (STAND_GAMMA, STAND_M, Dataset, LoadProfile,
                           PlantParams, TrackingControl, coulomb,
                           coupled_disturbance, generate_load, nominal_accel,
                           stand_coupling, simulate, simulate_tracking)
from forcest.signals import LeadLagShaper, SamplingConfig, TimeSeries

IDENTITY = LeadLagShaper(a=1.0, stages=((0.0, 0.0),))


class TestCoulomb:
    def test_sign_convention(self):
        assert coulomb(0.3, 160.0) == 160.0
        assert coulomb(-0.3, 160.0) == -160.0
        assert coulomb(0.0, 160.0) == 0.0

    def test_odd(self):
        for v in (1e-9, 0.5, 7.0):
            assert coulomb(-v, 42.0) == -coulomb(v, 42.0)

    def test_nominal_accel_identified_constants(self):
        params = PlantParams(noise_std=0.0)
        # (1000 - 160) * 0.5882 = 494.088
        assert nominal_accel(1000.0, 1.0, params) == pytest.approx(494.088, rel=1e-12)
        assert nominal_accel(1000.0, -1.0, params) == pytest.approx(
            1160.0 * 0.5882, rel=1e-12)


class TestPlantParams:
    def test_defaults(self):
        p = PlantParams()
        assert p.m == STAND_M
        assert p.gamma == STAND_GAMMA
        assert p.load_sign == -1.0

    @pytest.mark.parametrize("kw", [dict(m=0.0), dict(gamma=-1.0),
                                    dict(noise_std=-1e-6), dict(load_sign=0.5)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            PlantParams(**kw)


class TestGenerateLoad:
    def test_step(self):
        cfg = SamplingConfig(dt=0.1, duration=1.0)
        load = LoadProfile(kind="step", amplitude=5.0, offset=1.0, onset=0.5)
        f = generate_load(load, cfg)
        assert np.array_equal(f.values[:5], np.full(5, 1.0))
        assert np.array_equal(f.values[5:], np.full(5, 6.0))

    def test_saw_formula(self):
        cfg = SamplingConfig(dt=0.25, duration=4.0)
        load = LoadProfile(kind="saw", amplitude=8.0, period=2.0)
        f = generate_load(load, cfg)
        # ramp 0 -> 8 over each 2 s period
        assert f.values[0] == 0.0
        assert f.values[4] == pytest.approx(4.0)
        assert f.values[7] == pytest.approx(7.0)
        assert f.values[8] == pytest.approx(0.0)  # drop at the period edge

    def test_saw_dwell_holds_offset(self):
        cfg = SamplingConfig(dt=0.5, duration=10.0)
        load = LoadProfile(kind="saw", amplitude=6.0, offset=2.0,
                           period=5.0, dwell=2.0)
        f = generate_load(load, cfg)
        # ramp occupies 3 s, the last 2 s of each period sit at the offset
        assert f.values[0] == 2.0
        assert f.values[5] == pytest.approx(7.0)  # t=2.5 s, on the ramp
        assert f.values[6] == pytest.approx(2.0)  # drop at t=3 s
        assert f.values[9] == pytest.approx(2.0)

    def test_hold_plateaus(self):
        cfg = SamplingConfig(dt=0.1, duration=3.0)
        load = LoadProfile(kind="hold", levels=(1.0, -2.0, 4.0), dwell=1.0)
        f = generate_load(load, cfg)
        assert np.array_equal(f.values[:10], np.full(10, 1.0))
        assert np.array_equal(f.values[10:20], np.full(10, -2.0))
        assert np.array_equal(f.values[20:], np.full(10, 4.0))

    def test_sine(self):
        cfg = SamplingConfig(dt=0.125, duration=1.0)
        load = LoadProfile(kind="sine", amplitude=3.0, period=1.0, offset=1.0)
        f = generate_load(load, cfg)
        assert f.values[2] == pytest.approx(4.0)  # t = T/4

    def test_smoothing_preserves_bound_and_softens_edges(self):
        cfg = SamplingConfig(dt=1e-3, duration=20.0)
        sharp = LoadProfile(kind="saw", amplitude=100.0, period=5.0)
        soft = LoadProfile(kind="saw", amplitude=100.0, period=5.0,
                           smooth_tau=0.2)
        fs = generate_load(sharp, cfg)
        fm = generate_load(soft, cfg)
        assert np.max(np.abs(fm.values)) <= sharp.bound + 1e-9
        d_sharp = np.max(np.abs(np.diff(fs.values)))
        d_soft = np.max(np.abs(np.diff(fm.values)))
        assert d_soft < 0.05 * d_sharp

    @pytest.mark.parametrize("kw", [
        dict(kind="spline"),
        dict(kind="saw", amplitude=-1.0),
        dict(kind="saw", period=0.0),
        dict(kind="saw", period=2.0, dwell=2.0),
        dict(kind="hold", levels=()),
        dict(kind="hold", levels=(1.0,), dwell=0.0),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            LoadProfile(**kw)

    def test_bound_property(self):
        assert LoadProfile(kind="saw", amplitude=5.0, offset=-2.0).bound == 7.0
        assert LoadProfile(kind="hold", levels=(3.0, -9.0), dwell=1.0,
                           offset=1.0).bound == 8.0


class TestCoupledDisturbance:
    def test_identity_coupling_divides_by_mass(self):
        params = PlantParams(m=2.0, coupling=IDENTITY)
        f2 = TimeSeries(1e-3, np.sin(np.arange(500) * 0.01) * 30.0)
        xi = coupled_disturbance(f2, params)
        assert np.allclose(xi.values, f2.values / 2.0, rtol=1e-12)

    def test_constant_load_sits_at_dc(self):
        params = PlantParams()
        f2 = TimeSeries(1e-3, np.full(2000, -1000.0))
        xi = coupled_disturbance(f2, params)
        expect = params.coupling.a * (-1000.0) / params.m
        assert np.allclose(xi.values, expect, rtol=1e-6)

    def test_smoothed_edge_stays_tame_through_lead(self):
        # raw saw drop through the identified lead coupling rings at the
        # b/c corner ratio; two-lag smoothing keeps the excursion bounded
        cfg = SamplingConfig(dt=1e-3, duration=30.0)
        params = PlantParams()
        load = LoadProfile(kind="saw", amplitude=5000.0, offset=1000.0,
                           period=10.0, dwell=3.0, smooth_tau=0.3)
        f2 = generate_load(load, cfg)
        xi = coupled_disturbance(f2, params)
        dc_scale = params.coupling.a / params.m
        assert np.max(np.abs(xi.values)) < 2.0 * dc_scale * load.bound

    def test_lag_coupling_respects_dc_bound(self):
        lag = LeadLagShaper(a=0.8, stages=((0.01, 0.2), (0.005, 0.05)))
        params = PlantParams(coupling=lag)
        cfg = SamplingConfig(dt=1e-3, duration=5.0)
        f2 = generate_load(LoadProfile(kind="step", amplitude=100.0,
                                       onset=1.0), cfg)
        xi = coupled_disturbance(f2, params)
        assert np.max(np.abs(xi.values)) <= 0.8 * 100.0 / params.m * (1 + 1e-6)


ZERO_LOAD = LoadProfile(kind="step", amplitude=0.0)


class TestSimulate:
    def test_free_mass_quadratic(self):
        m = 2.0
        params = PlantParams(m=m, gamma=0.0, coupling=IDENTITY)
        cfg = SamplingConfig(dt=1e-3, duration=2.0)
        u = TimeSeries(cfg.dt, np.full(cfg.n_samples, 6.0))
        ds = simulate(params, u, ZERO_LOAD, cfg)
        a = 6.0 / m
        t = ds.t
        assert np.allclose(ds.v_true, a * t, atol=1e-12)
        # semi-implicit grid: x_k = a dt^2 k(k+1)/2
        k = np.arange(cfg.n_samples)
        assert np.allclose(ds.sigma_true, 0.5 * a * cfg.dt ** 2 * k * (k + 1),
                           rtol=1e-12, atol=1e-15)

    def test_subcritical_input_chatters_near_rest(self):
        params = PlantParams(coupling=IDENTITY)
        cfg = SamplingConfig(dt=1e-3, duration=5.0)
        u = TimeSeries(cfg.dt, np.full(cfg.n_samples, 100.0))  # < gamma
        ds = simulate(params, u, ZERO_LOAD, cfg)
        step = cfg.dt * (100.0 + params.gamma) / params.m
        assert np.max(np.abs(ds.v_true)) < 3.0 * step
        free = 0.5 * (100.0 / params.m) * 25.0
        assert abs(ds.sigma_true[-1]) < 0.05 * free

    def test_work_energy_balance(self):
        params = PlantParams(m=1.3, gamma=0.0, coupling=IDENTITY)
        cfg = SamplingConfig(dt=1e-4, duration=2.0)
        t = cfg.t
        u = TimeSeries(cfg.dt, 5.0 * np.sin(2.0 * math.pi * 1.5 * t))
        ds = simulate(params, u, ZERO_LOAD, cfg)
        power = ds.u * ds.v_true
        work = np.trapezoid(power, dx=cfg.dt)
        kinetic = 0.5 * params.m * ds.v_true[-1] ** 2
        scale = 0.5 * params.m * np.max(ds.v_true ** 2)
        assert abs(work - kinetic) <= 5e-3 * scale

    def test_rejects_dt_mismatch(self):
        cfg = SamplingConfig(dt=1e-3, duration=1.0)
        u = TimeSeries(2e-3, np.zeros(cfg.n_samples))
        with pytest.raises(ValueError):
            simulate(PlantParams(), u, ZERO_LOAD, cfg)

    def test_rejects_length_mismatch(self):
        cfg = SamplingConfig(dt=1e-3, duration=1.0)
        u = TimeSeries(1e-3, np.zeros(17))
        with pytest.raises(ValueError):
            simulate(PlantParams(), u, ZERO_LOAD, cfg)

    def test_deterministic_bit_identical(self):
        cfg = SamplingConfig(dt=1e-3, duration=2.0, seed=9)
        params = PlantParams(noise_std=1e-4)
        load = LoadProfile(kind="sine", amplitude=300.0, period=2.0)
        u = TimeSeries(cfg.dt, np.full(cfg.n_samples, 500.0))
        d1 = simulate(params, u, load, cfg)
        d2 = simulate(params, u, load, cfg)
        for name in ("u", "sigma_meas", "sigma_true", "v_true", "f2_ref",
                     "xi_true"):
            assert np.array_equal(getattr(d1, name), getattr(d2, name))


class TestSimulateTracking:
    CONTROL = TrackingControl(kp=2e5, kd=1e3, ref_rate=0.05)

    def test_tracks_ramp(self):
        cfg = SamplingConfig(dt=1e-3, duration=10.0)
        ds = simulate_tracking(PlantParams(), self.CONTROL, ZERO_LOAD, cfg)
        ref = 0.05 * ds.t
        tail = slice(2000, None)
        err = np.abs(ds.sigma_true[tail] - ref[tail])
        assert np.max(err) < 0.05 * ref[-1]

    def test_truth_channels_independent_of_seed(self):
        load = LoadProfile(kind="saw", amplitude=2000.0, period=4.0,
                           smooth_tau=0.2)
        params = PlantParams(noise_std=1e-4)
        runs = []
        for seed in (1, 2):
            cfg = SamplingConfig(dt=1e-3, duration=4.0, seed=seed)
            runs.append(simulate_tracking(params, self.CONTROL, load, cfg))
        d1, d2 = runs
        for name in ("u", "sigma_true", "v_true", "f2_ref", "xi_true"):
            assert np.array_equal(getattr(d1, name), getattr(d2, name))
        assert not np.array_equal(d1.sigma_meas, d2.sigma_meas)

    def test_measurement_noise_statistics(self):
        cfg = SamplingConfig(dt=1e-3, duration=20.0, seed=5)
        params = PlantParams(noise_std=1e-4)
        ds = simulate_tracking(params, self.CONTROL, ZERO_LOAD, cfg)
        noise = ds.sigma_meas - ds.sigma_true
        assert abs(np.mean(noise)) < 5e-6
        assert np.std(noise) == pytest.approx(1e-4, rel=0.05)

    def test_opposing_load_slows_motion(self):
        cfg = SamplingConfig(dt=1e-3, duration=8.0)
        load = LoadProfile(kind="step", amplitude=800.0, smooth_tau=0.1)
        weak = TrackingControl(kp=5e3, kd=50.0, ref_rate=0.05)
        free = simulate_tracking(PlantParams(coupling=IDENTITY), weak,
                                 ZERO_LOAD, cfg)
        loaded = simulate_tracking(PlantParams(coupling=IDENTITY), weak,
                                   load, cfg)
        assert loaded.sigma_true[-1] < free.sigma_true[-1]


class TestDataset:
    def _make(self):
        cfg = SamplingConfig(dt=1e-3, duration=1.0, seed=3)
        params = PlantParams(noise_std=1e-4)
        u = TimeSeries(cfg.dt, np.full(cfg.n_samples, 400.0))
        load = LoadProfile(kind="sine", amplitude=200.0, period=0.5)
        return simulate(params, u, load, cfg)

    def test_csv_round_trip(self, tmp_path):
        ds = self._make()
        path = tmp_path / "run.csv"
        ds.to_csv(path)
        back = Dataset.from_csv(path)
        assert back.dt == pytest.approx(ds.dt, rel=1e-9)
        assert len(back) == len(ds)
        for name in ("u", "sigma_meas", "sigma_true", "v_true", "f2_ref"):
            a, b = getattr(ds, name), getattr(back, name)
            scale = max(np.max(np.abs(a)), 1e-30)
            assert np.max(np.abs(a - b)) <= 1e-6 * scale

    def test_missing_required_channel(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,u\n0,1\n0.001,1\n")
        with pytest.raises(KeyError):
            Dataset.from_csv(path)

    def test_unknown_channel_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,u,sigma_meas,bogus\n0,1,0,0\n0.001,1,0,0\n")
        with pytest.raises(ValueError):
            Dataset.from_csv(path)

    def test_channel_accessor(self):
        ds = self._make()
        ts = ds.channel("sigma_meas")
        assert isinstance(ts, TimeSeries)
        assert len(ts) == len(ds)
        with pytest.raises(KeyError):
            Dataset(dt=1e-3, u=np.zeros(3),
                    sigma_meas=np.zeros(3)).channel("v_true")

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dataset(dt=1e-3, u=np.zeros(5), sigma_meas=np.zeros(4))

    def test_non_finite_rejected(self):
        bad = np.array([0.0, np.nan, 0.0])
        with pytest.raises(ValueError):
            Dataset(dt=1e-3, u=np.zeros(3), sigma_meas=bad)
