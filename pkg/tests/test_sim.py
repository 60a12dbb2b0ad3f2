import math

import numpy as np
import pytest

from venturemetrics import ingest
from venturemetrics.econometrics import ols_with_intercept
from venturemetrics.sim import (RoundPolicy, SimSpec, emit_dataset,
                                parameter_recovery_trial, simulate_firm_path,
                                simulate_market, stream)


class TestStreams:
    def test_distinct_streams_differ(self):
        a = stream(42, 0).standard_normal(8)
        b = stream(42, 1).standard_normal(8)
        assert not np.allclose(a, b)

    def test_same_stream_reproduces(self):
        assert np.array_equal(stream(42, 5).standard_normal(16),
                              stream(42, 5).standard_normal(16))


class TestSimulateMarket:
    def test_zero_vol_is_constant_drift(self):
        spec = SimSpec(mu_m=0.02, sigma_m=0.0, quarters=12)
        incs = simulate_market(spec)
        assert np.allclose(incs, 0.02)

    def test_seed_determinism(self):
        spec = SimSpec(quarters=40, seed=7)
        assert np.array_equal(simulate_market(spec), simulate_market(spec))

    def test_clt_bound_on_long_sample(self):
        spec = SimSpec(mu_m=0.02, sigma_m=0.08, quarters=10_000, seed=123)
        incs = simulate_market(spec)
        assert abs(incs.mean() - 0.02) <= 3 * 0.08 / math.sqrt(10_000)


class TestSimulateFirmPath:
    def test_deterministic_drift(self):
        spec = SimSpec(gamma=0.03, delta=0.0, sigma=0.0, rf=0.004, quarters=10)
        market = simulate_market(spec)
        path = simulate_firm_path(spec, market, firm=0)
        assert np.allclose(path, 0.004 + 0.03)

    def test_market_mimicking_firm(self):
        spec = SimSpec(gamma=0.0, delta=1.0, sigma=0.0, quarters=10)
        market = simulate_market(spec)
        path = simulate_firm_path(spec, market, firm=3)
        assert np.allclose(path, market)

    def test_regression_on_increments_recovers_parameters(self):
        spec = SimSpec(gamma=0.07, delta=0.48, sigma=0.1418, rf=0.005,
                       quarters=200, seed=99)
        market = simulate_market(spec)
        path = simulate_firm_path(spec, market, firm=0)
        x = (market - spec.rf).tolist()
        y = (path - spec.rf).tolist()
        gamma, delta, sigma, se_g, se_d, _ = ols_with_intercept(x, y)
        assert abs(gamma - spec.gamma) <= 2 * se_g
        assert abs(delta - spec.delta) <= 2 * se_d


class TestEmitDataset:
    def test_clean_dataset_loads_without_rejections(self):
        spec = SimSpec(n_firms=40, quarters=20, missingness=0.0, seed=5)
        out = emit_dataset(spec)
        dataset, rejections = ingest.load_dataset(
            out.organizations_csv, out.funding_rounds_csv, out.exits_csv, window=None)
        assert all(not r for r in rejections.values())
        assert len(dataset.organizations) == 40
        assert all(r.pmv_musd is not None for r in dataset.rounds)

    def test_round_count_with_fixed_policy(self):
        spec = SimSpec(n_firms=100, quarters=60, seed=5,
                       round_policy=RoundPolicy(rounds_per_firm=2,
                                                mean_spacing_quarters=1.0))
        out = emit_dataset(spec)
        rounds, _ = ingest.parse_funding_rounds(out.funding_rounds_csv)
        assert len(rounds) == 200

    def test_full_missingness_blanks_every_pmv(self):
        spec = SimSpec(n_firms=30, quarters=20, missingness=1.0, seed=5)
        out = emit_dataset(spec)
        rounds, _ = ingest.parse_funding_rounds(out.funding_rounds_csv)
        assert all(r.pmv_musd is None for r in rounds)

    def test_byte_determinism(self):
        spec = SimSpec(n_firms=25, quarters=16, missingness=0.3, seed=11)
        a, b = emit_dataset(spec), emit_dataset(spec)
        assert a == b

    def test_market_files_reproduce_spec_rates(self):
        import datetime as dt

        from venturemetrics.marketdata import (QuarterGrid,
                                               quarterly_log_market_returns,
                                               quarterly_log_riskfree,
                                               read_price_csv, read_rate_csv)
        spec = SimSpec(n_firms=5, quarters=8, seed=3, rf=0.005)
        out = emit_dataset(spec)
        grid = QuarterGrid(spec.start, dt.date(2011, 12, 31))
        ln_rm = quarterly_log_market_returns(read_price_csv(out.index_csv), grid)
        ln_rf = quarterly_log_riskfree(read_rate_csv(out.tbill_csv), grid)
        market = simulate_market(spec)
        for q, inc in zip(grid, market):
            assert ln_rm[q] == pytest.approx(float(inc), rel=1e-9, abs=1e-12)
            assert ln_rf[q] == pytest.approx(0.005, rel=1e-12)

    def test_ground_truth_carries_parameters(self):
        spec = SimSpec(n_firms=5, quarters=8, seed=3)
        out = emit_dataset(spec)
        assert out.ground_truth["gamma"] == spec.gamma
        assert out.ground_truth["n_exits"] == 5


class TestRecoveryTrial:
    def test_single_trial_recovers_within_wide_band(self):
        spec = SimSpec(n_firms=200, quarters=48, seed=0)
        fit = parameter_recovery_trial(spec, seed=1234)
        assert abs(fit.gamma - spec.gamma) <= 4 * fit.se_gamma
        assert abs(fit.delta - spec.delta) <= 4 * fit.se_delta

    def test_coverage_sample(self):
        spec = SimSpec(n_firms=100, quarters=48)
        hits_g = hits_d = 0
        reps = 60
        for seed in range(reps):
            fit = parameter_recovery_trial(spec, seed=seed)
            hits_g += abs(fit.gamma - spec.gamma) <= 2 * fit.se_gamma
            hits_d += abs(fit.delta - spec.delta) <= 2 * fit.se_delta
        assert hits_g / reps >= 0.85
        assert hits_d / reps >= 0.85
