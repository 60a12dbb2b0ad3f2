import datetime as dt
import math

import numpy as np
import pytest
from scipy import stats as sps

from conftest import make_dataset, make_exit, make_org, make_round
from venturemetrics.marketdata import Quarter, QuarterGrid
from venturemetrics.model import ExitKind
from venturemetrics.stats import (GeographyShare, geography_shares, median,
                                  pairwise_matrix, percent_changes,
                                  regularized_incomplete_beta,
                                  student_t_two_sided_p, summarize,
                                  time_to_exit_stats, welch_t)


class TestIncompleteBeta:
    def test_against_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            a = rng.uniform(0.5, 80)
            b = rng.uniform(0.4, 10)
            x = rng.uniform(0, 1)
            ours = regularized_incomplete_beta(a, b, x)
            ref = sps.beta.cdf(x, a, b)
            assert ours == pytest.approx(ref, abs=1e-10)

    def test_t_pvalues_against_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            t = rng.normal(0, 3)
            df = rng.uniform(1.0, 200.0)
            ours = student_t_two_sided_p(t, df)
            ref = 2 * sps.t.sf(abs(t), df)
            assert ours == pytest.approx(ref, abs=1e-10)

    def test_bounds(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
        assert student_t_two_sided_p(0.0, 10) == 1.0


class TestSummarize:
    def test_basic(self):
        row = summarize([2, 4, 6], "X")
        assert (row.n, row.mean, row.median, row.total) == (3, 4, 4, 12)
        assert row.sd == pytest.approx(2.0, abs=1e-15)

    def test_empty_omitted(self):
        assert summarize([], "X") is None

    def test_degenerate_single_value(self):
        row = summarize([5], "X")
        assert (row.mean, row.median, row.total, row.sd) == (5, 5, 5, 0.0)
        assert row.degenerate

    def test_display_rounded_reference_row(self):
        # eight values engineered to print mean 7.24 and total 57.90
        values = [1.0, 2.5, 6.25, 6.4, 7.9, 9.0, 11.0, 13.85]
        row = summarize(values, "Spam Filtering")
        assert row.n == 8
        assert f"{row.mean:.2f}" == "7.24"
        assert f"{row.total:.2f}" == "57.90"
        displayed_mean, displayed_total = 7.24, 57.90
        assert abs(displayed_mean * row.n - displayed_total) <= 2 * row.n * 0.005

    def test_mean_times_n_equals_total(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            values = rng.lognormal(2, 1, size=rng.integers(1, 60)).tolist()
            row = summarize(values, "X")
            assert row.mean * row.n == pytest.approx(row.total, rel=1e-9)

    def test_median_permutation_invariant(self):
        values = [9.0, 1.0, 5.0, 3.0]
        assert median(values) == median(sorted(values)) == 4.0


class TestWelch:
    def test_identical_samples_give_zero(self):
        res = welch_t([1, 2, 3], [1, 2, 3])
        assert res.t == 0.0

    def test_fixture_statistic_and_df(self):
        res = welch_t([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
        assert res.t == pytest.approx(-3 / math.sqrt(2.5), abs=1e-12)
        assert res.df == pytest.approx(6.25 / 1.0625, abs=1e-12)
        ref = sps.ttest_ind([1, 2, 3, 4, 5], [2, 4, 6, 8, 10], equal_var=False)
        assert res.t == pytest.approx(ref.statistic, rel=1e-12)
        assert res.p == pytest.approx(ref.pvalue, rel=1e-9)

    def test_sign_antisymmetry(self):
        a, b = [1.0, 2.5, 9.0], [4.0, 4.5, 5.0, 8.0]
        assert welch_t(a, b).t == -welch_t(b, a).t

    def test_degenerate_zero_variance(self):
        assert welch_t([2, 2], [2, 2]).t == 0.0
        with pytest.raises(ValueError, match="degenerate"):
            welch_t([2, 2], [3, 3])

    def test_small_samples_rejected(self):
        with pytest.raises(ValueError):
            welch_t([1], [1, 2])

    def test_df_within_satterthwaite_bounds(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            n1, n2 = int(rng.integers(2, 40)), int(rng.integers(2, 40))
            a = rng.normal(0, rng.uniform(0.5, 4), n1).tolist()
            b = rng.normal(1, rng.uniform(0.5, 4), n2).tolist()
            res = welch_t(a, b)
            assert min(n1, n2) - 1 <= res.df <= n1 + n2 - 2 + 1e-9

    def test_reduces_to_pooled_t_for_equal_variance_and_n(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            a = rng.normal(0, 1, 12)
            b = rng.normal(0.5, 1, 12)
            # force exactly equal sample variances by mirroring deviations
            b = (b - b.mean()) * (a.std(ddof=1) / b.std(ddof=1)) + b.mean()
            ours = welch_t(a.tolist(), b.tolist())
            pooled = sps.ttest_ind(a, b, equal_var=True)
            assert ours.t == pytest.approx(pooled.statistic, rel=1e-12, abs=1e-12)


class TestPairwiseMatrix:
    def test_two_by_two_antisymmetric(self):
        names, m = pairwise_matrix({"A": [1, 2, 3], "B": [4, 5, 6]})
        assert m[0][0] is None and m[1][1] is None
        assert m[0][1] == pytest.approx(-m[1][0], abs=1e-15)

    def test_identical_samples_zero_offdiagonal(self):
        names, m = pairwise_matrix({"A": [1, 2], "B": [1, 2], "C": [1, 2]})
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert m[i][j] == 0.0

    def test_ordered_means_sign_pattern(self):
        samples = {
            "low": [1.0, 1.01, 0.99, 1.02],
            "mid": [2.0, 2.01, 1.99, 2.02],
            "high": [3.0, 3.01, 2.99, 3.02],
        }
        names, m = pairwise_matrix(samples, order=["low", "mid", "high"])
        assert m[0][1] < 0 and m[0][2] < 0 and m[1][2] < 0
        assert m[1][0] > 0 and m[2][0] > 0 and m[2][1] > 0

    def test_small_sector_gets_na_row_and_column(self):
        names, m = pairwise_matrix({"A": [1, 2, 3], "B": [4, 5, 6], "tiny": [1.0]},
                                   order=["A", "B", "tiny"])
        assert m[2] == [None, None, None]
        assert m[0][2] is None and m[1][2] is None

    def test_antisymmetry_random(self):
        rng = np.random.default_rng(11)
        samples = {f"s{i}": rng.normal(i, 1 + i, 20).tolist() for i in range(5)}
        _, m = pairwise_matrix(samples)
        for i in range(5):
            for j in range(5):
                if i != j:
                    assert m[i][j] + m[j][i] == pytest.approx(0.0, abs=1e-12)


class TestPercentChanges:
    def grid(self, quarters=8):
        start = dt.date(2020, 1, 1)
        end = Quarter(2020 + (quarters - 1) // 4, (quarters - 1) % 4 + 1).end
        return QuarterGrid(start, end)

    def test_ten_percent_growth(self):
        g = QuarterGrid(dt.date(2020, 1, 1), dt.date(2020, 9, 30))
        means = {Quarter(2020, 1): 100.0, Quarter(2020, 2): 110.0, Quarter(2020, 3): 121.0}
        row = percent_changes(means, g, "X")
        assert row.annualized_mean_pct == pytest.approx(40.0, rel=1e-12)
        assert row.annualized_sd_pct == pytest.approx(0.0, abs=1e-9)

    def test_constant_series(self):
        g = QuarterGrid(dt.date(2020, 1, 1), dt.date(2020, 12, 31))
        means = {q: 50.0 for q in g}
        row = percent_changes(means, g, "X")
        assert row.annualized_mean_pct == 0.0

    def test_too_many_missing_quarters_discards(self):
        g = QuarterGrid(dt.date(2015, 1, 1), dt.date(2020, 12, 31))  # 24 quarters
        means = {Quarter(2015, 1): 1.0, Quarter(2015, 2): 2.0, Quarter(2015, 3): 3.0}
        assert len(g) - 3 == 21
        assert percent_changes(means, g, "X", max_missing=20) is None

    def test_exactly_twenty_missing_kept(self):
        g = QuarterGrid(dt.date(2015, 1, 1), dt.date(2020, 12, 31))
        quarters = list(g)[:4]
        means = {q: 10.0 * (i + 1) for i, q in enumerate(quarters)}
        assert percent_changes(means, g, "X", max_missing=20) is not None

    def test_zero_base_skipped_and_counted(self):
        g = QuarterGrid(dt.date(2020, 1, 1), dt.date(2020, 12, 31))
        qs = list(g)
        means = {qs[0]: 0.0, qs[1]: 5.0, qs[2]: 10.0}
        row = percent_changes(means, g, "X")
        assert row.skipped_zero_base == 1
        assert row.n_changes == 1


class TestTimeToExit:
    def dataset(self, days_list, sector="Privacy", min_round=dt.date(2015, 1, 1)):
        orgs, rounds, exits = [], [], []
        for i, days in enumerate(days_list):
            org_id = f"o{i}"
            orgs.append(make_org(org_id, tags=(sector.lower(),)))
            rounds.append(make_round(f"r{i}", org_id, min_round, amount=1, pmv=10))
            exits.append(make_exit(org_id, min_round + dt.timedelta(days=days),
                                   kind=ExitKind.IPO, value=20.0))
        return make_dataset(orgs, rounds, exits)

    def test_below_threshold_reports_na_with_detail(self):
        rows, details = time_to_exit_stats(self.dataset([365]), min_obs=10)
        assert rows[0].n == 1
        assert rows[0].mean_days is None
        assert details == [("Privacy", "o0", 365)]

    def test_ten_identical_firms(self):
        rows, _ = time_to_exit_stats(self.dataset([1000] * 10), min_obs=10)
        assert rows[0].mean_days == 1000
        assert rows[0].sd_days == 0

    def test_mixed_sample_sd(self):
        rows, _ = time_to_exit_stats(self.dataset([800] * 5 + [1200] * 5), min_obs=10)
        assert rows[0].mean_days == pytest.approx(1000.0)
        assert rows[0].sd_days == pytest.approx(math.sqrt(10 * 200**2 / 9), abs=1e-10)
        assert rows[0].sd_days == pytest.approx(210.82, abs=0.01)
        assert (rows[0].max_days, rows[0].min_days) == (1200, 800)

    def test_acquisitions_do_not_count(self):
        ds = self.dataset([500] * 10)
        acq = make_exit("oX", dt.date(2016, 1, 1), kind=ExitKind.ACQUISITION, value=5.0)
        org = make_org("oX", tags=("privacy",))
        rnd = make_round("rX", "oX", dt.date(2015, 1, 1), amount=1, pmv=10)
        ds2 = make_dataset(list(ds.organizations) + [org],
                           list(ds.rounds) + [rnd], list(ds.exits) + [acq])
        rows, _ = time_to_exit_stats(ds2, min_obs=10)
        assert rows[0].n == 10

    def test_measured_from_first_round(self):
        org = make_org("o0", tags=("privacy",))
        rounds = [make_round("r0", "o0", dt.date(2015, 1, 1), amount=1, pmv=10),
                  make_round("r1", "o0", dt.date(2016, 1, 1), amount=2, pmv=20)]
        exits = [make_exit("o0", dt.date(2016, 1, 1) - dt.timedelta(days=0), value=5.0)]
        ds = make_dataset([org], rounds, exits)
        rows, details = time_to_exit_stats(ds, min_obs=1)
        assert details[0][2] == 365


class TestGeographyShares:
    def dataset(self, country_amounts, sector="Privacy"):
        orgs, rounds = [], []
        for i, (country, amount) in enumerate(country_amounts):
            org_id = f"o{i}"
            orgs.append(make_org(org_id, country=country, tags=(sector.lower(),)))
            rounds.append(make_round(f"r{i}", org_id, dt.date(2015, 1, 1),
                                     amount=amount, pmv=None))
        return make_dataset(orgs, rounds, [])

    def test_single_country(self):
        gs = geography_shares(self.dataset([("US", 5.0), ("US", 7.0)]), "Privacy")
        assert gs.shares == (("US", 1.0),)

    def test_two_country_split(self):
        gs = geography_shares(self.dataset([("US", 60.0), ("IL", 41.0)]), "Privacy")
        shares = dict(gs.shares)
        assert shares["US"] == pytest.approx(60 / 101, rel=1e-12)
        assert shares["IL"] == pytest.approx(41 / 101, rel=1e-12)

    def test_top_k_plus_other_bucket(self):
        countries = [("US", 1.0), ("IL", 1.0), ("GB", 1.0), ("CN", 1.0),
                     ("DE", 1.0), ("FR", 1.0)]
        gs = geography_shares(self.dataset(countries), "Privacy", k=4)
        shares = dict(gs.shares)
        assert shares["Other"] == pytest.approx(2 / 6, rel=1e-12)
        assert len(gs.shares) == 5

    def test_shares_sum_to_one(self):
        rng = np.random.default_rng(12)
        countries = ["US", "IL", "GB", "CN", "DE", "FR", "IN", "CA"]
        data = [(c, float(rng.uniform(0.1, 100))) for c in countries for _ in range(3)]
        gs = geography_shares(self.dataset(data), "Privacy", k=4)
        assert sum(s for _, s in gs.shares) == pytest.approx(1.0, abs=1e-9)

    def test_tie_break_by_country_code(self):
        gs = geography_shares(self.dataset([("ZA", 5.0), ("AU", 5.0)]), "Privacy", k=1)
        assert gs.shares[0][0] == "AU"

    def test_no_rounds_returns_none(self):
        ds = make_dataset([make_org("o1", tags=("privacy",))], [], [])
        assert geography_shares(ds, "Privacy") is None
