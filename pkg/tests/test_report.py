import csv
import io

import pytest

from venturemetrics import report
from venturemetrics.cli import main as cli_main
from venturemetrics.econometrics import LogModelFit, implied_performance
from venturemetrics.marketdata import MarketMoments, Quarter
from venturemetrics.returns import QuarterlySectorSeries
from venturemetrics.stats import GeographyShare, SummaryRow, TrendRow


def fit_and_implied(sector="Privacy", gamma=0.07, delta=0.48, sigma=0.14):
    fit = LogModelFit(sector=sector, gamma=gamma, delta=delta, sigma=sigma,
                      se_gamma=0.02, se_delta=0.2, cov_gamma_delta=-0.0005,
                      n_obs=40, quarters=())
    mm = MarketMoments(mu_ln_rf=0.004, mu_ln_rm=0.015, var_ln_rm=0.003)
    return fit, implied_performance(fit, mm)


class TestEstimationTables:
    def test_fits_csv_full_precision_round_trip(self):
        fit, imp = fit_and_implied()
        text = report.fits_csv([fit], {fit.sector: imp})
        rows = list(csv.DictReader(io.StringIO(text)))
        assert float(rows[0]["gamma"]) == fit.gamma
        assert float(rows[0]["beta"]) == imp.beta
        assert rows[0]["n_obs"] == "40"

    def test_fits_md_has_stars_for_significant_gamma(self):
        fit, imp = fit_and_implied()
        text = report.fits_md([fit], {fit.sector: imp})
        assert "0.07***" in text
        assert "levels" in text  # significance note

    def test_implied_csv_headers_match_interface(self):
        fit, imp = fit_and_implied()
        text = report.implied_csv({fit.sector: imp}, [fit.sector])
        header = text.splitlines()[0]
        assert header == "sector,e_ln_r_ann_pct,se,e_R_ann_pct,se"
        values = text.splitlines()[1].split(",")
        assert float(values[1]) == pytest.approx(imp.e_ln_r * 400, rel=1e-12)

    def test_sector_quarterly_csv(self):
        series = {"Privacy": QuarterlySectorSeries(
            "Privacy", {Quarter(2015, 2): 0.125}, {Quarter(2015, 2): 4})}
        text = report.sector_quarterly_csv(series)
        assert "Privacy,2015Q2,0.125,4" in text


class TestDisplayTables:
    def test_summary_table_two_decimals(self):
        row = SummaryRow("Privacy", 3, 4.12345, 4.0, 12.37035, 2.0)
        text = report.summary_table_csv([row], [])
        assert "Privacy,funding,3,4.12,4.00,12.37,2.00" in text

    def test_ttest_matrix_blank_diagonal(self):
        text = report.ttest_matrix_csv(["A", "B"], [[None, 1.234], [-1.234, None]])
        lines = text.splitlines()
        assert lines[1] == "A,,1.23"
        assert lines[2] == "B,-1.23,"

    def test_geo_csv_percent(self):
        gs = GeographyShare("Privacy", (("US", 0.594), ("IL", 0.406)))
        text = report.geo_shares_csv([gs])
        assert "Privacy,US,59.40" in text
        assert "Privacy,IL,40.60" in text


class TestFigures:
    def test_figures_byte_deterministic(self, tmp_path):
        gs = [GeographyShare("Privacy", (("US", 0.7), ("Other", 0.3)))]
        trends = {"Privacy": TrendRow("Privacy", 40.0, 10.0, 8, 2, 0)}
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        report.save_geo_shares_figure(gs, a)
        report.save_geo_shares_figure(gs, b)
        assert a.read_bytes() == b.read_bytes()
        ta, tb = tmp_path / "ta.png", tmp_path / "tb.png"
        report.save_trends_figure(trends, trends, ta)
        report.save_trends_figure(trends, trends, tb)
        assert ta.read_bytes() == tb.read_bytes()


class TestFetchMarket:
    def test_fetch_market_validates_and_writes(self, tmp_path, monkeypatch):
        payloads = {
            "https://example.test/index": "date,level\n2020-01-02,3200.5\n",
            "https://example.test/tbill": "date,rate_percent\n2020-01-01,1.5\n",
        }
        monkeypatch.setattr("venturemetrics.marketdata.fetch_csv",
                            lambda url, timeout=30.0: payloads[url])
        from click.testing import CliRunner
        result = CliRunner().invoke(cli_main, [
            "fetch-market", "--index-url", "https://example.test/index",
            "--tbill-url", "https://example.test/tbill", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "index.csv").read_text().startswith("date,level")
        assert (tmp_path / "tbill.csv").read_text().startswith("date,rate_percent")

    def test_fetch_market_rejects_bad_payload(self, tmp_path, monkeypatch):
        monkeypatch.setattr("venturemetrics.marketdata.fetch_csv",
                            lambda url, timeout=30.0: "nope,nope\n1,2\n")
        from click.testing import CliRunner
        result = CliRunner().invoke(cli_main, [
            "fetch-market", "--index-url", "https://example.test/x",
            "--out", str(tmp_path)])
        assert result.exit_code != 0

    def test_non_http_url_rejected(self):
        from venturemetrics.marketdata import MarketDataError, fetch_csv
        with pytest.raises(MarketDataError):
            fetch_csv("file:///etc/passwd")
