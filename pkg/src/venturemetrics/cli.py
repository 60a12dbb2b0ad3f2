"""Command-line pipeline: ingest, impute, returns, fit, report, simulate, all.

Every stage reads the raw inputs named by the run configuration, recomputes
what it depends on (stages are cheap and deterministic), writes its
artifacts into --out and finishes with a manifest hashing every input byte
consumed. Failures exit non-zero with a machine-readable JSON error on
stderr.
"""

from __future__ import annotations

import datetime as dt
import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import ingest as ingest_mod
from . import report as report_mod
from .config import RunConfig, load_config, write_manifest
from .econometrics import fit_log_model, implied_performance
from .impute import ImputerConfig, fit_imputer, impute_dataset, labeled_rows
from .marketdata import (QuarterGrid, quarterly_log_market_returns,
                         quarterly_log_riskfree, read_price_csv, read_rate_csv)
from .model import Dataset, SECTORS
from .returns import (DilutionMode, compute_round_returns, pooled_series,
                      sector_series)
from .sim import SimSpec, emit_dataset
from .stats import (geography_shares, pairwise_matrix, percent_changes,
                    summarize, time_to_exit_stats)

ALL_SECTORS_LABEL = "All sectors"


class PipelineError(Exception):
    def __init__(self, message: str, exit_code: int = 1, **extra):
        super().__init__(message)
        self.exit_code = exit_code
        self.extra = extra


def _fail(err: Exception):
    if isinstance(err, PipelineError):
        doc = {"error": str(err), **err.extra}
        code = err.exit_code
    elif isinstance(err, FileNotFoundError):
        doc = {"error": "missing input file", "path": str(err.filename)}
        code = 2
    else:
        doc = {"error": str(err), "kind": type(err).__name__}
        code = 1
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    sys.exit(code)


def _read_text(path: Path) -> str:
    if not path.exists():
        raise FileNotFoundError(2, "missing input", str(path))
    return path.read_text(encoding="utf-8")


class Pipeline:
    """Shared stage runner; each CLI command drives it up to its stage."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, Path] = {}
        self.artifacts: dict[str, Path] = {}
        self.grid = QuarterGrid(cfg.window_start, cfg.window_end)

    def _write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.artifacts[name] = path
        return path

    def _write_json(self, name: str, doc) -> Path:
        return self._write(name, json.dumps(doc, sort_keys=True, indent=2) + "\n")

    def finish(self) -> Path:
        self._write_json("run_config.json", self.cfg.as_dict())
        return write_manifest(self.out, self.cfg, self.inputs, self.artifacts)

    # --- stages ---------------------------------------------------------

    def load(self) -> Dataset:
        paths = {name: self.cfg.path(name) for name in ("organizations", "funding_rounds", "exits")}
        texts = {name: _read_text(p) for name, p in paths.items()}
        self.inputs.update(paths)
        dataset, rejections = ingest_mod.load_dataset(
            texts["organizations"], texts["funding_rounds"], texts["exits"],
            window=(self.cfg.window_start, self.cfg.window_end),
        )
        for name, rejects in rejections.items():
            base = Path(getattr(self.cfg, name)).name
            self._write(f"{base}.rejects.csv", ingest_mod.rejections_csv(rejects))
        self._write_json("ingest_summary.json", {
            "accepted": dataset.counts(),
            "rejected": {name: len(r) for name, r in rejections.items()},
            "window": [self.cfg.window_start.isoformat(), self.cfg.window_end.isoformat()],
        })
        self.dataset = dataset
        return dataset

    def write_normalized(self):
        self._write("organizations.csv", ingest_mod.serialize_organizations(self.dataset.organizations))
        self._write("funding_rounds.csv", ingest_mod.serialize_funding_rounds(self.dataset.rounds))
        self._write("exits.csv", ingest_mod.serialize_exits(self.dataset.exits))

    def impute(self) -> Dataset:
        if not self.cfg.impute_enabled:
            self.imputed = self.dataset
            self._write_json("imputation_report.json", {"enabled": False})
            return self.imputed
        rows = labeled_rows(self.dataset)
        icfg = ImputerConfig(kind=self.cfg.imputer_kind, seed=self.cfg.imputer_seed,
                             knn_k=self.cfg.knn_k, country_top_k=self.cfg.country_top_k)
        model, rep = fit_imputer(rows, icfg)
        self.imputed, counts = impute_dataset(self.dataset, model)
        self._write("imputer.model", model.to_json())
        self._write_json("imputation_report.json", {"enabled": True, **rep.as_dict(), **counts})
        self._write("funding_rounds_imputed.csv",
                    ingest_mod.serialize_funding_rounds(self.imputed.rounds, with_provenance=True))
        self._write("exits_imputed.csv",
                    ingest_mod.serialize_exits(self.imputed.exits, with_provenance=True))
        return self.imputed

    def market(self):
        index_path = self.cfg.path("index")
        tbill_path = self.cfg.path("tbill")
        self.inputs["index"] = index_path
        self.inputs["tbill"] = tbill_path
        prices = read_price_csv(_read_text(index_path))
        rates = read_rate_csv(_read_text(tbill_path))
        self.ln_rm = quarterly_log_market_returns(prices, self.grid)
        self.ln_rf = quarterly_log_riskfree(rates, self.grid, simple=self.cfg.riskfree_simple)

    def returns(self):
        mode = DilutionMode(self.cfg.dilution_mode)
        self.round_returns, coverage = compute_round_returns(
            self.imputed, mode=mode, days_per_quarter=self.cfg.days_per_quarter,
            first_round_only=self.cfg.first_round_only,
        )
        sectors_by_org = {o.org_id: sorted(o.sectors) for o in self.imputed.organizations}
        self.series = sector_series(self.round_returns, self.grid, sectors_by_org)
        self.pooled = pooled_series(self.round_returns, self.grid, ALL_SECTORS_LABEL)
        self._write("round_returns.csv", report_mod.round_returns_csv(self.round_returns))
        self._write("sector_quarterly.csv", report_mod.sector_quarterly_csv(self.series))
        self._write_json("returns_coverage.json", coverage.as_dict())

    def fit(self):
        fits, implied, reports = [], {}, []
        ordered = [s for s in SECTORS if s in self.series]
        for sector in ordered:
            fit, mm, rep = fit_log_model(self.series[sector], self.ln_rm, self.ln_rf,
                                         min_quarters=self.cfg.min_quarters)
            reports.append(rep)
            if fit is not None:
                fits.append(fit)
                implied[fit.sector] = implied_performance(fit, mm)
        pooled_fit, pooled_mm, pooled_rep = fit_log_model(
            self.pooled, self.ln_rm, self.ln_rf, min_quarters=self.cfg.min_quarters)
        reports.append(pooled_rep)
        if pooled_fit is not None:
            fits.append(pooled_fit)
            implied[pooled_fit.sector] = implied_performance(pooled_fit, pooled_mm)
        self.fits, self.implied = fits, implied
        self._write("fits.csv", report_mod.fits_csv(fits, implied))
        self._write("fits.md", report_mod.fits_md(fits, implied))
        order = [f.sector for f in fits]
        self._write("implied.csv", report_mod.implied_csv(implied, order))
        self._write("implied.md", report_mod.implied_md(implied, order))
        self._write_json("fit_report.json", reports)

    def report(self):
        data = self.imputed
        sectors_by_org = {o.org_id: o.sectors for o in data.organizations}
        funding_rows, pmv_rows = [], []
        funding_samples: dict[str, list[float]] = {s: [] for s in SECTORS}
        pmv_samples: dict[str, list[float]] = {s: [] for s in SECTORS}
        for r in data.rounds:
            for sector in sorted(sectors_by_org.get(r.org_id, ())):
                funding_samples[sector].append(r.amount_musd)
                if r.pmv_musd is not None:
                    pmv_samples[sector].append(r.pmv_musd)
        for sector in SECTORS:
            row = summarize(funding_samples[sector], sector)
            if row:
                funding_rows.append(row)
            row = summarize(pmv_samples[sector], sector)
            if row:
                pmv_rows.append(row)
        all_funding = [v for s in SECTORS for v in funding_samples[s]]
        all_pmv = [v for s in SECTORS for v in pmv_samples[s]]
        total_row = summarize(all_funding, "Total")
        if total_row:
            funding_rows.append(total_row)
        total_row = summarize(all_pmv, "Total")
        if total_row:
            pmv_rows.append(total_row)
        self._write("table2.csv", report_mod.summary_table_csv(funding_rows, pmv_rows))
        self._write("table2.md", report_mod.summary_table_md(funding_rows, pmv_rows))

        for metric, samples in (("funding", funding_samples), ("pmv", pmv_samples)):
            try:
                names, matrix = pairwise_matrix(samples, order=SECTORS)
            except ValueError as err:
                self._write_json(f"ttest_{metric}.skipped.json", {"skipped": str(err)})
                continue
            self._write(f"ttest_{metric}.csv", report_mod.ttest_matrix_csv(names, matrix))
            title = ("Pairwise Welch t statistics, funding amounts" if metric == "funding"
                     else "Pairwise Welch t statistics, post-money valuations")
            self._write(f"ttest_{metric}.md", report_mod.ttest_matrix_md(title, names, matrix))

        funding_trends: dict[str, object] = {}
        pmv_trends: dict[str, object] = {}
        rounds_by_sector_quarter: dict[str, dict] = {s: {} for s in SECTORS}
        pmv_by_sector_quarter: dict[str, dict] = {s: {} for s in SECTORS}
        for r in data.rounds:
            q = self.grid.quarter_of(r.date)
            if q is None:
                continue
            for sector in sorted(sectors_by_org.get(r.org_id, ())):
                rounds_by_sector_quarter[sector].setdefault(q, []).append(r.amount_musd)
                if r.pmv_musd is not None:
                    pmv_by_sector_quarter[sector].setdefault(q, []).append(r.pmv_musd)
        for sector in SECTORS:
            means = {q: sum(v) / len(v) for q, v in rounds_by_sector_quarter[sector].items()}
            row = percent_changes(means, self.grid, sector, max_missing=self.cfg.trend_max_missing)
            if row:
                funding_trends[sector] = row
            means = {q: sum(v) / len(v) for q, v in pmv_by_sector_quarter[sector].items()}
            row = percent_changes(means, self.grid, sector, max_missing=self.cfg.trend_max_missing)
            if row:
                pmv_trends[sector] = row
        self._write("trends.csv", report_mod.trends_csv(funding_trends, pmv_trends))
        self._write("trends.md", report_mod.trends_md(funding_trends, pmv_trends))

        ipo_rows, ipo_details = time_to_exit_stats(data, min_obs=self.cfg.ipo_min_obs)
        self._write("time_to_ipo.csv", report_mod.time_to_ipo_csv(ipo_rows))
        self._write("time_to_ipo.md", report_mod.time_to_ipo_md(ipo_rows))
        self._write("time_to_ipo_detail.csv", report_mod.time_to_ipo_detail_csv(ipo_details))

        shares = []
        for sector in SECTORS:
            gs = geography_shares(data, sector, k=self.cfg.geo_top_k)
            if gs is not None:
                shares.append(gs)
        self._write("geo_shares.csv", report_mod.geo_shares_csv(shares))
        self._write("geo_shares.md", report_mod.geo_shares_md(shares))

        if self.cfg.figures:
            for name, render in [
                ("geo_shares.png", lambda p: report_mod.save_geo_shares_figure(shares, p)),
                ("trends.png", lambda p: report_mod.save_trends_figure(funding_trends, pmv_trends, p)),
                ("pmv_log_hist.png", lambda p: report_mod.save_pmv_histogram(data, p)),
            ]:
                path = self.out / name
                render(path)
                self.artifacts[name] = path


def _build_config(config_path: Optional[str], inputs: Optional[str], seed: Optional[int],
                  dilution: Optional[str], window: Optional[str],
                  min_quarters: Optional[int]) -> RunConfig:
    cfg = load_config(config_path)
    if inputs is not None:
        cfg.inputs_dir = inputs
    if seed is not None:
        cfg.imputer_seed = seed
    if dilution is not None:
        cfg.dilution_mode = dilution.replace("-", "_")
    if window is not None:
        start_s, _, end_s = window.partition(":")
        cfg.window_start = dt.date.fromisoformat(start_s)
        cfg.window_end = dt.date.fromisoformat(end_s)
    if min_quarters is not None:
        cfg.min_quarters = min_quarters
    return cfg


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="run configuration TOML")(fn)
    fn = click.option("--inputs", type=click.Path(), default=None,
                      help="directory holding the input CSVs")(fn)
    fn = click.option("--out", required=True, type=click.Path(), help="output directory")(fn)
    fn = click.option("--seed", type=int, default=None, help="imputer seed override")(fn)
    fn = click.option("--dilution", type=click.Choice(["standard", "as-printed"]), default=None)(fn)
    fn = click.option("--window", default=None, metavar="START:END",
                      help="sample window, e.g. 2010-01-01:2022-05-31")(fn)
    fn = click.option("--min-quarters", type=int, default=None)(fn)
    return fn


def _run_stages(last_stage: str, config_path, inputs, out, seed, dilution, window, min_quarters):
    try:
        cfg = _build_config(config_path, inputs, seed, dilution, window, min_quarters)
        pipe = Pipeline(cfg, Path(out))
        pipe.load()
        pipe.write_normalized()
        if last_stage != "ingest":
            pipe.impute()
        if last_stage in ("returns", "fit", "all"):
            pipe.market()
            pipe.returns()
        if last_stage in ("fit", "all"):
            pipe.fit()
        if last_stage in ("report", "all"):
            pipe.report()
        pipe.finish()
    except Exception as err:  # noqa: BLE001 - single exit path with JSON error
        _fail(err)


@click.group()
def main():
    """Sector-level private-equity performance pipeline."""


def _stage_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @_common_options
    def _cmd(config_path, inputs, out, seed, dilution, window, min_quarters, _stage=name):
        _run_stages(_stage, config_path, inputs, out, seed, dilution, window, min_quarters)
    return _cmd


_stage_command("ingest", "Parse and validate the input CSVs; write normalized data and rejects.")
_stage_command("impute", "Fit the PMV imputer and write the imputed dataset.")
_stage_command("returns", "Compute dilution-adjusted returns and quarterly sector series.")
_stage_command("fit", "Estimate the quarterly log model and implied parameters per sector.")
_stage_command("report", "Emit the descriptive/inferential tables and figures.")
_stage_command("all", "Run the whole pipeline and write every artifact.")


@main.command(name="fetch-market",
              help="Download index/rate CSVs over HTTP (explicit opt-in; the "
                   "pipeline itself never touches the network).")
@click.option("--index-url", default=None, help="URL returning date,level rows")
@click.option("--tbill-url", default=None, help="URL returning date,rate_percent rows")
@click.option("--out", required=True, type=click.Path(), help="output directory")
def fetch_market_cmd(index_url, tbill_url, out):
    try:
        if index_url is None and tbill_url is None:
            raise PipelineError("nothing to fetch: pass --index-url and/or --tbill-url",
                                exit_code=2)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        from .marketdata import fetch_csv
        if index_url is not None:
            text = fetch_csv(index_url)
            read_price_csv(text)  # validate before writing
            (out_dir / "index.csv").write_text(text, encoding="utf-8")
        if tbill_url is not None:
            text = fetch_csv(tbill_url)
            read_rate_csv(text)
            (out_dir / "tbill.csv").write_text(text, encoding="utf-8")
    except Exception as err:  # noqa: BLE001
        _fail(err)


@main.command(name="simulate", help="Generate a synthetic dataset from a simulation spec.")
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="simulation spec TOML")
@click.option("--out", required=True, type=click.Path(), help="output directory")
def simulate_cmd(spec_path, out):
    try:
        if not Path(spec_path).exists():
            raise FileNotFoundError(2, "missing input", str(spec_path))
        spec = SimSpec.from_toml(spec_path)
        dataset = emit_dataset(spec)
        dataset.write(Path(out))
    except Exception as err:  # noqa: BLE001
        _fail(err)


if __name__ == "__main__":
    main()
