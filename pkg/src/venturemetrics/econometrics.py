"""Quarterly log-market model and implied risk/return parameters.

Per sector, OLS of the excess log sector return on the excess log market
return,

    y_q = ln(1 + mean r_q) - ln R_f(q) = gamma + delta * (ln R_m(q) - ln R_f(q)) + eps_q

gives (gamma, delta, sigma) with sigma^2 estimated on n-2 degrees of
freedom. Implied quantities:

    E[ln r] = gamma + mu_f + delta * (mu_M - mu_f)
    V[ln r] = delta^2 * var_M + sigma^2
    E[R]    = exp(E[ln r] + V[ln r]/2) - 1
    V[R]    = (exp(V[ln r]) - 1) * (E[R] + 1)^2

with market moments taken over the same estimation quarters. Annualization
multiplies quarterly means/variances by four and scales to percent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .marketdata import MarketMoments, Quarter, market_moments
from .returns import QuarterlySectorSeries
from .stats import student_t_two_sided_p


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class LogModelFit:
    sector: str
    gamma: float
    delta: float
    sigma: float
    se_gamma: float
    se_delta: float
    cov_gamma_delta: float
    n_obs: int
    quarters: tuple[Quarter, ...]

    @property
    def p_gamma(self) -> float:
        return student_t_two_sided_p(self.gamma / self.se_gamma, self.n_obs - 2)

    @property
    def p_delta(self) -> float:
        return student_t_two_sided_p(self.delta / self.se_delta, self.n_obs - 2)


@dataclass(frozen=True)
class ImpliedPerformance:
    sector: str
    e_ln_r: float   # per quarter
    v_ln_r: float
    e_R: float
    v_R: float
    alpha_net: float
    alpha_gross: float
    beta: float
    se_e_ln_r: float
    se_e_R: float

    @property
    def e_ln_r_annual_pct(self) -> float:
        return annualize(self.e_ln_r, "log_mean")

    @property
    def e_R_annual_pct(self) -> float:
        return annualize(self.e_R, "rate")

    @property
    def se_e_ln_r_annual_pct(self) -> float:
        return annualize(self.se_e_ln_r, "log_mean")

    @property
    def se_e_R_annual_pct(self) -> float:
        return annualize(self.se_e_R, "rate")


def ols_with_intercept(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float, float, float, float]:
    """Classical simple OLS: (intercept, slope, sigma, se_a, se_b, cov_ab)."""
    n = len(x)
    if n < 3:
        raise FitError(f"need at least 3 observations, got {n}")
    x_bar = sum(x) / n
    y_bar = sum(y) / n
    sxx = sum((xi - x_bar) ** 2 for xi in x)
    if sxx == 0:
        raise FitError("regressor has no variation")
    sxy = sum((xi - x_bar) * (yi - y_bar) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar
    ssr = sum((yi - intercept - slope * xi) ** 2 for xi, yi in zip(x, y))
    sigma2 = ssr / (n - 2)
    sigma = math.sqrt(sigma2)
    se_b = math.sqrt(sigma2 / sxx)
    se_a = math.sqrt(sigma2 * (1.0 / n + x_bar**2 / sxx))
    cov_ab = -x_bar * sigma2 / sxx
    return intercept, slope, sigma, se_a, se_b, cov_ab


def fit_log_model(
    series: QuarterlySectorSeries,
    ln_rm: Mapping[Quarter, float],
    ln_rf: Mapping[Quarter, float],
    min_quarters: int = 3,
) -> tuple[Optional[LogModelFit], Optional[MarketMoments], dict]:
    """Fit one sector; returns (fit, moments, report).

    Sectors with fewer aligned quarters than min_quarters are skipped with a
    report entry instead of an estimate, as are quarters whose mean return
    is a total loss (log undefined).
    """
    aligned = sorted(q for q in series.mean_rq if q in ln_rm and q in ln_rf)
    dropped_total_loss = [q for q in aligned if 1.0 + series.mean_rq[q] <= 0.0]
    usable = [q for q in aligned if 1.0 + series.mean_rq[q] > 0.0]
    report = {
        "sector": series.sector,
        "aligned_quarters": len(aligned),
        "dropped_total_loss_quarters": len(dropped_total_loss),
    }
    if len(usable) < max(min_quarters, 3):
        report["skipped"] = f"only {len(usable)} usable quarters (< {max(min_quarters, 3)})"
        return None, None, report
    y = [math.log1p(series.mean_rq[q]) - ln_rf[q] for q in usable]
    x = [ln_rm[q] - ln_rf[q] for q in usable]
    try:
        gamma, delta, sigma, se_g, se_d, cov_gd = ols_with_intercept(x, y)
    except FitError as err:
        report["skipped"] = str(err)
        return None, None, report
    fit = LogModelFit(
        sector=series.sector,
        gamma=gamma,
        delta=delta,
        sigma=sigma,
        se_gamma=se_g,
        se_delta=se_d,
        cov_gamma_delta=cov_gd,
        n_obs=len(usable),
        quarters=tuple(usable),
    )
    moments = market_moments([ln_rm[q] for q in usable], [ln_rf[q] for q in usable])
    return fit, moments, report


def expected_log_return(fit: LogModelFit, mm: MarketMoments) -> float:
    return fit.gamma + mm.mu_ln_rf + fit.delta * (mm.mu_ln_rm - mm.mu_ln_rf)


def log_return_variance(fit: LogModelFit, mm: MarketMoments) -> float:
    return fit.delta**2 * mm.var_ln_rm + fit.sigma**2


def arithmetic_moments(e_ln_r: float, v_ln_r: float) -> tuple[float, float]:
    """Lognormal mean/variance of the gross return, net of one."""
    e_R = math.exp(e_ln_r + 0.5 * v_ln_r) - 1.0
    v_R = math.expm1(v_ln_r) * (e_R + 1.0) ** 2
    return e_R, v_R


def implied_alpha_beta(fit: LogModelFit, mm: MarketMoments) -> tuple[float, float, float]:
    """(alpha_net, alpha_gross, beta) in arithmetic, per-quarter form.

    beta follows the jointly-lognormal covariance identity

        beta = (E[R_s]+1)/(E[R_m]+1) * (exp(delta*var_M) - 1)/(exp(var_M) - 1)

    degrading to beta = delta as var_M -> 0, and alpha is the plain excess
    form e_R - rf - beta * (e_Rm - rf).
    """
    e_ln_r = expected_log_return(fit, mm)
    v_ln_r = log_return_variance(fit, mm)
    e_R, _ = arithmetic_moments(e_ln_r, v_ln_r)
    e_Rm, _ = arithmetic_moments(mm.mu_ln_rm, mm.var_ln_rm)
    rf = math.expm1(mm.mu_ln_rf)
    if mm.var_ln_rm <= 0.0:
        beta = fit.delta
    else:
        gross_ratio = (e_R + 1.0) / (e_Rm + 1.0)
        beta = gross_ratio * math.expm1(fit.delta * mm.var_ln_rm) / math.expm1(mm.var_ln_rm)
    alpha_net = e_R - rf - beta * (e_Rm - rf)
    return alpha_net, 1.0 + alpha_net, beta


def implied_performance(fit: LogModelFit, mm: MarketMoments) -> ImpliedPerformance:
    e_ln_r = expected_log_return(fit, mm)
    v_ln_r = log_return_variance(fit, mm)
    e_R, v_R = arithmetic_moments(e_ln_r, v_ln_r)
    alpha_net, alpha_gross, beta = implied_alpha_beta(fit, mm)
    prem = mm.mu_ln_rm - mm.mu_ln_rf
    # delta-method standard errors from the regression coefficients only
    var_e = fit.se_gamma**2 + prem**2 * fit.se_delta**2 + 2.0 * prem * fit.cov_gamma_delta
    se_e_ln_r = math.sqrt(max(var_e, 0.0))
    se_e_R = math.exp(e_ln_r + 0.5 * v_ln_r) * se_e_ln_r
    return ImpliedPerformance(
        sector=fit.sector,
        e_ln_r=e_ln_r,
        v_ln_r=v_ln_r,
        e_R=e_R,
        v_R=v_R,
        alpha_net=alpha_net,
        alpha_gross=alpha_gross,
        beta=beta,
        se_e_ln_r=se_e_ln_r,
        se_e_R=se_e_R,
    )


def annualize(value: float, kind: str) -> float:
    """Quarterly value to annual percent: multiply by four, then by 100."""
    if kind not in ("log_mean", "variance", "rate"):
        raise ValueError(f"unknown annualization kind {kind!r}")
    return value * 4.0 * 100.0


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""
