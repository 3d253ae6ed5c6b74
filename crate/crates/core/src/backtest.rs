//! Monthly rebalance loop, equity curves and performance metrics.
//!
//! At every rebalance day the fields are measured on the second previous
//! year and on the previous year (252 trading days each), the regression is
//! fitted across the lag and applied to the latest fields, the frontier is
//! solved on the previous year, and the weights are then held (drifting with
//! prices) until the next rebalance.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::allocation::{self, AdaptiveState, FrontierConfig, Strategy, WeightVector};
use crate::calendar::{Date, DayRange, TradingCalendar};
use crate::fields::{FieldEngine, FieldId, FieldSpec};
use crate::linalg;
use crate::panel::PanelData;
use crate::regression::{self, RegressionModel};
use crate::TRADING_YEAR;

/// Trading days of history needed before the first rebalance.
pub const LOOKBACK: usize = 2 * TRADING_YEAR;

/// Periods per year for annualization.
pub const PERIODS_PER_YEAR: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FailureKind {
    /// Input data cannot support the computation.
    Data,
    /// A numerical routine failed without a fallback.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacktestError {
    #[error("empty or inverted backtest range")]
    EmptyRange,
    #[error("first rebalance on {date} has {available} days of history (need {LOOKBACK})")]
    InsufficientHistory { date: Date, available: usize },
    #[error("rebalance on {date} reads data on or after the rebalance day")]
    LookAhead { date: Date },
    #[error("{module} failed on {date}: {message}")]
    Step { module: &'static str, date: Date, kind: FailureKind, message: String },
    #[error("period return {0} wipes out the portfolio")]
    Ruin(f64),
    #[error("no strategies requested")]
    NoStrategies,
}

impl BacktestError {
    pub fn kind(&self) -> FailureKind {
        match self {
            Self::Step { kind, .. } => *kind,
            _ => FailureKind::Data,
        }
    }
}

/// One rebalance with the windows that feed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RebalancePeriod {
    pub day: usize,
    pub date: Date,
    /// The 252 trading days before the rebalance.
    pub window_prev: DayRange,
    /// Days -504 .. -253.
    pub window_prev2: DayRange,
    /// Return days held with this allocation.
    pub holding: DayRange,
}

impl RebalancePeriod {
    /// Every input window ends strictly before the rebalance day.
    pub fn inputs_precede_rebalance(&self) -> bool {
        self.window_prev.end <= self.day
            && self.window_prev2.end <= self.window_prev.start
            && self.holding.start == self.day
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RebalanceSchedule {
    periods: Vec<RebalancePeriod>,
}

impl RebalanceSchedule {
    /// Rebalance on the first trading day of each month within `[from, to]`;
    /// the last holding period ends with the last trading day on or before `to`.
    pub fn monthly(calendar: &TradingCalendar, from: Date, to: Date) -> Result<Self, BacktestError> {
        let (Some(first), Some(last)) = (calendar.first_on_or_after(from), calendar.last_on_or_before(to)) else {
            return Err(BacktestError::EmptyRange);
        };
        if from > to || first > last {
            return Err(BacktestError::EmptyRange);
        }
        let days = calendar.month_starts(first.max(1), last);
        Self::from_days(calendar, &days, last + 1)
    }

    /// Schedule from explicit rebalance days; holdings run to `end` (exclusive).
    pub fn from_days(calendar: &TradingCalendar, days: &[usize], end: usize) -> Result<Self, BacktestError> {
        if days.is_empty() || end > calendar.len() || days.windows(2).any(|w| w[0] >= w[1]) || days[days.len() - 1] >= end {
            return Err(BacktestError::EmptyRange);
        }
        if days[0] < LOOKBACK + 1 {
            return Err(BacktestError::InsufficientHistory {
                date: calendar.date(days[0]),
                available: days[0].saturating_sub(1),
            });
        }
        let periods = days
            .iter()
            .enumerate()
            .map(|(k, &day)| RebalancePeriod {
                day,
                date: calendar.date(day),
                window_prev: DayRange::new(day - TRADING_YEAR, day),
                window_prev2: DayRange::new(day - LOOKBACK, day - TRADING_YEAR),
                holding: DayRange::new(day, days.get(k + 1).copied().unwrap_or(end)),
            })
            .collect::<Vec<_>>();
        if let Some(p) = periods.iter().find(|p| !p.inputs_precede_rebalance()) {
            return Err(BacktestError::LookAhead { date: p.date });
        }
        Ok(Self { periods })
    }

    pub fn periods(&self) -> &[RebalancePeriod] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub strategies: Vec<Strategy>,
    /// Regressors of the RC model.
    pub fields: FieldSpec,
    /// Keep the RC* flag off (RC* then reproduces RC).
    pub force_no_flip: bool,
    pub frontier: FrontierConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            fields: FieldSpec::ten_factor(),
            force_no_flip: false,
            frontier: FrontierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierDiagnostics {
    pub converged: bool,
    pub lambda: f64,
    pub bisections: usize,
    pub volatility: f64,
    pub target_volatility: f64,
    pub expected_return: f64,
    /// Expected return of the equal-weight portfolio on the same window.
    pub ew_expected_return: f64,
}

/// Everything decided and realised in one holding period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthRecord {
    pub day: usize,
    pub date: Date,
    /// Buy-and-hold return of each asset over the holding period.
    pub asset_returns: Vec<f64>,
    /// Compounded risk-free return over the holding period.
    pub riskfree_return: f64,
    pub weights: Vec<WeightVector>,
    pub adaptive: Option<AdaptiveState>,
    pub frontier: Option<FrontierDiagnostics>,
    pub model: Option<RegressionModel>,
    pub dropped_assets: Vec<usize>,
    pub dropped_fields: Vec<FieldId>,
}

impl MonthRecord {
    pub fn weights_of(&self, strategy: Strategy) -> Option<&WeightVector> {
        self.weights.iter().find(|w| w.strategy == strategy)
    }
}

/// Compounded value of a strategy sampled at period ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityCurve {
    pub strategy: Strategy,
    /// Rebalance date opening each period.
    pub dates: Vec<Date>,
    pub period_returns: Vec<f64>,
    pub values: Vec<f64>,
}

impl EquityCurve {
    pub fn new(strategy: Strategy, dates: Vec<Date>, period_returns: Vec<f64>) -> Result<Self, BacktestError> {
        let mut values = Vec::with_capacity(period_returns.len());
        let mut v = 1.0;
        for &r in &period_returns {
            if r <= -1.0 || !r.is_finite() {
                return Err(BacktestError::Ruin(r));
            }
            v *= 1.0 + r;
            values.push(v);
        }
        Ok(Self { strategy, dates, period_returns, values })
    }

    pub fn terminal_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.period_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.period_returns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestOutput {
    pub curves: Vec<EquityCurve>,
    pub months: Vec<MonthRecord>,
    /// Equal-weight baseline, always computed.
    pub baseline: EquityCurve,
}

impl BacktestOutput {
    pub fn curve(&self, strategy: Strategy) -> Option<&EquityCurve> {
        self.curves.iter().find(|c| c.strategy == strategy)
    }
}

fn step_error(module: &'static str, date: Date, kind: FailureKind, e: impl ToString) -> BacktestError {
    BacktestError::Step { module, date, kind, message: e.to_string() }
}

fn holding_return(series: &[f64]) -> f64 {
    series.iter().fold(1.0, |v, r| v * (1.0 + r)) - 1.0
}

fn portfolio_return(weights: &[f64], asset_returns: &[f64]) -> f64 {
    weights.iter().zip(asset_returns).map(|(w, g)| w * g).sum()
}

pub fn run_backtest(
    panel: &PanelData,
    schedule: &RebalanceSchedule,
    config: &BacktestConfig,
) -> Result<BacktestOutput, BacktestError> {
    let engine = FieldEngine::new(panel);
    run_backtest_with(&engine, schedule, config)
}

/// Same as [`run_backtest`] with a prebuilt field engine.
pub fn run_backtest_with(
    engine: &FieldEngine<'_>,
    schedule: &RebalanceSchedule,
    config: &BacktestConfig,
) -> Result<BacktestOutput, BacktestError> {
    if config.strategies.is_empty() {
        return Err(BacktestError::NoStrategies);
    }
    let panel = engine.panel();
    let n = panel.n_assets();
    let wants = |s: Strategy| config.strategies.contains(&s);
    let need_rc = wants(Strategy::Rc) || wants(Strategy::RcStar) || wants(Strategy::Mix);
    let need_ef = wants(Strategy::Ef) || wants(Strategy::Mix);
    let universe: Vec<usize> = (0..n).collect();

    let mut months = Vec::with_capacity(schedule.len());
    for period in schedule.periods() {
        if !period.inputs_precede_rebalance() || period.holding.end > panel.n_days() {
            return Err(BacktestError::LookAhead { date: period.date });
        }
        let date = period.date;
        let asset_returns: Vec<f64> = (0..n).map(|a| holding_return(period.holding.slice(panel.returns(a)))).collect();
        let riskfree_return = (period.holding.start..period.holding.end)
            .fold(1.0, |v, t| v * (1.0 + panel.rf_daily(t)))
            - 1.0;

        let ew = allocation::ew_weights(n, &universe).map_err(|e| step_error("allocation", date, FailureKind::Data, e))?;
        let mut weights = Vec::from([WeightVector::new(Strategy::Ew, period.day, ew.clone())]);
        let mut record = MonthRecord {
            day: period.day,
            date,
            asset_returns,
            riskfree_return,
            weights: Vec::new(),
            adaptive: None,
            frontier: None,
            model: None,
            dropped_assets: Vec::new(),
            dropped_fields: Vec::new(),
        };

        let mut rc_weights = None;
        if need_rc {
            let field_err = |e| step_error("explanatory", date, FailureKind::Data, e);
            let lagged = engine.compute_fields(period.window_prev2, &config.fields).map_err(field_err)?;
            let current = engine.compute_fields(period.window_prev, &config.fields).map_err(field_err)?;
            let realized = engine.mean_returns(period.window_prev, lagged.assets()).map_err(field_err)?;
            let model = regression::fit(&lagged, &realized).map_err(|e| {
                let kind = match e {
                    regression::RegressionError::Singular => FailureKind::Numerical,
                    _ => FailureKind::Data,
                };
                step_error("regression", date, kind, e)
            })?;
            let alloc_err = |e| step_error("allocation", date, FailureKind::Data, e);
            let reg_err = |e| step_error("regression", date, FailureKind::Data, e);
            let predictions = regression::predict(&model, &current).map_err(reg_err)?;
            let rc = allocation::rc_select(&predictions, n).map_err(alloc_err)?;
            if wants(Strategy::RcStar) {
                let state = if config.force_no_flip {
                    AdaptiveState { flip: false, trigger: f64::NAN }
                } else {
                    allocation::adaptive_trigger(engine, period.window_prev).map_err(alloc_err)?
                };
                let star = if state.flip {
                    let flipped = regression::flip_coefficients(&model);
                    let p = regression::predict(&flipped, &current).map_err(reg_err)?;
                    allocation::rc_select(&p, n).map_err(alloc_err)?
                } else {
                    rc.clone()
                };
                weights.push(WeightVector::new(Strategy::RcStar, period.day, star));
                record.adaptive = Some(state);
            }
            let mut dropped: Vec<usize> = lagged.dropped.iter().chain(&current.dropped).map(|d| d.asset).collect();
            dropped.sort_unstable();
            dropped.dedup();
            record.dropped_assets = dropped;
            record.dropped_fields = model.dropped_fields.iter().map(|d| d.field).collect();
            record.model = Some(model);
            rc_weights = Some(WeightVector::new(Strategy::Rc, period.day, rc));
        }

        let mut ef_weights = None;
        if need_ef {
            let series: Vec<&[f64]> = (0..n).map(|a| period.window_prev.slice(panel.excess_returns(a))).collect();
            let mu: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
            let cov = linalg::sample_covariance(&series);
            let target = libm::sqrt(cov.quad_form(&ew).max(0.0));
            let frontier = allocation::solve_frontier_with(&mu, &cov, target, config.frontier)
                .map_err(|e| step_error("allocation", date, FailureKind::Numerical, e))?;
            record.frontier = Some(FrontierDiagnostics {
                converged: frontier.converged,
                lambda: frontier.lambda,
                bisections: frontier.bisections,
                volatility: frontier.volatility,
                target_volatility: target,
                expected_return: frontier.expected_return,
                ew_expected_return: portfolio_return(&ew, &mu),
            });
            ef_weights = Some(WeightVector::new(Strategy::Ef, period.day, allocation::ef_select(&frontier)));
        }

        if wants(Strategy::Mix) {
            let (Some(a), Some(b)) = (&ef_weights, &rc_weights) else { unreachable!() };
            weights.push(allocation::mix_weights(a, b).map_err(|e| step_error("allocation", date, FailureKind::Data, e))?);
        }
        weights.extend(ef_weights);
        weights.extend(rc_weights);
        weights.sort_by_key(|w| Strategy::ALL.iter().position(|s| *s == w.strategy));
        record.weights = weights;
        months.push(record);
    }

    let dates: Vec<Date> = months.iter().map(|m| m.date).collect();
    let curve_of = |s: Strategy| {
        let returns = months
            .iter()
            .map(|m| portfolio_return(&m.weights_of(s).expect("weights computed").weights, &m.asset_returns))
            .collect();
        EquityCurve::new(s, dates.clone(), returns)
    };
    let baseline = curve_of(Strategy::Ew)?;
    let curves = Strategy::ALL
        .iter()
        .filter(|s| wants(**s))
        .map(|&s| curve_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    for m in &mut months {
        m.weights.retain(|w| config.strategies.contains(&w.strategy));
    }
    Ok(BacktestOutput { curves, months, baseline })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("need at least {need} periods, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("zero volatility")]
    ZeroVolatility,
    #[error("series are not aligned")]
    Misaligned,
    #[error("no month with a nonempty selection")]
    NoMonths,
}

fn require_year(curve: &EquityCurve) -> Result<(), MetricError> {
    if curve.len() < PERIODS_PER_YEAR {
        return Err(MetricError::TooShort { need: PERIODS_PER_YEAR, got: curve.len() });
    }
    Ok(())
}

/// Geometric annualization: `terminal^(12 / M) - 1`.
pub fn annualized_return(curve: &EquityCurve) -> Result<f64, MetricError> {
    require_year(curve)?;
    Ok(libm::pow(curve.terminal_value(), PERIODS_PER_YEAR as f64 / curve.len() as f64) - 1.0)
}

/// Mean monthly excess return over its sample deviation, times `sqrt(12)`.
pub fn sharpe_ratio(curve: &EquityCurve, riskfree: &[f64]) -> Result<f64, MetricError> {
    require_year(curve)?;
    if riskfree.len() != curve.len() {
        return Err(MetricError::Misaligned);
    }
    let excess: Vec<f64> = curve.period_returns.iter().zip(riskfree).map(|(r, f)| r - f).collect();
    let m = excess.iter().sum::<f64>() / excess.len() as f64;
    let sd = libm::sqrt(excess.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (excess.len() - 1) as f64);
    if crate::stats::is_degenerate(sd, &excess) {
        return Err(MetricError::ZeroVolatility);
    }
    Ok(m / sd * libm::sqrt(PERIODS_PER_YEAR as f64))
}

/// Best and worst compounded return over all 12-period windows.
pub fn max_up_dd(curve: &EquityCurve) -> Result<(f64, f64), MetricError> {
    require_year(curve)?;
    let mut up = f64::NEG_INFINITY;
    let mut dd = f64::INFINITY;
    for w in curve.period_returns.windows(PERIODS_PER_YEAR) {
        let g = holding_return(w);
        up = up.max(g);
        dd = dd.min(g);
    }
    Ok((up, dd))
}

/// Largest peak-to-trough decline of the compounded value (non-positive).
pub fn max_peak_trough_drawdown(curve: &EquityCurve) -> f64 {
    let mut peak = 1.0_f64;
    let mut worst = 0.0_f64;
    for &v in &curve.values {
        peak = peak.max(v);
        worst = worst.min(v / peak - 1.0);
    }
    worst
}

/// Periods in which `curve` strictly beats `baseline`.
pub fn months_plus(curve: &EquityCurve, baseline: &EquityCurve) -> Result<usize, MetricError> {
    if curve.len() != baseline.len() || curve.dates != baseline.dates {
        return Err(MetricError::Misaligned);
    }
    Ok(curve
        .period_returns
        .iter()
        .zip(&baseline.period_returns)
        .filter(|(a, b)| a > b)
        .count())
}

/// `P[X < k]` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf_below(n: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let ln_n = libm::lgamma(n as f64 + 1.0);
    let total: f64 = (0..k)
        .map(|j| {
            let ln_choose = ln_n - libm::lgamma(j as f64 + 1.0) - libm::lgamma((n - j) as f64 + 1.0);
            libm::exp(ln_choose + j as f64 * lp + (n - j) as f64 * lq)
        })
        .sum();
    total.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fidelity {
    pub value: f64,
    pub months_scored: usize,
    pub months_skipped: usize,
}

/// Mean over months of `P[Binomial(n, m / N) < k]`, where `n` is the number
/// of selected assets, `m` the number of assets beating the basket mean, and
/// `k` the selected assets among them. Months without a selection are skipped.
pub fn fidelity(selections: &[Vec<usize>], realized: &[Vec<f64>]) -> Result<Fidelity, MetricError> {
    if selections.len() != realized.len() {
        return Err(MetricError::Misaligned);
    }
    let mut sum = 0.0;
    let mut scored = 0;
    for (sel, returns) in selections.iter().zip(realized) {
        if sel.is_empty() || returns.is_empty() {
            continue;
        }
        let basket = returns.len();
        let mean = returns.iter().sum::<f64>() / basket as f64;
        let winners = returns.iter().filter(|r| **r > mean).count();
        let p = winners as f64 / basket as f64;
        let hits = sel.iter().filter(|&&i| returns.get(i).is_some_and(|r| *r > mean)).count();
        sum += binomial_cdf_below(sel.len(), p, hits);
        scored += 1;
    }
    if scored == 0 {
        return Err(MetricError::NoMonths);
    }
    Ok(Fidelity { value: sum / scored as f64, months_scored: scored, months_skipped: selections.len() - scored })
}

/// One row of the performance table; `None` marks an undefined metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub strategy: Strategy,
    pub months: usize,
    pub terminal_value: f64,
    pub annualized_return: Option<f64>,
    pub sharpe: Option<f64>,
    pub max_up: Option<f64>,
    pub max_dd: Option<f64>,
    pub months_plus: Option<usize>,
    pub fidelity: Option<f64>,
    /// Peak-to-trough drawdown of the compounded curve, reported for reference.
    pub max_peak_trough_dd: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
    pub fidelity_null: &'static str,
}

impl BacktestReport {
    pub fn from_output(output: &BacktestOutput) -> Self {
        let riskfree: Vec<f64> = output.months.iter().map(|m| m.riskfree_return).collect();
        let realized: Vec<Vec<f64>> = output.months.iter().map(|m| m.asset_returns.clone()).collect();
        let rows = output
            .curves
            .iter()
            .map(|curve| {
                let mut notes = Vec::new();
                let mut keep = |r: Result<f64, MetricError>, what: &str| match r {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(alloc::format!("{what} undefined: {e}"));
                        None
                    }
                };
                let annualized_return = keep(annualized_return(curve), "return");
                let sharpe = keep(sharpe_ratio(curve, &riskfree), "sharpe");
                let (max_up, max_dd) = match max_up_dd(curve) {
                    Ok((u, d)) => (Some(u), Some(d)),
                    Err(e) => {
                        notes.push(alloc::format!("max up/dd undefined: {e}"));
                        (None, None)
                    }
                };
                let months_plus = (curve.strategy != Strategy::Ew)
                    .then(|| months_plus(curve, &output.baseline).ok())
                    .flatten();
                let fidelity = if curve.strategy.has_fidelity() {
                    let selections: Vec<Vec<usize>> = output
                        .months
                        .iter()
                        .map(|m| m.weights_of(curve.strategy).map(WeightVector::support).unwrap_or_default())
                        .collect();
                    match fidelity(&selections, &realized) {
                        Ok(f) => {
                            if f.months_skipped > 0 {
                                notes.push(alloc::format!("fidelity skipped {} empty months", f.months_skipped));
                            }
                            Some(f.value)
                        }
                        Err(e) => {
                            notes.push(alloc::format!("fidelity undefined: {e}"));
                            None
                        }
                    }
                } else {
                    None
                };
                ReportRow {
                    strategy: curve.strategy,
                    months: curve.len(),
                    terminal_value: curve.terminal_value(),
                    annualized_return,
                    sharpe,
                    max_up,
                    max_dd,
                    months_plus,
                    fidelity,
                    max_peak_trough_dd: max_peak_trough_drawdown(curve),
                    notes,
                }
            })
            .collect();
        Self {
            rows,
            fidelity_null: "binomial with p = (assets beating the basket mean) / N; selections are drawn without replacement, so this is an approximation of the hypergeometric null",
        }
    }
}
