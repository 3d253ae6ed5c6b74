//! Aligned price, fundamental, benchmark and risk-free data for a basket of
//! assets, plus the return conversions every other module builds on.
//!
//! Returns are simple (arithmetic) daily returns. Element `t - 1` of a return
//! series holds the return of trading day `t`. The daily risk-free rate is the
//! annualized yield divided by 252.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::calendar::{Date, TradingCalendar};
use crate::TRADING_YEAR;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PanelError {
    #[error("need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: String, expected: usize, got: usize },
    #[error("asset {asset}: non-positive price {value} on {date}")]
    NonPositivePrice { asset: String, date: Date, value: f64 },
    #[error("asset {asset}: non-positive {field} {value} on {date}")]
    NonPositiveFundamental { asset: String, field: FundamentalField, date: Date, value: f64 },
    #[error("benchmark {name}: invalid level {value} on {date}")]
    InvalidBenchmark { name: BenchmarkName, date: Date, value: f64 },
    #[error("{0}: non-finite value")]
    NonFinite(String),
    #[error("panel needs at least 2 assets, got {0}")]
    TooFewAssets(usize),
    #[error("duplicate asset id {0}")]
    DuplicateAsset(String),
}

/// Daily close prices for one asset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    pub asset_id: String,
    pub values: Vec<f64>,
}

/// Daily simple returns for one asset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub asset_id: String,
    pub values: Vec<f64>,
}

pub fn to_returns(prices: &PriceSeries) -> Result<ReturnSeries, PanelError> {
    if prices.values.len() < 2 {
        return Err(PanelError::TooShort { need: 2, got: prices.values.len() });
    }
    Ok(ReturnSeries {
        asset_id: prices.asset_id.clone(),
        values: simple_returns(&prices.values),
    })
}

pub(crate) fn simple_returns(levels: &[f64]) -> Vec<f64> {
    levels.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Subtract the contemporaneous daily risk-free rate (`annual / 252`).
pub fn excess_returns(returns: &ReturnSeries, annual_yield: &[f64]) -> Result<ReturnSeries, PanelError> {
    if annual_yield.len() != returns.values.len() {
        return Err(PanelError::LengthMismatch {
            what: String::from("risk-free series"),
            expected: returns.values.len(),
            got: annual_yield.len(),
        });
    }
    Ok(ReturnSeries {
        asset_id: returns.asset_id.clone(),
        values: returns
            .values
            .iter()
            .zip(annual_yield)
            .map(|(r, y)| r - y / TRADING_YEAR as f64)
            .collect(),
    })
}

/// Price path obtained by compounding `returns` from `first`.
pub fn compound(first: f64, returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(first);
    let mut level = first;
    for r in returns {
        level *= 1.0 + r;
        out.push(level);
    }
    out
}

/// Limits for repairing missing prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingPolicy {
    /// Longest run of consecutive missing days that is forward-filled.
    pub max_run: usize,
    /// Largest missing share tolerated in the window.
    pub max_missing_fraction: f64,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        Self { max_run: 3, max_missing_fraction: 0.05 }
    }
}

/// Why a raw series could not be repaired.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapRejection {
    #[error("{missing} of {total} values missing (more than {max_pct}%)")]
    TooManyMissing { missing: usize, total: usize, max_pct: f64 },
    #[error("{len} consecutive missing values starting at position {start}")]
    RunTooLong { start: usize, len: usize },
    #[error("no value on the first day")]
    LeadingGap,
}

/// Forward-fill short gaps; returns the repaired series and the count of filled days.
pub fn fill_gaps(raw: &[Option<f64>], policy: MissingPolicy) -> Result<(Vec<f64>, usize), GapRejection> {
    let missing = raw.iter().filter(|v| v.is_none()).count();
    if !raw.is_empty() && missing as f64 > policy.max_missing_fraction * raw.len() as f64 {
        return Err(GapRejection::TooManyMissing {
            missing,
            total: raw.len(),
            max_pct: policy.max_missing_fraction * 100.0,
        });
    }
    let mut out = Vec::with_capacity(raw.len());
    let mut run_start = 0;
    let mut run = 0;
    for (i, v) in raw.iter().enumerate() {
        match v {
            Some(v) => {
                run = 0;
                out.push(*v);
            }
            None => {
                let Some(&last) = out.last() else {
                    return Err(GapRejection::LeadingGap);
                };
                if run == 0 {
                    run_start = i;
                }
                run += 1;
                if run > policy.max_run {
                    let len = raw[run_start..].iter().take_while(|v| v.is_none()).count();
                    return Err(GapRejection::RunTooLong { start: run_start, len });
                }
                out.push(last);
            }
        }
    }
    Ok((out, missing))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FundamentalField {
    Cap,
    Mtb,
    Ev,
    DivYield,
    Ebitda,
}

impl FundamentalField {
    pub const ALL: [FundamentalField; 5] = [Self::Cap, Self::Mtb, Self::Ev, Self::DivYield, Self::Ebitda];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cap => "cap",
            Self::Mtb => "mtb",
            Self::Ev => "ev",
            Self::DivYield => "div_yield",
            Self::Ebitda => "ebitda",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FundamentalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Point-in-time view of a sparsely reported fundamental: each day carries
/// the latest report on or before it, flagged stale when not reported that day.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FundamentalSeries {
    values: Vec<Option<f64>>,
    stale: Vec<bool>,
}

impl FundamentalSeries {
    pub fn from_reports(reports: &[Option<f64>]) -> Self {
        let mut values = Vec::with_capacity(reports.len());
        let mut stale = Vec::with_capacity(reports.len());
        let mut last = None;
        for r in reports {
            match r {
                Some(v) => {
                    last = Some(*v);
                    stale.push(false);
                }
                None => stale.push(last.is_some()),
            }
            values.push(last);
        }
        Self { values, stale }
    }

    pub fn empty(len: usize) -> Self {
        Self::from_reports(&alloc::vec![None; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Latest known value at the close of `day`.
    pub fn at(&self, day: usize) -> Option<f64> {
        self.values.get(day).copied().flatten()
    }

    pub fn is_stale(&self, day: usize) -> bool {
        self.stale.get(day).copied().unwrap_or(false)
    }
}

/// The five fundamental series of one asset.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AssetFundamentals {
    series: [FundamentalSeries; 5],
}

impl AssetFundamentals {
    pub fn empty(len: usize) -> Self {
        Self { series: core::array::from_fn(|_| FundamentalSeries::empty(len)) }
    }

    pub fn set(&mut self, field: FundamentalField, series: FundamentalSeries) {
        self.series[field.index()] = series;
    }

    pub fn get(&self, field: FundamentalField) -> &FundamentalSeries {
        &self.series[field.index()]
    }
}

/// Reserved benchmark names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BenchmarkName {
    Market,
    Oil,
    Vix,
    Y10,
    Value,
    Growth,
    Momentum,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 7] =
        [Self::Market, Self::Oil, Self::Vix, Self::Y10, Self::Value, Self::Growth, Self::Momentum];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Market => "MARKET",
            Self::Oil => "OIL",
            Self::Vix => "VIX",
            Self::Y10 => "Y10",
            Self::Value => "VALUE",
            Self::Growth => "GROWTH",
            Self::Momentum => "MOMENTUM",
        }
    }

    /// Yield series are quoted as levels that may be zero or negative.
    pub fn is_yield(self) -> bool {
        self == Self::Y10
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown benchmark name `{s}`"))
    }
}

/// Benchmark closes on the panel calendar.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BenchmarkSet {
    levels: BTreeMap<BenchmarkName, Vec<f64>>,
}

impl BenchmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: BenchmarkName, levels: Vec<f64>) {
        self.levels.insert(name, levels);
    }

    pub fn levels(&self, name: BenchmarkName) -> Option<&[f64]> {
        self.levels.get(&name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = BenchmarkName> + '_ {
        self.levels.keys().copied()
    }

    /// Daily "return" series: simple returns, or daily changes for a yield.
    pub fn returns(&self, name: BenchmarkName) -> Option<Vec<f64>> {
        let levels = self.levels.get(&name)?;
        Some(if name.is_yield() {
            levels.windows(2).map(|w| w[1] - w[0]).collect()
        } else {
            simple_returns(levels)
        })
    }
}

/// Immutable, aligned panel of `N >= 2` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    calendar: TradingCalendar,
    prices: Vec<PriceSeries>,
    fundamentals: Vec<AssetFundamentals>,
    benchmarks: BenchmarkSet,
    riskfree: Vec<f64>,
    returns: Vec<Vec<f64>>,
    excess: Vec<Vec<f64>>,
    diagnostics: Vec<String>,
}

impl PanelData {
    /// Validate alignment and cache the return series. `fundamentals` may be
    /// empty (no fundamentals) or hold one entry per asset.
    pub fn new(
        calendar: TradingCalendar,
        prices: Vec<PriceSeries>,
        fundamentals: Vec<AssetFundamentals>,
        benchmarks: BenchmarkSet,
        riskfree: Vec<f64>,
    ) -> Result<Self, PanelError> {
        let t = calendar.len();
        if t < 2 {
            return Err(PanelError::TooShort { need: 2, got: t });
        }
        if prices.len() < 2 {
            return Err(PanelError::TooFewAssets(prices.len()));
        }
        let check_len = |what: String, got: usize| {
            if got == t {
                Ok(())
            } else {
                Err(PanelError::LengthMismatch { what, expected: t, got })
            }
        };
        let mut seen = BTreeMap::new();
        for p in &prices {
            if seen.insert(p.asset_id.as_str(), ()).is_some() {
                return Err(PanelError::DuplicateAsset(p.asset_id.clone()));
            }
            check_len(alloc::format!("prices of {}", p.asset_id), p.values.len())?;
            if let Some((day, &value)) = p.values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
                return Err(PanelError::NonPositivePrice {
                    asset: p.asset_id.clone(),
                    date: calendar.date(day),
                    value,
                });
            }
        }
        let fundamentals = if fundamentals.is_empty() {
            (0..prices.len()).map(|_| AssetFundamentals::empty(t)).collect()
        } else {
            fundamentals
        };
        if fundamentals.len() != prices.len() {
            return Err(PanelError::LengthMismatch {
                what: String::from("fundamentals asset count"),
                expected: prices.len(),
                got: fundamentals.len(),
            });
        }
        for (p, f) in prices.iter().zip(&fundamentals) {
            for field in FundamentalField::ALL {
                let s = f.get(field);
                check_len(alloc::format!("{field} of {}", p.asset_id), s.len())?;
                for day in 0..t {
                    let Some(v) = s.at(day) else { continue };
                    if !v.is_finite() {
                        return Err(PanelError::NonFinite(alloc::format!("{field} of {}", p.asset_id)));
                    }
                    if matches!(field, FundamentalField::Cap | FundamentalField::Ev) && v <= 0.0 {
                        return Err(PanelError::NonPositiveFundamental {
                            asset: p.asset_id.clone(),
                            field,
                            date: calendar.date(day),
                            value: v,
                        });
                    }
                }
            }
        }
        for name in benchmarks.names() {
            let levels = benchmarks.levels(name).unwrap_or_default();
            check_len(alloc::format!("benchmark {name}"), levels.len())?;
            if let Some((day, &value)) = levels
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || (!name.is_yield() && **v <= 0.0))
            {
                return Err(PanelError::InvalidBenchmark { name, date: calendar.date(day), value });
            }
        }
        check_len(String::from("risk-free series"), riskfree.len())?;
        if riskfree.iter().any(|v| !v.is_finite()) {
            return Err(PanelError::NonFinite(String::from("risk-free series")));
        }

        let returns: Vec<Vec<f64>> = prices.iter().map(|p| simple_returns(&p.values)).collect();
        let rf_daily: Vec<f64> = riskfree[1..].iter().map(|y| y / TRADING_YEAR as f64).collect();
        let excess = returns
            .iter()
            .map(|r| r.iter().zip(&rf_daily).map(|(a, b)| a - b).collect())
            .collect();
        Ok(Self {
            calendar,
            prices,
            fundamentals,
            benchmarks,
            riskfree,
            returns,
            excess,
            diagnostics: Vec::new(),
        })
    }

    pub fn with_diagnostics(mut self, diagnostics: Vec<String>) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    /// Number of trading days.
    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    pub fn asset_id(&self, asset: usize) -> &str {
        &self.prices[asset].asset_id
    }

    pub fn asset_ids(&self) -> impl Iterator<Item = &str> {
        self.prices.iter().map(|p| p.asset_id.as_str())
    }

    pub fn prices(&self) -> &[PriceSeries] {
        &self.prices
    }

    pub fn fundamentals(&self, asset: usize) -> &AssetFundamentals {
        &self.fundamentals[asset]
    }

    pub fn benchmarks(&self) -> &BenchmarkSet {
        &self.benchmarks
    }

    /// Annualized risk-free yield per trading day.
    pub fn riskfree(&self) -> &[f64] {
        &self.riskfree
    }

    /// Daily risk-free rate earned on return day `t`.
    pub fn rf_daily(&self, day: usize) -> f64 {
        self.riskfree[day] / TRADING_YEAR as f64
    }

    /// Simple returns of one asset (length `n_days - 1`).
    pub fn returns(&self, asset: usize) -> &[f64] {
        &self.returns[asset]
    }

    /// Returns net of the daily risk-free rate.
    pub fn excess_returns(&self, asset: usize) -> &[f64] {
        &self.excess[asset]
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }
}
