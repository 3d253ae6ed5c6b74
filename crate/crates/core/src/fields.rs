//! Per-asset explanatory fields over a window, and the cross-sectional
//! study correlating them with contemporary and following-window returns.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::calendar::DayRange;
use crate::factors::{self, FactorIndex, FactorName};
use crate::panel::{BenchmarkName, PanelData};
use crate::stats::{self, CorrelationEstimate, StatError};

/// Shortest window on which fields are computed.
pub const MIN_FIELD_WINDOW: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("window of {0} days is shorter than {MIN_FIELD_WINDOW}")]
    WindowTooShort(usize),
    #[error("window {start}..{end} does not fit in a panel of {days} days")]
    WindowOutOfRange { start: usize, end: usize, days: usize },
    #[error("benchmark {0} is not available: {1}")]
    BenchmarkMissing(Benchmark, String),
    #[error("benchmark {0} is constant on the window")]
    DegenerateBenchmark(Benchmark),
    #[error("lagged window must start where the contemporary window ends ({0} != {1})")]
    WindowsNotAdjacent(usize, usize),
    #[error("only {0} assets retained (need at least 4)")]
    TooFewAssets(usize),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field spec: {0}")]
    InvalidSpec(String),
}

/// Reference series for correlations and betas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Benchmark {
    Market,
    Vix,
    Oil,
    Y10,
    Momentum,
    Growth,
    Value,
    DivYield,
    Ev,
    Mtb,
    EvEbitda,
}

impl Benchmark {
    pub const ALL: [Benchmark; 11] = [
        Self::Market,
        Self::Vix,
        Self::Oil,
        Self::Y10,
        Self::Momentum,
        Self::Growth,
        Self::Value,
        Self::DivYield,
        Self::Ev,
        Self::Mtb,
        Self::EvEbitda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Market => "MARKET",
            Self::Vix => "VIX",
            Self::Oil => "OIL",
            Self::Y10 => "Y10",
            Self::Momentum => "MOMENTUM",
            Self::Growth => "GROWTH",
            Self::Value => "VALUE",
            Self::DivYield => "DIVYIELD",
            Self::Ev => "EV",
            Self::Mtb => "MTB",
            Self::EvEbitda => "EVEBITDA",
        }
    }

    fn source(self) -> Result<BenchmarkName, FactorName> {
        match self {
            Self::Market => Ok(BenchmarkName::Market),
            Self::Vix => Ok(BenchmarkName::Vix),
            Self::Oil => Ok(BenchmarkName::Oil),
            Self::Y10 => Ok(BenchmarkName::Y10),
            Self::Momentum => Ok(BenchmarkName::Momentum),
            Self::Growth => Ok(BenchmarkName::Growth),
            Self::Value => Ok(BenchmarkName::Value),
            Self::DivYield => Err(FactorName::DivYield),
            Self::Ev => Err(FactorName::Ev),
            Self::Mtb => Err(FactorName::Mtb),
            Self::EvEbitda => Err(FactorName::EvEbitda),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| FieldError::UnknownField(s.to_string()))
    }
}

/// One explanatory field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldId {
    Sharpe,
    Mean,
    Skew,
    SkewStar,
    /// Beta against the equal-weighted basket return.
    RhoPairs,
    Sigma,
    Rho(Benchmark),
    Beta(Benchmark),
}

impl FieldId {
    fn benchmark(self) -> Option<Benchmark> {
        match self {
            Self::Rho(b) | Self::Beta(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sharpe => f.write_str("SHARPE"),
            Self::Mean => f.write_str("MEAN"),
            Self::Skew => f.write_str("SKEW"),
            Self::SkewStar => f.write_str("SKEW_STAR"),
            Self::RhoPairs => f.write_str("RHO_PAIRS"),
            Self::Sigma => f.write_str("SIGMA"),
            Self::Rho(b) => write!(f, "RHO_{b}"),
            Self::Beta(b) => write!(f, "BETA_{b}"),
        }
    }
}

impl FromStr for FieldId {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s {
            "SHARPE" => Self::Sharpe,
            "MEAN" => Self::Mean,
            "SKEW" => Self::Skew,
            "SKEW_STAR" => Self::SkewStar,
            "RHO_PAIRS" => Self::RhoPairs,
            "SIGMA" => Self::Sigma,
            _ => {
                if let Some(b) = s.strip_prefix("RHO_") {
                    Self::Rho(b.parse().map_err(|_| FieldError::UnknownField(s.to_string()))?)
                } else if let Some(b) = s.strip_prefix("BETA_") {
                    Self::Beta(b.parse().map_err(|_| FieldError::UnknownField(s.to_string()))?)
                } else {
                    return Err(FieldError::UnknownField(s.to_string()));
                }
            }
        })
    }
}

impl Serialize for FieldId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Serialize for Benchmark {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Ordered, duplicate-free, nonempty list of fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSpec(Vec<FieldId>);

impl FieldSpec {
    pub fn new(fields: Vec<FieldId>) -> Result<Self, FieldError> {
        if fields.is_empty() {
            return Err(FieldError::InvalidSpec(String::from("empty")));
        }
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].contains(f) {
                return Err(FieldError::InvalidSpec(alloc::format!("duplicate field {f}")));
            }
        }
        Ok(Self(fields))
    }

    /// Comma-separated identifiers, e.g. `SIGMA,BETA_MARKET`.
    pub fn parse(list: &str) -> Result<Self, FieldError> {
        Self::new(list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?)
    }

    /// The ten regressors of the RC strategy.
    pub fn ten_factor() -> Self {
        use Benchmark::*;
        Self(Vec::from([
            FieldId::SkewStar,
            FieldId::Sigma,
            FieldId::Beta(Market),
            FieldId::Beta(Momentum),
            FieldId::Beta(Growth),
            FieldId::Beta(Y10),
            FieldId::Beta(Vix),
            FieldId::Beta(DivYield),
            FieldId::Beta(Ev),
            FieldId::Beta(Mtb),
        ]))
    }

    /// Every field; benchmark fields only for the given benchmarks.
    pub fn all_for(benchmarks: &[Benchmark]) -> Self {
        let mut fields = Vec::from([
            FieldId::Sharpe,
            FieldId::Mean,
            FieldId::Skew,
            FieldId::SkewStar,
            FieldId::RhoPairs,
            FieldId::Sigma,
        ]);
        fields.extend(benchmarks.iter().map(|&b| FieldId::Rho(b)));
        fields.extend(benchmarks.iter().map(|&b| FieldId::Beta(b)));
        Self(fields)
    }

    pub fn fields(&self) -> &[FieldId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An asset left out of a cross-section and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedAsset {
    pub asset: usize,
    pub field: FieldId,
    pub reason: String,
}

/// A field left out of a study or regression and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedField {
    pub field: FieldId,
    pub reason: String,
}

/// Field values of the retained assets on one window (row-major).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMatrix {
    pub window: DayRange,
    fields: Vec<FieldId>,
    assets: Vec<usize>,
    values: Vec<f64>,
    pub dropped: Vec<DroppedAsset>,
}

impl FieldMatrix {
    /// Returns `None` when the shapes disagree or a value is non-finite.
    pub fn from_parts(window: DayRange, fields: Vec<FieldId>, assets: Vec<usize>, values: Vec<f64>) -> Option<Self> {
        (values.len() == fields.len() * assets.len() && values.iter().all(|v| v.is_finite())).then_some(Self {
            window,
            fields,
            assets,
            values,
            dropped: Vec::new(),
        })
    }

    pub fn fields(&self) -> &[FieldId] {
        &self.fields
    }

    /// Panel indices of the retained assets, ascending.
    pub fn assets(&self) -> &[usize] {
        &self.assets
    }

    pub fn n_rows(&self) -> usize {
        self.assets.len()
    }

    pub fn n_cols(&self) -> usize {
        self.fields.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.fields.len()..(r + 1) * self.fields.len()]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.fields.len() + c]
    }

    pub fn column_index(&self, field: FieldId) -> Option<usize> {
        self.fields.iter().position(|f| *f == field)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn row_of(&self, asset: usize) -> Option<usize> {
        self.assets.binary_search(&asset).ok()
    }
}

/// Per-asset scalar (mean return, prediction, ...), assets ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub assets: Vec<usize>,
    pub values: Vec<f64>,
}

impl CrossSection {
    pub fn get(&self, asset: usize) -> Option<f64> {
        self.assets.binary_search(&asset).ok().map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }
}

/// One row of a correlation study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub field: FieldId,
    pub contemporary: CorrelationEstimate,
    pub lagged: CorrelationEstimate,
}

/// Cross-sectional correlations of field values with mean excess returns on
/// the same window and on the following one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub window_a: DayRange,
    pub window_b: DayRange,
    pub rows: Vec<StudyRow>,
    pub dropped_fields: Vec<DroppedField>,
    pub dropped_assets: Vec<DroppedAsset>,
}

/// Benchmark and factor return series of a panel, ready for field computation.
///
/// The market benchmark is converted to excess returns; the 10-year yield
/// enters as daily yield changes; the fundamental factors are rebuilt on the
/// monthly schedule.
#[derive(Debug, Clone)]
pub struct FieldEngine<'a> {
    panel: &'a PanelData,
    series: BTreeMap<Benchmark, (usize, Vec<f64>)>,
    unavailable: BTreeMap<Benchmark, String>,
    factors: Vec<FactorIndex>,
    basket: Vec<f64>,
}

impl<'a> FieldEngine<'a> {
    pub fn new(panel: &'a PanelData) -> Self {
        let mut series = BTreeMap::new();
        let mut unavailable = BTreeMap::new();
        let mut factors = Vec::new();
        let schedule = factors::monthly_schedule(panel);
        for b in Benchmark::ALL {
            match b.source() {
                Ok(name) => match panel.benchmarks().returns(name) {
                    Some(mut r) => {
                        if name == BenchmarkName::Market {
                            for (t, v) in r.iter_mut().enumerate() {
                                *v -= panel.rf_daily(t + 1);
                            }
                        }
                        series.insert(b, (1, r));
                    }
                    None => {
                        unavailable.insert(b, String::from("not in benchmark set"));
                    }
                },
                Err(factor) => match factors::build_factor_index(panel, factor, &schedule) {
                    Ok(f) => {
                        series.insert(b, (f.first_day(), f.returns.clone()));
                        factors.push(f);
                    }
                    Err(e) => {
                        unavailable.insert(b, e.to_string());
                    }
                },
            }
        }
        let n = panel.n_assets() as f64;
        let basket = (0..panel.n_days() - 1)
            .map(|t| (0..panel.n_assets()).map(|a| panel.excess_returns(a)[t]).sum::<f64>() / n)
            .collect();
        Self { panel, series, unavailable, factors, basket }
    }

    pub fn panel(&self) -> &'a PanelData {
        self.panel
    }

    pub fn available_benchmarks(&self) -> Vec<Benchmark> {
        self.series.keys().copied().collect()
    }

    pub fn unavailable_benchmarks(&self) -> &BTreeMap<Benchmark, String> {
        &self.unavailable
    }

    pub fn factor_indexes(&self) -> &[FactorIndex] {
        &self.factors
    }

    /// Return series of a benchmark (element `t - 1` is day `t`).
    pub fn benchmark_returns(&self, b: Benchmark) -> Option<&[f64]> {
        self.series.get(&b).map(|(_, s)| s.as_slice())
    }

    /// Equal-weighted basket excess return.
    pub fn basket_returns(&self) -> &[f64] {
        &self.basket
    }

    fn check_window(&self, window: DayRange) -> Result<(), FieldError> {
        let days = self.panel.n_days();
        if window.start == 0 || window.end > days || window.start > window.end {
            return Err(FieldError::WindowOutOfRange { start: window.start, end: window.end, days });
        }
        if window.len() < MIN_FIELD_WINDOW {
            return Err(FieldError::WindowTooShort(window.len()));
        }
        Ok(())
    }

    fn benchmark_window(&self, b: Benchmark, window: DayRange) -> Result<&[f64], FieldError> {
        let Some((first, s)) = self.series.get(&b) else {
            let why = self.unavailable.get(&b).cloned().unwrap_or_default();
            return Err(FieldError::BenchmarkMissing(b, why));
        };
        if window.start < *first {
            return Err(FieldError::BenchmarkMissing(b, alloc::format!("factor starts on day {first}")));
        }
        let w = window.slice(s);
        match stats::volatility(w) {
            Ok(sd) if !stats::is_degenerate(sd, w) => Ok(w),
            _ => Err(FieldError::DegenerateBenchmark(b)),
        }
    }

    fn field_value(&self, field: FieldId, x: &[f64], window: DayRange, bench: &BTreeMap<Benchmark, &[f64]>) -> Result<f64, StatError> {
        match field {
            FieldId::Sharpe => stats::sharpe(x),
            FieldId::Mean => stats::mean(x),
            FieldId::Skew => stats::skewness(x),
            FieldId::SkewStar => stats::revised_skewness(x),
            FieldId::Sigma => {
                let sd = stats::volatility(x)?;
                if stats::is_degenerate(sd, x) {
                    Err(StatError::ZeroVolatility)
                } else {
                    Ok(sd)
                }
            }
            FieldId::RhoPairs => stats::beta(x, window.slice(&self.basket)),
            FieldId::Rho(b) => stats::correlation(x, bench[&b]),
            FieldId::Beta(b) => stats::beta(x, bench[&b]),
        }
    }

    /// One row per asset whose fields are all defined on `window`.
    pub fn compute_fields(&self, window: DayRange, spec: &FieldSpec) -> Result<FieldMatrix, FieldError> {
        self.check_window(window)?;
        let mut bench = BTreeMap::new();
        for b in spec.fields().iter().filter_map(|f| f.benchmark()) {
            bench.insert(b, self.benchmark_window(b, window)?);
        }
        let p = spec.len();
        let mut assets = Vec::new();
        let mut values = Vec::with_capacity(self.panel.n_assets() * p);
        let mut dropped = Vec::new();
        let mut row = Vec::with_capacity(p);
        'assets: for a in 0..self.panel.n_assets() {
            let x = window.slice(self.panel.excess_returns(a));
            row.clear();
            for &field in spec.fields() {
                match self.field_value(field, x, window, &bench) {
                    Ok(v) if v.is_finite() => row.push(v),
                    Ok(_) => {
                        dropped.push(DroppedAsset { asset: a, field, reason: String::from("non-finite value") });
                        continue 'assets;
                    }
                    Err(e) => {
                        dropped.push(DroppedAsset { asset: a, field, reason: e.to_string() });
                        continue 'assets;
                    }
                }
            }
            assets.push(a);
            values.extend_from_slice(&row);
        }
        Ok(FieldMatrix { window, fields: spec.fields().to_vec(), assets, values, dropped })
    }

    /// Mean excess return of each listed asset over `window`.
    pub fn mean_returns(&self, window: DayRange, assets: &[usize]) -> Result<CrossSection, FieldError> {
        let days = self.panel.n_days();
        if window.start == 0 || window.end > days || window.is_empty() {
            return Err(FieldError::WindowOutOfRange { start: window.start, end: window.end, days });
        }
        let values = assets
            .iter()
            .map(|&a| {
                let x = window.slice(self.panel.excess_returns(a));
                x.iter().sum::<f64>() / x.len() as f64
            })
            .collect();
        Ok(CrossSection { assets: assets.to_vec(), values })
    }

    /// Correlate each field measured on `window_a` with the mean excess
    /// returns on `window_a` (contemporary) and on `window_b` (lagged).
    pub fn correlation_study(
        &self,
        window_a: DayRange,
        window_b: DayRange,
        spec: &FieldSpec,
    ) -> Result<CorrelationReport, FieldError> {
        if window_b.start != window_a.end {
            return Err(FieldError::WindowsNotAdjacent(window_b.start, window_a.end));
        }
        self.check_window(window_b)?;
        let matrix = self.compute_fields(window_a, spec)?;
        let n = matrix.n_rows();
        if n < 4 {
            return Err(FieldError::TooFewAssets(n));
        }
        let now = self.mean_returns(window_a, matrix.assets())?;
        let next = self.mean_returns(window_b, matrix.assets())?;
        let mut rows = Vec::new();
        let mut dropped_fields = Vec::new();
        for (c, &field) in matrix.fields().iter().enumerate() {
            let col = matrix.column(c);
            let pair = stats::correlation(&col, &now.values)
                .and_then(|a| Ok((a, stats::correlation(&col, &next.values)?)))
                .and_then(|(a, b)| {
                    Ok((CorrelationEstimate::from_sample(a, n)?, CorrelationEstimate::from_sample(b, n)?))
                });
            match pair {
                Ok((contemporary, lagged)) => rows.push(StudyRow { field, contemporary, lagged }),
                Err(e) => {
                    let reason = match e {
                        StatError::ZeroVolatility => String::from("zero cross-sectional variance"),
                        other => other.to_string(),
                    };
                    dropped_fields.push(DroppedField { field, reason });
                }
            }
        }
        Ok(CorrelationReport { window_a, window_b, rows, dropped_fields, dropped_assets: matrix.dropped })
    }
}

/// Convenience wrapper building a [`FieldEngine`] for one call.
pub fn compute_fields(panel: &PanelData, window: DayRange, spec: &FieldSpec) -> Result<FieldMatrix, FieldError> {
    FieldEngine::new(panel).compute_fields(window, spec)
}

pub fn correlation_study(
    panel: &PanelData,
    window_a: DayRange,
    window_b: DayRange,
    spec: &FieldSpec,
) -> Result<CorrelationReport, FieldError> {
    FieldEngine::new(panel).correlation_study(window_a, window_b, spec)
}
