//! Synthetic benchmark series built from the basket itself: low-minus-high
//! tercile factor indexes on fundamentals, and the average cross-pair
//! correlation index.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::calendar::DayRange;
use crate::panel::{FundamentalField, PanelData};
use crate::stats::{self, StatError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("factor construction needs at least 6 assets, got {0}")]
    TooFewAssets(usize),
    #[error("{factor}: only {present} of {total} assets report the field on day {day}")]
    InsufficientCoverage { factor: FactorName, day: usize, present: usize, total: usize },
    #[error("invalid rebalance schedule: {0}")]
    Schedule(String),
    #[error("window of {0} days is too short (need at least 3)")]
    WindowTooShort(usize),
    #[error("window {start}..{end} does not fit in a panel of {days} days")]
    WindowOutOfRange { start: usize, end: usize, days: usize },
    #[error("fewer than 2 non-constant assets in the window")]
    TooFewActiveAssets,
    #[error(transparent)]
    Stat(#[from] StatError),
}

/// Minimum share of assets that must report the sorting field.
pub const MIN_COVERAGE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FactorName {
    DivYield,
    Ev,
    Mtb,
    EvEbitda,
}

impl FactorName {
    pub const ALL: [FactorName; 4] = [Self::DivYield, Self::Ev, Self::Mtb, Self::EvEbitda];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DivYield => "DIVYIELD",
            Self::Ev => "EV",
            Self::Mtb => "MTB",
            Self::EvEbitda => "EVEBITDA",
        }
    }

    /// Sorting value of one asset at the close of `day`.
    fn value(self, panel: &PanelData, asset: usize, day: usize) -> Option<f64> {
        let f = panel.fundamentals(asset);
        let v = match self {
            Self::DivYield => f.get(FundamentalField::DivYield).at(day),
            Self::Ev => f.get(FundamentalField::Ev).at(day),
            Self::Mtb => f.get(FundamentalField::Mtb).at(day),
            Self::EvEbitda => {
                let ev = f.get(FundamentalField::Ev).at(day)?;
                let ebitda = f.get(FundamentalField::Ebitda).at(day)?;
                (ebitda > 0.0).then(|| ev / ebitda)
            }
        };
        v.filter(|x| x.is_finite())
    }
}

impl fmt::Display for FactorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SortOrder {
    Ascending,
    Descending,
}

/// Leg membership fixed at one rebalance day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorLegs {
    pub day: usize,
    pub low: Vec<usize>,
    pub high: Vec<usize>,
}

/// Daily low-minus-high returns of a tercile-sorted factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorIndex {
    pub name: FactorName,
    /// One value per return day; days before the first rebalance are zero.
    pub returns: Vec<f64>,
    pub legs: Vec<FactorLegs>,
}

impl FactorIndex {
    /// First return day covered by the factor.
    pub fn first_day(&self) -> usize {
        self.legs.first().map_or(usize::MAX, |l| l.day)
    }
}

/// Day 1 followed by the first trading day of every later month.
pub fn monthly_schedule(panel: &PanelData) -> Vec<usize> {
    let last = panel.n_days() - 1;
    let mut days = Vec::from([1]);
    days.extend(panel.calendar().month_starts(2, last));
    days
}

pub fn build_factor_index(
    panel: &PanelData,
    factor: FactorName,
    schedule: &[usize],
) -> Result<FactorIndex, FactorError> {
    build_factor_index_sorted(panel, factor, schedule, SortOrder::Ascending)
}

/// Tercile legs from the field's latest value known before each rebalance
/// day; daily return = equal-weighted low leg minus equal-weighted high leg.
pub fn build_factor_index_sorted(
    panel: &PanelData,
    factor: FactorName,
    schedule: &[usize],
    order: SortOrder,
) -> Result<FactorIndex, FactorError> {
    let n = panel.n_assets();
    if n < 6 {
        return Err(FactorError::TooFewAssets(n));
    }
    let days = panel.n_days();
    if schedule.is_empty() {
        return Err(FactorError::Schedule(String::from("empty")));
    }
    if schedule[0] == 0 || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[schedule.len() - 1] >= days {
        return Err(FactorError::Schedule(String::from(
            "days must be strictly increasing within 1..n_days",
        )));
    }

    let mut returns = alloc::vec![0.0; days - 1];
    let mut legs = Vec::with_capacity(schedule.len());
    for (k, &day) in schedule.iter().enumerate() {
        let mut ranked: Vec<(f64, usize)> =
            (0..n).filter_map(|a| factor.value(panel, a, day - 1).map(|v| (v, a))).collect();
        if (ranked.len() as f64) < MIN_COVERAGE * n as f64 {
            return Err(FactorError::InsufficientCoverage { factor, day, present: ranked.len(), total: n });
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if order == SortOrder::Descending {
            ranked.reverse();
        }
        let leg = ranked.len() / 3;
        let mut low: Vec<usize> = ranked[..leg].iter().map(|x| x.1).collect();
        let mut high: Vec<usize> = ranked[ranked.len() - leg..].iter().map(|x| x.1).collect();
        low.sort_unstable();
        high.sort_unstable();

        let end = schedule.get(k + 1).copied().unwrap_or(days);
        for t in day..end {
            let avg = |members: &[usize]| members.iter().map(|&a| panel.returns(a)[t - 1]).sum::<f64>() / leg as f64;
            returns[t - 1] = avg(&low) - avg(&high);
        }
        legs.push(FactorLegs { day, low, high });
    }
    Ok(FactorIndex { name: factor, returns, legs })
}

fn check_window(panel: &PanelData, window: DayRange) -> Result<(), FactorError> {
    if window.start == 0 || window.end > panel.n_days() || window.start > window.end {
        return Err(FactorError::WindowOutOfRange { start: window.start, end: window.end, days: panel.n_days() });
    }
    if window.len() < 3 {
        return Err(FactorError::WindowTooShort(window.len()));
    }
    Ok(())
}

/// Mean pairwise correlation over all unordered pairs of non-constant series.
pub fn cross_pair_correlation(series: &[&[f64]]) -> Result<f64, FactorError> {
    let active: Vec<&[f64]> = series
        .iter()
        .copied()
        .filter(|s| stats::volatility(s).map_or(false, |sd| !stats::is_degenerate(sd, s)))
        .collect();
    if active.len() < 2 {
        return Err(FactorError::TooFewActiveAssets);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            sum += stats::correlation(active[i], active[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Cross-pair correlation index of the basket's excess returns on `window`.
pub fn cross_pair_index(panel: &PanelData, window: DayRange) -> Result<f64, FactorError> {
    check_window(panel, window)?;
    let series: Vec<&[f64]> = (0..panel.n_assets()).map(|a| window.slice(panel.excess_returns(a))).collect();
    cross_pair_correlation(&series)
}

/// Rolling cross-pair correlation index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossPairIndex {
    pub windows: Vec<DayRange>,
    pub values: Vec<f64>,
}

/// Windows of `window_length` return days, the first starting on day 1,
/// advancing by `step` while they fit in the panel.
pub fn cross_pair_series(panel: &PanelData, window_length: usize, step: usize) -> Result<CrossPairIndex, FactorError> {
    let return_days = panel.n_days() - 1;
    if window_length > return_days {
        return Err(FactorError::WindowOutOfRange { start: 1, end: 1 + window_length, days: panel.n_days() });
    }
    if window_length < 3 {
        return Err(FactorError::WindowTooShort(window_length));
    }
    let step = step.max(1);
    let mut out = CrossPairIndex { windows: Vec::new(), values: Vec::new() };
    let mut start = 1;
    while start + window_length <= panel.n_days() {
        let w = DayRange::new(start, start + window_length);
        out.values.push(cross_pair_index(panel, w)?);
        out.windows.push(w);
        start += step;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{Date, TradingCalendar};
    use crate::panel::{AssetFundamentals, BenchmarkSet, FundamentalSeries, PriceSeries};
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn panel_from_returns(returns: &[Vec<f64>], ev: Option<&[f64]>) -> PanelData {
        let days = returns[0].len() + 1;
        let cal = TradingCalendar::weekdays_from(Date::new(2021, 1, 4).unwrap(), days);
        let prices = returns
            .iter()
            .enumerate()
            .map(|(i, r)| PriceSeries {
                asset_id: alloc::format!("A{i}"),
                values: crate::panel::compound(100.0, r),
            })
            .collect();
        let fundamentals = match ev {
            Some(ev) => ev
                .iter()
                .map(|&v| {
                    let mut f = AssetFundamentals::empty(days);
                    f.set(FundamentalField::Ev, FundamentalSeries::from_reports(&vec![Some(v); days]));
                    f
                })
                .collect(),
            None => vec![],
        };
        PanelData::new(cal, prices, fundamentals, BenchmarkSet::new(), vec![0.0; days]).unwrap()
    }

    #[test]
    fn hand_built_tercile_factor() {
        let r = [0.01, 0.01, 0.003, -0.004, -0.01, -0.01];
        let returns: Vec<Vec<f64>> = r.iter().map(|&v| vec![v]).collect();
        let panel = panel_from_returns(&returns, Some(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let f = build_factor_index(&panel, FactorName::Ev, &[1]).unwrap();
        assert_eq!(f.legs[0].low, vec![0, 1]);
        assert_eq!(f.legs[0].high, vec![4, 5]);
        assert_abs_diff_eq!(f.returns[0], 0.02, epsilon = 1e-15);
    }

    #[test]
    fn identical_returns_cancel() {
        let returns = vec![vec![0.01, -0.02, 0.005]; 7];
        let panel = panel_from_returns(&returns, Some(&[3.0, 1.0, 4.0, 1.5, 9.0, 2.6, 5.0]));
        let f = build_factor_index(&panel, FactorName::Ev, &[1, 3]).unwrap();
        assert!(f.returns.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn factor_errors() {
        let returns = vec![vec![0.01, 0.0]; 5];
        let panel = panel_from_returns(&returns, Some(&[1.0; 5]));
        assert_eq!(build_factor_index(&panel, FactorName::Ev, &[1]), Err(FactorError::TooFewAssets(5)));
        let returns = vec![vec![0.01, 0.0]; 6];
        let panel = panel_from_returns(&returns, None);
        assert!(matches!(
            build_factor_index(&panel, FactorName::Ev, &[1]),
            Err(FactorError::InsufficientCoverage { present: 0, .. })
        ));
    }

    #[test]
    fn two_identical_assets_have_unit_index() {
        let x = vec![0.01, -0.02, 0.005, 0.003];
        let panel = panel_from_returns(&[x.clone(), x], None);
        let p = cross_pair_index(&panel, DayRange::new(1, 5)).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_assets_have_zero_index() {
        // Centred, mutually orthogonal columns (rows of a Hadamard matrix).
        let h = [
            vec![0.01, -0.01, 0.01, -0.01],
            vec![0.01, 0.01, -0.01, -0.01],
            vec![0.01, -0.01, -0.01, 0.01],
        ];
        let panel = panel_from_returns(&h, None);
        assert_abs_diff_eq!(cross_pair_index(&panel, DayRange::new(1, 5)).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn too_short_window() {
        let x = vec![0.01, -0.02, 0.005, 0.003];
        let panel = panel_from_returns(&[x.clone(), x], None);
        assert_eq!(cross_pair_index(&panel, DayRange::new(1, 3)), Err(FactorError::WindowTooShort(2)));
        assert!(cross_pair_series(&panel, 5, 1).is_err());
    }
}
