//! Explanatory-field statistics and long-only allocation strategies.
//!
//! The crate is `no_std` (with `alloc`). It covers the numerical half of the
//! engine: window statistics (moments, beta, skewness and its rank-ordered
//! revision), long-short fundamental factor indexes, the average cross-pair
//! correlation index, cross-sectional field/return correlation studies, the
//! lagged cross-sectional regression, the efficient-frontier solver, the five
//! allocation rules and the monthly backtest loop with its performance
//! metrics.
//!
//! File formats, the synthetic panel generator and the command line live in
//! the `lagcorr` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod allocation;
pub mod backtest;
pub mod calendar;
pub mod factors;
pub mod fields;
pub mod linalg;
pub mod panel;
pub mod regression;
pub mod stats;

pub use allocation::{AdaptiveState, FrontierSolution, Strategy, WeightVector};
pub use backtest::{BacktestOutput, BacktestReport, EquityCurve, RebalanceSchedule};
pub use calendar::{Date, DayRange, TradingCalendar};
pub use fields::{Benchmark, CrossSection, FieldEngine, FieldId, FieldMatrix, FieldSpec};
pub use panel::PanelData;
pub use regression::RegressionModel;
pub use stats::CorrelationEstimate;

/// Trading days per year.
pub const TRADING_YEAR: usize = 252;
