//! Seeded factor-model panels with an optional planted lagged signal.
//!
//! Daily asset return:
//!
//! ```text
//! r[i,t] = rf + alpha[i,y] + sum_k L[i,k] * f[k,t] + s[i] * e[i,t]
//! ```
//!
//! where `y` is the 252-day block containing `t`, factor 0 is the market, and
//! `e` is a unit-variance shock, optionally a mixture with a negative jump.
//! The planted alpha is `m[y] * sum_j c[j] * z_j(i) + noise_vol * eta[i,y]`,
//! with `z_j` the cross-sectional z-score of the asset's true field `j`.

use std::path::Path;

use lagcorr_core::panel::{AssetFundamentals, BenchmarkName, BenchmarkSet, FundamentalField, FundamentalSeries, PriceSeries};
use lagcorr_core::{Benchmark, Date, FieldId, PanelData, TradingCalendar, TRADING_YEAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{parse_list, FlatConfig};
use crate::error::{Error, Result};

/// Per-asset parameter: one value, a uniform range `lo:hi`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ValueSpec {
    Constant(f64),
    Uniform(f64, f64),
    List(Vec<f64>),
}

impl ValueSpec {
    fn parse(key: &str, v: &str) -> Result<Self> {
        if let Some((lo, hi)) = v.split_once(':') {
            let lo: f64 = lo.trim().parse().map_err(|e| Error::Config(format!("{key}: {e}")))?;
            let hi: f64 = hi.trim().parse().map_err(|e| Error::Config(format!("{key}: {e}")))?;
            if !(lo <= hi) {
                return Err(Error::Config(format!("{key}: empty range {lo}:{hi}")));
            }
            return Ok(Self::Uniform(lo, hi));
        }
        let list = parse_list(key, v)?;
        Ok(if list.len() == 1 { Self::Constant(list[0]) } else { Self::List(list) })
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Self::Constant(c) => vec![*c; n],
            Self::Uniform(lo, hi) => (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect(),
            Self::List(v) => v.clone(),
        }
    }

    fn check(&self, key: &str, n: usize) -> Result<()> {
        let values: &[f64] = match self {
            Self::Constant(c) => std::slice::from_ref(c),
            Self::Uniform(lo, hi) => &[*lo, *hi],
            Self::List(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!("{key}: {} values for {n} assets", v.len())));
                }
                v
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{key}: non-finite value")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_assets: usize,
    pub n_days: usize,
    pub n_factors: usize,
    /// Market-factor loadings.
    pub loadings: ValueSpec,
    /// Loadings on factors beyond the market.
    pub extra_loadings: ValueSpec,
    pub idio_vol: ValueSpec,
    pub factor_vol: f64,
    /// Daily market-factor drift, unless `regime_market_means` is given.
    pub factor_mean: f64,
    /// Probability of the negative jump in the idiosyncratic shock.
    pub skew_mix: f64,
    /// Jump size in units of the Gaussian component.
    pub skew_jump: f64,
    pub planted_fields: Vec<FieldId>,
    /// Daily alpha per unit z-score of each planted field.
    pub planted_coeffs: Vec<f64>,
    /// Daily alpha noise, redrawn every 252-day block.
    pub noise_vol: f64,
    /// Per-block multiplier of the planted signal; the last value repeats.
    pub regime_multipliers: Vec<f64>,
    pub regime_market_means: Vec<f64>,
    /// Per-block multiplier of the market-factor volatility.
    pub regime_factor_vols: Vec<f64>,
    pub rf_annual: f64,
    pub start_date: Date,
    /// Fundamentals are reported every this many days.
    pub report_every: usize,
}

impl SynthConfig {
    pub fn new(n_assets: usize, n_days: usize) -> Self {
        Self {
            n_assets,
            n_days,
            n_factors: 1,
            loadings: ValueSpec::Uniform(0.5, 1.5),
            extra_loadings: ValueSpec::Uniform(-0.5, 0.5),
            idio_vol: ValueSpec::Uniform(0.01, 0.025),
            factor_vol: 0.01,
            factor_mean: 0.0003,
            skew_mix: 0.0,
            skew_jump: 4.0,
            planted_fields: vec![FieldId::Sigma, FieldId::Beta(Benchmark::Market)],
            planted_coeffs: Vec::new(),
            noise_vol: 0.0,
            regime_multipliers: Vec::new(),
            regime_market_means: Vec::new(),
            regime_factor_vols: Vec::new(),
            rf_annual: 0.02,
            start_date: Date::new(2000, 1, 3).expect("valid date"),
            report_every: 21,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut flat = FlatConfig::parse(text)?;
        let n_assets = flat.take_parsed("n_assets")?.ok_or_else(|| Error::config("n_assets is required"))?;
        let n_days = flat.take_parsed("n_days")?.ok_or_else(|| Error::config("n_days is required"))?;
        let mut c = Self::new(n_assets, n_days);
        if let Some(v) = flat.take_parsed("n_factors")? {
            c.n_factors = v;
        }
        for (key, slot) in [
            ("loadings", &mut c.loadings),
            ("extra_loadings", &mut c.extra_loadings),
            ("idio_vol", &mut c.idio_vol),
        ] {
            if let Some(v) = flat.take(key) {
                *slot = ValueSpec::parse(key, &v)?;
            }
        }
        for (key, slot) in [
            ("factor_vol", &mut c.factor_vol),
            ("factor_mean", &mut c.factor_mean),
            ("skew_mix", &mut c.skew_mix),
            ("skew_jump", &mut c.skew_jump),
            ("noise_vol", &mut c.noise_vol),
            ("rf_annual", &mut c.rf_annual),
        ] {
            if let Some(v) = flat.take_parsed(key)? {
                *slot = v;
            }
        }
        if let Some(v) = flat.take("planted_fields") {
            c.planted_fields = v
                .split(',')
                .map(|s| s.trim().parse::<FieldId>().map_err(|e| Error::Config(format!("planted_fields: {e}"))))
                .collect::<Result<_>>()?;
        }
        for (key, slot) in [
            ("planted_coeffs", &mut c.planted_coeffs),
            ("regime_multipliers", &mut c.regime_multipliers),
            ("regime_market_means", &mut c.regime_market_means),
            ("regime_factor_vols", &mut c.regime_factor_vols),
        ] {
            if let Some(v) = flat.take_list(key)? {
                *slot = v;
            }
        }
        if let Some(v) = flat.take("start_date") {
            c.start_date = crate::config::parse_date("start_date", &v)?;
        }
        if let Some(v) = flat.take_parsed("report_every")? {
            c.report_every = v;
        }
        flat.finish()?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 2 {
            return Err(Error::Config(format!("n_assets must be at least 2, got {}", self.n_assets)));
        }
        if self.n_days < 2 {
            return Err(Error::Config(format!("n_days must be at least 2, got {}", self.n_days)));
        }
        if self.n_factors == 0 {
            return Err(Error::config("n_factors must be positive"));
        }
        self.loadings.check("loadings", self.n_assets)?;
        self.extra_loadings.check("extra_loadings", self.n_assets)?;
        self.idio_vol.check("idio_vol", self.n_assets)?;
        if let ValueSpec::Constant(v) | ValueSpec::Uniform(v, _) = self.idio_vol {
            if v < 0.0 {
                return Err(Error::config("idio_vol must be non-negative"));
            }
        }
        if let ValueSpec::List(v) = &self.idio_vol {
            if v.iter().any(|x| *x < 0.0) {
                return Err(Error::config("idio_vol must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.skew_mix) {
            return Err(Error::config("skew_mix must lie in [0, 1)"));
        }
        if !(self.factor_vol >= 0.0) || !(self.noise_vol >= 0.0) {
            return Err(Error::config("factor_vol and noise_vol must be non-negative"));
        }
        if !self.planted_coeffs.is_empty() && self.planted_coeffs.len() != self.planted_fields.len() {
            return Err(Error::Config(format!(
                "{} planted_coeffs for {} planted_fields",
                self.planted_coeffs.len(),
                self.planted_fields.len()
            )));
        }
        for f in &self.planted_fields {
            if !matches!(f, FieldId::Sigma | FieldId::Beta(Benchmark::Market)) {
                return Err(Error::Config(format!("planted field {f} unsupported (SIGMA or BETA_MARKET)")));
            }
        }
        if self.report_every == 0 {
            return Err(Error::config("report_every must be positive"));
        }
        if self.regime_factor_vols.iter().any(|v| *v < 0.0) {
            return Err(Error::config("regime_factor_vols must be non-negative"));
        }
        Ok(())
    }

    fn block_value(list: &[f64], block: usize, default: f64) -> f64 {
        list.get(block).or(list.last()).copied().unwrap_or(default)
    }
}

/// Generator-side truth, kept for oracles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthParams {
    /// `loadings[i][k]` for asset `i`, factor `k`.
    pub loadings: Vec<Vec<f64>>,
    pub idio_vol: Vec<f64>,
    /// Model volatility of each asset's daily return.
    pub true_sigma: Vec<f64>,
    /// Planted alpha score `sum_j c[j] * z_j(i)` before the regime multiplier.
    pub signal: Vec<f64>,
    /// `alpha[y][i]`, daily alpha of asset `i` in block `y`.
    pub alpha: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: PanelData,
    pub params: SynthParams,
}

fn zscores(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 1e-12 * x.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - m) / sd).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate_synthetic_panel(config: &SynthConfig, seed: u64) -> Result<SyntheticPanel> {
    config.validate()?;
    let (n, t, k) = (config.n_assets, config.n_days, config.n_factors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let market = config.loadings.draw(n, &mut rng);
    let extra: Vec<Vec<f64>> = (1..k).map(|_| config.extra_loadings.draw(n, &mut rng)).collect();
    let loadings: Vec<Vec<f64>> =
        (0..n).map(|i| std::iter::once(market[i]).chain(extra.iter().map(|l| l[i])).collect()).collect();
    let idio_vol = config.idio_vol.draw(n, &mut rng);
    let true_sigma: Vec<f64> = (0..n)
        .map(|i| {
            let sys: f64 = loadings[i].iter().map(|l| l * l * config.factor_vol * config.factor_vol).sum();
            (sys + idio_vol[i] * idio_vol[i]).sqrt()
        })
        .collect();

    let mut signal = vec![0.0; n];
    for (field, c) in config.planted_fields.iter().zip(&config.planted_coeffs) {
        let raw = match field {
            FieldId::Sigma => true_sigma.clone(),
            _ => market.clone(),
        };
        for (s, z) in signal.iter_mut().zip(zscores(&raw)) {
            *s += c * z;
        }
    }
    let blocks = (t - 1).div_ceil(TRADING_YEAR).max(1);
    let alpha: Vec<Vec<f64>> = (0..blocks)
        .map(|y| {
            let m = SynthConfig::block_value(&config.regime_multipliers, y, 1.0);
            signal.iter().map(|s| m * s + config.noise_vol * normal(&mut rng)).collect()
        })
        .collect();

    // Fundamentals scale with the price; the balance-sheet items are fixed.
    let price0: Vec<f64> = (0..n).map(|_| 20.0 + 180.0 * rng.random::<f64>()).collect();
    let shares: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * rng.random::<f64>()).collect();
    let book: Vec<f64> = (0..n).map(|i| price0[i] * shares[i] * (0.2 + 1.3 * rng.random::<f64>())).collect();
    let debt: Vec<f64> = (0..n).map(|i| price0[i] * shares[i] * rng.random::<f64>()).collect();
    let dividend: Vec<f64> = (0..n).map(|i| price0[i] * 0.05 * rng.random::<f64>()).collect();
    let ebitda: Vec<f64> = (0..n).map(|i| price0[i] * shares[i] * (0.05 + 0.2 * rng.random::<f64>())).collect();

    let (p, jump) = (config.skew_mix, config.skew_jump);
    let shock_mean = -p * jump;
    let shock_sd = ((1.0 - p) + p * jump * jump - shock_mean * shock_mean).sqrt();

    let rf_daily = config.rf_annual / TRADING_YEAR as f64;
    let mut prices: Vec<Vec<f64>> = price0.iter().map(|&p0| vec![p0]).collect();
    let bench_names = [
        BenchmarkName::Market,
        BenchmarkName::Oil,
        BenchmarkName::Vix,
        BenchmarkName::Y10,
        BenchmarkName::Value,
        BenchmarkName::Growth,
        BenchmarkName::Momentum,
    ];
    let mut levels: Vec<Vec<f64>> = vec![vec![100.0], vec![50.0], vec![20.0], vec![0.03], vec![100.0], vec![100.0], vec![100.0]];
    let mut factors = vec![0.0; k];
    for day in 1..t {
        let y = (day - 1) / TRADING_YEAR;
        let mean0 = SynthConfig::block_value(&config.regime_market_means, y, config.factor_mean);
        let vol0 = config.factor_vol * SynthConfig::block_value(&config.regime_factor_vols, y, 1.0);
        factors[0] = mean0 + vol0 * normal(&mut rng);
        for f in &mut factors[1..] {
            *f = config.factor_vol * normal(&mut rng);
        }
        let noise: [f64; 6] = std::array::from_fn(|_| normal(&mut rng));
        let extra_factor = |j: usize, fallback: f64| factors.get(j).copied().unwrap_or(fallback);
        let bench_returns = [
            rf_daily + factors[0],
            extra_factor(1, 0.0002 + 0.02 * noise[0]),
            (-3.0 * factors[0] + 0.04 * noise[1]).max(-0.9),
            0.0005 * noise[2],
            extra_factor(2, 0.0002 + 0.01 * noise[3]),
            extra_factor(3, 0.0002 + 0.01 * noise[4]),
            extra_factor(4, 0.0002 + 0.01 * noise[5]),
        ];
        for (j, r) in bench_returns.iter().enumerate() {
            let last = *levels[j].last().expect("seeded");
            let next = if bench_names[j].is_yield() { last + r } else { last * (1.0 + r.max(-0.95)) };
            levels[j].push(next);
        }
        for i in 0..n {
            let u: f64 = rng.random();
            let g = normal(&mut rng);
            let e = if u < p { -jump } else { g };
            let shock = if shock_sd > 0.0 { (e - shock_mean) / shock_sd } else { 0.0 };
            let systematic: f64 = loadings[i].iter().zip(&factors).map(|(l, f)| l * f).sum();
            let r = (rf_daily + alpha[y][i] + systematic + idio_vol[i] * shock).max(-0.95);
            let last = *prices[i].last().expect("seeded");
            prices[i].push(last * (1.0 + r));
        }
    }

    let calendar = TradingCalendar::weekdays_from(config.start_date, t);
    let fundamentals = (0..n)
        .map(|i| {
            let mut f = AssetFundamentals::empty(t);
            let report = |value: &dyn Fn(f64) -> f64| {
                let reports: Vec<Option<f64>> =
                    (0..t).map(|d| (d % config.report_every == 0).then(|| value(prices[i][d]))).collect();
                FundamentalSeries::from_reports(&reports)
            };
            f.set(FundamentalField::Cap, report(&|px| px * shares[i]));
            f.set(FundamentalField::Mtb, report(&|px| px * shares[i] / book[i]));
            f.set(FundamentalField::Ev, report(&|px| px * shares[i] + debt[i]));
            f.set(FundamentalField::DivYield, report(&|px| dividend[i] / px));
            f.set(FundamentalField::Ebitda, report(&|_| ebitda[i]));
            f
        })
        .collect();
    let price_series = prices
        .into_iter()
        .enumerate()
        .map(|(i, values)| PriceSeries { asset_id: format!("A{:03}", i + 1), values })
        .collect();
    let mut benchmarks = BenchmarkSet::new();
    for (name, l) in bench_names.into_iter().zip(levels) {
        benchmarks.insert(name, l);
    }
    let panel = PanelData::new(calendar, price_series, fundamentals, benchmarks, vec![config.rf_annual; t])
        .map_err(|e| Error::Numerical(format!("synthetic panel: {e}")))?;
    Ok(SyntheticPanel { panel, params: SynthParams { loadings, idio_vol, true_sigma, signal, alpha } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_keys() {
        let c = SynthConfig::parse(
            "n_assets = 4\nn_days = 300\nloadings = 1\nidio_vol = 0.01,0.02,0.03,0.04\nplanted_coeffs = 0.001,0.002\nregime_multipliers = 1,-1\n",
        )
        .unwrap();
        assert_eq!(c.loadings, ValueSpec::Constant(1.0));
        assert_eq!(c.idio_vol, ValueSpec::List(vec![0.01, 0.02, 0.03, 0.04]));
        assert_eq!(c.planted_coeffs, vec![0.001, 0.002]);
        assert_eq!(SynthConfig::block_value(&c.regime_multipliers, 7, 1.0), -1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SynthConfig::parse("n_assets = 0\nn_days = 10").is_err());
        assert!(SynthConfig::parse("n_assets = 3\nn_days = 0").is_err());
        assert!(SynthConfig::parse("n_assets = 3\nn_days = 10\nidio_vol = 1,2").is_err());
        assert!(SynthConfig::parse("n_assets = 3\nn_days = 10\nplanted_fields = MEAN\nplanted_coeffs = 1").is_err());
        assert!(SynthConfig::parse("n_assets = 3\nn_days = 10\nbogus = 1").is_err());
    }

    #[test]
    fn skew_mixture_is_standardized() {
        let mut c = SynthConfig::new(2, 20_001);
        c.loadings = ValueSpec::Constant(0.0);
        c.idio_vol = ValueSpec::Constant(0.01);
        c.rf_annual = 0.0;
        c.skew_mix = 0.05;
        let s = generate_synthetic_panel(&c, 3).unwrap();
        let r = s.panel.returns(0);
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / r.len() as f64).sqrt();
        assert!(m.abs() < 3e-4, "{m}");
        assert!((sd / 0.01 - 1.0).abs() < 0.05, "{sd}");
        assert!(lagcorr_core::stats::skewness(r).unwrap() < -0.5);
    }
}
