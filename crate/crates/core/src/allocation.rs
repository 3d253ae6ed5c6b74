//! Long-only, fully invested allocation rules: equal weights, the
//! efficient-frontier selection, the regression selection, their mix, and
//! the adaptive sign-reversal trigger.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::calendar::DayRange;
use crate::fields::{CrossSection, FieldEngine, FieldError, FieldId, FieldSpec};
use crate::linalg::Matrix;
use crate::stats::{self, StatError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("empty asset set")]
    Empty,
    #[error("need at least {need} assets, got {got}")]
    TooFewAssets { need: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("target volatility must be positive, got {0}")]
    InvalidTarget(f64),
    #[error("weight vectors refer to different universes or dates")]
    UniverseMismatch,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Ew,
    Ef,
    Rc,
    Mix,
    RcStar,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Self::Ef, Self::Rc, Self::RcStar, Self::Mix, Self::Ew];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ew => "EW",
            Self::Ef => "EF",
            Self::Rc => "RC",
            Self::Mix => "MIX",
            Self::RcStar => "RC*",
        }
    }

    /// Strategies whose monthly selections are scored for fidelity.
    pub fn has_fidelity(self) -> bool {
        matches!(self, Self::Ef | Self::Rc | Self::RcStar)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EW" => Ok(Self::Ew),
            "EF" => Ok(Self::Ef),
            "RC" => Ok(Self::Rc),
            "MIX" => Ok(Self::Mix),
            "RC*" | "RCSTAR" | "RC_STAR" => Ok(Self::RcStar),
            other => Err(alloc::format!("unknown strategy `{other}`")),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Portfolio weights over the whole panel universe at one rebalance day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    pub strategy: Strategy,
    pub day: usize,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(strategy: Strategy, day: usize, weights: Vec<f64>) -> Self {
        Self { strategy, day, weights }
    }

    /// Indices holding a positive weight.
    pub fn support(&self) -> Vec<usize> {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect()
    }

    /// Nonnegative and summing to one within `tol`.
    pub fn is_on_simplex(&self, tol: f64) -> bool {
        on_simplex(&self.weights, tol)
    }
}

pub fn on_simplex(w: &[f64], tol: f64) -> bool {
    w.iter().all(|v| *v >= 0.0 && v.is_finite()) && (w.iter().sum::<f64>() - 1.0).abs() <= tol
}

fn equal_on(n_total: usize, members: &[usize]) -> Vec<f64> {
    let mut w = alloc::vec![0.0; n_total];
    let each = 1.0 / members.len() as f64;
    for &i in members {
        w[i] = each;
    }
    w
}

/// `1 / |retained|` on each retained asset.
pub fn ew_weights(n_total: usize, retained: &[usize]) -> Result<Vec<f64>, AllocError> {
    if retained.is_empty() {
        return Err(AllocError::Empty);
    }
    if retained.iter().any(|&i| i >= n_total) {
        return Err(AllocError::Dimension(String::from("retained index outside the universe")));
    }
    Ok(equal_on(n_total, retained))
}

/// Euclidean projection onto the unit simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Settings of the frontier solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_bisections: usize,
    pub max_iterations: usize,
    /// Stop when the largest weight change falls below this.
    pub step_tol: f64,
    /// Relative volatility tolerance for the bisection.
    pub vol_tol: f64,
    /// Diagonal loading as a fraction of `trace / N`.
    pub loading: f64,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            lambda_min: 1e-6,
            lambda_max: 1e6,
            max_bisections: 100,
            max_iterations: 20_000,
            step_tol: 1e-12,
            vol_tol: 1e-4,
            loading: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierSolution {
    pub weights: Vec<f64>,
    pub volatility: f64,
    pub expected_return: f64,
    pub target_volatility: f64,
    pub lambda: f64,
    pub bisections: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct FrontierProblem<'a> {
    mu: &'a [f64],
    cov: &'a Matrix,
    loaded: Matrix,
    bound: f64,
    cfg: FrontierConfig,
}

impl FrontierProblem<'_> {
    /// Maximize `mu'w - lambda w' S w` on the simplex by projected gradient
    /// ascent with step `1 / (2 lambda bound)`, started at equal weights.
    /// Nesterov momentum is reset whenever a step moves against the
    /// gradient mapping, which keeps the iteration monotone in practice.
    fn solve(&self, lambda: f64) -> (Vec<f64>, usize) {
        let n = self.mu.len();
        let step = 1.0 / (2.0 * lambda * self.bound);
        let mut w = alloc::vec![1.0 / n as f64; n];
        let mut y = w.clone();
        let mut t = 1.0;
        let mut sy = alloc::vec![0.0; n];
        let mut trial = alloc::vec![0.0; n];
        for it in 1..=self.cfg.max_iterations {
            self.loaded.mul_vec(&y, &mut sy);
            for i in 0..n {
                trial[i] = y[i] + step * (self.mu[i] - 2.0 * lambda * sy[i]);
            }
            let next = project_simplex(&trial);
            let change = next.iter().zip(&w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let against: f64 = (0..n).map(|i| (y[i] - next[i]) * (next[i] - w[i])).sum();
            if against > 0.0 {
                t = 1.0;
                y.copy_from_slice(&next);
            } else {
                let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
                let beta = (t - 1.0) / t_next;
                for i in 0..n {
                    y[i] = next[i] + beta * (next[i] - w[i]);
                }
                t = t_next;
            }
            w = next;
            if change < self.cfg.step_tol {
                return (w, it);
            }
        }
        (w, self.cfg.max_iterations)
    }

    fn evaluate(&self, lambda: f64, bisections: usize, target: f64) -> FrontierSolution {
        let (weights, iterations) = self.solve(lambda);
        FrontierSolution {
            volatility: libm::sqrt(self.cov.quad_form(&weights).max(0.0)),
            expected_return: weights.iter().zip(self.mu).map(|(a, b)| a * b).sum(),
            weights,
            target_volatility: target,
            lambda,
            bisections,
            iterations,
            converged: false,
        }
    }
}

pub fn solve_frontier(mu: &[f64], cov: &Matrix, target_vol: f64) -> Result<FrontierSolution, AllocError> {
    solve_frontier_with(mu, cov, target_vol, FrontierConfig::default())
}

/// Highest-return simplex portfolio at the target volatility, found by
/// bisecting the risk aversion on a log scale. When the target lies outside
/// the attainable range the nearer end point is returned unconverged.
pub fn solve_frontier_with(
    mu: &[f64],
    cov: &Matrix,
    target_vol: f64,
    cfg: FrontierConfig,
) -> Result<FrontierSolution, AllocError> {
    let n = mu.len();
    if n == 0 {
        return Err(AllocError::Empty);
    }
    if cov.dim() != n {
        return Err(AllocError::Dimension(alloc::format!("{n} returns vs {}x{} covariance", cov.dim(), cov.dim())));
    }
    if mu.iter().chain(cov.as_slice()).any(|v| !v.is_finite()) || !target_vol.is_finite() {
        return Err(AllocError::NonFinite);
    }
    if target_vol <= 0.0 {
        return Err(AllocError::InvalidTarget(target_vol));
    }
    let mut loaded = cov.clone();
    loaded.add_diagonal(cfg.loading * cov.trace() / n as f64);
    let bound = loaded.max_abs_row_sum();
    if bound <= 0.0 {
        return Err(AllocError::Dimension(String::from("covariance is identically zero")));
    }
    let problem = FrontierProblem { mu, cov, loaded, bound, cfg };
    let tol = cfg.vol_tol * target_vol;

    let high_risk = problem.evaluate(cfg.lambda_min, 0, target_vol);
    let low_risk = problem.evaluate(cfg.lambda_max, 0, target_vol);
    if low_risk.volatility >= target_vol - tol {
        let converged = (low_risk.volatility - target_vol).abs() <= tol;
        return Ok(FrontierSolution { converged, ..low_risk });
    }
    if high_risk.volatility <= target_vol + tol {
        let converged = (high_risk.volatility - target_vol).abs() <= tol;
        return Ok(FrontierSolution { converged, ..high_risk });
    }

    let (mut lo, mut hi) = (libm::log(cfg.lambda_min), libm::log(cfg.lambda_max));
    let mut best = low_risk;
    for k in 1..=cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        let sol = problem.evaluate(libm::exp(mid), k, target_vol);
        if (sol.volatility - target_vol).abs() <= tol {
            return Ok(FrontierSolution { converged: true, ..sol });
        }
        if sol.volatility > target_vol {
            lo = mid;
        } else {
            hi = mid;
            best = sol;
        }
    }
    Ok(best)
}

/// Equal weights on the assets whose frontier weight exceeds `1 / N`.
pub fn ef_select(frontier: &FrontierSolution) -> Vec<f64> {
    let n = frontier.weights.len();
    let threshold = 1.0 / n as f64;
    let chosen: Vec<usize> = (0..n).filter(|&i| frontier.weights[i] > threshold).collect();
    if chosen.is_empty() {
        equal_on(n, &(0..n).collect::<Vec<_>>())
    } else {
        equal_on(n, &chosen)
    }
}

/// Equal weights on the assets predicted strictly above the mean prediction.
pub fn rc_select(predictions: &CrossSection, n_total: usize) -> Result<Vec<f64>, AllocError> {
    if predictions.len() < 2 {
        return Err(AllocError::TooFewAssets { need: 2, got: predictions.len() });
    }
    if predictions.values.iter().any(|v| !v.is_finite()) {
        return Err(AllocError::NonFinite);
    }
    if predictions.assets.iter().any(|&a| a >= n_total) {
        return Err(AllocError::Dimension(String::from("prediction index outside the universe")));
    }
    let mean = predictions.values.iter().sum::<f64>() / predictions.len() as f64;
    let chosen: Vec<usize> = predictions
        .assets
        .iter()
        .zip(&predictions.values)
        .filter(|(_, p)| **p > mean)
        .map(|(a, _)| *a)
        .collect();
    if chosen.is_empty() {
        Ok(equal_on(n_total, &predictions.assets))
    } else {
        Ok(equal_on(n_total, &chosen))
    }
}

/// Elementwise average of two weight vectors.
pub fn mix_weights(a: &WeightVector, b: &WeightVector) -> Result<WeightVector, AllocError> {
    if a.weights.len() != b.weights.len() || a.day != b.day {
        return Err(AllocError::UniverseMismatch);
    }
    let weights = a.weights.iter().zip(&b.weights).map(|(x, y)| 0.5 * (x + y)).collect();
    Ok(WeightVector::new(Strategy::Mix, a.day, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveState {
    pub flip: bool,
    /// Cross-sectional correlation of volatility with mean excess return.
    pub trigger: f64,
}

/// Flip when volatility and mean excess return are negatively related across
/// assets over `window`. A degenerate cross-section reads as zero (no flip).
pub fn adaptive_trigger(engine: &FieldEngine<'_>, window: DayRange) -> Result<AdaptiveState, AllocError> {
    let spec = FieldSpec::new(Vec::from([FieldId::Sigma, FieldId::Mean]))?;
    let m = engine.compute_fields(window, &spec)?;
    if m.n_rows() < 4 {
        return Err(AllocError::TooFewAssets { need: 4, got: m.n_rows() });
    }
    let trigger = match stats::correlation(&m.column(0), &m.column(1)) {
        Ok(rho) => rho,
        Err(StatError::ZeroVolatility) => 0.0,
        Err(_) => return Err(AllocError::NonFinite),
    };
    Ok(AdaptiveState { flip: trigger < 0.0, trigger })
}
