//! Cross-sectional regression of mean asset returns on lagged explanatory
//! fields, and prediction for the next window.
//!
//! Regressors are z-scored across assets before the fit; the model keeps the
//! standardization parameters so that predictions reuse them. The system is
//! solved through the normal equations with a ridge of
//! `1e-10 * trace(Z'Z) / p` on the regressor block. The intercept is not
//! penalized: centred regressors decouple it, so it is the mean target.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::fields::{CrossSection, DroppedField, FieldId, FieldMatrix};
use crate::linalg::Matrix;
use crate::stats;

/// Relative ridge added to the standardized normal equations.
pub const RIDGE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("{assets} assets for {fields} fields (need at least fields + 2)")]
    TooFewAssets { assets: usize, fields: usize },
    #[error("every field column has zero cross-sectional variance")]
    AllColumnsDegenerate,
    #[error("field {0} missing from the prediction matrix")]
    MissingField(FieldId),
    #[error("normal equations are not positive definite")]
    Singular,
    #[error("non-finite target value")]
    NonFiniteTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionModel {
    /// Retained fields, in fit order.
    pub fields: Vec<FieldId>,
    /// Coefficients on the standardized fields.
    pub coefficients: Vec<f64>,
    /// Per-day return.
    pub intercept: f64,
    pub field_means: Vec<f64>,
    pub field_sds: Vec<f64>,
    pub r_squared: f64,
    pub n_assets: usize,
    pub dropped_fields: Vec<DroppedField>,
    /// True when the field coefficients have been sign-reversed.
    pub flipped: bool,
}

impl RegressionModel {
    fn standardized(&self, raw: &[f64], cols: &[usize]) -> impl Iterator<Item = f64> + '_ {
        let values: Vec<f64> = cols.iter().map(|&c| raw[c]).collect();
        values
            .into_iter()
            .zip(self.field_means.iter().zip(&self.field_sds))
            .map(|(v, (m, s))| (v - m) / s)
    }

    fn predict_row(&self, raw: &[f64], cols: &[usize]) -> f64 {
        self.intercept
            + self
                .standardized(raw, cols)
                .zip(&self.coefficients)
                .map(|(z, b)| z * b)
                .sum::<f64>()
    }
}

/// Fit mean excess returns on the lagged field matrix (assets intersected).
pub fn fit(fields_lagged: &FieldMatrix, realized_means: &CrossSection) -> Result<RegressionModel, RegressionError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (r, &asset) in fields_lagged.assets().iter().enumerate() {
        if let Some(v) = realized_means.get(asset) {
            if !v.is_finite() {
                return Err(RegressionError::NonFiniteTarget);
            }
            rows.push(r);
            y.push(v);
        }
    }
    let n = rows.len();
    let p_all = fields_lagged.n_cols();
    if n < p_all + 2 {
        return Err(RegressionError::TooFewAssets { assets: n, fields: p_all });
    }

    let mut fields = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut dropped_fields = Vec::new();
    for (c, &field) in fields_lagged.fields().iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|&r| fields_lagged.get(r, c)).collect();
        let m = col.iter().sum::<f64>() / n as f64;
        let sd = libm::sqrt(col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64);
        if stats::is_degenerate(sd, &col) {
            dropped_fields.push(DroppedField { field, reason: String::from("zero cross-sectional variance") });
            continue;
        }
        fields.push(field);
        means.push(m);
        sds.push(sd);
        columns.push(col.iter().map(|v| (v - m) / sd).collect());
    }
    let p = fields.len();
    if p == 0 {
        return Err(RegressionError::AllColumnsDegenerate);
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_sd = libm::sqrt(y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / (n - 1) as f64);
    let constant_target = stats::is_degenerate(y_sd, &y);

    let coefficients = if constant_target {
        alloc::vec![0.0; p]
    } else {
        let mut gram = Matrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                let v: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
                gram.set(i, j, v);
                gram.set(j, i, v);
            }
        }
        gram.add_diagonal(RIDGE_REL * gram.trace() / p as f64);
        let rhs: Vec<f64> = columns
            .iter()
            .map(|z| z.iter().zip(&y).map(|(a, b)| a * (b - y_mean)).sum())
            .collect();
        gram.cholesky_solve(&rhs).ok_or(RegressionError::Singular)?
    };

    let intercept = if constant_target { y[0] } else { y_mean };
    let fitted: Vec<f64> = (0..n)
        .map(|r| intercept + columns.iter().zip(&coefficients).map(|(z, b)| z[r] * b).sum::<f64>())
        .collect();
    let r_squared = if constant_target { 0.0 } else { r_squared(&y, &fitted) };

    Ok(RegressionModel {
        fields,
        coefficients,
        intercept,
        field_means: means,
        field_sds: sds,
        r_squared,
        n_assets: n,
        dropped_fields,
        flipped: false,
    })
}

/// `1 - SSR / SST`, zero for a constant target.
pub fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if sst == 0.0 {
        return 0.0;
    }
    let ssr: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - ssr / sst
}

/// Apply the model to `fields_current` using the stored standardization.
pub fn predict(model: &RegressionModel, fields_current: &FieldMatrix) -> Result<CrossSection, RegressionError> {
    let cols = model
        .fields
        .iter()
        .map(|&f| fields_current.column_index(f).ok_or(RegressionError::MissingField(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let values = (0..fields_current.n_rows())
        .map(|r| model.predict_row(fields_current.row(r), &cols))
        .collect();
    Ok(CrossSection { assets: fields_current.assets().to_vec(), values })
}

/// Negate every field coefficient; the intercept is kept.
pub fn flip_coefficients(model: &RegressionModel) -> RegressionModel {
    let mut out = model.clone();
    for b in &mut out.coefficients {
        *b = -*b;
    }
    out.flipped = !model.flipped;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::DayRange;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn matrix(fields: Vec<FieldId>, rows: &[Vec<f64>]) -> FieldMatrix {
        let assets = (0..rows.len()).collect();
        let values = rows.iter().flatten().copied().collect();
        FieldMatrix::from_parts(DayRange::new(1, 61), fields, assets, values).unwrap()
    }

    fn target(values: Vec<f64>) -> CrossSection {
        CrossSection { assets: (0..values.len()).collect(), values }
    }

    #[test]
    fn noiseless_single_field() {
        let x = [0.012, 0.018, 0.02, 0.035, 0.04, 0.07];
        let m = matrix(vec![FieldId::Sigma], &x.iter().map(|v| vec![*v]).collect::<Vec<_>>());
        let y = target(x.iter().map(|v| 3.0 * v + 7.0).collect());
        let model = fit(&m, &y).unwrap();
        let mean = x.iter().sum::<f64>() / 6.0;
        let sd = libm::sqrt(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0);
        assert_abs_diff_eq!(model.coefficients[0], 3.0 * sd, epsilon = 1e-8);
        assert_abs_diff_eq!(model.intercept, 7.0 + 3.0 * mean, epsilon = 1e-12);
        let pred = predict(&model, &m).unwrap();
        for (p, t) in pred.values.iter().zip(&y.values) {
            assert_abs_diff_eq!(p, t, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_target() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let m = matrix(vec![FieldId::Sigma, FieldId::SkewStar], &rows);
        let model = fit(&m, &target(vec![0.0004; 8])).unwrap();
        assert!(model.coefficients.iter().all(|&b| b == 0.0));
        assert_eq!(model.intercept, 0.0004);
        assert_eq!(model.r_squared, 0.0);
    }

    #[test]
    fn degenerate_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64]).collect();
        let m = matrix(vec![FieldId::Mean, FieldId::Sigma], &rows);
        let model = fit(&m, &target((0..6).map(|i| i as f64).collect())).unwrap();
        assert_eq!(model.fields, vec![FieldId::Sigma]);
        assert_eq!(model.dropped_fields[0].field, FieldId::Mean);

        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![2.0]).collect();
        let m = matrix(vec![FieldId::Mean], &rows);
        assert_eq!(fit(&m, &target(vec![1.0; 6])), Err(RegressionError::AllColumnsDegenerate));
    }

    #[test]
    fn too_few_assets() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64, 1.0 / (1.0 + i as f64)]).collect();
        let m = matrix(vec![FieldId::Mean, FieldId::Sigma], &rows);
        assert_eq!(
            fit(&m, &target(vec![1.0, 2.0, 3.0])),
            Err(RegressionError::TooFewAssets { assets: 3, fields: 2 })
        );
    }

    #[test]
    fn flip_properties() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, libm::sin(i as f64)]).collect();
        let m = matrix(vec![FieldId::Sigma, FieldId::Skew], &rows);
        let y = target((0..9).map(|i| 0.1 * i as f64 + libm::cos(i as f64)).collect());
        let model = fit(&m, &y).unwrap();
        assert_eq!(flip_coefficients(&flip_coefficients(&model)), model);
        let flipped = flip_coefficients(&model);
        let a = predict(&model, &m).unwrap();
        let b = predict(&flipped, &m).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_abs_diff_eq!(*v, 2.0 * model.intercept - u, epsilon = 1e-12);
        }
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        let argmin = |v: &[f64]| (0..v.len()).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        assert_eq!(argmax(&b.values), argmin(&a.values));
    }

    #[test]
    fn zero_coefficient_model_predicts_intercept() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let m = matrix(vec![FieldId::Sigma], &rows);
        let mut model = fit(&m, &target((0..6).map(|i| i as f64).collect())).unwrap();
        model.coefficients = vec![0.0];
        assert!(predict(&model, &m).unwrap().values.iter().all(|&v| v == model.intercept));
    }

    #[test]
    fn missing_prediction_column() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let m = matrix(vec![FieldId::Sigma], &rows);
        let model = fit(&m, &target((0..6).map(|i| (i * i) as f64).collect())).unwrap();
        let other = matrix(vec![FieldId::Mean], &rows);
        assert_eq!(predict(&model, &other), Err(RegressionError::MissingField(FieldId::Sigma)));
    }
}
