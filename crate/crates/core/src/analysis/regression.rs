use serde::{Deserialize, Serialize};

use super::{AnalysisError, CorpusEntry};

/// Linear predictor `γ = a<k> + b<cl> + c<eff> + d` of the contraction rate
/// from the three metric averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r2: f64,
    pub corpus_size: usize,
}

impl RateModel {
    pub fn predict(&self, mean_degree: f64, mean_clustering: f64, mean_efficiency: f64) -> f64 {
        self.a * mean_degree + self.b * mean_clustering + self.c * mean_efficiency + self.d
    }
}

/// Ordinary least squares of `y` on three regressors plus an intercept.
///
/// Columns are mean-centred and scaled to unit variance, so the 3×3 normal
/// system is a correlation matrix; it is solved by Gaussian elimination with
/// partial pivoting and the coefficients are mapped back to raw units.
pub fn fit_linear3(x: &[[f64; 3]], y: &[f64]) -> Result<RateModel, AnalysisError> {
    let m = x.len();
    if m < 4 || y.len() != m {
        return Err(AnalysisError::CorpusTooSmall {
            needed: 4,
            got: m.min(y.len()),
        });
    }
    let mf = m as f64;
    let mut mean = [0.0; 3];
    for row in x {
        for c in 0..3 {
            mean[c] += row[c] / mf;
        }
    }
    let y_mean = y.iter().sum::<f64>() / mf;
    let mut scale = [0.0; 3];
    for row in x {
        for c in 0..3 {
            scale[c] += (row[c] - mean[c]).powi(2);
        }
    }
    for (c, s) in scale.iter_mut().enumerate() {
        *s = (*s / mf).sqrt();
        if !(*s > 1e-12 * (1.0 + mean[c].abs())) {
            return Err(AnalysisError::RankDeficient(format!("regressor {c} is constant")));
        }
    }
    let z = |row: &[f64; 3], c: usize| (row[c] - mean[c]) / scale[c];

    let mut a = [[0.0; 4]; 3];
    for (row, &yi) in x.iter().zip(y) {
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += z(row, r) * z(row, c) / mf;
            }
            a[r][3] += z(row, r) * (yi - y_mean) / mf;
        }
    }
    let beta = solve3(a)?;

    let coef: Vec<f64> = (0..3).map(|c| beta[c] / scale[c]).collect();
    let d = y_mean - (0..3).map(|c| coef[c] * mean[c]).sum::<f64>();
    let model = RateModel {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        d,
        r2: 0.0,
        corpus_size: m,
    };
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| (yi - model.predict(row[0], row[1], row[2])).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - y_mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateModel { r2, ..model })
}

fn solve3(mut a: [[f64; 4]; 3]) -> Result<[f64; 3], AnalysisError> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-10 {
            return Err(AnalysisError::RankDeficient("regressors are collinear".to_string()));
        }
        a.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut out = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * out[c]).sum();
        out[r] = (a[r][3] - s) / a[r][r];
    }
    Ok(out)
}

/// Fits the rate model on corpus averages against measured rates.
pub fn fit_model(corpus: &[CorpusEntry]) -> Result<RateModel, AnalysisError> {
    let x: Vec<[f64; 3]> = corpus
        .iter()
        .map(|e| {
            [
                e.averages.mean_degree,
                e.averages.mean_clustering,
                e.averages.mean_efficiency,
            ]
        })
        .collect();
    let y: Vec<f64> = corpus.iter().map(|e| e.gamma).collect();
    fit_linear3(&x, &y)
}
