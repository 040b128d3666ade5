//! Ridge (normal equations) and lasso (cyclic coordinate descent), both on
//! centred data with an unpenalised intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_xy, mean, ModelError};

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Lasso: stopped on tolerance rather than the sweep cap.
    pub converged: bool,
    pub iterations: usize,
    /// Ridge: the system was singular and the minimum-norm solution was used.
    pub singular: bool,
}

impl LinearFit {
    pub fn predict_one(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

struct Centred {
    xc: DMatrix<f64>,
    yc: DVector<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

fn centre(x: &[Vec<f64>], y: &[f64]) -> Result<Centred, ModelError> {
    let p = check_xy(x, y)?;
    let n = x.len();
    let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = mean(y);
    let xc = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    Ok(Centred { xc, yc, x_mean, y_mean })
}

fn finish(c: &Centred, beta: Vec<f64>, converged: bool, iterations: usize, singular: bool) -> LinearFit {
    let intercept = c.y_mean - c.x_mean.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    LinearFit { intercept, coefficients: beta, converged, iterations, singular }
}

/// Minimises ‖y − Xβ − β₀‖² + λ‖β‖².
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearFit, ModelError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::Config(format!("lambda must be finite and ≥ 0, got {lambda}")));
    }
    let c = centre(x, y)?;
    let p = c.xc.ncols();
    let gram = c.xc.transpose() * &c.xc + DMatrix::identity(p, p) * lambda;
    let rhs = c.xc.transpose() * &c.yc;
    // Cholesky succeeds for positive-definite systems; anything else gets the
    // minimum-norm least-squares solution.
    let well_posed = gram.clone().cholesky().filter(|ch| {
        let d = ch.l_dirty().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        lo > hi * 1e-7
    });
    let (beta, singular) = match well_posed {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let svd = gram.svd(true, true);
            let tol = svd.singular_values.max() * 1e-12 * p as f64;
            (svd.solve(&rhs, tol).map_err(|e| ModelError::InvalidInput(e.to_string()))?, true)
        }
    };
    Ok(finish(&c, beta.iter().copied().collect(), true, 1, singular))
}

/// Relative slack on the lasso threshold. Correlations within rounding of λ
/// count as ties, so λ equal to λ_max (however it was summed) zeroes every
/// slope instead of leaving ~1e-16 residue.
const THRESHOLD_SLACK: f64 = 1e-12;

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Minimises (1/(2n))‖y − Xβ − β₀‖² + λ‖β‖₁ by cyclic coordinate descent
/// until the largest coefficient change falls below 1e-8 (or 10,000 sweeps).
pub fn fit_lasso(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearFit, ModelError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ModelError::Config(format!("lambda must be finite and ≥ 0, got {lambda}")));
    }
    let c = centre(x, y)?;
    let (n, p) = c.xc.shape();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p).map(|j| c.xc.column(j).norm_squared() / nf).collect();
    let mut beta = vec![0.0; p];
    let mut resid = c.yc.clone();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < LASSO_MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = c.xc.column(j);
            let rho = col.dot(&resid) / nf + col_sq[j] * beta[j];
            let new = if rho.abs() <= lambda * (1.0 + THRESHOLD_SLACK) { 0.0 } else { soft_threshold(rho, lambda) / col_sq[j] };
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < LASSO_TOL {
            converged = true;
            break;
        }
    }
    Ok(finish(&c, beta, converged, sweeps, false))
}

/// Smallest λ for which every lasso slope is zero: max_j |x̃_jᵀ(y − ȳ)|/n
/// over centred columns x̃_j.
pub fn lasso_lambda_max(x: &[Vec<f64>], y: &[f64]) -> Result<f64, ModelError> {
    let c = centre(x, y)?;
    let n = c.xc.nrows() as f64;
    Ok((0..c.xc.ncols()).map(|j| c.xc.column(j).dot(&c.yc).abs() / n).fold(0.0, f64::max))
}

/// Largest violation of the lasso optimality conditions at `fit`:
/// |g_j| ≤ λ for zero slopes and g_j = λ·sign(β_j) for active slopes, where
/// g_j = x̃_jᵀr/n over centred columns.
pub fn lasso_kkt_violation(x: &[Vec<f64>], y: &[f64], lambda: f64, fit: &LinearFit) -> Result<f64, ModelError> {
    let c = centre(x, y)?;
    let n = c.xc.nrows() as f64;
    let beta = DVector::from_column_slice(&fit.coefficients);
    let r = &c.yc - &c.xc * &beta;
    let mut worst: f64 = 0.0;
    for (j, b) in fit.coefficients.iter().enumerate() {
        let g = c.xc.column(j).dot(&r) / n;
        let v = if *b == 0.0 { (g.abs() - lambda).max(0.0) } else { (g - lambda * b.signum()).abs() };
        worst = worst.max(v);
    }
    Ok(worst)
}
