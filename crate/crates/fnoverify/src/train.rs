//! Random-feature regression: hidden layers stay at their random
//! initialization, only the projection layer is fit, by least squares over
//! every grid point of every training pair.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::fno::{forward, hidden_step, lift, FnoParams, FnoSpec, Hidden};
use crate::pde::{gaussian, Pair};

/// Initialize a model deterministically from its spec seed. Spectral
/// weights are complex Gaussian scaled by 1/H, bypass and lifting Gaussian
/// scaled by 1/sqrt(H), biases zero, projection zeroed for fitting.
pub fn init_random(spec: &FnoSpec) -> Result<FnoParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.hidden_width;
    let mut params = FnoParams::zeros(spec.clone())?;
    let bypass_scale = 1.0 / (h as f64).sqrt();
    let spectral_scale = 1.0 / h as f64;
    for w in &mut params.lifting_w {
        *w = gaussian(&mut rng) * bypass_scale;
    }
    for layer in &mut params.layers {
        for j in 0..h {
            for m in 0..h {
                for k in 0..spec.modes_kept {
                    *layer.spectral.at_mut(j, m, k) = Complex64::new(
                        gaussian(&mut rng) * spectral_scale,
                        gaussian(&mut rng) * spectral_scale,
                    );
                }
                layer.bypass[j * h + m] = gaussian(&mut rng) * bypass_scale;
            }
        }
    }
    Ok(params)
}

/// Hidden features of one input: the state entering the projection layer.
pub fn hidden_features(params: &FnoParams, u: &Field) -> Result<Hidden> {
    if u.len() != params.spec.grid_n {
        return Err(Error::ShapeMismatch("input length vs model grid".into()));
    }
    let mut state = lift(params, u);
    for (layer, act) in params.layers.iter().zip(&params.spec.activations) {
        state = hidden_step(params, layer, *act, &state)?;
    }
    Ok(state)
}

/// Numerical diagnostics of the least-squares solve.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub rows: usize,
    pub rank: usize,
    pub condition: f64,
    pub train_mse: f64,
}

/// Fit the projection layer on a dataset, leaving every hidden weight
/// untouched. The solve uses an orthogonal factorization (SVD) and returns
/// the minimum-norm solution when the feature matrix is rank-deficient.
pub fn fit_projection(params: &FnoParams, dataset: &[Pair]) -> Result<(FnoParams, FitDiagnostics)> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let rows = dataset.len() * n;
    let mut a = DMatrix::zeros(rows, h + 1);
    let mut b = DVector::zeros(rows);
    for (s, (input, target)) in dataset.iter().enumerate() {
        if target.len() != n {
            return Err(Error::ShapeMismatch("target length vs model grid".into()));
        }
        let feats = hidden_features(params, input)?;
        for i in 0..n {
            let row = s * n + i;
            for j in 0..h {
                a[(row, j)] = feats.at(i, j);
            }
            a[(row, h)] = 1.0;
            b[row] = target[i];
        }
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = max_sv * (rows.max(h + 1) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let min_nonzero = svd
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > eps)
        .fold(f64::INFINITY, f64::min);
    let x = svd
        .solve(&b, eps)
        .map_err(|e| Error::InvalidParam(format!("least-squares solve failed: {e}")))?;

    let mut fitted = params.clone();
    fitted.proj_w = (0..h).map(|j| x[j]).collect();
    fitted.proj_b = x[h];
    let residual = &a * &x - &b;
    let diag = FitDiagnostics {
        rows,
        rank,
        condition: if rank > 0 { max_sv / min_nonzero } else { f64::INFINITY },
        train_mse: residual.norm_squared() / rows as f64,
    };
    Ok((fitted, diag))
}

/// Mean squared error over all grid points of all holdout pairs.
pub fn evaluate_mse(params: &FnoParams, holdout: &[Pair]) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::Empty("holdout set"));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (input, target) in holdout {
        let pred = forward(params, input)?;
        for (p, t) in pred.values().iter().zip(target.values()) {
            acc += (p - t) * (p - t);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// One row of the training report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainRow {
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub h: usize,
    pub l: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}
