//! Column statistics with deterministic pairwise reductions.

use nalgebra::DMatrix;

use crate::quadrature::pairwise_sum;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample covariance of two equally long columns.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    pairwise_sum(&prods) / (n - 1) as f64
}

/// Standard error of the mean.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    (covariance(xs, xs) / xs.len() as f64).sqrt()
}

/// Jackknife standard error of the sample covariance.
///
/// Leave-one-out covariances are obtained in closed form from the
/// centered cross products, so the cost is linear in `n`.
pub fn covariance_jackknife_se(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return f64::NAN;
    }
    let nf = n as f64;
    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|a| a - mx).collect();
    let dy: Vec<f64> = y.iter().map(|b| b - my).collect();
    let prods: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a * b).collect();
    let s = pairwise_sum(&prods);
    // Removing draw i: the centered sum loses d_i e_i * n / (n - 1).
    let loo: Vec<f64> = prods
        .iter()
        .map(|p| (s - p * nf / (nf - 1.0)) / (nf - 2.0))
        .collect();
    let m = mean(&loo);
    let dev: Vec<f64> = loo.iter().map(|v| (v - m) * (v - m)).collect();
    ((nf - 1.0) / nf * pairwise_sum(&dev)).sqrt()
}

/// Sample skewness `g1`.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>());
    let m3 = mean(&xs.iter().map(|x| (x - m).powi(3)).collect::<Vec<_>>());
    m3 / m2.powf(1.5)
}

/// Sample excess kurtosis `g2`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>());
    let m4 = mean(&xs.iter().map(|x| (x - m).powi(4)).collect::<Vec<_>>());
    m4 / (m2 * m2) - 3.0
}

/// Covariance matrix and per-entry jackknife standard errors of the columns
/// of `draws` (one row per draw).
pub fn covariance_matrix(draws: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = draws.ncols();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| draws.column(j).iter().copied().collect())
        .collect();
    let mut cov = DMatrix::zeros(k, k);
    let mut se = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let c = covariance(&cols[i], &cols[j]);
            let e = covariance_jackknife_se(&cols[i], &cols[j]);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    (cov, se)
}
