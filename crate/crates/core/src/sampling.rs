//! Joint Gaussian draws of `(B_m(t_1), ..., B_m(t_k), <omega, f_1>, ..., <omega, f_d>)`
//! and Girsanov reweighting.
//!
//! Draw `i` uses its own ChaCha8 stream (`seed`, stream `i`), so ensembles do
//! not depend on the number of worker threads.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{unit_indicator, TestFunction};
use crate::kernel::{check_distinct, cholesky_with_jitter, Kernel};
use crate::quadrature::{pairwise_sum, Adaptive};
use crate::spectral::SpectralDensity;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cholesky,
    Spectral,
}

/// `n` joint draws, one per row: path values first, then Wiener integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub extra_directions: Vec<String>,
    pub draws: DMatrix<f64>,
    pub seed: u64,
    pub method: Method,
}

impl PathEnsemble {
    pub fn n(&self) -> usize {
        self.draws.nrows()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.column(j).iter().copied().collect()
    }

    /// Column of `<omega, f>` for the direction with this label.
    pub fn direction_column(&self, label: &str) -> Result<Vec<f64>> {
        let j = self
            .extra_directions
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::MissingColumn(label.to_string()))?;
        Ok(self.column(self.times.len() + j))
    }
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Covariance of `(B(t_1..t_k), <omega, f_1..f_d>)`.
pub fn joint_covariance(
    kernel: &Kernel,
    times: &[f64],
    directions: &[TestFunction],
) -> Result<DMatrix<f64>> {
    let k = times.len();
    let d = directions.len();
    let mut cov = DMatrix::zeros(k + d, k + d);
    if k > 0 {
        cov.view_mut((0, 0), (k, k))
            .copy_from(&kernel.gram(times)?.values);
    }
    let cross: Vec<Result<f64>> = (0..k * d)
        .into_par_iter()
        .map(|idx| kernel.inner_product(&unit_indicator(times[idx / d]), &directions[idx % d]))
        .collect();
    for (idx, v) in cross.into_iter().enumerate() {
        let (i, j) = (idx / d, idx % d);
        let v = v?;
        cov[(i, k + j)] = v;
        cov[(k + j, i)] = v;
    }
    for i in 0..d {
        for j in 0..=i {
            let v = kernel.inner_product(&directions[i], &directions[j])?;
            cov[(k + i, k + j)] = v;
            cov[(k + j, k + i)] = v;
        }
    }
    Ok(cov)
}

// Cholesky factor with exactly zero rows for zero-variance coordinates
// (e.g. B(0) or a zero direction).
fn degenerate_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = cov.nrows();
    let live: Vec<usize> = (0..dim).filter(|&i| cov[(i, i)] > 0.0).collect();
    let sub = DMatrix::from_fn(live.len(), live.len(), |i, j| cov[(live[i], live[j])]);
    let mut l = DMatrix::zeros(dim, dim);
    if live.is_empty() {
        return Ok(l);
    }
    let (ls, _) = cholesky_with_jitter(&sub)?;
    for (i, &r) in live.iter().enumerate() {
        for (j, &c) in live.iter().enumerate().take(i + 1) {
            l[(r, c)] = ls[(i, j)];
        }
    }
    Ok(l)
}

/// Frequency cells for spectral synthesis.
#[derive(Debug, Clone)]
pub struct SpectralSynthesis {
    /// Cell midpoints.
    pub nodes: Vec<f64>,
    /// `\int_cell m`.
    pub masses: Vec<f64>,
    /// Largest entrywise gap between the synthesised and analytic covariance,
    /// relative to `sqrt(K_ii K_jj)`.
    pub max_rel_error: f64,
}

impl SpectralSynthesis {
    /// Covariance implied by the cells.
    pub fn covariance(&self, times: &[f64]) -> DMatrix<f64> {
        let k = times.len();
        DMatrix::from_fn(k, k, |i, j| {
            let (t, s) = (times[i], times[j]);
            let terms: Vec<f64> = self
                .nodes
                .iter()
                .zip(&self.masses)
                .map(|(&xi, &w)| {
                    w / PI * (1.0 - (xi * t).cos() - (xi * s).cos() + (xi * (t - s)).cos())
                        / (xi * xi)
                })
                .collect();
            pairwise_sum(&terms)
        })
    }

    /// Chooses cells of width `0.2 / max|t|` and doubles the frequency range
    /// until every covariance entry is within `tol` of the analytic value.
    pub fn design(
        kernel: &Kernel,
        times: &[f64],
        tol: f64,
        max_cells: usize,
    ) -> Result<SpectralSynthesis> {
        let m = kernel.density();
        let t_max = times.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        let t_min = times
            .iter()
            .filter(|t| **t != 0.0)
            .fold(f64::INFINITY, |a, t| a.min(t.abs()));
        if t_max == 0.0 {
            return Ok(SpectralSynthesis {
                nodes: Vec::new(),
                masses: Vec::new(),
                max_rel_error: 0.0,
            });
        }
        let width = 0.2 / t_max;
        let analytic = kernel.gram(times)?.values;
        let mut upper = m.support().map_or(64.0 / t_min, |s| s);
        loop {
            let count = (upper / width).ceil() as usize;
            if count > max_cells {
                return Err(Error::NonConvergence(format!(
                    "spectral synthesis needs more than {max_cells} frequency cells"
                )));
            }
            let mut nodes = Vec::with_capacity(count);
            let mut masses = Vec::with_capacity(count);
            for c in 0..count {
                let a = c as f64 * width;
                let b = ((c + 1) as f64 * width).min(upper);
                let w = cell_mass(m, a, b)?;
                if w > 0.0 {
                    nodes.push(0.5 * (a + b));
                    masses.push(w);
                }
            }
            let mut synth = SpectralSynthesis {
                nodes,
                masses,
                max_rel_error: 0.0,
            };
            let cov = synth.covariance(times);
            let mut worst = 0.0_f64;
            for i in 0..times.len() {
                for j in 0..times.len() {
                    let scale = (analytic[(i, i)] * analytic[(j, j)]).sqrt();
                    if scale > 0.0 {
                        worst = worst.max((cov[(i, j)] - analytic[(i, j)]).abs() / scale);
                    }
                }
            }
            synth.max_rel_error = worst;
            if worst <= tol || m.support().is_some_and(|s| upper >= s) {
                return Ok(synth);
            }
            upper *= 2.0;
        }
    }
}

fn cell_mass(m: &SpectralDensity, a: f64, b: f64) -> Result<f64> {
    let hi = m.support().map_or(b, |s| s.min(b));
    if hi <= a {
        return Ok(0.0);
    }
    if let Some(beta) = m.power_law_exponent() {
        let p = beta + 1.0;
        return Ok((hi.powf(p) - a.powf(p)) / p);
    }
    let quad = Adaptive::new(1e-15, 1e-12, 10_000);
    Ok(if a == 0.0 {
        quad.integrate_graded(|x| m.eval(x), hi, 60)?.value
    } else {
        quad.integrate(|x| m.eval(x), a, hi)?.value
    })
}

/// Relative covariance tolerance for the spectral method.
pub const SPECTRAL_TOL: f64 = 1e-3;
const SPECTRAL_MAX_CELLS: usize = 200_000;

/// `n` joint draws of path values at `times` and Wiener integrals against
/// `directions`.
pub fn sample(
    kernel: &Kernel,
    times: &[f64],
    directions: &[TestFunction],
    n: usize,
    seed: u64,
    method: Method,
) -> Result<PathEnsemble> {
    check_distinct(times)?;
    if n == 0 {
        return Err(Error::Validation("number of draws must be positive".into()));
    }
    let k = times.len();
    let rows: Vec<Vec<f64>> = match method {
        Method::Cholesky => {
            let cov = joint_covariance(kernel, times, directions)?;
            let l = degenerate_cholesky(&cov)?;
            let dim = cov.nrows();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, i);
                    let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    (0..dim)
                        .map(|r| {
                            let mut acc = 0.0;
                            for c in 0..=r {
                                acc += l[(r, c)] * z[c];
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        }
        Method::Spectral => {
            if !directions.is_empty() {
                return Err(Error::Unsupported(
                    "the spectral method synthesises path values only; use Cholesky for Wiener integrals".into(),
                ));
            }
            let synth = SpectralSynthesis::design(kernel, times, SPECTRAL_TOL, SPECTRAL_MAX_CELLS)?;
            let cells = synth.nodes.len();
            // Row r: coefficients of (Z_1..Z_K, Z'_1..Z'_K) for B(t_r).
            let coeffs: Vec<Vec<f64>> = times
                .iter()
                .map(|&t| {
                    let mut row = vec![0.0; 2 * cells];
                    for (c, (&xi, &w)) in synth.nodes.iter().zip(&synth.masses).enumerate() {
                        let amp = (w / PI).sqrt() / xi;
                        let (s, co) = (xi * t).sin_cos();
                        row[c] = amp * s;
                        row[cells + c] = amp * (1.0 - co);
                    }
                    row
                })
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, i);
                    let z: Vec<f64> = (0..2 * cells)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect();
                    coeffs
                        .iter()
                        .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
                        .collect()
                })
                .collect()
        }
    };
    let dim = k + directions.len();
    let draws = DMatrix::from_fn(n, dim, |i, j| rows[i][j]);
    Ok(PathEnsemble {
        times: times.to_vec(),
        extra_directions: directions.iter().map(TestFunction::label).collect(),
        draws,
        seed,
        method,
    })
}

/// Unbiased sample covariance with jackknife standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCovariance {
    pub covariance: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
}

pub fn empirical_covariance(e: &PathEnsemble) -> Result<EmpiricalCovariance> {
    if e.n() < 2 {
        return Err(Error::Validation(
            "empirical covariance needs at least two draws".into(),
        ));
    }
    let (covariance, stderr) = stats::covariance_matrix(&e.draws);
    Ok(EmpiricalCovariance { covariance, stderr })
}

/// Fraction of entries with `|est - want| <= z * se`.
pub fn fraction_within(est: &DMatrix<f64>, want: &DMatrix<f64>, se: &DMatrix<f64>, z: f64) -> f64 {
    let total = est.len();
    let ok = est
        .iter()
        .zip(want.iter())
        .zip(se.iter())
        .filter(|((a, b), s)| (*a - *b).abs() <= z * **s)
        .count();
    ok as f64 / total as f64
}

/// Weighted statistics of the shifted process under `:e^{<omega, f>}:`.
#[derive(Debug, Clone, Serialize)]
pub struct GirsanovReport {
    pub times: Vec<f64>,
    pub direction: String,
    pub n: usize,
    pub seed: u64,
    /// `(T_m f, T_m 1_t)`.
    pub shift: Vec<f64>,
    /// Estimates of `E[w (B(t) - shift(t))]`.
    pub weighted_mean: Vec<f64>,
    pub weighted_mean_stderr: Vec<f64>,
    /// Estimates of `E[w B~(t) B~(s)]`.
    pub weighted_covariance: Vec<Vec<f64>>,
    pub weighted_covariance_stderr: Vec<Vec<f64>>,
    pub analytic_covariance: Vec<Vec<f64>>,
    pub fraction_cov_within_3se: f64,
    pub max_mean_z: f64,
    pub mean_weight: f64,
    pub mean_weight_stderr: f64,
    pub effective_sample_size: f64,
    pub warning: Option<String>,
    pub pass: bool,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    (stats::mean(xs), stats::stderr_of_mean(xs))
}

/// Draws `(B(t), <omega, f>)`, weights each draw by
/// `exp(<omega, f> - ||T_m f||^2 / 2)` and checks that
/// `B~(t) = B(t) - (T_m f, T_m 1_t)` is centered with covariance `K_m`.
pub fn girsanov_check(
    kernel: &Kernel,
    f: &TestFunction,
    times: &[f64],
    n: usize,
    seed: u64,
) -> Result<GirsanovReport> {
    let ens = sample(
        kernel,
        times,
        std::slice::from_ref(f),
        n,
        seed,
        Method::Cholesky,
    )?;
    let k = times.len();
    let vf = kernel.inner_product(f, f)?;
    let shift: Vec<f64> = times
        .iter()
        .map(|&t| kernel.inner_product(f, &unit_indicator(t)))
        .collect::<Result<_>>()?;
    let xf = ens.column(k);
    let w: Vec<f64> = xf.iter().map(|x| (x - 0.5 * vf).exp()).collect();
    let tilde: Vec<Vec<f64>> = (0..k)
        .map(|j| ens.column(j).iter().map(|b| b - shift[j]).collect())
        .collect();
    let mut weighted_mean = Vec::with_capacity(k);
    let mut weighted_mean_stderr = Vec::with_capacity(k);
    for col in &tilde {
        let prod: Vec<f64> = col.iter().zip(&w).map(|(b, wi)| b * wi).collect();
        let (m, s) = mean_and_se(&prod);
        weighted_mean.push(m);
        weighted_mean_stderr.push(s);
    }
    let analytic = kernel.gram(times)?.values;
    let mut cov = vec![vec![0.0; k]; k];
    let mut cov_se = vec![vec![0.0; k]; k];
    let mut within = 0usize;
    for i in 0..k {
        for j in 0..k {
            let prod: Vec<f64> = (0..n).map(|r| w[r] * tilde[i][r] * tilde[j][r]).collect();
            let (m, s) = mean_and_se(&prod);
            cov[i][j] = m;
            cov_se[i][j] = s;
            if (m - analytic[(i, j)]).abs() <= 3.0 * s {
                within += 1;
            }
        }
    }
    let (mean_weight, mean_weight_stderr) = mean_and_se(&w);
    let sum_w = pairwise_sum(&w);
    let sum_w2 = pairwise_sum(&w.iter().map(|x| x * x).collect::<Vec<_>>());
    let ess = sum_w * sum_w / sum_w2;
    let warning = (ess < n as f64 / 10.0).then(|| {
        format!("effective sample size {ess:.1} is below n/10; weighted estimates are unreliable")
    });
    let max_mean_z = weighted_mean
        .iter()
        .zip(&weighted_mean_stderr)
        .map(|(m, s)| {
            if *s > 0.0 {
                (m / s).abs()
            } else if *m == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let fraction = within as f64 / (k * k) as f64;
    let weight_ok =
        (mean_weight - 1.0).abs() <= 5.0 * mean_weight_stderr.max(1e-300) || (mean_weight == 1.0);
    let pass = max_mean_z <= 5.0 && fraction >= 0.95 && weight_ok;
    Ok(GirsanovReport {
        times: times.to_vec(),
        direction: f.label(),
        n,
        seed,
        shift,
        weighted_mean,
        weighted_mean_stderr,
        weighted_covariance: cov,
        weighted_covariance_stderr: cov_se,
        analytic_covariance: (0..k)
            .map(|i| (0..k).map(|j| analytic[(i, j)]).collect())
            .collect(),
        fraction_cov_within_3se: fraction,
        max_mean_z,
        mean_weight,
        mean_weight_stderr,
        effective_sample_size: ess,
        warning,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelConfig;

    fn kernel(m: SpectralDensity) -> Kernel {
        Kernel::new(m, KernelConfig::default()).unwrap()
    }

    #[test]
    fn determinism() {
        let k = kernel(SpectralDensity::fractional(0.7).unwrap());
        let a = sample(&k, &[0.5, 1.0], &[], 1, 42, Method::Cholesky).unwrap();
        let b = sample(&k, &[0.5, 1.0], &[], 1, 42, Method::Cholesky).unwrap();
        assert_eq!(a, b);
        let c = sample(&k, &[0.5, 1.0], &[], 1, 43, Method::Cholesky).unwrap();
        assert_ne!(a.draws, c.draws);
        // A longer run reproduces the first draws.
        let long = sample(&k, &[0.5, 1.0], &[], 50, 42, Method::Cholesky).unwrap();
        assert_eq!(long.draws.row(0), a.draws.row(0));
    }

    #[test]
    fn white_variance() {
        let k = kernel(SpectralDensity::white());
        let n = 100_000;
        let e = sample(&k, &[1.0], &[], n, 7, Method::Cholesky).unwrap();
        let v = stats::covariance(&e.column(0), &e.column(0));
        assert!((v - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "{v}");
        let mean = stats::mean(&e.column(0));
        assert!(mean.abs() < 5.0 * stats::stderr_of_mean(&e.column(0)));
    }

    #[test]
    fn fractional_correlation() {
        let k = kernel(SpectralDensity::fractional(0.75).unwrap());
        let e = sample(&k, &[1.0, 2.0], &[], 20_000, 11, Method::Cholesky).unwrap();
        let g = k.gram(&[1.0, 2.0]).unwrap().values;
        let rho = g[(0, 1)] / (g[(0, 0)] * g[(1, 1)]).sqrt();
        let (x, y) = (e.column(0), e.column(1));
        let r = stats::covariance(&x, &y)
            / (stats::covariance(&x, &x) * stats::covariance(&y, &y)).sqrt();
        let se = (1.0 - rho * rho) / (e.n() as f64).sqrt();
        assert!((r - rho).abs() < 3.0 * se, "{r} {rho}");
    }

    #[test]
    fn spectral_design_matches_kernel() {
        for m in [
            SpectralDensity::white(),
            SpectralDensity::fractional(0.7).unwrap(),
            SpectralDensity::band_limited(1.0).unwrap(),
        ] {
            let k = kernel(m);
            let times: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
            let s =
                SpectralSynthesis::design(&k, &times, SPECTRAL_TOL, SPECTRAL_MAX_CELLS).unwrap();
            assert!(
                s.max_rel_error <= SPECTRAL_TOL,
                "{:?} {}",
                k.density(),
                s.max_rel_error
            );
        }
    }

    #[test]
    fn spectral_refuses_directions() {
        let k = kernel(SpectralDensity::white());
        let f = TestFunction::indicator(0.0, 1.0);
        assert!(matches!(
            sample(&k, &[1.0], &[f], 10, 1, Method::Spectral),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn wiener_integral_column() {
        let k = kernel(SpectralDensity::white());
        let f = TestFunction::indicator(0.0, 1.0);
        let e = sample(
            &k,
            &[1.0, 2.0],
            std::slice::from_ref(&f),
            2000,
            5,
            Method::Cholesky,
        )
        .unwrap();
        // <omega, 1_[0,1)> is B(1) itself.
        let b1 = e.column(0);
        let x = e.direction_column(&f.label()).unwrap();
        let gap = b1
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-6, "{gap}");
        assert!(matches!(
            e.direction_column("nope"),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn girsanov_zero_direction() {
        let k = kernel(SpectralDensity::white());
        let rep = girsanov_check(&k, &TestFunction::zero(), &[0.5, 1.0], 5000, 3).unwrap();
        assert!(rep.mean_weight == 1.0);
        assert!(rep.shift.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn girsanov_white() {
        let k = kernel(SpectralDensity::white());
        let f = TestFunction::indicator(0.0, 1.0);
        let rep = girsanov_check(&k, &f, &[0.25, 0.5, 1.0, 1.5], 40_000, 9).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.warning.is_none());
    }

    #[test]
    fn empirical_covariance_small() {
        let e = PathEnsemble {
            times: vec![1.0],
            extra_directions: vec![],
            draws: DMatrix::from_row_slice(2, 1, &[0.0, 2.0]),
            seed: 0,
            method: Method::Cholesky,
        };
        assert_eq!(empirical_covariance(&e).unwrap().covariance[(0, 0)], 2.0);
    }
}
