//! The Fourier multiplier `T_m f = F^{-1}(sqrt(m) f^)` on sampled functions.
//!
//! Samples are zero-padded (centered) to a power of two at least four times
//! the input length. On the DFT grid `xi_k = 2 pi k / (M h)` the transform is
//! approximated by `h sum_j f_j e^{-i xi_k t_j}`, and `m` is replaced by its
//! average over each frequency bin, which keeps integrable singularities at
//! the origin under control.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::GridFunction;
use crate::quadrature::{pairwise_sum, Adaptive};
use crate::spectral::SpectralDensity;

/// Outcome of [`domain_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainReport {
    /// `\int m |f^|^2` converged under doubling of the frequency cutoff.
    pub in_domain: bool,
    /// `\int m |f^|^2` over the full DFT band.
    pub weighted_norm: f64,
    /// `sup (1 + xi^2) |f^(xi)|^2` stayed bounded when the band doubled.
    pub sufficient: bool,
}

struct Spectrum {
    step: f64,
    len: usize,
    /// Start of the padded grid.
    start: f64,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    fn freq(&self, k: usize) -> f64 {
        let kk = if k <= self.len / 2 {
            k as f64
        } else {
            k as f64 - self.len as f64
        };
        2.0 * PI * kk / (self.len as f64 * self.step)
    }
}

fn padded_len(n: usize) -> usize {
    (4 * n).next_power_of_two().max(8)
}

/// DFT of samples placed at `offset` inside a zero array of length `len`.
fn forward(samples: &[f64], offset: usize, len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, v) in samples.iter().enumerate() {
        buf[offset + i] = Complex64::new(*v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf
}

fn spectrum(f: &GridFunction) -> Spectrum {
    let len = padded_len(f.len());
    let offset = (len - f.len()) / 2;
    Spectrum {
        step: f.step,
        len,
        start: f.start - offset as f64 * f.step,
        coeffs: forward(&f.samples, offset, len),
    }
}

/// Two grid functions on one common padded grid.
fn joint_spectra(f: &GridFunction, g: &GridFunction) -> Result<(Spectrum, Spectrum)> {
    let h = f.step;
    if (g.step - h).abs() > 1e-12 * h {
        return Err(Error::Validation(format!(
            "grid steps differ: {} vs {}",
            f.step, g.step
        )));
    }
    let shift = (g.start - f.start) / h;
    if (shift - shift.round()).abs() > 1e-6 {
        return Err(Error::Validation(
            "grids are not aligned on a common lattice".into(),
        ));
    }
    let shift = shift.round() as i64;
    let lo = 0.min(shift);
    let hi = (f.len() as i64).max(shift + g.len() as i64);
    let span = (hi - lo) as usize;
    let len = padded_len(span);
    let base = (len - span) / 2;
    let start = f.start + lo as f64 * h - base as f64 * h;
    let off_f = (base as i64 - lo) as usize;
    let off_g = (base as i64 - lo + shift) as usize;
    let sf = Spectrum {
        step: h,
        len,
        start,
        coeffs: forward(&f.samples, off_f, len),
    };
    let sg = Spectrum {
        step: h,
        len,
        start,
        coeffs: forward(&g.samples, off_g, len),
    };
    Ok((sf, sg))
}

/// Average of `m` over `[a, b]`, `0 <= a < b`.
fn bin_average(m: &SpectralDensity, a: f64, b: f64) -> Result<f64> {
    if let Some(beta) = m.power_law_exponent() {
        let edge = m.support().unwrap_or(f64::INFINITY);
        let hi = b.min(edge);
        if hi <= a {
            return Ok(0.0);
        }
        let p = beta + 1.0;
        return Ok((hi.powf(p) - a.powf(p)) / p / (b - a));
    }
    let quad = Adaptive::new(1e-15, 1e-12, 10_000);
    let v = if a == 0.0 {
        quad.integrate_graded(|x| m.eval(x), b, 60)?.value
    } else {
        quad.integrate(|x| m.eval(x), a, b)?.value
    };
    Ok(v / (b - a))
}

/// Bin-averaged `m` on the DFT grid; `T_m` multiplies bin `k` by its square
/// root.
fn weights(m: &SpectralDensity, step: f64, len: usize) -> Result<Vec<f64>> {
    let dxi = 2.0 * PI / (len as f64 * step);
    let nyquist = PI / step;
    if let Some(delta) = m.support() {
        if delta < nyquist && delta < 2.0 * dxi {
            return Err(Error::GridResolution(format!(
                "band edge {delta} is narrower than two frequency bins of width {dxi}; lengthen the grid"
            )));
        }
    }
    let half = len / 2;
    let mut pos = Vec::with_capacity(half + 1);
    pos.push(bin_average(m, 0.0, 0.5 * dxi)?);
    for k in 1..=half {
        let c = k as f64 * dxi;
        pos.push(bin_average(m, c - 0.5 * dxi, c + 0.5 * dxi)?);
    }
    Ok((0..len)
        .map(|k| if k <= half { pos[k] } else { pos[len - k] })
        .collect())
}

/// Domain membership of `f` for `T_m`, by comparing the weighted norm over
/// half and full DFT bands.
pub fn domain_check(m: &SpectralDensity, f: &GridFunction) -> Result<DomainReport> {
    let sp = spectrum(f);
    let mult = weights(m, sp.step, sp.len)?;
    Ok(domain_from(&sp, &mult))
}

fn domain_from(sp: &Spectrum, mw: &[f64]) -> DomainReport {
    let nyquist = PI / sp.step;
    let scale = sp.step / sp.len as f64;
    let mut full = Vec::with_capacity(sp.len);
    let mut half = Vec::with_capacity(sp.len);
    let (mut sup_full, mut sup_half) = (0.0_f64, 0.0_f64);
    for k in 0..sp.len {
        let xi = sp.freq(k);
        let power = sp.coeffs[k].norm_sqr();
        let w = mw[k] * power * scale;
        full.push(w);
        // |f^|^2 = h^2 |X_k|^2 / (2 pi)
        let growth = (1.0 + xi * xi) * power * sp.step * sp.step / (2.0 * PI);
        sup_full = sup_full.max(growth);
        if xi.abs() <= 0.5 * nyquist {
            half.push(w);
            sup_half = sup_half.max(growth);
        }
    }
    let weighted_norm = pairwise_sum(&full);
    let weighted_half = pairwise_sum(&half);
    let in_domain = weighted_norm.is_finite()
        && (weighted_norm == 0.0 || (weighted_norm - weighted_half).abs() < 1e-3 * weighted_norm);
    let sufficient = sup_full.is_finite() && sup_full <= 4.0 * sup_half + 1e-300;
    DomainReport {
        in_domain,
        weighted_norm,
        sufficient,
    }
}

/// `T_m f` on the padded grid.
pub fn apply_tm(m: &SpectralDensity, f: &GridFunction) -> Result<GridFunction> {
    let sp = spectrum(f);
    let mult = weights(m, sp.step, sp.len)?;
    let report = domain_from(&sp, &mult);
    if !report.in_domain {
        return Err(Error::DomainViolation(format!(
            "\\int m |f^|^2 has not converged at the grid Nyquist frequency for `{}`",
            f.label
        )));
    }
    let mut buf: Vec<Complex64> = sp
        .coeffs
        .iter()
        .zip(&mult)
        .map(|(c, w)| c * w.sqrt())
        .collect();
    FftPlanner::new().plan_fft_inverse(sp.len).process(&mut buf);
    let inv = 1.0 / sp.len as f64;
    let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-9 * max_re.max(1e-300) && max_im * inv > 1e-300 {
        return Err(Error::Validation(format!(
            "T_m f has imaginary residue {:e} relative to {:e}",
            max_im * inv,
            max_re * inv
        )));
    }
    let samples = buf.iter().map(|c| c.re * inv).collect();
    GridFunction::new(sp.start, sp.step, samples, format!("T_m[{}]", f.label))
}

/// `(T_m f, T_m g)` by discrete Parseval on a common padded grid.
pub fn inner_product_fft(m: &SpectralDensity, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let (sf, sg) = joint_spectra(f, g)?;
    let mult = weights(m, sf.step, sf.len)?;
    for (sp, label) in [(&sf, &f.label), (&sg, &g.label)] {
        if !domain_from(sp, &mult).in_domain {
            return Err(Error::DomainViolation(format!(
                "`{label}` is not in the domain of T_m"
            )));
        }
    }
    let scale = sf.step / sf.len as f64;
    let mut re = Vec::with_capacity(sf.len);
    let mut im = Vec::with_capacity(sf.len);
    for k in 0..sf.len {
        let w = mult[k] * scale;
        let z = sf.coeffs[k] * sg.coeffs[k].conj() * w;
        re.push(z.re);
        im.push(z.im);
    }
    let (re, im) = (pairwise_sum(&re), pairwise_sum(&im));
    let norm = (f.grid_norm_sq() * g.grid_norm_sq()).sqrt();
    if im.abs() > 1e-10 * re.abs().max(norm) {
        return Err(Error::Validation(format!(
            "inner product has imaginary part {im:e}"
        )));
    }
    Ok(re)
}
