//! The variance function `r(t) = ||T_m 1_t||^2`, the covariance
//! `K_m(t, s) = (T_m 1_t, T_m 1_s)`, general `T_m` inner products and Gram
//! matrices.
//!
//! With the unitary Fourier transform,
//!
//! ```text
//! (T_m f, T_m g) = \int m(xi) f^(xi) conj(g^(xi)) d xi
//! r(t)           = (2 / pi) \int_0^inf (1 - cos t xi) m(xi) / xi^2 d xi
//! K_m(t, s)      = (r(t) + r(s) - r(t - s)) / 2
//! ```
//!
//! so `m == 1` gives `K = min(t, s)`. For `t < 0` the indicator `1_t` is
//! `-1_[t, 0)`, which keeps the last formula valid for all signs.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{GridFunction, TestFunction};
use crate::quadrature::{self, Adaptive};
use crate::spectral::SpectralDensity;

/// Numerical settings shared by the kernel routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Frequency cutoff (rad/s) for the explicit part of oscillatory
    /// integrals. For `r(t)` it is raised to at least `2000 / |t|`.
    pub freq_cutoff: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub graded_mesh_levels: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            freq_cutoff: 1000.0,
            abs_tol: 1e-13,
            max_panels: 20_000,
            graded_mesh_levels: 60,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq_cutoff > 0.0 && self.freq_cutoff.is_finite()) {
            return Err(Error::config("kernel.freq_cutoff", "must be positive"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::config("kernel.abs_tol", "must be positive"));
        }
        if self.max_panels < 16 {
            return Err(Error::config("kernel.max_panels", "must be at least 16"));
        }
        if self.graded_mesh_levels < 8 {
            return Err(Error::config(
                "kernel.graded_mesh_levels",
                "must be at least 8",
            ));
        }
        Ok(())
    }

    pub(crate) fn quad(&self) -> Adaptive {
        Adaptive::new(self.abs_tol, 1e-12, self.max_panels)
    }
}

// (1 - cos u) / u^2 without cancellation.
fn one_minus_cos_over_sq(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        0.5 - u * u / 24.0
    } else {
        let s = (0.5 * u).sin();
        2.0 * s * s / (u * u)
    }
}

/// A weight `w(xi)` on the half line, with what is known about it.
struct Weight<'a> {
    eval: &'a dyn Fn(f64) -> f64,
    /// `w(xi) = xi^p` exactly inside the support.
    exponent: Option<f64>,
    support: Option<f64>,
}

impl Weight<'_> {
    fn derivatives(&self, x: f64) -> [f64; 4] {
        match self.exponent {
            Some(p) => {
                let v = x.powf(p);
                [
                    v,
                    p * v / x,
                    p * (p - 1.0) * v / (x * x),
                    p * (p - 1.0) * (p - 2.0) * v / (x * x * x),
                ]
            }
            None => {
                let w = self.eval;
                let d = 0.05 * x;
                let (m2, m1, c, p1, p2) =
                    (w(x - 2.0 * d), w(x - d), w(x), w(x + d), w(x + 2.0 * d));
                [
                    c,
                    (p1 - m1) / (2.0 * d),
                    (p1 - 2.0 * c + m1) / (d * d),
                    (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * d * d * d),
                ]
            }
        }
    }
}

/// `\int_c^inf w(xi) cos(d xi) d xi` for a weight decaying at least like an
/// integrable power.
fn cos_tail(w: &Weight<'_>, d: f64, c: f64, quad: &Adaptive, levels: usize) -> Result<f64> {
    let d = d.abs();
    if let Some(s) = w.support {
        if s <= c {
            return Ok(0.0);
        }
        let mut pts = vec![c];
        let step = if d > 0.0 { PI / d } else { s - c };
        let mut x = c + step;
        while x < s {
            pts.push(x);
            x += step;
        }
        pts.push(s);
        return Ok(quad
            .integrate_breaks(|x| (w.eval)(x) * (d * x).cos(), &pts)?
            .value);
    }
    if d == 0.0 {
        return match w.exponent {
            Some(p) if p < -1.0 => Ok(c.powf(p + 1.0) / (-p - 1.0)),
            Some(p) => Err(Error::Divergence(format!(
                "\\int xi^{p} diverges at infinity"
            ))),
            None => Ok(quad.integrate_tail(|x| (w.eval)(x), c, levels)?.value),
        };
    }
    // Smooth stretch up to 1/d, then 64 half-periods, then the asymptotic
    // expansion from repeated integration by parts.
    let x0 = c.max(1.0 / d);
    let mut pts = vec![c];
    let mut x = c;
    while x * 2.0 < x0 {
        x *= 2.0;
        pts.push(x);
    }
    if x0 > c {
        pts.push(x0);
    }
    for k in 1..=64 {
        pts.push(x0 + k as f64 * PI / d);
    }
    let end = *pts.last().expect("non-empty");
    let body = quad
        .integrate_breaks(|x| (w.eval)(x) * (d * x).cos(), &pts)?
        .value;
    let [g0, g1, g2, g3] = w.derivatives(end);
    let (s, co) = (d * end).sin_cos();
    let tail = -g0 * s / d - g1 * co / (d * d) + g2 * s / (d * d * d) + g3 * co / (d * d * d * d);
    Ok(body + tail)
}

/// `r(t) = ||T_m 1_t||^2`.
pub fn variance_r(m: &SpectralDensity, t: f64, cfg: &KernelConfig) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "t = {t} must be finite"
        )));
    }
    let a = t.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let quad = cfg.quad();
    let levels = cfg.graded_mesh_levels;
    // Work in u = a xi, where the oscillation has unit frequency.
    let g = |u: f64| {
        let mv = m.eval(u / a);
        if mv == 0.0 {
            0.0
        } else {
            mv * one_minus_cos_over_sq(u)
        }
    };
    let u_end = m.support().map(|s| s * a);
    let head_end = u_end.map_or(1.0, |e| e.min(1.0));
    let head = if m.origin_exponent().abs() > 1e-12 {
        quad.integrate_graded(g, head_end, levels)?.value
    } else {
        quad.integrate(g, 0.0, head_end)?.value
    };
    let upper = match u_end {
        Some(e) => e,
        None => (cfg.freq_cutoff * a)
            .max(2000.0)
            .min(PI * cfg.max_panels as f64 / 4.0),
    };
    let mut body = 0.0;
    if upper > head_end {
        let mut pts = vec![head_end];
        let mut k = 1.0;
        while k * PI < upper {
            if k * PI > head_end {
                pts.push(k * PI);
            }
            k += 1.0;
        }
        pts.push(upper);
        body = quad.integrate_breaks(g, &pts)?.value;
    }
    let mut tail = 0.0;
    if u_end.is_none() {
        let big_g = |xi: f64| m.eval(xi) / (xi * xi);
        let w = Weight {
            eval: &big_g,
            exponent: m.power_law_exponent().map(|b| b - 2.0),
            support: None,
        };
        let c = upper / a;
        // \int_U^inf g(u) (1 - cos u) du in the original variable.
        tail = (cos_tail(&w, 0.0, c, &quad, levels)? - cos_tail(&w, a, c, &quad, levels)?) / a;
    }
    Ok(2.0 / PI * a * (head + body + tail))
}

/// `K_m(t, s) = (T_m 1_t, T_m 1_s)`.
pub fn covariance(m: &SpectralDensity, t: f64, s: f64, cfg: &KernelConfig) -> Result<f64> {
    Kernel::new(m.clone(), *cfg)?.covariance(t, s)
}

/// `d^2 K / dt ds` as a function of `tau = t - s`, i.e.
/// `(1 / pi) \int_0^inf cos(tau xi) m(xi) d xi`. Requires `\int m < inf`.
pub fn stationary_derivative_cov(m: &SpectralDensity, tau: f64, cfg: &KernelConfig) -> Result<f64> {
    let quad = cfg.quad();
    let levels = cfg.graded_mesh_levels;
    if let Some(delta) = m.support() {
        let v = m.integrate_half_line(|x| (tau * x).cos(), delta, &quad, levels)?;
        return Ok(v / PI);
    }
    if m.power_law_exponent().is_some() {
        return Err(Error::Divergence(format!(
            "\\int m diverges for {}; the derivative process does not exist",
            m.label()
        )));
    }
    let c = cfg.freq_cutoff;
    let eval = |x: f64| m.eval(x);
    let w = Weight {
        eval: &eval,
        exponent: None,
        support: None,
    };
    let total =
        m.integrate_half_line(|_| 1.0, c, &quad, levels)? + cos_tail(&w, 0.0, c, &quad, levels)?;
    if !total.is_finite() {
        return Err(Error::Divergence(format!(
            "\\int m diverges for {}",
            m.label()
        )));
    }
    let body = m.integrate_half_line(|x| (tau * x).cos(), c, &quad, levels)?;
    Ok((body + cos_tail(&w, tau, c, &quad, levels)?) / PI)
}

/// `(T_m f, T_m g)` for sampled functions, by the FFT route.
pub fn inner_product_tm(
    m: &SpectralDensity,
    f: &GridFunction,
    g: &GridFunction,
    _cfg: &KernelConfig,
) -> Result<f64> {
    crate::operator_tm::inner_product_fft(m, f, g)
}

/// `(T_m f, T_m g)` from exact Fourier transforms.
pub fn inner_product(
    m: &SpectralDensity,
    f: &TestFunction,
    g: &TestFunction,
    cfg: &KernelConfig,
) -> Result<f64> {
    Kernel::new(m.clone(), *cfg)?.inner_product(f, g)
}

/// Nodes and weights for `\int_0^upper m(xi) phi(xi) d xi`, accurate for
/// integrands oscillating like `e^{i xi u}` with `|u| <= horizon`.
///
/// The weights include `m`. Near the origin the mesh is graded geometrically;
/// the leftover `[0, eps]` is folded into `origin_mass`, to be multiplied by
/// `phi(0)`.
#[derive(Debug, Clone)]
pub struct FrequencyRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub origin_mass: f64,
}

impl FrequencyRule {
    pub fn build(
        m: &SpectralDensity,
        upper: f64,
        horizon: f64,
        levels: usize,
    ) -> Result<FrequencyRule> {
        let upper = m.support().map_or(upper, |s| s.min(upper));
        if !(upper > 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "frequency rule upper bound {upper}"
            )));
        }
        let width = (4.0 / horizon.max(1e-9)).min(0.25);
        let panel = quadrature::legendre(20);
        let graded = quadrature::legendre(12);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut push = |rule: &quadrature::GaussRule, a: f64, b: f64| {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let xi = mid + half * x;
                let mv = m.eval(xi);
                if mv != 0.0 {
                    nodes.push(xi);
                    weights.push(w * half * mv);
                }
            }
        };
        let first = width.min(upper);
        let mut origin_mass = 0.0;
        if m.origin_exponent().abs() > 1e-12 {
            let mut hi = first;
            for _ in 0..levels {
                push(&graded, 0.5 * hi, hi);
                hi *= 0.5;
            }
            origin_mass = m.mass_near_origin(hi);
        } else {
            push(&panel, 0.0, first);
        }
        let count = ((upper - first) / width).ceil() as usize;
        for k in 0..count {
            let a = first + k as f64 * width;
            push(&panel, a, (a + width).min(upper));
        }
        Ok(FrequencyRule {
            nodes,
            weights,
            origin_mass,
        })
    }

    /// `(1 / pi) (sum w_i Re(F(xi_i) conj G(xi_i)) + origin_mass F(0) G(0))`
    /// with `F`, `G` the non-unitary transforms.
    pub fn pair(&self, f: &TestFunction, g: &TestFunction) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&xi, &w)| w * (f.fourier(xi) * g.fourier(xi).conj()).re)
            .collect();
        let origin = self.origin_mass * f.integral() * g.integral();
        (quadrature::pairwise_sum(&terms) + origin) / PI
    }
}

/// Symmetric covariance matrix of `(B_m(t_1), ..., B_m(t_k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
    /// Diagonal shift added before the Cholesky factorization succeeded.
    pub jitter_used: f64,
}

/// Lower Cholesky factor of `mat + jitter I`, with the smallest jitter from
/// `{0, 1e-14, 1e-12, 1e-10, 1e-8} * max diag` that works.
pub fn cholesky_with_jitter(mat: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = mat.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let max_diag = (0..n).map(|i| mat[(i, i)]).fold(0.0_f64, f64::max);
    let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
    let mut last = 0.0;
    for factor in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let jitter = factor * scale;
        let mut shifted = mat.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::linalg::Cholesky::new(shifted) {
            let l = ch.l();
            if l.iter().all(|v| v.is_finite()) {
                return Ok((l, jitter));
            }
        }
        last = jitter;
    }
    Err(Error::NotPositiveDefinite { jitter: last })
}

/// A density plus settings, with a cache of `r` values.
pub struct Kernel {
    density: SpectralDensity,
    cfg: KernelConfig,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Kernel {
    pub fn new(density: SpectralDensity, cfg: KernelConfig) -> Result<Kernel> {
        cfg.validate()?;
        Ok(Kernel {
            density,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn density(&self) -> &SpectralDensity {
        &self.density
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn r(&self, t: f64) -> Result<f64> {
        let key = t.abs().to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = variance_r(&self.density, t, &self.cfg)?;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    /// Evaluates `r` at many points in parallel, filling the cache.
    pub fn r_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        let mut keys: Vec<f64> = ts.iter().map(|t| t.abs()).collect();
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let missing: Vec<f64> = {
            let cache = self.cache.lock().expect("cache lock");
            keys.into_iter()
                .filter(|k| !cache.contains_key(&k.to_bits()))
                .collect()
        };
        let computed: Vec<Result<f64>> = missing
            .par_iter()
            .map(|&t| variance_r(&self.density, t, &self.cfg))
            .collect();
        {
            let mut cache = self.cache.lock().expect("cache lock");
            for (t, v) in missing.iter().zip(computed) {
                cache.insert(t.to_bits(), v?);
            }
        }
        ts.iter().map(|&t| self.r(t)).collect()
    }

    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        if t == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        Ok(0.5 * (self.r(t)? + self.r(s)? - self.r(t - s)?))
    }

    /// `(T_m 1_[a, b), T_m 1_[c, d))`.
    pub fn indicator_pairing(&self, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
        if b <= a || d <= c {
            return Ok(0.0);
        }
        let terms = [
            self.r(b - c)?,
            self.r(a - d)?,
            -self.r(b - d)?,
            -self.r(a - c)?,
        ];
        Ok(0.5 * quadrature::pairwise_sum(&terms))
    }

    /// `(T_m f, T_m g)`.
    pub fn inner_product(&self, f: &TestFunction, g: &TestFunction) -> Result<f64> {
        if f.is_zero() || g.is_zero() {
            return Ok(0.0);
        }
        if let (
            TestFunction::Indicator {
                start: a,
                end: b,
                scale: x,
            },
            TestFunction::Indicator {
                start: c,
                end: d,
                scale: y,
            },
        ) = (f, g)
        {
            return Ok(x * y * self.indicator_pairing(*a, *b, *c, *d)?);
        }
        let (fa, fb) = f.support();
        let (ga, gb) = g.support();
        let horizon = (fb - ga).abs().max((gb - fa).abs()).max(1.0);
        let bump_width = [f, g]
            .iter()
            .filter_map(|h| match h {
                TestFunction::Bump { width, .. } => Some(*width),
                _ => None,
            })
            .fold(None, |acc: Option<f64>, w| {
                Some(acc.map_or(w, |a| a.max(w)))
            });
        let levels = self.cfg.graded_mesh_levels;
        if let Some(w) = bump_width {
            let rule = FrequencyRule::build(&self.density, 10.0 / w, horizon, levels)?;
            return Ok(rule.pair(f, g));
        }
        let cutoff = self.cfg.freq_cutoff;
        let rule = FrequencyRule::build(&self.density, cutoff, horizon, levels)?;
        let mut value = rule.pair(f, g);
        if self.density.support().map_or(true, |s| s > cutoff) {
            // Jump discontinuities give transforms ~ J e^{-i xi u} / (i xi);
            // their products carry the tail beyond the cutoff.
            let quad = self.cfg.quad();
            let m = &self.density;
            let eval = |xi: f64| m.eval(xi) / (xi * xi);
            let w = Weight {
                eval: &eval,
                exponent: m.power_law_exponent().map(|b| b - 2.0),
                support: m.support(),
            };
            let mut tails = HashMap::new();
            let mut terms = Vec::new();
            for (u, j) in f.jumps() {
                for (v, k) in g.jumps() {
                    let d = (u - v).abs();
                    let t = match tails.get(&d.to_bits()) {
                        Some(t) => *t,
                        None => {
                            let t = cos_tail(&w, d, cutoff, &quad, levels)?;
                            tails.insert(d.to_bits(), t);
                            t
                        }
                    };
                    terms.push(j * k * t);
                }
            }
            value += quadrature::pairwise_sum(&terms) / PI;
        }
        Ok(value)
    }

    /// Gram matrix of `B_m` at distinct times, entries computed independently
    /// in parallel.
    pub fn gram(&self, times: &[f64]) -> Result<GramMatrix> {
        check_distinct(times)?;
        let k = times.len();
        let mut needed: Vec<f64> = times.to_vec();
        for i in 0..k {
            for j in 0..i {
                needed.push(times[i] - times[j]);
            }
        }
        self.r_many(&needed)?;
        let mut values = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = self.covariance(times[i], times[j])?;
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        let (_, jitter_used) = cholesky_with_jitter(&values)?;
        Ok(GramMatrix {
            times: times.to_vec(),
            values,
            jitter_used,
        })
    }
}

pub(crate) fn check_distinct(times: &[f64]) -> Result<()> {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Validation(format!("time {} appears twice", w[0])));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::Validation(format!("time {t} is not finite")));
    }
    Ok(())
}

/// Gram matrix of `B_m` at distinct times.
pub fn gram(m: &SpectralDensity, times: &[f64], cfg: &KernelConfig) -> Result<GramMatrix> {
    Kernel::new(m.clone(), *cfg)?.gram(times)
}

/// `c_H` in `r(t) = c_H |t|^{2H}` for `m = |xi|^{1 - 2H}`.
pub fn fractional_constant(hurst: f64) -> f64 {
    1.0 / (lanczos_gamma(1.0 + 2.0 * hurst) * (PI * hurst).sin())
}

// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 on (0.5, 3).
fn lanczos_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * lanczos_gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> KernelConfig {
        KernelConfig::default()
    }

    // \int_0^inf (1 - cos u) u^{-1-alpha} du, alpha in (0, 2), by graded
    // quadrature on (0, 1] plus closed-form tail pieces.
    fn fractional_oracle(hurst: f64) -> f64 {
        let alpha = 2.0 * hurst;
        let q = Adaptive::new(1e-14, 1e-13, 100_000);
        let f = |u: f64| one_minus_cos_over_sq(u) * u.powf(1.0 - alpha);
        let head = q.integrate_graded(f, 1.0, 80).unwrap().value;
        // [1, 4000 pi] by half-periods, the rest: \int u^{-1-alpha} minus an
        // integration-by-parts estimate of the cosine part.
        let end = 4000.0 * PI;
        let mut pts = vec![1.0];
        let mut k = 1.0;
        while k * PI < end {
            pts.push(k * PI);
            k += 1.0;
        }
        pts.push(end);
        let body = q.integrate_breaks(f, &pts).unwrap().value;
        let p = -1.0 - alpha;
        let tail_plain = end.powf(p + 1.0) / (-p - 1.0);
        let tail_cos = -p * end.powf(p - 1.0); // -g sin(end) - g' cos(end), sin = 0, cos = 1
        let integral = head + body + tail_plain - tail_cos;
        2.0 / PI * integral
    }

    #[test]
    fn fractional_constant_matches_oracle() {
        for h in [0.3, 0.5, 0.6, 0.75, 0.9] {
            let oracle = fractional_oracle(h);
            assert!(
                (oracle - fractional_constant(h)).abs() < 1e-9 * oracle,
                "H={h}"
            );
            let via_statrs = 1.0 / (statrs::function::gamma::gamma(1.0 + 2.0 * h) * (PI * h).sin());
            assert!((via_statrs - fractional_constant(h)).abs() < 1e-12 * via_statrs);
        }
        assert!((fractional_constant(0.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn white_r_is_abs_t() {
        let m = SpectralDensity::white();
        for t in [1e-6, 0.01, 0.5, 1.5, 3.0, 17.0, -2.5] {
            let r = variance_r(&m, t, &cfg()).unwrap();
            assert!(
                (r - t.abs()).abs() < 1e-10 * t.abs().max(1.0),
                "t={t} r={r}"
            );
        }
        assert_eq!(variance_r(&m, 0.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn fractional_r_closed_form() {
        for h in [0.3, 0.6, 0.75] {
            let m = SpectralDensity::fractional(h).unwrap();
            let c = fractional_oracle(h);
            for t in [0.5, 1.0, 2.0, 5.0] {
                let r = variance_r(&m, t, &cfg()).unwrap();
                let want = c * t.powf(2.0 * h);
                assert!(
                    (r - want).abs() < 1e-9 * want,
                    "H={h} t={t} r={r} want={want}"
                );
            }
        }
    }

    #[test]
    fn fractional_scale_law() {
        let m = SpectralDensity::fractional(0.75).unwrap();
        let r1 = variance_r(&m, 1.0, &cfg()).unwrap();
        let r2 = variance_r(&m, 2.0, &cfg()).unwrap();
        assert!((r2 / r1 - 2f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn band_limited_r_closed_form() {
        // (2/pi) \int_0^D (1 - cos t x)/x^2 dx = (2/pi) [ (cos(tD) - 1)/D + t Si(tD) ]
        let m = SpectralDensity::band_limited(1.0).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let q = Adaptive::default();
            let si = q
                .integrate(|x: f64| if x == 0.0 { 1.0 } else { x.sin() / x }, 0.0, t)
                .unwrap()
                .value;
            let want = 2.0 / PI * ((t.cos() - 1.0) + t * si);
            let r = variance_r(&m, t, &cfg()).unwrap();
            assert!((r - want).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn white_covariance_is_min() {
        let m = SpectralDensity::white();
        assert!((covariance(&m, 1.0, 2.0, &cfg()).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(covariance(&m, 0.0, 2.0, &cfg()).unwrap(), 0.0);
        // Signed indicators: (1_{-1}, 1_{-2}) = 1.
        assert!((covariance(&m, -1.0, -2.0, &cfg()).unwrap() - 1.0).abs() < 1e-10);
        assert!(covariance(&m, -1.0, 2.0, &cfg()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn gram_white() {
        let g = gram(&SpectralDensity::white(), &[1.0, 2.0, 3.0], &cfg()).unwrap();
        let want = [[1.0, 1.0, 1.0], [1.0, 2.0, 2.0], [1.0, 2.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.values[(i, j)] - want[i][j]).abs() < 1e-10);
            }
        }
        assert_eq!(g.jitter_used, 0.0);
        assert!(gram(&SpectralDensity::white(), &[1.0, 1.0], &cfg()).is_err());
    }

    #[test]
    fn gram_half_equals_white() {
        let a = gram(
            &SpectralDensity::fractional(0.5).unwrap(),
            &[1.0, 2.0],
            &cfg(),
        )
        .unwrap();
        let b = gram(&SpectralDensity::white(), &[1.0, 2.0], &cfg()).unwrap();
        assert!((a.values - b.values).amax() < 1e-10);
    }

    #[test]
    fn jitter_ladder() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, j) = cholesky_with_jitter(&singular).unwrap();
        assert!(j > 0.0 && j <= 1e-8);
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_with_jitter(&indefinite),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn derivative_covariance() {
        let m = SpectralDensity::band_limited(1.0).unwrap();
        let v0 = stationary_derivative_cov(&m, 0.0, &cfg()).unwrap();
        assert!((v0 - 1.0 / PI).abs() < 1e-13);
        let tau = 0.7;
        let v = stationary_derivative_cov(&m, tau, &cfg()).unwrap();
        assert!((v - (tau.sin() / tau) / PI).abs() < 1e-13);
        assert!(stationary_derivative_cov(&m, PI, &cfg()).unwrap().abs() < 1e-13);
        assert!(stationary_derivative_cov(&m, 1.5 * PI, &cfg()).unwrap() < 0.0);
        assert!(matches!(
            stationary_derivative_cov(&SpectralDensity::white(), 0.0, &cfg()),
            Err(Error::Divergence(_))
        ));
        assert!(
            stationary_derivative_cov(&SpectralDensity::fractional(0.7).unwrap(), 0.0, &cfg())
                .is_err()
        );
    }

    #[test]
    fn derivative_covariance_custom() {
        // m = 1/(1 + x^2): (1/pi) \int_0^inf cos(tau x)/(1 + x^2) = e^{-|tau|}/2
        let m = SpectralDensity::custom("lorentz", |x| 1.0 / (1.0 + x * x), None).unwrap();
        for tau in [0.0, 0.5, 2.0] {
            let v = stationary_derivative_cov(&m, tau, &cfg()).unwrap();
            assert!((v - 0.5 * (-tau).exp()).abs() < 1e-9, "tau={tau} v={v}");
        }
    }

    #[test]
    fn indicator_pairing_matches_frequency_route() {
        let m = SpectralDensity::fractional(0.7).unwrap();
        let k = Kernel::new(m.clone(), cfg()).unwrap();
        let f = TestFunction::indicator(0.2, 1.1);
        let g = TestFunction::indicator(0.5, 2.0);
        let exact = k.inner_product(&f, &g).unwrap();
        let grid = GridFunction::from_fn(0.5, 2.0, 16, "one", |_| 1.0).unwrap();
        let via_grid = k.inner_product(&f, &TestFunction::from(grid)).unwrap();
        assert!((exact - via_grid).abs() < 1e-7, "{exact} {via_grid}");
    }

    #[test]
    fn bump_pairing_white_is_overlap() {
        let k = Kernel::new(SpectralDensity::white(), cfg()).unwrap();
        let s = TestFunction::bump(0.5, 0.1).unwrap();
        let one = TestFunction::indicator(0.0, 1.0);
        let v = k.inner_product(&s, &one).unwrap();
        let want = 0.1 * (2.0 * PI).sqrt() * (1.0 - statrs::function::erf::erfc(5.0 / 2f64.sqrt()));
        assert!((v - want).abs() < 1e-10, "{v} {want}");
        let ss = k.inner_product(&s, &s).unwrap();
        assert!((ss - 0.1 * PI.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn covariance_symmetric(t in 0.05f64..3.0, s in 0.05f64..3.0, h in 0.2f64..0.9) {
            let m = SpectralDensity::fractional(h).unwrap();
            let k = Kernel::new(m, cfg()).unwrap();
            let a = k.covariance(t, s).unwrap();
            let b = k.covariance(s, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }

        #[test]
        fn white_reduction(t in 0.01f64..3.0, s in 0.01f64..3.0) {
            let v = covariance(&SpectralDensity::white(), t, s, &cfg()).unwrap();
            prop_assert!((v - t.min(s)).abs() < 1e-9);
        }

        #[test]
        fn r_is_even_and_nonnegative(t in -5.0f64..5.0) {
            let m = SpectralDensity::band_limited_fractional(0.7, 2.0).unwrap();
            let a = variance_r(&m, t, &cfg()).unwrap();
            let b = variance_r(&m, -t, &cfg()).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a, b);
        }
    }
}
