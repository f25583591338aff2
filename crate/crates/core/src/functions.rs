//! Deterministic test functions: sampled grid functions, indicators and
//! Gaussian bumps, with exact Fourier transforms.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function sampled on the uniform grid `start + i * step`.
///
/// The samples are point values. The FFT routines in [`crate::operator_tm`]
/// use them as a Riemann sum; the analytic routines interpolate linearly
/// between knots and treat the function as zero outside `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub start: f64,
    pub step: f64,
    pub samples: Vec<f64>,
    pub label: String,
}

impl GridFunction {
    pub fn new(start: f64, step: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Validation(format!(
                "grid step {step} must be positive"
            )));
        }
        if !start.is_finite() {
            return Err(Error::Validation("grid start must be finite".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation(
                "grid function needs at least one sample".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(GridFunction {
            start,
            step,
            samples,
            label: label.into(),
        })
    }

    /// Samples `f` at `n` equispaced knots covering `[start, end]`.
    pub fn from_fn(
        start: f64,
        end: f64,
        n: usize,
        label: impl Into<String>,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if n < 2 || !(end > start) {
            return Err(Error::Validation(format!(
                "need n >= 2 and end > start (got n = {n}, [{start}, {end}])"
            )));
        }
        let step = (end - start) / (n - 1) as f64;
        let samples = (0..n).map(|i| f(start + i as f64 * step)).collect();
        GridFunction::new(start, step, samples, label)
    }

    /// Indicator of `[a, b)` on the grid `start + i * step`, `i < n`. Each
    /// sample carries the fraction of its cell `[t_i - step/2, t_i + step/2)`
    /// covered by the interval.
    pub fn indicator(a: f64, b: f64, start: f64, step: f64, n: usize) -> Result<Self> {
        let samples = (0..n)
            .map(|i| {
                let t = start + i as f64 * step;
                let lo = (t - 0.5 * step).max(a);
                let hi = (t + 0.5 * step).min(b);
                ((hi - lo) / step).clamp(0.0, 1.0)
            })
            .collect();
        GridFunction::new(start, step, samples, format!("1[{a},{b})"))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end(&self) -> f64 {
        self.knot(self.samples.len() - 1)
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Linear interpolation, zero outside `[start, end]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 1 {
            return if t == self.start {
                self.samples[0]
            } else {
                0.0
            };
        }
        if t < self.start || t > self.end() {
            return 0.0;
        }
        let x = (t - self.start) / self.step;
        let i = (x.floor() as usize).min(n - 2);
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Riemann-sum norm `step * sum |f_i|^2`.
    pub fn grid_norm_sq(&self) -> f64 {
        self.step
            * crate::quadrature::pairwise_sum(
                &self.samples.iter().map(|v| v * v).collect::<Vec<_>>(),
            )
    }
}

/// A deterministic function entering Wiener integrals `<omega, f>`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `scale * 1_[start, end)`.
    Indicator { start: f64, end: f64, scale: f64 },
    /// `scale * exp(-(u - center)^2 / (2 width^2))`.
    Bump { center: f64, width: f64, scale: f64 },
    /// `scale * 1_[lo, hi] * grid`, with `grid` linearly interpolated.
    Grid {
        grid: Arc<GridFunction>,
        lo: f64,
        hi: f64,
        scale: f64,
    },
}

impl From<GridFunction> for TestFunction {
    fn from(grid: GridFunction) -> Self {
        let (lo, hi) = (grid.start, grid.end());
        TestFunction::Grid {
            grid: Arc::new(grid),
            lo,
            hi,
            scale: 1.0,
        }
    }
}

/// `1_t`, with the signed convention `1_t = -1_[t, 0)` for `t < 0`.
pub fn unit_indicator(t: f64) -> TestFunction {
    if t >= 0.0 {
        TestFunction::Indicator {
            start: 0.0,
            end: t,
            scale: 1.0,
        }
    } else {
        TestFunction::Indicator {
            start: t,
            end: 0.0,
            scale: -1.0,
        }
    }
}

// exp(z h) - 1 over z and the first moment, with a series near z h = 0.
fn segment_moments(z: Complex64, h: f64) -> (Complex64, Complex64) {
    let zh = z * h;
    if zh.norm() < 0.5 {
        let mut i0 = Complex64::new(0.0, 0.0);
        let mut i1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0); // (z h)^k / k!
        for k in 0..24 {
            i0 += term * (h / (k as f64 + 1.0));
            i1 += term * (h * h / (k as f64 + 2.0));
            term = term * zh / (k as f64 + 1.0);
        }
        (i0, i1)
    } else {
        let e = zh.exp();
        let i0 = (e - 1.0) / z;
        let i1 = e * h / z - (e - 1.0) / (z * z);
        (i0, i1)
    }
}

/// `\int_{x0}^{x1} (linear from y0 to y1) e^{-i xi u} du`.
pub(crate) fn linear_segment_ft(xi: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> Complex64 {
    let h = x1 - x0;
    if h <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let z = Complex64::new(0.0, -xi);
    let (i0, i1) = segment_moments(z, h);
    let slope = (y1 - y0) / h;
    Complex64::from_polar(1.0, -xi * x0) * (i0 * y0 + i1 * slope)
}

impl TestFunction {
    pub fn indicator(start: f64, end: f64) -> Self {
        TestFunction::Indicator {
            start,
            end,
            scale: 1.0,
        }
    }

    pub fn bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(Error::Validation(format!(
                "bump width {width} must be positive"
            )));
        }
        Ok(TestFunction::Bump {
            center,
            width,
            scale: 1.0,
        })
    }

    /// The constant function 1. Pairings need it restricted first.
    pub fn one() -> Self {
        TestFunction::Indicator {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
            scale: 1.0,
        }
    }

    pub fn zero() -> Self {
        TestFunction::Indicator {
            start: 0.0,
            end: 0.0,
            scale: 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Indicator { scale, .. }
            | TestFunction::Bump { scale, .. }
            | TestFunction::Grid { scale, .. } => *scale *= c,
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TestFunction::Indicator { start, end, scale } => *scale == 0.0 || end <= start,
            TestFunction::Bump { scale, .. } => *scale == 0.0,
            TestFunction::Grid {
                lo,
                hi,
                scale,
                grid,
            } => *scale == 0.0 || hi <= lo || grid.samples.iter().all(|v| *v == 0.0),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Indicator { start, end, scale } => format!("{scale}*1[{start},{end})"),
            TestFunction::Bump {
                center,
                width,
                scale,
            } => format!("{scale}*bump(c={center},w={width})"),
            TestFunction::Grid {
                grid,
                lo,
                hi,
                scale,
            } => format!("{scale}*1[{lo},{hi}]*{}", grid.label),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TestFunction::Indicator { start, end, scale } => {
                if t >= *start && t < *end {
                    *scale
                } else {
                    0.0
                }
            }
            TestFunction::Bump {
                center,
                width,
                scale,
            } => {
                let z = (t - center) / width;
                scale * (-0.5 * z * z).exp()
            }
            TestFunction::Grid {
                grid,
                lo,
                hi,
                scale,
            } => {
                if t < *lo || t > *hi {
                    0.0
                } else {
                    scale * grid.value_at(t)
                }
            }
        }
    }

    /// Interval outside which the function vanishes (numerically, for bumps).
    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Indicator { start, end, .. } => (*start, (*end).max(*start)),
            TestFunction::Bump { center, width, .. } => {
                (center - 9.0 * width, center + 9.0 * width)
            }
            TestFunction::Grid { grid, lo, hi, .. } => {
                let a = lo.max(grid.start);
                (a, hi.min(grid.end()).max(a))
            }
        }
    }

    /// Knots where the function is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TestFunction::Indicator { start, end, .. } => vec![*start, *end],
            TestFunction::Bump { .. } => Vec::new(),
            TestFunction::Grid { grid, .. } => {
                let (a, b) = self.support();
                let mut pts = vec![a];
                for i in 0..grid.len() {
                    let x = grid.knot(i);
                    if x > a && x < b {
                        pts.push(x);
                    }
                }
                pts.push(b);
                pts
            }
        }
    }

    /// Jump discontinuities `(position, f(x+) - f(x-))`.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        match self {
            TestFunction::Indicator { start, end, scale } => {
                if end > start && *scale != 0.0 {
                    vec![(*start, *scale), (*end, -*scale)]
                } else {
                    Vec::new()
                }
            }
            TestFunction::Bump { .. } => Vec::new(),
            TestFunction::Grid { grid, scale, .. } => {
                let (a, b) = self.support();
                if b <= a {
                    return Vec::new();
                }
                vec![
                    (a, scale * grid.value_at(a)),
                    (b, -scale * grid.value_at(b)),
                ]
                .into_iter()
                .filter(|(_, j)| *j != 0.0)
                .collect()
            }
        }
    }

    /// `\int f`.
    pub fn integral(&self) -> f64 {
        self.fourier(0.0).re
    }

    /// Non-unitary transform `G(xi) = \int e^{-i xi u} f(u) du`; the unitary
    /// transform is `G / sqrt(2 pi)`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        match self {
            TestFunction::Indicator { start, end, scale } => {
                if end <= start {
                    return Complex64::new(0.0, 0.0);
                }
                linear_segment_ft(xi, *start, *scale, *end, *scale)
            }
            TestFunction::Bump {
                center,
                width,
                scale,
            } => {
                let amp = scale
                    * width
                    * (2.0 * std::f64::consts::PI).sqrt()
                    * (-0.5 * width * width * xi * xi).exp();
                Complex64::from_polar(amp, -xi * center)
            }
            TestFunction::Grid { grid, scale, .. } => {
                let (a, b) = self.support();
                if b <= a {
                    return Complex64::new(0.0, 0.0);
                }
                let pts = self.breakpoints();
                let mut acc = Complex64::new(0.0, 0.0);
                let mut y0 = grid.value_at(a);
                for w in pts.windows(2) {
                    let y1 = if w[1] == b {
                        grid.value_at(b)
                    } else {
                        grid.value_at(w[1])
                    };
                    acc += linear_segment_ft(xi, w[0], y0, w[1], y1);
                    y0 = y1;
                }
                acc * *scale
            }
        }
    }

    /// `1_[a, b] * f`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<TestFunction> {
        if b < a {
            return Err(Error::Validation(format!(
                "restrict: empty interval [{a}, {b}]"
            )));
        }
        Ok(match self {
            TestFunction::Indicator { start, end, scale } => {
                let lo = start.max(a);
                let hi = end.min(b).max(lo);
                TestFunction::Indicator {
                    start: lo,
                    end: hi,
                    scale: *scale,
                }
            }
            TestFunction::Grid {
                grid,
                lo,
                hi,
                scale,
            } => {
                let nlo = lo.max(a);
                TestFunction::Grid {
                    grid: grid.clone(),
                    lo: nlo,
                    hi: hi.min(b).max(nlo),
                    scale: *scale,
                }
            }
            TestFunction::Bump { .. } => {
                return Err(Error::Unsupported(
                    "restricting a Gaussian bump; sample it onto a grid first".into(),
                ))
            }
        })
    }

    /// `1_t * f` with the signed convention of [`unit_indicator`].
    pub fn restrict_signed(&self, t: f64) -> Result<TestFunction> {
        if t >= 0.0 {
            self.restrict(0.0, t)
        } else {
            Ok(self.restrict(t, 0.0)?.scaled(-1.0))
        }
    }

    /// Samples the function onto a grid, e.g. for the FFT route.
    pub fn to_grid(&self, start: f64, step: f64, n: usize) -> Result<GridFunction> {
        match self {
            TestFunction::Indicator {
                start: a,
                end: b,
                scale,
            } => {
                let mut g = GridFunction::indicator(*a, *b, start, step, n)?;
                g.samples.iter_mut().for_each(|v| *v *= scale);
                Ok(g)
            }
            _ => {
                let samples = (0..n)
                    .map(|i| self.value(start + i as f64 * step))
                    .collect();
                GridFunction::new(start, step, samples, self.label())
            }
        }
    }
}
