//! The `S_m` transform `(S_m Phi)(s) = E[:e^{<omega, s>}: Phi]` by three
//! routes, and the probe functions `s` it is evaluated at.
//!
//! Under the tilted measure `:e^{<omega, s>}: dmu` the Wiener integral
//! `<omega, g>` is Gaussian with mean `(T_m s, T_m g)` and variance
//! `||T_m g||^2`; every route below reads off that fact.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::kernel::{FrequencyRule, Kernel};
use crate::quadrature::{self, gaussian_expectation, pairwise_sum};
use crate::sampling::PathEnsemble;
use crate::stats;
use crate::wick::{hermite_monomial, WickPolynomial};

/// Gauss-Hermite order used by the quadrature route.
pub const GH_ORDER: usize = 96;

/// Centers and widths of the standard probe bumps.
pub const STANDARD_PROBES: [(f64, f64); 5] =
    [(0.0, 1.0), (1.0, 0.5), (-1.0, 0.5), (2.0, 1.0), (0.5, 0.25)];

/// A Gaussian bump probe `s(u) = a exp(-(u - c)^2 / (2 w^2))` together with a
/// frequency rule for pairings `(T_m s, T_m g)`.
///
/// With `W_i` the rule weights times `(1/pi) a w sqrt(2 pi) exp(-w^2 xi_i^2 / 2)`,
///
/// `b_s(t) = sum W_i (sin(xi_i (t - c)) + sin(xi_i c)) / xi_i + W_0 t`,
/// `b_s'(t) = sum W_i cos(xi_i (t - c)) + W_0`.
#[derive(Clone)]
pub struct Probe {
    s: TestFunction,
    center: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cos_c: Vec<f64>,
    sin_c: Vec<f64>,
    origin_weight: f64,
    norm_sq: f64,
}

impl fmt::Debug for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Probe({})", self.s.label())
    }
}

impl Probe {
    /// Unit-height bump at `center` with the given width.
    pub fn bump(kernel: &Kernel, center: f64, width: f64) -> Result<Probe> {
        Probe::new(kernel, TestFunction::bump(center, width)?)
    }

    /// `s = 0`; every transform reduces to a plain expectation.
    pub fn zero(kernel: &Kernel) -> Result<Probe> {
        Probe::new(kernel, TestFunction::bump(0.0, 1.0)?.scaled(0.0))
    }

    /// The five standard bumps.
    pub fn standard_set(kernel: &Kernel) -> Result<Vec<Probe>> {
        STANDARD_PROBES
            .iter()
            .map(|&(c, w)| Probe::bump(kernel, c, w))
            .collect()
    }

    pub fn new(kernel: &Kernel, s: TestFunction) -> Result<Probe> {
        let TestFunction::Bump {
            center,
            width,
            scale,
        } = s
        else {
            return Err(Error::Unsupported(format!(
                "probes must be Gaussian bumps, got {}",
                s.label()
            )));
        };
        let horizon = 16.0 + center.abs();
        let rule = FrequencyRule::build(
            kernel.density(),
            10.0 / width,
            horizon,
            kernel.config().graded_mesh_levels,
        )?;
        let amp = scale * width * (2.0 * PI).sqrt() / PI;
        let weights: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&xi, &w)| w * amp * (-0.5 * width * width * xi * xi).exp())
            .collect();
        let (sin_c, cos_c) = rule.nodes.iter().map(|xi| (xi * center).sin_cos()).unzip();
        let mut probe = Probe {
            s,
            center,
            nodes: rule.nodes,
            weights,
            cos_c,
            sin_c,
            origin_weight: rule.origin_mass * amp,
            norm_sq: 0.0,
        };
        probe.norm_sq = probe.pair(&probe.s.clone());
        Ok(probe)
    }

    pub fn function(&self) -> &TestFunction {
        &self.s
    }

    pub fn label(&self) -> String {
        self.s.label()
    }

    pub fn is_zero(&self) -> bool {
        self.s.is_zero()
    }

    /// `||T_m s||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `(T_m s, T_m g)`.
    pub fn pair(&self, g: &TestFunction) -> f64 {
        if self.is_zero() || g.is_zero() {
            return 0.0;
        }
        let terms: Vec<f64> = (0..self.nodes.len())
            .map(|i| {
                let gx = g.fourier(self.nodes[i]);
                self.weights[i] * (self.cos_c[i] * gx.re - self.sin_c[i] * gx.im)
            })
            .collect();
        pairwise_sum(&terms) + self.origin_weight * g.integral()
    }

    /// `b_s(t) = (T_m s, T_m 1_t)`.
    pub fn b_s(&self, t: f64) -> f64 {
        if self.is_zero() || t == 0.0 {
            return 0.0;
        }
        let terms: Vec<f64> = (0..self.nodes.len())
            .map(|i| {
                let xi = self.nodes[i];
                self.weights[i] * ((xi * (t - self.center)).sin() + self.sin_c[i]) / xi
            })
            .collect();
        pairwise_sum(&terms) + self.origin_weight * t
    }

    /// `b_s'(t)`, the frequency integral `(1/pi) \int_0^inf m Re(G_s(xi) e^{i xi t}) d xi`.
    pub fn b_s_prime(&self, t: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let terms: Vec<f64> = (0..self.nodes.len())
            .map(|i| self.weights[i] * (self.nodes[i] * (t - self.center)).cos())
            .collect();
        pairwise_sum(&terms) + self.origin_weight
    }
}

/// `b_s(t)` for a probe.
pub fn b_s(probe: &Probe, t: f64) -> f64 {
    probe.b_s(t)
}

/// `b_s'(t)` for a probe.
pub fn b_s_prime(probe: &Probe, t: f64) -> f64 {
    probe.b_s_prime(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    ClosedForm,
    GaussQuadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct STransformValue {
    pub value: f64,
    pub route: Route,
    pub stderr: Option<f64>,
}

impl STransformValue {
    fn exact(value: f64, route: Route) -> Self {
        STransformValue {
            value,
            route,
            stderr: None,
        }
    }
}

/// Random variables with a closed-form transform.
#[derive(Debug, Clone)]
pub enum Target {
    Constant(f64),
    /// `sum c_n h~_n(<omega, f>)`; the polynomial's variance must equal `||T_m f||^2`.
    Polynomial {
        direction: TestFunction,
        poly: WickPolynomial,
    },
    /// `:e^{<omega, f>}:`.
    WickExp {
        direction: TestFunction,
    },
    /// Per-draw values without symbolic form.
    Samples(Vec<f64>),
}

/// Closed-form transform of a target.
pub fn s_closed(kernel: &Kernel, target: &Target, probe: &Probe) -> Result<STransformValue> {
    let value = match target {
        Target::Constant(c) => *c,
        Target::Polynomial { direction, poly } => {
            let v = kernel.inner_product(direction, direction)?;
            if (poly.variance - v).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "polynomial variance {} does not match ||T_m f||^2 = {v} for {}",
                    poly.variance,
                    direction.label()
                )));
            }
            poly.s_value(&probe.pair(direction))
        }
        Target::WickExp { direction } => probe.pair(direction).exp(),
        Target::Samples(_) => {
            return Err(Error::Unsupported(
                "sampled targets have no closed-form transform".into(),
            ));
        }
    };
    Ok(STransformValue::exact(value, Route::ClosedForm))
}

/// `E[F(Y)]` for `Y ~ N(mean, var)` by Gauss-Hermite, refusing integrands that
/// are still significant at the outermost nodes.
pub fn gauss_hermite(mean: f64, var: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let rule = quadrature::hermite(GH_ORDER);
    let scale = (2.0 * var.max(0.0)).sqrt();
    let n = rule.nodes.len();
    let mut total = 0.0;
    let mut outer = 0.0;
    for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let y = f(mean + scale * x);
        if !y.is_finite() {
            return Err(Error::Growth(format!(
                "F({}) is not finite",
                mean + scale * x
            )));
        }
        total += (w * y).abs();
        if i < 2 || i + 2 >= n {
            outer += (w * y).abs();
        }
    }
    if outer > 1e-12 * total.max(1e-300) && var > 0.0 {
        return Err(Error::Growth(format!(
            "outer Gauss-Hermite nodes carry {:.2e} of the mass",
            outer / total
        )));
    }
    Ok(gaussian_expectation(&rule, mean, var, f))
}

/// `(S_m F(<omega, g>))(s)` by Gauss-Hermite quadrature under
/// `N((T_m s, T_m g), ||T_m g||^2)`.
pub fn s_gaussian(
    kernel: &Kernel,
    direction: &TestFunction,
    f: impl Fn(f64) -> f64,
    probe: &Probe,
) -> Result<STransformValue> {
    let mean = probe.pair(direction);
    let var = kernel.inner_product(direction, direction)?;
    Ok(STransformValue::exact(
        gauss_hermite(mean, var, f)?,
        Route::GaussQuadrature,
    ))
}

/// `(S_m F(<omega, 1_t f>))(s)` by Gauss-Hermite quadrature.
pub fn s_of_f(
    kernel: &Kernel,
    f: &TestFunction,
    t: f64,
    big_f: impl Fn(f64) -> f64,
    probe: &Probe,
) -> Result<STransformValue> {
    s_gaussian(kernel, &f.restrict_signed(t)?, big_f, probe)
}

/// Mean of `:e^{<omega, s>}: Phi` over an ensemble that co-sampled `<omega, s>`.
pub fn s_monte_carlo(e: &PathEnsemble, phi: &[f64], probe: &Probe) -> Result<STransformValue> {
    if phi.len() != e.n() {
        return Err(Error::Validation(format!(
            "{} target samples for an ensemble of {} draws",
            phi.len(),
            e.n()
        )));
    }
    let xs = if probe.is_zero() {
        vec![0.0; e.n()]
    } else {
        e.direction_column(&probe.label())?
    };
    let half = 0.5 * probe.norm_sq();
    let prods: Vec<f64> = xs
        .iter()
        .zip(phi)
        .map(|(x, p)| (x - half).exp() * p)
        .collect();
    Ok(STransformValue {
        value: stats::mean(&prods),
        route: Route::MonteCarlo,
        stderr: Some(stats::stderr_of_mean(&prods)),
    })
}

/// `(S_m (:e^{<omega, f>}: :e^{<omega, g>}:))(s)
///   = e^{(T_m f, T_m g)} e^{(T_m s, T_m f)} e^{(T_m s, T_m g)}`.
pub fn s_product_rule(
    kernel: &Kernel,
    f: &TestFunction,
    g: &TestFunction,
    probe: &Probe,
) -> Result<f64> {
    Ok((kernel.inner_product(f, g)? + probe.pair(f) + probe.pair(g)).exp())
}

/// Rebuilds `(T_m s, T_m f)^n` from the quadrature transforms of the powers
/// `<omega, f>^k` through the Hermite expansion of `h~_n`. Returns
/// `(reconstructed, (T_m s, T_m f)^n)`.
pub fn hermite_reconstruction(
    kernel: &Kernel,
    f: &TestFunction,
    n: usize,
    probe: &Probe,
) -> Result<(f64, f64)> {
    let v = kernel.inner_product(f, f)?;
    let coeffs = hermite_monomial(n, &v)?;
    let mut terms = Vec::with_capacity(n + 1);
    for (k, c) in coeffs.iter().enumerate() {
        if *c != 0.0 {
            let moment = s_gaussian(kernel, f, |x| x.powi(k as i32), probe)?.value;
            terms.push(c * moment);
        }
    }
    Ok((pairwise_sum(&terms), probe.pair(f).powi(n as i32)))
}
