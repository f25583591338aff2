//! Spectral densities `m(xi)` and their admissibility conditions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Adaptive;

/// Serializable description of a built-in density, as written in config files.
///
/// ```toml
/// density = { kind = "fractional", H = 0.75 }
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    White,
    BandLimited {
        #[serde(alias = "Delta")]
        delta: f64,
    },
    Fractional {
        #[serde(rename = "H")]
        hurst: f64,
    },
    BandLimitedFractional {
        #[serde(rename = "H")]
        hurst: f64,
        #[serde(alias = "Delta")]
        delta: f64,
    },
}

impl DensitySpec {
    /// Parse the `KIND[:params]` shorthand, e.g. `fractional:H=0.75` or
    /// `band-limited-fractional:H=0.7,delta=2`.
    pub fn parse_shorthand(text: &str) -> Result<DensitySpec> {
        let (kind, params) = match text.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (text.trim(), ""),
        };
        let mut hurst = None;
        let mut delta = None;
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::config("density", format!("expected key=value, got `{item}`"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::config("density", format!("`{value}` is not a number")))?;
            match key.trim() {
                "H" | "h" | "hurst" => hurst = Some(value),
                "delta" | "Delta" | "D" => delta = Some(value),
                other => {
                    return Err(Error::config(
                        "density",
                        format!("unknown parameter `{other}`"),
                    ))
                }
            }
        }
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::config("density", format!("`{kind}` needs parameter {name}")))
        };
        let spec = match kind.to_ascii_lowercase().replace('_', "-").as_str() {
            "white" => DensitySpec::White,
            "band-limited" | "bandlimited" => DensitySpec::BandLimited {
                delta: need(delta, "delta")?,
            },
            "fractional" | "fbm" => DensitySpec::Fractional {
                hurst: need(hurst, "H")?,
            },
            "band-limited-fractional" | "bandlimitedfractional" => {
                DensitySpec::BandLimitedFractional {
                    hurst: need(hurst, "H")?,
                    delta: need(delta, "delta")?,
                }
            }
            other => {
                return Err(Error::config(
                    "density",
                    format!("unknown density kind `{other}`"),
                ))
            }
        };
        Ok(spec)
    }
}

/// Pointwise evaluator of a user-supplied density.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    White,
    BandLimited {
        delta: f64,
    },
    Fractional {
        hurst: f64,
    },
    BandLimitedFractional {
        hurst: f64,
        delta: f64,
    },
    Custom {
        name: String,
        eval: DensityFn,
        support: Option<f64>,
    },
}

/// An even, nonnegative spectral density.
#[derive(Clone)]
pub struct SpectralDensity {
    kind: Kind,
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpectralDensity({})", self.label())
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "Hurst index H = {hurst} must lie in (0, 1)"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "band edge delta = {delta} must be positive"
        )))
    }
}

/// Builds a built-in density from its description.
pub fn make_builtin(spec: DensitySpec) -> Result<SpectralDensity> {
    let kind = match spec {
        DensitySpec::White => Kind::White,
        DensitySpec::BandLimited { delta } => {
            check_delta(delta)?;
            Kind::BandLimited { delta }
        }
        DensitySpec::Fractional { hurst } => {
            check_hurst(hurst)?;
            Kind::Fractional { hurst }
        }
        DensitySpec::BandLimitedFractional { hurst, delta } => {
            check_hurst(hurst)?;
            check_delta(delta)?;
            Kind::BandLimitedFractional { hurst, delta }
        }
    };
    Ok(SpectralDensity { kind })
}

impl SpectralDensity {
    pub fn white() -> Self {
        SpectralDensity { kind: Kind::White }
    }

    pub fn band_limited(delta: f64) -> Result<Self> {
        make_builtin(DensitySpec::BandLimited { delta })
    }

    pub fn fractional(hurst: f64) -> Result<Self> {
        make_builtin(DensitySpec::Fractional { hurst })
    }

    pub fn band_limited_fractional(hurst: f64, delta: f64) -> Result<Self> {
        make_builtin(DensitySpec::BandLimitedFractional { hurst, delta })
    }

    /// Wraps a user-supplied density.
    ///
    /// The evaluator is spot-checked for evenness and nonnegativity on 1000
    /// quasi-random frequencies spread over `(0, 1e4)`. `support`, when given,
    /// declares `m` to vanish for `|xi| > support`.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Option<f64>,
    ) -> Result<Self> {
        let eval: DensityFn = Arc::new(eval);
        // Golden-ratio sequence mapped onto (0, inf) through tan.
        const GOLDEN: f64 = 0.618_033_988_749_894_9;
        let mut u = 0.5;
        for i in 0..1000 {
            u = (u + GOLDEN).fract();
            let xi = (0.5 * std::f64::consts::PI * u).tan().clamp(1e-6, 1e4);
            let (plus, minus) = (eval(xi), eval(-xi));
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::Validation(format!(
                    "m({xi}) is not finite (check point {i})"
                )));
            }
            if plus < 0.0 || minus < 0.0 {
                return Err(Error::Validation(format!("m is negative near xi = {xi}")));
            }
            if (plus - minus).abs() > 1e-12 * plus.abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "m is not even: m({xi}) = {plus}, m(-{xi}) = {minus}"
                )));
            }
        }
        if let Some(s) = support {
            check_delta(s)?;
        }
        Ok(SpectralDensity {
            kind: Kind::Custom {
                name: name.into(),
                eval,
                support,
            },
        })
    }

    /// Built-in description, if this is not a custom density.
    pub fn spec(&self) -> Option<DensitySpec> {
        match self.kind {
            Kind::White => Some(DensitySpec::White),
            Kind::BandLimited { delta } => Some(DensitySpec::BandLimited { delta }),
            Kind::Fractional { hurst } => Some(DensitySpec::Fractional { hurst }),
            Kind::BandLimitedFractional { hurst, delta } => {
                Some(DensitySpec::BandLimitedFractional { hurst, delta })
            }
            Kind::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::White => "white".to_string(),
            Kind::BandLimited { delta } => format!("band-limited(delta={delta})"),
            Kind::Fractional { hurst } => format!("fractional(H={hurst})"),
            Kind::BandLimitedFractional { hurst, delta } => {
                format!("band-limited-fractional(H={hurst},delta={delta})")
            }
            Kind::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// `m(xi)`. The fractional densities return `+inf` at the origin when
    /// `H > 1/2`.
    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        match &self.kind {
            Kind::White => 1.0,
            Kind::BandLimited { delta } => {
                if a <= *delta {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Fractional { hurst } => power(a, 1.0 - 2.0 * hurst),
            Kind::BandLimitedFractional { hurst, delta } => {
                if a <= *delta {
                    power(a, 1.0 - 2.0 * hurst)
                } else {
                    0.0
                }
            }
            Kind::Custom { eval, .. } => eval(xi),
        }
    }

    /// Band edge beyond which `m` vanishes.
    pub fn support(&self) -> Option<f64> {
        match &self.kind {
            Kind::BandLimited { delta } | Kind::BandLimitedFractional { delta, .. } => Some(*delta),
            Kind::Custom { support, .. } => *support,
            _ => None,
        }
    }

    /// Exponent `beta` of the behaviour `m(xi) ~ xi^beta` near the origin.
    pub fn origin_exponent(&self) -> f64 {
        match &self.kind {
            Kind::White | Kind::BandLimited { .. } => 0.0,
            Kind::Fractional { hurst } | Kind::BandLimitedFractional { hurst, .. } => {
                1.0 - 2.0 * hurst
            }
            Kind::Custom { eval, .. } => {
                let (a, b) = (eval(1e-9), eval(2e-9));
                if a > 0.0 && b > 0.0 {
                    (b / a).log2()
                } else {
                    0.0
                }
            }
        }
    }

    /// `beta` such that `m(xi) = |xi|^beta` exactly inside the support, for
    /// the built-in families.
    pub(crate) fn power_law_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::White | Kind::BandLimited { .. } => Some(0.0),
            Kind::Fractional { hurst } | Kind::BandLimitedFractional { hurst, .. } => {
                Some(1.0 - 2.0 * hurst)
            }
            Kind::Custom { .. } => None,
        }
    }

    /// Whether `m` is unbounded at the origin.
    pub fn singular_at_origin(&self) -> bool {
        self.origin_exponent() < -1e-12
    }

    /// `\int_0^eps m(xi) d xi` for small `eps`, using the power law at the origin.
    pub fn mass_near_origin(&self, eps: f64) -> f64 {
        let beta = self.origin_exponent();
        match &self.kind {
            Kind::White | Kind::BandLimited { .. } => {
                eps.min(self.support().unwrap_or(f64::INFINITY))
            }
            Kind::Fractional { .. } | Kind::BandLimitedFractional { .. } => {
                let e = eps.min(self.support().unwrap_or(f64::INFINITY));
                e.powf(beta + 1.0) / (beta + 1.0)
            }
            Kind::Custom { eval, .. } => eval(eps) * eps / (beta + 1.0),
        }
    }

    /// Integrate `m(xi) g(xi)` over `(0, upper]`, splitting at the band edge
    /// and grading toward an origin singularity.
    pub(crate) fn integrate_half_line(
        &self,
        g: impl Fn(f64) -> f64,
        upper: f64,
        quad: &Adaptive,
        levels: usize,
    ) -> Result<f64> {
        let upper = self.support().map_or(upper, |s| s.min(upper));
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let integrand = |x: f64| {
            let mv = self.eval(x);
            if mv == 0.0 {
                0.0
            } else {
                mv * g(x)
            }
        };
        let head_end = upper.min(1.0);
        let head = if self.singular_at_origin() {
            quad.integrate_graded(integrand, head_end, levels)?.value
        } else {
            quad.integrate(integrand, 0.0, head_end)?.value
        };
        if upper <= head_end {
            return Ok(head);
        }
        let mut points = vec![head_end];
        let mut p = head_end;
        while p * 2.0 < upper {
            p *= 2.0;
            points.push(p);
        }
        points.push(upper);
        Ok(head + quad.integrate_breaks(integrand, &points)?.value)
    }

    /// Numerical admissibility report on `[-cutoff, cutoff]`.
    pub fn admissibility(&self, cutoff: f64, tol: f64) -> Result<AdmissibilityReport> {
        if !(cutoff > 0.0 && tol > 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "cutoff ({cutoff}) and tol ({tol}) must be positive"
            )));
        }
        let quad = Adaptive::new(tol * 1e-3, tol, 200_000);
        let levels = 60;
        let quadratic =
            2.0 * self.integrate_half_line(|x| 1.0 / (1.0 + x * x), cutoff, &quad, levels)?;
        let linear_at = |c: f64| -> Result<f64> {
            Ok(2.0 * self.integrate_half_line(|x| 1.0 / (1.0 + x), c, &quad, levels)?)
        };
        // Decide finiteness of the linear criterion from increments over
        // successive cutoff doublings.
        let base = linear_at(cutoff)?;
        let mut values = vec![base];
        for k in 1..=4 {
            values.push(linear_at(cutoff * f64::from(1 << k))?);
        }
        let incs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let scale = base.abs().max(1e-300);
        let negligible = incs.iter().all(|d| d.abs() <= tol * scale);
        let ratios: Vec<f64> = incs
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        let geometric = !ratios.is_empty() && ratios.iter().all(|r| *r <= 0.95);
        let (integral_linear, continuous_version) = if negligible {
            (base, true)
        } else if geometric {
            let rho = *ratios.last().expect("ratios present");
            let last = *incs.last().expect("increments present");
            // Extrapolate the remainder beyond the last doubling.
            let tail = values[values.len() - 1] - base + last * rho / (1.0 - rho);
            (base + tail, true)
        } else {
            (f64::INFINITY, false)
        };
        Ok(AdmissibilityReport {
            integral_quadratic: quadratic,
            integral_linear,
            continuous_version,
        })
    }
}

fn power(a: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else if a == 0.0 {
        if beta < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        a.powf(beta)
    }
}

/// Values of the two admissibility integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// `\int m / (1 + xi^2)` over `[-cutoff, cutoff]`.
    pub integral_quadratic: f64,
    /// `\int m / (1 + |xi|)` over the real line, or `+inf` when the cutoff
    /// doublings show no convergence.
    pub integral_linear: f64,
    pub continuous_version: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn builtin_values() {
        assert_eq!(SpectralDensity::white().eval(3.7), 1.0);
        assert_eq!(SpectralDensity::band_limited(2.0).unwrap().eval(2.5), 0.0);
        assert_eq!(SpectralDensity::band_limited(2.0).unwrap().eval(-1.5), 1.0);
        assert!((SpectralDensity::fractional(0.75).unwrap().eval(4.0) - 0.5).abs() < 1e-15);
        let blf = SpectralDensity::band_limited_fractional(0.75, 3.0).unwrap();
        assert!((blf.eval(-2.0) - 2f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(blf.eval(3.5), 0.0);
    }

    #[test]
    fn parameter_ranges() {
        assert!(matches!(
            SpectralDensity::fractional(1.0),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(matches!(
            SpectralDensity::fractional(0.0),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(matches!(
            SpectralDensity::band_limited(0.0),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(SpectralDensity::band_limited_fractional(0.6, -1.0).is_err());
    }

    #[test]
    fn builtins_are_even() {
        let densities = [
            SpectralDensity::white(),
            SpectralDensity::band_limited(1.3).unwrap(),
            SpectralDensity::fractional(0.3).unwrap(),
            SpectralDensity::band_limited_fractional(0.8, 2.0).unwrap(),
        ];
        let mut x = 0.123_f64;
        for _ in 0..1000 {
            x = (x * 7.31 + 0.57).fract();
            let xi = 20.0 * (x - 0.5);
            for m in &densities {
                assert_eq!(m.eval(xi), m.eval(-xi));
                assert!(m.eval(xi) >= 0.0);
            }
        }
    }

    #[test]
    fn custom_validation() {
        assert!(SpectralDensity::custom("lorentz", |x| 1.0 / (1.0 + x * x), None).is_ok());
        let odd = SpectralDensity::custom("odd", |x| if x > 0.0 { 2.0 } else { 1.0 }, None);
        assert!(matches!(odd, Err(Error::Validation(_))));
        let neg = SpectralDensity::custom("neg", |x: f64| x.cos() - 0.5, None);
        assert!(matches!(neg, Err(Error::Validation(_))));
    }

    #[test]
    fn shorthand_parsing() {
        assert_eq!(
            DensitySpec::parse_shorthand("white").unwrap(),
            DensitySpec::White
        );
        assert_eq!(
            DensitySpec::parse_shorthand("fractional:H=0.75").unwrap(),
            DensitySpec::Fractional { hurst: 0.75 }
        );
        assert_eq!(
            DensitySpec::parse_shorthand("band-limited-fractional:H=0.7,delta=2").unwrap(),
            DensitySpec::BandLimitedFractional {
                hurst: 0.7,
                delta: 2.0
            }
        );
        assert!(DensitySpec::parse_shorthand("fractional").is_err());
        assert!(DensitySpec::parse_shorthand("pink:H=0.2").is_err());
    }

    #[test]
    fn config_form_deserializes() {
        #[derive(Deserialize)]
        struct Wrap {
            density: DensitySpec,
        }
        let w: Wrap = toml::from_str(r#"density = { kind = "fractional", H = 0.75 }"#).unwrap();
        assert_eq!(w.density, DensitySpec::Fractional { hurst: 0.75 });
        let w: Wrap = toml::from_str("[density]\nkind = \"band-limited\"\ndelta = 2.0\n").unwrap();
        assert_eq!(w.density, DensitySpec::BandLimited { delta: 2.0 });
    }

    #[test]
    fn admissibility_white() {
        let rep = SpectralDensity::white().admissibility(1e4, 1e-10).unwrap();
        // 2 arctan(1e4) = pi - 2e-4 + O(1e-12)
        assert!((rep.integral_quadratic - 2.0 * 1e4f64.atan()).abs() < 1e-8);
        assert!((rep.integral_quadratic - PI).abs() < 1e-3);
        assert!(!rep.continuous_version);
        assert!(rep.integral_linear.is_infinite());
    }

    #[test]
    fn admissibility_band_limited() {
        let rep = SpectralDensity::band_limited(1.0)
            .unwrap()
            .admissibility(100.0, 1e-10)
            .unwrap();
        assert!((rep.integral_quadratic - PI / 2.0).abs() < 1e-10);
        assert!((rep.integral_linear - 2.0 * 2f64.ln()).abs() < 1e-10);
        assert!(rep.continuous_version);
    }

    #[test]
    fn admissibility_fractional() {
        let m = SpectralDensity::fractional(0.75).unwrap();
        let rep = m.admissibility(1e3, 1e-10).unwrap();
        assert!(rep.continuous_version);
        // \int_R |x|^{-1/2} / (1 + |x|) dx = 2 pi
        assert!(
            (rep.integral_linear - 2.0 * PI).abs() < 1e-3,
            "{}",
            rep.integral_linear
        );
        // \int_R |x|^{-1/2} / (1 + x^2) dx = pi sqrt(2), minus the tail beyond 1e3
        let tail = 2.0 * 2.0 / 3.0 * 1e3f64.powf(-1.5);
        assert!((rep.integral_quadratic - (PI * 2f64.sqrt() - tail)).abs() < 1e-7);
    }

    #[test]
    fn admissibility_is_monotone_in_cutoff() {
        let m = SpectralDensity::fractional(0.3).unwrap();
        let mut last = 0.0;
        for c in [1.0, 10.0, 100.0, 1000.0] {
            let rep = m.admissibility(c, 1e-9).unwrap();
            assert!(rep.integral_quadratic >= last);
            last = rep.integral_quadratic;
        }
    }
}
