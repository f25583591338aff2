//! The Wick-Itô integral `\int_a^b X_t dB_m(t)`, defined through
//! `S_m(\int X dB)(s) = \int_a^b (S_m X_t)(s) b_s'(t) dt`, for a few integrand
//! families with closed forms, and probe-level checks of the Itô formula.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::kernel::Kernel;
use crate::quadrature::{gk15, Adaptive};
use crate::s_transform::{gauss_hermite, s_product_rule, Probe};
use crate::sampling::{sample, Method};
use crate::stats;
use crate::wick::WickPolynomial;

pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `F(t, x)` with the derivatives the Itô formula needs.
#[derive(Clone)]
pub struct SmoothF {
    pub name: String,
    pub value: Fn2,
    pub dt: Fn2,
    pub dx: Fn2,
    pub dxx: Fn2,
    /// `E[F(t, Y)]` for `Y ~ N(0, v)`, as a function of `(t, v)`, when known.
    pub gaussian_mean: Option<Fn2>,
}

impl fmt::Debug for SmoothF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothF({})", self.name)
    }
}

fn arc(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Fn2 {
    Arc::new(f)
}

impl SmoothF {
    pub fn new(name: impl Into<String>, value: Fn2, dt: Fn2, dx: Fn2, dxx: Fn2) -> Self {
        SmoothF {
            name: name.into(),
            value,
            dt,
            dx,
            dxx,
            gaussian_mean: None,
        }
    }

    /// `F = x`.
    pub fn identity() -> Self {
        SmoothF {
            gaussian_mean: Some(arc(|_, _| 0.0)),
            ..SmoothF::new(
                "x",
                arc(|_, x| x),
                arc(|_, _| 0.0),
                arc(|_, _| 1.0),
                arc(|_, _| 0.0),
            )
        }
    }

    /// `F = x^2`.
    pub fn square() -> Self {
        SmoothF {
            gaussian_mean: Some(arc(|_, v| v)),
            ..SmoothF::new(
                "x^2",
                arc(|_, x| x * x),
                arc(|_, _| 0.0),
                arc(|_, x| 2.0 * x),
                arc(|_, _| 2.0),
            )
        }
    }

    /// `F = cos x`.
    pub fn cosine() -> Self {
        SmoothF {
            gaussian_mean: Some(arc(|_, v| (-0.5 * v).exp())),
            ..SmoothF::new(
                "cos x",
                arc(|_, x| x.cos()),
                arc(|_, _| 0.0),
                arc(|_, x| -x.sin()),
                arc(|_, x| -x.cos()),
            )
        }
    }

    /// `F = e^x`.
    pub fn exponential() -> Self {
        SmoothF {
            gaussian_mean: Some(arc(|_, v| (0.5 * v).exp())),
            ..SmoothF::new(
                "e^x",
                arc(|_, x| x.exp()),
                arc(|_, _| 0.0),
                arc(|_, x| x.exp()),
                arc(|_, x| x.exp()),
            )
        }
    }

    /// Preset by name: `x`, `x^2`, `cos`, `exp`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.trim() {
            "x" | "identity" => Ok(SmoothF::identity()),
            "x^2" | "x2" | "square" => Ok(SmoothF::square()),
            "cos" | "cos x" | "cosine" => Ok(SmoothF::cosine()),
            "exp" | "e^x" | "exponential" => Ok(SmoothF::exponential()),
            other => Err(Error::config(
                "ito.functions",
                format!("unknown function `{other}`"),
            )),
        }
    }
}

/// Integrand families `t -> X_t`, with `X^f_t = <omega, 1_t f>`.
#[derive(Debug, Clone)]
pub enum IntegrandForm {
    /// `f(t)`.
    Deterministic(TestFunction),
    /// `f(t) h~_n(X^f_t)`.
    WickChain(TestFunction, usize),
    /// `f(t) :e^{X^f_t}:`.
    WickExp(TestFunction),
    /// `B_m(t)^k`.
    PathPower(usize),
    /// `f(t) dF/dx(t, X^f_t)`, the stochastic-integral term of the Itô formula.
    SmoothF(TestFunction, SmoothF),
}

impl IntegrandForm {
    pub fn label(&self) -> String {
        match self {
            IntegrandForm::Deterministic(f) => format!("deterministic[{}]", f.label()),
            IntegrandForm::WickChain(f, n) => format!("wick-chain[{}, n={n}]", f.label()),
            IntegrandForm::WickExp(f) => format!("wick-exp[{}]", f.label()),
            IntegrandForm::PathPower(k) => format!("B^{k}"),
            IntegrandForm::SmoothF(f, big_f) => format!("dF/dx[{}, F={}]", f.label(), big_f.name),
        }
    }

    fn amplitude(&self) -> Option<&TestFunction> {
        match self {
            IntegrandForm::Deterministic(f)
            | IntegrandForm::WickChain(f, _)
            | IntegrandForm::WickExp(f)
            | IntegrandForm::SmoothF(f, _) => Some(f),
            IntegrandForm::PathPower(_) => None,
        }
    }
}

/// An integrand over `[a, b]`.
#[derive(Debug, Clone)]
pub struct IntegrandSpec {
    pub form: IntegrandForm,
    pub a: f64,
    pub b: f64,
}

impl IntegrandSpec {
    pub fn new(form: IntegrandForm, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Validation(format!(
                "integration interval [{a}, {b}] is invalid"
            )));
        }
        Ok(IntegrandSpec { form, a, b })
    }

    pub fn label(&self) -> String {
        format!("{} on [{}, {}]", self.form.label(), self.a, self.b)
    }

    // Points where the integrand or the direction `1_t f` is not smooth.
    fn breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo, hi];
        let mut inner = vec![0.0, self.a, self.b];
        if let Some(f) = self.form.amplitude() {
            inner.extend(f.breakpoints());
        }
        pts.extend(
            inner
                .into_iter()
                .filter(|p| p.is_finite() && *p > lo && *p < hi),
        );
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

fn unit_or(f: &TestFunction, t: f64) -> Result<TestFunction> {
    f.restrict_signed(t)
}

/// `||T_m 1_t f||^2`.
pub fn direction_variance(kernel: &Kernel, f: &TestFunction, t: f64) -> Result<f64> {
    let d = unit_or(f, t)?;
    kernel.inner_product(&d, &d)
}

/// `(S_m X_t)(s)`.
pub fn s_integrand(kernel: &Kernel, x: &IntegrandSpec, probe: &Probe, t: f64) -> Result<f64> {
    Ok(match &x.form {
        IntegrandForm::Deterministic(f) => f.value(t),
        IntegrandForm::WickChain(f, n) => {
            let amp = f.value(t);
            if amp == 0.0 {
                0.0
            } else {
                amp * probe.pair(&unit_or(f, t)?).powi(*n as i32)
            }
        }
        IntegrandForm::WickExp(f) => {
            let amp = f.value(t);
            if amp == 0.0 {
                0.0
            } else {
                amp * probe.pair(&unit_or(f, t)?).exp()
            }
        }
        IntegrandForm::PathPower(k) => {
            let v = kernel.r(t)?;
            let mut mono = vec![0.0; k + 1];
            mono[*k] = 1.0;
            WickPolynomial::from_monomial("1_t", v, &mono)?.s_value(&probe.b_s(t))
        }
        IntegrandForm::SmoothF(f, big_f) => {
            let amp = f.value(t);
            if amp == 0.0 {
                0.0
            } else {
                let d = unit_or(f, t)?;
                let v = kernel.inner_product(&d, &d)?;
                amp * gauss_hermite(probe.pair(&d), v, |y| (big_f.dx)(t, y))?
            }
        }
    })
}

// Adaptive quadrature of a fallible integrand; the first error wins.
fn integrate_fallible(
    quad: &Adaptive,
    points: &[f64],
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let est = quad.integrate_breaks(
        |t| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match f(t) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        points,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

fn time_quad() -> Adaptive {
    Adaptive::new(1e-13, 1e-12, 4000)
}

/// `\int_a^b E|X_t| dt` under the reference measure, by one Gauss-Kronrod
/// panel per smooth piece, after checking `||T_m 1_t f||^2` is finite at the
/// endpoints and the midpoint.
pub fn integrability(kernel: &Kernel, x: &IntegrandSpec) -> Result<f64> {
    if x.a == x.b {
        return Ok(0.0);
    }
    let variance = |t: f64| -> Result<f64> {
        match x.form.amplitude() {
            Some(f) => direction_variance(kernel, f, t),
            None => kernel.r(t),
        }
    };
    for t in [x.a, 0.5 * (x.a + x.b), x.b] {
        let v = variance(t)?;
        if !v.is_finite() {
            return Err(Error::DomainViolation(format!(
                "||T_m 1_t f||^2 is not finite at t = {t}"
            )));
        }
    }
    let abs_moment = |t: f64| -> Result<f64> {
        let v = variance(t)?;
        Ok(match &x.form {
            IntegrandForm::Deterministic(f) => f.value(t).abs(),
            IntegrandForm::WickChain(f, n) => {
                let h = WickPolynomial::basis("f", v, *n)?;
                f.value(t).abs() * gauss_hermite(0.0, v, |y| h.evaluate(&y).abs())?
            }
            IntegrandForm::WickExp(f) => f.value(t).abs(),
            IntegrandForm::PathPower(k) => gauss_hermite(0.0, v, |y| y.abs().powi(*k as i32))?,
            IntegrandForm::SmoothF(f, big_f) => {
                f.value(t).abs() * gauss_hermite(0.0, v, |y| (big_f.dx)(t, y).abs())?
            }
        })
    };
    let pts = x.breaks(x.a, x.b);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let mut g = |t: f64| match abs_moment(t) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let (v, _) = gk15(&mut g, w[0], w[1]);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        total += v;
    }
    if !total.is_finite() {
        return Err(Error::Integrability(format!(
            "\\int E|X_t| dt is not finite for {}",
            x.label()
        )));
    }
    Ok(total)
}

fn weighted_time_integral(
    kernel: &Kernel,
    x: &IntegrandSpec,
    probe: &Probe,
    lo: f64,
    hi: f64,
    weight: impl Fn(f64) -> f64,
) -> Result<f64> {
    if lo == hi || probe.is_zero() {
        return Ok(0.0);
    }
    let pts = x.breaks(lo, hi);
    integrate_fallible(&time_quad(), &pts, |t| {
        if t < x.a || t > x.b {
            return Ok(0.0);
        }
        let w = weight(t);
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok(w * s_integrand(kernel, x, probe, t)? * probe.b_s_prime(t))
    })
}

/// `S_m(\int_a^b X_t dB_m(t))(s)` by time quadrature.
pub fn integrate_numeric(kernel: &Kernel, x: &IntegrandSpec, probe: &Probe) -> Result<f64> {
    integrability(kernel, x)?;
    weighted_time_integral(kernel, x, probe, x.a, x.b, |_| 1.0)
}

/// `S_m(\int_lo^hi 1_[a,b](t) X_t dB_m(t))(s)` for an enclosing interval.
pub fn integrate_numeric_over(
    kernel: &Kernel,
    x: &IntegrandSpec,
    probe: &Probe,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(lo <= x.a && x.b <= hi) {
        return Err(Error::Validation(format!(
            "[{lo}, {hi}] does not contain [{}, {}]",
            x.a, x.b
        )));
    }
    integrability(kernel, x)?;
    weighted_time_integral(kernel, x, probe, lo, hi, |_| 1.0)
}

#[derive(Debug, Clone)]
pub enum ClosedElement {
    Polynomial(WickPolynomial),
    /// `c :e^{<omega, direction>}:`.
    WickExp(f64),
}

#[derive(Debug, Clone)]
pub struct ClosedTerm {
    pub direction: TestFunction,
    pub element: ClosedElement,
}

/// A sum of Wick polynomials and Wick exponentials in possibly different
/// directions, plus a constant.
#[derive(Debug, Clone, Default)]
pub struct ClosedIntegral {
    pub constant: f64,
    pub terms: Vec<ClosedTerm>,
}

impl ClosedIntegral {
    pub fn s_value(&self, probe: &Probe) -> f64 {
        let mut acc = self.constant;
        for term in &self.terms {
            let q = probe.pair(&term.direction);
            acc += match &term.element {
                ClosedElement::Polynomial(p) => p.s_value(&q),
                ClosedElement::WickExp(c) => c * q.exp(),
            };
        }
        acc
    }

    /// The polynomial when the result lives in one direction.
    pub fn single(&self) -> Option<(&TestFunction, &WickPolynomial)> {
        match self.terms.as_slice() {
            [ClosedTerm {
                direction,
                element: ClosedElement::Polynomial(p),
            }] if self.constant == 0.0 => Some((direction, p)),
            _ => None,
        }
    }

    fn push_poly(
        &mut self,
        kernel: &Kernel,
        direction: TestFunction,
        degree: usize,
        c: f64,
    ) -> Result<()> {
        if direction.is_zero() {
            // h~_n(0) with zero variance vanishes for n >= 1.
            if degree == 0 {
                self.constant += c;
            }
            return Ok(());
        }
        let v = kernel.inner_product(&direction, &direction)?;
        let poly = WickPolynomial::basis(direction.label(), v, degree)?.scale(&c);
        self.terms.push(ClosedTerm {
            direction,
            element: ClosedElement::Polynomial(poly),
        });
        Ok(())
    }

    fn push_exp(&mut self, direction: TestFunction, c: f64) {
        if direction.is_zero() {
            self.constant += c;
        } else {
            self.terms.push(ClosedTerm {
                direction,
                element: ClosedElement::WickExp(c),
            });
        }
    }
}

/// Closed form of `\int_a^b X_t dB_m(t)`:
///
/// * deterministic `f`: `<omega, 1_[a,b] f>`;
/// * `f(t) h~_n(X^f_t)`: `(h~_{n+1}(X^f_b) - h~_{n+1}(X^f_a)) / (n + 1)`;
/// * `f(t) :e^{X^f_t}:`: `:e^{X^f_b}: - :e^{X^f_a}:`;
/// * `B^0`, `B^1`: the cases `f = 1`, `n = 0, 1`.
pub fn integrate_closed(kernel: &Kernel, x: &IntegrandSpec) -> Result<ClosedIntegral> {
    let mut out = ClosedIntegral::default();
    if x.a == x.b {
        return Ok(out);
    }
    let chain = |out: &mut ClosedIntegral, f: &TestFunction, n: usize| -> Result<()> {
        let c = 1.0 / (n as f64 + 1.0);
        out.push_poly(kernel, unit_or(f, x.b)?, n + 1, c)?;
        out.push_poly(kernel, unit_or(f, x.a)?, n + 1, -c)
    };
    match &x.form {
        IntegrandForm::Deterministic(f) => out.push_poly(kernel, f.restrict(x.a, x.b)?, 1, 1.0)?,
        IntegrandForm::WickChain(f, n) => chain(&mut out, f, *n)?,
        IntegrandForm::WickExp(f) => {
            out.push_exp(unit_or(f, x.b)?, 1.0);
            out.push_exp(unit_or(f, x.a)?, -1.0);
        }
        IntegrandForm::PathPower(0) => {
            out.push_poly(kernel, TestFunction::one().restrict(x.a, x.b)?, 1, 1.0)?
        }
        IntegrandForm::PathPower(1) => chain(&mut out, &TestFunction::one(), 1)?,
        IntegrandForm::PathPower(k) => {
            return Err(Error::Unsupported(format!(
                "B^{k} has no closed-form stochastic integral here"
            )))
        }
        IntegrandForm::SmoothF(..) => {
            return Err(Error::Unsupported(
                "general F(t, X_t) integrands have no closed form".into(),
            ))
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeError {
    pub probe: String,
    pub numeric: f64,
    pub reference: f64,
    pub error: f64,
}

/// Expectation-level Itô check.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectationCheck {
    /// `E[F(tau, X_tau)] - F(0, 0)`.
    pub lhs: f64,
    /// `\int E[dF/dt] dt + (1/2) \int v'(t) E[d2F/dx2] dt`.
    pub rhs: f64,
    pub analytic: Option<f64>,
    pub quadrature_error: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub mc_z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub identity: String,
    pub probe_errors: Vec<ProbeError>,
    pub max_error: f64,
    pub tolerance: f64,
    pub mc_z_scores: Option<Vec<f64>>,
    /// Per-probe size of an expected discrepancy, for contrast checks.
    pub gaps: Option<Vec<f64>>,
    pub expectation: Option<ExpectationCheck>,
    pub pass: bool,
}

impl VerificationReport {
    fn from_errors(identity: String, probe_errors: Vec<ProbeError>, tolerance: f64) -> Self {
        let max_error = probe_errors.iter().map(|p| p.error).fold(0.0, f64::max);
        let finite = probe_errors.iter().all(|p| p.error.is_finite());
        VerificationReport {
            identity,
            pass: finite && max_error < tolerance,
            probe_errors,
            max_error,
            tolerance,
            mc_z_scores: None,
            gaps: None,
            expectation: None,
        }
    }
}

fn per_probe<T: Send>(
    probes: &[Probe],
    f: impl Fn(&Probe) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    probes.par_iter().map(f).collect()
}

/// Compares the time-quadrature transform of `\int X dB` with the transform
/// of its closed form at each probe.
pub fn verify_integral(
    kernel: &Kernel,
    x: &IntegrandSpec,
    probes: &[Probe],
    tolerance: f64,
) -> Result<VerificationReport> {
    let closed = integrate_closed(kernel, x)?;
    let errors = per_probe(probes, |p| {
        let numeric = integrate_numeric(kernel, x, p)?;
        let reference = closed.s_value(p);
        Ok(ProbeError {
            probe: p.label(),
            numeric,
            reference,
            error: (numeric - reference).abs(),
        })
    })?;
    Ok(VerificationReport::from_errors(
        x.label(),
        errors,
        tolerance,
    ))
}

/// `S_m(Y) S_m(\int X dB)` against `S_m(\int Y <> X_t dB)`, using
/// `S_m(Y <> X_t) = S_m(Y) S_m(X_t)`. `Y` lives in direction `y_dir`.
pub fn wick_shift_property(
    kernel: &Kernel,
    y_dir: &TestFunction,
    y: &WickPolynomial,
    x: &IntegrandSpec,
    probes: &[Probe],
    tolerance: f64,
) -> Result<VerificationReport> {
    let v = kernel.inner_product(y_dir, y_dir)?;
    if (y.variance - v).abs() > 1e-9 * v.max(1.0) {
        return Err(Error::DirectionMismatch(format!(
            "Y has variance {} but ||T_m {}||^2 = {v}",
            y.variance,
            y_dir.label()
        )));
    }
    let errors = per_probe(probes, |p| {
        let sy = y.s_value(&p.pair(y_dir));
        let numeric = weighted_time_integral(kernel, x, p, x.a, x.b, |_| sy)?;
        let reference = sy * integrate_numeric(kernel, x, p)?;
        Ok(ProbeError {
            probe: p.label(),
            numeric,
            reference,
            error: (numeric - reference).abs(),
        })
    })?;
    Ok(VerificationReport::from_errors(
        format!("wick shift: Y = {} <> {}", y.direction_label, x.label()),
        errors,
        tolerance,
    ))
}

/// For `Y = :e^{<omega, f>}:` and `X_t = :e^{B_m(t)}:` on `[0, tau]`, the
/// ordinary products satisfy
/// `S(Y \int X dB) - S(\int Y X dB) = e^{(T s, T f)} \int_0^tau e^{b_s(t) + (T f, T 1_t)} (T f, T 1_t)' dt`.
/// `numeric` holds `S(Y \int X dB) - S(\int Y X dB)`, `reference` the
/// right-hand side, and `gaps` its size. `f` must be a Gaussian bump.
pub fn wick_contrast(
    kernel: &Kernel,
    f: &TestFunction,
    tau: f64,
    probes: &[Probe],
    tolerance: f64,
) -> Result<VerificationReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Validation(format!(
            "contrast horizon {tau} must be positive"
        )));
    }
    let pf = Probe::new(kernel, f.clone())?;
    let quad = time_quad();
    let rows = per_probe(probes, |p| {
        let sf = p.pair(f);
        let ordinary =
            s_product_rule(kernel, f, &TestFunction::one().restrict(0.0, tau)?, p)? - sf.exp();
        let pts = [0.0, tau];
        let integral_of_product = integrate_fallible(&quad, &pts, |t| {
            Ok((sf + p.b_s(t) + pf.b_s(t)).exp() * p.b_s_prime(t))
        })?;
        let gap = sf.exp()
            * integrate_fallible(&quad, &pts, |t| {
                Ok((p.b_s(t) + pf.b_s(t)).exp() * pf.b_s_prime(t))
            })?;
        let numeric = ordinary - integral_of_product;
        Ok((
            ProbeError {
                probe: p.label(),
                numeric,
                reference: gap,
                error: (numeric - gap).abs(),
            },
            gap.abs(),
        ))
    })?;
    let (errors, gaps): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut rep = VerificationReport::from_errors(
        format!(
            "Y int X dB vs int Y X dB, Y = :e^<omega,{}>:, X = :e^B(t):, [0, {tau}]",
            f.label()
        ),
        errors,
        tolerance,
    );
    rep.pass = rep.pass && gaps.iter().any(|g| *g > 1e-3);
    rep.gaps = Some(gaps);
    Ok(rep)
}

/// Central differences at steps `h, h/2, h/4` with two Richardson
/// extrapolations; their disagreement must stay below `1e-4` relative.
pub fn derivative_ladder(v: impl Fn(f64) -> Result<f64>, t: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((v(t + h)? - v(t - h)?) / (2.0 * h)) };
    let (d1, d2, d3) = (d(h)?, d(0.5 * h)?, d(0.25 * h)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    let gap = (r2 - r1).abs();
    if !r2.is_finite() || gap > 1e-4 * r2.abs() + 1e-9 {
        return Err(Error::DerivativeInstability {
            t,
            detail: format!("Richardson estimates {r1:e} and {r2:e} disagree"),
        });
    }
    Ok(r2)
}

/// Itô formula for `F(t, X_t)`, `X_t = <omega, 1_t f>`, on `[0, tau]`.
///
/// Expectation level: `E[F(tau, X_tau)] - F(0, 0)` against the Lebesgue
/// terms, by Gauss-Hermite in space and adaptive quadrature in time, with a
/// Monte Carlo cross-check. Probe level: `S_m` of both sides at each probe,
/// with the stochastic term from [`integrate_numeric`].
#[allow(clippy::too_many_arguments)]
pub fn ito_check(
    kernel: &Kernel,
    f: &TestFunction,
    big_f: &SmoothF,
    tau: f64,
    n_mc: usize,
    seed: u64,
    probes: &[Probe],
    tolerance: f64,
) -> Result<VerificationReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Validation(format!(
            "Itô horizon {tau} must be positive"
        )));
    }
    let spec = IntegrandSpec::new(IntegrandForm::SmoothF(f.clone(), big_f.clone()), 0.0, tau)?;
    let pts = spec.breaks(0.0, tau);
    let v = |t: f64| direction_variance(kernel, f, t);
    let v_prime = |t: f64| -> Result<f64> {
        let gap = pts
            .iter()
            .map(|p| (t - p).abs())
            .fold(f64::INFINITY, f64::min);
        derivative_ladder(v, t, (gap / 50.0).min(1e-2))
    };
    let f00 = (big_f.value)(0.0, 0.0);
    let quad = time_quad();
    let lebesgue = |mean: &dyn Fn(f64) -> f64| -> Result<f64> {
        integrate_fallible(&quad, &pts, |t| {
            let vt = v(t)?;
            let mu = mean(t);
            let a = gauss_hermite(mu, vt, |y| (big_f.dt)(t, y))?;
            let b = gauss_hermite(mu, vt, |y| (big_f.dxx)(t, y))?;
            Ok(a + if b == 0.0 { 0.0 } else { 0.5 * v_prime(t)? * b })
        })
    };

    let v_tau = v(tau)?;
    let lhs = gauss_hermite(0.0, v_tau, |y| (big_f.value)(tau, y))? - f00;
    let rhs = lebesgue(&|_| 0.0)?;
    let analytic = big_f.gaussian_mean.as_ref().map(|g| g(tau, v_tau) - f00);

    let direction = f.restrict(0.0, tau)?;
    let ens = sample(
        kernel,
        &[],
        std::slice::from_ref(&direction),
        n_mc.max(2),
        seed,
        Method::Cholesky,
    )?;
    let xs = ens.column(0);
    let vals: Vec<f64> = xs.iter().map(|x| (big_f.value)(tau, *x) - f00).collect();
    let (mc_mean, mc_stderr) = (stats::mean(&vals), stats::stderr_of_mean(&vals));
    let target = analytic.unwrap_or(rhs);
    let mc_z = if mc_stderr > 0.0 {
        (mc_mean - target) / mc_stderr
    } else if (mc_mean - target).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    let quadrature_error =
        analytic.map_or((lhs - rhs).abs(), |a| (lhs - a).abs().max((rhs - a).abs()));

    let errors = per_probe(probes, |p| {
        let mu_tau = p.pair(&direction);
        let left = gauss_hermite(mu_tau, v_tau, |y| (big_f.value)(tau, y))? - f00;
        let leb = lebesgue(&|t| unit_or(f, t).map(|d| p.pair(&d)).unwrap_or(f64::NAN))?;
        let stochastic = integrate_numeric(kernel, &spec, p)?;
        let right = leb + stochastic;
        Ok(ProbeError {
            probe: p.label(),
            numeric: right,
            reference: left,
            error: (right - left).abs(),
        })
    })?;
    let mut rep = VerificationReport::from_errors(
        format!(
            "Itô formula, F = {}, f = {}, tau = {tau}",
            big_f.name,
            f.label()
        ),
        errors,
        tolerance,
    );
    rep.pass = rep.pass && quadrature_error < 1e-6 && mc_z.abs() < 4.0;
    rep.mc_z_scores = Some(vec![mc_z]);
    rep.expectation = Some(ExpectationCheck {
        lhs,
        rhs,
        analytic,
        quadrature_error,
        mc_mean,
        mc_stderr,
        mc_z,
    });
    Ok(rep)
}
