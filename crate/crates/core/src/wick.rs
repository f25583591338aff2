//! Parameterised Hermite polynomials and the Wick algebra in one direction.
//!
//! `h_n^{[t]}(x) = n! sum_{k <= n/2} (-1/2)^k x^{n-2k} t^{2k} / (k! (n-2k)!)`.
//! For a direction `f` with `v = ||T_m f||^2`, `h~_n = h_n^{[sqrt v]}(<omega, f>)`
//! and `h~_n <> h~_k = h~_{n+k}`.
//!
//! Coefficients are generic over [`Coefficient`]: `f64` for speed, or
//! [`BigRational`] when an identity should hold exactly.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest Hermite degree accepted.
pub const MAX_DEGREE: usize = 64;

/// Scalar field for Wick polynomial coefficients.
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_bigint(n: &BigInt) -> Self;
    fn to_f64(&self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_bigint(&BigInt::from(n))
    }
}

impl Coefficient for f64 {
    fn from_bigint(n: &BigInt) -> Self {
        n.to_f64().unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coefficient for BigRational {
    fn from_bigint(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_DEGREE {
        Err(Error::HermiteOverflow(n))
    } else {
        Ok(())
    }
}

/// Integer coefficients `a_k = (-1)^k n! / (k! (n-2k)! 2^k)` of `x^{n-2k} t^{2k}`.
pub fn hermite_coefficients(n: usize) -> Result<Vec<BigInt>> {
    guard(n)?;
    let fact = |k: usize| -> BigInt { (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) };
    let nf = fact(n);
    Ok((0..=n / 2)
        .map(|k| {
            let den = fact(k) * fact(n - 2 * k) * (BigInt::one() << k);
            let a = &nf / den;
            if k % 2 == 1 {
                -a
            } else {
                a
            }
        })
        .collect())
}

/// `h_n^{[t]}(x)` from the explicit sum, terms added in order of `k`.
pub fn hermite_param(n: usize, t: f64, x: f64) -> Result<f64> {
    let coeffs = hermite_coefficients(n)?;
    let t2 = t * t;
    let mut acc = 0.0;
    for (k, a) in coeffs.iter().enumerate() {
        acc += a.to_f64().unwrap_or(f64::NAN) * t2.powi(k as i32) * x.powi((n - 2 * k) as i32);
    }
    Ok(acc)
}

/// `h_n^{[sqrt v]}(x)` from the explicit sum in any coefficient field.
pub fn hermite_param_exact<C: Coefficient>(n: usize, v: &C, x: &C) -> Result<C> {
    let poly = hermite_monomial(n, v)?;
    Ok(eval_monomial(&poly, x))
}

/// Monomial coefficients (index = power) of `h_n^{[sqrt v]}`.
pub fn hermite_monomial<C: Coefficient>(n: usize, v: &C) -> Result<Vec<C>> {
    let coeffs = hermite_coefficients(n)?;
    let mut out = vec![C::zero(); n + 1];
    let mut vk = C::one();
    for (k, a) in coeffs.iter().enumerate() {
        out[n - 2 * k] = C::from_bigint(a) * vk.clone();
        vk = vk * v.clone();
    }
    Ok(out)
}

/// Horner evaluation of `sum p_k x^k`.
pub fn eval_monomial<C: Coefficient>(poly: &[C], x: &C) -> C {
    poly.iter()
        .rev()
        .fold(C::zero(), |acc, c| acc * x.clone() + c.clone())
}

/// `sum_n coeffs[n] h~_n(<omega, f>)` for a fixed direction `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct WickPolynomial<C: Coefficient = f64> {
    pub direction_label: String,
    /// `v = ||T_m f||^2`.
    pub variance: C,
    pub coeffs: Vec<C>,
}

impl<C: Coefficient> WickPolynomial<C> {
    pub fn new(direction_label: impl Into<String>, variance: C, coeffs: Vec<C>) -> Result<Self> {
        let v = variance.to_f64();
        if !(v >= 0.0) {
            return Err(Error::Validation(format!(
                "variance {v} must be nonnegative"
            )));
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::HermiteOverflow(coeffs.len() - 1));
        }
        let mut p = WickPolynomial {
            direction_label: direction_label.into(),
            variance,
            coeffs,
        };
        p.trim();
        Ok(p)
    }

    pub fn constant(direction_label: impl Into<String>, variance: C, c: C) -> Result<Self> {
        Self::new(direction_label, variance, vec![c])
    }

    /// `h~_n` itself.
    pub fn basis(direction_label: impl Into<String>, variance: C, n: usize) -> Result<Self> {
        guard(n)?;
        let mut coeffs = vec![C::zero(); n + 1];
        coeffs[n] = C::one();
        Self::new(direction_label, variance, coeffs)
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(C::zero());
        }
    }

    pub fn degree(&self) -> usize {
        if self.coeffs.iter().all(|c| c.is_zero()) {
            0
        } else {
            self.coeffs.len() - 1
        }
    }

    /// `E[P] = coeffs[0]`.
    pub fn expectation(&self) -> C {
        self.coeffs[0].clone()
    }

    fn check_same_direction(&self, other: &Self) -> Result<()> {
        if self.direction_label != other.direction_label || self.variance != other.variance {
            return Err(Error::DirectionMismatch(format!(
                "`{}` (v = {:?}) vs `{}` (v = {:?})",
                self.direction_label, self.variance, other.direction_label, other.variance
            )));
        }
        Ok(())
    }

    /// `P <> Q`, kept to full degree.
    pub fn wick_product(&self, other: &Self) -> Result<Self> {
        self.check_same_direction(other)?;
        let mut out = vec![C::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(self.direction_label.clone(), self.variance.clone(), out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_direction(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[C], i: usize| v.get(i).cloned().unwrap_or_else(C::zero);
        let out = (0..n)
            .map(|i| get(&self.coeffs, i) + get(&other.coeffs, i))
            .collect();
        Self::new(self.direction_label.clone(), self.variance.clone(), out)
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .for_each(|x| *x = x.clone() * c.clone());
        out.trim();
        out
    }

    /// Monomial coefficients of `x |-> sum coeffs[n] h_n^{[sqrt v]}(x)`.
    pub fn to_monomial(&self) -> Result<Vec<C>> {
        let mut out = vec![C::zero(); self.coeffs.len()];
        for (n, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (k, h) in hermite_monomial(n, &self.variance)?.into_iter().enumerate() {
                out[k] = out[k].clone() + c.clone() * h;
            }
        }
        Ok(out)
    }

    /// Inverse of [`to_monomial`](Self::to_monomial).
    pub fn from_monomial(
        direction_label: impl Into<String>,
        variance: C,
        poly: &[C],
    ) -> Result<Self> {
        let mut rest: Vec<C> = poly.to_vec();
        if rest.is_empty() {
            rest.push(C::zero());
        }
        guard(rest.len() - 1)?;
        let mut coeffs = vec![C::zero(); rest.len()];
        // Every h_n is monic, so peel off leading terms from the top.
        for n in (0..rest.len()).rev() {
            let lead = rest[n].clone();
            if lead.is_zero() {
                continue;
            }
            for (k, h) in hermite_monomial(n, &variance)?.into_iter().enumerate() {
                rest[k] = rest[k].clone() - lead.clone() * h;
            }
            coeffs[n] = lead;
        }
        Self::new(direction_label, variance, coeffs)
    }

    /// Value at `<omega, f> = x`, by the three-term recurrence
    /// `h_{n+1} = x h_n - n v h_{n-1}`.
    pub fn evaluate(&self, x: &C) -> C {
        let mut acc = self.coeffs[0].clone();
        let mut prev = C::one();
        let mut cur = x.clone();
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            acc = acc + c.clone() * cur.clone();
            let next = x.clone() * cur.clone() - C::from_usize(n) * self.variance.clone() * prev;
            prev = cur;
            cur = next;
        }
        acc
    }

    /// `S_m` image at a probe with `q = (T_m s, T_m f)`: `sum coeffs[n] q^n`.
    pub fn s_value(&self, q: &C) -> C {
        eval_monomial(&self.coeffs, q)
    }

    pub fn to_f64(&self) -> WickPolynomial<f64> {
        WickPolynomial {
            direction_label: self.direction_label.clone(),
            variance: self.variance.to_f64(),
            coeffs: self.coeffs.iter().map(Coefficient::to_f64).collect(),
        }
    }
}

/// `:e^{<omega, f>}: ~ sum_{k <= n} h~_k / k!`.
pub fn wick_exp(n: usize, v: f64) -> Result<WickPolynomial<f64>> {
    Ok(wick_exp_exact(n, BigRational::zero())?.with_variance(v))
}

/// [`wick_exp`] with exact rational coefficients.
pub fn wick_exp_exact(n: usize, v: BigRational) -> Result<WickPolynomial<BigRational>> {
    guard(n)?;
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut fact = BigInt::one();
    for k in 0..=n {
        if k > 0 {
            fact *= BigInt::from(k);
        }
        coeffs.push(BigRational::new(BigInt::one(), fact.clone()));
    }
    WickPolynomial::new("f", v, coeffs)
}

impl WickPolynomial<BigRational> {
    fn with_variance(&self, v: f64) -> WickPolynomial<f64> {
        let mut out = self.to_f64();
        out.variance = v;
        out
    }
}

/// Exact rational from a float, for lifting test inputs.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}
