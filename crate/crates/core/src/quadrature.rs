//! Quadrature primitives: Gauss rules, adaptive Gauss-Kronrod, and a graded
//! mesh for integrable power-law singularities at the origin.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an interpolatory rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
    pub fn legendre(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / dp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Gauss-Hermite rule for the weight `exp(-x^2)`, nodes ascending.
    pub fn hermite(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let (mut p1, mut p2) = (PIM4, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        x.reverse();
        w.reverse();
        GaussRule {
            nodes: x,
            weights: w,
        }
    }

    /// Integrate `f` over `[a, b]` with the Legendre rule mapped affinely.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Shared Gauss-Legendre rule of order `n`.
pub fn legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("legendre cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussRule::legendre(n)))
        .clone()
}

/// Shared Gauss-Hermite rule of order `n`.
pub fn hermite(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("hermite cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussRule::hermite(n)))
        .clone()
}

// Kronrod abscissae and weights of the 15-point rule, with the embedded
// 7-point Gauss weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod evaluation; returns `(integral, |kronrod - gauss|)`.
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Self {
        Adaptive {
            abs_tol,
            rel_tol,
            max_intervals,
        }
    }

    /// Integrate over `[a, b]`.
    pub fn integrate(&self, f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrate over consecutive panels `[p0, p1], [p1, p2], ...`.
    ///
    /// The breakpoints must be sorted; degenerate panels are skipped.
    pub fn integrate_breaks(
        &self,
        mut f: impl FnMut(f64) -> f64,
        points: &[f64],
    ) -> Result<Estimate> {
        let mut heap = BinaryHeap::with_capacity(points.len() * 2);
        let mut total = 0.0;
        let mut total_err = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b == a {
                continue;
            }
            let (value, error) = gk15(&mut f, a, b);
            total += value;
            total_err += error;
            heap.push(Segment { a, b, value, error });
        }
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= target || heap.is_empty() {
                break;
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::NonConvergence(format!(
                    "{} intervals used, error estimate {total_err:e} above target {target:e}",
                    heap.len()
                )));
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Interval cannot be split further in floating point.
                heap.push(Segment {
                    error: 0.0,
                    ..worst
                });
                total_err -= worst.error;
                continue;
            }
            let (v1, e1) = gk15(&mut f, worst.a, mid);
            let (v2, e2) = gk15(&mut f, mid, worst.b);
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // Re-sum from the segments to shed the drift of incremental updates.
        let mut parts: Vec<(f64, f64)> = heap.iter().map(|s| (s.a, s.value)).collect();
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let values: Vec<f64> = parts.into_iter().map(|p| p.1).collect();
        let intervals = values.len();
        Ok(Estimate {
            value: pairwise_sum(&values),
            error: total_err.max(0.0),
            intervals,
        })
    }

    /// Integrate `f` over `(0, upper]` when `f` may carry an integrable
    /// power-law singularity at the origin.
    ///
    /// The interval is split geometrically (ratio 1/2) toward zero for at most
    /// `levels` levels. Once consecutive level contributions decay at a stable
    /// ratio `rho`, the remaining geometric series `c rho / (1 - rho)` is added
    /// in closed form.
    pub fn integrate_graded(
        &self,
        mut f: impl FnMut(f64) -> f64,
        upper: f64,
        levels: usize,
    ) -> Result<Estimate> {
        let inner = Adaptive {
            abs_tol: self.abs_tol * 1e-3,
            ..*self
        };
        let mut contributions = Vec::with_capacity(levels);
        let mut err = 0.0;
        let mut intervals = 0;
        let mut hi = upper;
        let mut prev_ratio = f64::NAN;
        let mut remainder = 0.0;
        for level in 0..levels {
            let lo = 0.5 * hi;
            let est = inner.integrate(&mut f, lo, hi)?;
            err += est.error;
            intervals += est.intervals;
            let c = est.value;
            contributions.push(c);
            hi = lo;
            let total_abs: f64 = contributions.iter().map(|v| v.abs()).sum();
            if c == 0.0 && level >= 3 && contributions[level - 1] == 0.0 {
                break;
            }
            if level >= 1 {
                let prev = contributions[level - 1];
                if prev != 0.0 {
                    let ratio = c / prev;
                    let settled = (ratio - prev_ratio).abs() <= 1e-9;
                    if level >= 4 && ratio.abs() < 1.0 && (settled || c.abs() <= 1e-17 * total_abs)
                    {
                        remainder = c * ratio / (1.0 - ratio);
                        break;
                    }
                    prev_ratio = ratio;
                }
            }
            if level + 1 == levels {
                if prev_ratio.abs() < 1.0 {
                    remainder = c * prev_ratio / (1.0 - prev_ratio);
                } else if c.abs() > self.abs_tol.max(self.rel_tol * total_abs) {
                    return Err(Error::Divergence(format!(
                        "graded mesh contributions do not decay toward the origin (last {c:e})"
                    )));
                }
            }
        }
        contributions.push(remainder);
        // Smallest terms first for accuracy.
        contributions.reverse();
        Ok(Estimate {
            value: pairwise_sum(&contributions),
            error: err + remainder.abs() * 1e-9,
            intervals,
        })
    }

    /// Integrate `f` over `[lower, infinity)` for a non-oscillatory integrand
    /// decaying at least like an integrable power, via `x = lower / u`.
    pub fn integrate_tail(
        &self,
        mut f: impl FnMut(f64) -> f64,
        lower: f64,
        levels: usize,
    ) -> Result<Estimate> {
        assert!(lower > 0.0, "tail integration needs a positive lower bound");
        self.integrate_graded(
            |u| {
                let x = lower / u;
                if x.is_finite() {
                    f(x) * lower / (u * u)
                } else {
                    0.0
                }
            },
            1.0,
            levels,
        )
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Expectation `E[g(mean + sqrt(var) Z)]`, `Z ~ N(0, 1)`, by Gauss-Hermite.
pub fn gaussian_expectation(
    rule: &GaussRule,
    mean: f64,
    var: f64,
    mut g: impl FnMut(f64) -> f64,
) -> f64 {
    let scale = (2.0 * var.max(0.0)).sqrt();
    let mut terms = Vec::with_capacity(rule.nodes.len());
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        terms.push(w * g(mean + scale * x));
    }
    pairwise_sum(&terms) / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::legendre(10);
        // degree 19 is exact for 10 nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let rule = GaussRule::hermite(100);
        let sp = PI.sqrt();
        let m0: f64 = rule.weights.iter().sum();
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        let m4: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((m0 - sp).abs() < 1e-13, "{m0}");
        assert!((m2 - sp / 2.0).abs() < 1e-13);
        assert!((m4 - 0.75 * sp).abs() < 1e-13);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn kronrod_is_exact_for_degree_22() {
        let (v, _) = gk15(&mut |x: f64| x.powi(22) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let q = Adaptive::default();
        let est = q.integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((est.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn adaptive_reports_budget_exhaustion() {
        let q = Adaptive::new(1e-15, 0.0, 10);
        let err = q
            .integrate(|x| x.abs().sqrt().recip(), -1.0, 1.0)
            .unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }

    #[test]
    fn graded_mesh_resolves_inverse_square_root() {
        let q = Adaptive::default();
        let est = q.integrate_graded(|x| x.powf(-0.5), 1.0, 60).unwrap();
        assert!((est.value - 2.0).abs() < 1e-11, "{}", est.value);
        let est = q
            .integrate_graded(|x| x.powf(-0.8) * (1.0 + x), 2.0, 60)
            .unwrap();
        let exact = 2f64.powf(0.2) / 0.2 + 2f64.powf(1.2) / 1.2;
        assert!(
            (est.value - exact).abs() < 1e-10 * exact,
            "{} vs {exact}",
            est.value
        );
    }

    #[test]
    fn tail_integral_of_power_law() {
        let q = Adaptive::default();
        let est = q.integrate_tail(|x| x.powf(-1.5), 4.0, 60).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_of_exponential() {
        let rule = hermite(100);
        let v = gaussian_expectation(&rule, 0.3, 1.7, f64::exp);
        assert!((v - (0.3f64 + 0.85).exp()).abs() < 1e-12);
    }
}
