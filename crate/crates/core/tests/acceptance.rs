//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use spectral_wick::cli::{identity_suite, route_agreement};
use spectral_wick::ito_integral::{ito_check, IntegrandForm, IntegrandSpec, SmoothF};
use spectral_wick::kernel::{fractional_constant, Kernel};
use spectral_wick::s_transform::{hermite_reconstruction, s_gaussian, s_of_f};
use spectral_wick::sampling::{
    empirical_covariance, fraction_within, girsanov_check, joint_covariance, sample, Method,
};
use spectral_wick::wick::{eval_monomial, hermite_monomial, hermite_param_exact};
use spectral_wick::{KernelConfig, Probe, SpectralDensity, TestFunction, WickPolynomial};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn kernel(m: SpectralDensity) -> Kernel {
    Kernel::new(m, KernelConfig::default()).expect("kernel")
}

fn three_densities() -> Vec<SpectralDensity> {
    vec![
        SpectralDensity::white(),
        SpectralDensity::band_limited(1.0).unwrap(),
        SpectralDensity::fractional(0.7).unwrap(),
    ]
}

fn grid(end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| end * i as f64 / n as f64).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let k = kernel(SpectralDensity::white());
    let ts = grid(3.0, 16);
    let mut worst = 0.0_f64;
    for &t in &ts {
        for &s in &ts {
            worst = worst.max((k.covariance(t, s)? - t.min(s)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-6 && secs < 10.0,
        format!("max |K - min(t,s)| = {worst:.2e} (< 1e-6), {secs:.2} s (< 10 s)"),
    ))
}

/// `\int_0^\infty (1 - cos u) u^{-1-2H} du` by composite Simpson plus an
/// asymptotic tail.
fn fractional_integral(hurst: f64) -> f64 {
    let a = 1.0 + 2.0 * hurst;
    let g = |u: f64| 2.0 * (0.5 * u).sin().powi(2) * u.powf(-a);
    let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize| {
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    // u = 2 pi y^4 on [0, 2 pi].
    let head = simpson(
        &|y: f64| {
            if y == 0.0 {
                0.0
            } else {
                g(2.0 * PI * y.powi(4)) * 8.0 * PI * y.powi(3)
            }
        },
        0.0,
        1.0,
        20_000,
    );
    let periods = 400;
    let upper = 2.0 * PI * periods as f64;
    let body = simpson(&g, 2.0 * PI, upper, 128 * periods);
    let tail_power = upper.powf(1.0 - a) / (a - 1.0);
    let tail_cos = a * upper.powf(-a - 1.0) - a * (a + 1.0) * (a + 2.0) * upper.powf(-a - 3.0);
    head + body + tail_power - tail_cos
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for hurst in [0.6, 0.75] {
        let k = kernel(SpectralDensity::fractional(hurst)?);
        let ts = grid(4.0, 10);
        let mut ratios = Vec::new();
        for &t in &ts {
            for &s in &ts {
                let shape =
                    t.powf(2.0 * hurst) + s.powf(2.0 * hurst) - (t - s).abs().powf(2.0 * hurst);
                ratios.push(k.covariance(t, s)? / shape);
            }
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().fold(0.0_f64, |a, r| a.max((r - mean).abs())) / mean;
        let oracle = 2.0 / PI * fractional_integral(hurst);
        let gamma_form =
            -2.0 / PI * statrs::function::gamma::gamma(-2.0 * hurst) * (PI * hurst).cos();
        let constant_err = (2.0 * mean - oracle).abs() / oracle;
        ok &=
            spread < 1e-3 && constant_err < 1e-3 && (oracle - gamma_form).abs() < 1e-6 * gamma_form;
        notes.push(format!(
            "H={hurst}: spread {spread:.1e}, 2*ratio {:.8} vs quadrature c_H {oracle:.8} (rel {constant_err:.1e}), closed form {:.8}",
            2.0 * mean,
            fractional_constant(hurst)
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn criterion_3() -> Outcome {
    let ts = grid(4.0, 64);
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [
        SpectralDensity::white(),
        SpectralDensity::band_limited(1.0)?,
        SpectralDensity::fractional(0.75)?,
        SpectralDensity::band_limited_fractional(0.75, 1.0)?,
    ] {
        let label = m.label();
        let g = kernel(m).gram(&ts)?;
        let max_diag = (0..ts.len()).map(|i| g.values[(i, i)]).fold(0.0, f64::max);
        let rel = g.jitter_used / max_diag;
        ok &= rel <= 1e-10;
        notes.push(format!("{label}: jitter {rel:.0e}*max diag"));
    }
    Ok((ok, notes.join(", ")))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let ts = grid(4.0, 8);
    let n = 20_000;
    let mut ok = true;
    let mut notes = Vec::new();
    for m in three_densities() {
        let label = m.label();
        let k = kernel(m);
        let analytic = joint_covariance(&k, &ts, &[])?;
        let chol = empirical_covariance(&sample(&k, &ts, &[], n, 41, Method::Cholesky)?)?;
        let spec = empirical_covariance(&sample(&k, &ts, &[], n, 42, Method::Spectral)?)?;
        let fc = fraction_within(&chol.covariance, &analytic, &chol.stderr, 3.0);
        let fs = fraction_within(&spec.covariance, &analytic, &spec.stderr, 3.0);
        let joint: DMatrix<f64> = chol.stderr.zip_map(&spec.stderr, |a, b| a.hypot(b));
        let fx = fraction_within(&chol.covariance, &spec.covariance, &joint, 3.0);
        ok &= fc >= 0.95 && fs >= 0.95 && fx >= 0.95;
        notes.push(format!(
            "{label}: cholesky {:.0}%, spectral {:.0}%, cross {:.0}%",
            100.0 * fc,
            100.0 * fs,
            100.0 * fx
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    Ok((
        ok,
        format!("{} within 3 se; {secs:.1} s (< 60 s)", notes.join(", ")),
    ))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for m in three_densities() {
        let label = m.label();
        let k = kernel(m);
        let probes = Probe::standard_set(&k)?;
        let rows = identity_suite(&k, &probes, 1.0, 1e-6, 2_000, 7)?;
        let mut worst = 0.0_f64;
        let mut count = 0;
        for r in rows.iter().filter(|r| !r.identity.starts_with("S-routes")) {
            count += 1;
            ok &= r.pass && r.max_error < 1e-6;
            if !r.pass {
                notes.push(format!("{label} failed {}", r.identity));
            }
            worst = worst.max(r.max_error);
        }
        notes.push(format!(
            "{label}: {count} identities, max error {worst:.1e}"
        ));
    }

    // White noise: S(B(1)^2/2 - 1/2)(s) = (int_0^1 s)^2 / 2.
    let k = kernel(SpectralDensity::white());
    let x = IntegrandSpec::new(IntegrandForm::PathPower(1), 0.0, 1.0)?;
    let mut worst = 0.0_f64;
    for &(c, w) in spectral_wick::s_transform::STANDARD_PROBES.iter() {
        let p = Probe::bump(&k, c, w)?;
        let erf = statrs::function::erf::erf;
        let z = |u: f64| (u - c) / (w * 2f64.sqrt());
        let overlap = w * (PI / 2.0).sqrt() * (erf(z(1.0)) - erf(z(0.0)));
        let got = spectral_wick::ito_integral::integrate_numeric(&k, &x, &p)?;
        worst = worst.max((got - 0.5 * overlap * overlap).abs());
    }
    ok &= worst < 1e-6;
    notes.push(format!("white int B dB vs erf oracle {worst:.1e}"));
    Ok((ok, format!("{} (< 1e-6)", notes.join(", "))))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let f = TestFunction::indicator(0.0, 1.0);
    for m in three_densities() {
        let label = m.label();
        let k = kernel(m);
        let probes = Probe::standard_set(&k)?;
        let rows = route_agreement(&k, &probes, &f, 100_000, 8)?;
        let mut quad = 0.0_f64;
        let mut z = 0.0_f64;
        for r in &rows {
            ok &= r.pass;
            match &r.mc_z_scores {
                Some(zs) => z = zs.iter().fold(z, |a, b| a.max(b.abs())),
                None => quad = quad.max(r.max_error),
            }
        }
        notes.push(format!(
            "{label}: closed vs quadrature {quad:.1e}, max |z| {z:.2}"
        ));
    }
    Ok((ok, format!("{} (< 1e-8, |z| < 4)", notes.join(", "))))
}

fn criterion_7() -> Outcome {
    let mut worst_sq = 0.0_f64;
    let mut worst_h = 0.0_f64;
    for m in three_densities() {
        let k = kernel(m);
        let probes = Probe::standard_set(&k)?;
        let directions = [
            TestFunction::indicator(0.0, 1.0),
            TestFunction::indicator(-0.5, 2.0).scaled(0.7),
            TestFunction::bump(0.5, 0.5)?,
        ];
        for p in &probes {
            for f in &directions {
                let got = s_gaussian(&k, f, |x| x * x, p)?.value;
                let want = p.pair(f).powi(2) + k.inner_product(f, f)?;
                worst_sq = worst_sq.max((got - want).abs());
            }
            for t in [0.5, 1.5, -1.0] {
                let got = s_of_f(&k, &TestFunction::one(), t, |x| x * x, p)?.value;
                let want = p.b_s(t).powi(2) + k.r(t)?;
                worst_sq = worst_sq.max((got - want).abs());
            }
            for n in 0..=4 {
                let (got, want) = hermite_reconstruction(&k, &directions[0], n, p)?;
                worst_h = worst_h.max((got - want).abs());
            }
        }
    }
    Ok((
        worst_sq < 1e-8 && worst_h < 1e-8,
        format!("square rule max error {worst_sq:.1e}, Hermite reconstruction max error {worst_h:.1e} (< 1e-8)"),
    ))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    let one = TestFunction::one();
    for m in [SpectralDensity::white(), SpectralDensity::fractional(0.7)?] {
        let label = m.label();
        let k = kernel(m);
        let probes = Probe::standard_set(&k)?;
        let sq = ito_check(&k, &one, &SmoothF::square(), 1.0, 100_000, 9, &probes, 1e-5)?;
        let cos = ito_check(
            &k,
            &one,
            &SmoothF::cosine(),
            1.0,
            100_000,
            10,
            &probes,
            1e-5,
        )?;
        let e = cos
            .expectation
            .as_ref()
            .ok_or("missing expectation check")?;
        let analytic = (-0.5 * k.r(1.0)?).exp() - 1.0;
        let analytic_err = (e.analytic.unwrap_or(f64::NAN) - analytic).abs();
        ok &= sq.max_error < 1e-5
            && e.quadrature_error < 1e-6
            && analytic_err < 1e-12
            && e.mc_z.abs() < 4.0;
        notes.push(format!(
            "{label}: x^2 probe error {:.1e}, cos quadrature error {:.1e}, cos MC z {:.2}",
            sq.max_error, e.quadrature_error, e.mc_z
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    Ok((ok, format!("{}; {secs:.1} s (< 120 s)", notes.join(", "))))
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let f = TestFunction::indicator(0.0, 1.0);
    for m in [SpectralDensity::white(), SpectralDensity::fractional(0.7)?] {
        let label = m.label();
        let k = kernel(m);
        let rep = girsanov_check(&k, &f, &grid(4.0, 8), 40_000, 12)?;
        let weight_z = (rep.mean_weight - 1.0) / rep.mean_weight_stderr;
        ok &= rep.pass
            && rep.max_mean_z <= 5.0
            && rep.fraction_cov_within_3se >= 0.95
            && weight_z.abs() <= 5.0;
        notes.push(format!(
            "{label}: max mean z {:.2}, cov within 3 se {:.0}%, weight z {weight_z:.2}",
            rep.max_mean_z,
            100.0 * rep.fraction_cov_within_3se
        ));
    }
    Ok((ok, notes.join(", ")))
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + x * y;
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let v = q(3, 7);
    let points = [q(5, 3), q(-2, 9), q(0, 1)];
    let mut checks = 0;
    let mut ok = true;

    // Index additivity, checked in the monomial basis and through S-values.
    for n in 0..=20 {
        for kk in 0..=(20 - n) {
            let a = WickPolynomial::basis("f", v.clone(), n)?;
            let b = WickPolynomial::basis("f", v.clone(), kk)?;
            let prod = a.wick_product(&b)?;
            ok &= prod.to_monomial()? == hermite_monomial(n + kk, &v)?;
            for s in &points {
                ok &= prod.s_value(s) == a.s_value(s) * b.s_value(s);
            }
            checks += 1;
        }
    }

    // Wick product of arbitrary polynomials through the monomial basis.
    let p = [q(1, 2), q(-3, 1), q(0, 1), q(2, 5)];
    let r = [q(-1, 1), q(4, 3), q(1, 7)];
    let wp = WickPolynomial::from_monomial("f", v.clone(), &p)?;
    let wr = WickPolynomial::from_monomial("f", v.clone(), &r)?;
    let wpr = wp.wick_product(&wr)?;
    for s in &points {
        ok &= wpr.s_value(s) == wp.s_value(s) * wr.s_value(s);
    }

    // Zero variance reduces to ordinary powers.
    let zero = BigRational::zero();
    for n in 0..=20 {
        let mut e = vec![BigRational::zero(); n + 1];
        e[n] = BigRational::one();
        ok &= hermite_monomial(n, &zero)? == e;
        for x in &points {
            ok &= hermite_param_exact(n, &zero, x)? == num_traits::pow(x.clone(), n);
        }
    }

    // h_{n+1} = x h_n - n v h_{n-1}.
    let x_poly = [BigRational::zero(), BigRational::one()];
    for n in 1..=20 {
        let hn = hermite_monomial(n, &v)?;
        let hm = hermite_monomial(n - 1, &v)?;
        let mut rhs = poly_mul(&x_poly, &hn);
        let c = BigRational::from_integer(n.into()) * v.clone();
        for (i, h) in hm.iter().enumerate() {
            rhs[i] = &rhs[i] - &c * h;
        }
        ok &= rhs == hermite_monomial(n + 1, &v)?;
        for x in &points {
            ok &= eval_monomial(&rhs, x) == hermite_param_exact(n + 1, &v, x)?;
        }
    }
    Ok((
        ok,
        format!("{checks} index pairs with n+k <= 20, zero-variance powers and recurrence to n = 20, all exact"),
    ))
}

fn run_binary(dir: &Path, threads: &str, args: &[&str]) -> Result<(), Box<dyn std::error::Error>> {
    let status = Command::new(env!("CARGO_BIN_EXE_spectral-wick"))
        .args(args)
        .args(["--config", "run.toml", "--out", "out"])
        .current_dir(dir)
        .env("SPECTRAL_WICK_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .status()?;
    if status.code() != Some(0) {
        return Err(format!("{args:?} with {threads} threads exited with {status}").into());
    }
    Ok(())
}

fn output_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Box<dyn std::error::Error>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir.join("out"))? {
        let entry = entry?;
        files.push((
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path())?,
        ));
    }
    files.sort();
    Ok(files)
}

fn criterion_11() -> Outcome {
    let config = "density = { kind = \"fractional\", H = 0.7 }\n\n[mc]\nseed = 2024\n";
    let mut runs = Vec::new();
    for threads in ["1", "8", "8"] {
        let dir = tempfile::tempdir()?;
        std::fs::write(dir.path().join("run.toml"), config)?;
        run_binary(dir.path(), threads, &["verify-identities"])?;
        run_binary(dir.path(), threads, &["sample"])?;
        runs.push(output_files(dir.path())?);
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    let bytes: usize = runs[0].iter().map(|(_, b)| b.len()).sum();
    let ok = names.len() == 3 && runs.iter().all(|r| *r == runs[0]);
    Ok((
        ok,
        format!(
            "{} identical across thread counts 1, 8, 8 ({bytes} bytes)",
            names.join(", ")
        ),
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "white-noise reduction", criterion_1),
        (2, "fractional covariance law", criterion_2),
        (3, "Gram matrices factorize", criterion_3),
        (4, "sampling fidelity", criterion_4),
        (5, "identity suite", criterion_5),
        (6, "S-transform route agreement", criterion_6),
        (7, "square rule and Hermite reconstruction", criterion_7),
        (8, "Itô formula", criterion_8),
        (9, "Girsanov reweighting", criterion_9),
        (10, "exact Wick algebra", criterion_10),
        (11, "determinism across thread counts", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
