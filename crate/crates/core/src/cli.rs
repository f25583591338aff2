//! Configuration, subcommands and report writers behind the `spectral-wick`
//! binary.
//!
//! ```toml
//! density = { kind = "fractional", H = 0.75 }
//!
//! [grid]
//! end = 4.0
//! n = 8
//!
//! [mc]
//! n = 20000
//! seed = 42
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Exit codes: 0 when every check passes, 2 for configuration errors, 3 when
//! a check misses its tolerance, 1 for other failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::ito_integral::{
    integrate_numeric, integrate_numeric_over, ito_check, verify_integral, wick_contrast,
    wick_shift_property, IntegrandForm, IntegrandSpec, ProbeError, SmoothF, VerificationReport,
};
use crate::kernel::{Kernel, KernelConfig};
use crate::s_transform::{
    gauss_hermite, s_closed, s_gaussian, s_monte_carlo, Probe, Target, STANDARD_PROBES,
};
use crate::sampling::{empirical_covariance, fraction_within, girsanov_check, sample, Method};
use crate::spectral::{make_builtin, DensitySpec};
use crate::stats;
use crate::wick::WickPolynomial;
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SPECTRAL_WICK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Times are `end * i / n` for `i = 1..=n` unless `times` is given.
    pub end: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { end: 4.0, n: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n: usize,
    pub seed: Option<u64>,
    pub method: Method,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n: 20_000,
            seed: None,
            method: Method::Cholesky,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// `[center, width]` pairs replacing the standard set.
    pub custom: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// A deterministic function named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    One,
    Indicator { start: f64, end: f64 },
    Bump { center: f64, width: f64 },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        match *self {
            FunctionSpec::One => Ok(TestFunction::one()),
            FunctionSpec::Indicator { start, end } => {
                if !(start <= end) {
                    return Err(Error::config(
                        "indicator",
                        format!("start {start} exceeds end {end}"),
                    ));
                }
                Ok(TestFunction::indicator(start, end))
            }
            FunctionSpec::Bump { center, width } => TestFunction::bump(center, width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItoConfig {
    pub tau: f64,
    pub f: FunctionSpec,
    pub functions: Vec<String>,
    pub tolerance: f64,
}

impl Default for ItoConfig {
    fn default() -> Self {
        ItoConfig {
            tau: 1.0,
            f: FunctionSpec::One,
            functions: vec!["x^2".into(), "x".into(), "cos".into()],
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GirsanovConfig {
    pub f: FunctionSpec,
}

impl Default for GirsanovConfig {
    fn default() -> Self {
        GirsanovConfig {
            f: FunctionSpec::Indicator {
                start: 0.0,
                end: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    pub tau: f64,
    pub tolerance: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            tau: 1.0,
            tolerance: 1e-6,
        }
    }
}

/// Everything a run needs; embedded verbatim in every JSON report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub density: Option<DensitySpec>,
    pub kernel: KernelConfig,
    /// Explicit times; overrides `grid`.
    pub times: Option<Vec<f64>>,
    pub grid: GridConfig,
    pub mc: McConfig,
    pub probes: ProbeConfig,
    pub output: OutputConfig,
    pub ito: ItoConfig,
    pub girsanov: GirsanovConfig,
    pub identities: IdentityConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = field_in(&message).unwrap_or_else(|| "config".to_string());
            Error::config(key, message)
        })
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match &self.times {
            Some(t) => t.clone(),
            None => {
                if self.grid.n == 0 || !(self.grid.end > 0.0) {
                    return Err(Error::config("grid", "needs n >= 1 and end > 0"));
                }
                (1..=self.grid.n)
                    .map(|i| self.grid.end * i as f64 / self.grid.n as f64)
                    .collect()
            }
        };
        if times.is_empty() {
            return Err(Error::config("times", "no times given"));
        }
        Ok(times)
    }

    pub fn seed(&self) -> Result<u64> {
        self.mc.seed.ok_or_else(|| {
            Error::config("mc.seed", "a seed is required for Monte Carlo subcommands")
        })
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let spec = self
            .density
            .ok_or_else(|| Error::config("density", "no density given"))?;
        let m = make_builtin(spec).map_err(|e| Error::config("density", e.to_string()))?;
        self.kernel.validate()?;
        Kernel::new(m, self.kernel)
    }

    pub fn probes(&self, kernel: &Kernel) -> Result<Vec<Probe>> {
        let pairs: Vec<[f64; 2]> = match &self.probes.custom {
            Some(p) if p.is_empty() => {
                return Err(Error::config("probes.custom", "empty probe list"))
            }
            Some(p) => p.clone(),
            None => STANDARD_PROBES.iter().map(|&(c, w)| [c, w]).collect(),
        };
        pairs
            .iter()
            .map(|[c, w]| {
                Probe::bump(kernel, *c, *w)
                    .map_err(|e| Error::config("probes.custom", e.to_string()))
            })
            .collect()
    }

    fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("spectral-wick-out"))
    }
}

fn field_in(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "spectral-wick",
    version,
    about = "Gaussian stationary-increment processes, S-transforms and Wick-Itô integrals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Density shorthand `KIND[:params]`, e.g. `fractional:H=0.75`.
    #[arg(long)]
    density: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Covariance K_m(t, s) on the time grid, with r(t).
    Kernel(Common),
    /// Joint path draws and a covariance comparison.
    Sample(Common),
    /// Probe-level checks of the stochastic-integral identities and S-transform routes.
    VerifyIdentities(Common),
    /// Itô formula checks.
    ItoCheck(Common),
    /// Girsanov reweighting statistics.
    GirsanovCheck(Common),
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::config("--config", format!("cannot read {}: {e}", path.display()))
            })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &common.density {
        cfg.density = Some(DensitySpec::parse_shorthand(d)?);
    }
    if let Some(s) = common.seed {
        cfg.mc.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.output.dir = Some(o.clone());
    }
    Ok(cfg)
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return EXIT_CONFIG;
            }
        },
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_TOLERANCE,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn dispatch(command: &Command) -> Result<bool> {
    match command {
        Command::Kernel(c) => cmd_kernel(&resolve(c)?),
        Command::Sample(c) => cmd_sample(&resolve(c)?),
        Command::VerifyIdentities(c) => cmd_verify(&resolve(c)?),
        Command::ItoCheck(c) => cmd_ito(&resolve(c)?),
        Command::GirsanovCheck(c) => cmd_girsanov(&resolve(c)?),
    }
}

/// `{:.16e}`: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    subcommand: &'a str,
    config: &'a RunConfig,
    pass: bool,
    results: T,
}

fn write_json<T: Serialize>(
    cfg: &RunConfig,
    subcommand: &str,
    name: &str,
    pass: bool,
    results: T,
) -> Result<PathBuf> {
    let env = Envelope {
        version: VERSION,
        subcommand,
        config: cfg,
        pass,
        results,
    };
    let mut text =
        serde_json::to_string_pretty(&env).map_err(|e| Error::Validation(e.to_string()))?;
    text.push('\n');
    write_file(&cfg.out_dir(), name, &text)
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cmd_kernel(cfg: &RunConfig) -> Result<bool> {
    let kernel = cfg.kernel()?;
    let times = cfg.times()?;
    let r = kernel.r_many(&times)?;
    let mut csv = String::from("t,s,K,r_t\n");
    for (i, &t) in times.iter().enumerate() {
        for &s in &times {
            let k = kernel.covariance(t, s)?;
            let _ = writeln!(csv, "{},{},{},{}", num(t), num(s), num(k), num(r[i]));
        }
    }
    let path = write_file(&cfg.out_dir(), "kernel.csv", &csv)?;
    println!(
        "kernel: {} rows -> {}",
        times.len() * times.len(),
        path.display()
    );
    Ok(true)
}

#[derive(Serialize)]
struct SampleSummary {
    times: Vec<f64>,
    n: usize,
    seed: u64,
    method: Method,
    empirical_covariance: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
    analytic_covariance: Vec<Vec<f64>>,
    fraction_within_3se: f64,
    max_mean_z: f64,
    skewness: Vec<f64>,
    excess_kurtosis: Vec<f64>,
    pass: bool,
}

fn cmd_sample(cfg: &RunConfig) -> Result<bool> {
    let seed = cfg.seed()?;
    let kernel = cfg.kernel()?;
    let times = cfg.times()?;
    let n = cfg.mc.n;
    if n < 2 {
        return Err(Error::config("mc.n", "at least two draws are needed"));
    }
    let ens = sample(&kernel, &times, &[], n, seed, cfg.mc.method)?;
    let emp = empirical_covariance(&ens)?;
    let analytic = kernel.gram(&times)?.values;
    let within = fraction_within(&emp.covariance, &analytic, &emp.stderr, 3.0);
    let mut max_mean_z: f64 = 0.0;
    let mut skewness = Vec::new();
    let mut kurtosis = Vec::new();
    let mut gaussian = true;
    let nf = n as f64;
    for j in 0..times.len() {
        let col = ens.column(j);
        let se = stats::stderr_of_mean(&col);
        if se > 0.0 {
            max_mean_z = max_mean_z.max((stats::mean(&col) / se).abs());
        }
        let g1 = stats::skewness(&col);
        let g2 = stats::excess_kurtosis(&col);
        gaussian &= g1.abs() < 5.0 * (6.0 / nf).sqrt() && g2.abs() < 5.0 * (24.0 / nf).sqrt();
        skewness.push(g1);
        kurtosis.push(g2);
    }
    let pass = within >= 0.95 && max_mean_z <= 5.0 && gaussian;

    let mut csv = String::from("draw");
    for t in &times {
        let _ = write!(csv, ",B({t})");
    }
    csv.push('\n');
    for i in 0..n {
        csv.push_str(&i.to_string());
        for j in 0..times.len() {
            csv.push(',');
            csv.push_str(&num(ens.draws[(i, j)]));
        }
        csv.push('\n');
    }
    let draws = write_file(&cfg.out_dir(), "draws.csv", &csv)?;
    let summary = SampleSummary {
        times: times.clone(),
        n,
        seed,
        method: cfg.mc.method,
        empirical_covariance: matrix_rows(&emp.covariance),
        stderr: matrix_rows(&emp.stderr),
        analytic_covariance: matrix_rows(&analytic),
        fraction_within_3se: within,
        max_mean_z,
        skewness,
        excess_kurtosis: kurtosis,
        pass,
    };
    let json = write_json(cfg, "sample", "sample_summary.json", pass, &summary)?;
    println!(
        "sample: {n} draws, {:.1}% of covariance entries within 3 stderr -> {}, {}",
        100.0 * within,
        draws.display(),
        json.display()
    );
    Ok(pass)
}

/// The identity suite behind `verify-identities`.
pub fn identity_suite(
    kernel: &Kernel,
    probes: &[Probe],
    tau: f64,
    tolerance: f64,
    mc_n: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let one = TestFunction::one();
    let f = TestFunction::indicator(0.0, 1.0);
    let spec = IntegrandSpec::new;

    let mut named = |name: &str, mut rep: VerificationReport| {
        rep.identity = format!("{name}: {}", rep.identity);
        out.push(rep);
    };

    named(
        "Wiener integral of a deterministic integrand",
        verify_integral(
            kernel,
            &spec(IntegrandForm::Deterministic(f.clone()), 0.0, tau)?,
            probes,
            tolerance,
        )?,
    );
    named(
        "int_0^tau B dB = B(tau)^2/2 - ||T 1_tau||^2/2",
        verify_integral(
            kernel,
            &spec(IntegrandForm::PathPower(1), 0.0, tau)?,
            probes,
            tolerance,
        )?,
    );
    for n in 0..=5 {
        named(
            &format!("Hermite chain n = {n}"),
            verify_integral(
                kernel,
                &spec(IntegrandForm::WickChain(one.clone(), n), 0.0, tau)?,
                probes,
                tolerance,
            )?,
        );
    }
    named(
        "Wick exponential integral",
        verify_integral(
            kernel,
            &spec(IntegrandForm::WickExp(one.clone()), 0.0, tau)?,
            probes,
            tolerance,
        )?,
    );
    named(
        "increment: int_a^b dB = B(b) - B(a)",
        verify_integral(
            kernel,
            &spec(IntegrandForm::PathPower(0), 0.5 * tau, 1.5 * tau)?,
            probes,
            tolerance,
        )?,
    );

    // Restriction to M against integration of 1_M X over an enclosing interval.
    let chain = spec(IntegrandForm::WickChain(one.clone(), 2), 0.5 * tau, tau)?;
    let rows = probes
        .iter()
        .map(|p| {
            let inner = integrate_numeric(kernel, &chain, p)?;
            let outer = integrate_numeric_over(kernel, &chain, p, 0.0, 2.0 * tau)?;
            Ok(probe_row(p, outer, inner))
        })
        .collect::<Result<Vec<_>>>()?;
    named(
        "restriction",
        report(
            format!("{} inside [0, {}]", chain.label(), 2.0 * tau),
            rows,
            1e-8,
        ),
    );

    // Additivity over adjacent intervals.
    let rows = probes
        .iter()
        .map(|p| {
            let whole = integrate_numeric(
                kernel,
                &spec(IntegrandForm::WickChain(one.clone(), 2), 0.0, tau)?,
                p,
            )?;
            let left = integrate_numeric(
                kernel,
                &spec(IntegrandForm::WickChain(one.clone(), 2), 0.0, 0.4 * tau)?,
                p,
            )?;
            let right = integrate_numeric(
                kernel,
                &spec(IntegrandForm::WickChain(one.clone(), 2), 0.4 * tau, tau)?,
                p,
            )?;
            Ok(probe_row(p, left + right, whole))
        })
        .collect::<Result<Vec<_>>>()?;
    named(
        "additivity",
        report(
            format!("[0, {}] + [{}, {tau}]", 0.4 * tau, 0.4 * tau),
            rows,
            1e-9,
        ),
    );

    // Zero probe: S_m of a stochastic integral at s = 0 is its expectation.
    let zero = Probe::zero(kernel)?;
    let mut rows = Vec::new();
    for x in [
        spec(IntegrandForm::PathPower(1), 0.0, tau)?,
        spec(IntegrandForm::WickChain(f.clone(), 3), 0.0, tau)?,
        spec(IntegrandForm::WickExp(one.clone()), 0.0, tau)?,
    ] {
        let v = integrate_numeric(kernel, &x, &zero)?;
        rows.push(ProbeError {
            probe: format!("s = 0, {}", x.label()),
            numeric: v,
            reference: 0.0,
            error: v.abs(),
        });
    }
    named(
        "zero expectation",
        report("integrals at s = 0".into(), rows, 1e-10),
    );

    let v1 = kernel.inner_product(&f, &f)?;
    let y = WickPolynomial::basis(f.label(), v1, 1)?;
    named(
        "Wick product commutes with integration",
        wick_shift_property(
            kernel,
            &f,
            &y,
            &spec(IntegrandForm::WickChain(f.clone(), 1), 0.0, tau)?,
            probes,
            tolerance,
        )?,
    );
    let bump = TestFunction::bump(0.5, 0.5)?.scaled(0.5);
    named(
        "ordinary products do not commute",
        wick_contrast(kernel, &bump, tau, probes, tolerance)?,
    );

    out.extend(route_agreement(kernel, probes, &f, mc_n, seed)?);
    Ok(out)
}

fn probe_row(p: &Probe, numeric: f64, reference: f64) -> ProbeError {
    ProbeError {
        probe: p.label(),
        numeric,
        reference,
        error: (numeric - reference).abs(),
    }
}

fn report(identity: String, rows: Vec<ProbeError>, tolerance: f64) -> VerificationReport {
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    VerificationReport {
        identity,
        pass: rows.iter().all(|r| r.error.is_finite()) && max_error < tolerance,
        probe_errors: rows,
        max_error,
        tolerance,
        mc_z_scores: None,
        gaps: None,
        expectation: None,
    }
}

type Scalar = fn(f64) -> f64;

/// Closed form against Gauss-Hermite (tolerance `1e-8`) and against Monte
/// Carlo (`|z| < 4`) for `h~_n`, `n <= 4`, the Wick exponential, and
/// `F in {x, x^2, e^x, cos x}`.
pub fn route_agreement(
    kernel: &Kernel,
    probes: &[Probe],
    f: &TestFunction,
    mc_n: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    let v = kernel.inner_product(f, f)?;
    let mut directions: Vec<TestFunction> = probes
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| p.function().clone())
        .collect();
    directions.push(f.clone());
    let ens = sample(kernel, &[], &directions, mc_n, seed, Method::Cholesky)?;
    let xf = ens.direction_column(&f.label())?;
    let mut out = Vec::new();

    let mc_report = |name: String,
                     samples: &[f64],
                     exact: &dyn Fn(&Probe) -> Result<f64>|
     -> Result<VerificationReport> {
        let mut rows = Vec::new();
        let mut zs = Vec::new();
        for p in probes {
            let want = exact(p)?;
            let mc = s_monte_carlo(&ens, samples, p)?;
            let se = mc.stderr.unwrap_or(0.0);
            let z = if se > 0.0 {
                (mc.value - want) / se
            } else {
                0.0
            };
            zs.push(z);
            rows.push(probe_row(p, mc.value, want));
        }
        let mut rep = report(name, rows, f64::INFINITY);
        rep.pass = zs.iter().all(|z| z.abs() < 4.0);
        rep.mc_z_scores = Some(zs);
        Ok(rep)
    };

    for n in 0..=4 {
        let poly = WickPolynomial::basis(f.label(), v, n)?;
        let target = Target::Polynomial {
            direction: f.clone(),
            poly: poly.clone(),
        };
        let mut rows = Vec::new();
        for p in probes {
            let closed = s_closed(kernel, &target, p)?.value;
            let quad = s_gaussian(kernel, f, |x| poly.evaluate(&x), p)?.value;
            rows.push(probe_row(p, quad, closed));
        }
        out.push(report(
            format!("S-routes: closed vs quadrature, h~_{n}"),
            rows,
            1e-8,
        ));
        let samples: Vec<f64> = xf.iter().map(|x| poly.evaluate(x)).collect();
        out.push(mc_report(
            format!("S-routes: closed vs Monte Carlo, h~_{n}"),
            &samples,
            &|p| Ok(s_closed(kernel, &target, p)?.value),
        )?);
    }

    let target = Target::WickExp {
        direction: f.clone(),
    };
    let samples: Vec<f64> = xf.iter().map(|x| (x - 0.5 * v).exp()).collect();
    out.push(mc_report(
        "S-routes: closed vs Monte Carlo, Wick exponential".into(),
        &samples,
        &|p| Ok(s_closed(kernel, &target, p)?.value),
    )?);

    let functions: [(&str, Scalar, Option<fn(f64, f64) -> f64>); 4] = [
        ("x", |x| x, Some(|mu, _| mu)),
        ("x^2", |x| x * x, Some(|mu, v| mu * mu + v)),
        ("e^x", f64::exp, Some(|mu, v| (mu + 0.5 * v).exp())),
        ("cos x", f64::cos, Some(|mu, v| mu.cos() * (-0.5 * v).exp())),
    ];
    for (name, big_f, closed) in functions {
        let mut rows = Vec::new();
        for p in probes {
            let quad = s_gaussian(kernel, f, big_f, p)?.value;
            let exact = closed.map_or(f64::NAN, |c| c(p.pair(f), v));
            rows.push(probe_row(p, quad, exact));
        }
        out.push(report(
            format!("S-routes: closed vs quadrature, F = {name}"),
            rows,
            1e-8,
        ));
        let samples: Vec<f64> = xf.iter().map(|x| big_f(*x)).collect();
        out.push(mc_report(
            format!("S-routes: quadrature vs Monte Carlo, F = {name}"),
            &samples,
            &|p| gauss_hermite(p.pair(f), v, big_f),
        )?);
    }
    Ok(out)
}

fn print_table(reports: &[VerificationReport]) {
    println!(
        "{:<100} {:>12} {:>10}  result",
        "identity", "max error", "tolerance"
    );
    for r in reports {
        let err = match &r.mc_z_scores {
            Some(z) if r.expectation.is_none() => {
                format!("|z|<={:.2}", z.iter().fold(0.0_f64, |a, b| a.max(b.abs())))
            }
            _ => format!("{:.3e}", r.max_error),
        };
        let tol = if r.tolerance.is_finite() {
            format!("{:.0e}", r.tolerance)
        } else {
            "|z|<4".into()
        };
        let name: String = r.identity.chars().take(100).collect();
        println!(
            "{name:<100} {err:>12} {tol:>10}  {}",
            if r.pass { "pass" } else { "FAIL" }
        );
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    let seed = cfg.seed()?;
    let kernel = cfg.kernel()?;
    let probes = cfg.probes(&kernel)?;
    let reports = identity_suite(
        &kernel,
        &probes,
        cfg.identities.tau,
        cfg.identities.tolerance,
        cfg.mc.n.max(2),
        seed,
    )?;
    let pass = reports.iter().all(|r| r.pass);
    print_table(&reports);
    let path = write_json(cfg, "verify-identities", "identities.json", pass, &reports)?;
    println!("report -> {}", path.display());
    Ok(pass)
}

fn cmd_ito(cfg: &RunConfig) -> Result<bool> {
    let seed = cfg.seed()?;
    let kernel = cfg.kernel()?;
    let probes = cfg.probes(&kernel)?;
    let f = cfg.ito.f.build()?;
    let mut reports = Vec::new();
    for name in &cfg.ito.functions {
        let big_f = SmoothF::by_name(name)?;
        reports.push(ito_check(
            &kernel,
            &f,
            &big_f,
            cfg.ito.tau,
            cfg.mc.n.max(2),
            seed,
            &probes,
            cfg.ito.tolerance,
        )?);
    }
    let pass = reports.iter().all(|r| r.pass);
    print_table(&reports);
    let path = write_json(cfg, "ito-check", "ito.json", pass, &reports)?;
    println!("report -> {}", path.display());
    Ok(pass)
}

fn cmd_girsanov(cfg: &RunConfig) -> Result<bool> {
    let seed = cfg.seed()?;
    let kernel = cfg.kernel()?;
    let times = cfg.times()?;
    let f = cfg.girsanov.f.build()?;
    let rep = girsanov_check(&kernel, &f, &times, cfg.mc.n.max(2), seed)?;
    if let Some(w) = &rep.warning {
        eprintln!("warning: {w}");
    }
    println!(
        "girsanov: max |mean z| = {:.2}, {:.1}% of covariance entries within 3 stderr, mean weight {:.4} +- {:.4}: {}",
        rep.max_mean_z,
        100.0 * rep.fraction_cov_within_3se,
        rep.mean_weight,
        rep.mean_weight_stderr,
        if rep.pass { "pass" } else { "FAIL" }
    );
    let pass = rep.pass;
    let path = write_json(cfg, "girsanov-check", "girsanov.json", pass, &rep)?;
    println!("report -> {}", path.display());
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config() {
        let cfg = RunConfig::from_toml(
            r#"
density = { kind = "fractional", H = 0.75 }
times = [0.5, 1.0]
[mc]
n = 100
seed = 7
method = "spectral"
[kernel]
freq_cutoff = 500.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.density, Some(DensitySpec::Fractional { hurst: 0.75 }));
        assert_eq!(cfg.times().unwrap(), vec![0.5, 1.0]);
        assert_eq!(cfg.mc.method, Method::Spectral);
        assert_eq!(cfg.kernel.freq_cutoff, 500.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[mc]\nsead = 3\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "sead"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_grid() {
        let t = RunConfig::default().times().unwrap();
        assert_eq!(t, vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
    }

    #[test]
    fn missing_seed() {
        assert!(matches!(
            RunConfig::default().seed(),
            Err(Error::Config { .. })
        ));
    }
}
