//! Command-line front end: coverage sweeps and gain histograms as CSV.
//!
//! Thresholds are given in dB on the command line and converted to linear
//! before reaching the core crate.

use std::ffi::OsString;
use std::io::Write;

use aerocomp::analytic::coverage_curve;
use aerocomp::sir_mc::{empirical_gain_pdf, gain_pdf_for_servers, simulate_curve};
use aerocomp::{Params, Scheme};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const COVERAGE_HEADER: [&str; 9] = [
    "swept_name",
    "swept_value",
    "scheme",
    "method",
    "value",
    "ci_low",
    "ci_high",
    "n_trials",
    "seed",
];

pub const SWEEP_NAMES: [&str; 5] = ["sir_threshold_db", "r_cluster", "c_f", "lambda_b", "h_ue"];

/// Two-sided 95% normal quantile for analytic error bars.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Output(_) => 3,
        }
    }
}

impl From<aerocomp::Error> for CliError {
    fn from(e: aerocomp::Error) -> Self {
        use aerocomp::Error as E;
        match e {
            E::Parse { .. } | E::Validation(_) | E::Io(_) => CliError::Usage(e.to_string()),
            E::Domain(_) | E::Accuracy(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "aerocomp", version, about = "Coverage of cache-assisted CoMP for aerial users")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coverage probability, optionally swept over one parameter.
    Coverage(CoverageArgs),
    /// Histogram of the desired-signal gain against its matched Gamma.
    GainPdf(GainPdfArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Simulated,
    Analytic,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Simulated => "simulated",
            Method::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// `tableI` for the reference deployment, or a config file path.
    #[arg(long, default_value = "tableI")]
    pub config: String,
    /// Defaults to the config's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outer radius of the analytic interference integral, m.
    #[arg(long = "v-max")]
    pub v_max: Option<f64>,
    #[arg(long = "kappa-max")]
    pub kappa_max: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "simulated")]
    pub method: Method,
    /// Repeatable; defaults to comp-exact.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Vec<Scheme>,
    /// NAME:START:STOP:STEP, NAME one of sir_threshold_db, r_cluster, c_f, lambda_b, h_ue.
    #[arg(long, value_parser = parse_sweep, allow_hyphen_values = true)]
    pub sweep: Option<Sweep>,
    /// Defaults to the config's n_trials.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GainPdfArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Fading realizations of the fixed serving set.
    #[arg(long, default_value_t = 100_000)]
    pub realizations: usize,
    /// Keep only the strongest caching SBS.
    #[arg(long)]
    pub single_server: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse::<Scheme>().map_err(|e| e.to_string())
}

/// Parses `NAME:START:STOP:STEP` into its grid; `STOP` is included when the
/// steps land on it.
pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [name, start, stop, step] = parts[..] else {
        return Err(format!("sweep `{s}` is not NAME:START:STOP:STEP"));
    };
    if !SWEEP_NAMES.contains(&name) {
        return Err(format!("unknown sweep parameter `{name}` (expected one of {})", SWEEP_NAMES.join(", ")));
    }
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("sweep bound `{t}` is not a finite number"))
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if step <= 0.0 {
        return Err(format!("sweep step must be > 0 (got {step})"));
    }
    if stop < start {
        return Err(format!("sweep stop {stop} is below start {start}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n >= 100_000 {
        return Err(format!("sweep has {} points; at most 100000 allowed", n + 1));
    }
    let values = (0..=n).map(|i| tidy(start + step * i as f64)).collect();
    Ok(Sweep {
        name: name.to_string(),
        values,
    })
}

/// Removes the binary noise left by accumulating a decimal step.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn load_params(c: &ConfigArgs) -> CliResult<Params> {
    let mut p = if c.config == "tableI" {
        Params::table_i()
    } else {
        Params::load_config(&c.config)?
    };
    if let Some(s) = c.seed {
        p.numerics.rng_seed = s;
    }
    if let Some(v) = c.v_max {
        p.numerics.v_max = v;
    }
    if let Some(k) = c.kappa_max {
        p.numerics.kappa_max = Some(k);
    }
    p.validate()?;
    Ok(p)
}

/// One CSV row of a coverage run.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub swept_name: String,
    pub swept_value: f64,
    pub scheme: Scheme,
    pub method: Method,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<Row>,
}

impl SweepResult {
    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.swept_name
                .cmp(&b.swept_name)
                .then(a.swept_value.total_cmp(&b.swept_value))
                .then(a.scheme.name().cmp(b.scheme.name()))
        });
    }

    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COVERAGE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.swept_name.clone(),
                r.swept_value.to_string(),
                r.scheme.name().to_string(),
                r.method.name().to_string(),
                r.value.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.n_trials.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn apply_sweep(p: &Params, name: &str, x: f64) -> CliResult<Params> {
    let mut q = p.clone();
    match name {
        "sir_threshold_db" => q.sir_threshold = db_to_linear(x),
        "r_cluster" => q.r_cluster = x,
        "c_f" => q.c_f = x,
        "lambda_b" => q.lambda_b = x,
        "h_ue" => q.h_ue = x,
        other => return Err(CliError::Usage(format!("unknown sweep parameter `{other}`"))),
    }
    // a fixed cache-count truncation may no longer cover the new mean
    if p.numerics.kappa_max.is_none() {
        q.numerics.kappa_max = None;
    }
    q.validate()?;
    Ok(q)
}

pub fn cmd_coverage(args: &CoverageArgs) -> CliResult<SweepResult> {
    let base = load_params(&args.config)?;
    let seed = base.numerics.rng_seed;
    let trials = args.trials.unwrap_or(base.numerics.n_trials);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let mut schemes = if args.scheme.is_empty() {
        vec![Scheme::CompExact]
    } else {
        args.scheme.clone()
    };
    schemes.sort();
    schemes.dedup();
    if args.method == Method::Analytic && schemes.contains(&Scheme::NearestSbs) {
        return Err(CliError::Usage(
            "the analytic method covers joint transmission only; drop nearest-sbs".into(),
        ));
    }
    let sweep = args.sweep.clone().unwrap_or_else(|| Sweep {
        name: "sir_threshold_db".into(),
        values: vec![tidy(linear_to_db(base.sir_threshold))],
    });

    // threshold sweeps share one set of worlds; other sweeps rebuild them
    let points: Vec<(Params, Vec<f64>)> = if sweep.name == "sir_threshold_db" {
        vec![(base.clone(), sweep.values.clone())]
    } else {
        sweep
            .values
            .iter()
            .map(|&x| Ok((apply_sweep(&base, &sweep.name, x)?, vec![x])))
            .collect::<CliResult<_>>()?
    };

    let mut result = SweepResult::default();
    for (p, xs) in &points {
        let thetas: Vec<f64> = if sweep.name == "sir_threshold_db" {
            xs.iter().map(|&db| db_to_linear(db)).collect()
        } else {
            vec![p.sir_threshold]
        };
        let mut push = |scheme: Scheme, i: usize, value: f64, lo: f64, hi: f64, n: usize| {
            result.rows.push(Row {
                swept_name: sweep.name.clone(),
                swept_value: xs[i],
                scheme,
                method: args.method,
                value,
                ci_low: lo,
                ci_high: hi,
                n_trials: n,
                seed,
            })
        };
        match args.method {
            Method::Simulated => {
                let curves = simulate_curve(p, &schemes, &thetas, trials, seed)?;
                for (&scheme, curve) in schemes.iter().zip(&curves) {
                    for (i, e) in curve.iter().enumerate() {
                        push(scheme, i, e.p_hat, e.ci_low, e.ci_high, e.n_trials);
                    }
                }
            }
            Method::Analytic => {
                let aerial = schemes.iter().any(|s| *s != Scheme::GroundUser);
                let aerial_curve = if aerial { Some(coverage_curve(p, &thetas)?) } else { None };
                let ground_curve = if schemes.contains(&Scheme::GroundUser) {
                    Some(coverage_curve(&p.ground_variant(), &thetas)?)
                } else {
                    None
                };
                for &scheme in &schemes {
                    let curve = if scheme == Scheme::GroundUser {
                        ground_curve.as_ref()
                    } else {
                        aerial_curve.as_ref()
                    }
                    .expect("curve computed");
                    for (i, e) in curve.iter().enumerate() {
                        let lo = (e.value - Z95 * e.std_error).max(0.0);
                        let hi = (e.value + Z95 * e.std_error).min(1.0);
                        push(scheme, i, e.value, lo, hi, p.numerics.n_geom);
                    }
                }
            }
        }
    }
    result.sort();
    Ok(result)
}

/// Histogram rows plus the Kolmogorov-Smirnov summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPdfTable {
    pub bin_center: Vec<f64>,
    pub empirical_density: Vec<f64>,
    pub matched_gamma_density: Vec<f64>,
    pub ks_distance: f64,
    pub ks_pvalue: f64,
    pub k_eq: f64,
    pub n_servers: usize,
}

impl GainPdfTable {
    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "empirical_density", "matched_gamma_density"])?;
        for i in 0..self.bin_center.len() {
            w.write_record([
                self.bin_center[i].to_string(),
                self.empirical_density[i].to_string(),
                self.matched_gamma_density[i].to_string(),
            ])?;
        }
        w.flush()?;
        let mut out = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(
            out,
            "# ks_distance={} ks_pvalue={} k_eq={} servers={}",
            self.ks_distance, self.ks_pvalue, self.k_eq, self.n_servers
        )?;
        Ok(())
    }
}

pub fn cmd_gain_pdf(args: &GainPdfArgs) -> CliResult<GainPdfTable> {
    if args.realizations == 0 {
        return Err(CliError::Usage("--realizations must be >= 1".into()));
    }
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be >= 1".into()));
    }
    let p = load_params(&args.config)?;
    let seed = p.numerics.rng_seed;
    let mut pdf = empirical_gain_pdf(&p, args.realizations, args.bins, seed)?;
    if args.single_server {
        let strongest = pdf.zetas.iter().copied().fold(0.0, f64::max);
        pdf = gain_pdf_for_servers(&p, &[strongest], args.realizations, args.bins, seed)?;
    }
    Ok(GainPdfTable {
        bin_center: pdf.bin_centers,
        empirical_density: pdf.empirical_density,
        matched_gamma_density: pdf.matched_density,
        ks_distance: pdf.ks_distance,
        ks_pvalue: pdf.ks_pvalue,
        k_eq: pdf.k_eq,
        n_servers: pdf.zetas.len(),
    })
}

/// Parses `argv`, runs the command and writes CSV to `out`; returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Coverage(a) => cmd_coverage(a).and_then(|r| r.write_csv(&mut *out)),
        Command::GainPdf(a) => cmd_gain_pdf(a).and_then(|t| t.write_csv(&mut *out)),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "aerocomp: {e}");
            e.exit_code()
        }
    }
}
