//! Command-line front end: deterministic, file-friendly access to the
//! experiments in this crate.
//!
//! Seven subcommands cover the main capabilities: `fig1-contour` (closed-form
//! fidelity of the stored rotation over a coupling × time grid), `fig2-scan`
//! (output fidelity versus cooling rate at several background rates),
//! `thresholds` and `goldilocks` (fault-tolerance solvers), `channel`
//! (storage-channel tables), `simulate` (run a measurement pattern from a
//! JSON file), and `eom` (print the closed equation system for an
//! observable).
//!
//! Configuration resolves in four layers: built-in defaults, then a JSON
//! config file (`--config`), then command-line flags, and for the seed only,
//! the `CLUSTERDYN_SEED` environment variable between config file and
//! default. Every output starts with a metadata block (version, command,
//! seed, config echo); CSV uses `.` decimals, 9 significant digits, and `#`
//! comment lines, and JSON outputs carry the metadata as a leading `meta`
//! object. Repeated runs with the same configuration produce bit-identical
//! output regardless of `--jobs`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BathSpec, SystemParams};
use crate::eom::{build_eom, EomContext};
use crate::faulttol::{
    coupling_threshold_with, goldilocks_with, temperature_threshold_with, SolvedQuantity,
    THRESHOLD_Q,
};
use crate::mbqc::{
    self, cooling_scan, evolve_state, logical_channel, run_pattern, ChannelVariant,
    EvolutionMethod, IdealOutput, OutcomePolicy, Pattern,
};
use crate::pauli::{Lattice, PauliString};
use crate::qcore::{self, CzEntangler, DensityMatrix};
use crate::{Error, Result};

/// Environment variable consulted for the seed when neither the `--seed`
/// flag nor the config file provides one.
pub const SEED_ENV_VAR: &str = "CLUSTERDYN_SEED";

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(
    name = "clusterdyn",
    version,
    about = "Cluster-state dynamics and measurement-based computation under thermal noise"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. All rates are fractions of `Δ`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonOpts {
    /// Stabilizer gap Δ (energy unit; default 1)
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Cooling rate α of a generic single bath
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Heating rate β of a generic single bath
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Cold-bath coupling of the two-bath model
    #[arg(long, global = true)]
    pub alpha_bath: Option<f64>,
    /// Warm-background coupling of the two-bath model
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Logical X-rotation angle θ (default π/2)
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Wait before the first measurement
    #[arg(long, global = true)]
    pub t0: Option<f64>,
    /// Integrate with fixed-step RK4 at this step instead of the exact map
    #[arg(long, global = true)]
    pub rk4_step: Option<f64>,
    /// Seed for sampled measurement outcomes
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid evaluation (0 = library default)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tabular output format (default csv; solvers default to json)
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// JSON config file merged underneath the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// The available subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form fidelity of the stored X-rotation on an (α, t) grid
    Fig1Contour {
        /// Coupling grid: comma list, `lo:hi:n`, or `log:lo:hi:n` (exponents)
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Time grid (same syntax)
        #[arg(long)]
        t_grid: Option<String>,
    },
    /// Output fidelity versus cooling rate, one curve per background rate
    Fig2Scan {
        /// Background rates γ, one curve each (grid syntax)
        #[arg(long)]
        gamma_list: Option<String>,
        /// Cooling-rate grid (grid syntax)
        #[arg(long)]
        alpha_bath_grid: Option<String>,
        /// Ideal output the fidelity compares against
        #[arg(long, value_enum)]
        ideal: Option<IdealArg>,
    },
    /// Fault-tolerance threshold summary (temperature, coupling, optimum)
    Thresholds {
        /// Combined error-parameter target (default 0.0293)
        #[arg(long)]
        q_target: Option<f64>,
    },
    /// Detailed cooling-versus-background optimum
    Goldilocks {
        /// Combined error-parameter target (default 0.0293)
        #[arg(long)]
        q_target: Option<f64>,
    },
    /// Logical storage-channel table over decay factors
    Channel {
        /// Decay-factor grid, values in (0, 1] (grid syntax)
        #[arg(long)]
        w_grid: Option<String>,
        /// Lattice family of the channel
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Run a measurement pattern from a JSON file and print the transcript
    Simulate {
        /// Pattern file (JSON)
        pattern: PathBuf,
    },
    /// Print the closed equation system for a Pauli observable
    Eom {
        /// Observable, e.g. "X1 Z2" (phase prefix "-1 *" optional)
        observable: String,
        /// Site-role context file (JSON)
        context: PathBuf,
        /// Also evaluate the solved observable at these times (grid syntax)
        #[arg(long)]
        times: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fig1Contour { .. } => "fig1-contour",
            Command::Fig2Scan { .. } => "fig2-scan",
            Command::Thresholds { .. } => "thresholds",
            Command::Goldilocks { .. } => "goldilocks",
            Command::Channel { .. } => "channel",
            Command::Simulate { .. } => "simulate",
            Command::Eom { .. } => "eom",
        }
    }
}

/// Tabular output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Command-line spelling of [`IdealOutput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdealArg {
    GroundImage,
    EquilibriumImage,
}

impl From<IdealArg> for IdealOutput {
    fn from(arg: IdealArg) -> Self {
        match arg {
            IdealArg::GroundImage => IdealOutput::GroundImage,
            IdealArg::EquilibriumImage => IdealOutput::EquilibriumImage,
        }
    }
}

/// Command-line spelling of [`ChannelVariant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Line,
    Cubic,
}

impl From<VariantArg> for ChannelVariant {
    fn from(arg: VariantArg) -> Self {
        match arg {
            VariantArg::Line => ChannelVariant::Line,
            VariantArg::Cubic => ChannelVariant::Cubic,
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

/// Fully resolved run configuration, echoed verbatim into every output's
/// metadata block.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_bath: f64,
    pub gamma: f64,
    pub theta: f64,
    pub t0: f64,
    pub rk4_step: Option<f64>,
    pub seed: u64,
    pub jobs: usize,
    pub format: Option<OutputFormat>,
    pub alpha_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub gamma_list: Vec<f64>,
    pub alpha_bath_grid: Vec<f64>,
    pub w_grid: Vec<f64>,
    pub ideal_output: IdealOutput,
    pub variant: ChannelVariant,
    pub q_target: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta: 1.0,
            alpha: 0.0,
            beta: 0.0,
            alpha_bath: 0.0,
            gamma: 0.0,
            theta: std::f64::consts::FRAC_PI_2,
            t0: 0.0,
            rk4_step: None,
            seed: 0,
            jobs: 0,
            format: None,
            alpha_grid: linspace(0.0, 0.1, 11),
            t_grid: linspace(0.0, 4.0 * std::f64::consts::PI, 33),
            gamma_list: vec![1e-5, 1e-4, 1e-3, 1e-2],
            alpha_bath_grid: logspace(-5.0, -1.0, 25),
            w_grid: vec![1.0],
            ideal_output: IdealOutput::GroundImage,
            variant: ChannelVariant::Line,
            q_target: THRESHOLD_Q,
        }
    }
}

/// Config-file form of [`RunConfig`]: every field optional, unknown keys
/// rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigPatch {
    delta: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    alpha_bath: Option<f64>,
    gamma: Option<f64>,
    theta: Option<f64>,
    t0: Option<f64>,
    rk4_step: Option<f64>,
    seed: Option<u64>,
    jobs: Option<usize>,
    format: Option<OutputFormat>,
    alpha_grid: Option<Vec<f64>>,
    t_grid: Option<Vec<f64>>,
    gamma_list: Option<Vec<f64>>,
    alpha_bath_grid: Option<Vec<f64>>,
    w_grid: Option<Vec<f64>>,
    ideal_output: Option<IdealOutput>,
    variant: Option<ChannelVariant>,
    q_target: Option<f64>,
}

impl RunConfig {
    /// Merge defaults, the config file, the flags, and the seed environment
    /// fallback, in that priority order (later wins).
    pub fn resolve(opts: &CommonOpts) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seed_explicit = false;

        if let Some(path) = &opts.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("config file {}: {e}", path.display())))?;
            let patch: ConfigPatch = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("config file {}: {e}", path.display())))?;
            macro_rules! take {
                ($($field:ident),*) => { $( if let Some(v) = patch.$field { cfg.$field = v; } )* };
            }
            take!(delta, alpha, beta, alpha_bath, gamma, theta, t0, jobs);
            take!(alpha_grid, t_grid, gamma_list, alpha_bath_grid, w_grid);
            take!(ideal_output, variant, q_target);
            if patch.rk4_step.is_some() {
                cfg.rk4_step = patch.rk4_step;
            }
            if patch.format.is_some() {
                cfg.format = patch.format;
            }
            if let Some(s) = patch.seed {
                cfg.seed = s;
                seed_explicit = true;
            }
        }

        macro_rules! flag {
            ($($field:ident),*) => { $( if let Some(v) = opts.$field { cfg.$field = v; } )* };
        }
        flag!(delta, alpha, beta, alpha_bath, gamma, theta, t0, jobs);
        if opts.rk4_step.is_some() {
            cfg.rk4_step = opts.rk4_step;
        }
        if opts.format.is_some() {
            cfg.format = opts.format;
        }
        if let Some(s) = opts.seed {
            cfg.seed = s;
            seed_explicit = true;
        }

        if !seed_explicit {
            if let Ok(text) = std::env::var(SEED_ENV_VAR) {
                cfg.seed = text.trim().parse().map_err(|_| {
                    Error::Parse(format!("{SEED_ENV_VAR} must be a 64-bit unsigned integer, got {text:?}"))
                })?;
            }
        }
        Ok(cfg)
    }

    fn validate(&mut self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha-bath", self.alpha_bath),
            ("gamma", self.gamma),
            ("t0", self.t0),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        if let Some(step) = self.rk4_step {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "rk4-step must be positive and finite, got {step}"
                )));
            }
        }
        for (name, grid) in [
            ("alpha-grid", &mut self.alpha_grid),
            ("t-grid", &mut self.t_grid),
            ("gamma-list", &mut self.gamma_list),
            ("alpha-bath-grid", &mut self.alpha_bath_grid),
            ("w-grid", &mut self.w_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} must not be empty")));
            }
            if grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} contains a non-finite value")));
            }
            grid.sort_by(f64::total_cmp);
        }
        Ok(())
    }

    /// The bath the flags describe: two-bath when either two-bath rate is
    /// set, otherwise a generic single bath.
    pub fn bath(&self) -> Result<BathSpec> {
        let two = self.alpha_bath > 0.0 || self.gamma > 0.0;
        let single = self.alpha > 0.0 || self.beta > 0.0;
        if two && single {
            return Err(Error::InvalidParameter(
                "give either --alpha/--beta or --alpha-bath/--gamma, not both".into(),
            ));
        }
        if two {
            BathSpec::two_bath(self.alpha_bath, self.gamma)
        } else {
            BathSpec::single(self.alpha, self.beta)
        }
    }

    fn method(&self) -> EvolutionMethod {
        match self.rk4_step {
            Some(step) => EvolutionMethod::Rk4 { step: Some(step) },
            None => EvolutionMethod::Exact,
        }
    }

    fn format_or(&self, default: OutputFormat) -> OutputFormat {
        self.format.unwrap_or(default)
    }
}

// ---------------------------------------------------------------------------
// Grids and formatting
// ---------------------------------------------------------------------------

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

fn logspace(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    linspace(lo_exp, hi_exp, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

/// Parse a grid spec: `lo:hi:n` (linear), `log:lo:hi:n` (decade exponents),
/// or a comma-separated list of values.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    fn triple(s: &str, full: &str) -> Result<(f64, f64, usize)> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid spec {full:?} must be lo:hi:count")));
        }
        let lo = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid bound {:?}", parts[0])))?;
        let hi = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid bound {:?}", parts[1])))?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid count {:?}", parts[2])))?;
        if n == 0 {
            return Err(Error::Parse(format!("grid {full:?} must have at least one point")));
        }
        Ok((lo, hi, n))
    }

    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("log:") {
        let (lo, hi, n) = triple(rest, spec)?;
        return Ok(logspace(lo, hi, n));
    }
    if spec.contains(':') {
        let (lo, hi, n) = triple(spec, spec)?;
        return Ok(linspace(lo, hi, n));
    }
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {tok:?} in grid")))
        })
        .collect()
}

/// 9-significant-digit scientific form used in CSV output.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// Output assembly
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Meta<'a> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

impl<'a> Meta<'a> {
    fn new(command: &'a str, cfg: &'a RunConfig) -> Self {
        Meta { version: VERSION, command, seed: cfg.seed, config: cfg }
    }

    /// `#`-prefixed header block for text and CSV outputs.
    fn comment_block(&self, extra: &[(&str, String)]) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "# clusterdyn {}", self.version).expect("string write");
        writeln!(out, "# command: {}", self.command).expect("string write");
        writeln!(out, "# seed: {}", self.seed).expect("string write");
        writeln!(out, "# config: {}", serde_json::to_string(self.config)?).expect("string write");
        for (key, value) in extra {
            writeln!(out, "# {key}: {value}").expect("string write");
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: Meta<'a>,
    #[serde(flatten)]
    body: T,
}

fn json_document<T: Serialize>(meta: Meta<'_>, body: T) -> Result<String> {
    let mut out = serde_json::to_string_pretty(&Envelope { meta, body })?;
    out.push('\n');
    Ok(out)
}

fn csv_document(meta: &Meta<'_>, extra: &[(&str, String)], columns: &str, rows: &[String]) -> Result<String> {
    let mut out = meta.comment_block(extra)?;
    out.push_str(columns);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct RowsBody<T: Serialize> {
    rows: Vec<T>,
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Execute the parsed command line and return the full output text.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut cfg = RunConfig::resolve(&cli.common)?;
    match &cli.command {
        Command::Fig1Contour { alpha_grid, t_grid } => {
            if let Some(spec) = alpha_grid {
                cfg.alpha_grid = parse_grid(spec)?;
            }
            if let Some(spec) = t_grid {
                cfg.t_grid = parse_grid(spec)?;
            }
            cfg.validate()?;
            cmd_fig1_contour(&cfg, cli.command.name())
        }
        Command::Fig2Scan { gamma_list, alpha_bath_grid, ideal } => {
            if let Some(spec) = gamma_list {
                cfg.gamma_list = parse_grid(spec)?;
            }
            if let Some(spec) = alpha_bath_grid {
                cfg.alpha_bath_grid = parse_grid(spec)?;
            }
            if let Some(arg) = ideal {
                cfg.ideal_output = (*arg).into();
            }
            cfg.validate()?;
            cmd_fig2_scan(&cfg, cli.command.name())
        }
        Command::Thresholds { q_target } => {
            if let Some(q) = q_target {
                cfg.q_target = *q;
            }
            cfg.validate()?;
            cmd_thresholds(&cfg, cli.command.name())
        }
        Command::Goldilocks { q_target } => {
            if let Some(q) = q_target {
                cfg.q_target = *q;
            }
            cfg.validate()?;
            cmd_goldilocks(&cfg, cli.command.name())
        }
        Command::Channel { w_grid, variant } => {
            if let Some(spec) = w_grid {
                cfg.w_grid = parse_grid(spec)?;
            }
            if let Some(arg) = variant {
                cfg.variant = (*arg).into();
            }
            cfg.validate()?;
            cmd_channel(&cfg, cli.command.name())
        }
        Command::Simulate { pattern } => {
            cfg.validate()?;
            cmd_simulate(&cfg, cli.command.name(), pattern)
        }
        Command::Eom { observable, context, times } => {
            let times = times.as_deref().map(parse_grid).transpose()?;
            cfg.validate()?;
            cmd_eom(&cfg, cli.command.name(), observable, context, times.as_deref())
        }
    }
}

/// Execute and deliver the output (stdout or `--out`), returning the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(output) => {
            if let Some(path) = &cli.common.out {
                if let Err(e) = fs::write(path, &output) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 1;
                }
            } else {
                print!("{output}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Fig1Row {
    alpha: f64,
    t: f64,
    fidelity: f64,
}

fn cmd_fig1_contour(cfg: &RunConfig, name: &str) -> Result<String> {
    let pairs: Vec<(f64, f64)> = cfg
        .alpha_grid
        .iter()
        .flat_map(|&alpha| cfg.t_grid.iter().map(move |&t| (alpha, t)))
        .collect();
    let delta = cfg.delta;
    let rows: Vec<Fig1Row> = with_pool(cfg.jobs, || {
        pairs
            .par_iter()
            .map(|&(alpha, t)| Fig1Row { alpha, t, fidelity: mbqc::xrot_fidelity(alpha, t, delta) })
            .collect()
    })?;

    let meta = Meta::new(name, cfg);
    match cfg.format_or(OutputFormat::Csv) {
        OutputFormat::Json => json_document(meta, RowsBody { rows }),
        OutputFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{},{},{}", sig9(r.alpha), sig9(r.t), sig9(r.fidelity)))
                .collect();
            csv_document(&meta, &[], "alpha,t,fidelity", &lines)
        }
    }
}

#[derive(Serialize)]
struct Fig2Row {
    gamma: f64,
    alpha_bath: f64,
    fidelity: f64,
}

fn cmd_fig2_scan(cfg: &RunConfig, name: &str) -> Result<String> {
    let tasks: Vec<(f64, f64)> = cfg
        .gamma_list
        .iter()
        .flat_map(|&gamma| cfg.alpha_bath_grid.iter().map(move |&ab| (gamma, ab)))
        .collect();
    let (theta, delta, ideal) = (cfg.theta, cfg.delta, cfg.ideal_output);
    let rows: Vec<Fig2Row> = with_pool(cfg.jobs, || {
        tasks
            .par_iter()
            .map(|&(gamma, alpha_bath)| {
                let point = cooling_scan(gamma, &[alpha_bath], theta, delta, ideal)?[0];
                Ok(Fig2Row { gamma, alpha_bath, fidelity: point.fidelity })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let ideal_name = match cfg.ideal_output {
        IdealOutput::GroundImage => "ground_image",
        IdealOutput::EquilibriumImage => "equilibrium_image",
    };
    let extra = [("ideal-output", ideal_name.to_string())];
    let meta = Meta::new(name, cfg);
    match cfg.format_or(OutputFormat::Csv) {
        OutputFormat::Json => json_document(meta, RowsBody { rows }),
        OutputFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{},{},{}", sig9(r.gamma), sig9(r.alpha_bath), sig9(r.fidelity)))
                .collect();
            csv_document(&meta, &extra, "gamma,alpha_bath,fidelity", &lines)
        }
    }
}

#[derive(Serialize)]
struct GoldilocksPoint {
    gamma_star: f64,
    alpha_bath_star: f64,
}

#[derive(Serialize)]
struct ThresholdsSummary {
    #[serde(rename = "kT_star")]
    k_t_star: f64,
    coupling_star: f64,
    goldilocks: GoldilocksPoint,
    q_target: f64,
}

fn cmd_thresholds(cfg: &RunConfig, name: &str) -> Result<String> {
    let temperature = temperature_threshold_with(cfg.q_target)?;
    let coupling = coupling_threshold_with(cfg.q_target)?;
    let optimum = goldilocks_with(cfg.q_target)?;

    let SolvedQuantity::Temperature { k_t_over_delta } = temperature.solved else {
        unreachable!("temperature solver returns a temperature")
    };
    let SolvedQuantity::Coupling { rate_over_delta } = coupling.solved else {
        unreachable!("coupling solver returns a coupling")
    };
    let SolvedQuantity::CoolingOptimum { gamma_over_delta, alpha_bath_over_delta } = optimum.solved
    else {
        unreachable!("cooling optimizer returns an operating point")
    };

    let summary = ThresholdsSummary {
        k_t_star: k_t_over_delta,
        coupling_star: rate_over_delta,
        goldilocks: GoldilocksPoint {
            gamma_star: gamma_over_delta,
            alpha_bath_star: alpha_bath_over_delta,
        },
        q_target: cfg.q_target,
    };
    let meta = Meta::new(name, cfg);
    match cfg.format_or(OutputFormat::Json) {
        OutputFormat::Json => json_document(meta, summary),
        OutputFormat::Csv => {
            let lines = vec![
                format!("kT_star,{}", sig9(summary.k_t_star)),
                format!("coupling_star,{}", sig9(summary.coupling_star)),
                format!("gamma_star,{}", sig9(summary.goldilocks.gamma_star)),
                format!("alpha_bath_star,{}", sig9(summary.goldilocks.alpha_bath_star)),
                format!("q_target,{}", sig9(summary.q_target)),
            ];
            csv_document(&meta, &[], "quantity,value", &lines)
        }
    }
}

#[derive(Serialize)]
struct GoldilocksDetail {
    gamma_star: f64,
    alpha_bath_star: f64,
    iterations: usize,
    residual: f64,
    q_target: f64,
}

fn cmd_goldilocks(cfg: &RunConfig, name: &str) -> Result<String> {
    let report = goldilocks_with(cfg.q_target)?;
    let SolvedQuantity::CoolingOptimum { gamma_over_delta, alpha_bath_over_delta } = report.solved
    else {
        unreachable!("cooling optimizer returns an operating point")
    };
    let detail = GoldilocksDetail {
        gamma_star: gamma_over_delta,
        alpha_bath_star: alpha_bath_over_delta,
        iterations: report.iterations,
        residual: report.residual,
        q_target: report.q_target,
    };
    let meta = Meta::new(name, cfg);
    match cfg.format_or(OutputFormat::Json) {
        OutputFormat::Json => json_document(meta, detail),
        OutputFormat::Csv => {
            let lines = vec![
                format!("gamma_star,{}", sig9(detail.gamma_star)),
                format!("alpha_bath_star,{}", sig9(detail.alpha_bath_star)),
                format!("iterations,{}", detail.iterations),
                format!("residual,{}", sig9(detail.residual)),
                format!("q_target,{}", sig9(detail.q_target)),
            ];
            csv_document(&meta, &[], "quantity,value", &lines)
        }
    }
}

#[derive(Serialize)]
struct ChannelRow {
    w: f64,
    p_identity: f64,
    p_x: f64,
    p_y: f64,
    p_z: f64,
    lambda_x: f64,
    lambda_y: f64,
    lambda_z: f64,
}

fn cmd_channel(cfg: &RunConfig, name: &str) -> Result<String> {
    let rows: Vec<ChannelRow> = cfg
        .w_grid
        .iter()
        .map(|&w| {
            let channel = logical_channel(w, cfg.variant)?;
            let [p_identity, p_x, p_y, p_z] = channel.probabilities();
            let [lambda_x, lambda_y, lambda_z] = channel.eigenvalues();
            Ok(ChannelRow { w, p_identity, p_x, p_y, p_z, lambda_x, lambda_y, lambda_z })
        })
        .collect::<Result<Vec<_>>>()?;

    let variant_name = match cfg.variant {
        ChannelVariant::Line => "line",
        ChannelVariant::Cubic => "cubic",
    };
    let extra = [("variant", variant_name.to_string())];
    let meta = Meta::new(name, cfg);
    match cfg.format_or(OutputFormat::Csv) {
        OutputFormat::Json => json_document(meta, RowsBody { rows }),
        OutputFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{}",
                        sig9(r.w),
                        sig9(r.p_identity),
                        sig9(r.p_x),
                        sig9(r.p_y),
                        sig9(r.p_z),
                        sig9(r.lambda_x),
                        sig9(r.lambda_y),
                        sig9(r.lambda_z)
                    )
                })
                .collect();
            csv_document(
                &meta,
                &extra,
                "w,p_identity,p_x,p_y,p_z,lambda_x,lambda_y,lambda_z",
                &lines,
            )
        }
    }
}

/// On-disk description of a pattern run: the lattice, the logical input on
/// site 0, and the measurement pattern itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct PatternFile {
    #[serde(default)]
    name: Option<String>,
    n_sites: usize,
    /// Explicit edge list; omitted means an open line.
    #[serde(default)]
    edges: Option<Vec<(usize, usize)>>,
    /// Bloch vector of the site-0 input factor; omitted means `|+⟩`.
    #[serde(default)]
    input_bloch: Option<[f64; 3]>,
    pattern: Pattern,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn cmd_simulate(cfg: &RunConfig, name: &str, path: &Path) -> Result<String> {
    let file: PatternFile = read_json(path)?;
    let lattice = match &file.edges {
        Some(edges) => Lattice::custom(file.n_sites, edges.iter().copied())?,
        None => Lattice::line(file.n_sites)?,
    };
    let params = SystemParams::new(cfg.delta, lattice)?;
    let bath = cfg.bath()?;
    let k_t = bath.temperature(cfg.delta);
    let p_exc = qcore::excitation_probability(cfg.delta, k_t);

    // Site 0 carries the logical input; every other site is a blank prepared
    // at the bath's equilibrium temperature. The controlled-Z layer then
    // binds them into the cluster resource.
    let input = DensityMatrix::from_bloch(file.input_bloch.unwrap_or([1.0, 0.0, 0.0]))?;
    let blank = qcore::plus_minus_mixture(p_exc);
    let mut factors = vec![blank; params.n_sites()];
    factors[0] = input.matrix().clone();
    let product = DensityMatrix::product(&factors)?;
    let state = CzEntangler::new(params.lattice())?.apply(&product)?;
    let state = evolve_state(&params, &bath, &state, cfg.t0, cfg.method())?;

    let run = run_pattern(
        &params,
        &bath,
        &state,
        &file.pattern,
        &OutcomePolicy::Sampled { seed: cfg.seed },
        cfg.method(),
    )?;

    let meta = Meta::new(name, cfg);
    let mut out = meta.comment_block(&[])?;
    let display_name = file.name.as_deref().unwrap_or("unnamed pattern");
    writeln!(
        out,
        "pattern: {display_name} ({} events on {} sites, round delay {} tau)",
        file.pattern.n_events(),
        params.n_sites(),
        file.pattern.round_delay
    )
    .expect("string write");
    let (alpha, beta) = bath.effective_rates();
    writeln!(
        out,
        "bath: alpha = {}, beta = {} (delta = {})",
        sig9(alpha),
        sig9(beta),
        sig9(cfg.delta)
    )
    .expect("string write");
    writeln!(out, "preparation: kT = {} (p_exc = {})", sig9(k_t), sig9(p_exc))
        .expect("string write");
    if cfg.t0 > 0.0 {
        writeln!(out, "initial wait: t0 = {}", sig9(cfg.t0)).expect("string write");
    }

    let mut event_index = 0usize;
    for (round_index, round) in file.pattern.rounds.iter().enumerate() {
        for event in round {
            let basis_text = match event.basis {
                mbqc::EventBasis::Z => "z basis".to_string(),
                mbqc::EventBasis::Xy { angle } => {
                    let mut effective = angle;
                    if let Some(adapt) = &event.adapt {
                        if adapt.sign_flip && run.outcomes[adapt.source_event] == 1 {
                            effective = -effective;
                        }
                    }
                    format!("xy angle {}", sig9(effective))
                }
            };
            writeln!(
                out,
                "round {}: site {} measured ({basis_text}) -> outcome {} (p = {})",
                round_index + 1,
                event.site,
                run.outcomes[event_index],
                sig9(run.probabilities[event_index])
            )
            .expect("string write");
            event_index += 1;
        }
    }

    let branch_probability: f64 = run.probabilities.iter().product();
    writeln!(out, "branch probability: {}", sig9(branch_probability)).expect("string write");
    if !run.unmeasured.is_empty() {
        let sites: Vec<String> = run.unmeasured.iter().map(usize::to_string).collect();
        writeln!(out, "unmeasured sites: {}", sites.join(" ")).expect("string write");
    }
    writeln!(out, "fidelity: {:.6}", run.fidelity).expect("string write");
    Ok(out)
}

fn cmd_eom(
    cfg: &RunConfig,
    name: &str,
    observable: &str,
    context_path: &Path,
    times: Option<&[f64]>,
) -> Result<String> {
    let context: EomContext = read_json(context_path)?;
    let observable: PauliString = observable.parse()?;
    let (alpha, beta) = cfg.bath()?.effective_rates();
    let system = build_eom(&observable, &context, alpha, beta)?;

    let meta = Meta::new(name, cfg);
    let mut out = meta.comment_block(&[])?;
    writeln!(out, "observable: {observable}").expect("string write");
    writeln!(
        out,
        "lattice: {} sites, {} edges",
        context.lattice().n_sites(),
        context.lattice().edges().count()
    )
    .expect("string write");
    writeln!(out, "rates: alpha = {}, beta = {}", sig9(alpha), sig9(beta)).expect("string write");
    writeln!(out, "variables: {}", system.n_vars()).expect("string write");
    out.push('\n');
    write!(out, "{system}").expect("string write");

    if let Some(times) = times {
        out.push('\n');
        for &t in times {
            let values = system.solve(t)?;
            writeln!(out, "t = {}: <{}> = {}", sig9(t), system.variables()[0], sig9(values[0]))
                .expect("string write");
        }
    }
    Ok(out)
}
