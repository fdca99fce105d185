//! Command-line front end.
//!
//! Settings resolve in three layers: per-problem defaults, then an optional
//! flat `key = value` config file, then command-line flags.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::domain::{BiasLadder, Interval, RateContract};
use crate::error::{Error, Result};
use crate::experiments::{estimate_rates, run_replications, summarize, ExperimentSummary, RateEstimate};
use crate::objective::CvarCost;
use crate::samplers::{cvar_reference_gbm, cvar_reference_nested, GbmModel, GbmParams, NestedModel, Scheme};
use crate::solvers::theory::{complexity_regime, Regime};
use crate::solvers::{gap_estimates, mc_pilot, GapReport, McConfig, MlmcConfig, Problem, SolveReport, SolverConfig};
use crate::stream::SeedSpec;

/// Accuracy targets of the full-scale reproduction.
pub const PAPER_EPS: [f64; 5] = [0.5, 0.25, 0.125, 0.0625, 0.03125];
pub const PAPER_REPS: usize = 100;
/// Desk-scale defaults.
pub const DESK_EPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
pub const DESK_REPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    #[value(name = "gbm_euler")]
    GbmEuler,
    #[value(name = "gbm_milstein")]
    GbmMilstein,
    #[value(name = "nested")]
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Mc,
    Mlmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Dat,
    Csv,
    Json,
}

fn enum_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn parse_enum<T: ValueEnum>(key: &str, s: &str) -> Result<T> {
    T::from_str(s.trim(), false).map_err(|_| Error::Config(format!("invalid {key} '{s}'")))
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Config(format!("invalid {key} '{s}'")))
}

fn parse_list<T>(s: &str, mut item: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(&mut item).collect()
}

/// `lo:hi`.
pub fn parse_domain(s: &str) -> Result<Interval> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("domain must be lo:hi, got '{s}'")))?;
    Interval::new(parse_num("domain", lo)?, parse_num("domain", hi)?)
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub solver: SolverKind,
    pub eps_list: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    pub theta: f64,
    pub m: u32,
    pub h0: f64,
    pub a: f64,
    pub pilot_n: usize,
    pub domain: Interval,
    pub output_dir: PathBuf,
    pub output_formats: Vec<OutputFormat>,
    pub alpha: f64,
    pub beta: f64,
    /// Monte Carlo bias schedule `h = mc_h_ref * (eps / mc_eps_ref)^(1/alpha)`.
    pub mc_h_ref: f64,
    pub mc_eps_ref: f64,
    pub eta_bar: f64,
    /// Nested problem coefficient.
    pub tau: f64,
}

const KEYS: [&str; 19] = [
    "problem",
    "solver",
    "eps_list",
    "replications",
    "master_seed",
    "theta",
    "m",
    "h0",
    "a",
    "pilot_n",
    "domain",
    "output_dir",
    "output_formats",
    "alpha",
    "beta",
    "mc_h_ref",
    "mc_eps_ref",
    "eta_bar",
    "tau",
];

impl RunConfig {
    pub fn defaults(problem: ProblemKind) -> Self {
        let gbm = problem != ProblemKind::Nested;
        Self {
            problem,
            solver: SolverKind::Mlmc,
            eps_list: DESK_EPS.to_vec(),
            replications: DESK_REPS,
            master_seed: 1,
            theta: if gbm { 0.95 } else { 0.975 },
            m: if gbm { 4 } else { 2 },
            h0: if gbm { 1.0 } else { 1.0 / 64.0 },
            a: 1e-3,
            pilot_n: 1000,
            domain: if gbm { Interval::new(23.0, 25.0) } else { Interval::new(1.0, 4.0) }
                .expect("static interval"),
            output_dir: PathBuf::from("results"),
            output_formats: vec![OutputFormat::Dat, OutputFormat::Csv, OutputFormat::Json],
            alpha: 1.0,
            beta: if problem == ProblemKind::GbmMilstein { 2.0 } else { 1.0 },
            mc_h_ref: if gbm { 0.5 } else { 1.0 / 64.0 },
            mc_eps_ref: 0.5,
            eta_bar: 1.0,
            tau: 0.5,
        }
    }

    /// Sets one key. `problem` selects the defaults, so it is only checked for agreement.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => {
                let p: ProblemKind = parse_enum(key, value)?;
                if p != self.problem {
                    return Err(Error::Config(format!(
                        "problem '{value}' conflicts with '{}'",
                        enum_name(&self.problem)
                    )));
                }
            }
            "solver" => self.solver = parse_enum(key, value)?,
            "eps_list" => self.eps_list = parse_list(value, |t| parse_num(key, t))?,
            "replications" => self.replications = parse_num(key, value)?,
            "master_seed" => self.master_seed = parse_num(key, value)?,
            "theta" => self.theta = parse_num(key, value)?,
            "m" => self.m = parse_num(key, value)?,
            "h0" => self.h0 = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "pilot_n" => self.pilot_n = parse_num(key, value)?,
            "domain" => self.domain = parse_domain(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "output_formats" => self.output_formats = parse_list(value, |t| parse_enum(key, t))?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "mc_h_ref" => self.mc_h_ref = parse_num(key, value)?,
            "mc_eps_ref" => self.mc_eps_ref = parse_num(key, value)?,
            "eta_bar" => self.eta_bar = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a config file body: `key = value` lines, `#` comments.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
            }
            pairs.push((k.to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    /// Builds a config from `pairs`. The problem comes from `problem`, or
    /// failing that from a `problem` pair.
    pub fn from_pairs(problem: Option<ProblemKind>, pairs: &[(String, String)]) -> Result<Self> {
        let problem = match problem {
            Some(p) => p,
            None => {
                let v = pairs
                    .iter()
                    .rev()
                    .find(|(k, _)| k == "problem")
                    .ok_or_else(|| Error::Config("no problem given".into()))?;
                parse_enum("problem", &v.1)?
            }
        };
        let mut cfg = Self::defaults(problem);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "problem") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Inverse of [`RunConfig::parse_pairs`] + [`RunConfig::from_pairs`].
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let formats: Vec<String> = self.output_formats.iter().map(enum_name).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("problem", enum_name(&self.problem));
        put("solver", enum_name(&self.solver));
        put("eps_list", join(&self.eps_list));
        put("replications", self.replications.to_string());
        put("master_seed", self.master_seed.to_string());
        put("theta", self.theta.to_string());
        put("m", self.m.to_string());
        put("h0", self.h0.to_string());
        put("a", self.a.to_string());
        put("pilot_n", self.pilot_n.to_string());
        put("domain", format!("{}:{}", self.domain.lo(), self.domain.hi()));
        put("output_dir", self.output_dir.display().to_string());
        put("output_formats", formats.join(","));
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("mc_h_ref", self.mc_h_ref.to_string());
        put("mc_eps_ref", self.mc_eps_ref.to_string());
        put("eta_bar", self.eta_bar.to_string());
        put("tau", self.tau.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.eps_list.is_empty() {
            return bad("eps list is empty".into());
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("eps must be positive, got {e}"));
        }
        if self.replications < 2 {
            return bad(format!("replications must be at least 2, got {}", self.replications));
        }
        if self.m < 2 {
            return bad(format!("refinement factor must be at least 2, got {}", self.m));
        }
        if self.pilot_n < 2 {
            return bad(format!("pilot size must be at least 2, got {}", self.pilot_n));
        }
        for (name, v) in [
            ("h0", self.h0),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mc_h_ref", self.mc_h_ref),
            ("mc_eps_ref", self.mc_eps_ref),
            ("eta_bar", self.eta_bar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.a.is_finite() && self.a >= 0.0) {
            return bad(format!("a must be non-negative, got {}", self.a));
        }
        if self.output_formats.is_empty() {
            return bad("no output format selected".into());
        }
        CvarCost::new(self.theta)?;
        if self.problem == ProblemKind::Nested {
            NestedModel::new(self.tau)?;
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let model: Arc<dyn crate::samplers::LossModel> = match self.problem {
            ProblemKind::GbmEuler => Arc::new(GbmModel::new(GbmParams::paper(), Scheme::Euler)?),
            ProblemKind::GbmMilstein => Arc::new(GbmModel::new(GbmParams::paper(), Scheme::Milstein)?),
            ProblemKind::Nested => Arc::new(NestedModel::new(self.tau)?),
        };
        Ok(Problem::new(model, CvarCost::new(self.theta)?, self.domain))
    }

    /// Reference optimal value from the closed-form oracles.
    pub fn p_star(&self) -> Result<f64> {
        match self.problem {
            ProblemKind::Nested => cvar_reference_nested(self.tau, self.theta),
            _ => cvar_reference_gbm(&GbmParams::paper(), self.theta),
        }
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            alpha: self.alpha,
            h_ref: self.mc_h_ref,
            eps_ref: self.mc_eps_ref,
            pilot_n: self.pilot_n,
            eta_bar: self.eta_bar,
        }
    }

    pub fn mlmc_config(&self) -> MlmcConfig {
        MlmcConfig {
            alpha: self.alpha,
            beta: self.beta,
            a: self.a,
            h0: self.h0,
            m: self.m,
            pilot_n: self.pilot_n,
            eta_bar: self.eta_bar,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        match self.solver {
            SolverKind::Mc => SolverConfig::Mc(self.mc_config()),
            SolverKind::Mlmc => SolverConfig::Mlmc(self.mlmc_config()),
        }
    }

    /// File stem for experiment outputs, e.g. `gbm_milstein_mlmc`.
    pub fn stem(&self) -> String {
        format!("{}_{}", enum_name(&self.problem), enum_name(&self.solver))
    }
}

#[derive(Debug, Parser)]
#[command(name = "mlmc-saa", version, about = "Monte Carlo and multilevel SAA for CVaR problems with biased sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and print its report as JSON.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Target accuracy.
        #[arg(long)]
        eps: f64,
    },
    /// Replicate solves over an eps grid and write result tables.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated accuracy targets.
        #[arg(long)]
        eps_list: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of dat,csv,json.
        #[arg(long)]
        format: Option<String>,
        /// Full reproduction: 100 replications and eps down to 0.03125.
        /// Explicit --reps and --eps-list still win.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Estimate the bias and variance rates from coupled level differences.
    Rates {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of refinement levels above h0.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Coupled pairs per level.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        /// Probe point; defaults to the pilot minimiser.
        #[arg(long)]
        x: Option<f64>,
    },
    /// Optimal-gap estimates for a candidate solution.
    Gap {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        candidate: f64,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    pub problem: Option<ProblemKind>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Master seed.
    #[arg(long, env = "MLMC_SAA_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Refinement factor.
    #[arg(long)]
    pub m: Option<u32>,
    /// Coarsest multilevel bias parameter.
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Pilot sample size.
    #[arg(long)]
    pub pilot: Option<usize>,
    /// Decision interval as lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    fn resolve(&self, extra: Vec<(&str, String)>) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => RunConfig::parse_pairs(&fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?)?,
            None => Vec::new(),
        };
        let flags = [
            ("solver", self.solver.map(|s| enum_name(&s))),
            ("master_seed", self.seed.map(|v| v.to_string())),
            ("theta", self.theta.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("h0", self.h0.map(|v| v.to_string())),
            ("a", self.a.map(|v| v.to_string())),
            ("pilot_n", self.pilot.map(|v| v.to_string())),
            ("domain", self.domain.clone()),
        ];
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        pairs.extend(extra.into_iter().map(|(k, v)| (k.to_string(), v)));
        let cfg = RunConfig::from_pairs(self.problem, &pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Formats `x` like `2.7188e-01`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

pub const TABLE_HEADER: [&str; 8] = ["eps", "h0", "Bias", "Variance", "RMSE", "TailProb", "Cost", "Value"];

fn table_cells(s: &ExperimentSummary) -> [String; 8] {
    [
        s.eps.to_string(),
        sci(s.h0),
        sci(s.bias),
        sci(s.variance),
        sci(s.rmse),
        s.tail_prob.to_string(),
        sci(s.mean_cost),
        sci(s.mean_value),
    ]
}

pub fn render_dat(rows: &[ExperimentSummary]) -> String {
    let mut out = TABLE_HEADER.join(" ") + "\n";
    for r in rows {
        out += &table_cells(r).join(" ");
        out.push('\n');
    }
    out
}

pub fn render_csv(rows: &[ExperimentSummary]) -> String {
    let mut out = TABLE_HEADER.join(",") + "\n";
    for r in rows {
        out += &table_cells(r).join(",");
        out.push('\n');
    }
    out
}

pub fn render_plot(rows: &[ExperimentSummary]) -> String {
    let mut out = String::from("RMSE Cost\n");
    for r in rows {
        let _ = writeln!(out, "{} {}", sci(r.rmse), sci(r.mean_cost));
    }
    out
}

fn report_json(r: &SolveReport) -> Result<Value> {
    let mut v = serde_json::to_value(r)?;
    if let Value::Object(map) = &mut v {
        map.remove("wall_time");
    }
    Ok(v)
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numeric(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

fn cmd_solve(cfg: &RunConfig, eps: f64) -> Result<()> {
    let problem = cfg.build_problem()?;
    let p_star = cfg.p_star()?;
    let report = cfg.solver_config().solve(&problem, eps, SeedSpec::new(cfg.master_seed))?;
    let mut v = report_json(&report)?;
    if let Value::Object(map) = &mut v {
        map.insert("problem".into(), json!(enum_name(&cfg.problem)));
        map.insert("solver".into(), json!(enum_name(&cfg.solver)));
        map.insert("eps".into(), json!(eps));
        map.insert("p_star".into(), json!(p_star));
        map.insert("wall_time".into(), json!(report.wall_time));
    }
    print_json(&v)
}

/// Runs the experiment of `cfg` and writes its files. Returns the summaries.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<ExperimentSummary>> {
    let problem = cfg.build_problem()?;
    let p_star = cfg.p_star()?;
    let solver = cfg.solver_config();
    let seed = SeedSpec::new(cfg.master_seed);
    fs::create_dir_all(&cfg.output_dir)?;

    let mut rows = Vec::with_capacity(cfg.eps_list.len());
    let mut runs = Vec::with_capacity(cfg.eps_list.len());
    for &eps in &cfg.eps_list {
        log::info!("{} eps = {eps}: {} replications", cfg.stem(), cfg.replications);
        let reports = run_replications(&problem, &solver, eps, cfg.replications, seed)?;
        let summary = summarize(&reports, p_star, eps)?;
        let reports: Vec<Value> = reports.iter().map(report_json).collect::<Result<_>>()?;
        runs.push(json!({ "summary": summary, "reports": reports }));
        rows.push(summary);
    }

    let stem = cfg.stem();
    let dir = &cfg.output_dir;
    let write = |name: String, body: String| -> Result<()> { Ok(fs::write(dir.join(name), body)?) };
    for fmt in &cfg.output_formats {
        match fmt {
            OutputFormat::Dat => {
                write(format!("{stem}.dat"), render_dat(&rows))?;
                write(format!("{stem}_plot.dat"), render_plot(&rows))?;
            }
            OutputFormat::Csv => write(format!("{stem}.csv"), render_csv(&rows))?,
            OutputFormat::Json => {
                let doc = json!({
                    "problem": enum_name(&cfg.problem),
                    "solver": enum_name(&cfg.solver),
                    "p_star": p_star,
                    "master_seed": cfg.master_seed,
                    "config": cfg.to_text(),
                    "runs": runs,
                });
                write(format!("{stem}.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
            }
        }
    }
    write(format!("{stem}.cfg"), cfg.to_text())?;
    Ok(rows)
}

fn cmd_experiment(cfg: &RunConfig) -> Result<()> {
    let rows = run_experiment(cfg)?;
    println!("# {} p* = {}", cfg.stem(), cfg.p_star()?);
    print!("{}", render_dat(&rows));
    eprintln!("wrote {} files to {}", cfg.stem(), cfg.output_dir.display());
    Ok(())
}

/// Rate estimates plus the regime those rates imply.
#[derive(Debug, Clone, Serialize)]
pub struct RatesOutput {
    pub x_probe: f64,
    pub h0: f64,
    pub m: u32,
    #[serde(flatten)]
    pub rates: RateEstimate,
    pub regime: Regime,
}

pub fn run_rates(cfg: &RunConfig, levels: usize, samples: usize, x: Option<f64>) -> Result<RatesOutput> {
    let problem = cfg.build_problem()?;
    let seed = SeedSpec::new(cfg.master_seed);
    let x_probe = match x {
        Some(x) => x,
        None => mc_pilot(&problem, cfg.h0, cfg.pilot_n, seed)?.report.x_hat,
    };
    let ladder = BiasLadder::new(cfg.h0, cfg.m, levels)?;
    let rates = estimate_rates(&problem, x_probe, &ladder, samples, seed)?;
    let rc = RateContract::new(rates.alpha_hat.max(1e-6), rates.beta_hat.max(1e-6), cfg.a, 1.0, 1.0)?;
    let regime = complexity_regime(&rc, false, cfg.m);
    Ok(RatesOutput { x_probe, h0: cfg.h0, m: cfg.m, rates, regime })
}

fn cmd_rates(cfg: &RunConfig, levels: usize, samples: usize, x: Option<f64>) -> Result<()> {
    let out = run_rates(cfg, levels, samples, x)?;
    println!("# {} x_probe = {} h0 = {} m = {}", enum_name(&cfg.problem), out.x_probe, out.h0, out.m);
    println!("level mean variance");
    for (i, (mu, var)) in out.rates.level_means.iter().zip(&out.rates.level_vars).enumerate() {
        println!("{} {} {}", i + 1, sci(*mu), sci(*var));
    }
    println!("alpha_hat = {:.4}", out.rates.alpha_hat);
    println!("beta_hat = {:.4}", out.rates.beta_hat);
    println!("predicted cost exponent = {:.4}", out.regime.cost_exponent());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct GapOutput {
    problem: String,
    p_star: f64,
    #[serde(flatten)]
    gap: GapReport,
}

fn cmd_gap(cfg: &RunConfig, eps: f64, candidate: f64) -> Result<()> {
    let problem = cfg.build_problem()?;
    if !problem.domain.contains(candidate) {
        return Err(Error::Config(format!("candidate {candidate} lies outside the decision interval")));
    }
    let gap = gap_estimates(
        &problem,
        eps,
        &cfg.mc_config(),
        &cfg.mlmc_config(),
        candidate,
        SeedSpec::new(cfg.master_seed),
    )?;
    print_json(&GapOutput { problem: enum_name(&cfg.problem), p_star: cfg.p_star()?, gap })
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("eps must be positive, got {eps}")))
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { common, eps } => {
            check_eps(eps)?;
            let cfg = common.resolve(vec![("eps_list", eps.to_string())])?;
            with_threads(common.threads, || cmd_solve(&cfg, eps))
        }
        Command::Experiment { common, eps_list, reps, out, format, paper_scale } => {
            let mut extra = Vec::new();
            if paper_scale {
                let eps: Vec<String> = PAPER_EPS.iter().map(|e| e.to_string()).collect();
                extra.push(("eps_list", eps.join(",")));
                extra.push(("replications", PAPER_REPS.to_string()));
            }
            extra.extend(eps_list.map(|v| ("eps_list", v)));
            extra.extend(reps.map(|v| ("replications", v.to_string())));
            extra.extend(out.map(|v| ("output_dir", v.display().to_string())));
            extra.extend(format.map(|v| ("output_formats", v)));
            let cfg = common.resolve(extra)?;
            with_threads(common.threads, || cmd_experiment(&cfg))
        }
        Command::Rates { common, levels, samples, x } => {
            let cfg = common.resolve(Vec::new())?;
            with_threads(common.threads, || cmd_rates(&cfg, levels, samples, x))
        }
        Command::Gap { common, eps, candidate } => {
            check_eps(eps)?;
            let cfg = common.resolve(vec![("eps_list", eps.to_string())])?;
            with_threads(common.threads, || cmd_gap(&cfg, eps, candidate))
        }
    }
}

/// Exit code for an error: 2 for invalid input, 1 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) => 2,
        Error::Numeric(_) | Error::Io(_) | Error::Json(_) => 1,
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Reads a `.dat` or `.csv` table back into rows of numbers.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let sep = if path.extension().is_some_and(|e| e == "csv") { ',' } else { ' ' };
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(sep).map(|t| parse_num("table cell", t)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format() {
        assert_eq!(sci(0.27188), "2.7188e-01");
        assert_eq!(sci(183810.0), "1.8381e+05");
        assert_eq!(sci(30.619), "3.0619e+01");
        assert_eq!(sci(0.0), "0.0000e+00");
        assert_eq!(sci(1e-120), "1.0000e-120");
    }

    #[test]
    fn defaults_per_problem() {
        let g = RunConfig::defaults(ProblemKind::GbmMilstein);
        assert_eq!((g.theta, g.m, g.h0, g.beta), (0.95, 4, 1.0, 2.0));
        assert_eq!((g.domain.lo(), g.domain.hi()), (23.0, 25.0));
        let n = RunConfig::defaults(ProblemKind::Nested);
        assert_eq!((n.theta, n.m, n.h0, n.a), (0.975, 2, 1.0 / 64.0, 1e-3));
        assert_eq!((n.domain.lo(), n.domain.hi()), (1.0, 4.0));
        assert_eq!(RunConfig::defaults(ProblemKind::GbmEuler).beta, 1.0);
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = RunConfig::defaults(ProblemKind::Nested);
        cfg.solver = SolverKind::Mc;
        cfg.eps_list = vec![0.3, 0.1 + 0.2, 1.0 / 3.0];
        cfg.master_seed = u64::MAX;
        cfg.domain = Interval::new(-1.5, 2.25).unwrap();
        cfg.output_formats = vec![OutputFormat::Json];
        cfg.output_dir = PathBuf::from("out dir/x");
        let text = cfg.to_text();
        let back = RunConfig::from_pairs(None, &RunConfig::parse_pairs(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::parse_pairs("bogus = 1").is_err());
        assert!(RunConfig::parse_pairs("theta 0.9").is_err());
        assert!(RunConfig::from_pairs(None, &[]).is_err());
        let pairs = RunConfig::parse_pairs("problem = nested\n").unwrap();
        // The flag wins over the file.
        let cfg = RunConfig::from_pairs(Some(ProblemKind::GbmEuler), &pairs).unwrap();
        assert_eq!(cfg.problem, ProblemKind::GbmEuler);
        assert!(cfg.clone().set("problem", "nested").is_err());
        let pairs = RunConfig::parse_pairs("# comment\ntheta = 0.9 # trailing\n").unwrap();
        let cfg = RunConfig::from_pairs(Some(ProblemKind::GbmEuler), &pairs).unwrap();
        assert_eq!(cfg.theta, 0.9);
        let mut bad = cfg.clone();
        bad.eps_list = vec![0.0];
        assert!(bad.validate().is_err());
        assert!(parse_domain("3").is_err());
        assert!(parse_domain("3:1").is_err());
    }

    #[test]
    fn tables_share_numbers() {
        let row = ExperimentSummary {
            eps: 0.03125,
            h0: 1.0 / 64.0,
            bias: 0.0123456,
            variance: 1e-3,
            rmse: 0.5,
            tail_prob: 0.35,
            mean_cost: 2.5e6,
            mean_value: 30.3456,
            replications: 20,
        };
        let dat = render_dat(std::slice::from_ref(&row));
        let csv = render_csv(std::slice::from_ref(&row));
        assert_eq!(dat.lines().next().unwrap(), "eps h0 Bias Variance RMSE TailProb Cost Value");
        assert_eq!(dat.replace(' ', ","), csv);
        assert_eq!(render_plot(&[row]), "RMSE Cost\n5.0000e-01 2.5000e+06\n");
    }
}
