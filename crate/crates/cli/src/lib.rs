//! Batch front end: reads a run configuration, dispatches to the theory and experiment
//! modules and writes CSV tables into the output directory.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use mixkern::estimators::{curve_table, density_curve, density_results, nw_curve, panel_curve, EstimatorConfig};
use mixkern::experiments::{
    default_scale, rule_bandwidths, run_envelope, run_figure1, run_mse, run_panel_growth_demo, EnvelopePlan,
    ExperimentError, RateReport,
};
use mixkern::kernels::make_kernel;
use mixkern::processes::{gen_panel, simulate};
use mixkern::sample::{read_sample_csv, write_sample_csv, SampleFile};
use mixkern::table::{format_real, Table};
use mixkern::theory::{bandwidth_from_plan, EstimatorKind};

pub use config::{parse_config, serialize_config, ConfigError, RunConfig};

pub const BANDWIDTH_HEADER: [&str; 7] =
    ["individual", "gamma", "delta", "zeta", "growth_exponent", "bandwidth", "mse_exponent"];
pub const PANEL_SCHEDULE_HEADER: [&str; 3] = ["T", "n_fixed", "n_growing"];

#[derive(Debug, Parser)]
#[command(name = "mixkern", version, about = "Kernel estimation for 2-mixing time series and panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`[model]`, `[process]`, `[experiment]`, `[output]` sections).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `experiment.seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bandwidth exponents and values for the configured model (bandwidth.csv).
    Bandwidth,
    /// Simulate one sample of the configured process (sample.csv).
    Simulate,
    /// Estimate on `experiment.sample` over `experiment.grid` (estimate.csv).
    Estimate,
    /// Monte Carlo MSE decay (rates.csv, summary.csv).
    Rates,
    /// Exponent curves of the mixing and linear bounds (figure1.csv).
    Figure1,
    /// Kernel covariance against its lag envelope (envelope.csv).
    Envelope,
    /// Fixed against growing number of panel individuals.
    PanelDemo,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Runtime { code: &'static str, message: String },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(e) => e.code(),
            CliError::Usage(_) => "usage",
            CliError::Runtime { code, .. } => code,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Runtime { code: e.code(), message: e.to_string() }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime { code: "io", message: format!("{}: {e}", path.display()) }
}

fn runtime<E: std::fmt::Display>(code: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Runtime { code, message: e.to_string() }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return 1;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e);
            e.exit_code()
        }
    }
}

/// Loads the configuration named on the command line, or the defaults when none is given.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.plan.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.clone());
    }
    cfg.output.quiet |= cli.quiet;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(runtime("threads"))?;
    let out = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let ctx = Context { cfg: &cfg, out: &out };
    pool.install(|| match cli.command {
        Command::Bandwidth => ctx.bandwidth(),
        Command::Simulate => ctx.simulate(),
        Command::Estimate => ctx.estimate(),
        Command::Rates => ctx.rates(),
        Command::Figure1 => ctx.write_table("figure1.csv", &run_figure1()),
        Command::Envelope => ctx.envelope(),
        Command::PanelDemo => ctx.panel_demo(),
    })
}

struct Context<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
}

impl Context<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.cfg.output.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn create(&self, name: &str) -> Result<(PathBuf, io::BufWriter<fs::File>), CliError> {
        let path = self.out.join(name);
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok((path, io::BufWriter::new(file)))
    }

    fn write_table(&self, name: &str, table: &Table) -> Result<(), CliError> {
        let (path, mut w) = self.create(name)?;
        table.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(&path, e))?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn individuals(&self) -> Option<usize> {
        (self.cfg.plan.estimator == EstimatorKind::Panel).then_some(self.cfg.plan.panel_n)
    }

    fn bandwidth(&self) -> Result<(), CliError> {
        let plan = &self.cfg.plan;
        let c = plan.scale.unwrap_or(1.0);
        let bp = bandwidth_from_plan(&plan.model, plan.estimator, self.cfg.t, self.individuals(), c, plan.zeta_override)
            .map_err(ExperimentError::from)?;
        let at = |v: &[f64], i: usize| format_real(v.get(i).copied().unwrap_or(f64::NAN));
        let mut table = Table::new(BANDWIDTH_HEADER);
        for i in 0..bp.bandwidths.len() {
            table.push(vec![
                i.to_string(),
                at(&bp.gamma, i),
                at(&bp.delta, i),
                at(&bp.zeta, i),
                at(&bp.growth_exponent, i),
                format_real(bp.bandwidths[i]),
                format_real(bp.mse_exponent),
            ]);
        }
        self.say(format!(
            "{} at T = {}: b = {}, MSE exponent {}",
            plan.estimator,
            self.cfg.t,
            bp.bandwidth(),
            bp.mse_exponent
        ));
        self.write_table("bandwidth.csv", &table)
    }

    fn simulate(&self) -> Result<(), CliError> {
        let plan = &self.cfg.plan;
        let seed = plan.master_seed;
        let file = if plan.process.kind.is_panel() {
            let n = plan.individuals_at(self.cfg.t);
            SampleFile::Panel(gen_panel(&plan.process, n, self.cfg.t, seed).map_err(ExperimentError::from)?)
        } else {
            SampleFile::Series(simulate(&plan.process, self.cfg.t, seed).map_err(ExperimentError::from)?)
        };
        let (path, mut w) = self.create("sample.csv")?;
        write_sample_csv(&file, &mut w).and_then(|_| w.flush()).map_err(|e| io_error(&path, e))?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn estimate(&self) -> Result<(), CliError> {
        let plan = &self.cfg.plan;
        let path = self.cfg.sample.as_ref().ok_or_else(|| ConfigError::MissingRequired("experiment.sample".into()))?;
        let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
        let sample = read_sample_csv(io::BufReader::new(file)).map_err(runtime("bad-sample-file"))?;
        let grid = self.cfg.grid.clone().unwrap_or_else(|| plan.z_points.clone());
        let kernel = make_kernel::<f64>(plan.kernel, plan.kernel_order).map_err(ExperimentError::from)?;
        let estimator_error = |e: mixkern::estimators::EstimatorError| CliError::from(ExperimentError::from(e));
        let results = match (&sample, plan.estimator) {
            (SampleFile::Series(s), kind) if kind != EstimatorKind::Panel => {
                let c = plan.scale.unwrap_or_else(|| default_scale(&s.z_std()));
                let b = rule_bandwidths(plan, s.len(), 1, c)?[0];
                let cfg = EstimatorConfig::single(kernel, b).with_denom_floor(plan.denom_floor);
                if kind == EstimatorKind::Density {
                    density_results(&density_curve(s, &cfg, &grid).map_err(estimator_error)?)
                } else {
                    nw_curve(s, &cfg, &grid).map_err(estimator_error)?
                }
            }
            (SampleFile::Panel(p), EstimatorKind::Panel) => {
                let c = plan.scale.unwrap_or_else(|| default_scale(&p.z_std()));
                let b = rule_bandwidths(plan, p.t(), p.n(), c)?;
                let cfg = EstimatorConfig::panel(kernel, b).with_denom_floor(plan.denom_floor);
                panel_curve(p, &cfg, &grid).map_err(estimator_error)?
            }
            (SampleFile::Panel(_), kind) => {
                return Err(CliError::Runtime {
                    code: "bad-sample-file",
                    message: format!("panel sample given to the {kind} estimator"),
                })
            }
            (SampleFile::Series(_), _) => {
                return Err(CliError::Runtime {
                    code: "bad-sample-file",
                    message: "single series given to the panel estimator".into(),
                })
            }
        };
        self.write_table("estimate.csv", &curve_table(&grid, &results))
    }

    fn report(&self, prefix: &str, report: &RateReport) -> Result<(), CliError> {
        self.write_table(&format!("{prefix}rates.csv"), &report.rate_table())?;
        self.write_table(&format!("{prefix}summary.csv"), &report.summary_table())?;
        self.say(format!(
            "fitted exponent {:.4} ± {:.4}, theory {}, excluded {:.2}%{}",
            report.fitted_exponent,
            report.fitted_stderr,
            report.theory_exponent.map_or("n/a".to_string(), |t| format!("{t:.4}")),
            100.0 * report.exclusion_rate(),
            if report.is_valid() { "" } else { " (invalid run: too many exclusions)" },
        ));
        Ok(())
    }

    fn rates(&self) -> Result<(), CliError> {
        self.report("", &run_mse(&self.cfg.plan)?)
    }

    fn envelope(&self) -> Result<(), CliError> {
        let env = &self.cfg.envelope;
        let plan = EnvelopePlan {
            process: self.cfg.plan.process.clone(),
            kernel: self.cfg.plan.kernel,
            kernel_order: self.cfg.plan.kernel_order,
            b: env.b,
            z: env.z.clone(),
            lags: (0..=env.max_lag).collect(),
            replications: env.replications,
            window: env.window,
            master_seed: self.cfg.plan.master_seed,
            q_f: self.cfg.plan.model.q_f,
            v: env.v,
        };
        let report = run_envelope(&plan)?;
        self.say(format!("fitted envelope constant {}", report.constant));
        self.write_table("envelope.csv", &report.table())
    }

    fn panel_demo(&self) -> Result<(), CliError> {
        let demo = run_panel_growth_demo(&self.cfg.plan, self.cfg.alpha)?;
        let mut schedule = Table::new(PANEL_SCHEDULE_HEADER);
        for (k, t) in demo.fixed.t_grid.iter().enumerate() {
            schedule.push(vec![
                t.to_string(),
                demo.fixed.n_individuals[k].to_string(),
                demo.growing.n_individuals[k].to_string(),
            ]);
        }
        self.write_table("panel_schedule.csv", &schedule)?;
        self.report("panel_fixed_", &demo.fixed)?;
        self.report("panel_growing_", &demo.growing)
    }
}
