//! `lagcorr study | backtest | synth`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lagcorr_core::allocation::Strategy;
use lagcorr_core::backtest::{self, BacktestConfig, BacktestError, FailureKind, LOOKBACK};
use lagcorr_core::panel::MissingPolicy;
use lagcorr_core::{BacktestReport, Date, DayRange, FieldEngine, FieldSpec, PanelData, RebalanceSchedule, TRADING_YEAR};

use crate::config::{self, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, PanelFiles};
use crate::report;
use crate::synth::{generate_synthetic_panel, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "lagcorr", version, about = "Lagged explanatory-field studies and allocation backtests")]
pub struct Cli {
    /// Flat `key = value` run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Contemporary and one-year-lagged field correlations.
    Study(RunArgs),
    /// Monthly-rebalanced strategy backtest.
    Backtest(RunArgs),
    /// Write a synthetic panel as the four input CSV files.
    Synth(RunArgs),
}

#[derive(Debug, Args, Default)]
struct RunArgs {
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    fundamentals: Option<PathBuf>,
    #[arg(long)]
    benchmarks: Option<PathBuf>,
    #[arg(long)]
    riskfree: Option<PathBuf>,
    #[arg(long)]
    synth_config: Option<PathBuf>,
    /// First date (YYYY-MM-DD).
    #[arg(long)]
    from: Option<String>,
    /// Last date (YYYY-MM-DD).
    #[arg(long)]
    to: Option<String>,
    /// Comma-separated subset of EW,EF,RC,MIX,RC*.
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated field identifiers, e.g. SIGMA,BETA_MARKET.
    #[arg(long)]
    fields: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Never sign-flip the RC* coefficients.
    #[arg(long)]
    no_flip: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        Ok(RunConfig {
            prices: self.prices,
            fundamentals: self.fundamentals,
            benchmarks: self.benchmarks,
            riskfree: self.riskfree,
            synth_config: self.synth_config,
            from: self.from.map(|v| config::parse_date("from", &v)).transpose()?,
            to: self.to.map(|v| config::parse_date("to", &v)).transpose()?,
            strategies: self.strategies.map(|v| config::parse_strategies(&v)).transpose()?,
            fields: self.fields.map(|v| config::parse_fields(&v)).transpose()?,
            out: self.out,
            seed: self.seed,
            no_flip: self.no_flip,
        })
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("lagcorr: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let (cmd, args) = match cli.command {
        Command::Study(a) => ("study", a),
        Command::Backtest(a) => ("backtest", a),
        Command::Synth(a) => ("synth", a),
    };
    let flags = args.into_config()?;
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?.merge(flags),
        None => flags,
    };
    cfg.validate_range()?;
    match cmd {
        "study" => cmd_study(&cfg),
        "backtest" => cmd_backtest(&cfg),
        _ => cmd_synth(&cfg),
    }
}

/// Load the panel named by the config: CSV files or a seeded synthetic panel.
pub fn load(cfg: &RunConfig) -> Result<PanelData> {
    match (&cfg.synth_config, &cfg.prices) {
        (Some(_), Some(_)) => Err(Error::config("give either --synth-config or data files, not both")),
        (Some(path), None) => {
            let seed = cfg.seed.ok_or_else(|| Error::config("--seed is required with --synth-config"))?;
            Ok(generate_synthetic_panel(&SynthConfig::read(path)?, seed)?.panel)
        }
        (None, Some(prices)) => {
            let riskfree = cfg.riskfree.as_deref().ok_or_else(|| Error::config("--riskfree is required"))?;
            let files = PanelFiles {
                prices,
                fundamentals: cfg.fundamentals.as_deref(),
                benchmarks: cfg.benchmarks.as_deref(),
                riskfree,
            };
            io::load_panel(files, MissingPolicy::default())
        }
        (None, None) => Err(Error::config("no input: give --prices/--riskfree or --synth-config")),
    }
}

pub fn cmd_study(cfg: &RunConfig) -> Result<String> {
    let out = cfg.out_dir()?;
    let panel = load(cfg)?;
    let cal = panel.calendar();
    let start = match cfg.from {
        Some(d) => cal
            .first_on_or_after(d)
            .ok_or_else(|| Error::Data(format!("no trading day on or after {d}")))?,
        None => 1,
    }
    .max(1);
    let a = DayRange::new(start, start + TRADING_YEAR);
    let b = DayRange::new(a.end, a.end + TRADING_YEAR);
    if b.end > panel.n_days() {
        return Err(Error::Data(format!(
            "study from {} needs {} trading days, panel has {}",
            cal.date(start),
            2 * TRADING_YEAR,
            panel.n_days() - start
        )));
    }
    if let Some(to) = cfg.to {
        if cal.date(b.end - 1) > to {
            return Err(Error::Config(format!("study windows end on {}, after --to {to}", cal.date(b.end - 1))));
        }
    }
    let engine = FieldEngine::new(&panel);
    let spec = match &cfg.fields {
        Some(f) => f.clone(),
        None => FieldSpec::all_for(&engine.available_benchmarks()),
    };
    let study = engine.correlation_study(a, b, &spec).map_err(Error::data)?;
    let files = report::study_files(&panel, &engine, &study)?;
    io::write_atomically(out, &files)?;
    Ok(format!(
        "study: {} fields on {}..{} and {}..{}; wrote {} files to {}",
        study.rows.len(),
        cal.date(a.start),
        cal.date(a.end - 1),
        cal.date(b.start),
        cal.date(b.end - 1),
        files.len(),
        out.display()
    ))
}

fn backtest_error(e: BacktestError) -> Error {
    match (&e, e.kind()) {
        (BacktestError::EmptyRange, _) => Error::Config(e.to_string()),
        (BacktestError::Ruin(_), _) | (_, FailureKind::Numerical) => Error::Numerical(e.to_string()),
        _ => Error::Data(e.to_string()),
    }
}

pub fn cmd_backtest(cfg: &RunConfig) -> Result<String> {
    let out = cfg.out_dir()?;
    let panel = load(cfg)?;
    let cal = panel.calendar();
    let last = cal.date(panel.n_days() - 1);
    let from: Date = match cfg.from {
        Some(d) => d,
        None if panel.n_days() > LOOKBACK => cal.date(LOOKBACK),
        None => return Err(Error::Data(format!("panel has {} days, backtests need more than {LOOKBACK}", panel.n_days()))),
    };
    let to = cfg.to.unwrap_or(last);
    let schedule = RebalanceSchedule::monthly(cal, from, to).map_err(backtest_error)?;
    let config = BacktestConfig {
        strategies: cfg.strategies.clone().unwrap_or_else(|| Strategy::ALL.to_vec()),
        fields: cfg.fields.clone().unwrap_or_else(FieldSpec::ten_factor),
        force_no_flip: cfg.no_flip,
        ..BacktestConfig::default()
    };
    let engine = FieldEngine::new(&panel);
    let output = backtest::run_backtest_with(&engine, &schedule, &config).map_err(backtest_error)?;
    let table = BacktestReport::from_output(&output);
    let files = report::backtest_files(&panel, &engine, &output, &table)?;
    io::write_atomically(out, &files)?;
    Ok(format!(
        "backtest: {} strategies over {} months; wrote {} files to {}",
        output.curves.len(),
        output.months.len(),
        files.len(),
        out.display()
    ))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<String> {
    let out = cfg.out_dir()?;
    let path = cfg.synth_config.as_deref().ok_or_else(|| Error::config("--synth-config is required"))?;
    let seed = cfg.seed.ok_or_else(|| Error::config("--seed is required"))?;
    let synth = generate_synthetic_panel(&SynthConfig::read(path)?, seed)?;
    io::write_panel(&synth.panel, out)?;
    Ok(format!(
        "synth: {} assets x {} days (seed {seed}) written to {}",
        synth.panel.n_assets(),
        synth.panel.n_days(),
        out.display()
    ))
}
