//! Command-line flags, the optional TOML config file, and how they combine.
//!
//! Every flag is optional at the clap level so that a value can come from the
//! command line, then the config file, then the built-in default.

use std::path::{Path, PathBuf};

use bdt_core::{OutOfRangePolicy, SeriesKind, ThetaRate, DEFAULT_DELTA};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bdt",
    version,
    about = "Calibrate a BDT short-rate lattice, price zero-coupon bonds and imply equity parameters"
)]
pub struct Cli {
    /// TOML file supplying defaults for any flag (keys use the long flag name)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-step mean, standard deviation and upturn probability of a series
    Estimate(EstimateArgs),
    /// Derive the lattice coefficients c1, c2 from a historical rate series
    Calibrate(CalibrateArgs),
    /// Replay the historical rate window through the calibrated lattice
    Fit(FitArgs),
    /// Price one zero-coupon bond on the lattice
    Price(PriceArgs),
    /// Invert a market yield curve into implied mu, sigma and p by maturity
    Imply(ImplyArgs),
    /// Draw a random rate path from the lattice dynamics
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Rate,
    Price,
    Yield,
}

impl From<Kind> for SeriesKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rate => SeriesKind::Rate,
            Kind::Price => SeriesKind::Price,
            Kind::Yield => SeriesKind::Yield,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtildePolicy {
    Error,
    Clamp,
}

impl From<PtildePolicy> for OutOfRangePolicy {
    fn from(p: PtildePolicy) -> Self {
        match p {
            PtildePolicy::Error => OutOfRangePolicy::Error,
            PtildePolicy::Clamp => OutOfRangePolicy::Clamp,
        }
    }
}

/// How estimated equity moments become `(μ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineUnits {
    /// μ = mean/Δ, σ = std/√Δ
    Annualized,
    /// per-step mean and std used as μ and σ directly
    PerStep,
}

/// Parses `node` or `fixed:<rate>`.
pub fn parse_theta_rate(s: &str) -> Result<ThetaRate, String> {
    match s.trim() {
        "node" => Ok(ThetaRate::Node),
        other => {
            let rate = other
                .strip_prefix("fixed:")
                .ok_or_else(|| format!("expected `node` or `fixed:<rate>`, got `{other}`"))?;
            let r: f64 = rate
                .parse()
                .map_err(|_| format!("invalid fixed rate `{rate}`"))?;
            if r.is_finite() && r > 0.0 {
                Ok(ThetaRate::Fixed(r))
            } else {
                Err(format!("fixed rate must be positive, got {r}"))
            }
        }
    }
}

fn parse_number(item: &str) -> Result<f64, String> {
    let item = item.trim();
    if let Some((a, b)) = item.split_once('/') {
        let (a, b): (f64, f64) = (
            a.trim().parse().map_err(|_| format!("bad number `{a}`"))?,
            b.trim().parse().map_err(|_| format!("bad number `{b}`"))?,
        );
        if b == 0.0 {
            return Err(format!("division by zero in `{item}`"));
        }
        return Ok(a / b);
    }
    item.parse().map_err(|_| format!("bad number `{item}`"))
}

/// Parses a maturity grid: comma-separated items, each a number, a fraction
/// like `2/12`, or an inclusive range `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let mut grid = Vec::new();
    for item in s.split(',').filter(|i| !i.trim().is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [single] => grid.push(parse_number(single)?),
            [start, stop, step] => {
                let (start, stop, step) = (parse_number(start)?, parse_number(stop)?, parse_number(step)?);
                if step.is_nan() || step <= 0.0 || stop < start {
                    return Err(format!("invalid range `{item}`"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                grid.extend((0..=count).map(|i| start + i as f64 * step));
            }
            _ => return Err(format!("invalid grid item `{item}`")),
        }
    }
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    Ok(grid)
}

#[derive(Debug, Clone, Default, Args)]
pub struct SeriesArgs {
    /// CSV file with a header row
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Name of the date column [default: first of DATE, Date, date]
    #[arg(long)]
    pub date_column: Option<String>,
    /// Name of the value column [default: auto-detect Adj Close, then Close]
    #[arg(long)]
    pub value_column: Option<String>,
    /// chrono date format of the date column [default: %Y-%m-%d]
    #[arg(long)]
    pub date_format: Option<String>,
    /// Series kind; rates and prices must be positive [default: rate]
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Values (and yield curve quotes) are in percent; divide by 100
    #[arg(long)]
    pub percent: bool,
    /// Lattice step in years [default: 1/252]
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LatticeArgs {
    /// Initial short rate; defaults to the last observation of --input
    #[arg(long)]
    pub r0: Option<f64>,
    /// Use this c1 instead of calibrating from --input (requires --c2 and --r0)
    #[arg(long)]
    pub c1: Option<f64>,
    /// Use this c2 instead of calibrating from --input
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EquityArgs {
    /// Instantaneous equity mean return per year
    #[arg(long)]
    pub mu: Option<f64>,
    /// Instantaneous equity volatility per square-root year
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Natural equity upturn probability
    #[arg(long)]
    pub p: Option<f64>,
    /// Equity price CSV to estimate mu, sigma, p from (Adj Close preferred)
    #[arg(long, value_name = "FILE")]
    pub equity_input: Option<PathBuf>,
    /// Conversion of estimated per-step equity moments [default: annualized]
    #[arg(long, value_enum)]
    pub baseline_units: Option<BaselineUnits>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PolicyArgs {
    /// Rate entering theta: `node` or `fixed:<rate>`
    #[arg(long, value_parser = parse_theta_rate)]
    pub theta_rate: Option<ThetaRate>,
    /// Handling of risk-neutral probabilities outside [0, 1] [default: error]
    #[arg(long, value_enum)]
    pub ptilde_policy: Option<PtildePolicy>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write a matplotlib script that plots the output file
    #[arg(long, value_name = "FILE")]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub equity: EquityArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Maturity in lattice steps
    #[arg(long, conflicts_with = "maturity")]
    pub steps: Option<usize>,
    /// Maturity in years (rounded to whole steps)
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Price with this constant risk-neutral probability instead of equity parameters
    #[arg(long)]
    pub ptilde: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ImplyArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub equity: EquityArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Yield curve CSV: long layout (maturity_years,yield) or Treasury wide layout
    #[arg(long, value_name = "FILE")]
    pub yield_curve: Option<PathBuf>,
    /// Curve row to use from a wide Treasury file [default: latest]
    #[arg(long)]
    pub curve_date: Option<chrono::NaiveDate>,
    /// Maturities in years: `start:stop:step`, a list, or a mix (e.g. `2/12,0.5,1:30:1`)
    #[arg(long)]
    pub grid: Option<String>,
    /// Rate entering theta; only `fixed:<rate>` is meaningful here [default: fixed:<r0>]
    #[arg(long, value_parser = parse_theta_rate)]
    pub theta_rate: Option<ThetaRate>,
    /// Price tolerance of the bisection [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write a matplotlib script that plots the output file
    #[arg(long, value_name = "FILE")]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of steps to simulate [default: 252]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Upturn probability [default: the rate-side p of the calibration]
    #[arg(long)]
    pub p_up: Option<f64>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Keys accepted in the `--config` TOML file (long flag names).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub date_column: Option<String>,
    pub value_column: Option<String>,
    pub date_format: Option<String>,
    pub kind: Option<Kind>,
    pub percent: Option<bool>,
    pub delta: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub r0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub equity_input: Option<PathBuf>,
    pub baseline_units: Option<BaselineUnits>,
    pub theta_rate: Option<String>,
    pub ptilde_policy: Option<PtildePolicy>,
    pub yield_curve: Option<PathBuf>,
    pub curve_date: Option<chrono::NaiveDate>,
    pub grid: Option<String>,
    pub tol: Option<f64>,
    pub steps: Option<usize>,
    pub maturity: Option<f64>,
    pub ptilde: Option<f64>,
    pub p_up: Option<f64>,
    pub seed: Option<u64>,
    pub plot_script: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn theta_rate(&self) -> Result<Option<ThetaRate>, CliError> {
        self.theta_rate
            .as_deref()
            .map(parse_theta_rate)
            .transpose()
            .map_err(CliError::config)
    }
}

/// Fills unset flags from the config file.
pub trait Merge {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError>;
}

macro_rules! fill {
    ($self:ident, $cfg:ident, $($field:ident),+) => {
        $( if $self.$field.is_none() { $self.$field = $cfg.$field.clone(); } )+
    };
}

impl Merge for SeriesArgs {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        fill!(self, cfg, input, date_column, value_column, date_format, kind, delta);
        self.percent = self.percent || cfg.percent.unwrap_or(false);
        Ok(())
    }
}

impl Merge for OutputArgs {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        fill!(self, cfg, format, out);
        Ok(())
    }
}

impl Merge for LatticeArgs {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        fill!(self, cfg, r0, c1, c2);
        Ok(())
    }
}

impl Merge for EquityArgs {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        fill!(self, cfg, mu, sigma, p, equity_input, baseline_units);
        Ok(())
    }
}

impl Merge for PolicyArgs {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        if self.theta_rate.is_none() {
            self.theta_rate = cfg.theta_rate()?;
        }
        fill!(self, cfg, ptilde_policy);
        Ok(())
    }
}

impl Merge for Command {
    fn merge(&mut self, cfg: &ConfigFile) -> Result<(), CliError> {
        match self {
            Command::Estimate(a) => {
                a.series.merge(cfg)?;
                a.output.merge(cfg)
            }
            Command::Calibrate(a) => {
                a.series.merge(cfg)?;
                a.lattice.merge(cfg)?;
                a.output.merge(cfg)
            }
            Command::Fit(a) => {
                a.series.merge(cfg)?;
                a.lattice.merge(cfg)?;
                a.output.merge(cfg)?;
                fill!(a, cfg, plot_script);
                Ok(())
            }
            Command::Price(a) => {
                a.series.merge(cfg)?;
                a.lattice.merge(cfg)?;
                a.equity.merge(cfg)?;
                a.policy.merge(cfg)?;
                a.output.merge(cfg)?;
                if a.steps.is_none() && a.maturity.is_none() {
                    fill!(a, cfg, steps, maturity);
                }
                fill!(a, cfg, ptilde);
                Ok(())
            }
            Command::Imply(a) => {
                a.series.merge(cfg)?;
                a.lattice.merge(cfg)?;
                a.equity.merge(cfg)?;
                a.output.merge(cfg)?;
                fill!(a, cfg, yield_curve, curve_date, grid, tol, plot_script);
                if a.theta_rate.is_none() {
                    a.theta_rate = cfg.theta_rate()?;
                }
                Ok(())
            }
            Command::Simulate(a) => {
                a.series.merge(cfg)?;
                a.lattice.merge(cfg)?;
                a.output.merge(cfg)?;
                fill!(a, cfg, steps, p_up, seed);
                Ok(())
            }
        }
    }
}

impl SeriesArgs {
    pub fn delta(&self) -> Result<f64, CliError> {
        let delta = self.delta.unwrap_or(DEFAULT_DELTA);
        if delta.is_finite() && delta > 0.0 {
            Ok(delta)
        } else {
            Err(CliError::config(format!("--delta must be positive, got {delta}")))
        }
    }
}

impl OutputArgs {
    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("1:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        let g = parse_grid("2/12,0.5,1:3:1").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(parse_grid("0.5:1:0.25").unwrap(), vec![0.5, 0.75, 1.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("3:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn theta_rate_forms() {
        assert_eq!(parse_theta_rate("node").unwrap(), ThetaRate::Node);
        assert_eq!(
            parse_theta_rate("fixed:0.0377").unwrap(),
            ThetaRate::Fixed(0.0377)
        );
        assert!(parse_theta_rate("fixed:-1").is_err());
        assert!(parse_theta_rate("whatever").is_err());
    }

    #[test]
    fn config_fills_only_missing_flags() {
        let cfg: ConfigFile = toml::from_str(
            "r0 = 0.05\nc1 = 1.01\nformat = \"json\"\ntheta-rate = \"fixed:0.03\"\npercent = true",
        )
        .unwrap();
        let mut lattice = LatticeArgs {
            r0: Some(0.0377),
            ..Default::default()
        };
        lattice.merge(&cfg).unwrap();
        assert_eq!(lattice.r0, Some(0.0377));
        assert_eq!(lattice.c1, Some(1.01));

        let mut policy = PolicyArgs::default();
        policy.merge(&cfg).unwrap();
        assert_eq!(policy.theta_rate, Some(ThetaRate::Fixed(0.03)));

        let mut series = SeriesArgs::default();
        series.merge(&cfg).unwrap();
        assert!(series.percent);

        assert!(toml::from_str::<ConfigFile>("bogus = 1").is_err());
    }
}
