use std::path::PathBuf;

use annsel::selection::{EvaluationSet, NeuronRange, SelectionMetric, SweepMode};
use annsel::training::TrainConfig;
use annsel::Activation;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "annsel", version, about = "Levenberg-Marquardt networks and Monte-Carlo architecture sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic gasifier dataset.
    GenData(GenDataArgs),
    /// Train one network and save it with its training trace.
    Train(TrainArgs),
    /// Sweep hidden-layer sizes and activations and select the best cell.
    Sweep(SweepArgs),
    /// Apply a saved model to a CSV of inputs.
    Predict(PredictArgs),
    /// Run the single/double layer, MISO/MIMO comparison.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = TrainConfig::default().mu_init)]
    pub mu_init: f64,
    #[arg(long, default_value_t = TrainConfig::default().mu_increase)]
    pub mu_increase: f64,
    #[arg(long, default_value_t = TrainConfig::default().mu_decrease)]
    pub mu_decrease: f64,
    #[arg(long, default_value_t = TrainConfig::default().mu_max)]
    pub mu_max: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().goal_mse)]
    pub goal_mse: f64,
    /// Non-improving validation epochs before stopping; 0 disables.
    #[arg(long, default_value_t = TrainConfig::default().max_fail)]
    pub max_fail: usize,
}

impl TrainFlags {
    pub fn config(&self) -> Result<TrainConfig, CliError> {
        let c = TrainConfig {
            mu_init: self.mu_init,
            mu_increase: self.mu_increase,
            mu_decrease: self.mu_decrease,
            mu_max: self.mu_max,
            max_epochs: self.max_epochs,
            goal_mse: self.goal_mse,
            max_fail: self.max_fail,
        };
        c.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `mimo` or `miso:<output>`.
    #[arg(long, value_parser = parse_mode)]
    pub mode: SweepMode,
    /// Hidden layer sizes, e.g. `28` or `8,15`.
    #[arg(long)]
    pub hidden: String,
    /// One activation per hidden layer, e.g. `logsig` or `tansig,logsig`.
    #[arg(long)]
    pub act: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Median,
    Minimum,
}

impl From<MetricArg> for SelectionMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Median => SelectionMetric::Median,
            MetricArg::Minimum => SelectionMetric::Minimum,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalArg {
    Validation,
    Test,
}

impl From<EvalArg> for EvaluationSet {
    fn from(e: EvalArg) -> Self {
        match e {
            EvalArg::Validation => EvaluationSet::Validation,
            EvalArg::Test => EvaluationSet::Test,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    pub mode: SweepMode,
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// First-layer neuron counts, `a..b` inclusive.
    #[arg(long, value_parser = parse_range)]
    pub neurons: Option<NeuronRange>,
    /// Second-layer neuron counts (depth 2).
    #[arg(long, value_parser = parse_range)]
    pub neurons2: Option<NeuronRange>,
    /// Activation combinations separated by `;`, layers within one by `,`,
    /// e.g. `tansig,logsig;logsig,logsig`.
    #[arg(long)]
    pub combos: Option<String>,
    #[arg(long, value_enum, default_value_t = MetricArg::Median)]
    pub metric: MetricArg,
    #[arg(long = "eval", value_enum, default_value_t = EvalArg::Validation)]
    pub evaluation: EvalArg,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Neuron counts of the single-layer sweeps.
    #[arg(long, value_parser = parse_range, default_value = "1..30")]
    pub single: NeuronRange,
    /// First-layer neuron counts of the double-layer sweeps.
    #[arg(long, value_parser = parse_range, default_value = "1..15")]
    pub double1: NeuronRange,
    /// Second-layer neuron counts of the double-layer sweeps.
    #[arg(long, value_parser = parse_range, default_value = "1..15")]
    pub double2: NeuronRange,
    #[arg(long, value_enum, default_value_t = MetricArg::Median)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

pub fn parse_mode(s: &str) -> Result<SweepMode, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("mimo") {
        return Ok(SweepMode::Mimo);
    }
    let name = s
        .split_once(':')
        .filter(|(m, _)| m.eq_ignore_ascii_case("miso"))
        .map(|(_, n)| n.trim())
        .ok_or_else(|| format!("bad mode {s:?} (expected mimo or miso:<output>)"))?;
    annsel::data::OUTPUT_NAMES
        .iter()
        .find(|o| o.eq_ignore_ascii_case(name))
        .map(|o| SweepMode::Miso(o.to_string()))
        .ok_or_else(|| format!("unknown output {name:?} (expected LHV, LHVp or GasYield)"))
}

pub fn parse_range(s: &str) -> Result<NeuronRange, String> {
    s.parse()
}

/// Parses `--hidden` and `--act` into one `(size, activation)` per layer.
pub fn parse_layers(hidden: &str, act: &str) -> Result<Vec<(usize, Activation)>, CliError> {
    let sizes = hidden
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::usage(format!("--hidden: bad layer size {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let acts = act
        .split(',')
        .map(|t| t.parse::<Activation>().map_err(|e| CliError::usage(format!("--act: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.len() != acts.len() {
        return Err(CliError::usage(format!(
            "--hidden lists {} layer(s) but --act lists {}",
            sizes.len(),
            acts.len()
        )));
    }
    if !(1..=2).contains(&sizes.len()) {
        return Err(CliError::usage("only one or two hidden layers are supported"));
    }
    Ok(sizes.into_iter().zip(acts).collect())
}

/// Parses `--combos`; every combination must name one activation per layer.
pub fn parse_combos(s: &str, depth: usize) -> Result<Vec<Vec<Activation>>, CliError> {
    s.split(';')
        .map(|combo| {
            let acts = combo
                .split(',')
                .map(|t| t.parse::<Activation>().map_err(|e| CliError::usage(format!("--combos: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if acts.len() != depth {
                return Err(CliError::usage(format!(
                    "--combos: {combo:?} has {} activation(s), depth is {depth}",
                    acts.len()
                )));
            }
            Ok(acts)
        })
        .collect()
}
