//! Monte-Carlo architecture sweeps.
//!
//! Every cell of the grid (hidden sizes × activation combination) is trained
//! `runs_per_cell` times. Run `r` of cell `c` draws its split and its initial
//! weights from `derive_seed(master, c·runs + r)`, so a sweep is a pure
//! function of `(spec, dataset, master_seed)` and does not depend on how runs
//! are scheduled across threads.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split, DataError, Dataset, Normalizer, SplitFractions, SplitIndices, OUTPUT_NAMES};
use crate::network::{Activation, Architecture, Network, NetworkError, ParamVector};
use crate::numerics::{box_stats, derive_seed, quantile, BoxStats, DenseMatrix, NumericsError};
use crate::training::{evaluate_mse, mse, train, TrainConfig, TrainingError};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("observed values have zero variance")]
    DegenerateObserved,
    #[error("length mismatch: {predicted} predictions for {observed} observations")]
    LengthMismatch { predicted: usize, observed: usize },
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Which outputs a network predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// One network per named output.
    Miso(String),
    /// One network for all three outputs.
    Mimo,
}

impl SweepMode {
    pub fn output_names(&self) -> Vec<String> {
        match self {
            SweepMode::Miso(name) => vec![name.clone()],
            SweepMode::Mimo => OUTPUT_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Last field of an architecture string: the output name or `MIMO`.
    pub fn label(&self) -> String {
        match self {
            SweepMode::Miso(name) => name.clone(),
            SweepMode::Mimo => "MIMO".into(),
        }
    }

    fn validate(&self) -> Result<(), SelectionError> {
        match self {
            SweepMode::Miso(name) if !OUTPUT_NAMES.contains(&name.as_str()) => Err(SelectionError::InvalidSpec(
                format!("unknown output {name:?} (expected one of {})", OUTPUT_NAMES.join(", ")),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Median,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationSet {
    Validation,
    Test,
}

/// Inclusive range of neuron counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronRange {
    pub first: usize,
    pub last: usize,
}

impl NeuronRange {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        (self.last + 1).saturating_sub(self.first)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl std::str::FromStr for NeuronRange {
    type Err = String;

    /// Accepts `a..b` (inclusive) or a single count.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad neuron range {s:?} (expected a..b or a single count)");
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once("..") {
            Some((a, b)) => Ok(Self::new(num(a)?, num(b.trim_start_matches('='))?)),
            None => {
                let n = num(s)?;
                Ok(Self::new(n, n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub depth: usize,
    pub neuron_range_1: NeuronRange,
    /// Second hidden layer; `None` for depth 1.
    pub neuron_range_2: Option<NeuronRange>,
    /// One activation per hidden layer for each combination.
    pub activation_combos: Vec<Vec<Activation>>,
    pub runs_per_cell: usize,
    pub train_config: TrainConfig,
    pub selection_metric: SelectionMetric,
    pub evaluation_set: EvaluationSet,
    pub split_fractions: SplitFractions,
}

impl SweepSpec {
    /// Defaults for the given depth: 1..30 neurons for one layer, 1..15 × 1..15
    /// for two, every tansig/logsig combination, 100 runs per cell.
    pub fn new(mode: SweepMode, depth: usize) -> Self {
        let (r1, r2) = if depth == 2 {
            (NeuronRange::new(1, 15), Some(NeuronRange::new(1, 15)))
        } else {
            (NeuronRange::new(1, 30), None)
        };
        Self {
            mode,
            depth,
            neuron_range_1: r1,
            neuron_range_2: r2,
            activation_combos: all_combos(depth),
            runs_per_cell: 100,
            train_config: TrainConfig::default(),
            selection_metric: SelectionMetric::Median,
            evaluation_set: EvaluationSet::Validation,
            split_fractions: SplitFractions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: String| Err(SelectionError::InvalidSpec(m));
        self.mode.validate()?;
        if !(1..=2).contains(&self.depth) {
            return bad(format!("depth {} (expected 1 or 2)", self.depth));
        }
        if self.neuron_range_1.is_empty() || self.neuron_range_1.first == 0 {
            return bad("first-layer neuron range must be non-empty and start at 1 or more".into());
        }
        match (self.depth, self.neuron_range_2) {
            (2, None) => return bad("depth 2 needs a second neuron range".into()),
            (2, Some(r)) if r.is_empty() || r.first == 0 => {
                return bad("second-layer neuron range must be non-empty and start at 1 or more".into())
            }
            (1, Some(_)) => return bad("depth 1 takes no second neuron range".into()),
            _ => {}
        }
        if self.activation_combos.is_empty() {
            return bad("no activation combinations".into());
        }
        for combo in &self.activation_combos {
            if combo.len() != self.depth {
                return bad(format!("combination {combo:?} does not have {} entries", self.depth));
            }
            if combo.iter().any(|a| !Activation::HIDDEN_CHOICES.contains(a)) {
                return bad(format!("combination {combo:?} uses a non-sigmoid activation"));
            }
        }
        if self.runs_per_cell == 0 {
            return bad("runs_per_cell must be at least 1".into());
        }
        self.train_config.validate()?;
        Ok(())
    }

    /// Grid in evaluation order: activation combination outermost, then the
    /// first-layer count, then the second.
    pub fn cells(&self) -> Vec<CellId> {
        let mut cells = Vec::new();
        for combo in &self.activation_combos {
            for n1 in self.neuron_range_1.iter() {
                let seconds: Vec<Option<usize>> = match self.neuron_range_2 {
                    Some(r) if self.depth == 2 => r.iter().map(Some).collect(),
                    _ => vec![None],
                };
                for n2 in seconds {
                    let neurons = std::iter::once(n1).chain(n2).collect();
                    cells.push(CellId {
                        index: cells.len(),
                        neurons,
                        activations: combo.clone(),
                    });
                }
            }
        }
        cells
    }
}

fn all_combos(depth: usize) -> Vec<Vec<Activation>> {
    let mut combos = vec![Vec::new()];
    for _ in 0..depth {
        combos = combos
            .into_iter()
            .flat_map(|c: Vec<Activation>| {
                Activation::HIDDEN_CHOICES.iter().map(move |&a| {
                    let mut c = c.clone();
                    c.push(a);
                    c
                })
            })
            .collect();
    }
    combos
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellId {
    /// Position in [`SweepSpec::cells`].
    pub index: usize,
    pub neurons: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl CellId {
    pub fn total_neurons(&self) -> usize {
        self.neurons.iter().sum()
    }

    pub fn architecture(&self, output_dim: usize) -> Result<Architecture, NetworkError> {
        let hidden: Vec<_> = self.neurons.iter().copied().zip(self.activations.iter().copied()).collect();
        let arch = Architecture::new(crate::data::INPUT_NAMES.len(), &hidden, output_dim)?;
        arch.check_selectable()?;
        Ok(arch)
    }

    /// `neurons/activation` per layer followed by the output label, e.g.
    /// `8/tansig/15/logsig/MIMO`.
    pub fn describe(&self, mode: &SweepMode) -> String {
        let mut s = String::new();
        for (n, a) in self.neurons.iter().zip(&self.activations) {
            let _ = write!(s, "{n}/{a}/");
        }
        s + &mode.label()
    }

    pub fn combo_label(&self) -> String {
        self.activations.iter().map(|a| a.name()).collect::<Vec<_>>().join("/")
    }
}

/// Distribution of evaluation MSEs over the runs of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub cell: CellId,
    /// Evaluation MSE per run in run order; a failed run is `+∞`, written as
    /// `null`.
    #[serde(with = "inf_as_null::seq")]
    pub run_mse: Vec<f64>,
    /// Box statistics of the finite entries; `None` when every run failed.
    #[serde(rename = "box")]
    pub box_stats: Option<BoxStats<f64>>,
    #[serde(with = "inf_as_null::one")]
    pub min_mse: f64,
    #[serde(with = "inf_as_null::one")]
    pub median_mse: f64,
    pub best_run: usize,
    pub best_run_seed: u64,
    pub best_params: ParamVector<f64>,
    pub failed_runs: usize,
    /// More than half the runs failed; never selected.
    pub excluded: bool,
}

impl CellStats {
    pub fn metric(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::Median => self.median_mse,
            SelectionMetric::Minimum => self.min_mse,
        }
    }

    pub fn network(&self, output_dim: usize) -> Result<Network<f64>, SelectionError> {
        Ok(Network::unflatten(&self.cell.architecture(output_dim)?, &self.best_params)?)
    }
}

/// Seed of run `run` of cell `cell_index`.
pub fn run_seed(master_seed: u64, cell_index: usize, runs_per_cell: usize, run: usize) -> u64 {
    derive_seed(master_seed, (cell_index as u64) * (runs_per_cell as u64) + run as u64)
}

struct RunOutcome {
    mse: f64,
    params: ParamVector<f64>,
}

/// A numerical breakdown during training; the run is recorded as failed
/// rather than aborting the sweep.
fn is_numerical_failure(e: &TrainingError) -> bool {
    matches!(
        e,
        TrainingError::Numerics(_) | TrainingError::Network(NetworkError::NonFiniteWeight(_))
    )
}

fn run_once(
    cell: &CellId,
    dataset: &Dataset,
    spec: &SweepSpec,
    seed: u64,
) -> Result<RunOutcome, SelectionError> {
    let arch = cell.architecture(dataset.output_names().len())?;
    let parts = split(dataset.len(), spec.split_fractions, seed)?;
    let net = Network::init_weights(&arch, seed)?;
    let train_set = dataset.sample_set(&parts.train);
    let val_set = dataset.sample_set(&parts.validation);
    let failed = || RunOutcome {
        mse: f64::INFINITY,
        params: ParamVector(Vec::new()),
    };
    let trained = match train(&net, &train_set, &val_set, &spec.train_config) {
        Ok((trained, _)) => trained,
        Err(e) if is_numerical_failure(&e) => return Ok(failed()),
        Err(e) => return Err(e.into()),
    };
    let eval_rows = match spec.evaluation_set {
        EvaluationSet::Validation => &parts.validation,
        EvaluationSet::Test => &parts.test,
    };
    let mse = evaluate_mse(&trained, &dataset.sample_set(eval_rows))?;
    if !mse.is_finite() {
        return Ok(failed());
    }
    Ok(RunOutcome {
        mse,
        params: trained.flatten(),
    })
}

fn aggregate(
    cell: &CellId,
    spec: &SweepSpec,
    master_seed: u64,
    runs: Vec<RunOutcome>,
) -> Result<CellStats, SelectionError> {
    let run_mse: Vec<f64> = runs.iter().map(|r| r.mse).collect();
    let finite: Vec<f64> = run_mse.iter().copied().filter(|v| v.is_finite()).collect();
    let failed_runs = run_mse.len() - finite.len();
    let box_stats = if finite.is_empty() {
        None
    } else {
        Some(box_stats(&finite)?)
    };
    // First run attaining the minimum; ties go to the earlier run.
    let best_run = run_mse
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < run_mse[best] { i } else { best });
    let mut runs = runs;
    Ok(CellStats {
        cell: cell.clone(),
        min_mse: run_mse[best_run],
        median_mse: quantile(&run_mse, 0.5)?,
        best_run,
        best_run_seed: run_seed(master_seed, cell.index, spec.runs_per_cell, best_run),
        best_params: std::mem::replace(&mut runs[best_run].params, ParamVector(Vec::new())),
        failed_runs,
        excluded: 2 * failed_runs > run_mse.len(),
        run_mse,
        box_stats,
    })
}

/// Runs every repetition of one cell.
///
/// `dataset` must already be normalized and hold exactly the outputs of
/// `spec.mode`; [`prepare`] produces such a dataset.
pub fn run_cell(
    cell: &CellId,
    dataset: &Dataset,
    spec: &SweepSpec,
    master_seed: u64,
) -> Result<CellStats, SelectionError> {
    spec.validate()?;
    check_outputs(dataset, &spec.mode)?;
    let runs = (0..spec.runs_per_cell)
        .map(|r| run_once(cell, dataset, spec, run_seed(master_seed, cell.index, spec.runs_per_cell, r)))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate(cell, spec, master_seed, runs)
}

fn check_outputs(dataset: &Dataset, mode: &SweepMode) -> Result<(), SelectionError> {
    if dataset.output_names() != mode.output_names().as_slice() {
        return Err(SelectionError::InvalidSpec(format!(
            "dataset outputs {:?} do not match mode {}",
            dataset.output_names(),
            mode.label()
        )));
    }
    Ok(())
}

/// Fits the scaling on the full dataset (all columns), then keeps the outputs
/// of `mode`. Returns the normalized view and the fitted normalizer.
pub fn prepare(dataset: &Dataset, mode: &SweepMode) -> Result<(Dataset, Normalizer), SelectionError> {
    mode.validate()?;
    let normalizer = Normalizer::fit(dataset)?;
    let normalized = normalizer.normalize(dataset)?.select_outputs(&mode.output_names())?;
    Ok((normalized, normalizer))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub master_seed: u64,
    pub normalizer: Normalizer,
    pub cells: Vec<CellStats>,
    /// Index into `cells`; `None` when every cell was excluded.
    pub selected: Option<usize>,
    /// Cells excluded for having too many failed runs.
    pub flagged: Vec<usize>,
    pub failed_runs: usize,
    pub wall_time_secs: f64,
}

impl SweepReport {
    pub fn selected_cell(&self) -> Option<&CellStats> {
        self.selected.map(|i| &self.cells[i])
    }

    /// Architecture string of the selected cell, e.g. `30/logsig/LHV`.
    pub fn selected_architecture(&self) -> Option<String> {
        self.selected_cell().map(|c| c.cell.describe(&self.spec.mode))
    }

    /// Best run of the selected cell, rebuilt.
    pub fn selected_network(&self) -> Result<Option<Network<f64>>, SelectionError> {
        let dim = self.spec.mode.output_names().len();
        self.selected_cell().map(|c| c.network(dim)).transpose()
    }

    /// Split the selected network was trained on.
    pub fn selected_split(&self, n: usize) -> Result<Option<SplitIndices>, SelectionError> {
        self.selected_cell()
            .map(|c| split(n, self.spec.split_fractions, c.best_run_seed).map_err(Into::into))
            .transpose()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serialises")
    }

    /// Depth-1 box-plot table:
    /// `neurons,activation,min,whisker_low,q1,median,q3,whisker_high,max,outliers`.
    /// Failed runs appear as `inf` among the outliers; a cell with no finite
    /// run leaves the statistics empty.
    pub fn write_box_csv<W: Write>(&self, out: W) -> Result<(), SelectionError> {
        if self.spec.depth != 1 {
            return Err(SelectionError::InvalidSpec("box-plot export needs a depth-1 sweep".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BOX_CSV_HEADER)?;
        for c in &self.cells {
            let mut row = vec![c.cell.neurons[0].to_string(), c.cell.combo_label()];
            match &c.box_stats {
                Some(b) => {
                    let mut outliers: Vec<String> = b.outliers.iter().map(|v| v.to_string()).collect();
                    outliers.extend(std::iter::repeat("inf".to_string()).take(c.failed_runs));
                    row.extend(
                        [b.minimum, b.whisker_low, b.q1, b.median, b.q3, b.whisker_high, b.maximum]
                            .iter()
                            .map(|v| v.to_string()),
                    );
                    row.push(outliers.join(";"));
                }
                None => {
                    row.extend(std::iter::repeat(String::new()).take(7));
                    row.push(vec!["inf"; c.failed_runs].join(";"));
                }
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Depth-2 surface table: `n1,n2,activation_combo,min_mse,median_mse`.
    pub fn write_surface_csv<W: Write>(&self, out: W) -> Result<(), SelectionError> {
        if self.spec.depth != 2 {
            return Err(SelectionError::InvalidSpec("surface export needs a depth-2 sweep".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SURFACE_CSV_HEADER)?;
        for c in &self.cells {
            w.write_record([
                c.cell.neurons[0].to_string(),
                c.cell.neurons[1].to_string(),
                c.cell.combo_label(),
                c.min_mse.to_string(),
                c.median_mse.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub const BOX_CSV_HEADER: [&str; 10] = [
    "neurons",
    "activation",
    "min",
    "whisker_low",
    "q1",
    "median",
    "q3",
    "whisker_high",
    "max",
    "outliers",
];
pub const SURFACE_CSV_HEADER: [&str; 5] = ["n1", "n2", "activation_combo", "min_mse", "median_mse"];
pub const FIT_CSV_HEADER: [&str; 4] = ["split", "output_name", "observed", "predicted"];

/// Picks the cell with the lowest metric among non-excluded cells. Ties go to
/// fewer total neurons, then the alphabetically first activation sequence,
/// then the earlier cell.
pub fn select(cells: &[CellStats], metric: SelectionMetric) -> Option<usize> {
    let key = |c: &CellStats| (c.metric(metric), c.cell.total_neurons(), c.cell.activations.clone(), c.cell.index);
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.excluded)
        .min_by(|(_, a), (_, b)| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.cmp(&kb.1))
                .then_with(|| {
                    let names = |v: &[Activation]| v.iter().map(|a| a.name()).collect::<Vec<_>>();
                    names(&ka.2).cmp(&names(&kb.2))
                })
                .then(ka.3.cmp(&kb.3))
        })
        .map(|(i, _)| i)
}

/// Runs the full grid on the global thread pool.
pub fn sweep(spec: &SweepSpec, dataset: &Dataset, master_seed: u64) -> Result<SweepReport, SelectionError> {
    sweep_with_workers(spec, dataset, master_seed, 0)
}

/// Runs the full grid on `workers` threads (0 picks the machine default).
/// The report is identical for any worker count apart from `wall_time_secs`.
pub fn sweep_with_workers(
    spec: &SweepSpec,
    dataset: &Dataset,
    master_seed: u64,
    workers: usize,
) -> Result<SweepReport, SelectionError> {
    spec.validate()?;
    let start = Instant::now();
    let (normalized, normalizer) = prepare(dataset, &spec.mode)?;
    let cells = spec.cells();
    let runs = spec.runs_per_cell;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..runs).map(move |r| (c, r))).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SelectionError::WorkerPool(e.to_string()))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| run_once(&cells[c], &normalized, spec, run_seed(master_seed, c, runs, r)))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut outcomes = outcomes.into_iter();
    let stats = cells
        .iter()
        .map(|cell| aggregate(cell, spec, master_seed, outcomes.by_ref().take(runs).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let selected = select(&stats, spec.selection_metric);
    Ok(SweepReport {
        spec: spec.clone(),
        master_seed,
        normalizer,
        flagged: stats.iter().filter(|c| c.excluded).map(|c| c.cell.index).collect(),
        failed_runs: stats.iter().map(|c| c.failed_runs).sum(),
        cells: stats,
        selected,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn check_pairs(predicted: &[f64], observed: &[f64]) -> Result<(), SelectionError> {
    if predicted.len() != observed.len() || observed.len() < 2 {
        return Err(SelectionError::LengthMismatch {
            predicted: predicted.len(),
            observed: observed.len(),
        });
    }
    Ok(())
}

fn centered_sums(predicted: &[f64], observed: &[f64]) -> (f64, f64, f64) {
    let n = observed.len() as f64;
    let mp = predicted.iter().sum::<f64>() / n;
    let mo = observed.iter().sum::<f64>() / n;
    predicted.iter().zip(observed).fold((0.0, 0.0, 0.0), |(sxy, sxx, syy), (p, o)| {
        let (dp, d_o) = (p - mp, o - mo);
        (sxy + dp * d_o, sxx + dp * dp, syy + d_o * d_o)
    })
}

/// Squared Pearson correlation of predictions against observations, in
/// `[0, 1]`. Constant predictions give 0.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Result<f64, SelectionError> {
    check_pairs(predicted, observed)?;
    let (sxy, spp, soo) = centered_sums(predicted, observed);
    if !(soo > 0.0) {
        return Err(SelectionError::DegenerateObserved);
    }
    if !(spp > 0.0) {
        return Ok(0.0);
    }
    Ok(((sxy / spp) * (sxy / soo)).clamp(0.0, 1.0))
}

/// Coefficient of determination `1 − SS_res/SS_tot`; at most 1, unbounded
/// below.
pub fn coefficient_of_determination(predicted: &[f64], observed: &[f64]) -> Result<f64, SelectionError> {
    check_pairs(predicted, observed)?;
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(SelectionError::DegenerateObserved);
    }
    let ss_res: f64 = predicted.iter().zip(observed).map(|(p, o)| (o - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `None` where R² is undefined (fewer than two points or constant targets).
fn optional_metric(r: Result<f64, SelectionError>) -> Result<Option<f64>, SelectionError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(SelectionError::DegenerateObserved | SelectionError::LengthMismatch { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPair {
    pub output_name: String,
    pub observed: f64,
    pub predicted: f64,
}

/// Fit quality on one split. MSE and R² are computed in normalized units,
/// the pairs are in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFit {
    pub split: String,
    pub samples: usize,
    pub mse: f64,
    pub r_squared: Vec<Option<f64>>,
    pub pooled_r_squared: Option<f64>,
    pub cod: Vec<Option<f64>>,
    pub pooled_cod: Option<f64>,
    pub pairs: Vec<FitPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub output_names: Vec<String>,
    /// Train, validation, test.
    pub splits: Vec<SplitFit>,
    /// R² over every pair of every split.
    pub overall_r_squared: Option<f64>,
}

impl RegressionFit {
    pub fn split(&self, name: &str) -> Option<&SplitFit> {
        self.splits.iter().find(|s| s.split == name)
    }

    /// `split,output_name,observed,predicted` in physical units.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SelectionError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FIT_CSV_HEADER)?;
        for s in &self.splits {
            for p in &s.pairs {
                w.write_record([
                    s.split.clone(),
                    p.output_name.clone(),
                    p.observed.to_string(),
                    p.predicted.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Scores `net` on every split of `dataset` (physical units), whose outputs
/// must be the network's outputs in order.
pub fn evaluate_fit(
    net: &Network<f64>,
    splits: &SplitIndices,
    dataset: &Dataset,
    normalizer: &Normalizer,
) -> Result<RegressionFit, SelectionError> {
    let names = dataset.output_names().to_vec();
    if net.architecture().output_dim != names.len() {
        return Err(SelectionError::InvalidSpec(format!(
            "network has {} outputs, dataset has {}",
            net.architecture().output_dim,
            names.len()
        )));
    }
    let normalized = normalizer.normalize(dataset)?;
    let mut all_pred = Vec::new();
    let mut all_obs = Vec::new();
    let mut fits = Vec::new();
    for (label, rows) in [
        ("train", &splits.train),
        ("validation", &splits.validation),
        ("test", &splits.test),
    ] {
        let set = normalized.sample_set(rows);
        let pred = net.predict(&set.inputs)?;
        let split_mse = if rows.is_empty() { f64::NAN } else { mse(&pred, &set.targets)? };
        let mut r2 = Vec::new();
        let mut cod = Vec::new();
        for o in 0..names.len() {
            let (p, t) = (pred.column(o), set.targets.column(o));
            r2.push(optional_metric(r_squared(&p, &t))?);
            cod.push(optional_metric(coefficient_of_determination(&p, &t))?);
        }
        let (p_flat, t_flat) = column_major(&pred, &set.targets);
        let pooled_r_squared = optional_metric(r_squared(&p_flat, &t_flat))?;
        let pooled_cod = optional_metric(coefficient_of_determination(&p_flat, &t_flat))?;
        all_pred.extend_from_slice(&p_flat);
        all_obs.extend_from_slice(&t_flat);

        let phys_pred = normalizer.denormalize_outputs(&pred, &names)?;
        let phys_obs = dataset.outputs().select_rows(rows);
        let mut pairs = Vec::with_capacity(rows.len() * names.len());
        for (i, _) in rows.iter().enumerate() {
            for (o, name) in names.iter().enumerate() {
                pairs.push(FitPair {
                    output_name: name.clone(),
                    observed: phys_obs[(i, o)],
                    predicted: phys_pred[(i, o)],
                });
            }
        }
        fits.push(SplitFit {
            split: label.into(),
            samples: rows.len(),
            mse: split_mse,
            r_squared: r2,
            pooled_r_squared,
            cod,
            pooled_cod,
            pairs,
        });
    }
    Ok(RegressionFit {
        output_names: names,
        splits: fits,
        overall_r_squared: optional_metric(r_squared(&all_pred, &all_obs))?,
    })
}

fn column_major(pred: &DenseMatrix<f64>, targets: &DenseMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::with_capacity(pred.rows() * pred.cols());
    let mut t = Vec::with_capacity(p.capacity());
    for o in 0..pred.cols() {
        p.extend(pred.column(o));
        t.extend(targets.column(o));
    }
    (p, t)
}

/// Sweep settings for each depth; the mode of each is overwritten per
/// variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTemplate {
    pub depth1: SweepSpec,
    pub depth2: SweepSpec,
}

impl Default for ComparisonTemplate {
    fn default() -> Self {
        Self {
            depth1: SweepSpec::new(SweepMode::Mimo, 1),
            depth2: SweepSpec::new(SweepMode::Mimo, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub depth: usize,
    pub mode: SweepMode,
    /// Winning cell, e.g. `30/logsig/LHV`; `None` when every cell failed.
    pub architecture: Option<String>,
    pub overall_r_squared: Option<f64>,
    pub test_mse: Option<f64>,
    #[serde(with = "inf_as_null::one")]
    pub selection_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub master_seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonRecord {
    /// Plain-text table with R² as a percentage.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<6} {:<28} {:>8} {:>12}", "depth", "mode", "architecture", "R2 (%)", "test MSE");
        for r in &self.rows {
            let r2 = r.overall_r_squared.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
            let mse = r.test_mse.map_or("-".to_string(), |v| format!("{v:.3e}"));
            let mode = match &r.mode {
                SweepMode::Miso(_) => "MISO",
                SweepMode::Mimo => "MIMO",
            };
            let _ = writeln!(
                s,
                "{:<6} {:<6} {:<28} {:>8} {:>12}",
                r.depth,
                mode,
                r.architecture.as_deref().unwrap_or("-"),
                r2,
                mse
            );
        }
        s
    }
}

/// The eight variants: depths 1 and 2, each output on its own and all three
/// jointly.
pub fn comparison_variants() -> Vec<(usize, SweepMode)> {
    let modes: Vec<SweepMode> = OUTPUT_NAMES
        .iter()
        .map(|n| SweepMode::Miso(n.to_string()))
        .chain(std::iter::once(SweepMode::Mimo))
        .collect();
    [1, 2]
        .into_iter()
        .flat_map(|d| modes.iter().cloned().map(move |m| (d, m)))
        .collect()
}

/// Sweeps all eight variants and scores each winner on all splits of the run
/// that produced it. Variant `i` uses master seed `derive_seed(master, i)`.
pub fn compare_modes(
    dataset: &Dataset,
    template: &ComparisonTemplate,
    master_seed: u64,
    workers: usize,
) -> Result<(ComparisonRecord, Vec<SweepReport>), SelectionError> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, (depth, mode)) in comparison_variants().into_iter().enumerate() {
        let mut spec = if depth == 1 {
            template.depth1.clone()
        } else {
            template.depth2.clone()
        };
        spec.mode = mode.clone();
        let seed = derive_seed(master_seed, i as u64);
        let report = sweep_with_workers(&spec, dataset, seed, workers)?;
        let subset = dataset.select_outputs(&mode.output_names())?;
        let mut row = ComparisonRow {
            depth,
            mode,
            architecture: report.selected_architecture(),
            overall_r_squared: None,
            test_mse: None,
            selection_value: f64::INFINITY,
        };
        if let (Some(cell), Some(net), Some(parts)) = (
            report.selected_cell(),
            report.selected_network()?,
            report.selected_split(dataset.len())?,
        ) {
            let fit = evaluate_fit(&net, &parts, &subset, &report.normalizer)?;
            row.overall_r_squared = fit.overall_r_squared;
            row.test_mse = fit.split("test").map(|s| s.mse);
            row.selection_value = cell.metric(spec.selection_metric);
        }
        rows.push(row);
        reports.push(report);
    }
    Ok((ComparisonRecord { master_seed, rows }, reports))
}

/// JSON has no infinity; failed-run MSEs travel as `null`.
mod inf_as_null {
    pub mod one {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            if v.is_finite() {
                s.serialize_some(v)
            } else {
                s.serialize_none()
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
        }
    }

    pub mod seq {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?
                .into_iter()
                .map(|x| x.unwrap_or(f64::INFINITY))
                .collect())
        }
    }
}
