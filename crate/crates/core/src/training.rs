//! Levenberg-Marquardt training.
//!
//! Each epoch linearises the per-sample errors around the current weights,
//! `e(x + δ) ≈ e + J·δ`, and takes the damped Gauss-Newton step
//!
//! ```text
//! x_{k+1} = x_k − (JᵀJ + μI)⁻¹ Jᵀe
//! ```
//!
//! Small μ gives a Gauss-Newton step, large μ a short gradient-descent step.
//! A step that fails to lower the training MSE is rejected and retried with a
//! larger μ; an accepted step lowers μ for the next epoch. Training stops on
//! the MSE goal, the epoch budget, a validation stall, or μ passing its cap,
//! and always hands back the weights with the lowest validation MSE seen.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ForwardTrace, Network, NetworkError, ParamVector};
use crate::numerics::{solve_spd, DenseMatrix, NumericsError, Scalar};

/// μ is never lowered below this.
pub const MU_FLOOR: f64 = 1e-20;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty data")]
    EmptyData,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("failed to write training record: {0}")]
    Io(#[from] std::io::Error),
}

/// Inputs and targets of one data split, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pub inputs: DenseMatrix<T>,
    pub targets: DenseMatrix<T>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(inputs: DenseMatrix<T>, targets: DenseMatrix<T>) -> Result<Self, TrainingError> {
        if inputs.rows() != targets.rows() {
            return Err(TrainingError::ShapeMismatch(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_against(&self, net: &Network<T>, what: &str) -> Result<(), TrainingError> {
        let arch = net.architecture();
        if self.is_empty() {
            return Err(TrainingError::EmptyData);
        }
        if self.inputs.cols() != arch.input_dim || self.targets.cols() != arch.output_dim {
            return Err(TrainingError::ShapeMismatch(format!(
                "{what} set is {}→{} but the network is {}→{}",
                self.inputs.cols(),
                self.targets.cols(),
                arch.input_dim,
                arch.output_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub mu_max: f64,
    pub max_epochs: usize,
    pub goal_mse: f64,
    /// Consecutive non-improving validation epochs tolerated before stopping.
    /// Zero disables early stopping.
    pub max_fail: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            max_epochs: 1000,
            goal_mse: 1e-3,
            max_fail: 6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.into()));
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            return bad("mu_init must be positive");
        }
        if !(self.mu_increase > 1.0 && self.mu_increase.is_finite()) {
            return bad("mu_increase must exceed 1");
        }
        if !(self.mu_decrease > 0.0 && self.mu_decrease < 1.0) {
            return bad("mu_decrease must lie in (0, 1)");
        }
        if !(self.mu_max >= self.mu_init) {
            return bad("mu_max must be at least mu_init");
        }
        if !(self.goal_mse >= 0.0) {
            return bad("goal_mse must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GoalReached,
    MaxEpochs,
    ValidationStall,
    MuExceeded,
}

/// One accepted epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub train_mse: T,
    pub validation_mse: T,
    /// μ after the epoch's adjustment.
    pub mu: T,
}

/// One attempted LM step, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub epoch: usize,
    pub mu_before: T,
    pub mu_after: T,
    pub accepted: bool,
    /// Training MSE of the candidate; `None` when the solve failed or the
    /// candidate was not finite.
    pub candidate_mse: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord<T> {
    pub initial_train_mse: T,
    pub initial_validation_mse: T,
    pub epochs: Vec<EpochRecord<T>>,
    pub steps: Vec<StepRecord<T>>,
    pub stop_reason: StopReason,
    /// Epoch with the lowest validation MSE; 0 when no epoch was accepted.
    pub best_epoch: usize,
    pub best_params: ParamVector<T>,
}

impl<T: Scalar> TrainingRecord<T> {
    pub fn accepted_steps(&self) -> usize {
        self.epochs.len()
    }

    pub fn best_validation_mse(&self) -> Option<T> {
        self.epochs
            .iter()
            .map(|e| e.validation_mse)
            .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.min(v))))
    }

    /// Convergence trace as CSV: `epoch,train_mse,validation_mse,mu`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainingError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| TrainingError::Io(e.into());
        w.write_record(["epoch", "train_mse", "validation_mse", "mu"]).map_err(io)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_mse.to_string(),
                e.validation_mse.to_string(),
                e.mu.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stacked residuals `prediction − target`, sample-major then output.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector<T>(pub Vec<T>);

impl<T: Scalar> ErrorVector<T> {
    pub fn mean_square(&self) -> T {
        mean_square(&self.0)
    }
}

fn mean_square<T: Scalar>(values: &[T]) -> T {
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + v * v);
    sum / T::of(values.len() as f64)
}

/// Mean of squared entry-wise residuals over all `n·m` entries.
pub fn mse<T: Scalar>(predictions: &DenseMatrix<T>, targets: &DenseMatrix<T>) -> Result<T, TrainingError> {
    if predictions.rows() != targets.rows() || predictions.cols() != targets.cols() {
        return Err(TrainingError::ShapeMismatch(format!(
            "predictions {}x{} vs targets {}x{}",
            predictions.rows(),
            predictions.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if predictions.rows() == 0 || predictions.cols() == 0 {
        return Err(TrainingError::EmptyData);
    }
    let residuals: Vec<T> = predictions
        .entries()
        .iter()
        .zip(targets.entries())
        .map(|(&p, &t)| p - t)
        .collect();
    Ok(mean_square(&residuals))
}

/// MSE of `net` over a sample set.
pub fn evaluate_mse<T: Scalar>(net: &Network<T>, set: &SampleSet<T>) -> Result<T, TrainingError> {
    mse(&net.predict(&set.inputs)?, &set.targets)
}

pub fn error_vector<T: Scalar>(net: &Network<T>, set: &SampleSet<T>) -> Result<ErrorVector<T>, TrainingError> {
    set.check_against(net, "sample")?;
    let pred = net.predict(&set.inputs)?;
    Ok(ErrorVector(
        pred.entries()
            .iter()
            .zip(set.targets.entries())
            .map(|(&p, &t)| p - t)
            .collect(),
    ))
}

/// Jacobian of the stacked errors with respect to the flat parameters.
///
/// Row `k·m + o` holds `∂e_{k,o}/∂x_p` for sample `k` and output `o`. Each
/// sample gets one forward pass; the output sensitivities are then pushed
/// back through the layers using the analytic activation derivatives.
pub fn jacobian<T: Scalar>(net: &Network<T>, inputs: &DenseMatrix<T>) -> Result<DenseMatrix<T>, TrainingError> {
    let arch = net.architecture();
    if inputs.cols() != arch.input_dim {
        return Err(NetworkError::DimensionMismatch {
            expected: arch.input_dim,
            got: inputs.cols(),
        }
        .into());
    }
    let m = arch.output_dim;
    let layers = net.num_layers();
    let mut offsets = Vec::with_capacity(layers);
    let mut acc = 0;
    for l in 0..layers {
        offsets.push(acc);
        let t = net.layer(l);
        acc += t.rows() * t.cols();
    }
    let mut jac = DenseMatrix::zeros(inputs.rows() * m, acc);
    let mut trace = ForwardTrace::default();
    let mut deltas: Vec<Vec<T>> = vec![Vec::new(); layers];

    for k in 0..inputs.rows() {
        let x = inputs.row(k);
        net.forward_trace(x, &mut trace);
        for o in 0..m {
            let last = layers - 1;
            deltas[last].clear();
            deltas[last].extend(
                trace.derivatives[last]
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| if j == o { d } else { T::zero() }),
            );
            for l in (1..layers).rev() {
                let table = net.layer(l);
                let (lower, upper) = deltas.split_at_mut(l);
                let below = &mut lower[l - 1];
                below.clear();
                for (i, &d) in trace.derivatives[l - 1].iter().enumerate() {
                    let back = upper[0]
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |s, (j, &dj)| s + table[(j, i + 1)] * dj);
                    below.push(d * back);
                }
            }
            let row = jac.row_mut(k * m + o);
            for l in 0..layers {
                let prev: &[T] = if l == 0 { x } else { &trace.outputs[l - 1] };
                let stride = prev.len() + 1;
                for (j, &dj) in deltas[l].iter().enumerate() {
                    if dj == T::zero() {
                        continue;
                    }
                    let base = offsets[l] + j * stride;
                    row[base] = dj;
                    for (i, &a) in prev.iter().enumerate() {
                        row[base + 1 + i] = dj * a;
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// One damped Gauss-Newton step: `params − (JᵀJ + μI)⁻¹ Jᵀe`.
pub fn lm_step<T: Scalar>(
    params: &ParamVector<T>,
    jac: &DenseMatrix<T>,
    errors: &ErrorVector<T>,
    mu: T,
) -> Result<ParamVector<T>, TrainingError> {
    if jac.cols() != params.len() || jac.rows() != errors.0.len() {
        return Err(TrainingError::ShapeMismatch(format!(
            "Jacobian {}x{} against {} params and {} errors",
            jac.rows(),
            jac.cols(),
            params.len(),
            errors.0.len()
        )));
    }
    let gram = jac.gram();
    let grad = jac.transpose_mul_vec(&errors.0)?;
    Ok(damped_step(params, &gram, &grad, mu)?)
}

fn damped_step<T: Scalar>(
    params: &ParamVector<T>,
    gram: &DenseMatrix<T>,
    grad: &[T],
    mu: T,
) -> Result<ParamVector<T>, NumericsError> {
    let mut h = gram.clone();
    h.add_diagonal(mu);
    let delta = solve_spd(&h, grad)?;
    Ok(ParamVector(
        params.0.iter().zip(&delta).map(|(&p, &d)| p - d).collect(),
    ))
}

/// Trains a copy of `net` and returns it restored to its best-validation
/// weights, together with the full record.
pub fn train<T: Scalar>(
    net: &Network<T>,
    train_set: &SampleSet<T>,
    validation_set: &SampleSet<T>,
    config: &TrainConfig,
) -> Result<(Network<T>, TrainingRecord<T>), TrainingError> {
    config.validate()?;
    train_set.check_against(net, "training")?;
    validation_set.check_against(net, "validation")?;
    let arch = net.architecture().clone();

    let mut params = net.flatten();
    let mut current = net.clone();
    let mut errors = error_vector(&current, train_set)?;
    let mut train_mse = errors.mean_square();
    let initial_validation_mse = evaluate_mse(&current, validation_set)?;

    let goal = T::of(config.goal_mse);
    let (inc, dec) = (T::of(config.mu_increase), T::of(config.mu_decrease));
    let (mu_max, floor) = (T::of(config.mu_max), T::of(MU_FLOOR));
    let mut mu = T::of(config.mu_init);

    let mut record = TrainingRecord {
        initial_train_mse: train_mse,
        initial_validation_mse,
        epochs: Vec::new(),
        steps: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        best_epoch: 0,
        best_params: params.clone(),
    };
    let mut best_validation = T::infinity();
    let mut fails = 0usize;

    if config.max_epochs > 0 && train_mse <= goal {
        record.stop_reason = StopReason::GoalReached;
        return Ok((current, record));
    }

    'epochs: for epoch in 1..=config.max_epochs {
        let jac = jacobian(&current, &train_set.inputs)?;
        let gram = jac.gram();
        let grad = jac.transpose_mul_vec(&errors.0)?;

        loop {
            let mu_before = mu;
            let candidate = damped_step(&params, &gram, &grad, mu)
                .ok()
                .filter(ParamVector::is_finite)
                .and_then(|p| Network::unflatten(&arch, &p).ok().map(|n| (p, n)))
                .and_then(|(p, n)| {
                    let e = error_vector(&n, train_set).ok()?;
                    let m = e.mean_square();
                    m.is_finite().then_some((p, n, e, m))
                });
            let candidate_mse = candidate.as_ref().map(|c| c.3);

            match candidate {
                Some((p, n, e, m)) if m < train_mse => {
                    mu = (mu * dec).max(floor);
                    record.steps.push(StepRecord {
                        epoch,
                        mu_before,
                        mu_after: mu,
                        accepted: true,
                        candidate_mse,
                    });
                    params = p;
                    current = n;
                    errors = e;
                    train_mse = m;
                    break;
                }
                _ => {
                    mu = mu * inc;
                    record.steps.push(StepRecord {
                        epoch,
                        mu_before,
                        mu_after: mu,
                        accepted: false,
                        candidate_mse,
                    });
                    if mu > mu_max {
                        record.stop_reason = StopReason::MuExceeded;
                        break 'epochs;
                    }
                }
            }
        }

        let validation_mse = evaluate_mse(&current, validation_set)?;
        record.epochs.push(EpochRecord {
            epoch,
            train_mse,
            validation_mse,
            mu,
        });
        if validation_mse < best_validation {
            best_validation = validation_mse;
            record.best_epoch = epoch;
            record.best_params = params.clone();
            fails = 0;
        } else {
            fails += 1;
        }

        if train_mse <= goal {
            record.stop_reason = StopReason::GoalReached;
            break;
        }
        if config.max_fail > 0 && fails >= config.max_fail {
            record.stop_reason = StopReason::ValidationStall;
            break;
        }
    }

    let best = Network::unflatten(&arch, &record.best_params)?;
    Ok((best, record))
}
