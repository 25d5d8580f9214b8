//! Feed-forward network topology, evaluation, and the mapping between
//! structured weights and the flat parameter vector the optimiser works on.
//!
//! Layer `l` stores a `(neurons × (fan_in + 1))` weight table. Column 0 is the
//! bias, read against a constant input of 1; column `i ≥ 1` multiplies the
//! `i`-th output of the previous layer. The flat parameter ordering is
//! layer-major, then neuron, then input column (bias first):
//!
//! ```text
//! [ w¹(n=0,i=0), w¹(0,1), …, w¹(0,d⁰), w¹(1,0), …, wᴸ(dᴸ-1, dᴸ⁻¹) ]
//! ```

mod activation;
pub mod model_file;

pub use activation::{Activation, UnknownActivation};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{seeded_rng, DenseMatrix, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has length {got}, architecture needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite weight at flat index {0}")]
    NonFiniteWeight(usize),
}

/// Network topology: input width, hidden layers in forward order, and output
/// width. The output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
    pub output_dim: usize,
    pub output_activation: Activation,
}

impl Architecture {
    /// General constructor. Any number of hidden layers (including none, which
    /// gives a linear model) and any activation are accepted here; use
    /// [`Architecture::check_selectable`] for the 1–2 layer sigmoid family the
    /// selection harness searches over.
    pub fn new(
        input_dim: usize,
        hidden: &[(usize, Activation)],
        output_dim: usize,
    ) -> Result<Self, NetworkError> {
        let arch = Self {
            input_dim,
            hidden_sizes: hidden.iter().map(|h| h.0).collect(),
            hidden_activations: hidden.iter().map(|h| h.1).collect(),
            output_dim,
            output_activation: Activation::Purelin,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Single linear layer, inputs straight to outputs.
    pub fn linear(input_dim: usize, output_dim: usize) -> Result<Self, NetworkError> {
        Self::new(input_dim, &[], output_dim)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidArchitecture(m));
        if self.input_dim == 0 || self.output_dim == 0 {
            return bad("input and output widths must be at least 1".into());
        }
        if self.hidden_sizes.len() != self.hidden_activations.len() {
            return bad(format!(
                "{} hidden sizes but {} hidden activations",
                self.hidden_sizes.len(),
                self.hidden_activations.len()
            ));
        }
        if self.hidden_sizes.iter().any(|&s| s == 0) {
            return bad("hidden layer sizes must be at least 1".into());
        }
        if self.output_activation != Activation::Purelin {
            return bad(format!("output activation must be purelin, got {}", self.output_activation));
        }
        Ok(())
    }

    /// Restricts to one or two hidden layers of tansig/logsig neurons.
    pub fn check_selectable(&self) -> Result<(), NetworkError> {
        self.validate()?;
        if !(1..=2).contains(&self.hidden_sizes.len()) {
            return Err(NetworkError::InvalidArchitecture(format!(
                "expected 1 or 2 hidden layers, got {}",
                self.hidden_sizes.len()
            )));
        }
        if let Some(a) = self
            .hidden_activations
            .iter()
            .find(|a| !Activation::HIDDEN_CHOICES.contains(a))
        {
            return Err(NetworkError::InvalidArchitecture(format!(
                "hidden activation must be tansig or logsig, got {a}"
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.hidden_sizes.len()
    }

    /// Width of every layer, input first.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_sizes.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_sizes);
        w.push(self.output_dim);
        w
    }

    /// Activation of each non-input layer.
    pub fn layer_activations(&self) -> Vec<Activation> {
        let mut a = self.hidden_activations.clone();
        a.push(self.output_activation);
        a
    }

    /// `Σ_l (d^(l-1) + 1)·d^l`.
    pub fn param_count(&self) -> usize {
        self.layer_widths()
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    pub fn total_hidden_neurons(&self) -> usize {
        self.hidden_sizes.iter().sum()
    }
}

/// Flat parameter vector in the documented layer/neuron/input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector<T>(pub Vec<T>);

impl<T: Scalar> ParamVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    architecture: Architecture,
    layers: Vec<DenseMatrix<T>>,
}

/// Per-layer outputs and activation derivatives from one forward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct ForwardTrace<T> {
    pub(crate) outputs: Vec<Vec<T>>,
    pub(crate) derivatives: Vec<Vec<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn zeros(architecture: Architecture) -> Result<Self, NetworkError> {
        architecture.validate()?;
        let layers = architecture
            .layer_widths()
            .windows(2)
            .map(|w| DenseMatrix::zeros(w[1], w[0] + 1))
            .collect();
        Ok(Self { architecture, layers })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Weight table of layer `layer` (0-based over non-input layers); entry
    /// `(j, i)` connects input column `i` (0 = bias) to neuron `j`.
    pub fn layer(&self, layer: usize) -> &DenseMatrix<T> {
        &self.layers[layer]
    }

    pub fn weight(&self, layer: usize, input: usize, neuron: usize) -> T {
        self.layers[layer][(neuron, input)]
    }

    pub fn set_weight(&mut self, layer: usize, input: usize, neuron: usize, value: T) {
        self.layers[layer][(neuron, input)] = value;
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NetworkError> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for (table, act) in self.layers.iter().zip(self.architecture.layer_activations()) {
            current = (0..table.rows())
                .map(|j| act.value(pre_activation(table.row(j), &current)))
                .collect();
        }
        Ok(current)
    }

    /// Row-wise forward pass over an `n × input_dim` table.
    pub fn predict(&self, inputs: &DenseMatrix<T>) -> Result<DenseMatrix<T>, NetworkError> {
        if inputs.cols() != self.architecture.input_dim {
            return Err(NetworkError::DimensionMismatch {
                expected: self.architecture.input_dim,
                got: inputs.cols(),
            });
        }
        let mut out = DenseMatrix::zeros(inputs.rows(), self.architecture.output_dim);
        for r in 0..inputs.rows() {
            let y = self.forward(inputs.row(r))?;
            out.row_mut(r).copy_from_slice(&y);
        }
        Ok(out)
    }

    pub(crate) fn forward_trace(&self, input: &[T], trace: &mut ForwardTrace<T>) {
        let n = self.layers.len();
        trace.outputs.resize(n, Vec::new());
        trace.derivatives.resize(n, Vec::new());
        for (l, act) in self.architecture.layer_activations().into_iter().enumerate() {
            let table = &self.layers[l];
            let (done, rest) = trace.outputs.split_at_mut(l);
            let prev: &[T] = if l == 0 { input } else { &done[l - 1] };
            let out = &mut rest[0];
            let der = &mut trace.derivatives[l];
            out.clear();
            der.clear();
            for j in 0..table.rows() {
                let (y, d) = act.eval(pre_activation(table.row(j), prev));
                out.push(y);
                der.push(d);
            }
        }
    }

    fn check_input(&self, input: &[T]) -> Result<(), NetworkError> {
        if input.len() != self.architecture.input_dim {
            return Err(NetworkError::DimensionMismatch {
                expected: self.architecture.input_dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn flatten(&self) -> ParamVector<T> {
        ParamVector(
            self.layers
                .iter()
                .flat_map(|t| t.entries().iter().copied())
                .collect(),
        )
    }

    pub fn unflatten(architecture: &Architecture, params: &ParamVector<T>) -> Result<Self, NetworkError> {
        let expected = architecture.param_count();
        if params.len() != expected {
            return Err(NetworkError::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        if let Some(k) = params.0.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteWeight(k));
        }
        let mut net = Self::zeros(architecture.clone())?;
        let mut offset = 0;
        for table in &mut net.layers {
            let len = table.rows() * table.cols();
            *table = DenseMatrix::from_row_major(
                table.rows(),
                table.cols(),
                params.0[offset..offset + len].to_vec(),
            )
            .expect("layer shape derived from architecture");
            offset += len;
        }
        Ok(net)
    }

    /// Weights drawn independently from U[−0.5, 0.5] using a generator
    /// seeded with `seed`.
    pub fn init_weights(architecture: &Architecture, seed: u64) -> Result<Self, NetworkError> {
        architecture.validate()?;
        let mut rng = seeded_rng(seed);
        let params = (0..architecture.param_count())
            .map(|_| T::of(rng.gen_range(-0.5..=0.5)))
            .collect();
        Self::unflatten(architecture, &ParamVector(params))
    }
}

fn pre_activation<T: Scalar>(weights: &[T], prev: &[T]) -> T {
    weights[1..]
        .iter()
        .zip(prev)
        .fold(weights[0], |acc, (&w, &x)| acc + w * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arch(hidden: &[(usize, Activation)], outputs: usize) -> Architecture {
        Architecture::new(9, hidden, outputs).unwrap()
    }

    #[test]
    fn param_counts() {
        assert_eq!(arch(&[(30, Activation::Logsig)], 1).param_count(), 331);
        assert_eq!(
            arch(&[(8, Activation::Tansig), (15, Activation::Logsig)], 3).param_count(),
            263
        );
        let tiny = Architecture::new(1, &[(1, Activation::Logsig)], 1).unwrap();
        assert_eq!(tiny.param_count(), 4);
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new(9, &[(0, Activation::Tansig)], 1).is_err());
        assert!(Architecture::new(0, &[(3, Activation::Tansig)], 1).is_err());
        let mut a = arch(&[(3, Activation::Tansig)], 1);
        a.output_activation = Activation::Logsig;
        assert!(a.validate().is_err());
        a.output_activation = Activation::Purelin;
        a.hidden_activations.push(Activation::Logsig);
        assert!(a.validate().is_err());

        assert!(arch(&[(3, Activation::Tansig)], 1).check_selectable().is_ok());
        assert!(Architecture::linear(9, 1).unwrap().check_selectable().is_err());
        assert!(arch(&[(3, Activation::Purelin)], 1).check_selectable().is_err());
        let three = [(2, Activation::Tansig); 3];
        assert!(arch(&three, 1).check_selectable().is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Network::<f64>::zeros(arch(&[(5, Activation::Tansig)], 3)).unwrap();
        assert_eq!(net.forward(&[0.3; 9]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn logsig_path_through_identity_output() {
        let a = Architecture::new(1, &[(1, Activation::Logsig)], 1).unwrap();
        let mut net = Network::<f64>::zeros(a).unwrap();
        net.set_weight(0, 1, 0, 1.0);
        net.set_weight(1, 1, 0, 1.0);
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::<f64>::zeros(arch(&[(2, Activation::Tansig)], 1)).unwrap();
        assert_eq!(
            net.forward(&[1.0; 4]),
            Err(NetworkError::DimensionMismatch { expected: 9, got: 4 })
        );
    }

    #[test]
    fn unflatten_length_check() {
        let a = arch(&[(2, Activation::Tansig)], 1);
        let err = Network::<f64>::unflatten(&a, &ParamVector(vec![0.0; 3])).unwrap_err();
        assert_eq!(err, NetworkError::LengthMismatch { expected: 23, got: 3 });
    }

    #[test]
    fn each_flat_entry_maps_to_one_weight() {
        let a = Architecture::new(1, &[(1, Activation::Logsig)], 1).unwrap();
        let base = Network::<f64>::zeros(a.clone()).unwrap();
        for k in 0..4 {
            let mut p = vec![0.0; 4];
            p[k] = 1.0;
            let net = Network::unflatten(&a, &ParamVector(p)).unwrap();
            let mut changed = Vec::new();
            for l in 0..2 {
                for i in 0..2 {
                    if net.weight(l, i, 0) != base.weight(l, i, 0) {
                        changed.push((l, i));
                    }
                }
            }
            // Layer-major, then neuron, then input with bias first.
            assert_eq!(changed, vec![(k / 2, k % 2)]);
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = arch(&[(8, Activation::Tansig), (15, Activation::Logsig)], 3);
        let n1 = Network::<f64>::init_weights(&a, 11).unwrap();
        let n2 = Network::<f64>::init_weights(&a, 11).unwrap();
        assert_eq!(n1, n2);
        assert!(n1.flatten().0.iter().all(|w| (-0.5..=0.5).contains(w)));
        for s in 0..100u64 {
            let x = Network::<f64>::init_weights(&a, 2 * s).unwrap();
            let y = Network::<f64>::init_weights(&a, 2 * s + 1).unwrap();
            assert_ne!(x.flatten(), y.flatten());
        }
    }

    #[test]
    fn works_in_single_precision() {
        let a = arch(&[(4, Activation::Logsig)], 2);
        let net = Network::<f32>::init_weights(&a, 3).unwrap();
        let y = net.forward(&[0.5f32; 9]).unwrap();
        assert_eq!(y.len(), 2);
        assert!(y.iter().all(|v| v.is_finite()));
    }

    fn any_arch() -> impl Strategy<Value = Architecture> {
        (
            1usize..6,
            prop::collection::vec((1usize..6, prop::sample::select(vec![Activation::Tansig, Activation::Logsig])), 0..3),
            1usize..4,
        )
            .prop_map(|(i, h, o)| Architecture::new(i, &h, o).unwrap())
    }

    proptest! {
        #[test]
        fn flatten_round_trip(a in any_arch(), seed in any::<u64>()) {
            let net = Network::<f64>::init_weights(&a, seed).unwrap();
            let p = net.flatten();
            prop_assert_eq!(p.len(), a.param_count());
            prop_assert_eq!(Network::unflatten(&a, &p).unwrap(), net);
        }

        #[test]
        fn output_layer_scaling(a in any_arch(), seed in any::<u64>(), c in -3.0f64..3.0) {
            let net = Network::<f64>::init_weights(&a, seed).unwrap();
            let mut scaled = net.clone();
            let last = scaled.num_layers() - 1;
            let table = scaled.layers[last].map(|w| w * c);
            scaled.layers[last] = table;
            let x: Vec<f64> = (0..a.input_dim).map(|k| (k as f64 * 0.37).sin()).collect();
            let y = net.forward(&x).unwrap();
            let ys = scaled.forward(&x).unwrap();
            for (a, b) in y.iter().zip(&ys) {
                prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn finite_in_normalized_regime(a in any_arch(), seed in any::<u64>(), x in prop::collection::vec(-1.0f64..=1.0, 5)) {
            let net = Network::<f64>::init_weights(&a, seed).unwrap();
            let y = net.forward(&x[..a.input_dim]).unwrap();
            prop_assert_eq!(y.len(), a.output_dim);
            prop_assert!(y.iter().all(|v| v.is_finite()));
        }
    }
}
