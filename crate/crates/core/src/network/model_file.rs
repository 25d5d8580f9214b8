//! Versioned JSON document for a trained network.
//!
//! Parameters are written in flatten order. `serde_json` emits the shortest
//! decimal that parses back to the same `f64`, so a save/load cycle is
//! bit-exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Architecture, Network, NetworkError, ParamVector};
use crate::data::Normalizer;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model schema version {0} (expected {MODEL_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("model lists {names} output names for {dim} outputs")]
    OutputNames { names: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub architecture: Architecture,
    pub params: Vec<f64>,
    /// Names of the predicted columns, in output order.
    pub output_names: Vec<String>,
    /// Scaling the network was trained under; `None` for a model that works
    /// directly in physical units.
    pub normalizer: Option<Normalizer>,
}

impl ModelDocument {
    pub fn new(net: &Network<f64>, output_names: Vec<String>, normalizer: Option<Normalizer>) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            architecture: net.architecture().clone(),
            params: net.flatten().0,
            output_names,
            normalizer,
        }
    }

    pub fn network(&self) -> Result<Network<f64>, ModelFileError> {
        Ok(Network::unflatten(&self.architecture, &ParamVector(self.params.clone()))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelFileError::SchemaVersion(doc.schema_version));
        }
        doc.architecture.validate()?;
        if doc.output_names.len() != doc.architecture.output_dim {
            return Err(ModelFileError::OutputNames {
                names: doc.output_names.len(),
                dim: doc.architecture.output_dim,
            });
        }
        doc.network()?;
        Ok(doc)
    }
}
