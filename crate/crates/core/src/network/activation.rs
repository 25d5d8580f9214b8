use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::Scalar;

/// Neuron transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Hyperbolic tangent sigmoid, `(eˣ − e⁻ˣ)/(eˣ + e⁻ˣ)`.
    Tansig,
    /// Logistic sigmoid, `1/(1 + e⁻ˣ)`.
    Logsig,
    /// Identity.
    Purelin,
}

impl Activation {
    pub const HIDDEN_CHOICES: [Activation; 2] = [Activation::Tansig, Activation::Logsig];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tansig => "tansig",
            Activation::Logsig => "logsig",
            Activation::Purelin => "purelin",
        }
    }

    pub fn value<T: Scalar>(self, x: T) -> T {
        match self {
            // std tanh saturates cleanly to ±1 for large |x|.
            Activation::Tansig => x.tanh(),
            Activation::Logsig => {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
            Activation::Purelin => x,
        }
    }

    /// Derivative expressed through the activation value.
    pub fn derivative_from_value<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tansig => T::one() - y * y,
            Activation::Logsig => y * (T::one() - y),
            Activation::Purelin => T::one(),
        }
    }

    /// `(f(x), f'(x))`.
    pub fn eval<T: Scalar>(self, x: T) -> (T, T) {
        let y = self.value(x);
        (y, self.derivative_from_value(y))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown activation {0:?} (expected tansig, logsig or purelin)")]
pub struct UnknownActivation(pub String);

impl FromStr for Activation {
    type Err = UnknownActivation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tansig" => Ok(Activation::Tansig),
            "logsig" => Ok(Activation::Logsig),
            "purelin" => Ok(Activation::Purelin),
            _ => Err(UnknownActivation(s.to_string())),
        }
    }
}
