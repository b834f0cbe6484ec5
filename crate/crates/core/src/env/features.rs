//! Pooled state features: per-category counts followed by an affine map.

use serde::{Deserialize, Serialize};

use super::state::AgentState;
use super::EnvError;
use crate::grammar::Catalog;

/// `x -> W x + b` over pooled counts. Without `weights` the map is the
/// identity plus `bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEncoder {
    pub input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    pub bias: Vec<f64>,
}

impl StateEncoder {
    pub fn identity(input_dim: usize) -> Self {
        StateEncoder {
            input_dim,
            weights: None,
            bias: vec![0.0; input_dim],
        }
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let mismatch = |expected: usize, got: usize| EnvError::DimensionMismatch { expected, got };
        match &self.weights {
            None if self.bias.len() != self.input_dim => Err(mismatch(self.input_dim, self.bias.len())),
            None => Ok(()),
            Some(w) => {
                if w.len() != self.bias.len() {
                    return Err(mismatch(self.bias.len(), w.len()));
                }
                match w.iter().find(|row| row.len() != self.input_dim) {
                    Some(row) => Err(mismatch(self.input_dim, row.len())),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, EnvError> {
        self.validate()?;
        if x.len() != self.input_dim {
            return Err(EnvError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(match &self.weights {
            None => x.iter().zip(&self.bias).map(|(a, b)| a + b).collect(),
            Some(w) => w
                .iter()
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
                .collect(),
        })
    }
}

/// Per-category object counts summed over the semantic grid, in catalog order.
pub fn pooled_counts(state: &AgentState, catalog: &Catalog) -> Vec<f64> {
    let mut v = vec![0.0; catalog.len()];
    for ((_, cat), n) in &state.semantic_grid {
        if let Some(i) = catalog.index_of(cat) {
            v[i] += f64::from(*n);
        }
    }
    v
}

pub fn state_features(
    state: &AgentState,
    catalog: &Catalog,
    encoder: &StateEncoder,
) -> Result<Vec<f64>, EnvError> {
    encoder.project(&pooled_counts(state, catalog))
}
