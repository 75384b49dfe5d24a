//! Trained parameters: one angle vector per lexicon snippet plus the
//! settings needed to rebuild and read out circuits.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{param_vector_layout, AnsatzConfig, QubitAssignment};
use crate::grammar::Lexicon;

pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("snippet {symbol} has {found} parameters, expected {expected}")]
    SlotCountMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("snippet {0} has a non-finite angle")]
    NonFinite(String),
    #[error("model has no parameters for snippet {0}")]
    Missing(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: BTreeMap<String, Vec<f64>>,
    pub qa: QubitAssignment,
    pub ac: AnsatzConfig,
    pub epsilon: f64,
    pub threshold: f64,
}

impl Model {
    /// All angles zero.
    pub fn zeros(lexicon: &Lexicon, qa: QubitAssignment, ac: AnsatzConfig) -> Self {
        let params = param_vector_layout(lexicon, &qa, &ac)
            .into_iter()
            .map(|(k, n)| (k, vec![0.0; n]))
            .collect();
        Model {
            params,
            qa,
            ac,
            epsilon: DEFAULT_EPSILON,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    /// Angles drawn uniformly from `[0, 2π)`, snippets in name order.
    pub fn random<R: Rng + ?Sized>(lexicon: &Lexicon, qa: QubitAssignment, ac: AnsatzConfig, rng: &mut R) -> Self {
        let mut m = Model::zeros(lexicon, qa, ac);
        for v in m.params.values_mut() {
            for x in v.iter_mut() {
                *x = rng.random_range(0.0..TAU);
            }
        }
        m
    }

    /// Checks slot counts against the layout for `lexicon` and that every
    /// angle is finite.
    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), ModelError> {
        for (name, expected) in param_vector_layout(lexicon, &self.qa, &self.ac) {
            let v = self
                .params
                .get(&name)
                .ok_or_else(|| ModelError::Missing(name.clone()))?;
            if v.len() != expected {
                return Err(ModelError::SlotCountMismatch {
                    symbol: name,
                    expected,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(Vec::len).sum()
    }

    /// All angles concatenated in snippet-name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.params.values().flatten().copied().collect()
    }

    /// Inverse of [`Model::flatten`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat vector length");
        let mut at = 0;
        for v in self.params.values_mut() {
            let n = v.len();
            v.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    }

    /// `(name, offset, length)` of every snippet inside the flat vector.
    pub fn flat_layout(&self) -> Vec<(String, usize, usize)> {
        let mut at = 0;
        self.params
            .iter()
            .map(|(k, v)| {
                let entry = (k.clone(), at, v.len());
                at += v.len();
                entry
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Model::from_json(&text)
    }
}
