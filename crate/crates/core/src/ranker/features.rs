//! Feature map of the ranking model.
//!
//! The vector is laid out as `[state | text | cross | grounding]`:
//! the projected pooled state counts, hashed word unigrams and bigrams of
//! `instruction [SEP] plan`, hashed (instruction word, plan object) pairs, and
//! two numbers tying the plan to the state (share of its objects present, and
//! whether all are).

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::RankerError;
use crate::env::StateEncoder;
use crate::grammar::{Catalog, SubgoalSequence};
use crate::lm::normalize_instruction;
use crate::tokenize::{Tokenizer, WordTokenizer};

/// Joins instruction and plan text before hashing.
pub const SEP: &str = "[SEP]";

const GROUNDING_DIM: usize = 2;

/// Maps an (instruction, serialized plan) pair to a fixed-length vector.
pub trait TextFeaturizer: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, instruction: &str, plan: &str) -> Vec<f64>;
}

fn bucket(parts: &[&str], dim: usize) -> usize {
    let mut h = FnvHasher::default();
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0xff);
    }
    (h.finish() % dim as u64) as usize
}

/// Bag of hashed word unigrams and bigrams, scaled to unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgrams {
    pub dim: usize,
}

impl TextFeaturizer for HashedNgrams {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, instruction: &str, plan: &str) -> Vec<f64> {
        let text = format!("{} {SEP} {plan}", normalize_instruction(instruction));
        let toks: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let mut v = vec![0.0; self.dim];
        for (i, t) in toks.iter().enumerate() {
            v[bucket(&["1", t], self.dim)] += 1.0;
            if let Some(next) = toks.get(i + 1) {
                v[bucket(&["2", t, next], self.dim)] += 1.0;
            }
        }
        unit(&mut v);
        v
    }
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub text_dim: usize,
    /// Buckets for (instruction word, plan object) pairs; 0 disables them.
    pub cross_dim: usize,
    pub grounding: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            text_dim: 256,
            cross_dim: 256,
            grounding: true,
        }
    }
}

/// Sparse vector as `(index, value)` pairs with distinct indices.
pub type Sparse = Vec<(u32, f64)>;

pub fn dot(theta: &[f64], x: &Sparse) -> f64 {
    x.iter().map(|&(i, v)| theta[i as usize] * v).sum()
}

/// The full feature map for a given catalog.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub catalog: Catalog,
    pub encoder: StateEncoder,
    pub text: HashedNgrams,
    pub cfg: FeatureConfig,
}

impl Featurizer {
    /// Identity state encoder over the catalog's pooled counts.
    pub fn new(catalog: Catalog, cfg: FeatureConfig) -> Result<Self, RankerError> {
        Self::with_encoder(StateEncoder::identity(catalog.len()), catalog, cfg)
    }

    pub fn with_encoder(encoder: StateEncoder, catalog: Catalog, cfg: FeatureConfig) -> Result<Self, RankerError> {
        encoder.validate()?;
        if encoder.input_dim != catalog.len() {
            return Err(RankerError::DimensionMismatch {
                expected: catalog.len(),
                got: encoder.input_dim,
            });
        }
        if cfg.text_dim == 0 {
            return Err(RankerError::Config("text_dim must be positive".into()));
        }
        Ok(Featurizer {
            text: HashedNgrams { dim: cfg.text_dim },
            catalog,
            encoder,
            cfg,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn dim(&self) -> usize {
        self.state_dim() + self.text.dim() + self.cfg.cross_dim + if self.cfg.grounding { GROUNDING_DIM } else { 0 }
    }

    /// Features of `plan` for `instruction` in a state given by its pooled
    /// per-category counts.
    pub fn features(&self, instruction: &str, plan: &SubgoalSequence, counts: &[f64]) -> Result<Sparse, RankerError> {
        let mut out: Sparse = Vec::new();
        let state = self.encoder.project(counts)?;
        out.extend(state.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)));
        let mut offset = self.state_dim();

        let text = self.text.encode(instruction, &plan.to_string());
        out.extend(text.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| ((offset + i) as u32, *v)));
        offset += self.text.dim();

        if self.cfg.cross_dim > 0 {
            let words = WordTokenizer.encode(&normalize_instruction(instruction));
            let mut objects: Vec<&str> = plan.steps.iter().map(|g| g.object.id.as_ref()).collect();
            objects.sort_unstable();
            objects.dedup();
            let mut v = vec![0.0; self.cfg.cross_dim];
            for w in &words {
                for o in &objects {
                    v[bucket(&[w, o], self.cfg.cross_dim)] += 1.0;
                }
            }
            unit(&mut v);
            out.extend(v.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| ((offset + i) as u32, *v)));
            offset += self.cfg.cross_dim;
        }

        if self.cfg.grounding {
            let mut objects: Vec<&str> = plan.steps.iter().map(|g| g.object.id.as_ref()).collect();
            objects.sort_unstable();
            objects.dedup();
            let present = objects
                .iter()
                .filter(|o| self.catalog.index_of(o).is_some_and(|i| counts[i] > 0.0))
                .count();
            if !objects.is_empty() {
                let share = present as f64 / objects.len() as f64;
                out.push((offset as u32, share));
                if present == objects.len() {
                    out.push((offset as u32 + 1, 1.0));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse;

    fn plan(s: &str) -> SubgoalSequence {
        parse(s, &Catalog::builtin()).unwrap()
    }

    #[test]
    fn text_encoding_is_fixed_and_deterministic() {
        let f = HashedNgrams { dim: 256 };
        let a = f.encode("Put the apple away.", "pick up apple, put in fridge.");
        assert_eq!(a.len(), 256);
        assert_eq!(a, f.encode("put the apple away", "pick up apple, put in fridge."));
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, f.encode("put the apple away", "pick up egg, put in fridge."));
    }

    #[test]
    fn layout_and_indices() {
        let cat = Catalog::builtin();
        let fz = Featurizer::new(cat.clone(), FeatureConfig::default()).unwrap();
        assert_eq!(fz.dim(), cat.len() + 256 + 256 + 2);
        let mut counts = vec![0.0; cat.len()];
        counts[cat.index_of("apple").unwrap()] = 1.0;
        counts[cat.index_of("fridge").unwrap()] = 2.0;
        let x = fz.features("chill the apple", &plan("pick up apple, put in fridge."), &counts).unwrap();
        let mut idx: Vec<u32> = x.iter().map(|p| p.0).collect();
        let n = idx.len();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), n, "indices are distinct");
        assert!(idx.iter().all(|&i| (i as usize) < fz.dim()));
        let g = (fz.dim() - 2) as u32;
        assert!(x.contains(&(g, 1.0)) && x.contains(&(g + 1, 1.0)));
    }

    #[test]
    fn grounding_sees_absent_objects() {
        let cat = Catalog::builtin();
        let fz = Featurizer::new(cat.clone(), FeatureConfig::default()).unwrap();
        let mut counts = vec![0.0; cat.len()];
        counts[cat.index_of("apple").unwrap()] = 1.0;
        let x = fz.features("chill the apple", &plan("pick up apple, put in fridge."), &counts).unwrap();
        let g = (fz.dim() - 2) as u32;
        assert!(x.contains(&(g, 0.5)));
        assert!(!x.iter().any(|p| p.0 == g + 1));
    }

    #[test]
    fn wrong_count_length_is_rejected() {
        let fz = Featurizer::new(Catalog::builtin(), FeatureConfig::default()).unwrap();
        assert!(matches!(
            fz.features("x", &plan("pick up apple."), &[1.0]),
            Err(RankerError::DimensionMismatch { .. })
        ));
    }
}
