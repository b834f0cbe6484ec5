//! Parameter vector and the plan score `f(g, τ, s; θ) = θ · φ(g, τ, s)`.

use std::path::Path;

use super::features::{dot, Featurizer};
use super::RankerError;
use crate::env::{pooled_counts, AgentState};
use crate::grammar::SubgoalSequence;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct RankerParams {
    pub theta: Vec<f64>,
}

impl RankerParams {
    pub fn zeros(dim: usize) -> Self {
        RankerParams { theta: vec![0.0; dim] }
    }

    pub fn new(theta: Vec<f64>) -> Result<Self, RankerError> {
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(RankerError::Params(format!("entry {i} is not finite")));
        }
        Ok(RankerParams { theta })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn check(&self, featurizer: &Featurizer) -> Result<(), RankerError> {
        if self.dim() != featurizer.dim() {
            return Err(RankerError::DimensionMismatch {
                expected: featurizer.dim(),
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// `dim N` on the first line, then one entry per line. Entries are
    /// printed in shortest round-trip form, so loading is exact.
    pub fn to_text(&self) -> String {
        let mut s = format!("dim {}\n", self.dim());
        for x in &self.theta {
            s.push_str(&format!("{x:?}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, RankerError> {
        let bad = |msg: String| RankerError::Params(msg);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let dim: usize = header
            .strip_prefix("dim ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| bad(format!("header must be `dim N`, got `{header}`")))?;
        let theta = lines
            .enumerate()
            .map(|(i, l)| l.parse::<f64>().map_err(|e| bad(format!("entry {i}: {e}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if theta.len() != dim {
            return Err(RankerError::DimensionMismatch {
                expected: dim,
                got: theta.len(),
            });
        }
        Self::new(theta)
    }

    pub fn save(&self, path: &Path) -> Result<(), RankerError> {
        write_atomic(path, self.to_text().as_bytes()).map_err(|e| RankerError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, RankerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RankerError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Score of `plan` for `instruction` in `state`.
pub fn f_score(
    plan: &SubgoalSequence,
    instruction: &str,
    state: &AgentState,
    params: &RankerParams,
    featurizer: &Featurizer,
) -> Result<f64, RankerError> {
    params.check(featurizer)?;
    let counts = pooled_counts(state, &featurizer.catalog);
    Ok(dot(&params.theta, &featurizer.features(instruction, plan, &counts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ObjectInstance, RoomKind, Scene};
    use crate::grammar::{parse, Catalog};
    use crate::ranker::FeatureConfig;

    fn state(objects: Vec<ObjectInstance>) -> AgentState {
        let scene = Scene {
            id: "s".into(),
            room: RoomKind::Kitchen,
            width: 4,
            height: 4,
            objects,
        };
        AgentState {
            handled: vec![0; scene.objects.len()],
            semantic_grid: scene.semantic_grid(),
            scene,
            holding: None,
            executed: Vec::new(),
        }
    }

    fn setup() -> (Featurizer, SubgoalSequence, AgentState) {
        let cat = Catalog::builtin();
        let plan = parse("pick up apple, put in fridge.", &cat).unwrap();
        let fz = Featurizer::new(cat, FeatureConfig::default()).unwrap();
        let s = state(vec![ObjectInstance::new("apple", (0, 0)), ObjectInstance::new("fridge", (1, 1))]);
        (fz, plan, s)
    }

    #[test]
    fn zero_theta_scores_zero() {
        let (fz, plan, s) = setup();
        let p = RankerParams::zeros(fz.dim());
        assert_eq!(f_score(&plan, "chill an apple", &s, &p, &fz).unwrap(), 0.0);
    }

    #[test]
    fn apple_count_coordinate() {
        let (fz, plan, s) = setup();
        let mut p = RankerParams::zeros(fz.dim());
        p.theta[fz.catalog.index_of("apple").unwrap()] = 1.0;
        let mut more = s.scene.objects.clone();
        more.push(ObjectInstance::new("apple", (2, 2)));
        let a = f_score(&plan, "chill an apple", &s, &p, &fz).unwrap();
        let b = f_score(&plan, "chill an apple", &state(more), &p, &fz).unwrap();
        assert!(b > a);
    }

    #[test]
    fn linear_in_theta() {
        let (fz, plan, s) = setup();
        let t1: Vec<f64> = (0..fz.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let t2: Vec<f64> = (0..fz.dim()).map(|i| (i as f64 * 0.11).cos()).collect();
        let a = 2.5;
        let mix = RankerParams::new(t1.iter().zip(&t2).map(|(x, y)| a * x + y).collect()).unwrap();
        let f = |t: &[f64]| f_score(&plan, "chill an apple", &s, &RankerParams::new(t.to_vec()).unwrap(), &fz).unwrap();
        let lhs = f(&mix.theta);
        assert!((lhs - (a * f(&t1) + f(&t2))).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let (fz, plan, s) = setup();
        let p = RankerParams::zeros(3);
        assert!(matches!(f_score(&plan, "x", &s, &p, &fz), Err(RankerError::DimensionMismatch { .. })));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let p = RankerParams::new(vec![0.1, -1.0 / 3.0, 1e-300, 0.0]).unwrap();
        assert_eq!(RankerParams::parse(&p.to_text()).unwrap(), p);
        assert!(RankerParams::parse("dim 3\n1\n2\n").is_err());
        assert!(RankerParams::parse("dim 1\nNaN\n").is_err());
        assert!(RankerParams::parse("3\n1\n").is_err());
    }
}
