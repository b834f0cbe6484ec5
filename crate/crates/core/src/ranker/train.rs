//! Softmax ranking loss and its gradient-descent fit.

use serde::{Deserialize, Serialize};

use super::features::{dot, Featurizer, Sparse};
use super::feedback::FeedbackExample;
use super::params::RankerParams;
use super::RankerError;

/// One example in feature space: candidate vectors and the successful index.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub candidates: Vec<Sparse>,
    pub gold: usize,
}

pub fn featurize(dataset: &[FeedbackExample], featurizer: &Featurizer) -> Result<Vec<Instance>, RankerError> {
    dataset
        .iter()
        .map(|ex| {
            let candidates = ex
                .candidates
                .iter()
                .map(|c| featurizer.features(&ex.instruction, &c.plan, &ex.state))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Instance {
                candidates,
                gold: ex.success,
            })
        })
        .collect()
}

/// Mean over instances of `-log softmax(θ·φ)[gold]`, and its gradient.
pub fn loss_and_grad(theta: &[f64], data: &[Instance]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    for inst in data {
        let scores: Vec<f64> = inst.candidates.iter().map(|x| dot(theta, x)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let log_z = max + z.ln();
        loss += log_z - scores[inst.gold];
        for (i, (x, s)) in inst.candidates.iter().zip(&scores).enumerate() {
            let w = (s - log_z).exp() - if i == inst.gold { 1.0 } else { 0.0 };
            for &(j, v) in x {
                grad[j as usize] += w * v;
            }
        }
    }
    if !data.is_empty() {
        let n = data.len() as f64;
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub params: RankerParams,
    /// Loss at the start of each epoch, then the final loss.
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent from `init` (zeros when `None`).
pub fn train(
    dataset: &[FeedbackExample],
    featurizer: &Featurizer,
    cfg: &TrainConfig,
    init: Option<RankerParams>,
) -> Result<TrainReport, RankerError> {
    if dataset.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(RankerError::Config(format!("learning_rate must be positive, got {}", cfg.learning_rate)));
    }
    let params = init.unwrap_or_else(|| RankerParams::zeros(featurizer.dim()));
    params.check(featurizer)?;
    let data = featurize(dataset, featurizer)?;
    train_instances(&data, params, cfg)
}

pub fn train_instances(data: &[Instance], init: RankerParams, cfg: &TrainConfig) -> Result<TrainReport, RankerError> {
    if data.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    let mut theta = init.theta;
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        let (loss, grad) = loss_and_grad(&theta, data);
        losses.push(loss);
        for (t, g) in theta.iter_mut().zip(grad) {
            *t -= cfg.learning_rate * g;
        }
    }
    losses.push(loss_and_grad(&theta, data).0);
    Ok(TrainReport {
        params: RankerParams::new(theta)?,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(cands: Vec<Vec<(u32, f64)>>, gold: usize) -> Instance {
        Instance { candidates: cands, gold }
    }

    #[test]
    fn singleton_loss_is_zero() {
        let data = vec![inst(vec![vec![(0, 3.0), (1, -1.0)]], 0)];
        for theta in [[0.0, 0.0], [5.0, -2.0]] {
            let (l, g) = loss_and_grad(&theta, &data);
            assert!(l.abs() < 1e-15);
            assert!(g.iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn one_coordinate_logistic_sign() {
        // Candidates differ only in coordinate 1, where the winner has 1.
        let data = vec![inst(vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)]], 1)];
        let r = train_instances(&data, RankerParams::zeros(2), &TrainConfig::default()).unwrap();
        assert!(r.params.theta[1] > 0.0);
        assert!(r.params.theta[0].abs() < 1e-12);
        // Hand check of the first step: gradient on coordinate 1 is p - 1 = -0.5.
        assert!((loss_and_grad(&[0.0, 0.0], &data).1[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_epochs_keep_init() {
        let data = vec![inst(vec![vec![(0, 1.0)], vec![(1, 1.0)]], 0)];
        let init = RankerParams::new(vec![0.3, -0.2]).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert_eq!(train_instances(&data, init.clone(), &cfg).unwrap().params, init);
    }

    #[test]
    fn empty_dataset() {
        let cfg = TrainConfig::default();
        assert!(matches!(train_instances(&[], RankerParams::zeros(1), &cfg), Err(RankerError::EmptyDataset)));
    }

    fn instance_strategy(dim: usize) -> impl Strategy<Value = Instance> {
        (2usize..5)
            .prop_flat_map(move |k| {
                (
                    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), k),
                    0..k,
                )
            })
            .prop_map(|(dense, gold)| Instance {
                candidates: dense
                    .into_iter()
                    .map(|v| v.into_iter().enumerate().map(|(i, x)| (i as u32, x)).collect())
                    .collect(),
                gold,
            })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            data in prop::collection::vec(instance_strategy(4), 1..4),
            theta in prop::collection::vec(-1.5f64..1.5, 4),
        ) {
            let (_, g) = loss_and_grad(&theta, &data);
            let h = 1e-5;
            let fd: Vec<f64> = (0..theta.len()).map(|j| {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                (loss_and_grad(&up, &data).0 - loss_and_grad(&down, &data).0) / (2.0 * h)
            }).collect();
            let num = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|b| b * b).sum::<f64>().sqrt()).max(1e-8);
            prop_assert!(num / den < 1e-5, "relative error {}", num / den);
        }

        #[test]
        fn loss_is_nonnegative(data in prop::collection::vec(instance_strategy(3), 1..4), theta in prop::collection::vec(-3.0f64..3.0, 3)) {
            prop_assert!(loss_and_grad(&theta, &data).0 >= -1e-12);
        }
    }
}
