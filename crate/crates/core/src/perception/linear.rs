use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 0.05,
            l2: 1e-4,
            seed: 0x5eed,
        }
    }
}

/// Linear binary classifier trained by stochastic subgradient descent on the
/// L2-regularized hinge loss. Training order is a seeded shuffle, so the
/// same samples and parameters always give the same weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn train(samples: &[(Vec<f64>, bool)], params: TrainParams) -> Self {
        let dim = samples.first().map_or(0, |(x, _)| x.len());
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (x, label) = &samples[i];
                let y = if *label { 1.0 } else { -1.0 };
                let margin = y * (dot(&w, x) + b);
                let shrink = 1.0 - params.learning_rate * params.l2;
                w.iter_mut().for_each(|wi| *wi *= shrink);
                if margin < 1.0 {
                    for (wi, xi) in w.iter_mut().zip(x) {
                        *wi += params.learning_rate * y * xi;
                    }
                    b += params.learning_rate * y;
                }
            }
        }
        Self { weights: w, bias: b }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) >= 0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_a_simple_problem_deterministically() {
        let samples: Vec<(Vec<f64>, bool)> = (0..40)
            .map(|i| {
                let x = if i < 20 { -0.5 - f64::from(i) / 10.0 } else { 0.5 + f64::from(i - 20) / 10.0 };
                (vec![x, 1.0 - x], x > 0.0)
            })
            .collect();
        let a = LinearClassifier::train(&samples, TrainParams::default());
        let b = LinearClassifier::train(&samples, TrainParams::default());
        assert_eq!(a, b);
        for (x, label) in &samples {
            assert_eq!(a.predict(x), *label, "{x:?}");
        }
    }
}
