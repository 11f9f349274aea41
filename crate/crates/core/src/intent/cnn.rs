//! Sentence CNN: parallel 1-D convolutions of widths 2, 3 and 4 over the
//! token-vector sequence, ReLU, max-over-time pooling, then a dense layer to
//! 22 logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, softmax, tokenize, EmbeddingTable, Prediction, NUM_CLASSES};

pub const CNN_WIDTHS: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBank {
    pub width: usize,
    /// `filters × (width · dim)`; filter `f` reads the flattened window.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub dim: usize,
    pub filters: usize,
    pub banks: Vec<ConvBank>,
    /// `22 × (banks · filters)`.
    pub dense_weights: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnForward {
    /// Per pooled feature: the winning time step and its pre-activation.
    pub best: Vec<(usize, f64)>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Position and value of the largest activation; the earliest wins ties.
pub fn max_over_time(activations: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut arg = (0, f64::NEG_INFINITY);
    for (t, z) in activations.into_iter().enumerate() {
        if z > arg.1 {
            arg = (t, z);
        }
    }
    arg
}

/// Pads a row-major `len × dim` sequence with zero rows up to `width` rows.
fn padded(seq: &[f64], dim: usize, width: usize) -> std::borrow::Cow<'_, [f64]> {
    if seq.len() >= width * dim {
        std::borrow::Cow::Borrowed(seq)
    } else {
        let mut v = seq.to_vec();
        v.resize(width * dim, 0.0);
        std::borrow::Cow::Owned(v)
    }
}

impl CnnModel {
    /// Uniform initialization scaled by fan-in; biases start at zero.
    pub fn init(dim: usize, filters: usize, rng: &mut impl Rng) -> Self {
        let banks = CNN_WIDTHS
            .iter()
            .map(|&width| {
                let fan_in = width * dim;
                ConvBank {
                    width,
                    weights: uniform(rng, filters * fan_in, 1.0 / (fan_in as f64).sqrt()),
                    bias: vec![0.0; filters],
                }
            })
            .collect();
        let features = CNN_WIDTHS.len() * filters;
        CnnModel {
            dim,
            filters,
            banks,
            dense_weights: uniform(rng, NUM_CLASSES * features, 1.0 / (features as f64).sqrt()),
            dense_bias: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    pub fn num_features(&self) -> usize {
        self.banks.len() * self.filters
    }

    /// Parameter arrays in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for b in &self.banks {
            out.push(&b.weights);
            out.push(&b.bias);
        }
        out.push(&self.dense_weights);
        out.push(&self.dense_bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.banks {
            out.push(&mut b.weights);
            out.push(&mut b.bias);
        }
        out.push(&mut self.dense_weights);
        out.push(&mut self.dense_bias);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// `seq` is a row-major `len × dim` token-vector matrix.
    pub fn forward(&self, seq: &[f64]) -> CnnForward {
        let dim = self.dim;
        let mut best = Vec::with_capacity(self.num_features());
        for bank in &self.banks {
            let w = bank.width;
            let input = padded(seq, dim, w);
            let positions = input.len() / dim - w + 1;
            let fan_in = w * dim;
            for f in 0..self.filters {
                let kernel = &bank.weights[f * fan_in..(f + 1) * fan_in];
                best.push(max_over_time((0..positions).map(|t| {
                    let window = &input[t * dim..t * dim + fan_in];
                    bank.bias[f] + kernel.iter().zip(window).map(|(k, x)| k * x).sum::<f64>()
                })));
            }
        }
        let features: Vec<f64> = best.iter().map(|&(_, z)| z.max(0.0)).collect();
        let n = features.len();
        let logits = (0..NUM_CLASSES)
            .map(|c| {
                self.dense_bias[c]
                    + self.dense_weights[c * n..(c + 1) * n]
                        .iter()
                        .zip(&features)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        CnnForward {
            best,
            features,
            logits,
        }
    }

    /// Cross-entropy loss for `target`; accumulates parameter gradients
    /// into `grad` (same shape as `self`).
    pub fn loss_and_grad(&self, seq: &[f64], target: usize, grad: &mut CnnModel) -> f64 {
        let fwd = self.forward(seq);
        let loss = cross_entropy(&fwd.logits, target);
        let mut dlogits = softmax(&fwd.logits);
        dlogits[target] -= 1.0;

        let n = fwd.features.len();
        let mut dfeatures = vec![0.0; n];
        for (c, &dl) in dlogits.iter().enumerate() {
            grad.dense_bias[c] += dl;
            let row = c * n..(c + 1) * n;
            for ((g, w), (x, df)) in grad.dense_weights[row.clone()]
                .iter_mut()
                .zip(&self.dense_weights[row])
                .zip(fwd.features.iter().zip(dfeatures.iter_mut()))
            {
                *g += dl * x;
                *df += dl * w;
            }
        }

        let dim = self.dim;
        for (b, bank) in self.banks.iter().enumerate() {
            let w = bank.width;
            let fan_in = w * dim;
            let input = padded(seq, dim, w);
            for f in 0..self.filters {
                let k = b * self.filters + f;
                let (t, z) = fwd.best[k];
                if z <= 0.0 {
                    continue;
                }
                let dz = dfeatures[k];
                grad.banks[b].bias[f] += dz;
                let window = &input[t * dim..t * dim + fan_in];
                for (g, x) in grad.banks[b].weights[f * fan_in..(f + 1) * fan_in]
                    .iter_mut()
                    .zip(window)
                {
                    *g += dz * x;
                }
            }
        }
        loss
    }

    pub fn loss(&self, seq: &[f64], target: usize) -> f64 {
        cross_entropy(&self.forward(seq).logits, target)
    }

    pub fn predict(&self, text: &str, table: &EmbeddingTable) -> Prediction {
        let seq = table.sequence(&tokenize(text));
        Prediction::from_logits(&self.forward(&seq).logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_dense_layer_is_uniform() {
        let mut m = CnnModel::init(3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        m.dense_weights.fill(0.0);
        let table = EmbeddingTable::parse("a 1 2 3\n").unwrap();
        let p = m.predict("a a a a a", &table);
        assert!(p
            .distribution
            .iter()
            .all(|q| (q - 1.0 / 22.0).abs() < 1e-15));
    }

    #[test]
    fn short_and_empty_inputs_are_padded() {
        let m = CnnModel::init(2, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let f = m.forward(&[]);
        assert_eq!(f.features.len(), 9);
        // one token, width 4: a single window position
        let f = m.forward(&[0.5, -0.5]);
        assert!(f.best.iter().all(|&(t, _)| t == 0));
    }

    #[test]
    fn pooled_value_is_max_activation() {
        let m = CnnModel::init(2, 1, &mut ChaCha8Rng::seed_from_u64(3));
        let seq = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0];
        let f = m.forward(&seq);
        let bank = &m.banks[0];
        let acts: Vec<f64> = (0..4)
            .map(|t| {
                let z: f64 = bank
                    .weights
                    .iter()
                    .zip(&seq[t * 2..t * 2 + 4])
                    .map(|(a, b)| a * b)
                    .sum();
                (z + bank.bias[0]).max(0.0)
            })
            .collect();
        let max = acts.iter().copied().fold(0.0, f64::max);
        assert!((f.features[0] - max).abs() < 1e-15);
    }
}
