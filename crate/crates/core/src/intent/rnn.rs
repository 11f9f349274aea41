//! Elman recurrent classifier: `h_t = tanh(Wx·x_t + Wh·h_{t-1} + b)`, with
//! the last hidden state projected to 22 logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, softmax, tokenize, EmbeddingTable, Prediction, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden × dim`
    pub input_weights: Vec<f64>,
    /// `hidden × hidden`
    pub recurrent_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `22 × hidden`
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnForward {
    /// `states[0]` is the zero initial state; `states[t]` follows token `t-1`.
    pub states: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

fn matvec_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl RnnModel {
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        RnnModel {
            dim,
            hidden,
            input_weights: uniform(rng, hidden * dim, 1.0 / (dim as f64).sqrt()),
            recurrent_weights: uniform(rng, hidden * hidden, 1.0 / (hidden as f64).sqrt()),
            hidden_bias: vec![0.0; hidden],
            output_weights: uniform(rng, NUM_CLASSES * hidden, 1.0 / (hidden as f64).sqrt()),
            output_bias: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![
            &self.input_weights,
            &self.recurrent_weights,
            &self.hidden_bias,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, seq: &[f64]) -> RnnForward {
        let h = self.hidden;
        let mut states = vec![vec![0.0; h]];
        for x in seq.chunks_exact(self.dim) {
            let prev = states.last().unwrap();
            let mut a = self.hidden_bias.clone();
            matvec_add(&mut a, &self.input_weights, x);
            matvec_add(&mut a, &self.recurrent_weights, prev);
            a.iter_mut().for_each(|v| *v = v.tanh());
            states.push(a);
        }
        let mut logits = self.output_bias.clone();
        matvec_add(&mut logits, &self.output_weights, states.last().unwrap());
        RnnForward { states, logits }
    }

    /// Cross-entropy loss with backpropagation through time; gradients are
    /// accumulated into `grad`.
    pub fn loss_and_grad(&self, seq: &[f64], target: usize, grad: &mut RnnModel) -> f64 {
        let h = self.hidden;
        let fwd = self.forward(seq);
        let loss = cross_entropy(&fwd.logits, target);
        let mut dlogits = softmax(&fwd.logits);
        dlogits[target] -= 1.0;

        let last = fwd.states.last().unwrap();
        let mut dh = vec![0.0; h];
        for (c, &dl) in dlogits.iter().enumerate() {
            grad.output_bias[c] += dl;
            for j in 0..h {
                grad.output_weights[c * h + j] += dl * last[j];
                dh[j] += dl * self.output_weights[c * h + j];
            }
        }

        let inputs: Vec<&[f64]> = seq.chunks_exact(self.dim).collect();
        for t in (0..inputs.len()).rev() {
            let state = &fwd.states[t + 1];
            let prev = &fwd.states[t];
            let da: Vec<f64> = dh
                .iter()
                .zip(state)
                .map(|(d, s)| d * (1.0 - s * s))
                .collect();
            let mut dprev = vec![0.0; h];
            for (i, &a) in da.iter().enumerate() {
                grad.hidden_bias[i] += a;
                for (d, x) in inputs[t].iter().enumerate() {
                    grad.input_weights[i * self.dim + d] += a * x;
                }
                for j in 0..h {
                    grad.recurrent_weights[i * h + j] += a * prev[j];
                    dprev[j] += a * self.recurrent_weights[i * h + j];
                }
            }
            dh = dprev;
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
