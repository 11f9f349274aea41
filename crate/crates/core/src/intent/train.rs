use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize, CnnModel, Dataset, EmbeddingTable, IntentError, Prediction, RnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Rnn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Rnn => "rnn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub cnn_learning_rate: f64,
    pub rnn_learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Filters per convolution width.
    pub filters: usize,
    /// Recurrent hidden size.
    pub hidden: usize,
    /// Permit training sets that lack some of the 22 classes.
    #[serde(default)]
    pub allow_missing_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            cnn_learning_rate: 0.05,
            rnn_learning_rate: 0.005,
            epochs: 40,
            seed: 42,
            filters: 16,
            hidden: 32,
            allow_missing_classes: false,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Cnn => self.cnn_learning_rate,
            ModelKind::Rnn => self.rnn_learning_rate,
        }
    }

    /// Same learning rate for both model kinds.
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.cnn_learning_rate = lr;
        self.rnn_learning_rate = lr;
        self
    }

    fn check(&self) -> Result<(), IntentError> {
        for lr in [self.cnn_learning_rate, self.rnn_learning_rate] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(IntentError::InvalidConfig(format!(
                    "learning rate must be positive, got {lr}"
                )));
            }
        }
        if self.filters == 0 || self.hidden == 0 {
            return Err(IntentError::InvalidConfig(
                "filters and hidden size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeuralModel {
    Cnn(CnnModel),
    Rnn(RnnModel),
}

impl NeuralModel {
    /// Seeded initial parameters, before any update.
    pub fn init(kind: ModelKind, dim: usize, config: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        match kind {
            ModelKind::Cnn => NeuralModel::Cnn(CnnModel::init(dim, config.filters, &mut rng)),
            ModelKind::Rnn => NeuralModel::Rnn(RnnModel::init(dim, config.hidden, &mut rng)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            NeuralModel::Cnn(_) => ModelKind::Cnn,
            NeuralModel::Rnn(_) => ModelKind::Rnn,
        }
    }

    pub fn predict(&self, text: &str, table: &EmbeddingTable) -> Prediction {
        match self {
            NeuralModel::Cnn(m) => m.predict(text, table),
            NeuralModel::Rnn(m) => m.predict(text, table),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            NeuralModel::Cnn(m) => m.is_finite(),
            NeuralModel::Rnn(m) => m.is_finite(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            NeuralModel::Cnn(m) => NeuralModel::Cnn(m.zeros_like()),
            NeuralModel::Rnn(m) => NeuralModel::Rnn(m.zeros_like()),
        }
    }

    fn loss_and_grad(&self, seq: &[f64], target: usize, grad: &mut NeuralModel) -> f64 {
        match (self, grad) {
            (NeuralModel::Cnn(m), NeuralModel::Cnn(g)) => m.loss_and_grad(seq, target, g),
            (NeuralModel::Rnn(m), NeuralModel::Rnn(g)) => m.loss_and_grad(seq, target, g),
            _ => unreachable!("gradient buffer always matches the model kind"),
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        match self {
            NeuralModel::Cnn(m) => m.params(),
            NeuralModel::Rnn(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            NeuralModel::Cnn(m) => m.params_mut(),
            NeuralModel::Rnn(m) => m.params_mut(),
        }
    }
}

// separate stream for example order so init draws are unaffected by epochs
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Plain per-example SGD on cross-entropy with frozen embeddings. The result
/// is a pure function of `(kind, train, table, config)`.
pub fn train_model(
    kind: ModelKind,
    train: &Dataset,
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<NeuralModel, IntentError> {
    config.check()?;
    if train.is_empty() {
        return Err(IntentError::EmptyTrainingSet);
    }
    if let Some(class) = train
        .missing_class()
        .filter(|_| !config.allow_missing_classes)
    {
        return Err(IntentError::MissingClassInTrain(class));
    }

    let mut model = NeuralModel::init(kind, table.dim(), config);
    let samples: Vec<(Vec<f64>, usize)> = train
        .iter()
        .map(|e| (table.sequence(&tokenize(&e.text)), e.class.index()))
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut grad = model.zeros_like();
    let lr = config.learning_rate(kind);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, &i) in order.iter().enumerate() {
            for g in grad.params_mut() {
                g.fill(0.0);
            }
            let (seq, target) = &samples[i];
            let loss = model.loss_and_grad(seq, *target, &mut grad);
            if !loss.is_finite() {
                return Err(IntentError::NonFiniteLoss { epoch, step });
            }
            total += loss;
            for (p, g) in model.params_mut().into_iter().zip(grad.params()) {
                for (w, d) in p.iter_mut().zip(g) {
                    *w -= lr * d;
                }
            }
        }
        log::debug!(
            "{kind} epoch {epoch}: mean loss {:.4}",
            total / samples.len() as f64
        );
    }
    if !model.is_finite() {
        return Err(IntentError::NonFiniteLoss {
            epoch: config.epochs,
            step: 0,
        });
    }
    Ok(model)
}
