//! Self-contained model checkpoint: configuration, frozen embeddings, the
//! training exemplars (for the KNN and edit-distance classifiers) and any
//! trained neural models, stored as a single JSON document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{
    fuzzy_classify, tokenize, train_model, CnnModel, Dataset, EmbeddingTable, IntentError,
    KnnIndex, ModelKind, NeuralModel, Prediction, RnnModel, TrainConfig, DEFAULT_EMBEDDING_DIM,
    DEFAULT_TRAIN_PERCENT,
};

pub const CHECKPOINT_FORMAT: &str = "kasper-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const DEFAULT_KNN_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cnn,
    Rnn,
    Knn,
    Fuzzy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Fuzzy,
        Algorithm::Knn,
        Algorithm::Cnn,
        Algorithm::Rnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cnn => "cnn",
            Algorithm::Rnn => "rnn",
            Algorithm::Knn => "knn",
            Algorithm::Fuzzy => "fuzzy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| IntentError::UnknownAlgorithm(s.to_owned()))
    }
}

impl From<ModelKind> for Algorithm {
    fn from(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Cnn => Algorithm::Cnn,
            ModelKind::Rnn => Algorithm::Rnn,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct KnnCache(OnceLock<KnnIndex>);

impl PartialEq for KnnCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub train_percent: u32,
    pub knn_k: usize,
    pub embeddings: EmbeddingTable,
    pub exemplars: Dataset,
    pub cnn: Option<CnnModel>,
    pub rnn: Option<RnnModel>,
    #[serde(skip)]
    knn: KnnCache,
}

impl ModelBundle {
    pub fn new(config: TrainConfig, embeddings: EmbeddingTable, exemplars: Dataset) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            train_percent: DEFAULT_TRAIN_PERCENT,
            knn_k: DEFAULT_KNN_K,
            embeddings,
            exemplars,
            cnn: None,
            rnn: None,
            knn: KnnCache::default(),
        }
    }

    /// Splits `data` with the config seed, builds embeddings (seeded random
    /// over the dataset vocabulary unless given) and trains each requested
    /// model on the train split.
    pub fn train(
        data: &Dataset,
        kinds: &[ModelKind],
        config: TrainConfig,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self, IntentError> {
        let (train, _) = data.split(config.seed, DEFAULT_TRAIN_PERCENT);
        let embeddings = embeddings.unwrap_or_else(|| {
            EmbeddingTable::random(vocabulary(data), DEFAULT_EMBEDDING_DIM, config.seed)
        });
        let mut bundle = Self::new(config, embeddings, train);
        for &kind in kinds {
            let model = train_model(kind, &bundle.exemplars, &bundle.embeddings, &bundle.config)?;
            bundle.insert(model);
        }
        Ok(bundle)
    }

    pub fn insert(&mut self, model: NeuralModel) {
        match model {
            NeuralModel::Cnn(m) => self.cnn = Some(m),
            NeuralModel::Rnn(m) => self.rnn = Some(m),
        }
    }

    /// The held-out part of `data` under this bundle's split.
    pub fn held_out(&self, data: &Dataset) -> Dataset {
        data.split(self.config.seed, self.train_percent).1
    }

    pub fn available(&self) -> Vec<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .filter(|a| match a {
                Algorithm::Cnn => self.cnn.is_some(),
                Algorithm::Rnn => self.rnn.is_some(),
                Algorithm::Knn | Algorithm::Fuzzy => !self.exemplars.is_empty(),
            })
            .collect()
    }

    pub fn knn_index(&self) -> &KnnIndex {
        self.knn
            .0
            .get_or_init(|| KnnIndex::build(&self.exemplars, &self.embeddings))
    }

    pub fn classify(&self, algorithm: Algorithm, text: &str) -> Result<Prediction, IntentError> {
        match algorithm {
            Algorithm::Cnn => self
                .cnn
                .as_ref()
                .map(|m| m.predict(text, &self.embeddings))
                .ok_or(IntentError::AlgorithmUnavailable(algorithm)),
            Algorithm::Rnn => self
                .rnn
                .as_ref()
                .map(|m| m.predict(text, &self.embeddings))
                .ok_or(IntentError::AlgorithmUnavailable(algorithm)),
            Algorithm::Knn => {
                let k = self.knn_k.min(self.exemplars.len());
                self.knn_index().classify(text, &self.embeddings, k)
            }
            Algorithm::Fuzzy => fuzzy_classify(text, &self.exemplars),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string(self).expect("bundle is always serializable");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, IntentError> {
        let bundle: ModelBundle =
            serde_json::from_str(text).map_err(|e| IntentError::Checkpoint(e.to_string()))?;
        if bundle.format != CHECKPOINT_FORMAT {
            return Err(IntentError::Checkpoint(format!(
                "not a checkpoint (format {:?})",
                bundle.format
            )));
        }
        if bundle.version != CHECKPOINT_VERSION {
            return Err(IntentError::Checkpoint(format!(
                "unsupported version {}",
                bundle.version
            )));
        }
        let dim = bundle.embeddings.dim();
        let dims_ok = bundle
            .cnn
            .as_ref()
            .is_none_or(|m| m.dim == dim && m.is_finite())
            && bundle
                .rnn
                .as_ref()
                .is_none_or(|m| m.dim == dim && m.is_finite());
        if !dims_ok {
            return Err(IntentError::Checkpoint(
                "model parameters do not match the embedding dimension or are not finite".into(),
            ));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IntentError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Sorted distinct tokens of every utterance in `data`.
pub fn vocabulary(data: &Dataset) -> BTreeSet<String> {
    data.iter().flat_map(|e| tokenize(&e.text)).collect()
}

/// The `n` most frequent tokens of `data`, ties broken alphabetically.
pub fn frequent_tokens(data: &Dataset, n: usize) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for token in data.iter().flat_map(|e| tokenize(&e.text)) {
        *counts.entry(token).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(t, _)| t).collect()
}
