//! Intent classification into 22 classes with four interchangeable
//! algorithms: nearest-exemplar edit distance, k-nearest neighbours over
//! mean word vectors, a 1-D convolutional network and a simple recurrent
//! network.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

mod checkpoint;
mod cnn;
mod dataset;
mod embedding;
mod eval;
mod fuzzy;
mod knn;
mod rnn;
mod train;

pub use checkpoint::{
    frequent_tokens, vocabulary, Algorithm, ModelBundle, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
    DEFAULT_KNN_K,
};
pub use cnn::{max_over_time, CnnForward, CnnModel, CNN_WIDTHS};
pub use dataset::{Dataset, Example, DEFAULT_TRAIN_PERCENT};
pub use embedding::{EmbeddingTable, DEFAULT_EMBEDDING_DIM};
pub use eval::{evaluate, EvalReport};
pub use fuzzy::{fuzzy_classify, levenshtein, similarity};
pub use knn::{cosine, knn_classify, KnnIndex};
pub use rnn::{RnnForward, RnnModel};
pub use train::{train_model, ModelKind, NeuralModel, TrainConfig};

pub const NUM_CLASSES: usize = 22;

macro_rules! intent_classes {
    ($($variant:ident => $label:literal),+ $(,)?) => {
        /// The fixed intent taxonomy. Declaration order is the tie-break order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum IntentClass {
            $($variant),+
        }

        impl IntentClass {
            pub const ALL: [IntentClass; NUM_CLASSES] = [$(IntentClass::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $(IntentClass::$variant => $label),+
                }
            }
        }
    };
}

intent_classes! {
    ArtAndBeauty => "Art and Beauty",
    BusinessAndFinance => "Business and Finance",
    Communication => "Communication",
    ConnectedCar => "Connected Car",
    FoodAndDrink => "Food and Drink",
    GamesTriviaAndAccessories => "Games, Trivia, and Accessories",
    HealthAndFitness => "Health and Fitness",
    Interests => "Interests",
    Knowledge => "Knowledge",
    Lifestyle => "Lifestyle",
    MoviesAndTvShows => "Movies and TV Shows",
    MusicAndAudio => "Music and Audio",
    News => "News",
    NoveltyAndHumour => "Novelty and Humour",
    ProblemSolving => "Problem Solving",
    Productivity => "Productivity",
    Shopping => "Shopping",
    Social => "Social",
    Sports => "Sports",
    TravelAndTransportation => "Travel and Transportation",
    Utilities => "Utilities",
    Weather => "Weather",
}

impl IntentClass {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<IntentClass> {
        Self::ALL.get(index).copied()
    }

    /// Exact (byte-for-byte) label lookup.
    pub fn from_label(label: &str) -> Option<IntentClass> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }
}

impl fmt::Display for IntentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for IntentClass {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s).ok_or_else(|| IntentError::UnknownLabel(s.to_owned()))
    }
}

impl Serialize for IntentClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for IntentClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        IntentClass::from_label(&label)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown intent label {label:?}")))
    }
}

#[derive(Debug, Error)]
pub enum IntentError {
    #[error("unknown intent label {0:?}")]
    UnknownLabel(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: expected {expected} dimensions, found {got}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("query text is empty")]
    EmptyQuery,
    #[error("no exemplars to compare against")]
    EmptyExemplars,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds training set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("class {0} has no training examples")]
    MissingClassInTrain(IntentClass),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("algorithm {0} is not available in this checkpoint")]
    AlgorithmUnavailable(Algorithm),
    #[error("unknown algorithm {0:?} (expected cnn, rnn, knn or fuzzy)")]
    UnknownAlgorithm(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A distribution over the 22 classes with its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub argmax: IntentClass,
    pub confidence: f64,
}

impl Prediction {
    /// Wraps a distribution; ties go to the earliest class.
    pub fn from_distribution(distribution: Vec<f64>) -> Self {
        assert_eq!(distribution.len(), NUM_CLASSES);
        let mut best = 0;
        for (i, p) in distribution.iter().enumerate() {
            if *p > distribution[best] {
                best = i;
            }
        }
        Prediction {
            confidence: distribution[best],
            argmax: IntentClass::ALL[best],
            distribution,
        }
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        Self::from_distribution(softmax(logits))
    }

    pub fn probability(&self, class: IntentClass) -> f64 {
        self.distribution[class.index()]
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// `-ln softmax(logits)[target]`, computed stably.
pub(crate) fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[target]
}
