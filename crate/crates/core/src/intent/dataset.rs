use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IntentClass, IntentError, NUM_CLASSES};

pub const DEFAULT_TRAIN_PERCENT: u32 = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub class: IntentClass,
    pub text: String,
}

/// Labeled utterances, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dataset {
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self, IntentError> {
        if let Some(i) = examples.iter().position(|e| e.text.trim().is_empty()) {
            return Err(IntentError::MalformedLine {
                line: i + 1,
                reason: "empty utterance".into(),
            });
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for e in &self.examples {
            counts[e.class.index()] += 1;
        }
        counts
    }

    /// First class with no examples, if any.
    pub fn missing_class(&self) -> Option<IntentClass> {
        let counts = self.class_counts();
        IntentClass::ALL
            .into_iter()
            .find(|c| counts[c.index()] == 0)
    }

    /// Parses `<class-label>\t<utterance>` lines. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, IntentError> {
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (label, utterance) = line.split_once('\t').ok_or(IntentError::MalformedLine {
                line: line_no,
                reason: "missing tab between label and utterance".into(),
            })?;
            let class = IntentClass::from_label(label).ok_or(IntentError::MalformedLine {
                line: line_no,
                reason: format!("unknown class label {label:?}"),
            })?;
            if utterance.trim().is_empty() {
                return Err(IntentError::MalformedLine {
                    line: line_no,
                    reason: "empty utterance".into(),
                });
            }
            examples.push(Example {
                class,
                text: utterance.to_owned(),
            });
        }
        Ok(Self { examples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            writeln!(out, "{}\t{}", e.class.label(), e.text).unwrap();
        }
        out
    }

    /// Stratified split: each class's examples are shuffled with `seed` and
    /// the first `ceil(n * train_percent / 100)` go to train, so every class
    /// that has examples keeps at least one in train.
    pub fn split(&self, seed: u64, train_percent: u32) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut held_out = Vec::new();
        for class in IntentClass::ALL {
            let mut members: Vec<&Example> =
                self.examples.iter().filter(|e| e.class == class).collect();
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            let n_train = (members.len() * train_percent as usize)
                .div_ceil(100)
                .max(1);
            let (a, b) = members.split_at(n_train.min(members.len()));
            train.extend(a.iter().map(|e| (*e).clone()));
            held_out.extend(b.iter().map(|e| (*e).clone()));
        }
        (Dataset { examples: train }, Dataset { examples: held_out })
    }
}

impl FromIterator<Example> for Dataset {
    fn from_iter<T: IntoIterator<Item = Example>>(iter: T) -> Self {
        Dataset {
            examples: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}
