use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::IntentError;

pub const DEFAULT_EMBEDDING_DIM: usize = 50;

/// Frozen word vectors. Unknown tokens map to the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    /// Row-major `tokens.len() × dim`.
    data: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    zero: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
}

impl<'de> Deserialize<'de> for EmbeddingTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawTable::deserialize(deserializer)?;
        EmbeddingTable::from_rows(raw.dim, raw.tokens, raw.data).map_err(serde::de::Error::custom)
    }
}

impl EmbeddingTable {
    pub fn from_rows(dim: usize, tokens: Vec<String>, data: Vec<f64>) -> Result<Self, IntentError> {
        if dim == 0 || data.len() != tokens.len() * dim {
            return Err(IntentError::InconsistentDimension {
                line: 0,
                expected: tokens.len() * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(IntentError::MalformedLine {
                line: 0,
                reason: "non-finite embedding value".into(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            index.entry(t.clone()).or_insert(i);
        }
        Ok(Self {
            dim,
            tokens,
            data,
            index,
            zero: vec![0.0; dim],
        })
    }

    /// Parses the whitespace-separated text layout: a token followed by its
    /// `D` components on each line.
    pub fn parse(text: &str) -> Result<Self, IntentError> {
        let mut dim = None;
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values = fields
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| IntentError::MalformedLine {
                    line: line_no,
                    reason: format!("bad component: {e}"),
                })?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(IntentError::MalformedLine {
                    line: line_no,
                    reason: "expected finite vector components after the token".into(),
                });
            }
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(IntentError::InconsistentDimension {
                    line: line_no,
                    expected,
                    got: values.len(),
                });
            }
            tokens.push(token.to_owned());
            data.extend(values);
        }
        let dim = dim.ok_or(IntentError::MalformedLine {
            line: 0,
            reason: "embedding file has no vectors".into(),
        })?;
        Self::from_rows(dim, tokens, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IntentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Seeded table over `vocabulary` with components uniform in
    /// `[-0.5/D, 0.5/D]`. Rows follow the iteration order of `vocabulary`.
    pub fn random<I, S>(vocabulary: I, dim: usize, seed: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::random_with_bound(vocabulary, dim, 0.5 / dim as f64, seed)
    }

    /// Like [`EmbeddingTable::random`] with components uniform in
    /// `[-bound, bound]`.
    pub fn random_with_bound<I, S>(vocabulary: I, dim: usize, bound: f64, seed: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<String> = vocabulary.into_iter().map(Into::into).collect();
        let data = (0..tokens.len() * dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self::from_rows(dim, tokens, data).expect("shape is consistent by construction")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> &[f64] {
        match self.index.get(token) {
            Some(&row) => &self.data[row * self.dim..(row + 1) * self.dim],
            None => &self.zero,
        }
    }

    /// Token vectors laid out row-major (`tokens.len() × D`).
    pub fn sequence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut out = Vec::with_capacity(tokens.len() * self.dim);
        for t in tokens {
            out.extend_from_slice(self.vector(t.as_ref()));
        }
        out
    }

    /// Mean of the token vectors; zero for an empty sequence.
    pub fn mean_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        if tokens.is_empty() {
            return mean;
        }
        for t in tokens {
            for (m, v) in mean.iter_mut().zip(self.vector(t.as_ref())) {
                *m += v;
            }
        }
        let n = tokens.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, token) in self.tokens.iter().enumerate() {
            out.push_str(token);
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
