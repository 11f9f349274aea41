//! Skill routing and the query handler shared by the HTTP service and the
//! in-process simulator.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{Algorithm, IntentClass, IntentError, ModelBundle, NUM_CLASSES};

pub const QUERY_PLACEHOLDER: &str = "{query}";

const DEFAULT_TEMPLATES: [&str; NUM_CLASSES] = [
    "Here is some art and beauty inspiration for: {query}",
    "Here is the market update for: {query}",
    "Sending your message: {query}",
    "Checking your car for: {query}",
    "Here is a recipe for: {query}",
    "Let's play: {query}",
    "Here is your health and fitness tip for: {query}",
    "Here is something interesting about: {query}",
    "Here is what I know about: {query}",
    "Here is a lifestyle tip for: {query}",
    "Here is what is on screen for: {query}",
    "Now playing: {query}",
    "Here are the headlines for: {query}",
    "Here is something fun for: {query}",
    "Let me work that out: {query}",
    "Added to your schedule: {query}",
    "Added to your shopping list: {query}",
    "Here is what your friends are saying about: {query}",
    "Here are the sports results for: {query}",
    "Here is your travel plan for: {query}",
    "Done: {query}",
    "Here is the weather for: {query}",
];

#[derive(Debug, Error)]
pub enum BrainError {
    #[error("query text is empty")]
    EmptyText,
    #[error("skills line {line}: {reason}")]
    SkillsParse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Intent(#[from] IntentError),
}

/// One response template per intent class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillRegistry {
    templates: Vec<String>,
}

impl Default for SkillRegistry {
    fn default() -> Self {
        Self {
            templates: DEFAULT_TEMPLATES.iter().map(|t| (*t).to_owned()).collect(),
        }
    }
}

impl SkillRegistry {
    pub fn template(&self, class: IntentClass) -> &str {
        &self.templates[class.index()]
    }

    pub fn set_template(&mut self, class: IntentClass, template: impl Into<String>) {
        self.templates[class.index()] = template.into();
    }

    pub fn route(&self, class: IntentClass, text: &str) -> String {
        self.template(class).replace(QUERY_PLACEHOLDER, text)
    }

    /// Applies `<class-label>\t<template>` override lines on top of the
    /// defaults. Blank lines and `#` comments are skipped.
    pub fn with_overrides(mut self, text: &str) -> Result<Self, BrainError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (label, template) =
                raw.split_once('\t')
                    .ok_or_else(|| BrainError::SkillsParse {
                        line,
                        reason: "expected <label>\\t<template>".into(),
                    })?;
            let class = IntentClass::from_label(label).ok_or_else(|| BrainError::SkillsParse {
                line,
                reason: format!("unknown intent label {label:?}"),
            })?;
            self.set_template(class, template);
        }
        Ok(self)
    }

    pub fn load_overrides(path: impl AsRef<Path>) -> Result<Self, BrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::default().with_overrides(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub intent: IntentClass,
    pub confidence: f64,
    pub response: String,
    pub classifier: Algorithm,
}

/// A loaded checkpoint plus the skill registry. Immutable once built.
#[derive(Debug)]
pub struct Brain {
    bundle: ModelBundle,
    registry: SkillRegistry,
    default_algorithm: Algorithm,
}

impl Brain {
    pub fn new(bundle: ModelBundle, registry: SkillRegistry) -> Self {
        Self {
            bundle,
            registry,
            default_algorithm: Algorithm::Cnn,
        }
    }

    pub fn with_default_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.default_algorithm = algorithm;
        self
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn registry(&self) -> &SkillRegistry {
        &self.registry
    }

    pub fn default_algorithm(&self) -> Algorithm {
        self.default_algorithm
    }

    pub fn handle_query(
        &self,
        request: &QueryRequest,
        algorithm: Option<Algorithm>,
    ) -> Result<QueryResponse, BrainError> {
        if request.text.trim().is_empty() {
            return Err(BrainError::EmptyText);
        }
        let algorithm = algorithm.unwrap_or(self.default_algorithm);
        let prediction = self.bundle.classify(algorithm, &request.text)?;
        Ok(QueryResponse {
            intent: prediction.argmax,
            confidence: prediction.confidence,
            response: self.registry.route(prediction.argmax, &request.text),
            classifier: algorithm,
        })
    }

    pub fn answer(&self, text: &str) -> Result<QueryResponse, BrainError> {
        self.handle_query(
            &QueryRequest {
                text: text.to_owned(),
            },
            None,
        )
    }
}
