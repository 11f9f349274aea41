//! Letter-level speech-to-text: per-frame letter scoring against energy
//! prototypes, blank/repeat collapse, and beam search rescored by a bigram
//! language model over the collapsed text.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::audio::{mean_square, Frame};

/// Letters, space, apostrophe, blank.
pub const ALPHABET_SIZE: usize = 29;
/// Every symbol except blank.
pub const LM_SYMBOLS: usize = 28;
pub const DEFAULT_BEAM_WIDTH: usize = 8;
pub const DEFAULT_LM_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u8);

impl Symbol {
    pub const SPACE: Symbol = Symbol(26);
    pub const APOSTROPHE: Symbol = Symbol(27);
    pub const BLANK: Symbol = Symbol(28);

    pub fn new(index: usize) -> Option<Symbol> {
        (index < ALPHABET_SIZE).then_some(Symbol(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_blank(self) -> bool {
        self == Symbol::BLANK
    }

    pub fn all() -> impl Iterator<Item = Symbol> {
        (0..ALPHABET_SIZE as u8).map(Symbol)
    }

    /// Maps an upper-case letter, space or apostrophe.
    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            'A'..='Z' => Some(Symbol(c as u8 - b'A')),
            ' ' => Some(Symbol::SPACE),
            '\'' => Some(Symbol::APOSTROPHE),
            _ => None,
        }
    }

    /// Textual form; blank has none.
    pub fn to_char(self) -> Option<char> {
        match self.0 {
            0..=25 => Some((b'A' + self.0) as char),
            26 => Some(' '),
            27 => Some('\''),
            _ => None,
        }
    }

    /// Name used in fixture files.
    pub fn name(self) -> String {
        match self {
            Symbol::SPACE => "SPACE".into(),
            Symbol::APOSTROPHE => "APOS".into(),
            Symbol::BLANK => "BLANK".into(),
            s => s.to_char().unwrap().to_string(),
        }
    }

    pub fn from_name(name: &str) -> Option<Symbol> {
        match name {
            "SPACE" => Some(Symbol::SPACE),
            "APOS" | "'" => Some(Symbol::APOSTROPHE),
            "BLANK" => Some(Symbol::BLANK),
            _ => {
                let mut chars = name.chars();
                match (chars.next(), chars.next()) {
                    (Some(c @ 'A'..='Z'), None) => Symbol::from_char(c),
                    _ => None,
                }
            }
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TranscriberError {
    #[error("no letter template for symbol {0}")]
    MissingTemplate(Symbol),
    #[error("template for {symbol} has {got} values, expected {expected}")]
    TemplateLength {
        symbol: Symbol,
        expected: usize,
        got: usize,
    },
    #[error("no frames to classify")]
    NoFrames,
    #[error("illegal symbol in {word:?} at position {position}")]
    IllegalSymbol { word: String, position: usize },
    #[error("beam width must be at least 1")]
    InvalidBeamWidth,
    #[error("invalid letter scores: {0}")]
    InvalidScores(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

/// Per-frame probability distributions over the 29 symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterScores {
    rows: Vec<[f64; ALPHABET_SIZE]>,
}

impl LetterScores {
    /// Validates non-negativity and that each row sums to 1 within 1e-9.
    pub fn new(rows: Vec<[f64; ALPHABET_SIZE]>) -> Result<Self, TranscriberError> {
        for (t, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(TranscriberError::InvalidScores(format!(
                    "frame {t} has a negative or non-finite probability"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TranscriberError::InvalidScores(format!(
                    "frame {t} sums to {sum}"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Builds rows from sparse `(symbol, probability)` lists.
    pub fn from_sparse(rows: &[Vec<(Symbol, f64)>]) -> Result<Self, TranscriberError> {
        let dense = rows
            .iter()
            .map(|entries| {
                let mut row = [0.0; ALPHABET_SIZE];
                for &(s, p) in entries {
                    row[s.index()] += p;
                }
                row
            })
            .collect();
        Self::new(dense)
    }

    pub fn rows(&self) -> &[[f64; ALPHABET_SIZE]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One energy prototype per symbol; a frame is described by the mean-square
/// energy of `k` equal segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterTemplates {
    prototypes: HashMap<Symbol, Vec<f64>>,
    segments: usize,
    /// Distance-to-probability temperature: `p ∝ exp(-sharpness * d)`.
    pub sharpness: f64,
}

impl LetterTemplates {
    pub fn new(prototypes: HashMap<Symbol, Vec<f64>>) -> Result<Self, TranscriberError> {
        let segments = prototypes.values().next().map_or(0, Vec::len);
        for symbol in Symbol::all() {
            let proto = prototypes
                .get(&symbol)
                .ok_or(TranscriberError::MissingTemplate(symbol))?;
            if proto.len() != segments || segments == 0 {
                return Err(TranscriberError::TemplateLength {
                    symbol,
                    expected: segments.max(1),
                    got: proto.len(),
                });
            }
        }
        Ok(Self {
            prototypes,
            segments,
            sharpness: 1.0,
        })
    }

    pub fn with_sharpness(mut self, sharpness: f64) -> Self {
        self.sharpness = sharpness;
        self
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn prototype(&self, symbol: Symbol) -> &[f64] {
        &self.prototypes[&symbol]
    }

    /// Fixture format: one `SYM: e1 e2 ... ek` line per symbol.
    pub fn parse(text: &str) -> Result<Self, TranscriberError> {
        let mut prototypes = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| TranscriberError::Parse {
                line: i + 1,
                reason,
            };
            let (name, values) = line
                .split_once(':')
                .ok_or_else(|| err("expected `SYM: values`".into()))?;
            let symbol = Symbol::from_name(name.trim())
                .ok_or_else(|| err(format!("unknown symbol {:?}", name.trim())))?;
            let values = values
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| err(format!("bad value {v:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            prototypes.insert(symbol, values);
        }
        Self::new(prototypes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranscriberError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TranscriberError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Segment energies of a frame, the feature compared with prototypes.
    pub fn features(&self, frame: &Frame) -> Vec<f64> {
        let n = frame.samples.len();
        (0..self.segments)
            .map(|i| {
                mean_square(&frame.samples[i * n / self.segments..(i + 1) * n / self.segments])
            })
            .collect()
    }
}

/// Scores every frame against every letter prototype.
pub fn classify_frames(
    frames: &[Frame],
    templates: &LetterTemplates,
) -> Result<LetterScores, TranscriberError> {
    if frames.is_empty() {
        return Err(TranscriberError::NoFrames);
    }
    let rows = frames
        .iter()
        .map(|frame| {
            let feature = templates.features(frame);
            let mut dist = [0.0; ALPHABET_SIZE];
            for symbol in Symbol::all() {
                dist[symbol.index()] = feature
                    .iter()
                    .zip(templates.prototype(symbol))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
            }
            let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
            let mut row = dist.map(|d| (-templates.sharpness * (d - nearest)).exp());
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        })
        .collect();
    LetterScores::new(rows)
}

/// Drops blanks and merges runs of identical adjacent symbols.
pub fn collapse(symbols: &[Symbol]) -> String {
    let mut out = String::new();
    let mut prev: Option<Symbol> = None;
    for &s in symbols {
        if Some(s) != prev {
            if let Some(c) = s.to_char() {
                out.push(c);
            }
        }
        prev = Some(s);
    }
    out
}

/// Add-one smoothed character bigram model over the 28 non-blank symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramLM {
    counts: Vec<[u32; LM_SYMBOLS]>,
    row_totals: Vec<u32>,
}

impl BigramLM {
    pub fn uniform() -> Self {
        Self {
            counts: vec![[0; LM_SYMBOLS]; LM_SYMBOLS],
            row_totals: vec![0; LM_SYMBOLS],
        }
    }

    pub fn count(&self, prev: Symbol, next: Symbol) -> u32 {
        self.counts[prev.index()][next.index()]
    }

    /// `P(next | prev) = (count(prev, next) + 1) / (count(prev, ·) + 28)`.
    pub fn prob(&self, prev: Symbol, next: Symbol) -> f64 {
        debug_assert!(!prev.is_blank() && !next.is_blank());
        f64::from(self.counts[prev.index()][next.index()] + 1)
            / f64::from(self.row_totals[prev.index()] + LM_SYMBOLS as u32)
    }
}

pub fn train_bigram_lm<S: AsRef<str>>(corpus: &[S]) -> Result<BigramLM, TranscriberError> {
    let mut lm = BigramLM::uniform();
    for word in corpus {
        let word = word.as_ref();
        let symbols = word
            .chars()
            .enumerate()
            .map(|(position, c)| {
                Symbol::from_char(c).ok_or_else(|| TranscriberError::IllegalSymbol {
                    word: word.to_owned(),
                    position,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for pair in symbols.windows(2) {
            lm.counts[pair[0].index()][pair[1].index()] += 1;
            lm.row_totals[pair[0].index()] += 1;
        }
    }
    Ok(lm)
}

/// LM contribution of emitting `next` after `prev`, measured against a
/// uniform next-symbol distribution so that a uniform model scores zero.
pub fn lm_step_score(lm: &BigramLM, prev: Symbol, next: Symbol) -> f64 {
    (lm.prob(prev, next) * LM_SYMBOLS as f64).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub text: String,
    /// Total acoustic log-probability plus weighted LM score.
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    // collapsed non-blank symbols
    text: Vec<Symbol>,
    last: Option<Symbol>,
    score: f64,
}

impl Hypothesis {
    fn extend(&self, symbol: Symbol, acoustic: f64, lm: &BigramLM, lm_weight: f64) -> Hypothesis {
        let mut next = Hypothesis {
            text: self.text.clone(),
            last: Some(symbol),
            score: self.score + acoustic.ln(),
        };
        if !symbol.is_blank() && self.last != Some(symbol) {
            if let Some(&prev) = self.text.last() {
                next.score += lm_weight * lm_step_score(lm, prev, symbol);
            }
            next.text.push(symbol);
        }
        next
    }
}

fn text_of(symbols: &[Symbol]) -> String {
    symbols.iter().filter_map(|s| s.to_char()).collect()
}

/// Beam search maximizing acoustic log-probability plus `lm_weight` times
/// the LM score of the collapsed text. Hypotheses that agree on collapsed
/// text and last raw symbol are merged (max), which is exact.
pub fn decode_beam(
    scores: &LetterScores,
    lm: &BigramLM,
    beam_width: usize,
    lm_weight: f64,
) -> Result<Transcript, TranscriberError> {
    if beam_width == 0 {
        return Err(TranscriberError::InvalidBeamWidth);
    }
    let mut beam = vec![Hypothesis {
        text: Vec::new(),
        last: None,
        score: 0.0,
    }];
    for row in scores.rows() {
        let mut merged: HashMap<(Vec<Symbol>, Option<Symbol>), Hypothesis> = HashMap::new();
        for hyp in &beam {
            for symbol in Symbol::all() {
                let p = row[symbol.index()];
                if p <= 0.0 {
                    continue;
                }
                let next = hyp.extend(symbol, p, lm, lm_weight);
                let key = (next.text.clone(), next.last);
                match merged.get(&key) {
                    Some(existing) if existing.score >= next.score => {}
                    _ => {
                        merged.insert(key, next);
                    }
                }
            }
        }
        beam = merged.into_values().collect();
        beam.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.text.cmp(&b.text))
                .then_with(|| a.last.cmp(&b.last))
        });
        beam.truncate(beam_width);
    }
    let best = beam
        .into_iter()
        .next()
        .expect("beam never empties: every row has positive mass");
    Ok(Transcript {
        text: text_of(&best.text),
        score: best.score,
    })
}

/// Per-frame argmax (first index on ties) followed by collapse.
pub fn decode_greedy(scores: &LetterScores) -> String {
    let symbols: Vec<Symbol> = scores
        .rows()
        .iter()
        .map(|row| {
            let mut best = 0;
            for (i, p) in row.iter().enumerate() {
                if *p > row[best] {
                    best = i;
                }
            }
            Symbol(best as u8)
        })
        .collect();
    collapse(&symbols)
}
