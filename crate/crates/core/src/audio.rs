//! Sampled signals, 20 ms framing and a template-correlation hotword detector.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Frame duration in seconds.
pub const FRAME_SECONDS: f64 = 0.020;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_HOTWORD_THRESHOLD: f64 = 0.90;

#[derive(Debug, Error, PartialEq)]
pub enum AudioError {
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal too short for one {window}-sample frame")]
    WindowTooSmall { window: usize },
    #[error("template of {template} frames is longer than the {frames} available frames")]
    TemplateTooLong { template: usize, frames: usize },
    #[error("hotword template needs at least 2 envelope values")]
    TemplateTooShort,
    #[error("threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    rate: u32,
    samples: Vec<f64>,
}

impl AudioSignal {
    pub fn new(rate: u32, samples: Vec<f64>) -> Result<Self, AudioError> {
        if rate == 0 {
            return Err(AudioError::ZeroRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1.0..=1.0).contains(*v))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self { rate, samples })
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Samples per 20 ms frame at this rate.
    pub fn window(&self) -> usize {
        frame_window(self.rate)
    }

    /// Parses the fixture format: `rate=<Hz>` then one amplitude per line.
    pub fn parse(text: &str) -> Result<Self, AudioError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(AudioError::Parse {
            line: 1,
            reason: "missing rate header".into(),
        })?;
        let rate = header
            .strip_prefix("rate=")
            .and_then(|r| r.trim().parse::<u32>().ok())
            .ok_or_else(|| AudioError::Parse {
                line,
                reason: format!("expected `rate=<Hz>`, got {header:?}"),
            })?;
        let samples = lines
            .map(|(line, l)| {
                l.parse::<f64>().map_err(|e| AudioError::Parse {
                    line,
                    reason: format!("bad amplitude {l:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rate, samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AudioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AudioError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_fixture(&self) -> String {
        let mut out = format!("rate={}\n", self.rate);
        for s in &self.samples {
            writeln!(out, "{s}").unwrap();
        }
        out
    }
}

/// `floor(rate * 0.020)`, computed in integers.
pub fn frame_window(rate: u32) -> usize {
    (rate as usize) / 50
}

#[derive(Debug, Clone, PartialEq)]
pub struct NyquistViolation {
    pub rate: u32,
    pub max_frequency: u32,
    /// Sampling must exceed this rate.
    pub must_exceed: u64,
}

impl std::fmt::Display for NyquistViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sampling at {} Hz cannot represent {} Hz; rate must exceed {} Hz",
            self.rate, self.max_frequency, self.must_exceed
        )
    }
}

/// Strict Nyquist check: `rate > 2 * max_frequency`.
pub fn validate_sampling(rate: u32, max_frequency: u32) -> Result<(), NyquistViolation> {
    let must_exceed = 2 * u64::from(max_frequency);
    if u64::from(rate) > must_exceed {
        Ok(())
    } else {
        Err(NyquistViolation {
            rate,
            max_frequency,
            must_exceed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub samples: Vec<f64>,
    pub energy: f64,
}

impl Frame {
    pub fn new(index: usize, samples: Vec<f64>) -> Self {
        let energy = mean_square(&samples);
        Self {
            index,
            samples,
            energy,
        }
    }
}

pub(crate) fn mean_square(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
    }
}

/// Splits a signal into non-overlapping 20 ms frames. A trailing partial
/// window is dropped.
pub fn frame_signal(sig: &AudioSignal) -> Result<Vec<Frame>, AudioError> {
    if sig.samples.is_empty() {
        return Err(AudioError::EmptySignal);
    }
    let window = sig.window();
    if window == 0 {
        return Err(AudioError::WindowTooSmall { window });
    }
    Ok(sig
        .samples
        .chunks_exact(window)
        .enumerate()
        .map(|(index, chunk)| Frame::new(index, chunk.to_vec()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotwordTemplate {
    envelope: Vec<f64>,
    threshold: f64,
}

impl HotwordTemplate {
    pub fn new(envelope: Vec<f64>, threshold: f64) -> Result<Self, AudioError> {
        if envelope.len() < 2 {
            return Err(AudioError::TemplateTooShort);
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(AudioError::BadThreshold(threshold));
        }
        Ok(Self {
            envelope,
            threshold,
        })
    }

    pub fn with_default_threshold(envelope: Vec<f64>) -> Result<Self, AudioError> {
        Self::new(envelope, DEFAULT_HOTWORD_THRESHOLD)
    }

    pub fn envelope(&self) -> &[f64] {
        &self.envelope
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Template file: optional `threshold=<x>` line and an
    /// `envelope: e1 e2 ...` line.
    pub fn parse(text: &str) -> Result<Self, AudioError> {
        let mut threshold = DEFAULT_HOTWORD_THRESHOLD;
        let mut envelope = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |reason: String| AudioError::Parse {
                line: i + 1,
                reason,
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("threshold=") {
                threshold = v
                    .trim()
                    .parse()
                    .map_err(|e| err(format!("bad threshold: {e}")))?;
            } else if let Some(v) = line.strip_prefix("envelope:") {
                let values = v
                    .split_whitespace()
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|e| err(format!("bad envelope value {x:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                envelope = Some(values);
            } else {
                return Err(err(format!("unrecognized line {line:?}")));
            }
        }
        let envelope = envelope.ok_or(AudioError::Parse {
            line: 0,
            reason: "missing `envelope:` line".into(),
        })?;
        Self::new(envelope, threshold)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AudioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AudioError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Pearson correlation; zero variance on either side correlates as 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

/// Earliest frame offset whose energy envelope correlates with the template
/// at or above its threshold.
pub fn detect_hotword(
    frames: &[Frame],
    tmpl: &HotwordTemplate,
) -> Result<Option<usize>, AudioError> {
    let len = tmpl.envelope.len();
    if frames.len() < len {
        return Err(AudioError::TemplateTooLong {
            template: len,
            frames: frames.len(),
        });
    }
    let energies: Vec<f64> = frames.iter().map(|f| f.energy).collect();
    Ok(energies
        .windows(len)
        .position(|w| pearson(&tmpl.envelope, w) >= tmpl.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_signal(rate: u32, len: usize) -> AudioSignal {
        AudioSignal::new(rate, vec![0.1; len]).unwrap()
    }

    #[test]
    fn nyquist_is_strict() {
        assert!(validate_sampling(16_000, 7_999).is_ok());
        let v = validate_sampling(16_000, 8_000).unwrap_err();
        assert_eq!(v.must_exceed, 16_000);
        assert!(validate_sampling(8_000, 8_000).is_err());
    }

    #[test]
    fn framing_examples() {
        let frames = frame_signal(&constant_signal(16_000, 6_400)).unwrap();
        assert_eq!(frames.len(), 20);
        assert!(frames.iter().all(|f| f.samples.len() == 320));

        assert!(frame_signal(&constant_signal(8_000, 159))
            .unwrap()
            .is_empty());

        let frames = frame_signal(&constant_signal(16_000, 329)).unwrap();
        assert_eq!(frames.len(), 1);
    }

    #[test]
    fn framing_rejects_empty() {
        assert_eq!(
            frame_signal(&AudioSignal::new(16_000, vec![]).unwrap()),
            Err(AudioError::EmptySignal)
        );
    }

    #[test]
    fn signal_validation() {
        assert_eq!(AudioSignal::new(0, vec![0.0]), Err(AudioError::ZeroRate));
        assert!(matches!(
            AudioSignal::new(100, vec![0.0, 1.5]),
            Err(AudioError::SampleOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn fixture_parse() {
        let sig = AudioSignal::parse("rate=100\n0.5\n-0.25\n\n1\n").unwrap();
        assert_eq!(sig.rate(), 100);
        assert_eq!(sig.samples(), &[0.5, -0.25, 1.0]);
        assert_eq!(AudioSignal::parse(&sig.to_fixture()).unwrap(), sig);
        assert!(matches!(
            AudioSignal::parse("rate=100\nabc"),
            Err(AudioError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            AudioSignal::parse("0.5"),
            Err(AudioError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn template_parse() {
        let t = HotwordTemplate::parse("threshold=0.8\nenvelope: 1 4 1\n").unwrap();
        assert_eq!(t.envelope(), &[1.0, 4.0, 1.0]);
        assert_eq!(t.threshold(), 0.8);
        let t = HotwordTemplate::parse("envelope: 1 2").unwrap();
        assert_eq!(t.threshold(), 0.9);
        assert_eq!(
            HotwordTemplate::new(vec![1.0], 0.9),
            Err(AudioError::TemplateTooShort)
        );
        assert_eq!(
            HotwordTemplate::new(vec![1.0, 2.0], 0.0),
            Err(AudioError::BadThreshold(0.0))
        );
    }

    fn frames_from_energies(energies: &[f64]) -> Vec<Frame> {
        energies
            .iter()
            .enumerate()
            .map(|(i, e)| Frame::new(i, vec![e.sqrt(); 4]))
            .collect()
    }

    #[test]
    fn exact_envelope_is_found() {
        let tmpl = HotwordTemplate::with_default_threshold(vec![0.1, 0.5, 0.2]).unwrap();
        let frames = frames_from_energies(&[0.3, 0.3, 0.1, 0.5, 0.2, 0.3]);
        assert_eq!(detect_hotword(&frames, &tmpl).unwrap(), Some(2));
    }

    #[test]
    fn silence_never_matches() {
        let tmpl = HotwordTemplate::with_default_threshold(vec![1.0, 4.0, 1.0]).unwrap();
        let frames = frames_from_energies(&[0.0; 8]);
        assert_eq!(detect_hotword(&frames, &tmpl).unwrap(), None);
    }

    #[test]
    fn template_longer_than_frames() {
        let tmpl = HotwordTemplate::with_default_threshold(vec![1.0, 4.0, 1.0]).unwrap();
        assert_eq!(
            detect_hotword(&frames_from_energies(&[1.0, 2.0]), &tmpl),
            Err(AudioError::TemplateTooLong {
                template: 3,
                frames: 2
            })
        );
    }
}
