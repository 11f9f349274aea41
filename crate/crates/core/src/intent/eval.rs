use super::{Dataset, IntentClass, IntentError, Prediction, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<[u32; NUM_CLASSES]>,
}

impl EvalReport {
    pub fn confusion_trace(&self) -> u64 {
        (0..NUM_CLASSES)
            .map(|i| u64::from(self.confusion[i][i]))
            .sum()
    }

    pub fn count(&self, truth: IntentClass, predicted: IntentClass) -> u32 {
        self.confusion[truth.index()][predicted.index()]
    }
}

/// Runs `predict` over a held-out split.
pub fn evaluate<F>(mut predict: F, split: &Dataset) -> Result<EvalReport, IntentError>
where
    F: FnMut(&str) -> Result<Prediction, IntentError>,
{
    if split.is_empty() {
        return Err(IntentError::EmptySplit);
    }
    let mut confusion = vec![[0u32; NUM_CLASSES]; NUM_CLASSES];
    let mut correct = 0;
    for e in split {
        let predicted = predict(&e.text)?.argmax;
        confusion[e.class.index()][predicted.index()] += 1;
        if predicted == e.class {
            correct += 1;
        }
    }
    Ok(EvalReport {
        total: split.len(),
        correct,
        accuracy: correct as f64 / split.len() as f64,
        confusion,
    })
}
