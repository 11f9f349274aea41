use super::{tokenize, Dataset, IntentError, Prediction, NUM_CLASSES};

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    // single rolling row of the DP table
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = substitute.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// `1 - distance / max(len)`; two empty strings are identical.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Nearest-exemplar classification under normalized edit similarity. The
/// distribution is each class's best similarity, normalized to sum to 1.
pub fn fuzzy_classify(text: &str, exemplars: &Dataset) -> Result<Prediction, IntentError> {
    if text.trim().is_empty() {
        return Err(IntentError::EmptyQuery);
    }
    if exemplars.is_empty() {
        return Err(IntentError::EmptyExemplars);
    }
    let query = normalize(text);
    let mut best = [0.0f64; NUM_CLASSES];
    for e in exemplars {
        let s = similarity(&query, &normalize(&e.text));
        let slot = &mut best[e.class.index()];
        *slot = slot.max(s);
    }
    let total: f64 = best.iter().sum();
    let distribution = if total > 0.0 {
        best.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]
    };
    Ok(Prediction::from_distribution(distribution))
}
