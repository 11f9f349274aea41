use super::{tokenize, Dataset, EmbeddingTable, IntentClass, IntentError, Prediction, NUM_CLASSES};

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Precomputed mean sentence vectors of a training set.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: Vec<(IntentClass, Vec<f64>)>,
}

impl KnnIndex {
    pub fn build(train: &Dataset, table: &EmbeddingTable) -> Self {
        let points = train
            .iter()
            .map(|e| (e.class, table.mean_vector(&tokenize(&e.text))))
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Majority vote among the `k` most cosine-similar training points.
    /// Vote ties go to the larger summed similarity, then class order.
    pub fn classify(
        &self,
        text: &str,
        table: &EmbeddingTable,
        k: usize,
    ) -> Result<Prediction, IntentError> {
        if self.points.is_empty() {
            return Err(IntentError::EmptyTrainingSet);
        }
        if k == 0 || k > self.points.len() {
            return Err(IntentError::KTooLarge {
                k,
                n: self.points.len(),
            });
        }
        let query = table.mean_vector(&tokenize(text));
        let mut ranked: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, (_, v))| (i, cosine(&query, v)))
            .collect();
        // stable sort keeps training order among equal similarities
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));

        let mut votes = [0usize; NUM_CLASSES];
        let mut weight = [0.0f64; NUM_CLASSES];
        for &(i, sim) in &ranked[..k] {
            let c = self.points[i].0.index();
            votes[c] += 1;
            weight[c] += sim;
        }
        let mut winner = 0;
        for c in 1..NUM_CLASSES {
            if (votes[c], weight[c]) > (votes[winner], weight[winner]) {
                winner = c;
            }
        }
        let distribution: Vec<f64> = votes.iter().map(|&v| v as f64 / k as f64).collect();
        let mut prediction = Prediction::from_distribution(distribution);
        prediction.argmax = IntentClass::ALL[winner];
        prediction.confidence = prediction.distribution[winner];
        Ok(prediction)
    }
}

pub fn knn_classify(
    text: &str,
    train: &Dataset,
    table: &EmbeddingTable,
    k: usize,
) -> Result<Prediction, IntentError> {
    KnnIndex::build(train, table).classify(text, table, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::Example;

    fn ex(class: IntentClass, text: &str) -> Example {
        Example {
            class,
            text: text.into(),
        }
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse(
            "goal 1 0 0\nscore 0.9 0.1 0\nheadline 0 1 0\nreport 0.1 0.9 0\nrain 0 0 1\nsun 0 0.2 0.8\n",
        )
        .unwrap()
    }

    #[test]
    fn identical_text_is_nearest() {
        let train = Dataset::new(vec![
            ex(IntentClass::Sports, "goal score"),
            ex(IntentClass::Weather, "rain"),
        ])
        .unwrap();
        let p = knn_classify("goal score", &train, &table(), 1).unwrap();
        assert_eq!(p.argmax, IntentClass::Sports);
    }

    #[test]
    fn majority_of_three() {
        // query "report" = (0.1, 0.9, 0): cosines headline .994, report 1.0,
        // sun .241, goal .110 -> neighbours {News, News, Weather}
        let train = Dataset::new(vec![
            ex(IntentClass::News, "headline"),
            ex(IntentClass::News, "report"),
            ex(IntentClass::Weather, "sun"),
            ex(IntentClass::Sports, "goal"),
        ])
        .unwrap();
        let p = knn_classify("report", &train, &table(), 3).unwrap();
        assert_eq!(p.argmax, IntentClass::News);
        assert!((p.confidence - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.probability(IntentClass::Weather) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k_larger_than_train() {
        let train = Dataset::new(vec![ex(IntentClass::News, "headline"); 5]).unwrap();
        assert!(matches!(
            knn_classify("x", &train, &table(), 10),
            Err(IntentError::KTooLarge { k: 10, n: 5 })
        ));
        assert!(matches!(
            knn_classify("x", &Dataset::default(), &table(), 1),
            Err(IntentError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn zero_vectors_have_zero_cosine() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }
}
