use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, FeatureSet, HeadModel, Subtype};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// From row-major counts.
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self, ClassifierError> {
        if counts.len() != classes * classes {
            return Err(ClassifierError::ShapeMismatch {
                expected: vec![classes, classes],
                found: vec![counts.len()],
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn from_predictions(
        classes: usize,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self, ClassifierError> {
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), ClassifierError> {
        for label in [truth, predicted] {
            if label >= self.classes {
                return Err(ClassifierError::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Sum of true positives over sum of true positives plus false
    /// negatives, across all classes.
    pub fn accuracy(&self) -> Result<f64, ClassifierError> {
        let mut tp = 0u64;
        let mut tp_fn = 0u64;
        for i in 0..self.classes {
            tp += self.get(i, i);
            tp_fn += (0..self.classes).map(|j| self.get(i, j)).sum::<u64>();
        }
        if tp_fn == 0 {
            return Err(ClassifierError::EmptySet);
        }
        Ok(tp as f64 / tp_fn as f64)
    }
}

const EVAL_CHUNK: usize = 256;

/// Argmax class per sample, ties to the lower index.
pub fn predict(model: &HeadModel, set: &FeatureSet) -> Result<Vec<usize>, ClassifierError> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        let logits = model.logits(&set.batch(chunk)?)?;
        for r in 0..logits.rows() {
            let row = logits.row(r);
            let best = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
            out.push(best);
        }
    }
    Ok(out)
}

pub fn evaluate_accuracy(model: &HeadModel, set: &FeatureSet) -> Result<f64, ClassifierError> {
    if set.is_empty() {
        return Err(ClassifierError::EmptySet);
    }
    let predicted = predict(model, set)?;
    ConfusionMatrix::from_predictions(model.config.classes, set.labels(), &predicted)?.accuracy()
}

/// Accuracy within each subtype; `None` where the subtype has no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeAccuracy {
    pub cells: Vec<(Subtype, Option<f64>)>,
}

impl SubtypeAccuracy {
    pub fn get(&self, subtype: Subtype) -> Option<f64> {
        self.cells
            .iter()
            .find(|(s, _)| *s == subtype)
            .and_then(|(_, v)| *v)
    }
}

/// Samples without a subtype are ignored.
pub fn subtype_accuracy(
    predicted: &[usize],
    labels: &[usize],
    subtypes: &[Option<Subtype>],
) -> SubtypeAccuracy {
    let mut hits = [0usize; 8];
    let mut seen = [0usize; 8];
    for ((p, l), s) in predicted.iter().zip(labels).zip(subtypes) {
        if let Some(s) = s {
            seen[s.index()] += 1;
            if p == l {
                hits[s.index()] += 1;
            }
        }
    }
    let cells = Subtype::ALL
        .into_iter()
        .map(|s| {
            let n = seen[s.index()];
            (s, (n > 0).then(|| hits[s.index()] as f64 / n as f64))
        })
        .collect();
    SubtypeAccuracy { cells }
}

pub fn per_class_accuracy(
    model: &HeadModel,
    set: &FeatureSet,
) -> Result<SubtypeAccuracy, ClassifierError> {
    let predicted = predict(model, set)?;
    Ok(subtype_accuracy(&predicted, set.labels(), set.subtypes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_five_three_two() {
        // 12 samples, 10 on the diagonal
        let m = ConfusionMatrix::from_counts(3, vec![5, 1, 0, 0, 3, 1, 0, 0, 2]).unwrap();
        assert_eq!(m.total(), 12);
        assert!((m.accuracy().unwrap() - 10.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.random_range(2..9);
            let counts: Vec<u64> = (0..k * k).map(|_| rng.random_range(0..50)).collect();
            let m = ConfusionMatrix::from_counts(k, counts).unwrap();
            if m.total() == 0 {
                continue;
            }
            assert_eq!(m.accuracy().unwrap(), m.trace() as f64 / m.total() as f64);
        }
    }

    #[test]
    fn empty_matrix_errors() {
        assert_eq!(
            ConfusionMatrix::new(2).accuracy(),
            Err(ClassifierError::EmptySet)
        );
        assert!(ConfusionMatrix::new(2).record(2, 0).is_err());
    }

    #[test]
    fn subtype_cells() {
        let s = [Some(Subtype::A); 4]
            .into_iter()
            .chain([Some(Subtype::DC); 2])
            .collect::<Vec<_>>();
        let labels = [0, 0, 0, 0, 1, 1];
        let predicted = [0, 1, 0, 0, 1, 0];
        let t = subtype_accuracy(&predicted, &labels, &s);
        assert_eq!(t.get(Subtype::A), Some(0.75));
        assert_eq!(t.get(Subtype::DC), Some(0.5));
        assert_eq!(t.get(Subtype::PT), None);
        assert_eq!(t.cells.len(), 8);
    }

    #[test]
    fn perfect_predictions() {
        let s: Vec<_> = Subtype::ALL.into_iter().map(Some).collect();
        let labels: Vec<usize> = Subtype::ALL.iter().map(|s| s.label().index()).collect();
        let t = subtype_accuracy(&labels, &labels, &s);
        assert!(t.cells.iter().all(|(_, v)| *v == Some(1.0)));
    }
}
