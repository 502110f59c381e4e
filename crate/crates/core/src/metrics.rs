//! Confusion matrices, accuracy and per-class-precision MAP.
//!
//! MAP here is the mean over classes of `TP_i / (TP_i + FP_i)`, where the
//! denominator is the number of samples predicted as class `i`. Classes that
//! are never predicted contribute 0.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
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

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let k = rows.len();
        assert!(rows.iter().all(|r| r.len() == k), "matrix must be square");
        Self {
            classes: k,
            counts: rows.concat(),
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<(), MetricsError> {
        for label in [truth, predicted] {
            if label >= self.classes {
                return Err(MetricsError::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// Precision of every class; `None` for classes never predicted.
    pub fn precisions(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|i| {
                let col = self.column_sum(i);
                (col > 0).then(|| self.get(i, i) as f64 / col as f64)
            })
            .collect()
    }

    /// Recall (per-class accuracy); `None` for classes absent from the truth.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|i| {
                let row: u64 = (0..self.classes).map(|p| self.get(i, p)).sum();
                (row > 0).then(|| self.get(i, i) as f64 / row as f64)
            })
            .collect()
    }

    /// Comma-separated grid with a header row of predicted class names.
    pub fn to_csv(&self, names: &[String]) -> String {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut out = String::from("true\\pred");
        for c in 0..self.classes {
            out.push(',');
            out.push_str(&name(c));
        }
        out.push('\n');
        for t in 0..self.classes {
            out.push_str(&name(t));
            for p in 0..self.classes {
                out.push_str(&format!(",{}", self.get(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / total as f64)
}

pub fn mean_average_precision(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let sum: f64 = cm.precisions().into_iter().map(|p| p.unwrap_or(0.0)).sum();
    Ok(sum / cm.classes() as f64)
}
