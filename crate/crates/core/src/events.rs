//! Semantic event fusion.
//!
//! Activity and success/failure predictions are binarized and combined by a
//! Kronecker product into a 12-way event one-hot (index `2·activity + sf`),
//! then the two steal outcomes are merged to give 11 final events.

use std::fmt;

use thiserror::Error;

use crate::descriptor::{argmax, Activity, ProbVector, NUM_ACTIVITIES};

pub const NUM_SF: usize = 2;
pub const NUM_EVENTS12: usize = NUM_ACTIVITIES * NUM_SF;
pub const NUM_EVENTS11: usize = NUM_EVENTS12 - 1;
pub const STEAL_EVENT: usize = 10;

/// Frame-level success threshold used by the event pipeline.
pub const DEFAULT_SF_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("expected a one-hot {0:?} vector")]
    NotOneHot(EventKind),
    #[error("vector of length {0} has no event kind")]
    UnsupportedLength(usize),
    #[error("expected {expected:?}, got {actual:?}")]
    WrongKind { expected: EventKind, actual: EventKind },
    #[error("no frame scores")]
    EmptyScores,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Activity6,
    SF2,
    Event12,
    Event11,
}

impl EventKind {
    pub fn len(self) -> usize {
        match self {
            EventKind::Activity6 => NUM_ACTIVITIES,
            EventKind::SF2 => NUM_SF,
            EventKind::Event12 => NUM_EVENTS12,
            EventKind::Event11 => NUM_EVENTS11,
        }
    }

    pub fn from_len(len: usize) -> Option<Self> {
        [Self::Activity6, Self::SF2, Self::Event12, Self::Event11]
            .into_iter()
            .find(|k| k.len() == len)
    }
}

/// Shot outcome. Index 0 is success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success = 0,
    Failure = 1,
}

impl Outcome {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::Success),
            1 => Some(Self::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventVector {
    kind: EventKind,
    values: Vec<f64>,
}

impl EventVector {
    pub fn one_hot(kind: EventKind, index: usize) -> Self {
        assert!(index < kind.len(), "one-hot index out of range");
        let mut values = vec![0.0; kind.len()];
        values[index] = 1.0;
        Self { kind, values }
    }

    pub fn kind(&self) -> EventKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position of the single 1 when the vector is one-hot.
    pub fn hot_index(&self) -> Option<usize> {
        let mut hot = None;
        for (i, v) in self.values.iter().enumerate() {
            if *v == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(i);
            } else if *v != 0.0 {
                return None;
            }
        }
        hot
    }

    fn expect_one_hot(&self, kind: EventKind) -> Result<usize, FusionError> {
        if self.kind != kind {
            return Err(FusionError::WrongKind {
                expected: kind,
                actual: self.kind,
            });
        }
        self.hot_index().ok_or(FusionError::NotOneHot(kind))
    }
}

/// One-hot at the argmax (lowest index on ties). The kind follows the length.
pub fn binarize(probs: &ProbVector) -> Result<EventVector, FusionError> {
    let kind = EventKind::from_len(probs.len()).ok_or(FusionError::UnsupportedLength(probs.len()))?;
    Ok(EventVector::one_hot(kind, argmax(probs.as_slice())))
}

/// Kronecker product of an activity one-hot and a success/failure one-hot.
pub fn kronecker_fuse(
    activity: &EventVector,
    sf: &EventVector,
) -> Result<EventVector, FusionError> {
    activity.expect_one_hot(EventKind::Activity6)?;
    sf.expect_one_hot(EventKind::SF2)?;
    let values = activity
        .values
        .iter()
        .flat_map(|a| sf.values.iter().map(move |s| a * s))
        .collect();
    Ok(EventVector {
        kind: EventKind::Event12,
        values,
    })
}

/// Collapses steal-success and steal-failure into the single final index 10.
pub fn merge_steal(event12: &EventVector) -> Result<EventVector, FusionError> {
    let i = event12.expect_one_hot(EventKind::Event12)?;
    Ok(EventVector::one_hot(EventKind::Event11, i.min(STEAL_EVENT)))
}

/// Final 11-way event index for a ground-truth pair.
pub fn event11_index(activity: usize, sf: Outcome) -> usize {
    (2 * activity + sf.index()).min(STEAL_EVENT)
}

pub fn event11_name(index: usize) -> String {
    if index >= STEAL_EVENT {
        return Activity::Steal.name().to_string();
    }
    let a = Activity::from_index(index / 2).map(Activity::name).unwrap_or("?");
    let s = Outcome::from_index(index % 2).unwrap_or(Outcome::Failure);
    format!("{a} {s}")
}

/// Per-frame success responses, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSuccessScores(Vec<f64>);

impl FrameSuccessScores {
    pub fn new(scores: Vec<f64>) -> Result<Self, FusionError> {
        if scores.is_empty() {
            return Err(FusionError::EmptyScores);
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(FusionError::ScoreOutOfRange(*bad));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn clip_is_success(scores: &FrameSuccessScores, threshold: f64) -> bool {
    scores.0.iter().any(|s| *s > threshold)
}

/// Success iff any frame score strictly exceeds `threshold`.
pub fn clip_success(
    scores: &FrameSuccessScores,
    threshold: f64,
) -> Result<EventVector, FusionError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FusionError::InvalidThreshold(threshold));
    }
    let outcome = if clip_is_success(scores, threshold) {
        Outcome::Success
    } else {
        Outcome::Failure
    };
    Ok(EventVector::one_hot(EventKind::SF2, outcome.index()))
}

/// The sweep grid 0.50, 0.55, …, 1.00.
pub fn sweep_thresholds() -> [f64; 11] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    /// `None` when there are no success clips.
    pub success_accuracy: Option<f64>,
    /// `None` when there are no failure clips.
    pub failure_accuracy: Option<f64>,
    pub overall_accuracy: f64,
    pub success_correct: usize,
    pub failure_correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub success_total: usize,
    pub failure_total: usize,
}

impl SweepTable {
    /// Row with the highest overall accuracy, lowest threshold on ties.
    pub fn best(&self) -> &SweepRow {
        let mut best = &self.rows[0];
        for r in &self.rows[1..] {
            if r.overall_accuracy > best.overall_accuracy {
                best = r;
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
        let mut out = String::from("threshold,succ_acc,fail_acc,overall\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.2},{},{},{:.6}\n",
                r.threshold,
                fmt_opt(r.success_accuracy),
                fmt_opt(r.failure_accuracy),
                r.overall_accuracy
            ));
        }
        out
    }
}

pub fn threshold_sweep(
    clips: &[(FrameSuccessScores, Outcome)],
) -> Result<SweepTable, FusionError> {
    if clips.is_empty() {
        return Err(FusionError::EmptyDataset);
    }
    let success_total = clips.iter().filter(|c| c.1 == Outcome::Success).count();
    let failure_total = clips.len() - success_total;
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let rows = sweep_thresholds()
        .into_iter()
        .map(|threshold| {
            let (mut sc, mut fc) = (0, 0);
            for (scores, truth) in clips {
                match (clip_is_success(scores, threshold), truth) {
                    (true, Outcome::Success) => sc += 1,
                    (false, Outcome::Failure) => fc += 1,
                    _ => {}
                }
            }
            SweepRow {
                threshold,
                success_accuracy: ratio(sc, success_total),
                failure_accuracy: ratio(fc, failure_total),
                overall_accuracy: (sc + fc) as f64 / clips.len() as f64,
                success_correct: sc,
                failure_correct: fc,
            }
        })
        .collect();
    Ok(SweepTable {
        rows,
        success_total,
        failure_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(i: usize) -> EventVector {
        EventVector::one_hot(EventKind::Activity6, i)
    }

    fn sf(i: usize) -> EventVector {
        EventVector::one_hot(EventKind::SF2, i)
    }

    fn scores(v: &[f64]) -> FrameSuccessScores {
        FrameSuccessScores::new(v.to_vec()).unwrap()
    }

    #[test]
    fn binarize_examples() {
        let p = ProbVector::new(vec![0.1, 0.7, 0.2, 0.0, 0.0, 0.0]).unwrap();
        let b = binarize(&p).unwrap();
        assert_eq!(b.values(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.kind(), EventKind::Activity6);
        assert_eq!(binarize(&ProbVector::uniform(6)).unwrap().hot_index(), Some(0));
        let oh = ProbVector::one_hot(6, 4);
        assert_eq!(binarize(&oh).unwrap().values(), oh.as_slice());
        assert_eq!(
            binarize(&ProbVector::uniform(3)),
            Err(FusionError::UnsupportedLength(3))
        );
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_fuse(&act(1), &sf(0)).unwrap().hot_index(), Some(2));
        assert_eq!(kronecker_fuse(&act(0), &sf(1)).unwrap().hot_index(), Some(1));
        assert_eq!(kronecker_fuse(&act(5), &sf(1)).unwrap().hot_index(), Some(11));
    }

    #[test]
    fn kronecker_rejects_non_one_hot() {
        let soft = EventVector {
            kind: EventKind::Activity6,
            values: vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(
            kronecker_fuse(&soft, &sf(0)),
            Err(FusionError::NotOneHot(EventKind::Activity6))
        );
        assert!(matches!(
            kronecker_fuse(&sf(0), &act(0)),
            Err(FusionError::WrongKind { .. })
        ));
    }

    #[test]
    fn merge_examples() {
        let e = |i| EventVector::one_hot(EventKind::Event12, i);
        assert_eq!(merge_steal(&e(10)).unwrap().hot_index(), Some(10));
        assert_eq!(merge_steal(&e(11)).unwrap().hot_index(), Some(10));
        assert_eq!(merge_steal(&e(3)).unwrap().hot_index(), Some(3));
        assert_eq!(merge_steal(&e(3)).unwrap().kind(), EventKind::Event11);
        assert!(merge_steal(&act(1)).is_err());
    }

    #[test]
    fn clip_success_examples() {
        let s = |v: &[f64], t| clip_success(&scores(v), t).unwrap().hot_index().unwrap();
        assert_eq!(s(&[0.2, 0.8, 0.3], 0.7), 0);
        assert_eq!(s(&[0.2, 0.7, 0.3], 0.7), 1);
        assert_eq!(s(&[0.0, 0.0], 0.0), 1);
        assert_eq!(s(&[1.0], 1.0), 1);
        assert_eq!(FrameSuccessScores::new(vec![]), Err(FusionError::EmptyScores));
        assert!(FrameSuccessScores::new(vec![1.5]).is_err());
        assert!(clip_success(&scores(&[0.5]), 1.2).is_err());
    }

    #[test]
    fn sweep_grid() {
        let t = sweep_thresholds();
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[4], 0.7);
        assert_eq!(t[10], 1.0);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_all_failure() {
        let clips = vec![(scores(&[0.0; 4]), Outcome::Failure); 5];
        let table = threshold_sweep(&clips).unwrap();
        for r in &table.rows {
            assert_eq!(r.failure_accuracy, Some(1.0));
            assert_eq!(r.success_accuracy, None);
            assert_eq!(r.overall_accuracy, 1.0);
        }
        assert!(table.to_csv().contains("0.50,NA,1.000000,1.000000"));
        assert_eq!(threshold_sweep(&[]), Err(FusionError::EmptyDataset));
    }

    #[test]
    fn event_names() {
        assert_eq!(event11_name(0), "3-point success");
        assert_eq!(event11_name(3), "free-throw failure");
        assert_eq!(event11_name(10), "steal");
        assert_eq!(event11_index(5, Outcome::Failure), 10);
        assert_eq!(event11_index(2, Outcome::Failure), 5);
    }
}
