//! Objective privacy/utility metrics: EER, Cllr and min-Cllr, WER.

mod pav;
mod wer;

pub use pav::{cllr_min, pav_calibrate, CalibrationBlock, CalibrationMap};
pub use wer::{
    align, tokenize, wer, wer_corpus, AlignmentCounts, CorpusWer, TranscriptTable, WerBreakdown,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("score set needs at least one target and one impostor score")]
    EmptyScores,
    #[error("non-finite {kind} score at index {index}")]
    NonFiniteScore { kind: &'static str, index: usize },
    #[error("reference transcript is empty")]
    EmptyReference,
    #[error("hypothesis utterances missing from the reference: {0:?}")]
    MissingReference(Vec<String>),
    #[error("duplicate utterance id {0} in transcript table")]
    DuplicateUtterance(String),
    #[error("transcript parse error at line {line}: {reason}")]
    TranscriptParse { line: usize, reason: String },
}

/// Labeled detection scores (log-likelihood ratios): target trials where
/// enrollment and test identities match, impostor trials where they differ.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    target: Vec<f64>,
    impostor: Vec<f64>,
    sorted_target: Vec<f64>,
    sorted_impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn new(target: Vec<f64>, impostor: Vec<f64>) -> Result<Self, MetricError> {
        if target.is_empty() || impostor.is_empty() {
            return Err(MetricError::EmptyScores);
        }
        for (index, s) in target.iter().enumerate() {
            if !s.is_finite() {
                return Err(MetricError::NonFiniteScore {
                    kind: "target",
                    index,
                });
            }
        }
        for (index, s) in impostor.iter().enumerate() {
            if !s.is_finite() {
                return Err(MetricError::NonFiniteScore {
                    kind: "impostor",
                    index,
                });
            }
        }
        let mut sorted_target = target.clone();
        let mut sorted_impostor = impostor.clone();
        sorted_target.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted_impostor.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            target,
            impostor,
            sorted_target,
            sorted_impostor,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }

    pub fn n_target(&self) -> usize {
        self.target.len()
    }

    pub fn n_impostor(&self) -> usize {
        self.impostor.len()
    }

    fn count_impostor_above(&self, theta: f64) -> usize {
        self.n_impostor() - self.sorted_impostor.partition_point(|&s| s <= theta)
    }

    fn count_target_at_or_below(&self, theta: f64) -> usize {
        self.sorted_target.partition_point(|&s| s <= theta)
    }
}

/// False-alarm and miss rates at one detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub threshold: f64,
    /// Fraction of impostor scores strictly above the threshold.
    pub p_fa: f64,
    /// Fraction of target scores at or below the threshold.
    pub p_miss: f64,
}

/// Count-based error rates: `P_fa = #{impostor > theta} / N_imp`,
/// `P_miss = #{target <= theta} / N_tar`.
pub fn error_rates(scores: &ScoreSet, threshold: f64) -> ErrorRates {
    ErrorRates {
        threshold,
        p_fa: scores.count_impostor_above(threshold) as f64 / scores.n_impostor() as f64,
        p_miss: scores.count_target_at_or_below(threshold) as f64 / scores.n_target() as f64,
    }
}

/// Equal error rate (percent) plus the threshold it was read at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer_percent: f64,
    pub threshold: f64,
}

/// Threshold-sweep EER.
///
/// Rates are evaluated at every observed score (the step functions change
/// value nowhere else) plus a below-everything sentinel. The operating point
/// minimizes |P_fa - P_miss|, ties broken by the smaller P_fa + P_miss and
/// then the lower threshold; EER is the midpoint of the two rates there.
/// The sum tie-break keeps EER invariant under label-swap-and-negate; the
/// value is deliberately not clamped to 50%, badly anonymized enrollment
/// data really does score worse than chance.
pub fn eer(scores: &ScoreSet) -> EerResult {
    let mut candidates: Vec<f64> = Vec::with_capacity(scores.n_target() + scores.n_impostor());
    candidates.extend_from_slice(&scores.sorted_target);
    candidates.extend_from_slice(&scores.sorted_impostor);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    // sentinel below every score: P_fa = 1, P_miss = 0
    let mut best = (1.0f64, 1.0f64, f64::NEG_INFINITY, 1.0f64, 0.0f64); // (|diff|, sum, theta, p_fa, p_miss)
    for &theta in &candidates {
        let rates = error_rates(scores, theta);
        let diff = (rates.p_fa - rates.p_miss).abs();
        let sum = rates.p_fa + rates.p_miss;
        if diff < best.0 || (diff == best.0 && sum < best.1) {
            best = (diff, sum, theta, rates.p_fa, rates.p_miss);
        }
    }
    EerResult {
        eer_percent: 100.0 * (best.3 + best.4) / 2.0,
        threshold: best.2,
    }
}

/// Numerically safe `log2(1 + e^x)`.
fn softplus_log2(x: f64) -> f64 {
    let nats = if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    nats / std::f64::consts::LN_2
}

/// Log-likelihood-ratio cost:
/// `0.5 * (mean_tar log2(1+e^-s) + mean_imp log2(1+e^s))`.
///
/// Equals 1 for a system whose scores carry no information (all-zero LLRs)
/// and can grow far beyond 1 for confidently miscalibrated scores.
pub fn cllr(scores: &ScoreSet) -> f64 {
    let t: f64 = scores.target.iter().map(|&s| softplus_log2(-s)).sum();
    let i: f64 = scores.impostor.iter().map(|&s| softplus_log2(s)).sum();
    0.5 * (t / scores.n_target() as f64 + i / scores.n_impostor() as f64)
}
