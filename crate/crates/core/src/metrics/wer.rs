//! Word error rate by minimum-edit-distance alignment.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use super::MetricError;

/// Alignment error counts. Among minimum-cost alignments the breakdown is
/// made deterministic by preferring fewer insertions, then fewer deletions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlignmentCounts {
    pub cost: usize,
    pub n_ins: usize,
    pub n_del: usize,
}

impl AlignmentCounts {
    fn key(&self) -> (usize, usize, usize) {
        (self.cost, self.n_ins, self.n_del)
    }

    fn plus(&self, cost: usize, ins: usize, del: usize) -> Self {
        Self {
            cost: self.cost + cost,
            n_ins: self.n_ins + ins,
            n_del: self.n_del + del,
        }
    }
}

/// Levenshtein alignment of hypothesis tokens against reference tokens with
/// unit substitution/deletion/insertion costs.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentCounts {
    let n = reference.len();
    let m = hypothesis.len();
    // dp over hypothesis positions, one reference row at a time
    let mut prev: Vec<AlignmentCounts> = (0..=m)
        .map(|j| AlignmentCounts {
            cost: j,
            n_ins: j,
            n_del: 0,
        })
        .collect();
    let mut curr = vec![AlignmentCounts::default(); m + 1];
    for i in 1..=n {
        curr[0] = AlignmentCounts {
            cost: i,
            n_ins: 0,
            n_del: i,
        };
        for j in 1..=m {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            let mut best = prev[j - 1].plus(sub_cost, 0, 0);
            let del = prev[j].plus(1, 0, 1);
            if del.key() < best.key() {
                best = del;
            }
            let ins = curr[j - 1].plus(1, 1, 0);
            if ins.key() < best.key() {
                best = ins;
            }
            curr[j] = best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Error counts and the reference length they are measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WerBreakdown {
    pub n_sub: usize,
    pub n_del: usize,
    pub n_ins: usize,
    pub n_ref: usize,
}

impl WerBreakdown {
    /// `(n_sub + n_del + n_ins) / n_ref`; can exceed 1 through insertions.
    pub fn wer(&self) -> f64 {
        (self.n_sub + self.n_del + self.n_ins) as f64 / self.n_ref as f64
    }

    pub fn wer_percent(&self) -> f64 {
        100.0 * self.wer()
    }

    fn accumulate(&mut self, other: &WerBreakdown) {
        self.n_sub += other.n_sub;
        self.n_del += other.n_del;
        self.n_ins += other.n_ins;
        self.n_ref += other.n_ref;
    }
}

/// Word error rate of one utterance. The reference may not be empty.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerBreakdown, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let counts = align(reference, hypothesis);
    Ok(WerBreakdown {
        n_sub: counts.cost - counts.n_ins - counts.n_del,
        n_del: counts.n_del,
        n_ins: counts.n_ins,
        n_ref: reference.len(),
    })
}

/// Case-folded whitespace tokenization. Punctuation is kept; transcript
/// normalization beyond case is the producer's job.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// Transcripts keyed by utterance id: lines of `<utterance-id> <word> ...`.
#[derive(Debug, Clone, Default)]
pub struct TranscriptTable {
    entries: BTreeMap<String, Vec<String>>,
}

impl TranscriptTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: String, tokens: Vec<String>) -> Result<(), MetricError> {
        if self.entries.contains_key(&utterance_id) {
            return Err(MetricError::DuplicateUtterance(utterance_id));
        }
        self.entries.insert(utterance_id, tokens);
        Ok(())
    }

    pub fn get(&self, utterance_id: &str) -> Option<&[String]> {
        self.entries.get(utterance_id).map(|v| v.as_slice())
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, MetricError> {
        let mut table = Self::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| MetricError::TranscriptParse {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let id = tokens.next().expect("non-empty line").to_string();
            let words: Vec<String> = tokens.map(|w| w.to_lowercase()).collect();
            table.insert(id, words)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let file =
            std::fs::File::open(path.as_ref()).map_err(|e| MetricError::TranscriptParse {
                line: 0,
                reason: e.to_string(),
            })?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

/// Corpus-level WER result.
#[derive(Debug, Clone)]
pub struct CorpusWer {
    /// Error counts pooled over utterances (not a mean of per-utterance WERs).
    pub breakdown: WerBreakdown,
    pub per_utterance: Vec<(String, WerBreakdown)>,
    /// Reference entries no hypothesis was supplied for (ignored, reported).
    pub unused_references: Vec<String>,
}

/// Score every hypothesis utterance against its reference and pool the
/// counts. Every hypothesis id must exist in the reference table.
pub fn wer_corpus(
    reference: &TranscriptTable,
    hypothesis: &TranscriptTable,
) -> Result<CorpusWer, MetricError> {
    let missing: Vec<String> = hypothesis
        .ids()
        .filter(|id| reference.get(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(MetricError::MissingReference(missing));
    }
    let mut total = WerBreakdown::default();
    let mut per_utterance = Vec::with_capacity(hypothesis.len());
    for id in hypothesis.ids() {
        let ref_tokens = reference.get(id).expect("checked above");
        if ref_tokens.is_empty() {
            return Err(MetricError::EmptyReference);
        }
        let hyp_tokens = hypothesis.get(id).expect("iterating hypothesis ids");
        let breakdown = wer(ref_tokens, hyp_tokens)?;
        total.accumulate(&breakdown);
        per_utterance.push((id.clone(), breakdown));
    }
    if total.n_ref == 0 {
        return Err(MetricError::EmptyReference);
    }
    let unused_references = reference
        .ids()
        .filter(|id| hypothesis.get(id).is_none())
        .cloned()
        .collect();
    Ok(CorpusWer {
        breakdown: total,
        per_utterance,
        unused_references,
    })
}
