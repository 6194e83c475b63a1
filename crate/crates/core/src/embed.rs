//! Embedding-level anonymization: replace a speaker's x-vector with the mean
//! of a randomized subset of the farthest speaker-pool candidates.
//!
//! Selection is two-staged: first the N pool entries at the largest cosine
//! distance from the source, then a uniform draw of N* of them. Per-speaker
//! RNG streams keyed by (seed, speaker, tag) make assignments reproducible
//! and schedule-independent; identical candidate sets between speakers are
//! detected and redrawn so distinct speakers get distinct pseudo material.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::SubsetTag;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("{file}: line {line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("embedding {id} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("embedding {id} has zero norm; cosine distance is undefined")]
    ZeroNorm { id: String },
    #[error("vectors have mismatched dimensions ({a} vs {b})")]
    BadPair { a: usize, b: usize },
    #[error("pool too small: need {required} candidates, only {available} available")]
    PoolTooSmall { required: usize, available: usize },
    #[error("invalid selection parameters: {0}")]
    BadParams(String),
    #[error("speaker {speaker}: candidate sets keep colliding after {attempts} redraws; the pool is too small or degenerate")]
    CollisionExhausted { speaker: String, attempts: u32 },
}

/// A speaker embedding with its labels. `utterance_id` is `None` for
/// speaker-level vectors (e.g. a mean over utterances).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utterance_id: Option<String>,
    pub speaker_id: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    fn id(&self) -> &str {
        self.utterance_id.as_deref().unwrap_or(&self.speaker_id)
    }
}

/// Pool selection knobs. The challenge defaults are 200 farthest candidates
/// and a random subset of 100.
#[derive(Debug, Clone, Serialize)]
pub struct PoolSelectionParams {
    pub n_farthest: usize,
    pub n_subset: usize,
    pub rng_seed: u64,
    /// Length-normalize the averaged vector (off by default).
    pub normalize: bool,
}

impl Default for PoolSelectionParams {
    fn default() -> Self {
        Self {
            n_farthest: 200,
            n_subset: 100,
            rng_seed: 0,
            normalize: false,
        }
    }
}

impl PoolSelectionParams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.n_subset == 0 || self.n_subset > self.n_farthest {
            return Err(EmbedError::BadParams(format!(
                "need 0 < n_subset <= n_farthest, got n_subset {} n_farthest {}",
                self.n_subset, self.n_farthest
            )));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine distance `1 - a.b / (|a||b|)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::BadPair {
            a: a.len(),
            b: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm {
            id: "<anonymous vector>".into(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (na * nb))
}

/// Pick the candidate pool entries for one source vector.
///
/// Stage 1 takes the `n_farthest` entries with the largest cosine distance
/// (distance ties broken toward the lexicographically smaller id). Stage 2
/// draws `n_subset` of those uniformly without replacement from `rng`.
/// Returned indices are sorted by entry id, so the result is a set: equal
/// seeds give equal draws, and `n_subset == n_farthest` is seed-independent.
pub fn select_candidates(
    source: &Embedding,
    pool: &[Embedding],
    params: &PoolSelectionParams,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<usize>, EmbedError> {
    params.validate()?;
    // exclude the source itself if it is present in the pool
    let mut ranked: Vec<(f64, &str, usize)> = Vec::with_capacity(pool.len());
    for (idx, entry) in pool.iter().enumerate() {
        if source.utterance_id.is_some()
            && source.utterance_id.as_deref() == entry.utterance_id.as_deref()
        {
            continue;
        }
        if entry.vector.len() != source.vector.len() {
            return Err(EmbedError::DimensionMismatch {
                id: entry.id().to_string(),
                got: entry.vector.len(),
                expected: source.vector.len(),
            });
        }
        if norm(&entry.vector) == 0.0 {
            return Err(EmbedError::ZeroNorm {
                id: entry.id().to_string(),
            });
        }
        let dist = cosine_distance(&source.vector, &entry.vector)?;
        ranked.push((dist, entry.id(), idx));
    }
    if ranked.len() < params.n_farthest {
        return Err(EmbedError::PoolTooSmall {
            required: params.n_farthest,
            available: ranked.len(),
        });
    }

    let farthest_first = |a: &(f64, &str, usize), b: &(f64, &str, usize)| {
        b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1))
    };
    // partial selection of the top-N, then order the kept prefix
    let n = params.n_farthest;
    if n < ranked.len() {
        ranked.select_nth_unstable_by(n - 1, farthest_first);
        ranked.truncate(n);
    }
    ranked.sort_unstable_by(farthest_first);

    // stage 2: partial Fisher-Yates over the stage-1 list
    let mut picks: Vec<usize> = ranked.iter().map(|&(_, _, idx)| idx).collect();
    for i in 0..params.n_subset {
        let j = i + (rng.next_u64() % (picks.len() - i) as u64) as usize;
        picks.swap(i, j);
    }
    picks.truncate(params.n_subset);
    picks.sort_unstable_by(|&a, &b| pool[a].id().cmp(pool[b].id()));
    Ok(picks)
}

fn derive_rng(seed: u64, speaker: &str, tag: SubsetTag, attempt: u32) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0]);
    hasher.update(speaker.as_bytes());
    hasher.update([0]);
    hasher.update(tag.to_string().as_bytes());
    hasher.update([0]);
    hasher.update(attempt.to_le_bytes());
    let digest = hasher.finalize();
    ChaCha20Rng::from_seed(digest.into())
}

fn derive_pseudo_id(seed: u64, speaker: &str, tag: SubsetTag, attempt: u32) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"pseudo-id");
    hasher.update(seed.to_le_bytes());
    hasher.update([0]);
    hasher.update(speaker.as_bytes());
    hasher.update([0]);
    hasher.update(tag.to_string().as_bytes());
    hasher.update([0]);
    hasher.update(attempt.to_le_bytes());
    let digest = hasher.finalize();
    let mut id = String::from("pseudo-");
    for byte in &digest[..8] {
        write!(id, "{byte:02x}").expect("string write");
    }
    id
}

fn mean_vector(pool: &[Embedding], picks: &[usize], normalize: bool) -> Vec<f64> {
    let dim = pool[picks[0]].vector.len();
    let mut mean = vec![0.0; dim];
    for &idx in picks {
        for (m, v) in mean.iter_mut().zip(&pool[idx].vector) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= picks.len() as f64;
    }
    if normalize {
        let n = norm(&mean);
        if n > 0.0 {
            for m in mean.iter_mut() {
                *m /= n;
            }
        }
    }
    mean
}

/// Anonymize a single source vector: average the selected candidates and
/// label the result with a pseudo id derived from (speaker, tag, seed).
pub fn anonymize_embedding(
    source: &Embedding,
    pool: &[Embedding],
    params: &PoolSelectionParams,
    tag: SubsetTag,
    rng: &mut ChaCha20Rng,
) -> Result<Embedding, EmbedError> {
    let picks = select_candidates(source, pool, params, rng)?;
    Ok(Embedding {
        utterance_id: source.utterance_id.clone(),
        speaker_id: derive_pseudo_id(params.rng_seed, &source.speaker_id, tag, 0),
        vector: mean_vector(pool, &picks, params.normalize),
    })
}

/// One speaker's pseudo identity: the vector, its id, and the audit trail of
/// which pool candidates produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoRecord {
    pub pseudo_id: String,
    pub vector: Vec<f64>,
    pub candidate_ids: Vec<String>,
    /// Redraw counter that produced a collision-free candidate set.
    pub attempt: u32,
}

/// Deterministic map from (speaker, tag) to pseudo identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoSpeakerAssignment {
    pub entries: BTreeMap<(String, SubsetTag), PseudoRecord>,
}

impl PseudoSpeakerAssignment {
    pub fn get(&self, speaker: &str, tag: SubsetTag) -> Option<&PseudoRecord> {
        self.entries.get(&(speaker.to_string(), tag))
    }

    /// Combine assignments (e.g. enrollment and trial halves).
    pub fn merge(&mut self, other: PseudoSpeakerAssignment) -> Result<(), EmbedError> {
        for (key, record) in other.entries {
            if self.entries.contains_key(&key) {
                return Err(EmbedError::BadParams(format!(
                    "assignment already contains ({}, {})",
                    key.0, key.1
                )));
            }
            self.entries.insert(key, record);
        }
        Ok(())
    }

    /// Per-utterance mapping records for the consistency validator.
    pub fn to_mapping_records(
        &self,
        embeddings: &[Embedding],
        tag: SubsetTag,
    ) -> Vec<crate::protocol::MappingRecord> {
        embeddings
            .iter()
            .filter_map(|e| {
                self.get(&e.speaker_id, tag)
                    .map(|record| crate::protocol::MappingRecord {
                        utterance: e.id().to_string(),
                        speaker: e.speaker_id.clone(),
                        tag,
                        pseudo: record.pseudo_id.clone(),
                    })
            })
            .collect()
    }
}

const MAX_REDRAWS: u32 = 8;

/// Assign one pseudo speaker per input speaker for the given subset tag.
///
/// The source vector for a speaker is the mean of that speaker's utterance
/// embeddings. Each speaker draws from its own RNG stream seeded by
/// (rng_seed, speaker, tag, attempt); if two speakers end up with identical
/// candidate sets the later one (in id order) redraws, at most
/// [`MAX_REDRAWS`] times.
pub fn assign_pseudo_speakers(
    embeddings: &[Embedding],
    pool: &[Embedding],
    params: &PoolSelectionParams,
    tag: SubsetTag,
) -> Result<PseudoSpeakerAssignment, EmbedError> {
    params.validate()?;
    let mut by_speaker: BTreeMap<&str, Vec<&Embedding>> = BTreeMap::new();
    for e in embeddings {
        by_speaker.entry(&e.speaker_id).or_default().push(e);
    }

    let mut assignment = PseudoSpeakerAssignment::default();
    let mut seen_sets: BTreeSet<Vec<String>> = BTreeSet::new();
    for (speaker, utts) in &by_speaker {
        let dim = utts[0].vector.len();
        for u in utts {
            if u.vector.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    id: u.id().to_string(),
                    got: u.vector.len(),
                    expected: dim,
                });
            }
        }
        let mut source_vec = vec![0.0; dim];
        for u in utts {
            for (s, v) in source_vec.iter_mut().zip(&u.vector) {
                *s += v;
            }
        }
        for s in source_vec.iter_mut() {
            *s /= utts.len() as f64;
        }
        let source = Embedding {
            utterance_id: None,
            speaker_id: speaker.to_string(),
            vector: source_vec,
        };

        let mut chosen = None;
        for attempt in 0..=MAX_REDRAWS {
            let mut rng = derive_rng(params.rng_seed, speaker, tag, attempt);
            let picks = select_candidates(&source, pool, params, &mut rng)?;
            let ids: Vec<String> = picks.iter().map(|&i| pool[i].id().to_string()).collect();
            if seen_sets.insert(ids.clone()) {
                chosen = Some((picks, ids, attempt));
                break;
            }
        }
        let Some((picks, candidate_ids, attempt)) = chosen else {
            return Err(EmbedError::CollisionExhausted {
                speaker: speaker.to_string(),
                attempts: MAX_REDRAWS,
            });
        };
        assignment.entries.insert(
            (speaker.to_string(), tag),
            PseudoRecord {
                pseudo_id: derive_pseudo_id(params.rng_seed, speaker, tag, attempt),
                vector: mean_vector(pool, &picks, params.normalize),
                candidate_ids,
                attempt,
            },
        );
    }
    Ok(assignment)
}

/// Rewrite each utterance embedding as its speaker's pseudo embedding,
/// preserving utterance ids and input order.
pub fn apply_assignment(
    embeddings: &[Embedding],
    assignment: &PseudoSpeakerAssignment,
    tag: SubsetTag,
) -> Result<Vec<Embedding>, EmbedError> {
    embeddings
        .iter()
        .map(|e| {
            let record = assignment.get(&e.speaker_id, tag).ok_or_else(|| {
                EmbedError::BadParams(format!(
                    "no assignment for speaker {} with tag {tag}",
                    e.speaker_id
                ))
            })?;
            Ok(Embedding {
                utterance_id: e.utterance_id.clone(),
                speaker_id: record.pseudo_id.clone(),
                vector: record.vector.clone(),
            })
        })
        .collect()
}

/// Parse an embedding file: `<utterance-id> <speaker-id> <v1> ... <vD>`.
/// Dimensions must agree across the file; utterance ids must be unique.
pub fn embeddings_from_lines<S: AsRef<str>>(
    file: &str,
    lines: &[S],
) -> Result<Vec<Embedding>, EmbedError> {
    let mut out: Vec<Embedding> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = raw.as_ref().trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(EmbedError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: "expected `<utterance-id> <speaker-id> <v1> ...`".into(),
            });
        }
        let mut vector = Vec::with_capacity(fields.len() - 2);
        for value in &fields[2..] {
            let v: f64 = value.parse().map_err(|_| EmbedError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: format!("bad vector component {value:?}"),
            })?;
            if !v.is_finite() {
                return Err(EmbedError::Parse {
                    file: file.to_string(),
                    line: idx + 1,
                    reason: format!("non-finite vector component {value:?}"),
                });
            }
            vector.push(v);
        }
        if let Some(first) = out.first() {
            if vector.len() != first.vector.len() {
                return Err(EmbedError::DimensionMismatch {
                    id: fields[0].to_string(),
                    got: vector.len(),
                    expected: first.vector.len(),
                });
            }
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(EmbedError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: format!("duplicate utterance id {:?}", fields[0]),
            });
        }
        out.push(Embedding {
            utterance_id: Some(fields[0].to_string()),
            speaker_id: fields[1].to_string(),
            vector,
        });
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>, EmbedError> {
    let name = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| EmbedError::Parse {
        file: name.clone(),
        line: 0,
        reason: e.to_string(),
    })?;
    let mut lines = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        lines.push(line.map_err(|e| EmbedError::Parse {
            file: name.clone(),
            line: idx + 1,
            reason: e.to_string(),
        })?);
    }
    embeddings_from_lines(&name, &lines)
}

/// Render embeddings in the same line format they are parsed from, with
/// shortest-round-trip float formatting (bit-exact on re-read).
pub fn format_embeddings(embeddings: &[Embedding]) -> String {
    let mut out = String::new();
    for e in embeddings {
        out.push_str(e.utterance_id.as_deref().unwrap_or("-"));
        out.push(' ');
        out.push_str(&e.speaker_id);
        for v in &e.vector {
            write!(out, " {v}").expect("string write");
        }
        out.push('\n');
    }
    out
}
