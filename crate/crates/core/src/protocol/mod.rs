//! Trial/enrollment bookkeeping: trial lists, score-file reconciliation,
//! pseudo-speaker consistency validation, result tables.

mod table;

pub use table::{
    emit_results, parse_results, AsvRow, Condition, ResultsTable, TableFormat, WerRow,
};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::metrics::{MetricError, ScoreSet};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("{file}: line {line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("duplicate trial pair ({enroll}, {test})")]
    DuplicatePair { enroll: String, test: String },
    #[error(
        "score file does not reconcile with the trial list: missing {missing:?}, unknown {extra:?}"
    )]
    Reconciliation {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("duplicate score row for pair ({enroll}, {test})")]
    DuplicateScore { enroll: String, test: String },
    #[error("results table is empty")]
    EmptyTable,
    #[error("table cell {0:?} must not contain whitespace")]
    CellWhitespace(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn open_lines(path: impl AsRef<Path>) -> Result<(String, Vec<String>), ProtocolError> {
    let name = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| ProtocolError::Parse {
        file: name.clone(),
        line: 0,
        reason: e.to_string(),
    })?;
    let mut lines = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ProtocolError::Parse {
            file: name.clone(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        lines.push(line);
    }
    Ok((name, lines))
}

/// Whether a trial's enrollment and test identities match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrialLabel {
    Target,
    Nontarget,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialLabel::Target => "target",
            TrialLabel::Nontarget => "nontarget",
        })
    }
}

impl std::str::FromStr for TrialLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "target" => Ok(TrialLabel::Target),
            "nontarget" => Ok(TrialLabel::Nontarget),
            other => Err(format!("unknown trial label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialEntry {
    pub enroll: String,
    pub test: String,
    pub label: TrialLabel,
}

/// Parsed trial list with per-label counts.
#[derive(Debug, Clone, Default)]
pub struct TrialList {
    pub entries: Vec<TrialEntry>,
}

impl TrialList {
    /// Parse `<enroll-id> <test-utterance> target|nontarget` lines,
    /// rejecting duplicate (enroll, test) pairs.
    pub fn from_lines<S: AsRef<str>>(file: &str, lines: &[S]) -> Result<Self, ProtocolError> {
        let mut entries = Vec::new();
        let mut seen: HashSet<(String, String)> = HashSet::new();
        for (idx, raw) in lines.iter().enumerate() {
            let line = raw.as_ref().trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(ProtocolError::Parse {
                    file: file.to_string(),
                    line: idx + 1,
                    reason: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let label: TrialLabel = fields[2].parse().map_err(|reason| ProtocolError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason,
            })?;
            let (enroll, test) = (fields[0].to_string(), fields[1].to_string());
            if !seen.insert((enroll.clone(), test.clone())) {
                return Err(ProtocolError::DuplicatePair { enroll, test });
            }
            entries.push(TrialEntry {
                enroll,
                test,
                label,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProtocolError> {
        let (name, lines) = open_lines(path)?;
        Self::from_lines(&name, &lines)
    }

    pub fn count(&self, label: TrialLabel) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-label counts within each gender; speakers absent from `genders`
    /// are grouped under `"?"`.
    pub fn counts_by_gender(
        &self,
        genders: &BTreeMap<String, String>,
    ) -> BTreeMap<(String, TrialLabel), usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            let g = genders
                .get(&e.enroll)
                .cloned()
                .unwrap_or_else(|| "?".to_string());
            *out.entry((g, e.label)).or_insert(0) += 1;
        }
        out
    }
}

/// Speaker metadata, `<speaker-id> <gender>` lines. Gender is an opaque
/// attribute, never inferred from data.
pub fn load_gender_metadata(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, String>, ProtocolError> {
    let (name, lines) = open_lines(path)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(ProtocolError::Parse {
                file: name.clone(),
                line: idx + 1,
                reason: format!(
                    "expected `<speaker-id> <gender>`, got {} fields",
                    fields.len()
                ),
            });
        }
        out.insert(fields[0].to_string(), fields[1].to_string());
    }
    Ok(out)
}

/// Expected trial counts (the published per-dataset totals) for sanity
/// checking a parsed list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpectedCounts {
    pub target: Option<usize>,
    pub nontarget: Option<usize>,
}

impl ExpectedCounts {
    /// Parse `target <n>` / `nontarget <n>` lines.
    pub fn from_lines<S: AsRef<str>>(file: &str, lines: &[S]) -> Result<Self, ProtocolError> {
        let mut out = Self::default();
        for (idx, raw) in lines.iter().enumerate() {
            let line = raw.as_ref().trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let value: usize =
                it.next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| ProtocolError::Parse {
                        file: file.to_string(),
                        line: idx + 1,
                        reason: "expected `<label> <count>`".into(),
                    })?;
            match key {
                "target" => out.target = Some(value),
                "nontarget" => out.nontarget = Some(value),
                other => {
                    return Err(ProtocolError::Parse {
                        file: file.to_string(),
                        line: idx + 1,
                        reason: format!("unknown count label {other:?}"),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProtocolError> {
        let (name, lines) = open_lines(path)?;
        Self::from_lines(&name, &lines)
    }

    /// Human-readable discrepancies; empty when the list matches.
    pub fn check(&self, trials: &TrialList) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(want) = self.target {
            let got = trials.count(TrialLabel::Target);
            if got != want {
                out.push(format!("target trials: expected {want}, found {got}"));
            }
        }
        if let Some(want) = self.nontarget {
            let got = trials.count(TrialLabel::Nontarget);
            if got != want {
                out.push(format!("nontarget trials: expected {want}, found {got}"));
            }
        }
        out
    }
}

const RECONCILE_LIST_CAP: usize = 10;

fn cap_list(mut pairs: Vec<String>) -> Vec<String> {
    pairs.sort();
    if pairs.len() > RECONCILE_LIST_CAP {
        let extra = pairs.len() - RECONCILE_LIST_CAP;
        pairs.truncate(RECONCILE_LIST_CAP);
        pairs.push(format!("... and {extra} more"));
    }
    pairs
}

/// Partition a score file's rows into target/impostor lists per the trial
/// labels. Every trial must have exactly one score row and vice versa.
pub fn score_trials_from_lines<S: AsRef<str>>(
    file: &str,
    lines: &[S],
    trials: &TrialList,
) -> Result<ScoreSet, ProtocolError> {
    let mut scores: HashMap<(String, String), f64> = HashMap::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = raw.as_ref().trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(ProtocolError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: format!(
                    "expected `<enroll> <test> <score>`, got {} fields",
                    fields.len()
                ),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| ProtocolError::Parse {
            file: file.to_string(),
            line: idx + 1,
            reason: format!("bad score {:?}", fields[2]),
        })?;
        let key = (fields[0].to_string(), fields[1].to_string());
        if scores.insert(key.clone(), value).is_some() {
            return Err(ProtocolError::DuplicateScore {
                enroll: key.0,
                test: key.1,
            });
        }
    }

    let mut target = Vec::new();
    let mut impostor = Vec::new();
    let mut missing = Vec::new();
    for entry in &trials.entries {
        let key = (entry.enroll.clone(), entry.test.clone());
        match scores.remove(&key) {
            Some(v) => match entry.label {
                TrialLabel::Target => target.push(v),
                TrialLabel::Nontarget => impostor.push(v),
            },
            None => missing.push(format!("({}, {})", entry.enroll, entry.test)),
        }
    }
    let extra: Vec<String> = scores.keys().map(|(e, t)| format!("({e}, {t})")).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ProtocolError::Reconciliation {
            missing: cap_list(missing),
            extra: cap_list(extra),
        });
    }
    Ok(ScoreSet::new(target, impostor)?)
}

pub fn score_trials(path: impl AsRef<Path>, trials: &TrialList) -> Result<ScoreSet, ProtocolError> {
    let (name, lines) = open_lines(path)?;
    score_trials_from_lines(&name, &lines, trials)
}

/// Which side of the verification game an utterance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubsetTag {
    Enrollment,
    Trial,
}

impl fmt::Display for SubsetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsetTag::Enrollment => "enrollment",
            SubsetTag::Trial => "trial",
        })
    }
}

impl std::str::FromStr for SubsetTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "enrollment" => Ok(SubsetTag::Enrollment),
            "trial" => Ok(SubsetTag::Trial),
            other => Err(format!(
                "unknown subset tag {other:?} (want enrollment|trial)"
            )),
        }
    }
}

/// One line of a pseudo-speaker mapping: which pseudo identity an utterance
/// was converted into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRecord {
    pub utterance: String,
    pub speaker: String,
    pub tag: SubsetTag,
    pub pseudo: String,
}

/// Parse `<utt-id> <speaker-id> <tag> <pseudo-id>` lines.
pub fn mapping_from_lines<S: AsRef<str>>(
    file: &str,
    lines: &[S],
) -> Result<Vec<MappingRecord>, ProtocolError> {
    let mut out = Vec::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = raw.as_ref().trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ProtocolError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let tag: SubsetTag = fields[2].parse().map_err(|reason| ProtocolError::Parse {
            file: file.to_string(),
            line: idx + 1,
            reason,
        })?;
        out.push(MappingRecord {
            utterance: fields[0].to_string(),
            speaker: fields[1].to_string(),
            tag,
            pseudo: fields[3].to_string(),
        });
    }
    Ok(out)
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<Vec<MappingRecord>, ProtocolError> {
    let (name, lines) = open_lines(path)?;
    mapping_from_lines(&name, &lines)
}

/// A broken speaker-to-speaker consistency rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleViolation {
    /// Rule 1: utterances of one (speaker, tag) map to several pseudo ids.
    InconsistentPseudo {
        speaker: String,
        tag: SubsetTag,
        pseudos: Vec<String>,
    },
    /// Rule 2: one pseudo id is shared by several speakers within a tag.
    SharedPseudo {
        tag: SubsetTag,
        pseudo: String,
        speakers: Vec<String>,
    },
    /// Rule 3: a speaker keeps the same pseudo id across enrollment and trial.
    ReusedAcrossTags { speaker: String, pseudo: String },
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleViolation::InconsistentPseudo {
                speaker,
                tag,
                pseudos,
            } => write!(
                f,
                "rule 1: speaker {speaker} maps to multiple pseudo-speakers in the {tag} set: {pseudos:?}"
            ),
            RuleViolation::SharedPseudo {
                tag,
                pseudo,
                speakers,
            } => write!(
                f,
                "rule 2: pseudo-speaker {pseudo} is shared by speakers {speakers:?} in the {tag} set"
            ),
            RuleViolation::ReusedAcrossTags { speaker, pseudo } => write!(
                f,
                "rule 3: speaker {speaker} has the same pseudo-speaker {pseudo} in enrollment and trial sets"
            ),
        }
    }
}

/// Outcome of the consistency validation; empty means compliant.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<RuleViolation>,
}

impl ValidationReport {
    pub fn is_compliant(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the three speaker-to-speaker anonymization rules:
/// (1) within a (speaker, tag) all utterances share one pseudo id,
/// (2) within a tag distinct speakers get distinct pseudo ids,
/// (3) each speaker's enrollment pseudo differs from its trial pseudo.
/// Speakers present in only one tag satisfy rule 3 vacuously.
pub fn validate_pseudo_mapping(records: &[MappingRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();

    // rule 1
    let mut per_speaker_tag: BTreeMap<(String, SubsetTag), BTreeSet<String>> = BTreeMap::new();
    for r in records {
        per_speaker_tag
            .entry((r.speaker.clone(), r.tag))
            .or_default()
            .insert(r.pseudo.clone());
    }
    for ((speaker, tag), pseudos) in &per_speaker_tag {
        if pseudos.len() > 1 {
            report.violations.push(RuleViolation::InconsistentPseudo {
                speaker: speaker.clone(),
                tag: *tag,
                pseudos: pseudos.iter().cloned().collect(),
            });
        }
    }

    // rule 2
    let mut per_tag_pseudo: BTreeMap<(SubsetTag, String), BTreeSet<String>> = BTreeMap::new();
    for r in records {
        per_tag_pseudo
            .entry((r.tag, r.pseudo.clone()))
            .or_default()
            .insert(r.speaker.clone());
    }
    for ((tag, pseudo), speakers) in &per_tag_pseudo {
        if speakers.len() > 1 {
            report.violations.push(RuleViolation::SharedPseudo {
                tag: *tag,
                pseudo: pseudo.clone(),
                speakers: speakers.iter().cloned().collect(),
            });
        }
    }

    // rule 3
    let mut speakers: BTreeSet<&String> = BTreeSet::new();
    for r in records {
        speakers.insert(&r.speaker);
    }
    for speaker in speakers {
        let enroll = per_speaker_tag.get(&(speaker.clone(), SubsetTag::Enrollment));
        let trial = per_speaker_tag.get(&(speaker.clone(), SubsetTag::Trial));
        if let (Some(e), Some(t)) = (enroll, trial) {
            for shared in e.intersection(t) {
                report.violations.push(RuleViolation::ReusedAcrossTags {
                    speaker: speaker.clone(),
                    pseudo: shared.clone(),
                });
            }
        }
    }

    report
}
