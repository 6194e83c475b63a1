//! Signal-level anonymization by pole-angle warping.
//!
//! Each frame is LPC-analyzed, the prediction residual is set aside, the
//! filter poles are found, and every conjugate pole pair has its angle
//! raised to the power alpha (real poles stay put). The warped poles become
//! a new filter, the retained residual is pushed through it, and frames are
//! overlap-added back into a waveform. Angles near 0/pi and moduli above the
//! stability clamp are pinned so the synthesis filter can never blow up.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{
    self, frame_signal, overlap_add, AudioBuffer, FramePlan, FramingError, WavError, WindowKind,
};
use crate::lpc::{self, LpcAnalysis, LpcError, PoleSet};

/// Transformed angles are pinned inside `(ANGLE_EPSILON, pi - ANGLE_EPSILON)`
/// so a warped pair can never collapse onto the real axis or flip sign.
pub const ANGLE_EPSILON: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum McAdamsError {
    #[error("invalid parameter {name}: {reason}")]
    BadParam { name: &'static str, reason: String },
    #[error("frame {index}: {source}")]
    Frame { index: usize, source: LpcError },
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("cannot create output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Knobs for the pole-warping anonymizer.
///
/// `alpha = 1` is the identity transform. The `rng_seed` is reserved for a
/// randomized-alpha extension and unused by the deterministic default path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McAdamsParams {
    pub alpha: f64,
    pub lpc_order: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
    /// Maximum pole modulus after the transform.
    pub stability_clamp: f64,
    /// Optional pre-emphasis coefficient; the inverse de-emphasis filter is
    /// applied after resynthesis.
    pub pre_emphasis: Option<f64>,
    pub rng_seed: u64,
}

impl Default for McAdamsParams {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            lpc_order: 20,
            frame_ms: 20.0,
            hop_ms: 10.0,
            window: WindowKind::Hann,
            stability_clamp: 0.998,
            pre_emphasis: None,
            rng_seed: 0,
        }
    }
}

impl McAdamsParams {
    pub fn validate(&self) -> Result<(), McAdamsError> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(McAdamsError::BadParam {
                name: "alpha",
                reason: format!("must be a positive finite number, got {}", self.alpha),
            });
        }
        if self.lpc_order == 0 {
            return Err(McAdamsError::BadParam {
                name: "lpc_order",
                reason: "must be >= 1".into(),
            });
        }
        let geometry_ok = self.frame_ms > 0.0 && self.hop_ms > 0.0 && self.hop_ms <= self.frame_ms;
        if !geometry_ok || !self.frame_ms.is_finite() || !self.hop_ms.is_finite() {
            return Err(McAdamsError::BadParam {
                name: "frame_ms/hop_ms",
                reason: format!(
                    "need 0 < hop <= frame, got frame {} ms, hop {} ms",
                    self.frame_ms, self.hop_ms
                ),
            });
        }
        if !(self.stability_clamp > 0.0 && self.stability_clamp < 1.0) {
            return Err(McAdamsError::BadParam {
                name: "stability_clamp",
                reason: format!("must lie in (0, 1), got {}", self.stability_clamp),
            });
        }
        if let Some(c) = self.pre_emphasis {
            if !(0.0..1.0).contains(&c) {
                return Err(McAdamsError::BadParam {
                    name: "pre_emphasis",
                    reason: format!("must lie in [0, 1), got {c}"),
                });
            }
        }
        Ok(())
    }

    pub fn frame_plan(&self, sample_rate: u32) -> Result<FramePlan, McAdamsError> {
        let frame_len = ((self.frame_ms / 1000.0) * sample_rate as f64).round() as usize;
        let hop = ((self.hop_ms / 1000.0) * sample_rate as f64).round() as usize;
        if frame_len <= self.lpc_order {
            return Err(McAdamsError::BadParam {
                name: "frame_ms",
                reason: format!(
                    "frame of {frame_len} samples at {sample_rate} Hz cannot support LPC order {}",
                    self.lpc_order
                ),
            });
        }
        FramePlan::new(frame_len, hop.max(1), self.window).map_err(McAdamsError::from)
    }
}

/// How often the stability guards fired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampCounts {
    pub angle: usize,
    pub modulus: usize,
}

impl ClampCounts {
    fn add(&mut self, other: ClampCounts) {
        self.angle += other.angle;
        self.modulus += other.modulus;
    }
}

/// Warp pole angles by `phi -> phi^alpha`.
///
/// Real-valued poles pass through untouched (up to the modulus clamp). For
/// each conjugate pair the upper-half representative with angle in (0, pi)
/// is warped and its partner mirrored, so closure is preserved exactly.
pub fn transform_poles(
    poles: &PoleSet,
    alpha: f64,
    stability_clamp: f64,
) -> (PoleSet, ClampCounts) {
    let mut counts = ClampCounts::default();
    let mut out: Vec<Complex64> = Vec::with_capacity(poles.len());
    for rep in poles.representatives() {
        let mut radius = rep.norm();
        if radius > stability_clamp {
            radius = stability_clamp;
            counts.modulus += 1;
        }
        if rep.im == 0.0 {
            out.push(Complex64::new(radius * rep.re.signum(), 0.0));
            continue;
        }
        let angle = rep.arg(); // in (0, pi) for an upper-half pole
        let mut warped = angle.powf(alpha);
        let clamped = warped.clamp(ANGLE_EPSILON, std::f64::consts::PI - ANGLE_EPSILON);
        if clamped != warped {
            counts.angle += 1;
            warped = clamped;
        }
        let pole = Complex64::from_polar(radius, warped);
        out.push(pole);
        out.push(pole.conj());
    }
    (
        PoleSet::new(out).expect("mirrored pole set is conjugate-closed"),
        counts,
    )
}

/// Result of anonymizing one frame.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub samples: Vec<f64>,
    pub silent: bool,
    pub clamps: ClampCounts,
}

/// LPC analysis, pole warp, and resynthesis of a single (windowed) frame.
/// Silent frames pass through unmodified.
pub fn anonymize_frame(frame: &[f64], params: &McAdamsParams) -> Result<FrameOutcome, LpcError> {
    let analysis = lpc::lpc_analyze(frame, params.lpc_order)?;
    let model = match analysis {
        LpcAnalysis::Degenerate => {
            return Ok(FrameOutcome {
                samples: frame.to_vec(),
                silent: true,
                clamps: ClampCounts::default(),
            })
        }
        LpcAnalysis::Model(m) => m,
    };
    let residual = lpc::inverse_filter(frame, &model);
    let poles = lpc::find_poles(&model)?;
    let (warped, clamps) = transform_poles(&poles, params.alpha, params.stability_clamp);
    let new_model = lpc::poles_to_coeffs(&warped);
    let samples = lpc::synthesis_filter(&residual, &new_model, &[])?;
    Ok(FrameOutcome {
        samples,
        silent: false,
        clamps,
    })
}

/// Per-buffer processing statistics.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AnonymizeStats {
    pub frames: usize,
    pub silent_frames: usize,
    pub clamps: ClampCounts,
}

/// Anonymize a whole buffer: frame, warp each frame, overlap-add.
///
/// The signal is zero-padded by one frame on each side before framing so the
/// overlap-add window envelope fully covers the original extent; the output
/// is trimmed back to the input length.
pub fn anonymize_buffer(
    buffer: &AudioBuffer,
    params: &McAdamsParams,
) -> Result<(AudioBuffer, AnonymizeStats), McAdamsError> {
    params.validate()?;
    let plan = params.frame_plan(buffer.sample_rate)?;
    let mut signal = buffer.samples.clone();
    if let Some(c) = params.pre_emphasis {
        for n in (1..signal.len()).rev() {
            signal[n] -= c * signal[n - 1];
        }
    }
    let mut padded = vec![0.0; plan.frame_len];
    padded.extend_from_slice(&signal);
    padded.resize(padded.len() + plan.frame_len, 0.0);

    let frames = frame_signal(&padded, &plan);
    let mut stats = AnonymizeStats {
        frames: frames.len(),
        ..Default::default()
    };
    let mut processed = Vec::with_capacity(frames.len());
    for (index, frame) in frames.iter().enumerate() {
        let outcome = anonymize_frame(frame, params)
            .map_err(|source| McAdamsError::Frame { index, source })?;
        if outcome.silent {
            stats.silent_frames += 1;
        }
        stats.clamps.add(outcome.clamps);
        processed.push(outcome.samples);
    }
    let ola = overlap_add(&processed, &plan)?;
    let mut out: Vec<f64> = ola[plan.frame_len..plan.frame_len + buffer.len()].to_vec();
    if let Some(c) = params.pre_emphasis {
        for n in 1..out.len() {
            let prev = out[n - 1];
            out[n] += c * prev;
        }
    }
    if let Some(idx) = out.iter().position(|v| !v.is_finite()) {
        return Err(McAdamsError::Frame {
            index: idx / plan.hop.max(1),
            source: LpcError::NotPositiveDefinite { stage: 0 },
        });
    }
    Ok((
        AudioBuffer {
            samples: out,
            sample_rate: buffer.sample_rate,
        },
        stats,
    ))
}

/// One corpus entry: utterance id plus the path of its WAV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub path: PathBuf,
}

/// Parse a manifest of `<utterance-id> <wav-path>` lines. `#` starts a
/// comment; blank lines are skipped; the path may contain spaces.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, McAdamsError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| McAdamsError::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| McAdamsError::Manifest {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, wav)) = line.split_once(char::is_whitespace) else {
            return Err(McAdamsError::Manifest {
                path: path.to_path_buf(),
                reason: format!("line {}: expected `<utterance-id> <wav-path>`", lineno + 1),
            });
        };
        entries.push(ManifestEntry {
            utterance_id: id.to_string(),
            path: PathBuf::from(wav.trim()),
        });
    }
    Ok(entries)
}

/// Per-file outcome inside a corpus run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileReport {
    pub utterance_id: String,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub clipped_samples: usize,
    pub stats: Option<AnonymizeStats>,
}

/// Batch summary: effective parameters plus one record per input file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusReport {
    pub params: McAdamsParams,
    pub processed: usize,
    pub failed: usize,
    pub clipped_samples: usize,
    pub files: Vec<FileReport>,
}

fn anonymize_one(entry: &ManifestEntry, params: &McAdamsParams, out_dir: &Path) -> FileReport {
    let mut report = FileReport {
        utterance_id: entry.utterance_id.clone(),
        input: entry.path.clone(),
        output: None,
        ok: false,
        error: None,
        clipped_samples: 0,
        stats: None,
    };
    let file_name = match entry.path.file_name() {
        Some(n) => n.to_owned(),
        None => {
            report.error = Some("input path has no file name".into());
            return report;
        }
    };
    let out_path = out_dir.join(file_name);
    let result = audio::read_wav(&entry.path)
        .map_err(McAdamsError::from)
        .and_then(|buf| anonymize_buffer(&buf, params))
        .and_then(|(anon, stats)| {
            let write = audio::write_wav(&anon, &out_path)?;
            Ok((stats, write))
        });
    match result {
        Ok((stats, write)) => {
            report.ok = true;
            report.output = Some(out_path);
            report.clipped_samples = write.clipped;
            report.stats = Some(stats);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Anonymize every manifest entry into `out_dir`, preserving file names.
///
/// Per-file errors are recorded and the batch continues; identical inputs
/// and parameters produce bit-identical outputs regardless of `jobs`.
pub fn anonymize_corpus(
    entries: &[ManifestEntry],
    params: &McAdamsParams,
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<CorpusReport, McAdamsError> {
    params.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| McAdamsError::OutputDir {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let jobs = jobs.max(1).min(entries.len().max(1));
    let reports: Vec<FileReport> = if jobs <= 1 {
        entries
            .iter()
            .map(|e| anonymize_one(e, params, out_dir))
            .collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<FileReport>>> =
            entries.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= entries.len() {
                        break;
                    }
                    let report = anonymize_one(&entries[i], params, out_dir);
                    *slots[i].lock().unwrap() = Some(report);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().unwrap().expect("every slot filled"))
            .collect()
    };

    let processed = reports.iter().filter(|r| r.ok).count();
    let failed = reports.len() - processed;
    let clipped_samples = reports.iter().map(|r| r.clipped_samples).sum();
    Ok(CorpusReport {
        params: params.clone(),
        processed,
        failed,
        clipped_samples,
        files: reports,
    })
}
