//! Mono PCM buffers, WAV I/O, framing and overlap-add reconstruction.

mod wav;

pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavError, WriteStats};

use thiserror::Error;

/// Mono audio: samples (nominally in `[-1, 1]`) plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

#[derive(Debug, Error)]
pub enum FramingError {
    #[error("invalid frame plan: {0}")]
    InvalidPlan(String),
    #[error("frame {index} has length {got}, expected {expected}")]
    FrameLengthMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("overlap-add needs at least one frame")]
    NoFrames,
}

impl AudioBuffer {
    /// Build a buffer, rejecting non-finite samples and a zero sample rate.
    ///
    /// Values outside `[-1, 1]` are allowed here; they only get clipped (and
    /// counted) when written to 16-bit PCM.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, WavError> {
        if sample_rate == 0 {
            return Err(WavError::Unsupported {
                field: "sample_rate",
                value: 0,
            });
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(WavError::NonFiniteSample { index: pos });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    Hann,
}

impl WindowKind {
    /// Window coefficients of the given length (symmetric Hann).
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann => {
                if len <= 1 {
                    return vec![1.0; len];
                }
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / denom).cos()))
                    .collect()
            }
        }
    }
}

/// Frame geometry: frame length, hop and analysis window, all in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePlan {
    pub frame_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

/// Positions where the summed window envelope is smaller than this are
/// emitted as silence instead of being divided by a vanishing value.
pub const ENVELOPE_FLOOR: f64 = 1e-8;

impl FramePlan {
    pub fn new(frame_len: usize, hop: usize, window: WindowKind) -> Result<Self, FramingError> {
        if frame_len == 0 {
            return Err(FramingError::InvalidPlan("frame_len must be > 0".into()));
        }
        if hop == 0 || hop > frame_len {
            return Err(FramingError::InvalidPlan(format!(
                "hop must satisfy 0 < hop <= frame_len (hop {hop}, frame_len {frame_len})"
            )));
        }
        Ok(Self {
            frame_len,
            hop,
            window,
        })
    }

    /// Number of frames covering `len` samples: `ceil((len - frame_len)/hop) + 1`,
    /// and a single (zero-padded) frame for anything shorter than one frame.
    pub fn num_frames(&self, len: usize) -> usize {
        if len <= self.frame_len {
            1
        } else {
            (len - self.frame_len).div_ceil(self.hop) + 1
        }
    }

    /// Length of the overlap-add output for `n` frames.
    pub fn ola_len(&self, num_frames: usize) -> usize {
        (num_frames - 1) * self.hop + self.frame_len
    }
}

/// Slice a signal into windowed frames. Frame `i` starts at `i * hop`; the
/// final frame is zero-padded to `frame_len`.
pub fn frame_signal(samples: &[f64], plan: &FramePlan) -> Vec<Vec<f64>> {
    let window = plan.window.coefficients(plan.frame_len);
    let n = plan.num_frames(samples.len());
    (0..n)
        .map(|i| {
            let start = i * plan.hop;
            (0..plan.frame_len)
                .map(|j| {
                    let idx = start + j;
                    if idx < samples.len() {
                        samples[idx] * window[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Overlap-add reconstruction, normalized by the summed analysis-window
/// envelope so that `frame_signal` followed by `overlap_add` is the identity
/// wherever the envelope is non-negligible.
pub fn overlap_add(frames: &[Vec<f64>], plan: &FramePlan) -> Result<Vec<f64>, FramingError> {
    if frames.is_empty() {
        return Err(FramingError::NoFrames);
    }
    for (i, frame) in frames.iter().enumerate() {
        if frame.len() != plan.frame_len {
            return Err(FramingError::FrameLengthMismatch {
                index: i,
                got: frame.len(),
                expected: plan.frame_len,
            });
        }
    }
    let window = plan.window.coefficients(plan.frame_len);
    let out_len = plan.ola_len(frames.len());
    let mut acc = vec![0.0; out_len];
    let mut envelope = vec![0.0; out_len];
    for (i, frame) in frames.iter().enumerate() {
        let start = i * plan.hop;
        for (j, &s) in frame.iter().enumerate() {
            acc[start + j] += s;
            envelope[start + j] += window[j];
        }
    }
    Ok(acc
        .iter()
        .zip(&envelope)
        .map(|(&a, &e)| if e < ENVELOPE_FLOOR { 0.0 } else { a / e })
        .collect())
}
