//! Minimal RIFF/WAVE reader and writer: 16-bit signed PCM, mono.
//!
//! Exactly one encoding is accepted; anything else is rejected with the
//! offending header field named, so batch failures are diagnosable.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::AudioBuffer;

const PCM_FORMAT_CODE: u16 = 1;
const SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a RIFF/WAVE file (bad {field} marker)")]
    BadMagic { field: &'static str },
    #[error("truncated file while reading {context}")]
    Truncated { context: &'static str },
    #[error("unsupported {field}: {value} (need 16-bit signed PCM, mono)")]
    Unsupported { field: &'static str, value: u32 },
    #[error("missing {chunk} chunk")]
    MissingChunk { chunk: &'static str },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
}

/// What `write_wav` did to the data on the way out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteStats {
    /// Samples outside `[-1, 1]` that were clipped to full scale.
    pub clipped: usize,
}

fn take<'a>(
    buf: &'a [u8],
    pos: &mut usize,
    n: usize,
    context: &'static str,
) -> Result<&'a [u8], WavError> {
    if *pos + n > buf.len() {
        return Err(WavError::Truncated { context });
    }
    let out = &buf[*pos..*pos + n];
    *pos += n;
    Ok(out)
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Decode a 16-bit PCM mono WAV from raw bytes, scaling samples by 1/32768.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, WavError> {
    let mut pos = 0usize;
    if take(bytes, &mut pos, 4, "RIFF header")? != b"RIFF" {
        return Err(WavError::BadMagic { field: "RIFF" });
    }
    take(bytes, &mut pos, 4, "RIFF size")?;
    if take(bytes, &mut pos, 4, "WAVE header")? != b"WAVE" {
        return Err(WavError::BadMagic { field: "WAVE" });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos < bytes.len() {
        let id: [u8; 4] = take(bytes, &mut pos, 4, "chunk id")?.try_into().unwrap();
        let size = u32_le(take(bytes, &mut pos, 4, "chunk size")?) as usize;
        let body = take(bytes, &mut pos, size, "chunk body")?;
        match &id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(WavError::Truncated {
                        context: "fmt chunk",
                    });
                }
                fmt = Some((
                    u16_le(&body[0..2]),
                    u16_le(&body[2..4]),
                    u32_le(&body[4..8]),
                    u16_le(&body[14..16]),
                ));
            }
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {} // skip ancillary chunks (LIST, fact, ...)
        }
        if size % 2 == 1 {
            // chunk bodies are word-aligned
            let _ = take(bytes, &mut pos, 1, "chunk padding")?;
        }
    }

    let (format, channels, sample_rate, bits) =
        fmt.ok_or(WavError::MissingChunk { chunk: "fmt " })?;
    if format != PCM_FORMAT_CODE {
        return Err(WavError::Unsupported {
            field: "audio_format",
            value: format as u32,
        });
    }
    if channels != 1 {
        return Err(WavError::Unsupported {
            field: "channels",
            value: channels as u32,
        });
    }
    if bits != 16 {
        return Err(WavError::Unsupported {
            field: "bits_per_sample",
            value: bits as u32,
        });
    }
    if sample_rate == 0 {
        return Err(WavError::Unsupported {
            field: "sample_rate",
            value: 0,
        });
    }
    let data = data.ok_or(WavError::MissingChunk { chunk: "data" })?;
    if data.len() % 2 != 0 {
        return Err(WavError::Truncated {
            context: "data chunk",
        });
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / SCALE)
        .collect();
    Ok(AudioBuffer {
        samples,
        sample_rate,
    })
}

/// Read a 16-bit PCM mono WAV file into a normalized buffer.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_wav(&bytes)
}

/// Encode a buffer as 16-bit PCM mono WAV bytes.
///
/// Samples outside `[-1, 1]` are clipped to full scale and counted.
pub fn encode_wav(buffer: &AudioBuffer) -> Result<(Vec<u8>, WriteStats), WavError> {
    let mut stats = WriteStats::default();
    let mut pcm = Vec::with_capacity(buffer.samples.len() * 2);
    for (index, &s) in buffer.samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(WavError::NonFiniteSample { index });
        }
        if !(-1.0..=1.0).contains(&s) {
            stats.clipped += 1;
        }
        let q = (s * SCALE).round().clamp(-32768.0, 32767.0) as i16;
        pcm.extend_from_slice(&q.to_le_bytes());
    }

    let data_len = pcm.len() as u32;
    let mut out = Vec::with_capacity(44 + pcm.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_CODE.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(&pcm);
    Ok((out, stats))
}

/// Write a buffer to disk as 16-bit PCM mono, reporting the clip count.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<WriteStats, WavError> {
    let (bytes, stats) = encode_wav(buffer)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference WAV builder, independent of `encode_wav`: arbitrary format
    /// code, channel count and bit depth, raw sample bytes passed through.
    fn build_wav(format: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let byte_rate = rate * channels as u32 * (bits as u32 / 8);
        out.extend_from_slice(&byte_rate.to_le_bytes());
        out.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn fixed_point_scaling() {
        let mut data = Vec::new();
        for v in [0i16, 16384, -32768] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        let wav = build_wav(1, 1, 16000, 16, &data);
        let buf = decode_wav(&wav).unwrap();
        assert_eq!(buf.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(buf.sample_rate, 16000);
    }

    #[test]
    fn empty_data_chunk_is_ok() {
        let wav = build_wav(1, 1, 8000, 16, &[]);
        let buf = decode_wav(&wav).unwrap();
        assert!(buf.samples.is_empty());
        assert_eq!(buf.sample_rate, 8000);
    }

    #[test]
    fn rejects_24_bit() {
        let wav = build_wav(1, 1, 16000, 24, &[0, 0, 0]);
        match decode_wav(&wav) {
            Err(WavError::Unsupported { field, value }) => {
                assert_eq!(field, "bits_per_sample");
                assert_eq!(value, 24);
            }
            other => panic!("expected bits_per_sample rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_stereo_and_float() {
        let wav = build_wav(1, 2, 16000, 16, &[0, 0, 0, 0]);
        assert!(matches!(
            decode_wav(&wav),
            Err(WavError::Unsupported {
                field: "channels",
                value: 2
            })
        ));
        let wav = build_wav(3, 1, 16000, 32, &[0; 4]);
        assert!(matches!(
            decode_wav(&wav),
            Err(WavError::Unsupported {
                field: "audio_format",
                value: 3
            })
        ));
    }

    #[test]
    fn rejects_truncated() {
        let wav = build_wav(1, 1, 16000, 16, &[0, 0, 0, 0]);
        assert!(matches!(
            decode_wav(&wav[..wav.len() - 2]),
            Err(WavError::Truncated { .. })
        ));
    }

    #[test]
    fn clipping_counted() {
        let buf = AudioBuffer::new(vec![0.25, 1.7, -0.5], 16000).unwrap();
        let (bytes, stats) = encode_wav(&buf).unwrap();
        assert_eq!(stats.clipped, 1);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back.samples[1], 32767.0 / 32768.0);
    }

    #[test]
    fn empty_buffer_round_trips() {
        let buf = AudioBuffer::new(vec![], 44100).unwrap();
        let (bytes, stats) = encode_wav(&buf).unwrap();
        assert_eq!(stats.clipped, 0);
        let back = decode_wav(&bytes).unwrap();
        assert!(back.samples.is_empty());
        assert_eq!(back.sample_rate, 44100);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let buf = AudioBuffer::new(vec![0.0, 0.5, -0.25, 0.999], 16000).unwrap();
        write_wav(&buf, &path).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    proptest! {
        #[test]
        fn quantization_round_trip(samples in proptest::collection::vec(-1.0f64..1.0, 0..256), rate in 1u32..96000) {
            let buf = AudioBuffer::new(samples.clone(), rate).unwrap();
            let (bytes, stats) = encode_wav(&buf).unwrap();
            prop_assert_eq!(stats.clipped, 0);
            let back = decode_wav(&bytes).unwrap();
            prop_assert_eq!(back.sample_rate, rate);
            prop_assert_eq!(back.samples.len(), samples.len());
            for (a, b) in samples.iter().zip(&back.samples) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0, "sample {} -> {}", a, b);
            }
        }
    }
}
