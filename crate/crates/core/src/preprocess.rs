//! Optional cleanup passes, fixed-length segmentation, and transcoding.

use serde::{Deserialize, Serialize};

use crate::adapters::{Denoiser, StemSeparator, Transcoder};
use crate::audio::AudioClip;
use crate::error::{AdapterError, Error, Result};

/// Segment length used when nothing else is configured.
pub const DEFAULT_SEGMENT_LEN_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    #[default]
    DropLast,
    KeepLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationPolicy {
    pub target_len_s: f64,
    #[serde(default)]
    pub tail: TailPolicy,
    /// Shortest tail kept under [`TailPolicy::KeepLast`].
    #[serde(default)]
    pub min_tail_s: f64,
}

impl Default for SegmentationPolicy {
    fn default() -> Self {
        Self {
            target_len_s: DEFAULT_SEGMENT_LEN_S,
            tail: TailPolicy::DropLast,
            min_tail_s: 0.0,
        }
    }
}

impl SegmentationPolicy {
    pub fn drop_last(target_len_s: f64) -> Self {
        Self {
            target_len_s,
            tail: TailPolicy::DropLast,
            min_tail_s: 0.0,
        }
    }

    pub fn keep_last(target_len_s: f64, min_tail_s: f64) -> Self {
        Self {
            target_len_s,
            tail: TailPolicy::KeepLast,
            min_tail_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_len_s.is_finite() && self.target_len_s > 0.0) {
            return Err(Error::Validation(format!(
                "segment length {} must be positive",
                self.target_len_s
            )));
        }
        if !(self.min_tail_s.is_finite() && self.min_tail_s >= 0.0 && self.min_tail_s < self.target_len_s) {
            return Err(Error::Validation(format!(
                "min_tail_s {} must be in [0, {})",
                self.min_tail_s, self.target_len_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StemModel {
    TwoStems,
    FourStems,
    FiveStems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioFormat {
    WavPcm16,
    Mp3,
}

impl AudioFormat {
    pub fn extension(self) -> &'static str {
        match self {
            AudioFormat::WavPcm16 => "wav",
            AudioFormat::Mp3 => "mp3",
        }
    }

    pub fn has_magic(self, payload: &[u8]) -> bool {
        match self {
            AudioFormat::WavPcm16 => crate::wav::has_wav_magic(payload),
            AudioFormat::Mp3 => {
                payload.starts_with(b"ID3") || (payload.len() >= 2 && payload[0] == 0xFF && payload[1] & 0xE0 == 0xE0)
            }
        }
    }
}

/// An encoded audio file held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedAudio {
    payload: Vec<u8>,
    format: AudioFormat,
    sample_rate_hz: u32,
    duration_s: f64,
}

impl EncodedAudio {
    pub fn new(payload: Vec<u8>, format: AudioFormat, sample_rate_hz: u32, duration_s: f64) -> Result<Self> {
        if payload.is_empty() {
            return Err(Error::Validation("encoded payload is empty".into()));
        }
        if !format.has_magic(&payload) {
            return Err(Error::Validation(format!("payload lacks {format:?} magic bytes")));
        }
        if sample_rate_hz == 0 || !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::Validation(format!(
                "invalid rate {sample_rate_hz} or duration {duration_s}"
            )));
        }
        Ok(Self {
            payload,
            format,
            sample_rate_hz,
            duration_s,
        })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn format(&self) -> AudioFormat {
        self.format
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }
}

fn provenance(clip: &AudioClip) -> String {
    format!("{}@{:.3}s", clip.source_id(), clip.offset_s())
}

fn require_non_empty(clip: &AudioClip, op: &str) -> Result<()> {
    if clip.is_empty() {
        return Err(Error::Precondition(format!("{op} needs a non-empty clip")));
    }
    Ok(())
}

pub fn denoise(clip: &AudioClip, strength: f32, adapter: &dyn Denoiser) -> Result<AudioClip> {
    require_non_empty(clip, "denoise")?;
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::Precondition(format!("denoise strength {strength} outside [0, 1]")));
    }
    let out = adapter
        .denoise(clip, strength)
        .map_err(|e| Error::stage("denoise", provenance(clip), e))?;
    if out.len() != clip.len() || out.sample_rate_hz() != clip.sample_rate_hz() {
        return Err(Error::stage(
            "denoise",
            provenance(clip),
            AdapterError::new(format!(
                "adapter changed length/rate ({} @ {} Hz -> {} @ {} Hz)",
                clip.len(),
                clip.sample_rate_hz(),
                out.len(),
                out.sample_rate_hz()
            )),
        ));
    }
    Ok(out)
}

/// Returns the vocal stem. Stem length is whatever the adapter produces.
pub fn separate_vocals(clip: &AudioClip, stem_model: StemModel, adapter: &dyn StemSeparator) -> Result<AudioClip> {
    require_non_empty(clip, "separate_vocals")?;
    if !adapter.supports(stem_model) {
        return Err(Error::Config(format!("stem adapter does not support {stem_model:?}")));
    }
    let out = adapter
        .vocals(clip, stem_model)
        .map_err(|e| Error::stage("separate_vocals", provenance(clip), e))?;
    if out.sample_rate_hz() != clip.sample_rate_hz() {
        return Err(Error::stage(
            "separate_vocals",
            provenance(clip),
            AdapterError::new("stem adapter changed the sample rate"),
        ));
    }
    Ok(out)
}

/// Number of whole segments of `segment_samples` (fractional) in `n` samples.
fn whole_segments(n: usize, segment_samples: f64) -> usize {
    // The epsilon absorbs representation error when n is an exact multiple.
    (n as f64 / segment_samples + 1e-9).floor() as usize
}

/// Cuts `clip` into consecutive fixed-length pieces.
///
/// Boundary `k` sits at sample `round(k · target_len_s · rate)`, so pieces are
/// contiguous and never drift. Segment `k` carries `offset_s = k · target_len_s`
/// relative to the input's own offset.
pub fn segment(clip: &AudioClip, policy: &SegmentationPolicy) -> Result<Vec<AudioClip>> {
    policy.validate()?;
    let n = clip.len();
    let rate = clip.sample_rate_hz() as f64;
    let seg = policy.target_len_s * rate;
    let boundary = |k: usize| ((k as f64 * seg).round() as usize).min(n);
    let full = whole_segments(n, seg);

    let mut out = Vec::with_capacity(full + 1);
    let piece = |k: usize, start: usize, end: usize| {
        AudioClip::with_offset(
            clip.samples()[start..end].to_vec(),
            clip.sample_rate_hz(),
            clip.source_id(),
            clip.offset_s() + k as f64 * policy.target_len_s,
        )
    };
    for k in 0..full {
        out.push(piece(k, boundary(k), boundary(k + 1))?);
    }
    if policy.tail == TailPolicy::KeepLast {
        let start = boundary(full);
        let rem = n - start;
        if rem > 0 && rem as f64 / rate >= policy.min_tail_s {
            out.push(piece(full, start, n)?);
        }
    }
    Ok(out)
}

pub fn transcode(clip: &AudioClip, format: AudioFormat, codec: &dyn Transcoder) -> Result<EncodedAudio> {
    require_non_empty(clip, "transcode")?;
    let payload = codec
        .encode(clip.samples(), clip.sample_rate_hz(), format)
        .map_err(|e| Error::stage("transcode", provenance(clip), e))?;
    EncodedAudio::new(payload, format, clip.sample_rate_hz(), clip.duration_s())
}

/// Decodes an encoded payload back to a clip tagged with `source_id`.
pub fn decode_encoded(audio: &EncodedAudio, source_id: &str, codec: &dyn Transcoder) -> Result<AudioClip> {
    let (samples, rate) = codec
        .decode(audio.payload(), audio.format())
        .map_err(|e| Error::stage("decode", source_id.to_string(), e))?;
    AudioClip::from_clamped(samples, rate, source_id)
}
