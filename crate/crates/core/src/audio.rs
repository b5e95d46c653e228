//! The mono sample buffer that flows between every pipeline stage.

use crate::error::{Error, Result};

/// Mono audio with its provenance.
///
/// Samples are kept in `[-1, 1]`; constructors reject anything else
/// (including NaN) so downstream stages never have to re-check.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
    source_id: String,
    offset_s: f64,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32, source_id: impl Into<String>) -> Result<Self> {
        Self::with_offset(samples, sample_rate_hz, source_id, 0.0)
    }

    pub fn with_offset(
        samples: Vec<f32>,
        sample_rate_hz: u32,
        source_id: impl Into<String>,
        offset_s: f64,
    ) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if !(offset_s.is_finite() && offset_s >= 0.0) {
            return Err(Error::Validation(format!("offset {offset_s} must be a non-negative real")));
        }
        if let Some(i) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::Validation(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_id: source_id.into(),
            offset_s,
        })
    }

    /// Builds a clip, clamping out-of-range samples. NaN becomes 0.
    pub fn from_clamped(samples: Vec<f32>, sample_rate_hz: u32, source_id: impl Into<String>) -> Result<Self> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self::new(samples, sample_rate_hz, source_id)
    }

    pub fn silence(duration_s: f64, sample_rate_hz: u32, source_id: impl Into<String>) -> Result<Self> {
        let n = (duration_s * sample_rate_hz as f64).round() as usize;
        Self::new(vec![0.0; n], sample_rate_hz, source_id)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn offset_s(&self) -> f64 {
        self.offset_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Sub-range `[start, end)` in samples, keeping provenance.
    pub fn slice(&self, start: usize, end: usize) -> AudioClip {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        AudioClip {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            source_id: self.source_id.clone(),
            offset_s: self.offset_s + start as f64 / self.sample_rate_hz as f64,
        }
    }

    /// Same provenance, different samples (already validated by the caller's constructor path).
    pub fn replace_samples(&self, samples: Vec<f32>, sample_rate_hz: u32) -> Result<AudioClip> {
        Self::with_offset(samples, sample_rate_hz, self.source_id.clone(), self.offset_s)
    }

    /// Resamples to `target_rate_hz`. Identity (bit-exact) when the rates match.
    pub fn resampled(&self, target_rate_hz: u32) -> Result<AudioClip> {
        if target_rate_hz == 0 {
            return Err(Error::Validation("target rate must be positive".into()));
        }
        if target_rate_hz == self.sample_rate_hz {
            return Ok(self.clone());
        }
        let samples = resample_linear(&self.samples, self.sample_rate_hz, target_rate_hz);
        Self::with_offset(samples, target_rate_hz, self.source_id.clone(), self.offset_s)
    }
}

/// Linear-interpolation resampler. Output length is `round(n · to / from)`.
pub fn resample_linear(input: &[f32], from_hz: u32, to_hz: u32) -> Vec<f32> {
    if from_hz == to_hz || input.is_empty() {
        return input.to_vec();
    }
    let out_len = (input.len() as f64 * to_hz as f64 / from_hz as f64).round() as usize;
    let step = from_hz as f64 / to_hz as f64;
    let last = input.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let idx = pos.floor() as usize;
            if idx >= last {
                return input[last];
            }
            let frac = (pos - idx as f64) as f32;
            let v = input[idx] + (input[idx + 1] - input[idx]) * frac;
            v.clamp(-1.0, 1.0)
        })
        .collect()
}

/// Arithmetic mean of channels. Channels shorter than the longest are zero-padded.
pub fn downmix_mean(channels: &[Vec<f32>]) -> Vec<f32> {
    match channels {
        [] => Vec::new(),
        [mono] => mono.clone(),
        _ => {
            let len = channels.iter().map(Vec::len).max().unwrap_or(0);
            let scale = 1.0 / channels.len() as f32;
            (0..len)
                .map(|i| {
                    let sum: f32 = channels.iter().map(|c| c.get(i).copied().unwrap_or(0.0)).sum();
                    (sum * scale).clamp(-1.0, 1.0)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_nan() {
        assert!(AudioClip::new(vec![0.0, 1.5], 16000, "s").is_err());
        assert!(AudioClip::new(vec![f32::NAN], 16000, "s").is_err());
        assert!(AudioClip::new(vec![0.1], 0, "s").is_err());
        assert!(AudioClip::new(vec![], 16000, "s").is_ok());
    }

    #[test]
    fn duration_is_len_over_rate() {
        let c = AudioClip::silence(2.5, 24000, "s").unwrap();
        assert_eq!(c.len(), 60000);
        assert!((c.duration_s() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn resample_identity_is_bit_exact() {
        let c = AudioClip::new(vec![0.25, -0.5, 0.125], 24000, "s").unwrap();
        assert_eq!(c.resampled(24000).unwrap(), c);
    }

    #[test]
    fn resample_length() {
        let x = vec![0.0; 44100];
        assert_eq!(resample_linear(&x, 44100, 24000).len(), 24000);
        assert_eq!(resample_linear(&x[..441], 44100, 16000).len(), 160);
    }

    #[test]
    fn downmix_is_mean() {
        let m = downmix_mean(&[vec![0.5, 1.0], vec![-0.5, 0.0]]);
        assert_eq!(m, vec![0.0, 0.5]);
    }

    #[test]
    fn slice_tracks_offset() {
        let c = AudioClip::silence(1.0, 100, "s").unwrap();
        let s = c.slice(50, 80);
        assert_eq!(s.len(), 30);
        assert!((s.offset_s() - 0.5).abs() < 1e-12);
    }
}
