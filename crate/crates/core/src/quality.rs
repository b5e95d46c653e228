//! Corpus checks: edit-distance error rates, per-clip constraints and
//! embedding similarity, collected into a JSON report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::SpeakerEmbedder;
use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Samples quieter than this count as silence.
pub const SILENCE_THRESHOLD: f32 = 1e-4;
pub const DEFAULT_MIN_DURATION_S: f64 = 1.0;
pub const DEFAULT_MAX_DURATION_S: f64 = 15.0;
pub const DEFAULT_MAX_SILENCE_FRACTION: f64 = 0.5;
pub const REPORT_FILE_NAME: &str = "quality_report.json";

/// Unit-cost Levenshtein distance over any comparable sequence.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein over Unicode scalar values divided by the reference length.
/// Can exceed 1 when the hypothesis is longer than the reference.
pub fn character_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(Error::Precondition("CER reference is empty".into()));
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Token-level Levenshtein over whitespace-delimited words.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::Precondition("WER reference has no tokens".into()));
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Cosine similarity.
pub fn speaker_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Precondition(format!(
            "embedding dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Precondition("embedding has zero norm".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Embeds both clips and compares them.
pub fn clip_similarity(a: &AudioClip, b: &AudioClip, embedder: &dyn SpeakerEmbedder) -> Result<f64> {
    let ea = embedder
        .embed(a)
        .map_err(|e| Error::stage("speaker_embedding", a.source_id().to_string(), e))?;
    let eb = embedder
        .embed(b)
        .map_err(|e| Error::stage("speaker_embedding", b.source_id().to_string(), e))?;
    speaker_similarity(&ea, &eb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub severity: Severity,
    pub message: String,
}

impl Issue {
    pub fn new(code: &str, severity: Severity, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            severity,
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.severity, self.code, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipConstraints {
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub required_rate_hz: u32,
    pub max_silence_fraction: f64,
}

impl ClipConstraints {
    /// 1 to 15 s, at most half silence.
    pub fn for_rate(required_rate_hz: u32) -> Self {
        Self {
            min_duration_s: DEFAULT_MIN_DURATION_S,
            max_duration_s: DEFAULT_MAX_DURATION_S,
            required_rate_hz,
            max_silence_fraction: DEFAULT_MAX_SILENCE_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_duration_s > 0.0 && self.min_duration_s < self.max_duration_s && self.max_duration_s.is_finite()) {
            return Err(Error::Validation(format!(
                "clip duration bounds [{}, {}] are not 0 < min < max",
                self.min_duration_s, self.max_duration_s
            )));
        }
        if self.required_rate_hz == 0 {
            return Err(Error::Validation("required_rate_hz is 0".into()));
        }
        if !(0.0..=1.0).contains(&self.max_silence_fraction) {
            return Err(Error::Validation(format!(
                "max_silence_fraction {} outside [0, 1]",
                self.max_silence_fraction
            )));
        }
        Ok(())
    }
}

pub fn silence_fraction(clip: &AudioClip) -> f64 {
    if clip.is_empty() {
        return 1.0;
    }
    let quiet = clip.samples().iter().filter(|s| s.abs() < SILENCE_THRESHOLD).count();
    quiet as f64 / clip.len() as f64
}

/// One issue per violated constraint.
pub fn validate_clip(clip: &AudioClip, c: &ClipConstraints) -> Vec<Issue> {
    let mut issues = Vec::new();
    let d = clip.duration_s();
    if d < c.min_duration_s {
        issues.push(Issue::new(
            "too_short",
            Severity::Fail,
            format!("{d:.3} s is below the {} s minimum", c.min_duration_s),
        ));
    }
    if d > c.max_duration_s {
        issues.push(Issue::new(
            "too_long",
            Severity::Fail,
            format!("{d:.3} s exceeds the {} s maximum", c.max_duration_s),
        ));
    }
    if clip.sample_rate_hz() != c.required_rate_hz {
        issues.push(Issue::new(
            "sample_rate",
            Severity::Fail,
            format!("{} Hz, expected {} Hz", clip.sample_rate_hz(), c.required_rate_hz),
        ));
    }
    let s = silence_fraction(clip);
    if s > c.max_silence_fraction {
        issues.push(Issue::new(
            "silence",
            Severity::Fail,
            format!("{:.1}% silent, limit {:.1}%", 100.0 * s, 100.0 * c.max_silence_fraction),
        ));
    }
    issues
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_clip: BTreeMap<String, Vec<Issue>>,
    pub metrics: BTreeMap<String, f64>,
    /// Dataset-level findings not tied to one clip (reader integrity warnings).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl QualityReport {
    /// Validates every clip and fills duration and silence statistics.
    pub fn for_clips<'a>(clips: impl IntoIterator<Item = (&'a str, &'a AudioClip)>, c: &ClipConstraints) -> Self {
        let mut report = Self::default();
        let mut durations = Vec::new();
        let mut silence = 0.0;
        for (id, clip) in clips {
            report.per_clip.insert(id.to_string(), validate_clip(clip, c));
            durations.push(clip.duration_s());
            silence += silence_fraction(clip);
        }
        let n = durations.len();
        report.set_metric("clip_count", n as f64);
        if n > 0 {
            let total: f64 = durations.iter().sum();
            report.set_metric("total_duration_s", total);
            report.set_metric("mean_duration_s", total / n as f64);
            report.set_metric("min_duration_s", durations.iter().copied().fold(f64::INFINITY, f64::min));
            report.set_metric("max_duration_s", durations.iter().copied().fold(0.0, f64::max));
            report.set_metric("mean_silence_fraction", silence / n as f64);
        }
        report.set_metric("failing_clips", report.failing_clips().len() as f64);
        report
    }

    /// Non-finite values are dropped so the report always serializes.
    pub fn set_metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        }
    }

    pub fn add_issue(&mut self, clip_id: &str, issue: Issue) {
        self.per_clip.entry(clip_id.to_string()).or_default().push(issue);
    }

    pub fn failing_clips(&self) -> Vec<&str> {
        self.per_clip
            .iter()
            .filter(|(_, v)| v.iter().any(|i| i.severity == Severity::Fail))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::speech_like;

    #[test]
    fn cer_examples() {
        assert_eq!(character_error_rate("abc", "abc").unwrap(), 0.0);
        assert!((character_error_rate("abc", "axc").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(character_error_rate("a", "bcd").unwrap(), 3.0);
        assert!(character_error_rate("", "x").is_err());
    }

    #[test]
    fn cer_counts_scalars_not_bytes() {
        // one Devanagari letter replaced: 1 of 3 scalars
        assert!((character_error_rate("नमक", "नहक").unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wer_examples() {
        assert_eq!(word_error_rate("a b c", "a b c").unwrap(), 0.0);
        assert!((word_error_rate("a b c", "a c").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(word_error_rate("a", "b c").unwrap(), 2.0);
        assert!(word_error_rate("  ", "x").is_err());
    }

    #[test]
    fn cosine() {
        assert!((speaker_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(speaker_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((speaker_similarity(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(speaker_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(speaker_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn speech_like_ten_seconds_passes() {
        let clip = speech_like(10.0, 24_000, 1);
        assert!(validate_clip(&clip, &ClipConstraints::for_rate(24_000)).is_empty());
    }

    #[test]
    fn short_and_silent() {
        let c = ClipConstraints::for_rate(24_000);
        let short = speech_like(0.5, 24_000, 1);
        let codes: Vec<_> = validate_clip(&short, &c).into_iter().map(|i| i.code).collect();
        assert!(codes.contains(&"too_short".to_string()));
        let silent = AudioClip::silence(5.0, 24_000, "s").unwrap();
        assert_eq!(silence_fraction(&silent), 1.0);
        let issues = validate_clip(&silent, &c);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].severity, Severity::Fail);
    }

    #[test]
    fn rate_mismatch() {
        let clip = speech_like(5.0, 16_000, 1);
        let issues = validate_clip(&clip, &ClipConstraints::for_rate(24_000));
        assert_eq!(issues[0].code, "sample_rate");
    }

    #[test]
    fn report_json() {
        let a = speech_like(4.0, 24_000, 1);
        let b = AudioClip::silence(4.0, 24_000, "s").unwrap();
        let r = QualityReport::for_clips([("a", &a), ("b", &b)], &ClipConstraints::for_rate(24_000));
        assert_eq!(r.failing_clips(), vec!["b"]);
        assert_eq!(r.metrics["clip_count"], 2.0);
        let back: QualityReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn constraints_validate() {
        let mut c = ClipConstraints::for_rate(24_000);
        assert!(c.validate().is_ok());
        c.min_duration_s = 20.0;
        assert!(c.validate().is_err());
    }
}
