//! Speech recognition and diarization over a source recording, and cutting
//! the recording into labeled utterances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adapters::{Asr, Diarizer};
use crate::audio::AudioClip;
use crate::error::{AdapterError, Error, Result};

/// Share of the recording a non-dominant speaker may hold before we warn.
pub const SECOND_SPEAKER_WARN_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AsrTask {
    #[default]
    Transcribe,
    Translate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsrConfig {
    pub language: String,
    #[serde(default)]
    pub task: AsrTask,
}

impl Default for AsrConfig {
    /// Hindi transcription (not translation to English, the usual ASR default).
    fn default() -> Self {
        Self {
            language: "hi".into(),
            task: AsrTask::Transcribe,
        }
    }
}

impl AsrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.language.trim().is_empty() {
            return Err(Error::Validation("ASR language is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

impl TranscriptSegment {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_s.is_finite() && self.end_s.is_finite() && self.start_s >= 0.0 && self.start_s < self.end_s) {
            return Err(Error::Validation(format!(
                "segment [{}, {}] is not a forward interval",
                self.start_s, self.end_s
            )));
        }
        if self.text.trim().is_empty() {
            return Err(Error::Validation(format!(
                "segment [{}, {}] has empty text",
                self.start_s, self.end_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub start_s: f64,
    pub end_s: f64,
    pub speaker_label: String,
}

/// Trims, and collapses internal whitespace runs to one space. Script is left alone.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn require_non_empty(clip: &AudioClip, op: &str) -> Result<()> {
    if clip.is_empty() {
        return Err(Error::Precondition(format!("{op} needs a non-empty clip")));
    }
    Ok(())
}

/// Runs ASR and returns sorted, non-overlapping segments inside the clip.
///
/// Segment text is normalized; segments left empty after normalization are
/// dropped. Overlapping adapter output is a stage error.
pub fn transcribe(clip: &AudioClip, config: &AsrConfig, asr: &dyn Asr) -> Result<Vec<TranscriptSegment>> {
    require_non_empty(clip, "transcribe")?;
    config.validate()?;
    let context = clip.source_id().to_string();
    let raw = asr
        .transcribe(clip, config)
        .map_err(|e| Error::stage("transcribe", context.clone(), e))?;
    let duration = clip.duration_s();
    let mut segs: Vec<TranscriptSegment> = raw
        .into_iter()
        .map(|s| TranscriptSegment {
            start_s: s.start_s.max(0.0),
            end_s: s.end_s.min(duration),
            text: normalize_text(&s.text),
        })
        .filter(|s| !s.text.is_empty() && s.start_s < s.end_s)
        .collect();
    segs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for w in segs.windows(2) {
        if w[1].start_s < w[0].end_s {
            return Err(Error::stage(
                "transcribe",
                context,
                AdapterError::new(format!(
                    "segments [{:.3}, {:.3}] and [{:.3}, {:.3}] overlap",
                    w[0].start_s, w[0].end_s, w[1].start_s, w[1].end_s
                )),
            ));
        }
    }
    Ok(segs)
}

pub fn diarize(clip: &AudioClip, dia: &dyn Diarizer) -> Result<Vec<SpeakerTurn>> {
    require_non_empty(clip, "diarize")?;
    let mut turns = dia
        .diarize(clip)
        .map_err(|e| Error::stage("diarize", clip.source_id().to_string(), e))?;
    if let Some(t) = turns.iter().find(|t| !(t.start_s >= 0.0 && t.start_s < t.end_s)) {
        return Err(Error::stage(
            "diarize",
            clip.source_id().to_string(),
            AdapterError::new(format!("invalid turn [{}, {}]", t.start_s, t.end_s)),
        ));
    }
    turns.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(turns)
}

/// Warns when any speaker other than the dominant one holds more than 10 %
/// of `total_s`. Returns `None` for effectively single-speaker audio.
pub fn multi_speaker_warning(turns: &[SpeakerTurn], total_s: f64) -> Option<String> {
    let mut per: BTreeMap<&str, f64> = BTreeMap::new();
    for t in turns {
        *per.entry(t.speaker_label.as_str()).or_default() += t.end_s - t.start_s;
    }
    let dominant = per
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| *k)?;
    let others: Vec<String> = per
        .iter()
        .filter(|(k, v)| **k != dominant && **v > SECOND_SPEAKER_WARN_FRACTION * total_s)
        .map(|(k, v)| format!("{k} ({:.0}%)", 100.0 * v / total_s))
        .collect();
    (!others.is_empty()).then(|| {
        format!(
            "source is not single-speaker: {} besides dominant speaker {dominant}",
            others.join(", ")
        )
    })
}

/// Cuts `clip` at each segment: samples `[round(start·rate), round(end·rate))`.
pub fn slice_by_segments(clip: &AudioClip, segments: &[TranscriptSegment]) -> Result<Vec<(AudioClip, String)>> {
    let duration = clip.duration_s();
    let rate = clip.sample_rate_hz() as f64;
    segments
        .iter()
        .map(|s| {
            s.validate()?;
            let start = (s.start_s * rate).round() as usize;
            let end = (s.end_s * rate).round() as usize;
            if end > clip.len() {
                return Err(Error::Validation(format!(
                    "segment [{}, {}] extends past the clip ({duration:.3} s)",
                    s.start_s, s.end_s
                )));
            }
            Ok((clip.slice(start, end), s.text.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::{MockAsr, MockDiarizer};
    use crate::adapters::AdapterResult;

    fn seg(a: f64, b: f64, t: &str) -> TranscriptSegment {
        TranscriptSegment {
            start_s: a,
            end_s: b,
            text: t.into(),
        }
    }

    #[test]
    fn default_config_is_hindi_transcribe() {
        let c = AsrConfig::default();
        assert_eq!(c.language, "hi");
        assert_eq!(c.task, AsrTask::Transcribe);
    }

    #[test]
    fn silent_clip_gives_no_segments() {
        let clip = AudioClip::silence(3.0, 16_000, "z").unwrap();
        assert!(transcribe(&clip, &AsrConfig::default(), &MockAsr::default())
            .unwrap()
            .is_empty());
    }

    struct Whole;
    impl Asr for Whole {
        fn transcribe(&self, clip: &AudioClip, _: &AsrConfig) -> AdapterResult<Vec<TranscriptSegment>> {
            Ok(vec![seg(0.0, clip.duration_s(), "  पूरा   वाक्य ")])
        }
    }

    #[test]
    fn whole_clip_segment() {
        let clip = AudioClip::silence(2.5, 16_000, "z").unwrap();
        let segs = transcribe(&clip, &AsrConfig::default(), &Whole).unwrap();
        assert_eq!(segs, vec![seg(0.0, 2.5, "पूरा वाक्य")]);
    }

    struct Overlapping;
    impl Asr for Overlapping {
        fn transcribe(&self, _: &AudioClip, _: &AsrConfig) -> AdapterResult<Vec<TranscriptSegment>> {
            Ok(vec![seg(1.0, 2.0, "b"), seg(0.0, 1.5, "a")])
        }
    }

    #[test]
    fn overlapping_segments_rejected() {
        let clip = AudioClip::silence(3.0, 16_000, "z").unwrap();
        assert!(matches!(
            transcribe(&clip, &AsrConfig::default(), &Overlapping),
            Err(Error::Stage { .. })
        ));
    }

    #[test]
    fn mock_asr_segments_are_sorted_and_inside() {
        let clip = crate::adapters::mock::speech_like(30.0, 16_000, 3);
        let segs = transcribe(&clip, &AsrConfig::default(), &MockAsr::default()).unwrap();
        assert!(!segs.is_empty());
        for w in segs.windows(2) {
            assert!(w[0].end_s <= w[1].start_s);
        }
        assert!(segs.iter().all(|s| s.start_s >= 0.0 && s.end_s <= 30.0));
    }

    #[test]
    fn single_and_two_speakers() {
        let clip = AudioClip::silence(10.0, 16_000, "z").unwrap();
        let one = diarize(&clip, &MockDiarizer::new(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].start_s, one[0].end_s), (0.0, 10.0));
        let two = diarize(&clip, &MockDiarizer::new(2)).unwrap();
        let labels: Vec<&str> = two.iter().map(|t| t.speaker_label.as_str()).collect();
        assert_eq!(labels, vec!["S0", "S1"]);
        assert!(two[0].start_s < two[1].start_s);
        assert!(multi_speaker_warning(&one, 10.0).is_none());
        assert!(multi_speaker_warning(&two, 10.0).is_some());
    }

    #[test]
    fn minor_second_speaker_is_tolerated() {
        let turns = vec![
            SpeakerTurn {
                start_s: 0.0,
                end_s: 95.0,
                speaker_label: "S0".into(),
            },
            SpeakerTurn {
                start_s: 95.0,
                end_s: 100.0,
                speaker_label: "S1".into(),
            },
        ];
        assert!(multi_speaker_warning(&turns, 100.0).is_none());
    }

    #[test]
    fn diarize_empty_clip_rejected() {
        let clip = AudioClip::new(vec![], 16_000, "z").unwrap();
        assert!(matches!(diarize(&clip, &MockDiarizer::new(1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn slice_one_second() {
        let clip = AudioClip::silence(3.0, 24_000, "z").unwrap();
        let out = slice_by_segments(&clip, &[seg(1.0, 2.0, "x")]).unwrap();
        assert_eq!(out[0].0.len(), 24_000);
        assert_eq!(out[0].1, "x");
        assert!(slice_by_segments(&clip, &[]).unwrap().is_empty());
    }

    #[test]
    fn slice_past_end_rejected() {
        let clip = AudioClip::silence(3.0, 24_000, "z").unwrap();
        assert!(matches!(
            slice_by_segments(&clip, &[seg(2.0, 3.5, "x")]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  नमस्ते \t  दुनिया\n"), "नमस्ते दुनिया");
    }
}
