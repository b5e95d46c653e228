//! Retrieval-based voice conversion: trainer configuration, training-data
//! checks and conversion inference through a [`VcBackend`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::VcBackend;
use crate::audio::AudioClip;
use crate::error::{AdapterError, Error, Result};

pub const MIN_TRAINING_DURATION_S: f64 = 600.0;
pub const SUPPORTED_TRAINING_RATES: [u32; 3] = [32_000, 40_000, 48_000];
/// Relative duration change tolerated from a conversion backend.
pub const DURATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub target_sample_rate_hz: u32,
    pub batch_size: u32,
    pub epochs: u32,
    pub pretrained_gen: String,
    pub pretrained_disc: String,
    pub pitch_guided: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        default_training_config()
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_TRAINING_RATES.contains(&self.target_sample_rate_hz) {
            return Err(Error::Validation(format!(
                "training sample rate {} not in {SUPPORTED_TRAINING_RATES:?}",
                self.target_sample_rate_hz
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Validation("batch_size and epochs must be at least 1".into()));
        }
        Ok(())
    }

    /// Flat `key=value` lines in the field names the RVC trainer takes.
    pub fn to_trainer_file(&self, experiment: &str, dataset_dir: &Path) -> String {
        let sr = format!("{}k", self.target_sample_rate_hz / 1000);
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("exp_name", &experiment);
        kv("trainset_dir", &dataset_dir.display());
        kv("sr", &sr);
        kv("if_f0", &(self.pitch_guided as u8));
        kv("version", &"v2");
        kv("batch_size", &self.batch_size);
        kv("total_epoch", &self.epochs);
        kv("pretrained_G", &format!("assets/pretrained_v2/{}.pth", self.pretrained_gen));
        kv("pretrained_D", &format!("assets/pretrained_v2/{}.pth", self.pretrained_disc));
        out
    }

    pub fn from_trainer_file(text: &str) -> Result<Self> {
        let mut cfg = TrainingConfig {
            target_sample_rate_hz: 0,
            batch_size: 0,
            epochs: 0,
            pretrained_gen: String::new(),
            pretrained_disc: String::new(),
            pitch_guided: false,
        };
        let weights = |v: &str| {
            Path::new(v)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        for (n, line) in text.lines().enumerate() {
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            let bad = || Error::Format(format!("trainer config line {}: bad value for {k}", n + 1));
            match k.trim() {
                "sr" => {
                    cfg.target_sample_rate_hz =
                        v.trim().trim_end_matches('k').parse::<u32>().map_err(|_| bad())? * 1000
                }
                "if_f0" => cfg.pitch_guided = v.trim() == "1",
                "batch_size" => cfg.batch_size = v.trim().parse().map_err(|_| bad())?,
                "total_epoch" => cfg.epochs = v.trim().parse().map_err(|_| bad())?,
                "pretrained_G" => cfg.pretrained_gen = weights(v.trim()),
                "pretrained_D" => cfg.pretrained_disc = weights(v.trim()),
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// 32 kHz, batch 40, 200 epochs, pitch-guided v2 base weights.
pub fn default_training_config() -> TrainingConfig {
    TrainingConfig {
        target_sample_rate_hz: 32_000,
        batch_size: 40,
        epochs: 200,
        pretrained_gen: "f0G32k".into(),
        pretrained_disc: "f0D32k".into(),
        pitch_guided: true,
    }
}

pub fn write_training_config(cfg: &TrainingConfig, experiment: &str, dataset_dir: &Path, out: &Path) -> Result<()> {
    cfg.validate()?;
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, cfg.to_trainer_file(experiment, dataset_dir))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    InsufficientDuration { total_s: f64, minimum_s: f64 },
    RateMismatch { index: usize, rate_hz: u32, expected_hz: u32 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::InsufficientDuration { total_s, minimum_s } => write!(
                f,
                "training audio totals {total_s:.1} s, below the recommended {minimum_s:.0} s"
            ),
            Warning::RateMismatch {
                index,
                rate_hz,
                expected_hz,
            } => write!(f, "clip {index} is {rate_hz} Hz, trainer expects {expected_hz} Hz"),
        }
    }
}

/// Advisory checks on training audio against `config`.
pub fn validate_training_data(clips: &[AudioClip], config: &TrainingConfig) -> Vec<Warning> {
    let mut warnings = Vec::new();
    let total_s: f64 = clips.iter().map(AudioClip::duration_s).sum();
    if total_s < MIN_TRAINING_DURATION_S {
        warnings.push(Warning::InsufficientDuration {
            total_s,
            minimum_s: MIN_TRAINING_DURATION_S,
        });
    }
    for (index, c) in clips.iter().enumerate() {
        if c.sample_rate_hz() != config.target_sample_rate_hz {
            warnings.push(Warning::RateMismatch {
                index,
                rate_hz: c.sample_rate_hz(),
                expected_hz: config.target_sample_rate_hz,
            });
        }
    }
    warnings
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversionParams {
    /// Mix between the source loudness envelope and the converted one.
    pub envelope_mix: f64,
    /// Median filter radius applied to the pitch track.
    pub filter_radius: u32,
    /// Weight of retrieved index features.
    pub index_ratio: f64,
    /// Protection of voiceless consonants and breath sounds.
    pub protect: f64,
    #[serde(default)]
    pub transpose_semitones: i32,
}

impl Default for ConversionParams {
    fn default() -> Self {
        default_conversion_params()
    }
}

impl ConversionParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64, hi: f64| {
            if v.is_finite() && (0.0..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} = {v} outside [0, {hi}]")))
            }
        };
        unit("envelope_mix", self.envelope_mix, 1.0)?;
        unit("index_ratio", self.index_ratio, 1.0)?;
        unit("protect", self.protect, 0.5)
    }
}

pub fn default_conversion_params() -> ConversionParams {
    ConversionParams {
        envelope_mix: 0.25,
        filter_radius: 3,
        index_ratio: 0.75,
        protect: 0.33,
        transpose_semitones: 0,
    }
}

/// Converts `clip` into the trained voice. Output is at the backend's rate and
/// within 2 % of the input duration.
pub fn convert_voice(
    clip: &AudioClip,
    model_ref: &str,
    index_ref: &str,
    params: &ConversionParams,
    backend: &dyn VcBackend,
) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::Precondition("cannot convert an empty clip".into()));
    }
    params.validate()?;
    backend
        .resolve(model_ref, index_ref)
        .map_err(|e| Error::Config(format!("voice model {model_ref:?} / index {index_ref:?}: {e}")))?;
    let context = format!("{}@{:.3}s", clip.source_id(), clip.offset_s());
    let out = backend
        .convert(clip, model_ref, index_ref, params)
        .map_err(|e| Error::stage("convert_voice", context.clone(), e))?;
    if out.sample_rate_hz() != backend.native_rate_hz() {
        return Err(Error::stage(
            "convert_voice",
            context,
            AdapterError::new(format!(
                "backend returned {} Hz, declared {} Hz",
                out.sample_rate_hz(),
                backend.native_rate_hz()
            )),
        ));
    }
    let (din, dout) = (clip.duration_s(), out.duration_s());
    if (dout - din).abs() > DURATION_TOLERANCE * din {
        return Err(Error::stage(
            "convert_voice",
            context,
            AdapterError::new(format!("duration changed from {din:.3} s to {dout:.3} s")),
        ));
    }
    Ok(out)
}
