//! Pipeline configuration: one TOML document describing the source, the
//! stage parameters, the output dataset and which adapter serves each role.
//!
//! ```toml
//! methodology = "bark_prompt"
//!
//! [source]
//! uri = "lecture.wav"
//! kind = "local"
//!
//! [prompt]
//! sentences = ["पहला वाक्य", "दूसरा वाक्य"]
//!
//! [output]
//! format = "common_voice"
//! root = "out/cv"
//!
//! [adapters]
//! decoder = "mock"
//! codec = "mock"
//! semantic_encoder = "mock"
//! token_quantizer = "mock"
//! tts = "mock"
//! transcode = "mock"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Sections and keys not listed fall back to the defaults documented on each
//! type; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterRegistry, AdapterRole};
use crate::conversion::{ConversionParams, TrainingConfig};
use crate::corpus::SplitSpec;
use crate::error::{Error, Result};
use crate::ingest::{SourceKind, SourceSpec};
use crate::preprocess::{SegmentationPolicy, StemModel};
use crate::quality::{DEFAULT_MAX_DURATION_S, DEFAULT_MAX_SILENCE_FRACTION, DEFAULT_MIN_DURATION_S};
use crate::synthesis::{GenerationParams, DEFAULT_RETRIES};
use crate::transcribe::AsrConfig;
use crate::voiceprompt::DEFAULT_N_COARSE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Methodology {
    /// Speaker prompt plus prompted TTS over a sentence list.
    BarkPrompt,
    /// Transcribed training set for voice conversion, then conversion.
    RvcConvert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Lj,
    CommonVoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    /// Denoiser strength in (0, 1]; absent skips denoising.
    pub denoise: Option<f32>,
    /// Stem model for vocal isolation; absent skips it.
    pub stems: Option<StemModel>,
    pub segmentation: SegmentationPolicy,
    /// Free-form label recorded in the run summary.
    pub preset: String,
}

impl Default for PreprocessingConfig {
    fn default() -> Self {
        Self {
            denoise: None,
            stems: None,
            segmentation: SegmentationPolicy::default(),
            preset: "default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// Which segment of the source becomes the speaker prompt.
    pub segment_index: usize,
    pub n_coarse: usize,
    /// Sentences to synthesize, inline.
    pub sentences: Vec<String>,
    /// Or one sentence per non-blank line of a UTF-8 file.
    pub sentences_file: Option<PathBuf>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            segment_index: 0,
            n_coarse: DEFAULT_N_COARSE,
            sentences: Vec::new(),
            sentences_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversionConfig {
    pub envelope_mix: f64,
    pub filter_radius: u32,
    pub index_ratio: f64,
    pub protect: f64,
    pub transpose_semitones: i32,
    /// Trained voice model. Without one, the run stops after emitting the
    /// training set and trainer config.
    pub model_ref: Option<PathBuf>,
    pub index_ref: Option<PathBuf>,
    /// Dataset (LJ or Common Voice layout) whose clips get converted.
    pub input_corpus: Option<PathBuf>,
    /// Experiment name written into the trainer config.
    pub experiment: String,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        let p = ConversionParams::default();
        Self {
            envelope_mix: p.envelope_mix,
            filter_radius: p.filter_radius,
            index_ratio: p.index_ratio,
            protect: p.protect,
            transpose_semitones: p.transpose_semitones,
            model_ref: None,
            index_ref: None,
            input_corpus: None,
            experiment: "voiceforge".into(),
        }
    }
}

impl ConversionConfig {
    pub fn params(&self) -> ConversionParams {
        ConversionParams {
            envelope_mix: self.envelope_mix,
            filter_radius: self.filter_radius,
            index_ratio: self.index_ratio,
            protect: self.protect,
            transpose_semitones: self.transpose_semitones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub root: PathBuf,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_locale")]
    pub locale: String,
}

fn default_locale() -> String {
    "hi".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub max_silence_fraction: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            min_duration_s: DEFAULT_MIN_DURATION_S,
            max_duration_s: DEFAULT_MAX_DURATION_S,
            max_silence_fraction: DEFAULT_MAX_SILENCE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Intermediate artifacts; defaults to `<output.root>.work`.
    pub work_dir: Option<PathBuf>,
    /// Download cache; defaults to `<work_dir>/cache`. The
    /// `VOICEFORGE_CACHE_DIR` environment variable takes precedence.
    pub cache_dir: Option<PathBuf>,
    pub workers: usize,
    pub retries: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            work_dir: None,
            cache_dir: None,
            workers: 1,
            retries: DEFAULT_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub methodology: Methodology,
    pub source: SourceSpec,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub asr: AsrConfig,
    #[serde(default)]
    pub generation: GenerationParams,
    #[serde(default)]
    pub conversion: ConversionConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default)]
    pub run: RunConfig,
    /// Role name to adapter id.
    #[serde(default)]
    pub adapters: BTreeMap<String, String>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    /// Parses TOML text; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.source.kind == SourceKind::Local {
            self.source.uri = resolve(base, Path::new(&self.source.uri)).to_string_lossy().into_owned();
        }
        self.output.root = resolve(base, &self.output.root);
        for p in [
            &mut self.prompt.sentences_file,
            &mut self.conversion.model_ref,
            &mut self.conversion.index_ref,
            &mut self.conversion.input_corpus,
            &mut self.run.work_dir,
            &mut self.run.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base, p);
        }
    }

    /// Adapter roles this configuration needs, given the methodology and
    /// optional stages.
    pub fn required_roles(&self) -> Vec<AdapterRole> {
        use AdapterRole as R;
        let mut roles = vec![R::Decoder, R::Transcode];
        if self.source.kind == SourceKind::Remote {
            roles.push(R::Downloader);
        }
        if self.preprocessing.denoise.is_some() {
            roles.push(R::Denoise);
        }
        if self.preprocessing.stems.is_some() {
            roles.push(R::Stems);
        }
        match self.methodology {
            Methodology::BarkPrompt => roles.extend([R::Codec, R::SemanticEncoder, R::TokenQuantizer, R::Tts]),
            Methodology::RvcConvert => {
                roles.extend([R::Asr, R::Diarization]);
                if self.conversion.model_ref.is_some() {
                    roles.push(R::Vc);
                }
            }
        }
        roles
    }

    /// Every schema violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |label: &str, r: Result<()>| {
            if let Err(e) = r {
                v.push(format!("{label}: {e}"));
            }
        };
        check("source", self.source.validate());
        check("preprocessing.segmentation", self.preprocessing.segmentation.validate());
        check("asr", self.asr.validate());
        check("generation", self.generation.validate());
        check("conversion", self.conversion.params().validate());
        check("training", self.training.validate());
        check("output.split", self.output.split.validate());
        check("quality", self.clip_constraints(1).validate());
        if let Some(s) = self.preprocessing.denoise {
            if !(s > 0.0 && s <= 1.0) {
                v.push(format!("preprocessing.denoise: strength {s} outside (0, 1]"));
            }
        }
        if self.run.workers == 0 {
            v.push("run.workers: must be at least 1".into());
        }
        if self.output.locale.trim().is_empty() {
            v.push("output.locale: empty".into());
        }

        let known: BTreeMap<&str, AdapterRole> = AdapterRole::ALL.iter().map(|r| (r.as_str(), *r)).collect();
        for (role, id) in &self.adapters {
            if !known.contains_key(role.as_str()) {
                v.push(format!(
                    "adapters.{role}: unknown role (expected one of {})",
                    known.keys().copied().collect::<Vec<_>>().join(", ")
                ));
            } else if id.trim().is_empty() {
                v.push(format!("adapters.{role}: empty adapter id"));
            }
        }
        for role in self.required_roles() {
            if !self.adapters.contains_key(role.as_str()) {
                v.push(format!("adapters.{role}: required by this configuration but not set"));
            }
        }

        match self.methodology {
            Methodology::BarkPrompt => {
                if self.prompt.sentences.is_empty() && self.prompt.sentences_file.is_none() {
                    v.push("prompt: bark_prompt needs `sentences` or `sentences_file`".into());
                }
                if !self.prompt.sentences.is_empty() && self.prompt.sentences_file.is_some() {
                    v.push("prompt: set only one of `sentences` and `sentences_file`".into());
                }
                if let Some(k) = self.prompt.sentences.iter().position(|s| s.trim().is_empty()) {
                    v.push(format!("prompt.sentences[{k}]: empty"));
                }
                if self.prompt.n_coarse == 0 {
                    v.push("prompt.n_coarse: must be at least 1".into());
                }
            }
            Methodology::RvcConvert => {
                let c = &self.conversion;
                if c.model_ref.is_some() != c.index_ref.is_some() {
                    v.push("conversion: model_ref and index_ref go together".into());
                }
                if c.model_ref.is_some() && c.input_corpus.is_none() {
                    v.push("conversion.input_corpus: required when a model is configured".into());
                }
                if c.experiment.trim().is_empty() || c.experiment.contains(['/', '\\', '\n']) {
                    v.push(format!("conversion.experiment: {:?} is not a usable name", c.experiment));
                }
            }
        }

        let root = &self.output.root;
        if root.is_file() {
            v.push(format!("output.root: {} is a file", root.display()));
        }
        if self.output.root.file_name().is_none() {
            v.push(format!("output.root: {} has no final component", root.display()));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{} problem(s):\n  {}", v.len(), v.join("\n  "))))
        }
    }

    /// Checks that every configured adapter id exists in `registry`.
    pub fn check_adapters(&self, registry: &AdapterRegistry) -> Result<()> {
        for role in AdapterRole::ALL {
            if let Some(id) = self.adapters.get(role.as_str()) {
                registry.resolve(role, id)?;
            }
        }
        Ok(())
    }

    /// Adapter id for `role`. Only call for roles in [`Self::required_roles`]
    /// or after checking presence.
    pub fn adapter_id(&self, role: AdapterRole) -> Result<&str> {
        self.adapters
            .get(role.as_str())
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("adapters.{role} is not set")))
    }

    pub fn optional_adapter_id(&self, role: AdapterRole) -> Option<&str> {
        self.adapters.get(role.as_str()).map(String::as_str)
    }

    pub fn work_dir(&self) -> PathBuf {
        self.run.work_dir.clone().unwrap_or_else(|| {
            let mut name = self.output.root.file_name().unwrap_or_default().to_os_string();
            name.push(".work");
            self.output.root.with_file_name(name)
        })
    }

    /// Environment override, then `run.cache_dir`, then `<work_dir>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(crate::CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.run.cache_dir.clone().unwrap_or_else(|| self.work_dir().join("cache"))
    }

    pub fn clip_constraints(&self, required_rate_hz: u32) -> crate::quality::ClipConstraints {
        crate::quality::ClipConstraints {
            min_duration_s: self.quality.min_duration_s,
            max_duration_s: self.quality.max_duration_s,
            required_rate_hz,
            max_silence_fraction: self.quality.max_silence_fraction,
        }
    }

    /// Inline sentences, or the non-blank lines of `sentences_file`, trimmed.
    pub fn sentences(&self) -> Result<Vec<String>> {
        match &self.prompt.sentences_file {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("prompt.sentences_file {}: {e}", p.display())))?;
                Ok(text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect())
            }
            None => Ok(self.prompt.sentences.iter().map(|s| s.trim().to_string()).collect()),
        }
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
    PipelineConfig::from_toml_str(&text, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
methodology = "bark_prompt"

[source]
uri = "src.wav"
kind = "local"

[prompt]
sentences = ["एक", "दो"]

[output]
format = "common_voice"
root = "out"

[adapters]
decoder = "mock"
codec = "mock"
semantic_encoder = "mock"
token_quantizer = "mock"
tts = "mock"
transcode = "mock"
"#;

    fn parse(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::from_toml_str(text, Path::new("/base"))
    }

    #[test]
    fn minimal_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.generation, crate::synthesis::default_generation_params());
        assert_eq!(c.conversion.params(), crate::conversion::default_conversion_params());
        assert_eq!(c.training, crate::conversion::default_training_config());
        assert_eq!(c.asr, AsrConfig::default());
        assert_eq!(c.output.split, SplitSpec::default());
        assert_eq!(c.output.locale, "hi");
        assert_eq!(c.preprocessing.segmentation.target_len_s, 10.0);
        assert_eq!(c.source.uri, "/base/src.wav");
        assert_eq!(c.output.root, PathBuf::from("/base/out"));
        assert_eq!(c.work_dir(), PathBuf::from("/base/out.work"));
        assert_eq!(c.run.workers, 1);
        assert_eq!(c.run.retries, 2);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = MINIMAL.replace("[prompt]\n", "[prompt]\nsped = 2\n");
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("sped"), "{msg}");
        assert!(msg.contains("line 9"), "{msg}");
    }

    #[test]
    fn negative_temperature_is_range_error() {
        let text = format!("{MINIMAL}\n[generation]\ntext_temp = -1\n");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("text_temp"), "{err}");
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let text = format!("{MINIMAL}\n[generation]\ntext_temp = 1.0\n");
        let c = parse(&text).unwrap();
        assert_eq!((c.generation.text_temp, c.generation.waveform_temp), (1.0, 0.7));
    }

    #[test]
    fn all_violations_listed() {
        let text = MINIMAL
            .replace("tts = \"mock\"\n", "")
            .replace("[output]\n", "[output]\nlocale = \"\"\n");
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("adapters.tts"), "{msg}");
        assert!(msg.contains("output.locale"), "{msg}");
        assert!(msg.contains("2 problem"), "{msg}");
    }

    #[test]
    fn unknown_role_rejected() {
        let text = format!("{MINIMAL}vocoder = \"mock\"\n");
        assert!(parse(&text).unwrap_err().to_string().contains("adapters.vocoder"));
    }

    #[test]
    fn lookup_against_registry() {
        let text = MINIMAL.replace("codec = \"mock\"", "codec = \"encodec\"");
        let c = parse(&text).unwrap();
        let err = c.check_adapters(&AdapterRegistry::with_mocks()).unwrap_err();
        assert!(matches!(err, Error::Lookup { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn rvc_requires_model_pairs_and_inputs() {
        let text = r#"
methodology = "rvc_convert"
[source]
uri = "mock://talk"
kind = "remote"
[conversion]
model_ref = "m.pth"
[output]
format = "lj"
root = "out"
[adapters]
decoder = "mock"
transcode = "mock"
asr = "mock"
diarization = "mock"
"#;
        let msg = parse(text).unwrap_err().to_string();
        assert!(msg.contains("index_ref"), "{msg}");
        assert!(msg.contains("input_corpus"), "{msg}");
        assert!(msg.contains("adapters.downloader"), "{msg}");
        assert!(msg.contains("adapters.vc"), "{msg}");
    }

    #[test]
    fn conversion_params_inline() {
        let text = format!("{MINIMAL}\n[conversion]\nindex_ratio = 0.5\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.conversion.params().index_ratio, 0.5);
        assert_eq!(c.conversion.params().protect, 0.33);
    }
}
