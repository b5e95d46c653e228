//! Interfaces to the external systems a pipeline drives, and the registry
//! that maps configured adapter ids to implementations.
//!
//! Every trait here has a deterministic implementation in [`mock`] so the
//! whole pipeline can run without model weights. Real backends (neural
//! codecs, TTS, voice conversion, ASR) implement the same traits outside this
//! crate and are registered at startup.

pub mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::conversion::ConversionParams;
use crate::error::{AdapterError, Error, Result};
use crate::preprocess::{AudioFormat, StemModel};
use crate::synthesis::GenerationParams;
use crate::transcribe::{AsrConfig, SpeakerTurn, TranscriptSegment};
use crate::voiceprompt::SpeakerPrompt;

pub type AdapterResult<T> = std::result::Result<T, AdapterError>;

/// Fetches remote media to a local file.
pub trait Downloader: Send + Sync {
    /// Writes the media behind `uri` to `dest` and returns its container
    /// format (used as the cached file's extension).
    fn download(&self, uri: &str, dest: &Path) -> AdapterResult<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediaInfo {
    pub container_format: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMedia {
    pub sample_rate_hz: u32,
    /// One buffer per channel; an empty vector means the container had no audio stream.
    pub channels: Vec<Vec<f32>>,
}

pub trait Decoder: Send + Sync {
    fn probe(&self, path: &Path) -> AdapterResult<MediaInfo>;
    fn decode(&self, path: &Path) -> AdapterResult<DecodedMedia>;
}

pub trait Denoiser: Send + Sync {
    /// Must return a clip with the same length and rate as the input.
    fn denoise(&self, clip: &AudioClip, strength: f32) -> AdapterResult<AudioClip>;
}

pub trait StemSeparator: Send + Sync {
    fn supports(&self, model: StemModel) -> bool;
    fn vocals(&self, clip: &AudioClip, model: StemModel) -> AdapterResult<AudioClip>;
}

/// Residual-quantizing neural audio codec.
pub trait Codec: Send + Sync {
    fn native_rate_hz(&self) -> u32;
    fn codebook_count(&self) -> usize;
    fn frame_rate_hz(&self) -> f64;
    fn codebook_size(&self) -> u32;
    /// Returns `codebook_count` rows of equal length.
    fn encode(&self, clip: &AudioClip) -> AdapterResult<Vec<Vec<u32>>>;
}

/// Self-supervised speech encoder producing frame embeddings.
pub trait SemanticEncoder: Send + Sync {
    fn embedding_dim(&self) -> usize;
    fn token_rate_hz(&self) -> f64;
    fn encode(&self, clip: &AudioClip) -> AdapterResult<Vec<Vec<f32>>>;
}

/// Maps encoder embeddings to discrete semantic tokens.
pub trait TokenQuantizer: Send + Sync {
    fn input_dim(&self) -> usize;
    fn vocab_size(&self) -> u32;
    fn quantize(&self, frames: &[Vec<f32>]) -> AdapterResult<Vec<u32>>;
}

/// Prompted text-to-audio backend.
pub trait TtsBackend: Send + Sync {
    fn native_rate_hz(&self) -> u32;
    fn generate(&self, text: &str, prompt: &SpeakerPrompt, params: &GenerationParams) -> AdapterResult<Vec<f32>>;
}

/// Retrieval-based voice conversion backend.
pub trait VcBackend: Send + Sync {
    fn native_rate_hz(&self) -> u32;
    /// Checks that the model weights and feature index can be loaded.
    fn resolve(&self, model_ref: &str, index_ref: &str) -> AdapterResult<()>;
    fn convert(
        &self,
        clip: &AudioClip,
        model_ref: &str,
        index_ref: &str,
        params: &ConversionParams,
    ) -> AdapterResult<AudioClip>;
}

pub trait Asr: Send + Sync {
    fn transcribe(&self, clip: &AudioClip, config: &AsrConfig) -> AdapterResult<Vec<TranscriptSegment>>;
}

pub trait Diarizer: Send + Sync {
    fn diarize(&self, clip: &AudioClip) -> AdapterResult<Vec<SpeakerTurn>>;
}

pub trait SpeakerEmbedder: Send + Sync {
    fn embed(&self, clip: &AudioClip) -> AdapterResult<Vec<f32>>;
}

/// Audio file encoder/decoder.
pub trait Transcoder: Send + Sync {
    fn encode(&self, samples: &[f32], sample_rate_hz: u32, format: AudioFormat) -> AdapterResult<Vec<u8>>;
    /// Returns mono samples and their rate.
    fn decode(&self, payload: &[u8], format: AudioFormat) -> AdapterResult<(Vec<f32>, u32)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterRole {
    Downloader,
    Decoder,
    Denoise,
    Stems,
    Codec,
    SemanticEncoder,
    TokenQuantizer,
    Tts,
    Vc,
    Asr,
    Diarization,
    SpeakerEmbedding,
    Transcode,
}

impl AdapterRole {
    pub const ALL: [AdapterRole; 13] = [
        AdapterRole::Downloader,
        AdapterRole::Decoder,
        AdapterRole::Denoise,
        AdapterRole::Stems,
        AdapterRole::Codec,
        AdapterRole::SemanticEncoder,
        AdapterRole::TokenQuantizer,
        AdapterRole::Tts,
        AdapterRole::Vc,
        AdapterRole::Asr,
        AdapterRole::Diarization,
        AdapterRole::SpeakerEmbedding,
        AdapterRole::Transcode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdapterRole::Downloader => "downloader",
            AdapterRole::Decoder => "decoder",
            AdapterRole::Denoise => "denoise",
            AdapterRole::Stems => "stems",
            AdapterRole::Codec => "codec",
            AdapterRole::SemanticEncoder => "semantic_encoder",
            AdapterRole::TokenQuantizer => "token_quantizer",
            AdapterRole::Tts => "tts",
            AdapterRole::Vc => "vc",
            AdapterRole::Asr => "asr",
            AdapterRole::Diarization => "diarization",
            AdapterRole::SpeakerEmbedding => "speaker_embedding",
            AdapterRole::Transcode => "transcode",
        }
    }
}

impl fmt::Display for AdapterRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub role: AdapterRole,
    pub id: String,
    pub native_rate_hz: Option<u32>,
    pub thread_safe: bool,
    pub metadata: BTreeMap<String, String>,
}

impl AdapterDescriptor {
    pub fn new(role: AdapterRole, id: impl Into<String>) -> Self {
        Self {
            role,
            id: id.into(),
            native_rate_hz: None,
            thread_safe: true,
            metadata: BTreeMap::new(),
        }
    }

    pub fn native_rate(mut self, hz: u32) -> Self {
        self.native_rate_hz = Some(hz);
        self
    }

    pub fn single_threaded(mut self) -> Self {
        self.thread_safe = false;
        self
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Registry(format!("{} adapter with empty id", self.role)));
        }
        if self.role == AdapterRole::Codec {
            for key in ["codebook_count", "frame_rate", "codebook_size"] {
                if !self.metadata.contains_key(key) {
                    return Err(Error::Registry(format!(
                        "codec adapter {:?} must report {key}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A type-erased adapter implementation tagged by role.
#[derive(Clone)]
pub enum Adapter {
    Downloader(Arc<dyn Downloader>),
    Decoder(Arc<dyn Decoder>),
    Denoise(Arc<dyn Denoiser>),
    Stems(Arc<dyn StemSeparator>),
    Codec(Arc<dyn Codec>),
    SemanticEncoder(Arc<dyn SemanticEncoder>),
    TokenQuantizer(Arc<dyn TokenQuantizer>),
    Tts(Arc<dyn TtsBackend>),
    Vc(Arc<dyn VcBackend>),
    Asr(Arc<dyn Asr>),
    Diarization(Arc<dyn Diarizer>),
    SpeakerEmbedding(Arc<dyn SpeakerEmbedder>),
    Transcode(Arc<dyn Transcoder>),
}

impl Adapter {
    pub fn role(&self) -> AdapterRole {
        match self {
            Adapter::Downloader(_) => AdapterRole::Downloader,
            Adapter::Decoder(_) => AdapterRole::Decoder,
            Adapter::Denoise(_) => AdapterRole::Denoise,
            Adapter::Stems(_) => AdapterRole::Stems,
            Adapter::Codec(_) => AdapterRole::Codec,
            Adapter::SemanticEncoder(_) => AdapterRole::SemanticEncoder,
            Adapter::TokenQuantizer(_) => AdapterRole::TokenQuantizer,
            Adapter::Tts(_) => AdapterRole::Tts,
            Adapter::Vc(_) => AdapterRole::Vc,
            Adapter::Asr(_) => AdapterRole::Asr,
            Adapter::Diarization(_) => AdapterRole::Diarization,
            Adapter::SpeakerEmbedding(_) => AdapterRole::SpeakerEmbedding,
            Adapter::Transcode(_) => AdapterRole::Transcode,
        }
    }
}

impl fmt::Debug for Adapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Adapter::{}", self.role())
    }
}

#[derive(Debug, Clone)]
pub struct Registered {
    pub descriptor: AdapterDescriptor,
    pub adapter: Adapter,
}

/// Read-mostly map from `(role, id)` to an implementation.
#[derive(Debug, Clone, Default)]
pub struct AdapterRegistry {
    entries: BTreeMap<(AdapterRole, String), Registered>,
}

macro_rules! typed_resolve {
    ($($fn_name:ident => $variant:ident : $tr:ident),* $(,)?) => {
        $(
            pub fn $fn_name(&self, id: &str) -> Result<Arc<dyn $tr>> {
                match &self.resolve(AdapterRole::$variant, id)?.adapter {
                    Adapter::$variant(a) => Ok(Arc::clone(a)),
                    other => unreachable!("registry invariant: {:?} stored under {}", other, AdapterRole::$variant),
                }
            }
        )*
    };
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with every mock implementation.
    pub fn with_mocks() -> Self {
        let mut reg = Self::new();
        mock::register_all(&mut reg).expect("mock registrations are unique");
        reg
    }

    pub fn register(&mut self, descriptor: AdapterDescriptor, adapter: Adapter) -> Result<()> {
        descriptor.validate()?;
        if descriptor.role != adapter.role() {
            return Err(Error::Registry(format!(
                "descriptor role {} does not match implementation role {}",
                descriptor.role,
                adapter.role()
            )));
        }
        let key = (descriptor.role, descriptor.id.clone());
        if self.entries.contains_key(&key) {
            return Err(Error::Registry(format!(
                "{} adapter {:?} already registered",
                descriptor.role, descriptor.id
            )));
        }
        self.entries.insert(key, Registered { descriptor, adapter });
        Ok(())
    }

    pub fn resolve(&self, role: AdapterRole, id: &str) -> Result<&Registered> {
        self.entries.get(&(role, id.to_string())).ok_or_else(|| Error::Lookup {
            role: role.to_string(),
            id: id.to_string(),
            available: {
                let ids = self.ids(role);
                if ids.is_empty() {
                    "none".to_string()
                } else {
                    ids.join(", ")
                }
            },
        })
    }

    pub fn ids(&self, role: AdapterRole) -> Vec<String> {
        self.entries
            .keys()
            .filter(|(r, _)| *r == role)
            .map(|(_, id)| id.clone())
            .collect()
    }

    pub fn descriptor(&self, role: AdapterRole, id: &str) -> Result<&AdapterDescriptor> {
        Ok(&self.resolve(role, id)?.descriptor)
    }

    typed_resolve! {
        downloader => Downloader: Downloader,
        decoder => Decoder: Decoder,
        denoiser => Denoise: Denoiser,
        stems => Stems: StemSeparator,
        codec => Codec: Codec,
        semantic_encoder => SemanticEncoder: SemanticEncoder,
        token_quantizer => TokenQuantizer: TokenQuantizer,
        tts => Tts: TtsBackend,
        vc => Vc: VcBackend,
        asr => Asr: Asr,
        diarizer => Diarization: Diarizer,
        speaker_embedder => SpeakerEmbedding: SpeakerEmbedder,
        transcoder => Transcode: Transcoder,
    }
}
